# Copyright 2026 The TxRPT Developers.  All rights reserved.
# Use of this source code is governed by the Apache License that can be
# found in the LICENSE file.

"""
Checkpoint files.

Layout, all integers little-endian int32::

    b"RPT1"
    config length, config text (utf-8, ``key = value`` lines)
    tensor count
    per tensor: name length, name (utf-8), rank, extents..., values

Values are little-endian float32, or float64 when the config block says
``precision = wide``.
"""

from __future__ import absolute_import, division

import logging
import struct
from collections import OrderedDict

import numpy as np
from twisted.python import log

from txrpt.config import format_config, parse_config
from txrpt.errors import CheckpointError, ConfigurationError
from txrpt.model import RPTModel


MAGIC = b"RPT1"

_VALUE_TYPES = {
    "standard": np.dtype("<f4"),
    "wide": np.dtype("<f8"),
}


def _value_type(config):
    return _VALUE_TYPES[config.precision]


def encode_checkpoint(config, tensors):
    """Serialize ``config`` and an ordered ``name -> array`` mapping to bytes."""
    value_type = _value_type(config)
    text = format_config(config).encode("utf-8")
    iovec = [MAGIC, struct.pack("<i", len(text)), text, struct.pack("<i", len(tensors))]
    for name, values in tensors.items():
        values = np.asarray(getattr(values, "data", values))
        encoded = name.encode("utf-8")
        iovec.append(struct.pack("<i", len(encoded)))
        iovec.append(encoded)
        iovec.append(struct.pack("<i", values.ndim))
        iovec.append(struct.pack("<{0}i".format(values.ndim), *values.shape))
        iovec.append(np.ascontiguousarray(values, dtype=value_type).tobytes())
    return b"".join(iovec)


def _unpack(fmt, data, offset):
    size = struct.calcsize(fmt)
    if offset + size > len(data):
        raise CheckpointError("TxRPT: checkpoint truncated at byte {0}".format(offset))
    return struct.unpack(fmt, data[offset:offset + size]), offset + size


def _read_bytes(data, offset, length):
    if length < 0 or offset + length > len(data):
        raise CheckpointError("TxRPT: checkpoint truncated at byte {0}".format(offset))
    return data[offset:offset + length], offset + length


def decode_checkpoint(data):
    """Inverse of :func:`encode_checkpoint`; returns ``(config, OrderedDict of arrays)``."""
    if data[:4] != MAGIC:
        raise CheckpointError("TxRPT: bad checkpoint magic {0!r}".format(data[:4]))
    offset = 4
    (text_length,), offset = _unpack("<i", data, offset)
    text, offset = _read_bytes(data, offset, text_length)
    try:
        config = parse_config(text.decode("utf-8"))
    except (ConfigurationError, UnicodeDecodeError) as e:
        raise CheckpointError("TxRPT: bad checkpoint config block: {0}".format(e))
    value_type = _value_type(config)

    (count,), offset = _unpack("<i", data, offset)
    if count < 0:
        raise CheckpointError("TxRPT: negative tensor count {0}".format(count))
    tensors = OrderedDict()
    for _ in range(count):
        (name_length,), offset = _unpack("<i", data, offset)
        name, offset = _read_bytes(data, offset, name_length)
        name = name.decode("utf-8")
        (rank,), offset = _unpack("<i", data, offset)
        if rank < 0:
            raise CheckpointError("TxRPT: negative rank for tensor {0}".format(name))
        shape, offset = _unpack("<{0}i".format(rank), data, offset)
        if any(extent < 0 for extent in shape):
            raise CheckpointError("TxRPT: negative extent in tensor {0}".format(name))
        raw, offset = _read_bytes(data, offset, int(np.prod(shape)) * value_type.itemsize)
        tensors[name] = np.frombuffer(raw, dtype=value_type).reshape(shape).copy()
    if offset != len(data):
        raise CheckpointError("TxRPT: {0} trailing bytes after the last tensor".format(len(data) - offset))
    return config, tensors


def dump_checkpoint(path, config, tensors):
    with open(path, "wb") as f:
        f.write(encode_checkpoint(config, tensors))
    log.msg("TxRPT: wrote checkpoint {0} ({1} tensors)".format(path, len(tensors)), logLevel=logging.INFO)


def load_checkpoint(path):
    with open(path, "rb") as f:
        return decode_checkpoint(f.read())


def model_tensors(model):
    return OrderedDict(model.named_parameters())


def restore(model, tensors):
    """Copy checkpointed values into ``model`` in place.

    Every model tensor must be present with its exact shape; extra entries,
    such as optimizer moments, are ignored.
    """
    for name, param in model.named_parameters():
        if name not in tensors:
            raise CheckpointError("TxRPT: checkpoint has no tensor {0}".format(name))
        values = tensors[name]
        if values.shape != param.shape:
            raise CheckpointError("TxRPT: tensor {0} has shape {1}, model expects {2}"
                                  .format(name, values.shape, param.shape))
        param.data[...] = values
    return model


def save_model(model, path):
    dump_checkpoint(path, model.config, model_tensors(model))


def load_model(path):
    config, tensors = load_checkpoint(path)
    return restore(RPTModel(config), tensors)
