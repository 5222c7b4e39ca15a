# Copyright 2026 The TxRPT Developers.  All rights reserved.
# Use of this source code is governed by the Apache License that can be
# found in the LICENSE file.

"""
Binary portable pixmaps (P6) in and graymaps (P5) out.
"""

from __future__ import absolute_import, division

import numpy as np
from PIL import Image

from txrpt.errors import ContractError, DimensionError
from txrpt.matching import PIXEL_LEVEL, ScoreMap


def quantize(values):
    """``floor(255 * clamp(v, 0, 1) + 0.5)`` as bytes; halves round up."""
    values = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    return np.floor(255 * values + 0.5).astype(np.uint8)


def read_pixmap(path):
    """An H x W x 3 float array in [0, 1]."""
    with Image.open(path) as image:
        if image.mode != "RGB":
            raise DimensionError("TxRPT: {0} is a {1} image, expected a colour pixmap".format(path, image.mode))
        return np.asarray(image, dtype=np.uint8).astype(np.float64) / 255


def write_pixmap(path, image):
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise DimensionError("TxRPT: a pixmap is H x W x 3, got {0}".format(image.shape))
    Image.fromarray(quantize(image)).save(path, format="PPM")


def read_graymap(path):
    with Image.open(path) as image:
        if image.mode != "L":
            raise DimensionError("TxRPT: {0} is a {1} image, expected a graymap".format(path, image.mode))
        return np.asarray(image, dtype=np.uint8).copy()


def write_graymap(path, values):
    """Write an H x W byte array; boolean masks are stored as 0 and 255."""
    values = np.asarray(values)
    if values.ndim == 3 and values.shape[2] == 1:
        values = values[:, :, 0]
    if values.ndim != 2:
        raise DimensionError("TxRPT: a graymap is H x W, got {0}".format(values.shape))
    if values.dtype == np.bool_:
        values = values.astype(np.uint8) * 255
    Image.fromarray(values.astype(np.uint8)).save(path, format="PPM")


def export_heatmap(S, path):
    """Write a pixel-level score map as an 8-bit graymap; returns the bytes written."""
    if not isinstance(S, ScoreMap) or S.resolution != PIXEL_LEVEL:
        raise ContractError("TxRPT: only pixel-level score maps can be exported")
    pixels = quantize(S.grid.data[:, :, 0])
    write_graymap(path, pixels)
    return pixels
