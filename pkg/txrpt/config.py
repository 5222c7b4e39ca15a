# Copyright 2026 The TxRPT Developers.  All rights reserved.
# Use of this source code is governed by the Apache License that can be
# found in the LICENSE file.

"""
Model configuration and the flat ``key = value`` config file format.
"""

from __future__ import absolute_import, division

from collections import OrderedDict, namedtuple

from txrpt.errors import ConfigurationError
from txrpt.tensor import PRECISIONS


_DEFAULTS = OrderedDict([
    # geometry
    ("height", 48),
    ("width", 48),
    ("downsample", 8),
    ("grid", 3),
    # prompts and widths
    ("general_prompt_length", 4),
    ("fixed_word", "text"),
    ("prompt_width", 16),
    ("embed_width", 32),
    ("feature_width", 64),
    # matching and loss weights
    ("temperature", 0.07),
    ("lambda_mix", 2.0),
    ("lambda_bd", 1.0),
    ("lambda_mat", 1.0),
    # decoders
    ("decoder_layers", 2),
    ("decoder_heads", 3),
    ("decoder_width", 12),
    ("gate_init", 0.1),
    # frozen text encoder and attention pooling
    ("text_layers", 2),
    ("text_heads", 4),
    ("pool_heads", 4),
    ("pool_residual", True),
    # detection head
    ("head_channels", 8),
    ("db_amplification", 50.0),
    ("db_alpha", 1.0),
    ("db_beta", 1.0),
    ("boundary_radius", 2),
    # ablation flags
    ("use_general_prompt", True),
    ("use_region_prompt", True),
    ("use_feature_enhancement", True),
    ("use_shared_pos_embed", True),
    ("use_interaction", True),
    ("use_bd_loss", True),
    ("use_feature_fusion", True),
    # training and runtime
    ("learning_rate", 1e-3),
    ("batch_size", 4),
    ("checkpoint_every", 100),
    ("log_every", 10),
    ("precision", "standard"),
    ("seed", 0),
    ("threshold", 0.3),
])

ABLATION_FLAGS = tuple(name for name in _DEFAULTS if name.startswith("use_"))

_TRUE = frozenset(["true", "yes", "on", "1"])
_FALSE = frozenset(["false", "no", "off", "0"])


class ModelConfig(namedtuple("ModelConfig", list(_DEFAULTS))):
    """Every dimension, hyperparameter and ablation flag of a model.

    Unspecified fields take the toy defaults.  Call :meth:`validate` before
    building a model from a hand-made configuration.
    """

    def __new__(cls, **kwargs):
        unknown = sorted(set(kwargs) - set(_DEFAULTS))
        if unknown:
            raise ConfigurationError("TxRPT: unknown configuration keys: {0}".format(", ".join(unknown)))
        values = OrderedDict(_DEFAULTS)
        values.update(kwargs)
        return super(ModelConfig, cls).__new__(cls, **values)

    @classmethod
    def toy(cls, **overrides):
        return cls(**overrides)

    @classmethod
    def micro(cls, **overrides):
        """The smallest model that exercises every path; used for gradient checks."""
        values = dict(height=16, width=16, downsample=8, grid=2,
                      prompt_width=8, embed_width=8, feature_width=16,
                      decoder_layers=1, decoder_heads=2, decoder_width=8,
                      text_layers=1, text_heads=2, pool_heads=2, head_channels=2,
                      batch_size=1, precision="wide")
        values.update(overrides)
        return cls(**values)

    @classmethod
    def paper(cls, **overrides):
        values = dict(height=288, width=288, downsample=32, grid=3,
                      prompt_width=512, embed_width=1024, feature_width=2048,
                      decoder_layers=4, decoder_heads=3, decoder_width=258,
                      text_layers=2, text_heads=8, pool_heads=32, head_channels=16)
        values.update(overrides)
        return cls(**values)

    @property
    def region_length(self):
        return self.grid * self.grid

    @property
    def fixed_length(self):
        return 1

    @property
    def text_length(self):
        general = self.general_prompt_length if self.use_general_prompt else 0
        return self.fixed_length + general

    @property
    def context_length(self):
        return max(self.fixed_length + self.general_prompt_length, self.region_length)

    @property
    def feature_height(self):
        return self.height // self.downsample

    @property
    def feature_width_cells(self):
        return self.width // self.downsample

    @property
    def token_height(self):
        return self.feature_height // self.grid

    @property
    def token_width(self):
        return self.feature_width_cells // self.grid

    @property
    def uses_matching(self):
        """False only for the baseline, whose head reads the image alone."""
        return self.use_general_prompt or self.use_region_prompt

    @property
    def detail_width(self):
        """Channels of the pixel-level visual input to the detection head."""
        return 3 + max(self.feature_width // 4, 1)

    @property
    def score_offset(self):
        # S_glo and S_reg are sigmoids; the fusion increment is centred on 0
        if self.use_region_prompt and self.use_feature_enhancement:
            return 1.0
        return 0.5

    def validate(self):
        positive = ("height", "width", "downsample", "grid", "prompt_width", "embed_width",
                    "feature_width", "decoder_width", "decoder_heads", "text_heads", "pool_heads",
                    "head_channels", "batch_size", "checkpoint_every", "log_every")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigurationError("TxRPT: {0} must be positive, got {1}".format(name, getattr(self, name)))
        for name in ("general_prompt_length", "decoder_layers", "text_layers", "boundary_radius"):
            if getattr(self, name) < 0:
                raise ConfigurationError("TxRPT: {0} must not be negative".format(name))
        cell = self.downsample * self.grid
        if self.height % cell or self.width % cell:
            raise ConfigurationError("TxRPT: image {0}x{1} is not tiled by {2}x{2} regions of stride {3}"
                                     .format(self.height, self.width, self.grid, self.downsample))
        if self.temperature <= 0:
            raise ConfigurationError("TxRPT: temperature must be positive")
        if self.lambda_mix < 0:
            raise ConfigurationError("TxRPT: lambda_mix must not be negative")
        if self.db_amplification <= 0:
            raise ConfigurationError("TxRPT: db_amplification must be positive")
        for width, heads in (("decoder_width", "decoder_heads"), ("prompt_width", "text_heads"),
                             ("feature_width", "pool_heads")):
            if getattr(self, width) % getattr(self, heads):
                raise ConfigurationError("TxRPT: {0}={1} is not divisible by {2}={3}".format(
                    width, getattr(self, width), heads, getattr(self, heads)))
        if self.precision not in PRECISIONS:
            raise ConfigurationError("TxRPT: unknown precision {0!r}".format(self.precision))
        if not 0 < self.threshold < 1:
            raise ConfigurationError("TxRPT: threshold must lie in (0, 1)")
        return self


def _coerce(key, text, lineno):
    default = _DEFAULTS[key]
    try:
        if isinstance(default, bool):
            lowered = text.lower()
            if lowered in _TRUE:
                return True
            if lowered in _FALSE:
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError:
        raise ConfigurationError("TxRPT: line {0}: bad value {1!r} for {2}".format(lineno, text, key))
    return text


def parse_config(text):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError("TxRPT: line {0}: expected 'key = value', got {1!r}".format(lineno, raw))
        key, value = [part.strip() for part in line.split("=", 1)]
        if key not in _DEFAULTS:
            raise ConfigurationError("TxRPT: line {0}: unknown configuration key {1!r}".format(lineno, key))
        values[key] = _coerce(key, value, lineno)
    return ModelConfig(**values)


def load_config(path):
    with open(path) as f:
        return parse_config(f.read())


def _format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_config(config):
    return "".join("{0} = {1}\n".format(key, _format_value(value)) for key, value in config._asdict().items())
