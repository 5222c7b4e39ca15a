# Copyright 2026 The TxRPT Developers.  All rights reserved.
# Use of this source code is governed by the Apache License that can be
# found in the LICENSE file.

"""
Image-text matching: the global and region score maps, their enhancement
and decoder-mediated fusion, and the upsampling to pixel resolution.

Both matchings L2-normalize text and visual embeddings before the dot
product, so logits stay within [-1/tau, 1/tau].
"""

from __future__ import absolute_import, division

from collections import namedtuple

from txrpt import tensor as T
from txrpt.errors import ContractError, DimensionError
from txrpt.nn import LinearLayer, Module, decoder_increment
from txrpt.region import concat_tokens


FEATURE_LEVEL = "feature"
PIXEL_LEVEL = "pixel"


class ScoreMap(namedtuple("ScoreMap", ["grid", "resolution"])):
    """A single-channel h x w x 1 score tensor tagged with its resolution."""

    def __new__(cls, grid, resolution=FEATURE_LEVEL):
        if grid.ndim != 3 or grid.shape[2] != 1:
            raise DimensionError("TxRPT: a score map is h x w x 1, got {0}".format(grid.shape))
        if resolution not in (FEATURE_LEVEL, PIXEL_LEVEL):
            raise ContractError("TxRPT: unknown score map resolution {0!r}".format(resolution))
        return super(ScoreMap, cls).__new__(cls, grid, resolution)

    @property
    def shape(self):
        return self.grid.shape


def _grid(S):
    return S.grid if isinstance(S, ScoreMap) else S


def _check_temperature(tau):
    if tau <= 0:
        raise ContractError("TxRPT: temperature must be positive, got {0}".format(tau))


def global_text_vector(T_o):
    """The last row of the encoded text sequence."""
    return T_o[T_o.shape[0] - 1:]


def global_score_map(T_o, I_o, tau):
    _check_temperature(tau)
    if T_o.ndim != 2 or I_o.ndim != 3 or T_o.shape[1] != I_o.shape[2]:
        raise DimensionError("TxRPT: text {0} and image {1} embeddings differ in width".format(T_o.shape, I_o.shape))
    h, w, c = I_o.shape
    text = T.l2_normalize(global_text_vector(T_o))
    visual = T.l2_normalize(T.reshape(I_o, (h * w, c)))
    logits = T.matmul(visual, T.transpose(text)) / tau
    return ScoreMap(T.reshape(T.sigmoid(logits), (h, w, 1)))


def region_score_map(chars, tokens, tau):
    """Score every token position against its own character, then reassemble the grid."""
    _check_temperature(tau)
    if len(chars) != len(tokens) or not chars:
        raise ContractError("TxRPT: {0} characters cannot pair with {1} tokens".format(len(chars), len(tokens)))
    th, tw, c = tokens[0].shape
    text = T.l2_normalize(T.stack(chars))
    visual = T.l2_normalize(T.stack([T.reshape(t, (th * tw, c)) for t in tokens]))
    scores = T.sigmoid(T.matmul(visual, T.transpose(text)) / tau)
    return ScoreMap(concat_tokens([T.reshape(s, (th, tw, 1)) for s in T.unstack(scores)]))


class ChannelAdapter(Module):
    """Frozen lift of 1-channel scores into decoder width and back."""

    def __init__(self, decoder_width, rng):
        self.lift = LinearLayer(1, decoder_width, rng, trainable=False, std=1.0, bias=False)
        self.drop = LinearLayer(decoder_width, 1, rng, trainable=False, std=decoder_width ** -0.5, bias=False)


def feature_fusion(S_glo, S_reg, fusion_dec, adapter):
    """Decoder over positions: S_glo as query, S_reg as key and value."""
    grid_glo, grid_reg = _grid(S_glo), _grid(S_reg)
    h, w, _ = grid_glo.shape
    query = adapter.lift(T.reshape(grid_glo, (h * w, 1)))
    memory = adapter.lift(T.reshape(grid_reg, (h * w, 1)))
    return ScoreMap(T.reshape(adapter.drop(decoder_increment(fusion_dec, query, memory)), (h, w, 1)))


def fuse_score_maps(S_glo, S_reg, lambda_mix, fusion_dec, adapter, use_fusion=True, use_enhancement=True):
    """Return ``(S, S_FE, S_FF)``; ``S_FF`` is None when fusion is off."""
    grid_glo, grid_reg = _grid(S_glo), _grid(S_reg)
    if grid_glo.shape != grid_reg.shape:
        raise DimensionError("TxRPT: cannot fuse score maps {0} and {1}".format(grid_glo.shape, grid_reg.shape))
    enhanced = ScoreMap(grid_glo + grid_reg) if use_enhancement else ScoreMap(grid_glo)
    if not use_fusion:
        return enhanced, enhanced, None
    fused = feature_fusion(S_glo, S_reg, fusion_dec, adapter)
    return ScoreMap(enhanced.grid + fused.grid * lambda_mix), enhanced, fused


def upsample_to_pixels(S, height, width):
    if S.resolution != FEATURE_LEVEL:
        raise ContractError("TxRPT: score map is already at pixel level")
    return ScoreMap(T.bilinear_upsample(S.grid, height, width), PIXEL_LEVEL)
