# Copyright 2026 The TxRPT Developers.  All rights reserved.
# Use of this source code is governed by the Apache License that can be
# found in the LICENSE file.

"""
The three encoding paths of the detector.

* image: a small strided convolutional backbone, a learnable position field
  and a multi-head attention pool that keeps one embedding per position,
  plus the pixel-level detail the detection head reads;
* text: the frozen word embedding of the class name followed by the general
  prompt, run through a frozen transformer;
* prompt: the region prompt plus its position embedding, run through frozen
  copies of the text transformer.
"""

from __future__ import absolute_import, division

import numpy as np

from txrpt import tensor as T
from txrpt.errors import DimensionError, VocabularyError
from txrpt.nn import Conv2d, LayerNorm, LinearLayer, Module, MultiHeadAttention, TransformerEncoder, normal
from txrpt.tensor import Parameter


VOCABULARY = ("text", "word", "letter", "sign", "number", "title", "label", "caption")
VOCABULARY_SEED = 8191


class WordEmbedding(Module):
    """Fixed lookup table standing in for a tokenizer plus embedding matrix."""

    def __init__(self, width, seed=VOCABULARY_SEED):
        rng = np.random.default_rng(seed)
        self.table = Parameter(normal(rng, (len(VOCABULARY), width)), trainable=False)

    def lookup(self, key):
        try:
            row = VOCABULARY.index(key)
        except ValueError:
            raise VocabularyError("TxRPT: {0!r} is not in the vocabulary {1}".format(key, VOCABULARY))
        return self.table[row:row + 1]


def embed_fixed_word(embedding, vocabulary_key):
    return embedding.lookup(vocabulary_key)


class PromptBank(Module):
    """The frozen class-name embedding and the two learnable prompts."""

    def __init__(self, config, rng, embedding):
        self.embedding = embedding
        self.fixed_word = config.fixed_word
        embedding.lookup(config.fixed_word)
        if config.general_prompt_length:
            self.general = Parameter(normal(rng, (config.general_prompt_length, config.prompt_width)))
        else:
            self.general = None
        self.region = Parameter(normal(rng, (config.region_length, config.prompt_width)))

    @property
    def fixed(self):
        return self.embedding.lookup(self.fixed_word)


def build_text_input(bank, use_general_prompt=True):
    if bank.general is None or not use_general_prompt:
        return bank.fixed
    return T.concat([bank.fixed, bank.general], axis=0)


class _FrozenTextStack(Module):

    def encode_summed(self, seq):
        return self.projection(self.final_norm(self.transformer(seq)))


class TextEncoder(_FrozenTextStack):
    """Sequential position table, transformer and text projection; all frozen."""

    def __init__(self, config, rng):
        self.positions = Parameter(normal(rng, (config.context_length, config.prompt_width), 0.01),
                                   trainable=False)
        self.transformer = TransformerEncoder(config.prompt_width, config.text_heads, config.text_layers,
                                              rng, zero_branches=False, trainable=False)
        self.final_norm = LayerNorm(config.prompt_width, trainable=False)
        self.projection = LinearLayer(config.prompt_width, config.embed_width, rng, trainable=False,
                                      std=config.prompt_width ** -0.5, bias=False)


class PromptEncoder(_FrozenTextStack):
    """Frozen copies of the text encoder internals, without its position table."""

    def __init__(self, text_encoder):
        self.transformer = TransformerEncoder(text_encoder.transformer.width, text_encoder.transformer.head_count,
                                              text_encoder.transformer.layer_count,
                                              np.random.default_rng(0), zero_branches=False, trainable=False)
        self.final_norm = LayerNorm(text_encoder.final_norm.width, trainable=False)
        self.projection = LinearLayer(text_encoder.projection.in_width, text_encoder.projection.out_width,
                                      np.random.default_rng(0), trainable=False, bias=False)
        source = dict(text_encoder.named_parameters())
        for name, p in self.named_parameters():
            p.data[...] = source[name].data


def encode_text(encoder, T_i):
    n = T_i.shape[0]
    if T_i.ndim != 2 or n > encoder.positions.shape[0] or T_i.shape[1] != encoder.positions.shape[1]:
        raise DimensionError("TxRPT: text input of shape {0} does not fit position table {1}"
                             .format(T_i.shape, encoder.positions.shape))
    return encoder.encode_summed(T_i + encoder.positions[:n])


def encode_prompt(encoder, T_r, P_r):
    if T_r.shape != P_r.shape:
        raise DimensionError("TxRPT: region prompt {0} and its position embedding {1} differ"
                             .format(T_r.shape, P_r.shape))
    return encoder.encode_summed(T_r + P_r)


def _stride_plan(downsample, blocks=3):
    """Split ``downsample`` into per-block strides whose product is ``downsample``."""
    factors, n, p = [], downsample, 2
    while n > 1:
        while n % p == 0:
            factors.append(p)
            n //= p
        p += 1
    strides = [1] * blocks
    for f in sorted(factors, reverse=True):
        strides[strides.index(min(strides))] *= f
    return sorted(strides, reverse=True)


class ImageBackbone(Module):
    """Three strided 3x3 convolution blocks with GELU, H x W x 3 to (H/d) x (W/d) x C''."""

    def __init__(self, config, rng):
        width = config.feature_width
        channels = [3, max(width // 4, 1), max(width // 2, 1), width]
        self.strides = _stride_plan(config.downsample)
        self.blocks = [Conv2d(channels[i], channels[i + 1], rng, stride=s) for i, s in enumerate(self.strides)]
        self.height = config.height
        self.width = config.width

    def __call__(self, image):
        return encode_image(self, image)


def encode_image_stages(backbone, image):
    """The output of every backbone block, finest first."""
    if image.shape != (backbone.height, backbone.width, 3):
        raise DimensionError("TxRPT: expected a {0}x{1}x3 image, got {2}"
                             .format(backbone.height, backbone.width, image.shape))
    stages, x = [], image
    for block in backbone.blocks:
        x = T.gelu(block(x))
        stages.append(x)
    return stages


def encode_image(backbone, image):
    return encode_image_stages(backbone, image)[-1]


def detail_features(image, stages):
    """The centred image and its first backbone stage, side by side at pixel resolution.

    This is the visual input of the detection head; the score map is
    appended to it when there is one.
    """
    height, width, _ = image.shape
    return T.concat([image - 0.5, T.bilinear_upsample(stages[0], height, width)], axis=2)


class PositionEmbedding(Module):

    def __init__(self, config, rng):
        self.field = Parameter(normal(rng, (config.feature_height, config.feature_width_cells, config.feature_width)))

    @property
    def shape(self):
        return self.field.shape


class AttentionPool(Module):
    """Self-attention over all feature positions followed by a C'' to C projection.

    With ``config.pool_residual`` the attention output is added back onto its
    input before projecting, so a freshly initialized pool (near-uniform
    attention) still keeps one distinct embedding per position.  Without it
    the pool projects the attention output alone.
    """

    def __init__(self, config, rng):
        self.attention = MultiHeadAttention(config.feature_width, config.pool_heads, rng)
        self.projection = LinearLayer(config.feature_width, config.embed_width, rng,
                                      std=config.feature_width ** -0.5)
        self.residual = config.pool_residual

    def pool_summed(self, grid):
        h, w, c = grid.shape
        seq = T.reshape(grid, (h * w, c))
        attended = self.attention(seq, seq, seq)
        pooled = self.projection(seq + attended if self.residual else attended)
        return T.reshape(pooled, (h, w, self.projection.out_width))


def attention_pool(pool, I_i, P):
    field = P.field if isinstance(P, PositionEmbedding) else P
    if I_i.shape != field.shape:
        raise DimensionError("TxRPT: feature map {0} and position embedding {1} differ".format(I_i.shape, field.shape))
    return pool.pool_summed(I_i + field)
