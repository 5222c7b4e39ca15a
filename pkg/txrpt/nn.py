# Copyright 2026 The TxRPT Developers.  All rights reserved.
# Use of this source code is governed by the Apache License that can be
# found in the LICENSE file.

"""
Neural layers built on :mod:`txrpt.tensor`.

Sequences are ``[n x width]`` tensors, or ``[batch x n x width]`` stacks of
independent sequences; attention never mixes batch entries.  Blocks are
pre-norm residual stacks without dropout, so a forward pass is a pure
function of its inputs.
"""

from __future__ import absolute_import, division

import math

import numpy as np

from txrpt import tensor as T
from txrpt.errors import ContractError, DimensionError
from txrpt.tensor import Parameter


INIT_STD = 0.02
LAYER_NORM_EPS = 1e-5


def normal(rng, shape, std=INIT_STD):
    return rng.normal(0.0, std, size=shape)


class Module(object):
    """Container of parameters and sub-modules, walked in attribute order."""

    def named_parameters(self, prefix=""):
        for key, value in vars(self).items():
            if key.startswith("_"):
                continue
            if isinstance(value, Parameter):
                yield prefix + key, value
            elif isinstance(value, Module):
                for item in value.named_parameters(prefix + key + "."):
                    yield item
            elif isinstance(value, (list, tuple)):
                for i, entry in enumerate(value):
                    if isinstance(entry, Module):
                        for item in entry.named_parameters("{0}{1}.{2}.".format(prefix, key, i)):
                            yield item

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def trainable_parameters(self):
        return [(name, p) for name, p in self.named_parameters() if p.requires_grad]

    def frozen_parameters(self):
        return [(name, p) for name, p in self.named_parameters() if not p.requires_grad]

    def freeze(self):
        for p in self.parameters():
            p.requires_grad = False
        return self

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()


class LinearLayer(Module):
    """``x . W + b`` with ``W`` of shape in x out.

    :param zero: start with an all-zero weight (residual branch outputs).
    :param std: standard deviation of the normal initialization.
    """

    def __init__(self, in_width, out_width, rng, trainable=True, zero=False, std=INIT_STD, bias=True):
        weight = np.zeros((in_width, out_width)) if zero else normal(rng, (in_width, out_width), std)
        self.weight = Parameter(weight, trainable=trainable)
        self.bias = Parameter(np.zeros(out_width), trainable=trainable) if bias else None
        self.in_width = in_width
        self.out_width = out_width

    @property
    def trainable(self):
        return self.weight.requires_grad

    def __call__(self, x):
        return linear_forward(self, x)


def linear_forward(layer, x):
    if x.ndim < 1 or x.shape[-1] != layer.in_width:
        raise DimensionError("TxRPT: linear layer expects last extent {0}, got shape {1}"
                             .format(layer.in_width, x.shape))
    lead = x.shape[:-1]
    rows = int(np.prod(lead)) if lead else 1
    out = T.matmul(T.reshape(x, (rows, layer.in_width)), layer.weight)
    if layer.bias is not None:
        out = out + T.expand(layer.bias, out.shape)
    return T.reshape(out, lead + (layer.out_width,))


class LayerNorm(Module):
    """Normalization over the last axis with learned gain and shift."""

    def __init__(self, width, trainable=True):
        self.gain = Parameter(np.ones(width), trainable=trainable)
        self.shift = Parameter(np.zeros(width), trainable=trainable)
        self.width = width

    def __call__(self, x):
        if x.shape[-1] != self.width:
            raise DimensionError("TxRPT: layer norm expects width {0}, got shape {1}".format(self.width, x.shape))
        keep = x.shape[:-1] + (1,)
        mean = T.reshape(T.mean_over_axes(x, [-1]), keep)
        centered = x - T.expand(mean, x.shape)
        variance = T.reshape(T.mean_over_axes(centered * centered, [-1]), keep)
        scale = T.power(variance + LAYER_NORM_EPS, -0.5)
        normalized = centered * T.expand(scale, x.shape)
        return normalized * T.expand(self.gain, x.shape) + T.expand(self.shift, x.shape)


class MultiHeadAttention(Module):

    def __init__(self, model_width, head_count, rng, out_width=None, zero_out=False, trainable=True):
        if head_count <= 0 or model_width % head_count:
            raise DimensionError("TxRPT: width {0} is not divisible by {1} heads".format(model_width, head_count))
        self.head_count = head_count
        self.model_width = model_width
        self.q_proj = LinearLayer(model_width, model_width, rng, trainable=trainable)
        self.k_proj = LinearLayer(model_width, model_width, rng, trainable=trainable)
        self.v_proj = LinearLayer(model_width, model_width, rng, trainable=trainable)
        self.out_proj = LinearLayer(model_width, out_width or model_width, rng, trainable=trainable, zero=zero_out)

    def __call__(self, q, k, v):
        return mha_forward(self, q, k, v)


def mha_forward(attn, q, k, v):
    width = attn.model_width
    for name, x in (("query", q), ("key", k), ("value", v)):
        if x.shape[-1] != width:
            raise DimensionError("TxRPT: attention {0} width {1} != model width {2}".format(name, x.shape[-1], width))
    if k.shape != v.shape or k.shape[:-2] != q.shape[:-2]:
        raise DimensionError("TxRPT: attention shapes do not line up: q {0}, k {1}, v {2}"
                             .format(q.shape, k.shape, v.shape))
    if k.shape[-2] == 0:
        raise ContractError("TxRPT: attention over an empty key sequence")

    queries, keys, values = attn.q_proj(q), attn.k_proj(k), attn.v_proj(v)
    head_width = width // attn.head_count
    scale = 1 / math.sqrt(head_width)
    heads = []
    for h in range(attn.head_count):
        part = (Ellipsis, slice(h * head_width, (h + 1) * head_width))
        scores = T.matmul(queries[part], T.transpose(keys[part])) * scale
        weights = T.softmax(scores, axis=-1)
        if T.is_debug() and not np.allclose(weights.data.sum(axis=-1), 1, atol=1e-6):
            raise ContractError("TxRPT: attention weights of head {0} do not sum to 1".format(h))
        heads.append(T.matmul(weights, values[part]))
    return attn.out_proj(T.concat(heads, axis=-1))


class FeedForward(Module):

    def __init__(self, width, rng, zero_out=True, trainable=True):
        self.expand = LinearLayer(width, 4 * width, rng, trainable=trainable)
        self.contract = LinearLayer(4 * width, width, rng, trainable=trainable, zero=zero_out)

    def __call__(self, x):
        return self.contract(T.gelu(self.expand(x)))


class EncoderLayer(Module):

    def __init__(self, width, head_count, rng, zero_branches=True, trainable=True):
        self.norm1 = LayerNorm(width, trainable=trainable)
        self.self_attn = MultiHeadAttention(width, head_count, rng, zero_out=zero_branches, trainable=trainable)
        self.norm2 = LayerNorm(width, trainable=trainable)
        self.feed_forward = FeedForward(width, rng, zero_out=zero_branches, trainable=trainable)

    def __call__(self, x):
        h = self.norm1(x)
        x = x + self.self_attn(h, h, h)
        return x + self.feed_forward(self.norm2(x))


class DecoderLayer(Module):

    def __init__(self, width, head_count, rng, zero_branches=True, trainable=True):
        self.norm1 = LayerNorm(width, trainable=trainable)
        self.self_attn = MultiHeadAttention(width, head_count, rng, zero_out=zero_branches, trainable=trainable)
        self.norm2 = LayerNorm(width, trainable=trainable)
        self.cross_attn = MultiHeadAttention(width, head_count, rng, zero_out=zero_branches, trainable=trainable)
        self.norm3 = LayerNorm(width, trainable=trainable)
        self.feed_forward = FeedForward(width, rng, zero_out=zero_branches, trainable=trainable)

    def __call__(self, x, memory):
        h = self.norm1(x)
        x = x + self.self_attn(h, h, h)
        h = self.norm2(x)
        x = x + self.cross_attn(h, memory, memory)
        return x + self.feed_forward(self.norm3(x))


class TransformerEncoder(Module):
    """Stack of self-attention blocks; permutation-equivariant over rows."""

    def __init__(self, width, head_count=3, layer_count=4, rng=None, zero_branches=True, trainable=True):
        if width % head_count:
            raise DimensionError("TxRPT: width {0} is not divisible by {1} heads".format(width, head_count))
        rng = rng if rng is not None else np.random.default_rng(0)
        self.width = width
        self.head_count = head_count
        self.layers = [EncoderLayer(width, head_count, rng, zero_branches, trainable) for _ in range(layer_count)]

    @property
    def layer_count(self):
        return len(self.layers)

    def __call__(self, seq):
        return encoder_forward(self, seq)


def encoder_forward(enc, seq):
    if seq.ndim < 2 or seq.shape[-1] != enc.width:
        raise DimensionError("TxRPT: encoder expects [n x {0}] input, got {1}".format(enc.width, seq.shape))
    for layer in enc.layers:
        seq = layer(seq)
    return seq


class TransformerDecoder(Module):
    """Stack of self-attention, cross-attention and feed-forward blocks.

    Defaults follow the published detector: 4 layers of 3 heads.  All branch
    output projections start at zero, so a fresh decoder is the identity on
    its query sequence.
    """

    def __init__(self, width, head_count=3, layer_count=4, rng=None, zero_branches=True, trainable=True):
        if width % head_count:
            raise DimensionError("TxRPT: width {0} is not divisible by {1} heads".format(width, head_count))
        rng = rng if rng is not None else np.random.default_rng(0)
        self.width = width
        self.head_count = head_count
        self.layers = [DecoderLayer(width, head_count, rng, zero_branches, trainable) for _ in range(layer_count)]

    @property
    def layer_count(self):
        return len(self.layers)

    def __call__(self, query_seq, memory_seq):
        return decoder_forward(self, query_seq, memory_seq)


def decoder_forward(dec, query_seq, memory_seq):
    if query_seq.ndim < 2 or query_seq.shape[-1] != dec.width or memory_seq.shape[-1] != dec.width:
        raise DimensionError("TxRPT: decoder of width {0} got query {1} and memory {2}"
                             .format(dec.width, query_seq.shape, memory_seq.shape))
    if memory_seq.shape[-2] == 0:
        raise ContractError("TxRPT: decoder memory sequence is empty")
    for layer in dec.layers:
        query_seq = layer(query_seq, memory_seq)
    return query_seq


def decoder_increment(dec, query_seq, memory_seq):
    """What the decoder adds to its query: ``decoder(q, m) - q``."""
    return decoder_forward(dec, query_seq, memory_seq) - query_seq


class Conv2d(Module):
    """Square-kernel convolution over H x W x C maps with He-normal initialization."""

    def __init__(self, in_channels, out_channels, rng, kernel=3, stride=1, trainable=True):
        std = math.sqrt(2.0 / (kernel * kernel * in_channels))
        self.weight = Parameter(normal(rng, (kernel, kernel, in_channels, out_channels), std), trainable=trainable)
        self.bias = Parameter(np.zeros(out_channels), trainable=trainable)
        self.stride = stride
        self.padding = kernel // 2

    def __call__(self, x):
        return T.conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)
