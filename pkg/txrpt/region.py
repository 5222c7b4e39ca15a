# Copyright 2026 The TxRPT Developers.  All rights reserved.
# Use of this source code is governed by the Apache License that can be
# found in the LICENSE file.

"""
Region prompts: splitting feature maps into k x k tokens, deriving the
prompt position embedding from the visual position field, and the gated
character-token interactions before and after encoding.

Token ``a`` occupies grid cell ``(a // k, a % k)``.  Character ``a`` of the
region prompt is bound to token ``a`` and only ever exchanges information
with it.  Both directions of an interaction read the values from before
the update.
"""

from __future__ import absolute_import, division

from collections import namedtuple

import numpy as np

from txrpt import tensor as T
from txrpt.errors import ConfigurationError, ContractError, DimensionError
from txrpt.nn import LinearLayer, Module, decoder_increment
from txrpt.tensor import Parameter


class RegionGrid(namedtuple("RegionGrid", ["k", "token_height", "token_width"])):

    @classmethod
    def for_map(cls, height, width, k):
        if k <= 0 or height % k or width % k:
            raise ConfigurationError("TxRPT: a {0}x{1} map cannot be tiled by a {2}x{2} grid".format(height, width, k))
        return cls(k, height // k, width // k)

    @property
    def count(self):
        return self.k * self.k

    def cell(self, a):
        return divmod(a, self.k)

    def bounds(self, a):
        row, col = self.cell(a)
        return (slice(row * self.token_height, (row + 1) * self.token_height),
                slice(col * self.token_width, (col + 1) * self.token_width))


def split_feature_map(I_i, k):
    if I_i.ndim != 3:
        raise DimensionError("TxRPT: expected an h x w x c map, got {0}".format(I_i.shape))
    grid = RegionGrid.for_map(I_i.shape[0], I_i.shape[1], k)
    return [I_i[grid.bounds(a) + (slice(None),)] for a in range(grid.count)]


def concat_tokens(tokens):
    tokens = list(tokens)
    k = int(round(np.sqrt(len(tokens))))
    if not tokens or k * k != len(tokens):
        raise DimensionError("TxRPT: {0} tokens do not form a square grid".format(len(tokens)))
    shape = tokens[0].shape
    if len(shape) != 3 or any(t.shape != shape for t in tokens):
        raise DimensionError("TxRPT: token shapes differ: {0}".format(sorted(set(t.shape for t in tokens))))
    if k == 1:
        return tokens[0]
    rows = [T.concat(tokens[r * k:(r + 1) * k], axis=1) for r in range(k)]
    return T.concat(rows, axis=0)


def derive_shared_position_embedding(P, k, ln1):
    """Mean-pool each position token of ``P`` and project it to prompt width."""
    field = getattr(P, "field", P)
    if ln1.in_width != field.shape[-1]:
        raise DimensionError("TxRPT: projection expects width {0}, position field has {1}"
                             .format(ln1.in_width, field.shape[-1]))
    pooled = [T.reshape(T.mean_over_axes(token, [0, 1]), (1, field.shape[-1])) for token in split_feature_map(field, k)]
    return ln1(T.concat(pooled, axis=0))


class InteractionGates(Module):

    def __init__(self, value=0.0):
        self.l1 = Parameter(value)
        self.l2 = Parameter(value)
        self.l3 = Parameter(value)
        self.l4 = Parameter(value)

    def set(self, value):
        for gate in (self.l1, self.l2, self.l3, self.l4):
            gate.data[...] = value


class WidthAdapter(Module):
    """Frozen random maps from two input widths into a decoder width and back out."""

    def __init__(self, query_width, memory_width, decoder_width, rng, out_width=None):
        self.query_in = LinearLayer(query_width, decoder_width, rng, trainable=False,
                                    std=query_width ** -0.5, bias=False)
        self.memory_in = LinearLayer(memory_width, decoder_width, rng, trainable=False,
                                     std=memory_width ** -0.5, bias=False)
        self.out = LinearLayer(decoder_width, out_width or query_width, rng, trainable=False,
                               std=decoder_width ** -0.5, bias=False)


def _cross_increment(decoder, adapter, query, memory):
    delta = decoder_increment(decoder, adapter.query_in(query), adapter.memory_in(memory))
    return adapter.out(delta)


def _gated(gate, delta):
    return T.expand(gate, delta.shape) * delta


def _stack_tokens(tokens):
    shape = tokens[0].shape
    if any(t.shape != shape for t in tokens):
        raise ContractError("TxRPT: region tokens have different shapes")
    return T.stack([T.reshape(t, (shape[0] * shape[1], shape[2])) for t in tokens])


def _unstack_tokens(batch, shape):
    return [T.reshape(token, shape) for token in T.unstack(batch)]


def pre_encode_interaction(chars, pos_chars, tokens, pos_tokens, gates, dec1, dec2, proj_vis2txt, proj_txt2vis):
    """Exchange information between each character and its own token before encoding.

    :param chars: region prompt, one row per character.
    :param pos_chars: prompt position embedding, same shape as ``chars``.
    :param tokens: region visual tokens in grid order.
    :param pos_tokens: matching tokens of the visual position field.
    :returns: ``(chars + positions, tokens + positions)`` after the gated updates.
    """
    n = chars.shape[0]
    if pos_chars.shape != chars.shape or len(tokens) != n or len(pos_tokens) != n:
        raise ContractError("TxRPT: {0} characters cannot pair with {1} tokens".format(n, len(tokens)))
    if any(t.shape != p.shape for t, p in zip(tokens, pos_tokens)):
        raise ContractError("TxRPT: tokens and position tokens differ in shape")

    text = T.reshape(chars + pos_chars, (n, 1, chars.shape[1]))
    visual = _stack_tokens([t + p for t, p in zip(tokens, pos_tokens)])
    text_delta = _cross_increment(dec1, proj_vis2txt, text, visual)
    visual_delta = _cross_increment(dec2, proj_txt2vis, visual, text)
    text = text + _gated(gates.l1, text_delta)
    visual = visual + _gated(gates.l2, visual_delta)
    return T.reshape(text, chars.shape), _unstack_tokens(visual, tokens[0].shape)


def split_embeddings(I_o, T_p, k):
    tokens = split_feature_map(I_o, k)
    if T_p.ndim != 2 or T_p.shape[0] != len(tokens):
        raise ContractError("TxRPT: {0} prompt rows cannot pair with {1} tokens".format(T_p.shape[0], len(tokens)))
    return tokens, [T_p[a:a + 1] for a in range(len(tokens))]


def post_encode_interaction(chars, tokens, gates, dec3, dec4, proj_vis2txt, proj_txt2vis):
    """Per-index gated cross-attention between encoded characters and tokens."""
    if len(chars) != len(tokens) or not chars:
        raise ContractError("TxRPT: {0} characters cannot pair with {1} tokens".format(len(chars), len(tokens)))
    if any(c.shape != chars[0].shape or c.shape[0] != 1 for c in chars):
        raise ContractError("TxRPT: every encoded character must be a single row")

    text = T.stack(chars)
    visual = _stack_tokens(tokens)
    text_delta = _cross_increment(dec3, proj_vis2txt, text, visual)
    visual_delta = _cross_increment(dec4, proj_txt2vis, visual, text)
    text = text + _gated(gates.l3, text_delta)
    visual = visual + _gated(gates.l4, visual_delta)
    return T.unstack(text), _unstack_tokens(visual, tokens[0].shape)
