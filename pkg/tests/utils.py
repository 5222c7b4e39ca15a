# coding: utf-8
# Copyright 2026 The TxRPT Developers.  All rights reserved.
# Use of this source code is governed by the Apache License that can be
# found in the LICENSE file.

from __future__ import absolute_import, division

import os

import numpy as np
from twisted.trial import unittest

from txrpt import tensor as T
from txrpt.config import ModelConfig
from txrpt.model import RPTModel
from txrpt.scenes import generate_scene


LONG_SKIP = None if os.environ.get("TXRPT_LONG_TESTS") else \
    "long acceptance run; set TXRPT_LONG_TESTS=1 to enable"


def painted_grid(height, width, k, channels=1):
    """A map whose grid cell ``a`` holds the value ``a * 100`` in every channel."""
    grid = np.zeros((height, width, channels))
    th, tw = height // k, width // k
    for a in range(k * k):
        row, col = divmod(a, k)
        grid[row * th:(row + 1) * th, col * tw:(col + 1) * tw] = a * 100
    return grid


def wide(values, requires_grad=False):
    with T.precision("wide"):
        return T.Tensor(values, requires_grad=requires_grad)


def set_matrix(layer, weight, bias=None):
    layer.weight.data[...] = weight
    if layer.bias is not None:
        layer.bias.data[...] = 0 if bias is None else bias


def zero_branch_outputs(decoder):
    """Zero every residual branch output projection, as at initialization."""
    for layer in decoder.layers:
        for branch in (layer.self_attn.out_proj, layer.cross_attn.out_proj, layer.feed_forward.contract):
            set_matrix(branch, 0)


class WideTestCase(unittest.TestCase):
    """Creates every tensor in 64-bit precision."""

    def setUp(self):
        T.set_precision("wide")
        self.addCleanup(T.set_precision, "standard")


class ModelTestCase(WideTestCase):
    """A fresh micro model and one of its scenes per test."""

    config_overrides = {}

    def make_config(self):
        return ModelConfig.micro(**self.config_overrides)

    def setUp(self):
        super(ModelTestCase, self).setUp()
        self.config = self.make_config()
        self.model = RPTModel(self.config)
        self.scene = generate_scene(3, self.config)
