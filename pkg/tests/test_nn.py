# coding: utf-8
# Copyright 2026 The TxRPT Developers.  All rights reserved.
# Use of this source code is governed by the Apache License that can be
# found in the LICENSE file.

from __future__ import absolute_import, division

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from tests.utils import WideTestCase, set_matrix, wide
from txrpt import tensor as T
from txrpt.errors import ContractError, DimensionError
from txrpt.nn import LinearLayer, MultiHeadAttention, TransformerDecoder, TransformerEncoder


class TestLinearLayer(WideTestCase):

    def setUp(self):
        super(TestLinearLayer, self).setUp()
        self.rng = np.random.default_rng(0)

    def test_Identity(self):
        layer = LinearLayer(2, 2, self.rng)
        set_matrix(layer, np.eye(2))
        assert_array_equal(layer(wide([[1, 2]])).data, [[1, 2]])

    def test_ZeroWeightGivesBias(self):
        layer = LinearLayer(2, 1, self.rng)
        set_matrix(layer, 0, [3])
        assert_array_equal(layer(wide([[5, 7]])).data, [[3]])

    def test_Averaging(self):
        layer = LinearLayer(2, 1, self.rng)
        set_matrix(layer, [[0.5], [0.5]])
        assert_array_equal(layer(wide([[2, 4]])).data, [[3]])

    def test_ThreeDimensionalInput(self):
        layer = LinearLayer(3, 2, self.rng)
        x = wide(self.rng.normal(size=(2, 4, 3)))
        expected = np.matmul(x.data, layer.weight.data) + layer.bias.data
        assert_allclose(layer(x).data, expected)

    def test_WidthMismatch(self):
        layer = LinearLayer(2, 2, self.rng)
        self.assertRaises(DimensionError, layer, wide([[1, 2, 3]]))


class TestMultiHeadAttention(WideTestCase):

    def setUp(self):
        super(TestMultiHeadAttention, self).setUp()
        self.rng = np.random.default_rng(1)

    def test_SingleKeyPassesValueThrough(self):
        attn = MultiHeadAttention(6, 3, self.rng)
        q = wide(self.rng.normal(size=(4, 6)))
        v = wide(self.rng.normal(size=(1, 6)))
        out = attn(q, v, v)
        expected = attn.out_proj(attn.v_proj(v)).data
        for row in out.data:
            assert_allclose(row, expected[0], atol=1e-12)

    def test_IdentityProjectionsOnRepeatedValue(self):
        attn = MultiHeadAttention(4, 2, self.rng)
        for layer in (attn.q_proj, attn.k_proj, attn.v_proj, attn.out_proj):
            set_matrix(layer, np.eye(4))
        u = np.array([0.5, -1.0, 2.0, 0.25])
        memory = wide(np.tile(u, (3, 1)))
        out = attn(wide(self.rng.normal(size=(2, 4))), memory, memory)
        assert_allclose(out.data, np.tile(u, (2, 1)), atol=1e-12)

    def test_OutputShape(self):
        attn = MultiHeadAttention(6, 3, self.rng)
        m = wide(self.rng.normal(size=(5, 6)))
        self.assertEqual(attn(wide(self.rng.normal(size=(2, 6))), m, m).shape, (2, 6))

    def test_WidthMismatch(self):
        attn = MultiHeadAttention(6, 3, self.rng)
        m = wide(np.ones((5, 4)))
        self.assertRaises(DimensionError, attn, wide(np.ones((2, 6))), m, m)

    def test_HeadsMustDivideWidth(self):
        self.assertRaises(DimensionError, MultiHeadAttention, 6, 4, self.rng)

    def test_WeightsSumToOneInDebugMode(self):
        attn = MultiHeadAttention(6, 3, self.rng)
        m = wide(self.rng.normal(size=(5, 6)) * 30)
        with T.debug_mode():
            attn(wide(self.rng.normal(size=(2, 6)) * 30), m, m)


class TestTransformerDecoder(WideTestCase):

    def setUp(self):
        super(TestTransformerDecoder, self).setUp()
        self.rng = np.random.default_rng(2)

    def test_ZeroBranchesPassQueryThrough(self):
        dec = TransformerDecoder(6, head_count=3, layer_count=2, rng=self.rng)
        q = wide(self.rng.normal(size=(3, 6)))
        m = wide(self.rng.normal(size=(4, 6)))
        assert_array_equal(dec(q, m).data, q.data)

    def test_OutputShape(self):
        dec = TransformerDecoder(6, rng=self.rng, zero_branches=False)
        q = wide(self.rng.normal(size=(1, 6)))
        m = wide(self.rng.normal(size=(4, 6)))
        self.assertEqual(dec(q, m).shape, (1, 6))

    def test_Deterministic(self):
        dec = TransformerDecoder(6, rng=self.rng, zero_branches=False)
        q = wide(self.rng.normal(size=(2, 6)))
        m = wide(self.rng.normal(size=(4, 6)))
        assert_array_equal(dec(q, m).data, dec(q, m).data)

    def test_EmptyMemory(self):
        dec = TransformerDecoder(6, rng=self.rng)
        self.assertRaises(ContractError, dec, wide(np.ones((2, 6))), wide(np.ones((0, 6))))

    def test_GradientsMatchFiniteDifferences(self):
        dec = TransformerDecoder(6, head_count=3, layer_count=1, rng=self.rng, zero_branches=False)
        q = wide(self.rng.normal(size=(2, 6)), requires_grad=True)
        m = wide(self.rng.normal(size=(3, 6)), requires_grad=True)
        weights = wide(self.rng.normal(size=(2, 6)))
        error = T.grad_check(lambda q_, m_: T.sum(dec(q_, m_) * weights), [q, m], eps=1e-5)
        self.assertLess(error, 1e-5)


class TestTransformerEncoder(WideTestCase):

    def setUp(self):
        super(TestTransformerEncoder, self).setUp()
        self.rng = np.random.default_rng(3)

    def test_ZeroBranchesPassThrough(self):
        enc = TransformerEncoder(4, head_count=2, layer_count=2, rng=self.rng)
        x = wide(self.rng.normal(size=(5, 4)))
        assert_array_equal(enc(x).data, x.data)

    def test_PermutationEquivariant(self):
        enc = TransformerEncoder(4, head_count=2, layer_count=2, rng=self.rng, zero_branches=False)
        x = self.rng.normal(size=(5, 4))
        order = [3, 0, 4, 1, 2]
        assert_allclose(enc(wide(x[order])).data, enc(wide(x)).data[order], atol=1e-12)

    def test_ParameterNames(self):
        enc = TransformerEncoder(4, head_count=2, layer_count=2, rng=self.rng)
        names = [name for name, _ in enc.named_parameters()]
        self.assertEqual(names[0], "layers.0.norm1.gain")
        self.assertIn("layers.1.self_attn.q_proj.weight", names)
        self.assertIn("layers.1.feed_forward.contract.bias", names)
        self.assertEqual(len(names), len(set(names)))

    def test_Freeze(self):
        enc = TransformerEncoder(4, head_count=2, layer_count=1, rng=self.rng).freeze()
        self.assertEqual(enc.trainable_parameters(), [])
        self.assertEqual(len(enc.frozen_parameters()), len(enc.parameters()))
