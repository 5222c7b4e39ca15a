# coding: utf-8
# Copyright 2026 The TxRPT Developers.  All rights reserved.
# Use of this source code is governed by the Apache License that can be
# found in the LICENSE file.

from __future__ import absolute_import, division

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from tests.utils import WideTestCase, wide
from txrpt import tensor as T
from txrpt.config import ModelConfig
from txrpt.encoders import (AttentionPool, ImageBackbone, PositionEmbedding, PromptBank, PromptEncoder, TextEncoder,
                            WordEmbedding, attention_pool, build_text_input, detail_features, embed_fixed_word,
                            encode_image, encode_image_stages, encode_prompt, encode_text)
from txrpt.errors import ConfigurationError, DimensionError, VocabularyError


class TestWordEmbedding(WideTestCase):

    def test_Deterministic(self):
        a = embed_fixed_word(WordEmbedding(8), "text")
        b = embed_fixed_word(WordEmbedding(8), "text")
        self.assertEqual(a.shape, (1, 8))
        assert_array_equal(a.data, b.data)

    def test_UnknownWord(self):
        self.assertRaises(VocabularyError, embed_fixed_word, WordEmbedding(8), "dog")

    def test_TableIsFrozen(self):
        self.assertFalse(WordEmbedding(8).table.requires_grad)

    def test_BankRejectsUnknownWord(self):
        config = ModelConfig.micro(fixed_word="dog")
        self.assertRaises(VocabularyError, PromptBank, config, np.random.default_rng(0), WordEmbedding(8))


class TestTextInput(WideTestCase):

    def setUp(self):
        super(TestTextInput, self).setUp()
        self.config = ModelConfig.micro()
        self.bank = PromptBank(self.config, np.random.default_rng(0), WordEmbedding(self.config.prompt_width))

    def test_FixedThenGeneral(self):
        T_i = build_text_input(self.bank)
        self.assertEqual(T_i.shape, (5, 8))
        assert_array_equal(T_i.data[0], self.bank.fixed.data[0])
        assert_array_equal(T_i.data[1:], self.bank.general.data)

    def test_NoGeneralPrompt(self):
        config = self.config._replace(general_prompt_length=0)
        bank = PromptBank(config, np.random.default_rng(0), WordEmbedding(config.prompt_width))
        self.assertIsNone(bank.general)
        assert_array_equal(build_text_input(bank).data, bank.fixed.data)
        assert_array_equal(build_text_input(self.bank, use_general_prompt=False).data, self.bank.fixed.data)

    def test_GeneralRowMapsToOneTextRow(self):
        before = build_text_input(self.bank).data.copy()
        self.bank.general.data[1] += 1
        changed = np.any(build_text_input(self.bank).data != before, axis=1)
        assert_array_equal(changed, [False, False, True, False, False])


class TestTextEncoders(WideTestCase):

    def setUp(self):
        super(TestTextEncoders, self).setUp()
        self.config = ModelConfig.toy()
        rng = np.random.default_rng(4)
        self.bank = PromptBank(self.config, rng, WordEmbedding(self.config.prompt_width))
        self.text_encoder = TextEncoder(self.config, rng)
        self.prompt_encoder = PromptEncoder(self.text_encoder)
        self.rng = rng

    def test_TextShape(self):
        T_e = encode_text(self.text_encoder, build_text_input(self.bank))
        self.assertEqual(T_e.shape, (5, self.config.embed_width))

    def test_TextTooLong(self):
        T_i = wide(np.ones((self.config.context_length + 1, self.config.prompt_width)))
        self.assertRaises(DimensionError, encode_text, self.text_encoder, T_i)

    def test_GeneralPromptGetsGradient(self):
        T_e = encode_text(self.text_encoder, build_text_input(self.bank))
        T.backward(T.sum(T_e * wide(self.rng.normal(size=T_e.shape))))
        self.assertTrue(np.any(self.bank.general.grad != 0))
        self.assertTrue(all(p.grad is None or not np.any(p.grad) for _, p in self.text_encoder.frozen_parameters()))

    def test_PromptEncoderCopiesTextInternals(self):
        source = dict(self.text_encoder.named_parameters())
        for name, p in self.prompt_encoder.named_parameters():
            assert_array_equal(p.data, source[name].data)
            self.assertFalse(p.requires_grad)

    def test_PromptShapeAndInternals(self):
        P_r = wide(self.rng.normal(size=self.bank.region.shape))
        T_r_e = encode_prompt(self.prompt_encoder, self.bank.region, P_r)
        self.assertEqual(T_r_e.shape, (9, self.config.embed_width))
        assert_array_equal(T_r_e.data, self.text_encoder.encode_summed(self.bank.region + P_r).data)

    def test_RegionPromptGetsGradient(self):
        P_r = wide(self.rng.normal(size=self.bank.region.shape))
        T_r_e = encode_prompt(self.prompt_encoder, self.bank.region, P_r)
        T.backward(T.sum(T_r_e * wide(self.rng.normal(size=T_r_e.shape))))
        self.assertTrue(np.any(self.bank.region.grad != 0))

    def test_PromptPositionMismatch(self):
        P_r = wide(np.zeros((4, self.config.prompt_width)))
        self.assertRaises(DimensionError, encode_prompt, self.prompt_encoder, self.bank.region, P_r)


class TestImageEncoder(WideTestCase):

    def test_FeatureMapShape(self):
        for grid in (2, 4):
            config = ModelConfig(height=64, width=64, grid=grid)
            backbone = ImageBackbone(config, np.random.default_rng(0))
            I_i = encode_image(backbone, wide(np.random.default_rng(1).uniform(size=(64, 64, 3))))
            self.assertEqual(I_i.shape, (8, 8, config.feature_width))

    def test_CoarseStride(self):
        config = ModelConfig(height=256, width=256, downsample=32, grid=2, feature_width=8)
        backbone = ImageBackbone(config, np.random.default_rng(0))
        self.assertEqual(int(np.prod(backbone.strides)), 32)
        self.assertEqual(encode_image(backbone, wide(np.zeros((256, 256, 3)))).shape, (8, 8, 8))

    def test_ZeroImageIsFinite(self):
        config = ModelConfig.toy()
        backbone = ImageBackbone(config, np.random.default_rng(0))
        self.assertTrue(np.all(np.isfinite(encode_image(backbone, wide(np.zeros((48, 48, 3)))).data)))

    def test_WrongImageSize(self):
        config = ModelConfig.toy()
        backbone = ImageBackbone(config, np.random.default_rng(0))
        self.assertRaises(DimensionError, encode_image, backbone, wide(np.zeros((40, 48, 3))))

    def test_StagesAndDetail(self):
        config = ModelConfig.toy()
        backbone = ImageBackbone(config, np.random.default_rng(0))
        image = wide(np.random.default_rng(1).uniform(size=(48, 48, 3)))
        stages = encode_image_stages(backbone, image)
        self.assertEqual([s.shape for s in stages], [(24, 24, 16), (12, 12, 32), (6, 6, 64)])
        assert_array_equal(stages[-1].data, encode_image(backbone, image).data)
        detail = detail_features(image, stages)
        self.assertEqual(detail.shape, (48, 48, config.detail_width))
        assert_array_equal(detail.data[:, :, :3], image.data - 0.5)
        assert_array_equal(detail.data[:, :, 3:], T.bilinear_upsample(stages[0], 48, 48).data)

    def test_UntiledGridIsAConfigurationError(self):
        self.assertRaises(ConfigurationError, ModelConfig(height=64, width=64, grid=3).validate)


class TestAttentionPool(WideTestCase):

    def setUp(self):
        super(TestAttentionPool, self).setUp()
        self.config = ModelConfig.toy()
        rng = np.random.default_rng(5)
        self.pool = AttentionPool(self.config, rng)
        self.positions = PositionEmbedding(self.config, rng)
        self.rng = rng
        self.zero = wide(np.zeros(self.positions.shape))

    def test_Shape(self):
        I_i = wide(self.rng.normal(size=self.positions.shape))
        I_e = attention_pool(self.pool, I_i, self.positions)
        self.assertEqual(I_e.shape, (6, 6, self.config.embed_width))

    def test_ConstantInputGivesConstantOutput(self):
        I_i = wide(np.ones(self.positions.shape) * 0.3)
        out = attention_pool(self.pool, I_i, self.zero).data.reshape(36, -1)
        assert_allclose(out, np.tile(out[0], (36, 1)), atol=1e-12)

    def test_PermutationEquivariantWithoutPositions(self):
        values = self.rng.normal(size=self.positions.shape)
        flat = values.reshape(36, -1)
        order = self.rng.permutation(36)
        out = attention_pool(self.pool, wide(values), self.zero).data.reshape(36, -1)
        permuted = attention_pool(self.pool, wide(flat[order].reshape(values.shape)), self.zero)
        assert_allclose(permuted.data.reshape(36, -1), out[order], atol=1e-10)

    def test_PositionMismatch(self):
        I_i = wide(np.zeros((5, 6, self.config.feature_width)))
        self.assertRaises(DimensionError, attention_pool, self.pool, I_i, self.positions)

    def test_ResidualIsConfigurable(self):
        values = self.rng.normal(size=self.positions.shape)
        seq = wide(values.reshape(36, -1))
        attended = self.pool.attention(seq, seq, seq)
        out = attention_pool(self.pool, wide(values), self.zero)
        assert_allclose(out.data.reshape(36, -1), self.pool.projection(seq + attended).data, atol=1e-12)

        plain = AttentionPool(self.config._replace(pool_residual=False), np.random.default_rng(5))
        self.assertFalse(plain.residual)
        attended = plain.attention(seq, seq, seq)
        out = attention_pool(plain, wide(values), self.zero)
        assert_allclose(out.data.reshape(36, -1), plain.projection(attended).data, atol=1e-12)
