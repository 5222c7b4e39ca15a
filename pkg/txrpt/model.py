# Copyright 2026 The TxRPT Developers.  All rights reserved.
# Use of this source code is governed by the Apache License that can be
# found in the LICENSE file.

"""
The assembled detector and its end-to-end forward pass.
"""

from __future__ import absolute_import, division

from collections import namedtuple

import numpy as np

from txrpt import tensor as T
from txrpt.errors import ContractError, DimensionError
from txrpt.encoders import AttentionPool, ImageBackbone, PositionEmbedding, PromptBank, PromptEncoder, \
    TextEncoder, WordEmbedding, attention_pool, build_text_input, detail_features, encode_image, \
    encode_image_stages, encode_prompt, encode_text
from txrpt.losses import DBLiteHead, bidirectional_distance_loss, db_lite_loss, matching_loss, \
    squash_score_map, total_loss
from txrpt.matching import ChannelAdapter, fuse_score_maps, global_score_map, region_score_map, \
    upsample_to_pixels
from txrpt.nn import LinearLayer, Module, TransformerDecoder
from txrpt.region import InteractionGates, WidthAdapter, concat_tokens, derive_shared_position_embedding, \
    post_encode_interaction, pre_encode_interaction, split_embeddings, split_feature_map
from txrpt.tensor import Parameter


Intermediates = namedtuple("Intermediates", [
    "text_input",          # T_i
    "text_embedding",      # T_o
    "feature_map",         # I_i
    "visual_embedding",    # I_o after the post-encoding interaction
    "prompt_embedding",    # T_p
    "prompt_positions",    # P_r
    "global_map",          # S_glo
    "region_map",          # S_reg
    "enhanced_map",        # S_FE
    "fused_map",           # S_FF
    "score_map",           # S at feature level
    "detail_features",     # pixel-level visual input of the detection head
])


class RPTModel(Module):
    """Every parameter of the detector, built deterministically from ``config.seed``.

    Components of disabled ablation paths are still built, so checkpoints
    have the same layout for every flag combination.
    """

    def __init__(self, config):
        config.validate()
        self.config = config
        with T.precision(config.precision):
            rng = np.random.default_rng(config.seed)
            c_prompt, c_embed, c_feature = config.prompt_width, config.embed_width, config.feature_width
            width, heads, layers = config.decoder_width, config.decoder_heads, config.decoder_layers

            self.prompts = PromptBank(config, rng, WordEmbedding(c_prompt))
            self.text_encoder = TextEncoder(config, rng)
            self.prompt_encoder = PromptEncoder(self.text_encoder)
            self.backbone = ImageBackbone(config, rng)
            self.position = PositionEmbedding(config, rng)
            self.pool = AttentionPool(config, rng)
            self.ln1 = LinearLayer(c_feature, c_prompt, rng)
            self.free_positions = Parameter(self.text_encoder.positions.data[:config.region_length].copy())
            self.gates = InteractionGates(config.gate_init)
            self.dec1 = TransformerDecoder(width, heads, layers, rng)
            self.dec2 = TransformerDecoder(width, heads, layers, rng)
            self.dec3 = TransformerDecoder(width, heads, layers, rng)
            self.dec4 = TransformerDecoder(width, heads, layers, rng)
            self.adapt1 = WidthAdapter(c_prompt, c_feature, width, rng)
            self.adapt2 = WidthAdapter(c_feature, c_prompt, width, rng)
            self.adapt3 = WidthAdapter(c_embed, c_embed, width, rng)
            self.adapt4 = WidthAdapter(c_embed, c_embed, width, rng)
            self.fusion = TransformerDecoder(width, heads, layers, rng)
            self.fusion_adapter = ChannelAdapter(width, rng)
            self.head = DBLiteHead(config, rng)

    def prompt_positions(self):
        if self.config.use_shared_pos_embed:
            return derive_shared_position_embedding(self.position, self.config.grid, self.ln1)
        return self.free_positions

    def __call__(self, image):
        return forward_full(self, image)


def _as_image(model, image):
    if not isinstance(image, T.Tensor):
        image = T.constant(image)
    expected = (model.config.height, model.config.width, 3)
    if image.shape != expected:
        raise DimensionError("TxRPT: expected a {0} image, got {1}".format(expected, image.shape))
    return image


def forward_image_text(model, image):
    """Image-text matching alone: ``upsample(S_glo)`` over the pooled features."""
    config = model.config
    with T.precision(config.precision):
        image = _as_image(model, image)
        T_o = encode_text(model.text_encoder, build_text_input(model.prompts, config.use_general_prompt))
        I_o = attention_pool(model.pool, encode_image(model.backbone, image), model.position)
        S_glo = global_score_map(T_o, I_o, config.temperature)
        return upsample_to_pixels(S_glo, config.height, config.width)


def forward_full(model, image):
    """Run the whole detector; returns ``(pixel-level ScoreMap, Intermediates)``.

    The baseline runs no image-text matching, so its score map is None and
    only the visual fields of the intermediates are set.
    """
    config = model.config
    k = config.grid
    with T.precision(config.precision):
        image = _as_image(model, image)
        stages = encode_image_stages(model.backbone, image)
        I_i = stages[-1]
        detail = detail_features(image, stages)
        if not config.uses_matching:
            return None, Intermediates(None, None, I_i, None, None, None, None, None, None, None, None, detail)

        T_i = build_text_input(model.prompts, config.use_general_prompt)
        T_o = encode_text(model.text_encoder, T_i)

        if not config.use_region_prompt:
            I_o = attention_pool(model.pool, I_i, model.position)
            S_glo = global_score_map(T_o, I_o, config.temperature)
            inter = Intermediates(T_i, T_o, I_i, I_o, None, None, S_glo, None, None, None, S_glo, detail)
            return upsample_to_pixels(S_glo, config.height, config.width), inter

        T_r = model.prompts.region
        P_r = model.prompt_positions()
        if config.use_interaction:
            summed_chars, summed_tokens = pre_encode_interaction(
                T_r, P_r, split_feature_map(I_i, k), split_feature_map(model.position.field, k),
                model.gates, model.dec1, model.dec2, model.adapt1, model.adapt2)
            I_o = model.pool.pool_summed(concat_tokens(summed_tokens))
            T_p = model.prompt_encoder.encode_summed(summed_chars)
        else:
            I_o = attention_pool(model.pool, I_i, model.position)
            T_p = encode_prompt(model.prompt_encoder, T_r, P_r)

        tokens, chars = split_embeddings(I_o, T_p, k)
        if config.use_interaction:
            chars, tokens = post_encode_interaction(chars, tokens, model.gates, model.dec3, model.dec4,
                                                    model.adapt3, model.adapt4)
            I_o = concat_tokens(tokens)

        S_glo = global_score_map(T_o, I_o, config.temperature)
        S_reg = region_score_map(chars, tokens, config.temperature)
        S, S_FE, S_FF = fuse_score_maps(S_glo, S_reg, config.lambda_mix, model.fusion, model.fusion_adapter,
                                        use_fusion=config.use_feature_fusion,
                                        use_enhancement=config.use_feature_enhancement)
        inter = Intermediates(T_i, T_o, I_i, I_o, T_p, P_r, S_glo, S_reg, S_FE, S_FF, S, detail)
        return upsample_to_pixels(S, config.height, config.width), inter


def compute_losses(model, image, mask):
    """Every loss term for one scene, as a :class:`LossReport` of tensors."""
    config = model.config
    with T.precision(config.precision):
        S_pixel, inter = forward_full(model, image)
        l_db = db_lite_loss(model.head, S_pixel, mask, inter.detail_features)
        if S_pixel is None:
            l_mat = 0.0
        else:
            l_mat = matching_loss(squash_score_map(S_pixel, config.score_offset), mask)
        if config.use_region_prompt and config.use_bd_loss:
            l_bd = bidirectional_distance_loss(inter.text_input, model.prompts.region)
        else:
            l_bd = 0.0
        return total_loss(l_db, l_bd, l_mat, config.lambda_bd, config.lambda_mat)


def predict_probability(model, image):
    """The head's probability map for ``image``, as an H x W array."""
    with T.precision(model.config.precision):
        S_pixel, inter = forward_full(model, image)
        prob, _, _ = model.head(S_pixel, inter.detail_features)
        return prob.data[:, :, 0].copy()


def predict_text_mask(model, image, threshold=0.3):
    return predict_probability(model, image) > threshold


def score_heatmap(model, image):
    """The squashed pixel-level score map, ready for :func:`txrpt.imageio.export_heatmap`."""
    config = model.config
    if not config.uses_matching:
        raise ContractError("TxRPT: the baseline configuration computes no score map")
    with T.precision(config.precision):
        S_pixel, _ = forward_full(model, image)
        return squash_score_map(S_pixel, config.score_offset)
