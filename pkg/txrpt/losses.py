# Copyright 2026 The TxRPT Developers.  All rights reserved.
# Use of this source code is governed by the Apache License that can be
# found in the LICENSE file.

"""
Training objectives: the bidirectional distance between general and region
prompts, the per-pixel matching loss, a differentiable-binarization head
loss and their weighted total.
"""

from __future__ import absolute_import, division

from collections import namedtuple

import cv2
import numpy as np

from txrpt import tensor as T
from txrpt.errors import ContractError, DimensionError
from txrpt.matching import PIXEL_LEVEL, ScoreMap
from txrpt.nn import Conv2d, Module


PROBABILITY_FLOOR = 1e-7

THRESHOLD_LOW = 0.3
THRESHOLD_HIGH = 0.7


def _grid(S):
    return S.grid if isinstance(S, ScoreMap) else S


def _as_mask(Y, shape):
    mask = np.asarray(Y, dtype=T.get_dtype())
    if mask.ndim == 2:
        mask = mask[:, :, None]
    if mask.shape != shape:
        raise DimensionError("TxRPT: mask {0} does not match map {1}".format(mask.shape, shape))
    return mask


def bidirectional_distance_loss(T_i, T_r):
    """``1 - cos(mean rows of T_i, mean rows of T_r)``, in [0, 2]."""
    if T_i.ndim != 2 or T_r.ndim != 2 or T_i.shape[1] != T_r.shape[1]:
        raise DimensionError("TxRPT: prompts {0} and {1} differ in width".format(T_i.shape, T_r.shape))
    return 1 - T.cosine_similarity(T.mean_over_axes(T_i, [0]), T.mean_over_axes(T_r, [0]))


def squash_score_map(S, offset):
    """Centre the fused score range on ``offset`` and map it into (0, 1)."""
    grid = _grid(S)
    squashed = T.sigmoid(grid - offset)
    if isinstance(S, ScoreMap):
        return ScoreMap(squashed, S.resolution)
    return squashed


def binary_cross_entropy(prob, Y):
    """Mean per-pixel cross entropy; probabilities are clamped away from 0 and 1."""
    mask = _as_mask(Y, prob.shape)
    p = T.clip(prob, PROBABILITY_FLOOR, 1 - PROBABILITY_FLOOR)
    terms = T.log(p) * T.constant(mask) + T.log(1 - p) * T.constant(1 - mask)
    return -T.mean_over_axes(terms, None)


def matching_loss(S, Y):
    return binary_cross_entropy(_grid(S), Y)


def boundary_band(mask, radius=2):
    """Pixels within ``radius`` of a mask edge, on either side."""
    mask = np.asarray(mask, dtype=np.uint8)
    if mask.ndim == 3:
        mask = mask[:, :, 0]
    kernel = np.ones((3, 3), np.uint8)
    edge = cv2.dilate(mask, kernel) != cv2.erode(mask, kernel)
    if radius <= 0 or not edge.any():
        return edge
    band = cv2.dilate(edge.astype(np.uint8), np.ones((2 * radius - 1, 2 * radius - 1), np.uint8))
    return band.astype(bool)


def threshold_target(mask, radius=2):
    return np.where(boundary_band(mask, radius), THRESHOLD_HIGH, THRESHOLD_LOW)


class DBLiteHead(Module):
    """Probability and threshold predictors over pixel-level visual detail and score map.

    The baseline has no score map; its channel is then held at zero.
    """

    def __init__(self, config, rng):
        hidden = config.head_channels
        self.detail_width = config.detail_width
        inputs = self.detail_width + 1
        self.prob_hidden = Conv2d(inputs, hidden, rng)
        self.prob_out = Conv2d(hidden, 1, rng)
        self.thresh_hidden = Conv2d(inputs, hidden, rng)
        self.thresh_out = Conv2d(hidden, 1, rng)
        self.amplification = config.db_amplification
        self.alpha = config.db_alpha
        self.beta = config.db_beta
        self.radius = config.boundary_radius

    def inputs(self, S=None, detail=None):
        if S is None and detail is None:
            raise ContractError("TxRPT: the detection head needs a score map or visual detail")
        if isinstance(S, ScoreMap) and S.resolution != PIXEL_LEVEL:
            raise ContractError("TxRPT: the detection head runs on pixel-level score maps")
        if detail is not None and detail.shape[2] != self.detail_width:
            raise DimensionError("TxRPT: expected {0} detail channels, got {1}".format(
                self.detail_width, detail.shape[2]))
        height, width = (_grid(S) if S is not None else detail).shape[:2]
        grid = _grid(S) if S is not None else T.constant(np.zeros((height, width, 1)))
        if detail is None:
            detail = T.constant(np.zeros((height, width, self.detail_width)))
        return T.concat([detail, grid], axis=2)

    def __call__(self, S=None, detail=None):
        x = self.inputs(S, detail)
        prob = T.sigmoid(self.prob_out(T.gelu(self.prob_hidden(x))))
        thresh = T.sigmoid(self.thresh_out(T.gelu(self.thresh_hidden(x))))
        binary = T.sigmoid((prob - thresh) * self.amplification)
        return prob, thresh, binary


def db_lite_terms(prob, thresh, binary, Y, target, alpha=1.0, beta=1.0):
    """``BCE(prob, Y) + alpha * L1(thresh, target) + beta * BCE(binary, Y)``."""
    target = _as_mask(target, thresh.shape)
    l1 = T.mean_over_axes(T.absolute(thresh - T.constant(target)), None)
    return binary_cross_entropy(prob, Y) + l1 * alpha + binary_cross_entropy(binary, Y) * beta


def db_lite_loss(head, S, Y, detail=None):
    mask = np.asarray(Y)
    prob, thresh, binary = head(S, detail)
    if mask.shape[:2] != prob.shape[:2]:
        raise DimensionError("TxRPT: mask {0} does not match head output {1}".format(mask.shape, prob.shape))
    return db_lite_terms(prob, thresh, binary, mask, threshold_target(mask, head.radius), head.alpha, head.beta)


def _value(term):
    return term.item() if isinstance(term, T.Tensor) else float(term)


class LossReport(namedtuple("LossReport", ["l_db", "l_bd", "l_mat", "l_sum", "lambda_bd", "lambda_mat"])):
    """Loss terms of one step; fields hold tensors while training and floats once reported."""

    def __new__(cls, l_db=0.0, l_bd=0.0, l_mat=0.0, l_sum=None, lambda_bd=1.0, lambda_mat=1.0):
        if l_sum is None:
            l_sum = l_db + l_bd * lambda_bd + l_mat * lambda_mat
        return super(LossReport, cls).__new__(cls, l_db, l_bd, l_mat, l_sum, lambda_bd, lambda_mat)

    def as_floats(self):
        return self._replace(l_db=_value(self.l_db), l_bd=_value(self.l_bd),
                             l_mat=_value(self.l_mat), l_sum=_value(self.l_sum))

    def metrics_line(self, step):
        report = self.as_floats()
        return "{0}\t{1!r}\t{2!r}\t{3!r}\t{4!r}\n".format(step, report.l_db, report.l_bd, report.l_mat, report.l_sum)


def total_loss(l_db, l_bd, l_mat, lambda_bd=1.0, lambda_mat=1.0):
    return LossReport(l_db, l_bd, l_mat, None, lambda_bd, lambda_mat)


def mean_report(reports):
    """Average a batch of reports term by term."""
    n = len(reports)
    first = reports[0]

    def mean(field):
        total = getattr(first, field)
        for r in reports[1:]:
            total = total + getattr(r, field)
        return total / n

    return LossReport(mean("l_db"), mean("l_bd"), mean("l_mat"), mean("l_sum"), first.lambda_bd, first.lambda_mat)
