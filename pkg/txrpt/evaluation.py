# Copyright 2026 The TxRPT Developers.  All rights reserved.
# Use of this source code is governed by the Apache License that can be
# found in the LICENSE file.

"""
Detection metrics over binary text maps.

Pixel metrics compare the thresholded probability map with the mask.  Box
metrics fit an axis-aligned box to every 4-connected component on either
side and match them greedily, one to one, at IoU >= 0.5.  Counts are
pooled over all scenes before the ratios are taken.
"""

from __future__ import absolute_import, division

import logging
from collections import namedtuple

import cv2
import numpy as np
from twisted.internet import defer, threads
from twisted.python import log

from txrpt.errors import ContractError, DimensionError
from txrpt.model import predict_text_mask


IOU_THRESHOLD = 0.5


def f_measure(precision, recall):
    if precision + recall <= 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _ratio(hits, total, other_total):
    if total:
        return hits / total
    # nothing claimed: perfect only if there was nothing to find
    return 1.0 if other_total == 0 else 0.0


class EvalReport(namedtuple("EvalReport", ["pixel_precision", "pixel_recall", "pixel_f",
                                           "box_precision", "box_recall", "box_f"])):

    @classmethod
    def from_counts(cls, pixel_hits, pixel_predicted, pixel_true, box_hits, box_predicted, box_true):
        pp = _ratio(pixel_hits, pixel_predicted, pixel_true)
        pr = _ratio(pixel_hits, pixel_true, pixel_predicted)
        bp = _ratio(box_hits, box_predicted, box_true)
        br = _ratio(box_hits, box_true, box_predicted)
        return cls(pp, pr, f_measure(pp, pr), bp, br, f_measure(bp, br))

    def summary(self):
        return ("pixel P {0:.4f} R {1:.4f} F {2:.4f}  box P {3:.4f} R {4:.4f} F {5:.4f}"
                .format(*self))


def extract_boxes(binary):
    """``(x0, y0, x1, y1)`` boxes, end-exclusive, of the 4-connected components of ``binary``."""
    binary = np.asarray(binary)
    if binary.ndim == 3:
        binary = binary[:, :, 0]
    count, _, stats, _ = cv2.connectedComponentsWithStats((binary > 0).astype(np.uint8), connectivity=4)
    boxes = []
    for label in range(1, count):
        x, y, w, h = (int(v) for v in stats[label, :4])
        boxes.append((x, y, x + w, y + h))
    return boxes


def box_iou(a, b):
    width = min(a[2], b[2]) - max(a[0], b[0])
    height = min(a[3], b[3]) - max(a[1], b[1])
    overlap = max(width, 0) * max(height, 0)
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - overlap
    return overlap / union if union > 0 else 0.0


def match_boxes(predicted, truth, threshold=IOU_THRESHOLD):
    """Greedy one-to-one matching, best IoU first; returns ``(pred, true)`` index pairs."""
    candidates = []
    for i, p in enumerate(predicted):
        for j, t in enumerate(truth):
            iou = box_iou(p, t)
            if iou >= threshold:
                candidates.append((-iou, i, j))
    candidates.sort()
    used_pred, used_true, pairs = set(), set(), []
    for _, i, j in candidates:
        if i in used_pred or j in used_true:
            continue
        used_pred.add(i)
        used_true.add(j)
        pairs.append((i, j))
    return pairs


def evaluate_maps(predictions, masks):
    """Pooled metrics of binary ``predictions`` against ``masks``, paired by position."""
    predictions, masks = list(predictions), list(masks)
    if not predictions or len(predictions) != len(masks):
        raise ContractError("TxRPT: cannot pair {0} predictions with {1} masks"
                            .format(len(predictions), len(masks)))
    counts = np.zeros(6, np.int64)
    for prediction, mask in zip(predictions, masks):
        prediction = np.asarray(prediction) > 0
        mask = np.asarray(mask) > 0
        if prediction.shape != mask.shape:
            raise DimensionError("TxRPT: prediction {0} does not match mask {1}".format(prediction.shape, mask.shape))
        predicted_boxes, true_boxes = extract_boxes(prediction), extract_boxes(mask)
        counts += (np.count_nonzero(prediction & mask), np.count_nonzero(prediction), np.count_nonzero(mask),
                   len(match_boxes(predicted_boxes, true_boxes)), len(predicted_boxes), len(true_boxes))
    return EvalReport.from_counts(*(int(c) for c in counts))


def evaluate(model, scenes, threshold=0.3):
    scenes = list(scenes)
    if not scenes:
        raise ContractError("TxRPT: evaluation needs at least one scene")
    report = evaluate_maps([predict_text_mask(model, s.image, threshold) for s in scenes],
                           [s.mask for s in scenes])
    log.msg("TxRPT: evaluated {0} scenes: {1}".format(len(scenes), report.summary()), logLevel=logging.INFO)
    return report


def evaluate_deferred(model, scenes, threshold=0.3):
    """Like :func:`evaluate`, predicting every scene in the reactor thread pool."""
    scenes = list(scenes)
    if not scenes:
        return defer.fail(ContractError("TxRPT: evaluation needs at least one scene"))

    def on_fail(failure):
        failure.trap(defer.FirstError)
        failure.value.subFailure.raiseException()

    def on_predictions(predictions):
        return evaluate_maps(predictions, [s.mask for s in scenes])

    return defer.gatherResults([threads.deferToThread(predict_text_mask, model, s.image, threshold)
                                for s in scenes], consumeErrors=True)\
        .addErrback(on_fail).addCallback(on_predictions)
