# Copyright 2026 The TxRPT Developers.  All rights reserved.
# Use of this source code is governed by the Apache License that can be
# found in the LICENSE file.

"""
Gradient checks of the full objective and the ablation flag matrix.
"""

from __future__ import absolute_import, division

import logging
from collections import namedtuple

import numpy as np
from twisted.internet import threads
from twisted.python import log

from txrpt import tensor as T
from txrpt.config import ABLATION_FLAGS, ModelConfig
from txrpt.model import RPTModel, compute_losses
from txrpt.scenes import generate_scene
from txrpt.training import train
from txrpt.utils import check_deadline, timeout


GRADCHECK_TOLERANCE = 1e-3
GRADCHECK_STEP = 1e-4
JITTER_STD = 0.05

# quick mode checks one tensor from each stage of the network
QUICK_PARAMETERS = ("prompts.region", "prompts.general", "ln1.weight", "gates.l1", "gates.l4",
                    "pool.projection.weight", "head.prob_out.weight")


def _flags(*enabled):
    """Every ablation flag set explicitly; only ``enabled`` are on."""
    return dict((name, name in enabled) for name in ABLATION_FLAGS)


_REGION_ROWS = ("use_region_prompt", "use_feature_enhancement", "use_shared_pos_embed", "use_interaction",
                "use_bd_loss", "use_feature_fusion")

ABLATION_ROWS = (
    ("BSL", _flags()),
    ("BSL+GTP", _flags("use_general_prompt")),
) + tuple(
    (name, _flags("use_general_prompt", *_REGION_ROWS[:n]))
    for name, n in (("+RTP+FE", 2), ("+SPE", 3), ("+CTI", 4), ("+BDL", 5), ("+FF", 6))
)

GRID_SIZES = (2, 3, 4, 5, 6)


class GradCheckResult(namedtuple("GradCheckResult", ["worst", "errors", "coordinates"])):
    """Worst relative error overall and per parameter name."""

    @property
    def passed(self):
        return self.worst < GRADCHECK_TOLERANCE


def jitter(model, rng, std=JITTER_STD):
    """Move every trainable parameter off its initialization, zeros included."""
    for _, param in model.trainable_parameters():
        param.data += rng.normal(0.0, std, size=param.shape).astype(param.data.dtype)
    return model


def run_gradcheck(full=False, coords=3, seed=0, _deadline=None):
    """Central differences against backward on the micro model, in wide precision."""
    config = ModelConfig.micro(seed=seed, precision="wide")
    rng = np.random.default_rng(seed)
    with T.precision("wide"):
        model = jitter(RPTModel(config), rng)
    scene = generate_scene(seed, config)

    def objective(*_):
        return compute_losses(model, scene.image, scene.mask).l_sum

    named = model.trainable_parameters()
    if not full:
        named = [(name, p) for name, p in named if name in QUICK_PARAMETERS]

    errors = []
    checked = 0
    for name, param in named:
        check_deadline(_deadline)
        error = T.grad_check(objective, [param], eps=GRADCHECK_STEP, max_coords=coords, rng=rng)
        checked += min(coords, param.size) if coords else param.size
        errors.append((name, error))
        if error >= GRADCHECK_TOLERANCE:
            log.msg("TxRPT: gradient check of {0} off by {1:.3g}".format(name, error), logLevel=logging.WARNING)
    worst = max(e for _, e in errors) if errors else 0.0
    log.msg("TxRPT: gradient check over {0} tensors, {1} coordinates, worst relative error {2:.3g}"
            .format(len(errors), checked, worst), logLevel=logging.INFO)
    return GradCheckResult(worst, errors, checked)


def grid_rows(config):
    rows = []
    for k in GRID_SIZES:
        if config.feature_height % k or config.feature_width_cells % k:
            log.msg("TxRPT: skipping grid {0}x{0}, it does not tile a {1}x{2} feature map"
                    .format(k, config.feature_height, config.feature_width_cells), logLevel=logging.INFO)
            continue
        rows.append(("k={0}".format(k), dict(_flags(*ABLATION_FLAGS), grid=k)))
    return rows


def ablation_rows(config):
    return list(ABLATION_ROWS) + grid_rows(config)


def run_ablation(config, steps, seeds, _deadline=None):
    """Train every row of the flag matrix from the same seed; returns ``(name, final LossReport)`` pairs."""
    results = []
    for name, overrides in ablation_rows(config):
        row_config = config._replace(**overrides)
        state = train(row_config, seeds, steps, _deadline=_deadline)
        log.msg("TxRPT: ablation row {0}: l_sum {1:.6f}".format(name, state.final.l_sum), logLevel=logging.INFO)
        results.append((name, state.final))
    return results


def format_ablation(results):
    lines = ["row\tl_db\tl_bd\tl_mat\tl_sum"]
    for name, report in results:
        lines.append("{0}\t{1:.6f}\t{2:.6f}\t{3:.6f}\t{4:.6f}".format(
            name, report.l_db, report.l_bd, report.l_mat, report.l_sum))
    return "\n".join(lines) + "\n"


@timeout
def gradcheck_deferred(full=False, coords=3, seed=0, _deadline=None):
    return threads.deferToThread(run_gradcheck, full, coords, seed, _deadline=_deadline)


@timeout
def ablation_deferred(config, steps, seeds, _deadline=None):
    return threads.deferToThread(run_ablation, config, steps, seeds, _deadline=_deadline)
