# Copyright 2026 The TxRPT Developers.  All rights reserved.
# Use of this source code is governed by the Apache License that can be
# found in the LICENSE file.

"""
The supporting engineering around the detector in one namespace: scene
generation, the end-to-end forward pass, training, evaluation, heatmap
export and checkpoints.
"""

from __future__ import absolute_import, division
from txrpt.scenes import Scene, generate_scene, generate_scenes, generate_scenes_deferred, rasterize
from txrpt.model import RPTModel, forward_full, forward_image_text, compute_losses, predict_text_mask, \
    score_heatmap
from txrpt.training import Adam, TrainState, train, train_deferred, save_train_state, load_train_state
from txrpt.evaluation import EvalReport, evaluate, evaluate_deferred, evaluate_maps
from txrpt.imageio import export_heatmap
from txrpt.checkpoint import save_model, load_model


assert Scene
assert generate_scene
assert generate_scenes
assert generate_scenes_deferred
assert rasterize
assert RPTModel
assert forward_full
assert forward_image_text
assert compute_losses
assert predict_text_mask
assert score_heatmap
assert Adam
assert TrainState
assert train
assert train_deferred
assert save_train_state
assert load_train_state
assert EvalReport
assert evaluate
assert evaluate_deferred
assert evaluate_maps
assert export_heatmap
assert save_model
assert load_model
