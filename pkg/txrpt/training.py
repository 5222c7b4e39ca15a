# Copyright 2026 The TxRPT Developers.  All rights reserved.
# Use of this source code is governed by the Apache License that can be
# found in the LICENSE file.

"""
The training loop: mini-batches over a fixed scene set, one backward pass
per step and Adam updates of every trainable parameter.
"""

from __future__ import absolute_import, division

import logging
import os
from collections import OrderedDict

import numpy as np
from twisted.internet import threads
from twisted.python import log

from txrpt import tensor as T
from txrpt.checkpoint import dump_checkpoint, load_checkpoint, model_tensors, restore
from txrpt.errors import CheckpointError, ContractError, NonFiniteError
from txrpt.losses import mean_report
from txrpt.model import RPTModel, compute_losses
from txrpt.scenes import generate_scenes
from txrpt.utils import check_deadline, timeout


METRICS_FILE = "metrics.tsv"
FINAL_CHECKPOINT = "model.rpt"


class Adam(object):
    """First/second moment optimizer over named parameters.

    Parameters whose gradient is None after a backward pass keep their
    values and moments.
    """

    def __init__(self, named_parameters, learning_rate=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.parameters = OrderedDict(named_parameters)
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = OrderedDict((name, np.zeros_like(p.data)) for name, p in self.parameters.items())
        self.v = OrderedDict((name, np.zeros_like(p.data)) for name, p in self.parameters.items())

    def step(self):
        self.t += 1
        correction1 = 1 - self.beta1 ** self.t
        correction2 = 1 - self.beta2 ** self.t
        for name, param in self.parameters.items():
            if param.grad is None:
                continue
            grad = param.grad
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1 - self.beta1) * grad
            v *= self.beta2
            v += (1 - self.beta2) * grad * grad
            update = self.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + self.eps)
            param.data -= update.astype(param.data.dtype)


class TrainState(object):
    """Everything needed to continue a run: model, optimizer, scene seeds and step."""

    def __init__(self, model, optimizer, seeds, step=0, history=None):
        self.model = model
        self.optimizer = optimizer
        self.seeds = list(seeds)
        self.step = step
        self.history = history if history is not None else []

    @property
    def config(self):
        return self.model.config

    @property
    def initial(self):
        return self.history[0] if self.history else None

    @property
    def final(self):
        return self.history[-1] if self.history else None


def new_train_state(config, dataset_seeds, learning_rate=None):
    model = RPTModel(config)
    rate = config.learning_rate if learning_rate is None else learning_rate
    return TrainState(model, Adam(model.trainable_parameters(), rate), dataset_seeds)


def batch_indices(step, batch_size, count):
    return [(step * batch_size + j) % count for j in range(batch_size)]


def integer_table(values):
    """Little-endian int64 bytes of ``values``, one row of 8 per value.

    Byte values are exact in 32-bit checkpoint floats, whatever the integer.
    """
    return np.frombuffer(np.asarray(values, "<i8").tobytes(), np.uint8).reshape(-1, 8)


def table_integers(table):
    return [int(v) for v in np.frombuffer(np.asarray(table).astype(np.uint8).tobytes(), "<i8")]


def save_train_state(state, path):
    tensors = model_tensors(state.model)
    for name in state.optimizer.parameters:
        tensors["adam.m." + name] = state.optimizer.m[name]
        tensors["adam.v." + name] = state.optimizer.v[name]
    tensors["train.step"] = integer_table([state.step])
    tensors["train.seeds"] = integer_table(state.seeds)
    dump_checkpoint(path, state.config, tensors)


def load_train_state(path, learning_rate=None):
    config, tensors = load_checkpoint(path)
    if "train.step" not in tensors or "train.seeds" not in tensors:
        raise CheckpointError("TxRPT: {0} holds a model but no training state".format(path))
    state = new_train_state(config, table_integers(tensors["train.seeds"]), learning_rate)
    restore(state.model, tensors)
    optimizer = state.optimizer
    for name in optimizer.parameters:
        for prefix, moments in (("adam.m.", optimizer.m), ("adam.v.", optimizer.v)):
            if prefix + name in tensors:
                moments[name][...] = tensors[prefix + name]
    state.step = table_integers(tensors["train.step"])[0]
    optimizer.t = state.step
    return state


def _diagnose(state, scenes, indices, step):
    """Name the first non-finite tensor behind a non-finite loss."""
    for name, param in state.model.named_parameters():
        if not np.all(np.isfinite(param.data)):
            raise NonFiniteError("TxRPT: parameter {0} is non-finite at step {1}".format(name, step))
    with T.debug_mode():
        for index in indices:
            compute_losses(state.model, scenes[index].image, scenes[index].mask)
    raise NonFiniteError("TxRPT: non-finite loss at step {0}".format(step))


def train(config, dataset_seeds, steps, learning_rate=None, out_dir=None, state=None, _deadline=None):
    """Run ``steps`` optimizer steps and return the :class:`TrainState`.

    With ``out_dir`` set, one metrics line per step goes to ``metrics.tsv``,
    a checkpoint ``ckpt-<step>.rpt`` every ``checkpoint_every`` steps and
    ``model.rpt`` at the end.  Passing ``state`` continues an earlier run.
    """
    if steps <= 0:
        raise ContractError("TxRPT: steps must be positive, got {0}".format(steps))
    if state is None:
        config.validate()
        if not dataset_seeds:
            raise ContractError("TxRPT: training needs at least one scene seed")
        state = new_train_state(config, dataset_seeds, learning_rate)
        mode = "w"
    else:
        config = state.config
        if learning_rate is not None:
            state.optimizer.learning_rate = learning_rate
        mode = "a"

    scenes = generate_scenes(state.seeds, config)
    metrics = None
    if out_dir is not None:
        if not os.path.isdir(out_dir):
            os.makedirs(out_dir)
        metrics = open(os.path.join(out_dir, METRICS_FILE), mode)

    model = state.model
    try:
        for _ in range(steps):
            check_deadline(_deadline)
            indices = batch_indices(state.step, config.batch_size, len(scenes))
            report = mean_report([compute_losses(model, scenes[i].image, scenes[i].mask) for i in indices])
            loss = report.l_sum
            if not np.all(np.isfinite(loss.data)):
                _diagnose(state, scenes, indices, state.step + 1)

            model.zero_grad()
            T.backward(loss)
            state.optimizer.step()
            state.step += 1

            floats = report.as_floats()
            state.history.append(floats)
            if metrics is not None:
                metrics.write(floats.metrics_line(state.step))
            if state.step % config.log_every == 0:
                log.msg("TxRPT: step {0} l_sum {1:.6f} l_db {2:.6f} l_bd {3:.6f} l_mat {4:.6f}".format(
                    state.step, floats.l_sum, floats.l_db, floats.l_bd, floats.l_mat), logLevel=logging.INFO)
            if out_dir is not None and state.step % config.checkpoint_every == 0:
                metrics.flush()
                save_train_state(state, os.path.join(out_dir, "ckpt-{0}.rpt".format(state.step)))
    finally:
        if metrics is not None:
            metrics.close()

    if out_dir is not None:
        save_train_state(state, os.path.join(out_dir, FINAL_CHECKPOINT))
    return state


@timeout
def train_deferred(config, dataset_seeds, steps, learning_rate=None, out_dir=None, state=None, _deadline=None):
    """:func:`train` in a worker thread; accepts ``timeout=`` or ``deadline=``."""
    return threads.deferToThread(train, config, dataset_seeds, steps, learning_rate=learning_rate,
                                 out_dir=out_dir, state=state, _deadline=_deadline)
