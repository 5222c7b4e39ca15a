# Copyright 2026 The TxRPT Developers.  All rights reserved.
# Use of this source code is governed by the Apache License that can be
# found in the LICENSE file.

"""
The ``rpt`` command line: train, eval, infer, gradcheck, ablate, scenes.
"""

from __future__ import absolute_import, division, print_function

import logging
import os
import sys

from twisted.internet import defer, task
from twisted.python import log, usage

from txrpt import tensor as T
from txrpt.checkpoint import load_model
from txrpt.config import ModelConfig, load_config
from txrpt.diagnostics import GRADCHECK_TOLERANCE, ablation_deferred, format_ablation, gradcheck_deferred
from txrpt.errors import GradientCheckFailed
from txrpt.evaluation import evaluate_deferred
from txrpt.imageio import export_heatmap, read_pixmap, write_graymap, write_pixmap
from txrpt.model import score_heatmap
from txrpt.scenes import generate_scenes_deferred
from txrpt.training import load_train_state, train_deferred


DEFAULT_SCENES = 8


def _config(path, seed=None):
    config = load_config(path) if path else ModelConfig.toy()
    if seed is not None:
        config = config._replace(seed=seed)
    return config.validate()


def _seeds(first, count):
    return list(range(first, first + count))


class TrainOptions(usage.Options):
    synopsis = "--config <path> --steps N --seed S --out <dir>"
    optParameters = [
        ["config", "c", None, "Configuration file; toy defaults when omitted."],
        ["steps", "n", 500, "Optimizer steps.", int],
        ["seed", "s", 0, "Model seed and first scene seed.", int],
        ["scenes", None, DEFAULT_SCENES, "Number of training scenes.", int],
        ["lr", None, None, "Learning rate; the config value when omitted.", float],
        ["out", "o", "run", "Output directory for metrics and checkpoints."],
        ["resume", None, None, "Continue from a training checkpoint."],
        ["timeout", None, None, "Give up after this many seconds.", float],
    ]


class EvalOptions(usage.Options):
    synopsis = "--ckpt <path> --scenes N --seed S"
    optParameters = [
        ["ckpt", None, None, "Model checkpoint."],
        ["scenes", None, DEFAULT_SCENES, "Number of scenes.", int],
        ["seed", "s", 0, "First scene seed.", int],
        ["threshold", None, None, "Probability threshold; the config value when omitted.", float],
    ]

    def postOptions(self):
        if not self["ckpt"]:
            raise usage.UsageError("--ckpt is required")


class InferOptions(usage.Options):
    synopsis = "--ckpt <path> --image <ppm> --heatmap <pgm>"
    optParameters = [
        ["ckpt", None, None, "Model checkpoint."],
        ["image", None, None, "Input pixmap (P6)."],
        ["heatmap", None, None, "Output graymap (P5)."],
    ]

    def postOptions(self):
        for name in ("ckpt", "image", "heatmap"):
            if not self[name]:
                raise usage.UsageError("--{0} is required".format(name))


class GradcheckOptions(usage.Options):
    optFlags = [
        ["full", None, "Check every trainable parameter tensor."],
    ]
    optParameters = [
        ["coords", None, 3, "Coordinates checked per parameter tensor.", int],
        ["seed", "s", 0, "Model and scene seed.", int],
        ["timeout", None, None, "Give up after this many seconds.", float],
    ]


class AblateOptions(usage.Options):
    synopsis = "--config <path>"
    optParameters = [
        ["config", "c", None, "Configuration file; toy defaults when omitted."],
        ["steps", "n", 100, "Optimizer steps per row.", int],
        ["seed", "s", 0, "Model seed and first scene seed.", int],
        ["scenes", None, DEFAULT_SCENES, "Number of training scenes.", int],
        ["timeout", None, None, "Give up after this many seconds.", float],
    ]


class ScenesOptions(usage.Options):
    synopsis = "--count N --seed S --out <dir>"
    optParameters = [
        ["config", "c", None, "Configuration file for the scene extents."],
        ["count", "n", DEFAULT_SCENES, "Number of scenes.", int],
        ["seed", "s", 0, "First scene seed.", int],
        ["out", "o", "scenes", "Output directory."],
    ]


class Options(usage.Options):
    synopsis = "rpt [--debug] <command> [options]"
    optFlags = [
        ["debug", "d", "Check every tensor operation for NaN and Inf."],
    ]
    subCommands = [
        ["train", None, TrainOptions, "Train a detector on synthetic scenes."],
        ["eval", None, EvalOptions, "Evaluate a checkpoint on synthetic scenes."],
        ["infer", None, InferOptions, "Export the score heatmap of one image."],
        ["gradcheck", None, GradcheckOptions, "Compare backward with finite differences."],
        ["ablate", None, AblateOptions, "Train every row of the ablation matrix."],
        ["scenes", None, ScenesOptions, "Write synthetic scenes and their masks."],
    ]

    def postOptions(self):
        if self.subCommand is None:
            raise usage.UsageError("a command is required")


def _timeout_kwargs(options):
    return {"timeout": options["timeout"]} if options["timeout"] else {}


def do_train(options):
    if options["resume"]:
        state = load_train_state(options["resume"])
        config, seeds = state.config, state.seeds
    else:
        state = None
        config = _config(options["config"], options["seed"])
        seeds = _seeds(options["seed"], options["scenes"])

    def done(result):
        print(result.final.metrics_line(result.step), end="")
        return result

    return train_deferred(config, seeds, options["steps"], learning_rate=options["lr"], out_dir=options["out"],
                          state=state, **_timeout_kwargs(options)).addCallback(done)


def do_eval(options):
    model = load_model(options["ckpt"])
    threshold = options["threshold"] if options["threshold"] is not None else model.config.threshold

    def on_scenes(scenes):
        return evaluate_deferred(model, scenes, threshold)

    def done(report):
        for name, value in zip(report._fields, report):
            print("{0}\t{1:.6f}".format(name, value))
        return report

    return generate_scenes_deferred(_seeds(options["seed"], options["scenes"]), model.config)\
        .addCallback(on_scenes).addCallback(done)


def do_infer(options):
    model = load_model(options["ckpt"])
    heatmap = score_heatmap(model, read_pixmap(options["image"]))
    export_heatmap(heatmap, options["heatmap"])
    log.msg("TxRPT: wrote heatmap {0}".format(options["heatmap"]), logLevel=logging.INFO)
    return defer.succeed(heatmap)


def do_gradcheck(options):
    def done(result):
        for name, error in result.errors:
            print("{0}\t{1:.3e}".format(name, error))
        print("worst\t{0:.3e}".format(result.worst))
        if not result.passed:
            raise GradientCheckFailed("TxRPT: worst relative error {0:.3e} is not below {1:g}"
                                      .format(result.worst, GRADCHECK_TOLERANCE))
        return result

    return gradcheck_deferred(options["full"], options["coords"], options["seed"],
                              **_timeout_kwargs(options)).addCallback(done)


def do_ablate(options):
    config = _config(options["config"], options["seed"])

    def done(results):
        print(format_ablation(results), end="")
        return results

    return ablation_deferred(config, options["steps"], _seeds(options["seed"], options["scenes"]),
                             **_timeout_kwargs(options)).addCallback(done)


def do_scenes(options):
    config = _config(options["config"])
    out = options["out"]
    if not os.path.isdir(out):
        os.makedirs(out)

    def write(scenes):
        for scene in scenes:
            write_pixmap(os.path.join(out, "scene-{0}.ppm".format(scene.seed)), scene.image)
            write_graymap(os.path.join(out, "mask-{0}.pgm".format(scene.seed)), scene.mask.astype(bool))
        log.msg("TxRPT: wrote {0} scenes to {1}".format(len(scenes), out), logLevel=logging.INFO)
        return scenes

    return generate_scenes_deferred(_seeds(options["seed"], options["count"]), config).addCallback(write)


COMMANDS = {
    "train": do_train,
    "eval": do_eval,
    "infer": do_infer,
    "gradcheck": do_gradcheck,
    "ablate": do_ablate,
    "scenes": do_scenes,
}


def main(reactor, options):
    if options["debug"]:
        T.set_debug(True)
    return defer.maybeDeferred(COMMANDS[options.subCommand], options.subOptions)


def run(argv=None):
    options = Options()
    try:
        options.parseOptions(sys.argv[1:] if argv is None else argv)
    except usage.UsageError as e:
        print("{0}: {1}".format(sys.argv[0], e), file=sys.stderr)
        print(options, file=sys.stderr)
        sys.exit(2)
    log.startLogging(sys.stderr, setStdout=False)
    task.react(main, [options])


if __name__ == "__main__":
    run()
