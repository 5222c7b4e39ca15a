# coding: utf-8
# Copyright 2026 The TxRPT Developers.  All rights reserved.
# Use of this source code is governed by the Apache License that can be
# found in the LICENSE file.

from __future__ import absolute_import, division

import os
from io import StringIO

import mock
from twisted.internet import reactor
from twisted.python import usage
from twisted.trial import unittest

from txrpt import tensor as T
from txrpt.config import ModelConfig, format_config
from txrpt.imageio import read_graymap, read_pixmap
from txrpt.scripts.rpt import Options, main, run


def parse(*argv):
    options = Options()
    options.parseOptions(list(argv))
    return options


class TestOptions(unittest.TestCase):

    def test_TrainDefaults(self):
        options = parse("train")
        self.assertEqual(options.subCommand, "train")
        self.assertEqual(options.subOptions["steps"], 500)
        self.assertEqual(options.subOptions["out"], "run")
        self.assertIsNone(options.subOptions["config"])

    def test_TypedValues(self):
        options = parse("--debug", "train", "--steps", "7", "--lr", "0.01", "-s", "3")
        self.assertTrue(options["debug"])
        self.assertEqual((options.subOptions["steps"], options.subOptions["lr"], options.subOptions["seed"]),
                         (7, 0.01, 3))

    def test_CommandIsRequired(self):
        self.assertRaises(usage.UsageError, parse)

    def test_RequiredPaths(self):
        self.assertRaises(usage.UsageError, parse, "eval")
        self.assertRaises(usage.UsageError, parse, "infer", "--ckpt", "model.rpt", "--image", "a.ppm")

    def test_UsageErrorExits(self):
        with mock.patch("sys.stderr", new_callable=StringIO) as stderr:
            with self.assertRaises(SystemExit) as ctx:
                run(["frobnicate"])
        self.assertEqual(ctx.exception.code, 2)
        self.assertIn("frobnicate", stderr.getvalue())


class TestCommands(unittest.TestCase):

    def setUp(self):
        self.out = self.mktemp()
        os.makedirs(self.out)
        self.config_path = os.path.join(self.out, "micro.conf")
        with open(self.config_path, "w") as f:
            f.write(format_config(ModelConfig.micro(checkpoint_every=1000)))
        self.addCleanup(T.set_debug, False)
        stdout = mock.patch("sys.stdout", new_callable=StringIO)
        self.stdout = stdout.start()
        self.addCleanup(stdout.stop)

    def command(self, *argv):
        return main(reactor, parse(*argv))

    def test_Scenes(self):
        scenes = os.path.join(self.out, "scenes")

        def check(_):
            self.assertEqual(sorted(os.listdir(scenes)), ["mask-5.pgm", "mask-6.pgm", "scene-5.ppm", "scene-6.ppm"])
            self.assertEqual(read_pixmap(os.path.join(scenes, "scene-5.ppm")).shape, (16, 16, 3))
            self.assertEqual(set(read_graymap(os.path.join(scenes, "mask-6.pgm")).flat) - {0, 255}, set())

        return self.command("scenes", "-c", self.config_path, "--count", "2", "--seed", "5",
                            "--out", scenes).addCallback(check)

    def test_TrainEvalInfer(self):
        run_dir = os.path.join(self.out, "run")
        scenes = os.path.join(self.out, "scenes")
        ckpt = os.path.join(run_dir, "model.rpt")
        heatmap = os.path.join(self.out, "heat.pgm")

        def evaluate(_):
            self.assertTrue(os.path.exists(ckpt))
            return self.command("eval", "--ckpt", ckpt, "--scenes", "2")

        def scene(report):
            self.assertIn("pixel_f\t", self.stdout.getvalue())
            return self.command("scenes", "-c", self.config_path, "--count", "1", "--out", scenes)

        def infer(_):
            return self.command("infer", "--ckpt", ckpt, "--image", os.path.join(scenes, "scene-0.ppm"),
                                "--heatmap", heatmap)

        def check(_):
            self.assertEqual(read_graymap(heatmap).shape, (16, 16))

        d = self.command("train", "-c", self.config_path, "--steps", "2", "--scenes", "1", "--out", run_dir)
        return d.addCallback(evaluate).addCallback(scene).addCallback(infer).addCallback(check)

    def test_Resume(self):
        run_dir = os.path.join(self.out, "run")

        def resume(_):
            return self.command("train", "--resume", os.path.join(run_dir, "model.rpt"), "--steps", "1",
                                "--out", run_dir)

        def check(state):
            self.assertEqual(state.step, 3)

        d = self.command("train", "-c", self.config_path, "--steps", "2", "--scenes", "1", "--out", run_dir)
        return d.addCallback(resume).addCallback(check)
