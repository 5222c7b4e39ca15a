# coding: utf-8
# Copyright 2026 The TxRPT Developers.  All rights reserved.
# Use of this source code is governed by the Apache License that can be
# found in the LICENSE file.

from __future__ import absolute_import, division

import numpy as np
from numpy.testing import assert_array_equal
from twisted.trial import unittest

from tests.utils import ModelTestCase, wide
from txrpt.errors import ContractError, DimensionError
from txrpt.imageio import export_heatmap, quantize, read_graymap, read_pixmap, write_graymap, write_pixmap
from txrpt.matching import PIXEL_LEVEL, ScoreMap
from txrpt.model import score_heatmap


class TestQuantize(unittest.TestCase):

    def test_HalfRoundsUp(self):
        self.assertEqual(quantize(0.5), 128)

    def test_Endpoints(self):
        assert_array_equal(quantize([0.0, 1.0]), [0, 255])

    def test_Clamped(self):
        assert_array_equal(quantize([-0.2, 1.7]), [0, 255])


class TestPortableMaps(unittest.TestCase):

    def test_PixmapWithinOneStep(self):
        path = self.mktemp()
        image = np.random.default_rng(0).uniform(size=(5, 7, 3))
        write_pixmap(path, image)
        with open(path, "rb") as f:
            self.assertEqual(f.read(2), b"P6")
        back = read_pixmap(path)
        self.assertEqual(back.shape, (5, 7, 3))
        self.assertLessEqual(np.abs(back - image).max(), 0.5 / 255 + 1e-12)

    def test_GraymapOfBooleans(self):
        path = self.mktemp()
        mask = np.zeros((3, 4), bool)
        mask[1, 2] = True
        write_graymap(path, mask)
        with open(path, "rb") as f:
            self.assertEqual(f.read(2), b"P5")
        expected = np.zeros((3, 4), np.uint8)
        expected[1, 2] = 255
        assert_array_equal(read_graymap(path), expected)

    def test_KindMismatch(self):
        path = self.mktemp()
        write_graymap(path, np.zeros((3, 3), np.uint8))
        self.assertRaises(DimensionError, read_pixmap, path)
        self.assertRaises(DimensionError, write_pixmap, path, np.zeros((3, 3)))
        self.assertRaises(DimensionError, write_graymap, path, np.zeros((3, 3, 2)))


class TestExportHeatmap(ModelTestCase):

    def test_FeatureLevelIsRejected(self):
        S = ScoreMap(wide(np.full((2, 2, 1), 0.5)))
        self.assertRaises(ContractError, export_heatmap, S, self.mktemp())

    def test_Bytes(self):
        path = self.mktemp()
        pixels = export_heatmap(ScoreMap(wide([[[0.0], [0.5], [1.0]]]), PIXEL_LEVEL), path)
        assert_array_equal(pixels, [[0, 128, 255]])
        assert_array_equal(read_graymap(path), pixels)

    def test_ModelHeatmap(self):
        path = self.mktemp()
        heatmap = score_heatmap(self.model, self.scene.image)
        pixels = export_heatmap(heatmap, path)
        self.assertEqual(pixels.shape, (16, 16))
        assert_array_equal(read_graymap(path), quantize(heatmap.grid.data[:, :, 0]))
