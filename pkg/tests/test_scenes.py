# coding: utf-8
# Copyright 2026 The TxRPT Developers.  All rights reserved.
# Use of this source code is governed by the Apache License that can be
# found in the LICENSE file.

from __future__ import absolute_import, division

import numpy as np
from numpy.testing import assert_array_equal
from twisted.trial import unittest

from txrpt.config import ModelConfig
from txrpt.errors import DimensionError
from txrpt.scenes import (INK, MAX_TEXT_FRACTION, MIN_TEXT_FRACTION, PAPER, generate_scene, generate_scenes,
                          generate_scenes_deferred, rasterize)


def point_in_polygon(polygon, x, y):
    signs = set()
    for a in range(len(polygon)):
        ax, ay = polygon[a]
        bx, by = polygon[(a + 1) % len(polygon)]
        cross = (bx - ax) * (y - ay) - (by - ay) * (x - ax)
        if cross > 0:
            signs.add(1)
        elif cross < 0:
            signs.add(-1)
    return len(signs) < 2


class TestGenerateScene(unittest.TestCase):

    def setUp(self):
        self.config = ModelConfig.toy()

    def test_Deterministic(self):
        a, b = generate_scene(11, self.config), generate_scene(11, self.config)
        assert_array_equal(a.image, b.image)
        assert_array_equal(a.mask, b.mask)
        self.assertEqual(a.seed, 11)

    def test_SeedsDiffer(self):
        self.assertFalse(np.array_equal(generate_scene(1, self.config).image, generate_scene(2, self.config).image))

    def test_Extents(self):
        scene = generate_scene(0, ModelConfig(height=32, width=64, grid=2, downsample=8))
        self.assertEqual(scene.image.shape, (32, 64, 3))
        self.assertEqual(scene.mask.shape, (32, 64))
        self.assertEqual(scene.mask.dtype, np.uint8)
        self.assertTrue(0 <= scene.image.min() and scene.image.max() <= 1)

    def test_TextFractionBounds(self):
        for seed in range(100):
            fraction = generate_scene(seed, self.config).text_fraction
            self.assertTrue(MIN_TEXT_FRACTION <= fraction <= MAX_TEXT_FRACTION, (seed, fraction))

    def test_MaskMatchesPolygons(self):
        scene = generate_scene(5, self.config)
        expected = np.zeros_like(scene.mask)
        for y in range(self.config.height):
            for x in range(self.config.width):
                if any(point_in_polygon(p, x + 0.5, y + 0.5) for p in scene.polygons):
                    expected[y, x] = 1
        assert_array_equal(scene.mask, expected)

    def test_TextPixelsArePainted(self):
        scene = generate_scene(7, self.config)
        inside = scene.image[scene.mask == 1]
        self.assertTrue(np.all((inside == INK) | (inside == PAPER)))
        self.assertTrue(np.any(inside == INK) and np.any(inside == PAPER))

    def test_NonPositiveExtents(self):
        self.assertRaises(DimensionError, generate_scene, 0, ModelConfig(height=0))


class TestRasterize(unittest.TestCase):

    def test_AxisAlignedSquare(self):
        mask = rasterize([np.array([[1, 1], [4, 1], [4, 3], [1, 3]])], 5, 6)
        expected = np.zeros((5, 6), np.uint8)
        expected[1:3, 1:4] = 1
        assert_array_equal(mask, expected)

    def test_EitherWinding(self):
        square = np.array([[0, 0], [2, 0], [2, 2], [0, 2]])
        assert_array_equal(rasterize([square], 3, 3), rasterize([square[::-1]], 3, 3))

    def test_Empty(self):
        self.assertFalse(rasterize([], 4, 4).any())


class TestGenerateScenesDeferred(unittest.TestCase):

    def test_SeedOrder(self):
        config = ModelConfig.micro()
        seeds = [4, 1, 9]

        def check(scenes):
            self.assertEqual([s.seed for s in scenes], seeds)
            for scene, direct in zip(scenes, generate_scenes(seeds, config)):
                assert_array_equal(scene.image, direct.image)

        return generate_scenes_deferred(seeds, config).addCallback(check)

    def test_FirstErrorIsUnwrapped(self):
        return self.assertFailure(generate_scenes_deferred([0, 1], ModelConfig(width=0)), DimensionError)
