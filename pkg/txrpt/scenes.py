# Copyright 2026 The TxRPT Developers.  All rights reserved.
# Use of this source code is governed by the Apache License that can be
# found in the LICENSE file.

"""
Procedural scenes: a smooth noise background with a few rotated, striped
bars standing in for words.  The mask marks every pixel whose center lies
inside some bar.
"""

from __future__ import absolute_import, division

import math
from collections import namedtuple

import cv2
import numpy as np
from twisted.internet import defer, threads

from txrpt.errors import DimensionError


MIN_TEXT_FRACTION = 0.01
MAX_TEXT_FRACTION = 0.4
MAX_ATTEMPTS = 32

INK = 0.08
PAPER = 0.92


class Scene(namedtuple("Scene", ["image", "mask", "polygons", "seed"])):
    """An H x W x 3 image in [0, 1], its H x W uint8 text mask and the bar corners.

    Each polygon is a 4 x 2 array of (x, y) pixel coordinates.
    """

    @property
    def text_fraction(self):
        return float(self.mask.mean())


def _corners(cx, cy, length, thickness, angle):
    c, s = math.cos(angle), math.sin(angle)
    along = np.array([c, s]) * (length / 2)
    across = np.array([-s, c]) * (thickness / 2)
    center = np.array([cx, cy])
    return np.array([center - along - across, center + along - across,
                     center + along + across, center - along + across])


def _pixel_centers(height, width):
    ys, xs = np.mgrid[0:height, 0:width]
    return xs + 0.5, ys + 0.5


def _inside(polygon, xs, ys):
    """Half-plane test against every edge; points on an edge count as inside."""
    positive = np.ones(xs.shape, bool)
    negative = np.ones(xs.shape, bool)
    for a in range(len(polygon)):
        ax, ay = polygon[a]
        bx, by = polygon[(a + 1) % len(polygon)]
        cross = (bx - ax) * (ys - ay) - (by - ay) * (xs - ax)
        positive &= cross >= 0
        negative &= cross <= 0
    return positive | negative


def rasterize(polygons, height, width):
    xs, ys = _pixel_centers(height, width)
    mask = np.zeros((height, width), np.uint8)
    for polygon in polygons:
        mask[_inside(np.asarray(polygon, float), xs, ys)] = 1
    return mask


def _background(rng, height, width):
    coarse = rng.uniform(0.25, 0.75, size=(4, 4, 3)).astype(np.float32)
    return cv2.resize(coarse, (width, height), interpolation=cv2.INTER_LINEAR).astype(np.float64)


def _paint_bar(image, polygon, strokes, ink, paper):
    height, width = image.shape[:2]
    xs, ys = _pixel_centers(height, width)
    inside = _inside(polygon, xs, ys)
    origin, end = polygon[0], polygon[1]
    axis = end - origin
    length = float(np.hypot(*axis))
    along = ((xs - origin[0]) * axis[0] + (ys - origin[1]) * axis[1]) / length
    segments = 2 * strokes - 1
    index = np.clip(np.floor(along / length * segments), 0, segments - 1).astype(int)
    image[inside] = np.where((index[inside] % 2 == 0)[:, None], ink, paper)


def _random_bars(rng, height, width):
    bars = []
    for _ in range(int(rng.integers(1, 7))):
        cx = rng.uniform(0.15, 0.85) * width
        cy = rng.uniform(0.15, 0.85) * height
        length = rng.uniform(0.25, 0.6) * width
        thickness = rng.uniform(0.1, 0.2) * height
        angle = math.radians(rng.uniform(-30, 30))
        strokes = int(rng.integers(2, 7))
        dark_ink = rng.random() < 0.5
        bars.append((_corners(cx, cy, length, thickness, angle), strokes, dark_ink))
    return bars


def _centered_bar(height, width):
    return [(_corners(width / 2, height / 2, 0.5 * width, 0.15 * height, 0.0), 4, True)]


def generate_scene(seed, config):
    """Deterministic scene for ``seed`` at the extents of ``config``.

    Bar layouts whose text fraction falls outside [0.01, 0.4] are redrawn
    from the same generator; a single centered bar is the last resort.
    """
    height, width = config.height, config.width
    if height <= 0 or width <= 0:
        raise DimensionError("TxRPT: scene extents must be positive, got {0}x{1}".format(height, width))
    rng = np.random.default_rng(seed)
    image = _background(rng, height, width)

    bars = None
    for _ in range(MAX_ATTEMPTS):
        candidate = _random_bars(rng, height, width)
        fraction = rasterize([b[0] for b in candidate], height, width).mean()
        if MIN_TEXT_FRACTION <= fraction <= MAX_TEXT_FRACTION:
            bars = candidate
            break
    if bars is None:
        bars = _centered_bar(height, width)

    for polygon, strokes, dark_ink in bars:
        ink, paper = (INK, PAPER) if dark_ink else (PAPER, INK)
        _paint_bar(image, polygon, strokes, ink, paper)

    polygons = [b[0] for b in bars]
    return Scene(np.clip(image, 0.0, 1.0), rasterize(polygons, height, width), polygons, seed)


def generate_scenes(seeds, config):
    return [generate_scene(seed, config) for seed in seeds]


def generate_scenes_deferred(seeds, config):
    """Generate one scene per seed in the reactor thread pool, in seed order."""
    def on_fail(failure):
        failure.trap(defer.FirstError)
        failure.value.subFailure.raiseException()

    return defer.gatherResults([threads.deferToThread(generate_scene, seed, config) for seed in seeds],
                               consumeErrors=True).addErrback(on_fail)
