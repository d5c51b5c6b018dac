"""Seeded synthetic data: measure families, outlier corruption, noisy digits.

Every generator is a pure function of its spec.  The top-level seed is
split into per-measure substreams (``numpy.random.SeedSequence.spawn``),
so measure k of a run is reproducible on its own and streams can be
regenerated lazily without materializing earlier measures.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Union

import numpy as np

from .errors import AllZeroImage, DimensionMismatch, InvalidSpec, UnsupportedFormat
from .measures import DiscreteMeasure, make_measure, push_forward

__all__ = [
    "GeneratorSpec",
    "CorruptionSpec",
    "generate",
    "iter_measures",
    "corrupt_outliers",
    "shell_translation_sampler",
    "image_to_measure",
    "noisy_digit",
    "gaussian_cloud",
    "spiral_cloud",
    "ellipse_cloud",
]

FAMILIES = ("gaussian", "spiral", "ellipse", "pair-ellipses")

Range = tuple[float, float]
Samples = Union[int, tuple[int, int]]


@dataclass(frozen=True)
class GeneratorSpec:
    """Parameters of one synthetic 2-d family.

    ``samples`` is a fixed per-measure count or an inclusive (lo, hi) range
    drawn per measure.  Box parameters are ((x_lo, x_hi), (y_lo, y_hi)).
    """

    family: str
    num_measures: int
    samples: Samples
    seed: int = 0
    mean_box: tuple[Range, Range] = ((-3.0, 3.0), (-5.0, 5.0))
    ratio_range: Range = (0.0, 3.0)
    center_box: tuple[Range, Range] = ((-5.0, 5.0), (-5.0, 5.0))
    axis_range: Range = (6.0, 14.0)
    inner_axis_range: Range = (1.0, 7.0)
    outer_axis_range: Range = (7.0, 13.0)
    jitter: float = 0.05

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidSpec(f"unknown family {self.family!r}; choose one of {FAMILIES}")
        if self.num_measures < 1:
            raise InvalidSpec("num_measures must be at least 1")
        if isinstance(self.samples, int):
            if self.samples < 1:
                raise InvalidSpec("samples must be at least 1")
        else:
            lo, hi = self.samples
            if lo < 1 or hi < lo:
                raise InvalidSpec("sample range must satisfy 1 <= lo <= hi")
        for name in ("ratio_range", "axis_range", "inner_axis_range", "outer_axis_range"):
            lo, hi = getattr(self, name)
            if hi < lo:
                raise InvalidSpec(f"{name} is empty")
        for name in ("mean_box", "center_box"):
            for lo, hi in getattr(self, name):
                if hi < lo:
                    raise InvalidSpec(f"{name} is empty")
        if self.jitter < 0:
            raise InvalidSpec("jitter must be nonnegative")


def _sample_count(spec: GeneratorSpec, rng: np.random.Generator) -> int:
    if isinstance(spec.samples, int):
        return spec.samples
    lo, hi = spec.samples
    return int(rng.integers(lo, hi + 1))


def _uniform_in(rng: np.random.Generator, interval: Range) -> float:
    return float(rng.uniform(interval[0], interval[1]))


def _curve_points(
    curve: Callable[[np.ndarray], np.ndarray],
    t_max: float,
    n: int,
    rng: np.random.Generator,
    jitter: float,
) -> np.ndarray:
    """n points spread uniformly in arc length along ``curve([0, t_max])``."""
    dense_t = np.linspace(0.0, t_max, 4096)
    dense = curve(dense_t)
    seg = np.linalg.norm(np.diff(dense, axis=0), axis=1)
    cumulative = np.concatenate([[0.0], np.cumsum(seg)])
    total = cumulative[-1]
    if total <= 0:
        pts = np.repeat(dense[:1], n, axis=0)
    else:
        targets = rng.uniform(0.0, total, n)
        t_of_len = np.interp(targets, cumulative, dense_t)
        pts = curve(t_of_len)
    if jitter > 0:
        pts = pts + jitter * rng.standard_normal(pts.shape)
    return pts


def gaussian_cloud(mean, n: int, rng: np.random.Generator) -> DiscreteMeasure:
    """n samples from an isotropic unit-covariance Gaussian at ``mean``."""
    mean = np.asarray(mean, dtype=float)
    return make_measure(mean + rng.standard_normal((n, mean.shape[0])))


def spiral_cloud(
    ratio: float, n: int, rng: np.random.Generator, jitter: float = 0.05
) -> DiscreteMeasure:
    """n points along the spiral (ratio*t*cos t, ratio*t*sin t), t in [0, 4*pi]."""

    def curve(t: np.ndarray) -> np.ndarray:
        return np.column_stack([ratio * t * np.cos(t), ratio * t * np.sin(t)])

    return make_measure(_curve_points(curve, 4.0 * np.pi, n, rng, jitter))


def ellipse_cloud(
    center, semi_axes, n: int, rng: np.random.Generator, jitter: float = 0.05
) -> DiscreteMeasure:
    """n points along the axis-aligned ellipse boundary around ``center``."""
    cx, cy = float(center[0]), float(center[1])
    ax, ay = float(semi_axes[0]), float(semi_axes[1])

    def curve(t: np.ndarray) -> np.ndarray:
        return np.column_stack([cx + ax * np.cos(t), cy + ay * np.sin(t)])

    return make_measure(_curve_points(curve, 2.0 * np.pi, n, rng, jitter))


def _one_measure(spec: GeneratorSpec, rng: np.random.Generator) -> DiscreteMeasure:
    n = _sample_count(spec, rng)
    if spec.family == "gaussian":
        mean = np.array([_uniform_in(rng, spec.mean_box[0]), _uniform_in(rng, spec.mean_box[1])])
        return gaussian_cloud(mean, n, rng)
    if spec.family == "spiral":
        return spiral_cloud(_uniform_in(rng, spec.ratio_range), n, rng, spec.jitter)
    if spec.family == "ellipse":
        center = (_uniform_in(rng, spec.center_box[0]), _uniform_in(rng, spec.center_box[1]))
        axes = (_uniform_in(rng, spec.axis_range), _uniform_in(rng, spec.axis_range))
        return ellipse_cloud(center, axes, n, rng, spec.jitter)
    # pair-ellipses: each sample sits on one of two nested-size ellipses
    centers = [
        (_uniform_in(rng, spec.center_box[0]), _uniform_in(rng, spec.center_box[1]))
        for _ in range(2)
    ]
    axis_pairs = [
        (_uniform_in(rng, spec.inner_axis_range), _uniform_in(rng, spec.inner_axis_range)),
        (_uniform_in(rng, spec.outer_axis_range), _uniform_in(rng, spec.outer_axis_range)),
    ]
    which = rng.integers(0, 2, n)
    counts = [int(np.sum(which == 0)), int(np.sum(which == 1))]
    parts = []
    for idx in range(2):
        if counts[idx] == 0:
            continue
        parts.append(
            ellipse_cloud(centers[idx], axis_pairs[idx], counts[idx], rng, spec.jitter).points
        )
    return make_measure(np.vstack(parts))


def iter_measures(spec: GeneratorSpec) -> Iterator[DiscreteMeasure]:
    """Lazily yield the spec's measures, one independent substream each."""
    children = np.random.SeedSequence(spec.seed).spawn(spec.num_measures)
    for child in children:
        yield _one_measure(spec, np.random.default_rng(child))


def generate(spec: GeneratorSpec) -> list[DiscreteMeasure]:
    return list(iter_measures(spec))


def shell_translation_sampler(low: float = 5.0, high: float = 10.0):
    """Offsets with uniformly random direction and magnitude in [low, high]."""

    def sample(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
        direction = rng.standard_normal((n, d))
        norms = np.linalg.norm(direction, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        return direction / norms * rng.uniform(low, high, n)[:, None]

    return sample


@dataclass(frozen=True)
class CorruptionSpec:
    """Independent per-atom translation with probability ``bernoulli_p``.

    ``translation_sampler(rng, n, d)`` must return an (n, d) offset array;
    the default draws a uniform direction with magnitude in [5, 10].
    """

    bernoulli_p: float
    translation_sampler: Optional[Callable[[np.random.Generator, int, int], np.ndarray]] = None
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.bernoulli_p <= 1.0:
            raise InvalidSpec("bernoulli_p must lie in [0, 1]")


def corrupt_outliers(m: DiscreteMeasure, spec: CorruptionSpec) -> DiscreteMeasure:
    """Translate each atom independently with probability p; weights unchanged."""
    rng = np.random.default_rng(spec.seed)
    hit = rng.random(m.n) < spec.bernoulli_p
    points = np.array(m.points)
    count = int(hit.sum())
    if count:
        sampler = spec.translation_sampler or shell_translation_sampler()
        points[hit] += sampler(rng, count, m.dim)
    return DiscreteMeasure(points, m.weights)


def _pgm_tokens(data: bytes, limit: int) -> tuple[list[bytes], int]:
    """First ``limit`` whitespace-separated header tokens, skipping comments;
    returns the tokens and the offset one past the final token's delimiter."""
    tokens: list[bytes] = []
    i = 0
    while len(tokens) < limit and i < len(data):
        ch = data[i : i + 1]
        if ch.isspace():
            i += 1
            continue
        if ch == b"#":
            while i < len(data) and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        start = i
        while i < len(data) and not data[i : i + 1].isspace() and data[i : i + 1] != b"#":
            i += 1
        tokens.append(data[start:i])
    if len(tokens) == limit and i < len(data):
        i += 1  # single whitespace after maxval precedes raw pixel data
    return tokens, i


def image_to_measure(raster: bytes) -> DiscreteMeasure:
    """Measure on the pixel grid of an 8-bit PGM image (plain P2 or raw P5).

    Atom (col, rows-1-row) gets weight proportional to the pixel intensity;
    zero pixels are dropped.  The weights are exact intensity fractions:
    integer counts divided by the integer total.
    """
    if not isinstance(raster, (bytes, bytearray)):
        raise UnsupportedFormat("expected raw PGM bytes")
    magic = raster[:2]
    if magic not in (b"P2", b"P5"):
        raise UnsupportedFormat("only plain (P2) or raw (P5) PGM images are supported")
    tokens, offset = _pgm_tokens(raster, 4)
    if len(tokens) < 4:
        raise UnsupportedFormat("truncated PGM header")
    try:
        width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError as exc:
        raise UnsupportedFormat("malformed PGM header") from exc
    if maxval <= 0 or maxval > 255:
        raise UnsupportedFormat("only 8-bit PGM images (maxval <= 255) are supported")
    if width < 1 or height < 1:
        raise UnsupportedFormat("empty PGM image")

    if magic == b"P5":
        try:
            pixels = np.frombuffer(raster, dtype=np.uint8, count=width * height, offset=offset)
        except ValueError as exc:
            raise UnsupportedFormat("truncated PGM pixel data") from exc
        grid = pixels.reshape(height, width).astype(np.int64)
    else:
        try:
            values = [int(tok) for tok in raster[offset:].split()]
        except ValueError as exc:
            raise UnsupportedFormat("malformed plain PGM pixel data") from exc
        if len(values) != width * height:
            raise UnsupportedFormat("plain PGM pixel count does not match header")
        grid = np.asarray(values, dtype=np.int64).reshape(height, width)
    if grid.min() < 0 or grid.max() > maxval:
        raise UnsupportedFormat("pixel value outside [0, maxval]")

    total = int(grid.sum())
    if total == 0:
        raise AllZeroImage("an all-zero image defines no measure")
    rows, cols = np.nonzero(grid)
    points = np.column_stack([cols, height - 1 - rows]).astype(float)
    weights = grid[rows, cols] / total
    return DiscreteMeasure(points, weights)


NEIGHBOR_OFFSETS = np.array(
    [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)], dtype=float
)


def noisy_digit(
    prototype: DiscreteMeasure,
    p: float,
    seed: int,
    grid_shape: tuple[int, int] = (28, 28),
) -> DiscreteMeasure:
    """Displace each atom of a grid-supported measure with probability p to a
    uniformly chosen 8-neighbor cell, clipped to ``grid_shape`` = (cols, rows).

    Weights travel with their atoms; atoms landing on the same cell stay
    separate."""
    if not 0.0 <= p <= 1.0:
        raise InvalidSpec("p must lie in [0, 1]")
    if prototype.dim != 2:
        raise DimensionMismatch("grid measures are two-dimensional")
    rng = np.random.default_rng(seed)
    hit = rng.random(prototype.n) < p
    points = np.array(prototype.points)
    count = int(hit.sum())
    if count:
        moves = NEIGHBOR_OFFSETS[rng.integers(0, len(NEIGHBOR_OFFSETS), count)]
        moved = points[hit] + moves
        moved[:, 0] = np.clip(moved[:, 0], 0, grid_shape[0] - 1)
        moved[:, 1] = np.clip(moved[:, 1], 0, grid_shape[1] - 1)
        points[hit] = moved
    return DiscreteMeasure(points, prototype.weights)
