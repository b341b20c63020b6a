"""Seeded synthetic test data: ellipse phantoms (2D) and sparse signals (1D)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class Ellipse:
    center: tuple[float, float]  # (row, col) in pixels
    axes: tuple[float, float]  # semi-axes in pixels
    angle: float  # radians
    intensity: float


@dataclass(frozen=True)
class PhantomSpec:
    n: int
    seed: int = 0
    ellipse_count_range: tuple[int, int] = (3, 10)
    intensity_range: tuple[float, float] = (-0.6, 0.9)
    axis_range: tuple[float, float] = (0.05, 0.40)  # fraction of n


def render_ellipses(n: int, ellipses: Sequence[Ellipse]) -> np.ndarray:
    """Accumulate ellipse indicators, clip to [0, 1], return as complex."""
    rows, cols = np.mgrid[0:n, 0:n].astype(float)
    img = np.zeros((n, n))
    for e in ellipses:
        dr = rows - e.center[0]
        dc = cols - e.center[1]
        c, s = np.cos(e.angle), np.sin(e.angle)
        u = c * dc + s * dr
        v = -s * dc + c * dr
        inside = (u / e.axes[0]) ** 2 + (v / e.axes[1]) ** 2 <= 1.0
        img[inside] += e.intensity
    return np.clip(img, 0.0, 1.0).astype(complex)


def draw_ellipses(spec: PhantomSpec) -> list[Ellipse]:
    lo, hi = spec.ellipse_count_range
    ilo, ihi = spec.intensity_range
    alo, ahi = spec.axis_range
    if lo > hi or lo < 0 or ilo > ihi or alo > ahi or alo <= 0:
        raise ValueError(f"empty or invalid range in {spec}")
    rng = np.random.default_rng(spec.seed)
    n = spec.n
    count = int(rng.integers(lo, hi + 1))
    out = []
    for _ in range(count):
        axes = rng.uniform(alo, ahi, size=2) * n
        # keep centers away from the border so most ellipses are fully visible
        center = rng.uniform(0.2 * n, 0.8 * n, size=2)
        angle = rng.uniform(0.0, np.pi)
        intensity = rng.uniform(ilo, ihi)
        out.append(Ellipse((center[0], center[1]), (axes[0], axes[1]), angle, intensity))
    return out


def gen_phantom(spec: PhantomSpec) -> np.ndarray:
    """Random ellipse phantom: real-valued (stored complex), entries in [0, 1]."""
    if spec.n < 16:
        raise ValueError("phantom side length must be >= 16")
    return render_ellipses(spec.n, draw_ellipses(spec))


@dataclass(frozen=True)
class SparseSpec1D:
    n: int
    s: int
    mode: str = "spike"  # "spike" | "piecewise"
    min_magnitude: float = 0.5
    max_magnitude: float = 1.0
    complex_values: bool = False
    seed: int = 0


def _amplitudes(rng, size, spec: SparseSpec1D) -> np.ndarray:
    mag = rng.uniform(spec.min_magnitude, spec.max_magnitude, size=size)
    if spec.complex_values:
        return mag * np.exp(2j * np.pi * rng.uniform(size=size))
    return mag * rng.choice([-1.0, 1.0], size=size)


def gen_signal_1d(spec: SparseSpec1D) -> np.ndarray:
    """Sparse spike train or piecewise-constant signal.

    Spike mode puts exactly ``s`` nonzeros at indices other than 0. Piecewise
    mode produces a signal whose periodic gradient has exactly ``s`` nonzeros,
    none at indices 0 or 1; both positions are reserved for a spike at 0.
    """
    n, s = spec.n, spec.s
    if n < 2 or n % 2:
        raise ValueError("n must be even")
    if s < 0 or 4 * s >= n:
        raise ValueError(f"s={s} too large for n={n} (need s < n/4)")
    if spec.mode not in ("spike", "piecewise"):
        raise ValueError(f"unknown mode {spec.mode!r}")
    if spec.min_magnitude <= 0 or spec.max_magnitude < spec.min_magnitude:
        raise ValueError("invalid magnitude range")
    rng = np.random.default_rng(spec.seed)
    x = np.zeros(n, dtype=complex)

    if spec.mode == "spike":
        support = rng.choice(np.arange(1, n), size=s, replace=False)
        x[support] = _amplitudes(rng, s, spec)
        return x

    offset = _amplitudes(rng, 1, spec)[0]
    if s == 0:
        return x + offset
    if s == 1:
        raise ValueError("a periodic piecewise-constant signal needs at least 2 jumps")
    locs = np.sort(rng.choice(np.arange(2, n), size=s, replace=False))
    # jumps must sum to zero for the periodic gradient to stay s-sparse
    while True:
        jumps = _amplitudes(rng, s - 1, spec)
        last = -jumps.sum()
        if abs(last) >= spec.min_magnitude:
            break
    jumps = np.concatenate([jumps, [last]])
    rng.shuffle(jumps)
    steps = np.zeros(n, dtype=complex)
    steps[locs] = jumps
    return offset + np.cumsum(steps)
