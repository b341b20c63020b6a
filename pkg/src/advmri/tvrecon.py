"""TV-regularized reconstruction by ADMM, and grid-search calibration.

Solves ``argmin_z ||A z - y||^2 + lam * ||grad z||_1`` (anisotropic TV) with
the splitting ``w = grad z``:

    z <- (2 A*A + tau grad*grad)^-1 (2 A*y + tau grad*(w - u))
    w <- soft(grad z + u, lam / tau)
    u <- u + grad z - w

Both ``A*A`` and ``grad*grad`` are diagonal in the Fourier basis, so the
z-update is an exact division there.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import transforms as tf


def soft_threshold(v, t):
    """Complex soft-thresholding ``v * max(|v| - t, 0) / |v|`` (0 at v = 0)."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("threshold must be nonnegative")
    v = np.asarray(v)
    mag = np.abs(v)
    # the discarded branch may divide by 0 or a subnormal |v|
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        scale = np.where(mag > t, 1.0 - t / mag, 0.0)
    out = v * scale
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class ReconConfig:
    lam: float
    penalty: float
    iterations: int = 200
    warm_start: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if not self.penalty > 0:
            raise ValueError("penalty must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")

    def with_iterations(self, k: int) -> ReconConfig:
        return ReconConfig(self.lam, self.penalty, k, self.warm_start)


class TVSolver:
    """Unrolled ADMM for one (mask, lam, penalty) triple.

    ``lam = 0`` is accepted here (plain least squares through the same
    iteration); :class:`ReconConfig` is the validated public entry point.
    """

    def __init__(self, mask: tf.SamplingMask, lam: float, penalty: float):
        if lam < 0 or penalty <= 0:
            raise ValueError("need lam >= 0 and penalty > 0")
        self.mask = mask
        self.lam = float(lam)
        self.tau = float(penalty)
        self.threshold = self.lam / self.tau
        n = mask.n
        denom = 2.0 * mask.bitmap + self.tau * tf.laplacian_symbol(n)
        # Only the DC term can vanish (mask without DC); its numerator is 0 there too.
        self._inv = np.where(denom > 0, 1.0 / np.where(denom > 0, denom, 1.0), 0.0)

    def solve_quadratic(self, rhs: np.ndarray) -> np.ndarray:
        """Apply ``(2 A*A + tau grad*grad)^-1`` (pseudo-inverse if DC is unmeasured)."""
        return tf.idft2(tf.dft2(rhs) * self._inv)

    def normal_operator(self, z: np.ndarray) -> np.ndarray:
        """Apply ``2 A*A + tau grad*grad`` directly in the image domain."""
        aza = tf.pseudoinverse(tf.forward(z, self.mask), self.mask)
        return 2.0 * aza + self.tau * tf.grad2_adjoint(tf.grad2(z))

    def run(self, y: np.ndarray, iterations: int, warm_start=None, tape: Optional[list] = None) -> np.ndarray:
        """Run exactly ``iterations`` ADMM steps from zero (or ``warm_start``).

        When ``tape`` is a list, the pre-threshold split variable of every
        iteration is appended to it.
        """
        y = np.asarray(y, dtype=complex)
        if y.shape != (self.mask.m,):
            raise ValueError(f"measurement vector of shape {y.shape} does not match m={self.mask.m}")
        n = self.mask.n
        data = 2.0 * tf.pseudoinverse(y, self.mask)
        if warm_start is None:
            z = np.zeros((n, n), dtype=complex)
            w = np.zeros((2, n, n), dtype=complex)
        else:
            z = np.asarray(warm_start, dtype=complex)
            if z.shape != (n, n):
                raise ValueError("warm start has the wrong shape")
            w = tf.grad2(z)
        u = np.zeros_like(w)
        t = self.threshold
        for _ in range(iterations):
            z = self.solve_quadratic(data + self.tau * tf.grad2_adjoint(w - u))
            v = tf.grad2(z) + u
            if tape is not None:
                tape.append(v)
            w = soft_threshold(v, t)
            u = v - w
        return z


def objective(z: np.ndarray, y: np.ndarray, mask: tf.SamplingMask, lam: float) -> float:
    """``||A z - y||^2 + lam * TV(z)``."""
    r = tf.forward(z, mask) - y
    return float(np.vdot(r, r).real + lam * tf.tv_norm(z))


def reconstruct_tv(y: np.ndarray, mask: tf.SamplingMask, cfg: ReconConfig) -> np.ndarray:
    solver = TVSolver(mask, cfg.lam, cfg.penalty)
    return solver.run(y, cfg.iterations, warm_start=cfg.warm_start)


def add_noise(y: np.ndarray, level: float, rng: np.random.Generator) -> np.ndarray:
    """Add complex Gaussian noise with ``||noise|| = level * ||y||``."""
    if level == 0:
        return np.array(y, dtype=complex)
    noise = rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape)
    noise *= level * np.linalg.norm(y) / np.linalg.norm(noise)
    return y + noise


def default_grid(y_scale: float, n_lam: int = 8) -> list[tuple[float, float]]:
    """Log-spaced ``lam`` over ``[1e-4, 1] * y_scale``, penalties ``{0.1, 1, 10} * lam``."""
    grid = []
    for lam in np.logspace(-4, 0, n_lam) * y_scale:
        for f in (0.1, 1.0, 10.0):
            grid.append((float(lam), float(f * lam)))
    return grid


@dataclass
class CalibrationReport:
    grid: list[tuple[float, float]]
    scores: list[float]
    chosen: tuple[float, float]
    noise_level: float
    iterations: int

    def to_dict(self) -> dict:
        return {
            "grid": [list(p) for p in self.grid],
            "scores": list(self.scores),
            "chosen": list(self.chosen),
            "noise_level": self.noise_level,
            "iterations": self.iterations,
        }

    @classmethod
    def from_dict(cls, d: dict) -> CalibrationReport:
        return cls(
            grid=[tuple(p) for p in d["grid"]],
            scores=list(d["scores"]),
            chosen=tuple(d["chosen"]),
            noise_level=d["noise_level"],
            iterations=d["iterations"],
        )


def calibrate(
    samples: Sequence[np.ndarray],
    mask: tf.SamplingMask,
    noise_level: float,
    grid: Sequence[tuple[float, float]],
    iterations: int = 200,
    seed: int = 0,
    threads: int = 1,
) -> CalibrationReport:
    """Pick ``(lam, penalty)`` minimizing the mean relative l2 error over ``samples``.

    Each sample gets its own noise draw (seeded by ``(seed, index)``), shared
    by every grid point. Ties go to the smaller ``lam``, then smaller penalty.
    """
    if len(samples) == 0 or len(grid) == 0:
        raise ValueError("calibration needs at least one sample and one grid point")
    truths = [np.asarray(x, dtype=complex) for x in samples]
    if any(np.linalg.norm(x) == 0 for x in truths):
        raise ValueError("calibration samples must be nonzero")
    noisy = []
    for i, x in enumerate(truths):
        rng = np.random.default_rng([seed, i])
        noisy.append(add_noise(tf.forward(x, mask), noise_level, rng))

    def score(pair):
        solver = TVSolver(mask, *pair)
        errs = []
        for x, y in zip(truths, noisy):
            z = solver.run(y, iterations)
            errs.append(np.linalg.norm(z - x) / np.linalg.norm(x))
        return float(np.mean(errs))

    grid = [tuple(map(float, p)) for p in grid]
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            scores = list(ex.map(score, grid))
    else:
        scores = [score(p) for p in grid]
    best = min(range(len(grid)), key=lambda i: (scores[i], grid[i][0], grid[i][1]))
    return CalibrationReport(list(grid), scores, grid[best], noise_level, iterations)
