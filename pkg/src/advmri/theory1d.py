"""One-dimensional compressed-sensing constructions.

Spike perturbations of partial Fourier data, equality-constrained l1 and TV
minimization, Monte Carlo recovery experiments and the sparse-artifact
amplification bound.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import transforms as tf
from .phantoms import SparseSpec1D, gen_signal_1d
from .tvrecon import soft_threshold

log = logging.getLogger(__name__)


class InvariantError(AssertionError):
    """A constructed object violates an identity it must satisfy exactly."""


# ---------------------------------------------------------------------------
# Spike perturbation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpikeAttack1D:
    mask: tf.Mask1D
    e: np.ndarray
    r: np.ndarray
    alpha: float

    @property
    def n(self) -> int:
        return self.mask.n


def spike_attack(mask: tf.Mask1D, tol: float = 1e-12) -> SpikeAttack1D:
    """Measurements of the unit spike at 0 and their zero-filled image.

    Raises :class:`InvariantError` if ``||r||_2 = sqrt(m/n)``,
    ``||r||_inf <= m/n`` or ``alpha >= n/m`` fails beyond ``tol``.
    """
    n, m = mask.n, mask.m
    delta = np.zeros(n, dtype=complex)
    delta[0] = 1.0
    e = tf.forward1(delta, mask)
    r = tf.pseudoinverse1(e, mask)
    r_inf = float(np.abs(r).max())
    alpha = 1.0 / r_inf

    if np.abs(e - 1 / np.sqrt(n)).max() > tol:
        raise InvariantError("spike measurements are not constant 1/sqrt(n)")
    if abs(np.linalg.norm(r) - np.sqrt(m / n)) > tol:
        raise InvariantError("||r||_2 != sqrt(m/n)")
    if r_inf > m / n + tol:
        raise InvariantError("||r||_inf > m/n")
    if alpha < (n / m) * (1 - tol):
        raise InvariantError("alpha < n/m")
    return SpikeAttack1D(mask, e, r, alpha)


# ---------------------------------------------------------------------------
# Equality-constrained solvers
# ---------------------------------------------------------------------------


@dataclass
class SolveInfo:
    iterations: int
    converged: bool
    primal_residual: float
    dual_residual: float


def l1_min_eq(y, mask: tf.Mask1D, tol: float = 1e-8, max_iter: int = 50_000, threshold_scale: float = 0.05,
              return_info: bool = False):
    """Basis pursuit ``min ||z||_1 s.t. A z = y`` over complex signals.

    ADMM on ``z = w``: the z-step projects onto the affine constraint set
    (exact, since ``A A* = I``), the w-step soft-thresholds. The threshold is
    tied to ``max|A^+ y|`` so the iteration commutes with complex rescaling of
    ``y``. Stops when both residuals fall below ``tol * max(1, ||A^+ y||)``.
    """
    y = np.asarray(y, dtype=complex)
    z0 = tf.pseudoinverse1(y, mask)
    scale = float(np.abs(z0).max())
    if scale == 0.0:
        info = SolveInfo(0, True, 0.0, 0.0)
        return (z0, info) if return_info else z0
    t = threshold_scale * scale
    stop = tol * max(1.0, float(np.linalg.norm(z0)))

    def project(v):
        return v - tf.pseudoinverse1(tf.forward1(v, mask) - y, mask)

    w = z0.copy()
    u = np.zeros_like(w)
    z = z0
    info = SolveInfo(max_iter, False, np.inf, np.inf)
    for it in range(1, max_iter + 1):
        z = project(w - u)
        w_prev = w
        w = soft_threshold(z + u, t)
        u = u + z - w
        rp = float(np.linalg.norm(z - w))
        rd = float(np.linalg.norm(w - w_prev))
        if rp < stop and rd < stop:
            info = SolveInfo(it, True, rp, rd)
            break
    else:
        info = SolveInfo(max_iter, False, rp, rd)
        log.warning("l1_min_eq hit the iteration cap (%d)", max_iter)
    return (z, info) if return_info else z


def integrate_gradient(w: np.ndarray, total: complex) -> np.ndarray:
    """Invert periodic backward differences given the signal sum ``1 . z``.

    ``w[0]`` is ignored; it is determined by the others when ``sum(w) = 0``.
    """
    w = np.asarray(w, dtype=complex)
    n = w.size
    partial = np.concatenate([[0.0], np.cumsum(w[1:])])
    z0 = (total - partial.sum()) / n
    return z0 + partial


def tv_min_eq(y, mask: tf.Mask1D, return_info: bool = False, **kw):
    """``min ||grad z||_1 s.t. A z = y`` via the reduction to basis pursuit.

    Gradient measurements are ``(1 - exp(-2 pi i k/n)) y_k``; the l1 solution
    is integrated and the constant is fixed by the k = 0 measurement.
    """
    if 0 not in mask:
        raise ValueError("TV reduction needs the zero frequency in the mask")
    y = np.asarray(y, dtype=complex)
    n = mask.n
    gy = tf.grad1_symbol(n)[mask.positions] * y
    w, info = l1_min_eq(gy, mask, return_info=True, **kw)
    k0 = int(np.flatnonzero(mask.indices == 0)[0])
    z = integrate_gradient(w, np.sqrt(n) * y[k0])
    return (z, info) if return_info else z


def tv_min_eq_direct(y, mask: tf.Mask1D, tol: float = 1e-10, max_iter: int = 100_000,
                     threshold_scale: float = 0.05, return_info: bool = False):
    """Direct ADMM for ``min ||grad z||_1 s.t. A z = y`` (cross-check for :func:`tv_min_eq`).

    Splits ``w = grad z``. The z-step minimizes ``||grad z - b||^2`` over the
    affine set: measured coefficients are fixed by ``y``, the others solve a
    diagonal least-squares problem in the Fourier domain.
    """
    if 0 not in mask:
        raise ValueError("direct TV solver needs the zero frequency in the mask")
    y = np.asarray(y, dtype=complex)
    n = mask.n
    d = tf.grad1_symbol(n)
    measured = np.zeros(n, dtype=bool)
    measured[mask.positions] = True
    fixed = np.zeros(n, dtype=complex)
    fixed[mask.positions] = y

    def zstep(b):
        bh = tf.dft1(b)
        coef = np.where(measured, fixed, np.conj(d) * bh / np.where(measured, 1.0, np.abs(d) ** 2))
        return tf.idft1(coef)

    z = tf.pseudoinverse1(y, mask)
    g0 = tf.grad1(z)
    scale = float(np.abs(g0).max())
    if scale == 0.0:
        info = SolveInfo(0, True, 0.0, 0.0)
        return (z, info) if return_info else z
    t = threshold_scale * scale
    stop = tol * max(1.0, float(np.linalg.norm(g0)))
    w = g0
    u = np.zeros_like(w)
    for it in range(1, max_iter + 1):
        z = zstep(w - u)
        gz = tf.grad1(z)
        w_prev = w
        w = soft_threshold(gz + u, t)
        u = u + gz - w
        rp = float(np.linalg.norm(gz - w))
        rd = float(np.linalg.norm(w - w_prev))
        if rp < stop and rd < stop:
            info = SolveInfo(it, True, rp, rd)
            break
    else:
        info = SolveInfo(max_iter, False, rp, rd)
    return (z, info) if return_info else z


# ---------------------------------------------------------------------------
# Monte Carlo recovery
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RecoveryTrial:
    n: int
    s: int
    m: int
    trials: int
    mode: str = "l1"  # "l1" | "tv"
    failure_tolerance: float = 1e-3
    min_magnitude: float = 0.5
    complex_values: bool = False
    max_iter: int = 50_000
    freqs: Optional[tuple] = None  # fixed mask for every trial instead of a random draw
    seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.mode not in ("l1", "tv"):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass
class RecoveryReport:
    trial: RecoveryTrial
    rate: float
    spiked_rate: float
    errors: list = field(default_factory=list)
    spiked_errors: list = field(default_factory=list)
    alphas: list = field(default_factory=list)


def run_trial(trial: RecoveryTrial, index: int) -> tuple[float, float, float]:
    """One draw: (error on x, error on x + spike, spike amplification)."""
    ss = np.random.SeedSequence([trial.seed, index])
    sig_seed, mask_seed = ss.generate_state(2)
    n = trial.n
    spec = SparseSpec1D(
        n=n, s=trial.s, mode="spike" if trial.mode == "l1" else "piecewise",
        min_magnitude=trial.min_magnitude, complex_values=trial.complex_values, seed=int(sig_seed),
    )
    x = gen_signal_1d(spec)
    rng = np.random.default_rng(mask_seed)
    if trial.freqs is not None:
        freqs = tuple(trial.freqs)
        if trial.mode == "tv" and 0 not in freqs:
            freqs = (0,) + freqs
        mask = tf.Mask1D(n, freqs)
        solve = l1_min_eq if trial.mode == "l1" else tv_min_eq
    elif trial.mode == "l1":
        mask = tf.Mask1D.full(n) if trial.m >= n else tf.Mask1D.random(n, trial.m, rng)
        solve = l1_min_eq
    else:
        mask = tf.Mask1D.full(n) if trial.m >= n - 1 else tf.Mask1D.random(n, trial.m, rng, include_zero=True)
        solve = tv_min_eq
    spiked = x.copy()
    spiked[0] += 1.0
    err = float(np.abs(solve(tf.forward1(x, mask), mask, max_iter=trial.max_iter) - x).max())
    err_spiked = float(np.abs(solve(tf.forward1(spiked, mask), mask, max_iter=trial.max_iter) - spiked).max())
    return err, err_spiked, spike_attack(mask).alpha


def recovery_experiment(trial: RecoveryTrial) -> RecoveryReport:
    """Empirical exact-recovery rate of ``x`` and of ``x + spike``."""
    rows = [run_trial(trial, i) for i in range(trial.trials)]
    errs = [r[0] for r in rows]
    serrs = [r[1] for r in rows]
    tol = trial.failure_tolerance
    return RecoveryReport(
        trial=trial,
        rate=float(np.mean([e < tol for e in errs])),
        spiked_rate=float(np.mean([e < tol for e in serrs])),
        errors=errs,
        spiked_errors=serrs,
        alphas=[r[2] for r in rows],
    )


# ---------------------------------------------------------------------------
# General sparse artifacts
# ---------------------------------------------------------------------------


def artifact_bound(rho, mask: tf.Mask1D, tol: float = 1e-12) -> tuple[float, float]:
    """Lower bound ``(||rho||_inf / ||rho||_1) (n/m)`` and the achieved ``||rho||_inf / ||A^+ A rho||_inf``."""
    rho = np.asarray(rho, dtype=complex)
    if not np.any(rho):
        raise ValueError("artifact is identically zero")
    r = tf.pseudoinverse1(tf.forward1(rho, mask), mask)
    rho_inf = float(np.abs(rho).max())
    bound = rho_inf / float(np.abs(rho).sum()) * mask.n / mask.m
    r_inf = float(np.abs(r).max())
    achieved = np.inf if r_inf == 0 else rho_inf / r_inf
    if achieved < bound * (1 - tol):
        raise InvariantError(f"amplification {achieved} below bound {bound}")
    return bound, achieved
