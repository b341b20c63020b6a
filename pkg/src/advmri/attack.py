"""Localized adversarial perturbations against unrolled TV-ADMM.

For a disk weight ``phi`` centered at ``mu`` we maximize

    ||phi * (rec(y + e) - rec(y))||_2   subject to  ||e||_2 <= eta

by normalized projected gradient ascent. ``rec`` is the ADMM iteration of
:mod:`advmri.tvrecon` unrolled for a fixed number of steps; its gradient is
obtained by running the iteration backwards (reverse mode).

Complex gradients follow the real-inner-product convention: for a real
function ``f`` of complex ``e`` the gradient is ``df/dRe(e) + 1j * df/dIm(e)``,
so ``f(e + h d) ~ f(e) + h * Re(vdot(grad, d))``.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import transforms as tf
from .tvrecon import ReconConfig, TVSolver

log = logging.getLogger(__name__)


def disk_weight(mu: tuple[float, float], sigma: float, n: int) -> np.ndarray:
    """0/1 indicator of ``(i - mu1)^2 + (j - mu2)^2 <= sigma^2`` on 1-based pixel indices."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    i = np.arange(1, n + 1, dtype=float)[:, None]
    j = np.arange(1, n + 1, dtype=float)[None, :]
    return (((i - mu[0]) ** 2 + (j - mu[1]) ** 2) <= sigma**2).astype(float)


def grid_centers(n: int, grid_dims: tuple[int, int]) -> list[tuple[float, float]]:
    """Cell midpoints of a regular ``g1 x g2`` grid over ``[1, n]^2``, row-major."""
    g1, g2 = grid_dims
    if g1 < 1 or g2 < 1:
        raise ValueError("grid dimensions must be >= 1")
    c1 = [1 + (n - 1) * (2 * k - 1) / (2 * g1) for k in range(1, g1 + 1)]
    c2 = [1 + (n - 1) * (2 * k - 1) / (2 * g2) for k in range(1, g2 + 1)]
    return [(a, b) for a in c1 for b in c2]


def amplification(r: np.ndarray, rho: np.ndarray) -> float:
    """``max|rho| / max|r|``."""
    denom = np.abs(r).max()
    if denom == 0:
        raise ValueError("image perturbation is identically zero")
    return float(np.abs(rho).max() / denom)


def _threshold_jvp(v: np.ndarray, t: float, x: np.ndarray) -> np.ndarray:
    """Jacobian of complex soft-thresholding at ``v`` applied to ``x``.

    The Jacobian is symmetric under the real inner product, so this is also
    the vector-Jacobian product. Zero on the dead zone and at the kink.
    """
    mag = np.abs(v)
    active = mag > t
    safe = np.where(active, mag, 1.0)
    out = (1.0 - t / safe) * x + (t / safe**3) * v * (np.conj(v) * x).real
    return np.where(active, out, 0.0)


class LocalizedObjective:
    """``e -> ||weight * (rec_K(y + e) - rec_K(y))||_2`` with reverse-mode gradient."""

    def __init__(self, y: np.ndarray, mask: tf.SamplingMask, weight: np.ndarray, recon: ReconConfig,
                 unroll: int, reference: Optional[np.ndarray] = None):
        self.y = np.asarray(y, dtype=complex)
        if self.y.shape != (mask.m,):
            raise ValueError("measurement vector does not match the mask")
        weight = np.asarray(weight, dtype=float)
        if weight.shape != (mask.n, mask.n):
            raise ValueError("weight does not match the image size")
        self.mask = mask
        self.weight = weight
        self.unroll = unroll
        self.solver = TVSolver(mask, recon.lam, recon.penalty)
        self.reference = self.solver.run(self.y, unroll) if reference is None else reference

    def value(self, e: np.ndarray) -> float:
        z = self.solver.run(self.y + e, self.unroll)
        return float(np.linalg.norm(self.weight * (z - self.reference)))

    def value_and_grad(self, e: np.ndarray) -> tuple[float, np.ndarray, float]:
        """Objective, gradient w.r.t. ``e``, and the smallest distance ``||v| - t|`` to a kink."""
        tape: list[np.ndarray] = []
        z = self.solver.run(self.y + e, self.unroll, tape=tape)
        diff = self.weight * (z - self.reference)
        f = float(np.linalg.norm(diff))
        t = self.solver.threshold
        margin = min(float(np.abs(np.abs(v) - t).min()) for v in tape)
        if f == 0.0:
            return f, np.zeros_like(self.y), margin
        return f, self._backward(tape, self.weight * diff / f), margin

    def _backward(self, tape: list[np.ndarray], zbar: np.ndarray) -> np.ndarray:
        s = self.solver
        mask = self.mask
        t = s.threshold
        ybar = np.zeros(mask.m, dtype=complex)
        wbar = np.zeros_like(tape[0])
        ubar = np.zeros_like(tape[0])
        for k in range(len(tape) - 1, -1, -1):
            v = tape[k]
            # u_k = v_k - w_k ;  w_k = soft(v_k)
            vbar = ubar + _threshold_jvp(v, t, wbar - ubar)
            # v_k = grad z_k + u_{k-1}
            zb = tf.grad2_adjoint(vbar)
            if k == len(tape) - 1:
                zb = zb + zbar
            # z_k = Q(2 A* y + tau grad*(w_{k-1} - u_{k-1}))
            q = s.solve_quadratic(zb)
            ybar += 2.0 * tf.forward(q, mask)
            gq = s.tau * tf.grad2(q)
            wbar = gq
            ubar = vbar - gq
        return ybar


@dataclass(frozen=True)
class AttackConfig:
    eta: float
    recon: ReconConfig
    steps: int = 30
    step_size: float = 0.2
    grid_dims: tuple[int, int] = (8, 8)
    sigma: float = 5.0
    unroll_K: int = 50
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if min(self.grid_dims) < 1:
            raise ValueError("grid dimensions must be >= 1")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.unroll_K < 1:
            raise ValueError("unroll_K must be >= 1")

    @classmethod
    def relative(cls, noise_rel: float, y: np.ndarray, recon: ReconConfig, **kw) -> AttackConfig:
        return cls(eta=noise_rel * float(np.linalg.norm(y)), recon=recon, **kw)


@dataclass
class AttackResult:
    e: np.ndarray
    r: np.ndarray
    rho: np.ndarray
    mu: tuple[float, float]
    alpha: float
    norms: dict
    recon_clean: np.ndarray = field(repr=False)
    recon_adv: np.ndarray = field(repr=False)
    per_center_scores: list = field(default_factory=list)
    history: list = field(default_factory=list, repr=False)
    stalled: bool = False


def _center_rng(seed: int, mu) -> np.random.Generator:
    # centers may be negative (disk partly off the image); seed words must not be
    words = [int(round(c * 1000)) % 2**64 for c in mu]
    return np.random.default_rng([seed, *words])


def attack_at(mu, y, mask: tf.SamplingMask, cfg: AttackConfig, clean_full: Optional[np.ndarray] = None,
              clean_unrolled: Optional[np.ndarray] = None) -> AttackResult:
    """Projected gradient ascent for one disk center."""
    y = np.asarray(y, dtype=complex)
    weight = disk_weight(mu, cfg.sigma, mask.n)
    obj = LocalizedObjective(y, mask, weight, cfg.recon, cfg.unroll_K, reference=clean_unrolled)
    eta = cfg.eta

    rng = _center_rng(cfg.seed, mu)
    e = rng.standard_normal(mask.m) + 1j * rng.standard_normal(mask.m)
    e *= (eta / 10) / np.linalg.norm(e)

    best_f, best_e = -np.inf, e
    history = []
    stalled = False
    for _ in range(cfg.steps):
        f, g, _ = obj.value_and_grad(e)
        if f > best_f:
            best_f, best_e = f, e
        history.append(best_f)
        gnorm = np.linalg.norm(g)
        if gnorm == 0:
            # every later iterate would be identical
            stalled = True
            log.warning("zero gradient at center %s; returning best iterate", mu)
            break
        e = e + cfg.step_size * eta * g / gnorm
        nrm = np.linalg.norm(e)
        if nrm > eta:
            e *= eta / nrm
    else:
        f = obj.value(e)
        if f > best_f:
            best_f, best_e = f, e
        history.append(best_f)

    e = best_e * (eta / np.linalg.norm(best_e))
    solver = TVSolver(mask, cfg.recon.lam, cfg.recon.penalty)
    if clean_full is None:
        clean_full = solver.run(y, cfg.recon.iterations)
    adv = solver.run(y + e, cfg.recon.iterations)
    rho = adv - clean_full
    r = tf.pseudoinverse(e, mask)
    r_inf = float(np.abs(r).max())
    norms = {
        "e_l2": float(np.linalg.norm(e)),
        "r_l2": float(np.linalg.norm(r)),
        "r_inf": r_inf,
        "rho_l2": float(np.linalg.norm(rho)),
        "rho_inf": float(np.abs(rho).max()),
    }
    result = AttackResult(
        e=e, r=r, rho=rho, mu=tuple(mu), alpha=amplification(r, rho), norms=norms,
        recon_clean=clean_full, recon_adv=adv, history=history, stalled=stalled,
    )
    result.per_center_scores = [(result.mu, norms["rho_inf"])]
    return result


def attack_grid(y, mask: tf.SamplingMask, cfg: AttackConfig) -> AttackResult:
    """Run :func:`attack_at` on every grid center and keep the largest ``max|rho|``.

    Ties go to the earliest center in row-major order.
    """
    y = np.asarray(y, dtype=complex)
    solver = TVSolver(mask, cfg.recon.lam, cfg.recon.penalty)
    clean_full = solver.run(y, cfg.recon.iterations)
    clean_unrolled = solver.run(y, cfg.unroll_K)
    centers = grid_centers(mask.n, cfg.grid_dims)

    def one(mu):
        return attack_at(mu, y, mask, cfg, clean_full=clean_full, clean_unrolled=clean_unrolled)

    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as ex:
            results = list(ex.map(one, centers))
    else:
        results = [one(mu) for mu in centers]

    scores = [(res.mu, res.norms["rho_inf"]) for res in results]
    best = max(range(len(results)), key=lambda i: (scores[i][1], -i))
    chosen = results[best]
    chosen.per_center_scores = scores
    chosen.stalled = any(res.stalled for res in results)
    return chosen
