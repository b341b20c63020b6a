"""Shared brute-force oracles and the acceptance summary hook."""

import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []


def direct_dft2(x):
    """O(n^4) unitary 2D DFT by explicit double sum."""
    n = x.shape[0]
    out = np.zeros((n, n), dtype=complex)
    j = np.arange(n)
    for k1 in range(n):
        for k2 in range(n):
            phase = np.exp(-2j * np.pi * (k1 * j[:, None] + k2 * j[None, :]) / n)
            out[k1, k2] = (x * phase).sum() / n
    return out


def direct_idft2(s):
    n = s.shape[0]
    out = np.zeros((n, n), dtype=complex)
    k = np.arange(n)
    for j1 in range(n):
        for j2 in range(n):
            phase = np.exp(2j * np.pi * (k[:, None] * j1 + k[None, :] * j2) / n)
            out[j1, j2] = (s * phase).sum() / n
    return out


def direct_dft1(z):
    """Centered 1D DFT: coefficient for k = -n/2+1..n/2, by explicit sum."""
    n = z.size
    ks = range(-n // 2 + 1, n // 2 + 1)
    j = np.arange(n)
    return np.array([(z * np.exp(-2j * np.pi * k * j / n)).sum() / np.sqrt(n) for k in ks])


class DenseTV:
    """Matrix form of the unrolled ADMM: no FFTs, explicit inverse of the normal matrix."""

    def __init__(self, mask, lam, tau):
        n = mask.n
        self.n = n
        f1 = np.exp(-2j * np.pi * np.outer(np.arange(n), np.arange(n)) / n) / np.sqrt(n)
        F = np.kron(f1, f1)
        self.A = F[mask.order]
        shift = np.roll(np.eye(n), 1, axis=1)  # (S x)[j] = x[j+1]
        d1 = shift - np.eye(n)
        eye = np.eye(n)
        self.Dx = np.kron(eye, d1)  # along columns (axis 1)
        self.Dy = np.kron(d1, eye)  # along rows (axis 0)
        self.D = np.vstack([self.Dx, self.Dy])
        N = 2 * self.A.conj().T @ self.A + tau * self.D.T @ self.D
        self.Q = np.linalg.pinv(N)
        self.lam, self.tau = lam, tau

    def soft(self, v, t):
        mag = np.abs(v)
        out = np.zeros_like(v)
        big = mag > t
        out[big] = v[big] * (mag[big] - t) / mag[big]
        return out

    def run(self, y, K):
        nn = self.n * self.n
        w = np.zeros(2 * nn, dtype=complex)
        u = np.zeros(2 * nn, dtype=complex)
        z = np.zeros(nn, dtype=complex)
        data = 2 * self.A.conj().T @ y
        t = self.lam / self.tau
        for _ in range(K):
            z = self.Q @ (data + self.tau * self.D.T @ (w - u))
            v = self.D @ z + u
            w = self.soft(v, t)
            u = v - w
        return z.reshape(self.n, self.n)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def active_pattern(solver, y, K):
    """Soft-threshold active sets along the unrolled iteration, and the distance to the nearest kink."""
    tape = []
    solver.run(y, K, tape=tape)
    t = solver.threshold
    pattern = np.stack([np.abs(v) > t for v in tape])
    margin = min(float(np.abs(np.abs(v) - t).min()) for v in tape)
    return pattern, margin


def directional_check(obj, e, d, h, kink_tol=1e-6):
    """Reverse-mode vs central-difference directional derivative.

    Returns ``(ad, fd, excluded)``; a sample is excluded when the stencil
    crosses a soft-threshold kink (active set changes) or passes within
    ``kink_tol`` of one.
    """
    _, g, _ = obj.value_and_grad(e)
    ad = float(np.vdot(g, d).real)
    fd = (obj.value(e + h * d) - obj.value(e - h * d)) / (2 * h)
    pats = [active_pattern(obj.solver, obj.y + p, obj.unroll) for p in (e, e + h * d, e - h * d)]
    excluded = any(m < kink_tol for _, m in pats) or any(
        not np.array_equal(pats[0][0], p) for p, _ in pats[1:])
    return ad, fd, excluded
