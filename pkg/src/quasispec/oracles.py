"""Closed-form reference solutions for the zero-coefficient ("free") operators.

For F = 0 the equation reduces to y^(n) = lambda y with classical
derivatives, so the fundamental system is explicit: exponentials exp(w rho x)
over the n-th roots of unity w (polynomials x^k/k! at lambda = 0).  These
values are used as independent oracles for the numerical propagator and, via
the beam frequency equation, for the clamped-free fourth-order spectrum.

Nothing in this module integrates an ODE.
"""

from __future__ import annotations

import math

import numpy as np

from .exceptions import UnsupportedOrderError, ValidationError

_SMALL_LAMBDA = 1e-8


def _basis_nodes(n: int, lam: complex) -> np.ndarray:
    rho = complex(lam) ** (1.0 / n)
    omega = np.exp(2j * np.pi * np.arange(n) / n)
    return rho * omega


def free_fundamental_values(n: int, lam: complex, xs) -> np.ndarray:
    """Quasi-derivative value matrices of the free fundamental system.

    Returns an array of shape (len(xs), n, n): row j is derivative order j,
    column k is the solution normalized by y^(i)(0) = delta_{i, n-1-k}.
    """
    if n not in (3, 4, 5):
        raise UnsupportedOrderError(f"unsupported order {n}")
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if abs(lam) < _SMALL_LAMBDA:
        out = np.zeros((xs.size, n, n), np.complex128)
        for k in range(n):  # column k: x^(n-1-k)/(n-1-k)!
            d = n - 1 - k
            for j in range(n):
                if j <= d:
                    out[:, j, k] = xs ** (d - j) / float(math.factorial(d - j))
        return out
    z = _basis_nodes(n, lam)
    B = np.vander(z, n, increasing=True).T  # B[i, j] = z_j^i
    E = np.zeros((n, n), np.complex128)
    for k in range(n):
        E[n - 1 - k, k] = 1.0
    a = np.linalg.solve(B, E)  # columns: exponential-basis coefficients of C_k
    ex = np.exp(np.multiply.outer(xs, z))  # (len(xs), n)
    out = np.empty((xs.size, n, n), np.complex128)
    for j in range(n):
        out[:, j, :] = (ex * z**j) @ a
    return out


def free_boundary_matrix(n: int, lam: complex) -> np.ndarray:
    """W[s-1, r-1] = value of quasi-derivative order n-s of C_r at x = 1."""
    Y = free_fundamental_values(n, lam, [1.0])[0]
    return Y[::-1, :]


def free_char_values(n: int, at_zero, at_one, lams) -> np.ndarray:
    """Characteristic function of a free two-point problem on a batch of lambdas.

    ``at_zero``/``at_one`` are the imposed form indices (1-based), as in the
    characteristic module.
    """
    at_zero = tuple(sorted(at_zero))
    at_one = tuple(sorted(at_one))
    if len(at_zero) + len(at_one) != n:
        raise ValidationError("index sets must impose exactly n conditions")
    cols = [r - 1 for r in range(1, n + 1) if r not in at_zero]
    rows = [s - 1 for s in at_one]
    lams = np.atleast_1d(np.asarray(lams, dtype=np.complex128))
    out = np.empty(lams.size, np.complex128)
    for i, lam in enumerate(lams):
        W = free_boundary_matrix(n, lam)
        out[i] = np.linalg.det(W[np.ix_(rows, cols)]) if rows else 1.0
    return out


def beam_wavenumbers(count: int) -> np.ndarray:
    """First positive roots of 1 + cos(k) cosh(k) = 0, by bisection."""
    if count < 1:
        raise ValidationError("count must be >= 1")

    def g(k):
        return 1.0 + np.cos(k) * np.cosh(k)

    roots = []
    # scan on a grid fine enough to separate consecutive roots (spacing ~ pi)
    grid = np.linspace(1e-3, (count + 2) * np.pi, 40 * (count + 2))
    vals = g(grid)
    for i in range(grid.size - 1):
        if vals[i] == 0.0:
            roots.append(grid[i])
            continue
        if vals[i] * vals[i + 1] < 0:
            a, b = grid[i], grid[i + 1]
            fa = g(a)
            for _ in range(200):
                m = 0.5 * (a + b)
                fm = g(m)
                if fm == 0.0 or (b - a) < 1e-15 * max(1.0, m):
                    break
                if fa * fm < 0:
                    b = m
                else:
                    a, fa = m, fm
            roots.append(0.5 * (a + b))
        if len(roots) >= count:
            break
    if len(roots) < count:
        raise ValidationError(f"found only {len(roots)} beam wavenumbers")
    return np.array(roots[:count])


def beam_eigenvalues(count: int) -> np.ndarray:
    """Clamped-free beam spectrum: lambda_i = k_i^4."""
    return beam_wavenumbers(count) ** 4
