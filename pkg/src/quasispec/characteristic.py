"""Characteristic determinants, the Weyl matrix and Weyl solutions.

Conventions (fixed throughout the package):

* Boundary forms are U_s(y) = y^[n-s](0) and V_s(y) = y^[n-s](1), s = 1..n.
* The fundamental solutions C_k are normalized by U_s(C_k) = delta_{s,k}.
* ``delta(j, k)`` is the determinant over rows s = k+1..n of the columns
  (C_{k+1}, ..., C_n) with C_j replaced *in place* by C_k; no re-sorting.
* ``char_function`` always sorts its columns increasingly; for j > k the two
  agree up to the sign (-1)^(j-k-1), exposed as ``replacement_sign``.

Zeros of ``char_function(W(.), spec)`` coincide with the eigenvalues of the
two-point problem that imposes U_s = 0 for s in ``at_zero`` and V_s = 0 for
s in ``at_one``: writing a candidate eigenfunction as y = sum_r c_r C_r gives
U_s(y) = c_s, so the conditions at zero delete columns and the conditions at
one form the minor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import NearPoleError, ValidationError
from .model import AssociatedMatrix
from .propagator import DEFAULT_TOL, boundary_matrix, get_engine

#: Near-pole floor for Weyl-matrix evaluation (documented):
#: |Delta_{k,k}(lambda)| < NEAR_POLE_FLOOR * (1 + |lambda|) raises NearPoleError.
NEAR_POLE_FLOOR = 1e-12

SPECTRUM_NAMES = {
    3: ("S1", "S2"),
    4: ("S12", "S13", "S23"),
    5: ("S123", "S124", "S125"),
}


@dataclass(frozen=True)
class BoundarySpec:
    """Index sets of the forms imposed at x = 0 and x = 1."""

    order: int
    at_zero: tuple[int, ...]
    at_one: tuple[int, ...]

    def __post_init__(self):
        n = self.order
        A = tuple(sorted(int(s) for s in self.at_zero))
        B = tuple(sorted(int(s) for s in self.at_one))
        if len(set(A)) != len(A) or len(set(B)) != len(B):
            raise ValidationError("index sets must not repeat entries")
        if any(s < 1 or s > n for s in A + B):
            raise ValidationError(f"form indices must lie in 1..{n}")
        if len(A) + len(B) != n:
            raise ValidationError(f"|at_zero| + |at_one| must equal {n}")
        object.__setattr__(self, "at_zero", A)
        object.__setattr__(self, "at_one", B)

    @property
    def columns(self) -> tuple[int, ...]:
        """Surviving fundamental-solution indices (1-based, increasing)."""
        return tuple(r for r in range(1, self.order + 1) if r not in self.at_zero)

    @classmethod
    def from_spectrum_name(cls, order: int, name: str) -> "BoundarySpec":
        if name not in SPECTRUM_NAMES.get(order, ()):
            raise ValidationError(
                f"unknown spectrum {name!r} for order {order}; "
                f"expected one of {SPECTRUM_NAMES.get(order, ())}"
            )
        zero = tuple(int(c) for c in name[1:])
        # all designated problems fix the two lowest quasi-derivative orders
        # at x = 1: V_{n-1}(y) = y'(1) = 0 and V_n(y) = y(1) = 0
        return cls(order, zero, (order - 1, order))

    @classmethod
    def delta_diag(cls, order: int, k: int) -> "BoundarySpec":
        """The problem whose characteristic function is Delta_{k,k}."""
        return cls(order, tuple(range(1, k + 1)), tuple(range(k + 1, order + 1)))


def char_function(W: np.ndarray, spec: BoundarySpec) -> complex:
    """Minor of the boundary matrix: rows ``at_one``, columns the complement of ``at_zero``."""
    n = spec.order
    if W.shape != (n, n):
        raise ValidationError(f"boundary matrix shape {W.shape} does not match order {n}")
    rows = [s - 1 for s in spec.at_one]
    cols = [r - 1 for r in spec.columns]
    if not rows:
        return 1.0 + 0.0j
    return complex(np.linalg.det(W[np.ix_(rows, cols)]))


def char_scale(W: np.ndarray, spec: BoundarySpec) -> float:
    """Hadamard-type magnitude scale of the char_function minor (for floors)."""
    rows = [s - 1 for s in spec.at_one]
    cols = [r - 1 for r in spec.columns]
    if not rows:
        return 1.0
    sub = W[np.ix_(rows, cols)]
    norms = np.sqrt((np.abs(sub) ** 2).sum(axis=0))
    return float(max(np.prod(norms), 1e-300))


def replacement_sign(j: int, k: int) -> float:
    """Sign relating delta(j, k) to the column-sorted char_function minor."""
    return -1.0 if (j - k - 1) % 2 else 1.0


def delta_from_boundary(W: np.ndarray, j: int, k: int) -> complex:
    """Delta_{j,k} from a precomputed boundary matrix (in-place column order)."""
    n = W.shape[0]
    if not (1 <= k <= j <= n):
        raise ValidationError("need 1 <= k <= j <= n")
    cols = list(range(k + 1, n + 1))
    if j > k:
        cols[cols.index(j)] = k
    rows = [s - 1 for s in range(k + 1, n + 1)]
    if not rows:
        return 1.0 + 0.0j
    return complex(np.linalg.det(W[np.ix_(rows, [c - 1 for c in cols])]))


def delta(F: AssociatedMatrix, lam: complex, j: int, k: int, tol: float = DEFAULT_TOL) -> complex:
    return delta_from_boundary(boundary_matrix(F, lam, tol), j, k)


@dataclass(frozen=True)
class WeylSample:
    """Weyl matrix at one spectral parameter; unit lower-triangular by construction."""

    lam: complex
    matrix: np.ndarray


def weyl_from_boundary(W: np.ndarray, lam: complex) -> WeylSample:
    n = W.shape[0]
    M = np.eye(n, dtype=np.complex128)
    diag = [delta_from_boundary(W, k, k) for k in range(1, n + 1)]
    floor = NEAR_POLE_FLOOR * (1.0 + abs(lam))
    for k in range(1, n):
        if abs(diag[k - 1]) < floor:
            raise NearPoleError(
                f"|Delta_{k}{k}({lam:.6g})| = {abs(diag[k-1]):.3e} below the near-pole floor; "
                f"poles of column {k} are the zeros of Delta_{k}{k}",
                k=k,
                lam=lam,
            )
        for j in range(k + 1, n + 1):
            M[j - 1, k - 1] = -delta_from_boundary(W, j, k) / diag[k - 1]
    return WeylSample(lam=complex(lam), matrix=M)


def weyl_matrix(F: AssociatedMatrix, lam: complex, tol: float = DEFAULT_TOL) -> WeylSample:
    """M(lambda) with M[j,k] = -Delta_{j,k}/Delta_{k,k} below the diagonal."""
    return weyl_from_boundary(boundary_matrix(F, lam, tol), lam)


def phi_solution(
    F: AssociatedMatrix, lam: complex, k: int, x_points, tol: float = DEFAULT_TOL
) -> np.ndarray:
    """Quasi-derivative values of the k-th Weyl solution at ``x_points``.

    Built from the determinant representation: the first row of the
    (n-k+1) x (n-k+1) matrix holds C_nu^[j](x) for nu = k..n, the remaining
    rows the boundary values V_{k+1..n}(C_nu); dividing by Delta_{k,k} gives
    Phi_k^[j](x).  Returns shape (n, len(x_points)), rows = orders 0..n-1.
    """
    n = F.order
    if not (1 <= k <= n):
        raise ValidationError(f"k must lie in 1..{n}")
    xp = tuple(float(x) for x in x_points)
    need = xp if xp and xp[-1] == 1.0 else xp + (1.0,)
    vals = get_engine(F, need, tol).propagate([lam])[0]  # (K, n, n)
    W = vals[-1, ::-1, :]
    dkk = delta_from_boundary(W, k, k)
    floor = NEAR_POLE_FLOOR * (1.0 + abs(lam))
    if abs(dkk) < floor:
        raise NearPoleError(
            f"|Delta_{k}{k}({lam:.6g})| below the near-pole floor", k=k, lam=lam
        )
    m = n - k + 1
    out = np.empty((n, len(xp)), np.complex128)
    D = np.empty((m, m), np.complex128)
    for r, nu in enumerate(range(k, n + 1)):
        D[1:, r] = [W[s - 1, nu - 1] for s in range(k + 1, n + 1)]
    for ix in range(len(xp)):
        for j in range(n):
            D[0, :] = vals[ix, j, k - 1 : n]
            out[j, ix] = np.linalg.det(D) / dkk
    return out


def weyl_solution_matrix(
    F: AssociatedMatrix, lam: complex, x_points, tol: float = DEFAULT_TOL
) -> np.ndarray:
    """All Weyl solutions at once: entry [i, j, k] is Phi_{k+1}^[j](x_i).

    Equivalent to stacking ``phi_solution`` over k but with a single
    propagation; used by identity checks that need the full matrix.
    """
    n = F.order
    xp = tuple(float(x) for x in x_points)
    need = xp if xp and xp[-1] == 1.0 else xp + (1.0,)
    vals = get_engine(F, need, tol).propagate([lam])[0]
    W = vals[-1, ::-1, :]
    M = weyl_from_boundary(W, lam).matrix
    out = np.empty((len(xp), n, n), np.complex128)
    for i in range(len(xp)):
        out[i] = vals[i] @ M
    return out


@dataclass(frozen=True)
class SignMatrices:
    """Signed anti-diagonal matrices of the star-problem bookkeeping."""

    J0: np.ndarray
    J1: np.ndarray
    J: np.ndarray


def build_sign_matrices(n: int) -> SignMatrices:
    """J_a[k, n-k+1] = (-1)^(n-k), J[k, n-k+1] = (-1)^(k+1) (1-based)."""
    if n not in (3, 4, 5):
        raise ValidationError(f"unsupported order {n}")
    J0 = np.zeros((n, n))
    J = np.zeros((n, n))
    for k in range(1, n + 1):
        J0[k - 1, n - k] = (-1.0) ** (n - k)
        J[k - 1, n - k] = (-1.0) ** (k + 1)
    return SignMatrices(J0=J0, J1=J0.copy(), J=J)
