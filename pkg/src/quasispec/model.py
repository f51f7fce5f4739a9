"""Coefficient sets and associated first-order system matrices.

Three operator families are supported, one per differential order:

* order 3 -- one coefficient function ``p``,
* order 4 -- antiderivative pair ``tau1``, ``tau2`` (tau1' and tau2'' are the
  operator's coefficients),
* order 5 -- antiderivative pair ``sigma0``, ``sigma1``.

Each family has an n x n matrix function F(x) with ones on the superdiagonal,
zeros above it and zero trace, such that the quasi-derivative chain

    y[0] = y,   y[k] = (y[k-1])' - sum_{j<=k} F[k,j] y[j-1]

reproduces the order-n differential expression as y[n].  Coefficient
functions are stored either as truncated Chebyshev series on [0, 1]
(canonical, spectrally accurate for smooth data) or as uniform-grid samples
with piecewise-linear interpolation; grid input can be converted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from numpy.polynomial import Chebyshev, Polynomial

from .exceptions import UnsupportedOrderError, ValidationError
from .util import pairs, unpairs

FUNCTION_NAMES = {3: ("p",), 4: ("tau1", "tau2"), 5: ("sigma0", "sigma1")}

_DOMAIN = [0.0, 1.0]


def _require_order(order: int) -> int:
    if order not in FUNCTION_NAMES:
        raise UnsupportedOrderError(f"order must be 3, 4 or 5, got {order!r}")
    return int(order)


@dataclass(frozen=True)
class GridFunction:
    """Uniform samples on [0, 1] with piecewise-linear interpolation."""

    samples: np.ndarray
    degree: int = 1

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.complex128)
        if samples.ndim != 1 or samples.size < 2:
            raise ValidationError("grid representation needs at least 2 samples")
        if self.degree != 1:
            raise ValidationError("only piecewise-linear grid interpolation (degree 1) is supported")
        object.__setattr__(self, "samples", samples)

    def __call__(self, xs):
        xs = np.asarray(xs, dtype=float)
        grid = np.linspace(0.0, 1.0, self.samples.size)
        return np.interp(xs, grid, self.samples.real) + 1j * np.interp(xs, grid, self.samples.imag)

    def to_chebyshev(self, degree: int | None = None) -> Chebyshev:
        deg = min(self.samples.size - 1, 64) if degree is None else degree
        return Chebyshev.interpolate(self, deg, domain=_DOMAIN)


FunctionRep = Chebyshev | GridFunction


def chebfun(coeffs) -> Chebyshev:
    """Chebyshev series on [0, 1] from a coefficient list."""
    return Chebyshev(np.asarray(coeffs, dtype=np.complex128), domain=_DOMAIN)


def chebfit(f: Callable, degree: int) -> Chebyshev:
    """Interpolate a callable at Chebyshev points of degree ``degree`` on [0, 1]."""
    return Chebyshev.interpolate(f, degree, domain=_DOMAIN)


def _rep_from_dict(d: dict) -> FunctionRep:
    kind = d.get("type")
    if kind == "chebyshev":
        return chebfun(unpairs(d["coeffs"]))
    if kind == "grid":
        return GridFunction(unpairs(d["samples"]), int(d.get("degree", 1)))
    raise ValidationError(f"unknown function representation type {kind!r}")


def _rep_to_dict(rep: FunctionRep) -> dict:
    if isinstance(rep, Chebyshev):
        return {"type": "chebyshev", "coeffs": pairs(rep.coef)}
    return {"type": "grid", "samples": pairs(rep.samples), "degree": rep.degree}


@dataclass(frozen=True)
class CoefficientSet:
    """Named coefficient functions of one operator family; immutable."""

    order: int
    functions: Mapping[str, FunctionRep]

    def __post_init__(self):
        _require_order(self.order)
        expected = set(FUNCTION_NAMES[self.order])
        got = set(self.functions)
        if got != expected:
            raise ValidationError(
                f"order {self.order} needs functions {sorted(expected)}, got {sorted(got)}"
            )
        object.__setattr__(self, "functions", dict(self.functions))

    def __getitem__(self, name: str) -> FunctionRep:
        return self.functions[name]

    @property
    def is_smooth(self) -> bool:
        """True when every function is a Chebyshev series (grid reps are not smooth)."""
        return all(isinstance(f, Chebyshev) for f in self.functions.values())

    def gauge_offset(self) -> complex:
        """tau2(1) - tau2(0) for order 4; the linear gauge direction's coordinate."""
        if self.order != 4:
            return 0.0
        t2 = self["tau2"]
        return complex(t2(1.0) - t2(0.0))

    @property
    def is_canonical_gauge(self) -> bool:
        """Order-4 canonical gauge: tau2(1) = tau2(0).  Trivially true otherwise."""
        scale = 1.0 + max(np.abs(np.atleast_1d(f(np.linspace(0, 1, 9)))).max() for f in self.functions.values())
        return abs(self.gauge_offset()) <= 1e-12 * scale

    def canonicalized(self) -> "CoefficientSet":
        """Gauge-fixed copy: order 4 subtracts (tau2(1)-tau2(0)) * x from tau2."""
        if self.order != 4:
            return self
        c = self.gauge_offset()
        if c == 0:
            return self
        t2 = self["tau2"]
        if not isinstance(t2, Chebyshev):
            t2 = t2.to_chebyshev()
        # x = (1 + T1)/2 on [0,1]
        shifted = t2 - Chebyshev(np.array([0.5 * c, 0.5 * c]), domain=_DOMAIN)
        return CoefficientSet(self.order, {**self.functions, "tau2": shifted})

    def to_chebyshev(self, degree: int | None = None) -> "CoefficientSet":
        funcs = {
            name: f if isinstance(f, Chebyshev) else f.to_chebyshev(degree)
            for name, f in self.functions.items()
        }
        return CoefficientSet(self.order, funcs)

    @classmethod
    def zero(cls, order: int) -> "CoefficientSet":
        names = FUNCTION_NAMES[_require_order(order)]
        return cls(order, {n: chebfun([0.0]) for n in names})

    @classmethod
    def from_callables(cls, order: int, degree: int = 16, **funcs) -> "CoefficientSet":
        return cls(order, {n: chebfit(f, degree) for n, f in funcs.items()})

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "functions": {n: _rep_to_dict(f) for n, f in self.functions.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CoefficientSet":
        try:
            order = int(d["order"])
            funcs = {n: _rep_from_dict(fd) for n, fd in d["functions"].items()}
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed coefficient document: {exc}") from exc
        return cls(order, funcs)


@dataclass(frozen=True)
class AssociatedMatrix:
    """Evaluable n x n matrix function F(x) of the first-order reduction.

    Structural invariants (checked on probe points at construction): entries
    above the superdiagonal vanish, superdiagonal entries are one, the trace
    is zero.  ``sample`` evaluates F on a batch of abscissae and is the only
    thing downstream integrators need.  Instances are immutable and safe to
    share across threads; a private cache slot memoizes mesh samples.
    """

    order: int
    sample: Callable[[np.ndarray], np.ndarray]
    coefficients: CoefficientSet | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        _require_order(self.order)
        self.validate_structure()

    def __call__(self, x: float) -> np.ndarray:
        return self.sample(np.array([float(x)]))[0]

    def validate_structure(self, probe: np.ndarray | None = None, rtol: float = 1e-10):
        n = self.order
        xs = np.linspace(0.0, 1.0, 7) if probe is None else np.asarray(probe, dtype=float)
        vals = self.sample(xs)
        if vals.shape != (xs.size, n, n):
            raise ValidationError(f"sample() returned shape {vals.shape}, expected {(xs.size, n, n)}")
        scale = 1.0 + np.abs(vals).max()
        for k in range(n - 1):
            if np.abs(vals[:, k, k + 1] - 1.0).max() > rtol:
                raise ValidationError("superdiagonal entries must be identically 1")
            if np.abs(vals[:, k, k + 2:]).max() > rtol * scale if k + 2 < n else False:
                raise ValidationError("entries above the superdiagonal must vanish")
        tr = np.abs(vals.trace(axis1=1, axis2=2)).max()
        if tr > rtol * scale:
            raise ValidationError(f"trace must vanish, max |trace| = {tr:.3e}")


def _entries_order3(p):
    def sample(xs):
        xs = np.asarray(xs, dtype=float)
        pv = np.asarray(p(xs), dtype=np.complex128)
        F = np.zeros((xs.size, 3, 3), np.complex128)
        F[:, 0, 1] = 1.0
        F[:, 1, 2] = 1.0
        F[:, 1, 0] = -pv
        F[:, 2, 1] = -pv
        return F

    return sample


def _entries_order4(t1, t2):
    def sample(xs):
        xs = np.asarray(xs, dtype=float)
        a = np.asarray(t1(xs), dtype=np.complex128)
        b = np.asarray(t2(xs), dtype=np.complex128)
        F = np.zeros((xs.size, 4, 4), np.complex128)
        F[:, 0, 1] = 1.0
        F[:, 1, 2] = 1.0
        F[:, 2, 3] = 1.0
        F[:, 1, 0] = -b
        F[:, 1, 1] = a
        F[:, 2, 0] = a * b
        F[:, 2, 1] = -a * a + 2.0 * b
        F[:, 2, 2] = -a
        F[:, 3, 0] = b * b
        F[:, 3, 1] = -a * b
        F[:, 3, 2] = -b
        return F

    return sample


def _entries_order5(s0, s1):
    def sample(xs):
        xs = np.asarray(xs, dtype=float)
        a = np.asarray(s0(xs), dtype=np.complex128)
        b = np.asarray(s1(xs), dtype=np.complex128)
        F = np.zeros((xs.size, 5, 5), np.complex128)
        for k in range(4):
            F[:, k, k + 1] = 1.0
        F[:, 2, 0] = b
        F[:, 2, 1] = -a
        F[:, 3, 2] = -a
        F[:, 4, 2] = -b
        return F

    return sample


def build_associated_matrix(cs: CoefficientSet) -> AssociatedMatrix:
    """Associated matrix of the coefficient set's differential expression."""
    n = _require_order(cs.order)
    f = cs.functions
    if n == 3:
        sample = _entries_order3(f["p"])
    elif n == 4:
        sample = _entries_order4(f["tau1"], f["tau2"])
    else:
        sample = _entries_order5(f["sigma0"], f["sigma1"])
    return AssociatedMatrix(order=n, sample=sample, coefficients=cs)


def build_star_matrix(F: AssociatedMatrix) -> AssociatedMatrix:
    """Companion matrix F* with F*[k,j] = (-1)^(k+j+1) F[n-j+1, n-k+1] (1-based).

    The transform is an involution on the structural class; for the three
    built-in families it reproduces F entrywise.
    """
    n = F.order
    src = F.sample

    def sample(xs):
        vals = src(xs)
        out = np.empty_like(vals)
        for k in range(n):  # 0-based: out[k,j] = (-1)^(k+j+1) vals[n-1-j, n-1-k]
            for j in range(n):
                sgn = -1.0 if (k + j) % 2 == 0 else 1.0
                out[:, k, j] = sgn * vals[:, n - 1 - j, n - 1 - k]
        return out

    return AssociatedMatrix(order=n, sample=sample, coefficients=F.coefficients)


# --- smooth-case regularization check -------------------------------------

def _cheb_to_sympy(rep: Chebyshev, x):
    import sympy as sp

    poly = rep.convert(kind=Polynomial)
    expr = sp.Integer(0)
    for k, c in enumerate(poly.coef):
        c = complex(c)
        term = sp.Float(c.real, 17) + sp.I * sp.Float(c.imag, 17)
        expr += term * x**k
    return sp.expand(expr)


def _poly_to_sympy(coeffs, x):
    import sympy as sp

    expr = sp.Integer(0)
    for k, c in enumerate(np.atleast_1d(coeffs)):
        c = complex(c)
        expr += (sp.Float(c.real, 17) + sp.I * sp.Float(c.imag, 17)) * x**k
    return sp.expand(expr)


def verify_regularization(cs: CoefficientSet, y_coeffs, x_grid) -> float:
    """Max discrepancy between the quasi-derivative chain and the classical expression.

    ``y_coeffs`` are power-basis coefficients of a polynomial test function.
    Both sides are built symbolically: y[n] by iterating the chain with the
    entries of the associated matrix, the reference by differentiating the
    order-n expression directly.  Only smooth (Chebyshev) coefficient sets
    are accepted, since the classical side needs derivatives of the
    coefficients.
    """
    import sympy as sp

    if not cs.is_smooth:
        raise ValidationError("regularization check requires smooth (chebyshev) coefficients")
    n = cs.order
    x = sp.Symbol("x")
    y = _poly_to_sympy(y_coeffs, x)

    coeff_exprs = {name: _cheb_to_sympy(rep, x) for name, rep in cs.functions.items()}
    Fsym = _symbolic_matrix(n, coeff_exprs, x)

    chain = [y]
    for k in range(1, n + 1):
        nxt = sp.diff(chain[k - 1], x)
        for j in range(1, k + 1):
            nxt -= Fsym[k - 1][j - 1] * chain[j - 1]
        chain.append(sp.expand(nxt))

    if n == 3:
        p = coeff_exprs["p"]
        ref = sp.diff(y, x, 3) + sp.diff(p * y, x) + p * sp.diff(y, x)
    elif n == 4:
        p = sp.diff(coeff_exprs["tau1"], x)
        q = sp.diff(coeff_exprs["tau2"], x, 2)
        ref = sp.diff(y, x, 4) - sp.diff(p * sp.diff(y, x), x) + q * y
    else:
        p = coeff_exprs["sigma0"]
        q = -sp.diff(coeff_exprs["sigma1"], x)
        ref = (
            sp.diff(y, x, 5)
            + sp.diff(p * sp.diff(y, x, 2), x)
            + sp.diff(p * sp.diff(y, x), x, 2)
            + sp.diff(q * y, x)
            + q * sp.diff(y, x)
        )

    diff = sp.expand(chain[n] - ref)
    fn = sp.lambdify(x, diff, "numpy")
    vals = np.asarray(fn(np.asarray(x_grid, dtype=float)), dtype=np.complex128)
    return float(np.abs(np.atleast_1d(vals)).max())


def _symbolic_matrix(n, ce, x):
    import sympy as sp

    Z = sp.Integer(0)
    if n == 3:
        p = ce["p"]
        return [[Z, 1, Z], [-p, Z, 1], [Z, -p, Z]]
    if n == 4:
        a, b = ce["tau1"], ce["tau2"]
        return [
            [Z, 1, Z, Z],
            [-b, a, 1, Z],
            [a * b, -a * a + 2 * b, -a, 1],
            [b * b, -a * b, -b, Z],
        ]
    a, b = ce["sigma0"], ce["sigma1"]
    return [
        [Z, 1, Z, Z, Z],
        [Z, Z, 1, Z, Z],
        [b, -a, Z, 1, Z],
        [Z, Z, -a, Z, 1],
        [Z, Z, -b, Z, Z],
    ]
