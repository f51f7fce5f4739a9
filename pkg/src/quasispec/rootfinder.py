"""Zeros of entire functions in rectangles by the argument principle.

The counting primitive continues the phase of f along a closed polyline,
adaptively bisecting segments until consecutive phase steps are below pi/2;
the winding number is the accumulated phase over 2 pi.  Boxes whose boundary
comes suspiciously close to a zero are jittered by documented amounts and
recounted.  The search quadrisects boxes until each piece carries a single
zero (or an unresolvable cluster, treated as one eigenvalue with
multiplicity), polishes roots by multiplicity-aware Newton with a central
finite-difference derivative, and certifies every root's multiplicity by a
winding count on a small disk.  The sum of certified multiplicities must
equal the top-level count or the search fails loudly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .characteristic import BoundarySpec, char_function, char_scale
from .exceptions import (
    BoundaryZeroError,
    CountMismatchError,
    NonConvergenceError,
    ValidationError,
)
from .model import AssociatedMatrix
from .propagator import DEFAULT_TOL, get_engine
from .util import pair, unpair

_JITTER_GROW = 1.0 + 1.0 / 32.0
_JITTER_SHIFT = 1e-3


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle in the lambda plane."""

    center: complex
    half_re: float
    half_im: float

    def __post_init__(self):
        if self.half_re <= 0 or self.half_im <= 0:
            raise ValidationError("box half-widths must be positive")

    @property
    def diam(self) -> float:
        return 2.0 * float(np.hypot(self.half_re, self.half_im))

    def corners(self) -> np.ndarray:
        c, a, b = self.center, self.half_re, self.half_im
        return np.array([c - a - 1j * b, c + a - 1j * b, c + a + 1j * b, c - a + 1j * b])

    def contains(self, z: complex, margin: float = 0.0) -> bool:
        dz = z - self.center
        return abs(dz.real) <= self.half_re * (1 + margin) and abs(dz.imag) <= self.half_im * (1 + margin)

    def partition(self, fx: float = 0.0, fy: float = 0.0) -> list["Box"]:
        """Exact partition into four rectangles, cut at an interior offset point.

        The offsets (fractions of the half-widths, in (-1, 1)) move the cut
        lines away from zeros that sit on symmetry axes -- real eigenvalues
        would otherwise lie exactly on the cutting cross.
        """
        cx, cy = self.center.real, self.center.imag
        xs = (cx - self.half_re, cx + fx * self.half_re, cx + self.half_re)
        ys = (cy - self.half_im, cy + fy * self.half_im, cy + self.half_im)
        out = []
        for j in range(2):
            for i in range(2):
                a = 0.5 * (xs[i + 1] - xs[i])
                b = 0.5 * (ys[j + 1] - ys[j])
                out.append(Box(complex(xs[i] + a, ys[j] + b), a, b))
        return out

    def jittered(self, attempt: int) -> "Box":
        g = _JITTER_GROW**attempt
        shift = _JITTER_SHIFT * attempt * (self.half_re + 1j * self.half_im)
        return Box(self.center + shift, self.half_re * g, self.half_im * g)

    def to_dict(self) -> dict:
        return {"center": pair(self.center), "half_widths": [self.half_re, self.half_im]}

    @classmethod
    def from_dict(cls, d: dict) -> "Box":
        return cls(unpair(d["center"]), float(d["half_widths"][0]), float(d["half_widths"][1]))


@dataclass
class SearchOptions:
    quadrature: int = 16  # initial boundary samples per edge
    max_phase_sweeps: int = 26
    floor_ratio: float = 1e-13  # boundary-zero suspicion, relative to median |f|
    max_jitters: int = 3
    max_depth: int = 60
    cluster_rel_diam: float = 2e-5  # box diameter below which a count is one cluster
    mult_radius_rel: float = 1e-4  # certification disk radius, relative
    newton_max_iter: int = 60
    root_tol_rel: float = 1e-12
    winding_int_tol: float = 0.2


class _MemoFun:
    """Vectorized function with exact-argument memoization."""

    def __init__(self, f):
        self.f = f
        self.memo: dict[complex, complex] = {}
        self.evals = 0

    def __call__(self, zs) -> np.ndarray:
        zs = np.atleast_1d(np.asarray(zs, np.complex128))
        out = np.empty(zs.size, np.complex128)
        missing, where = [], []
        for i, z in enumerate(zs):
            z = complex(z)
            hit = self.memo.get(z)
            if hit is None:
                missing.append(z)
                where.append(i)
            else:
                out[i] = hit
        if missing:
            vals = np.atleast_1d(np.asarray(self.f(np.array(missing)), np.complex128))
            self.evals += len(missing)
            for z, v, i in zip(missing, vals, where):
                self.memo[z] = complex(v)
                out[i] = v
            if len(self.memo) > 400_000:
                self.memo.clear()
        return out


def _as_batch(f) -> _MemoFun:
    if isinstance(f, _MemoFun):
        return f

    def batched(zs):
        try:
            vals = f(zs)
            vals = np.atleast_1d(np.asarray(vals, np.complex128))
            if vals.shape == zs.shape:
                return vals
        except (TypeError, ValueError):
            pass
        return np.array([f(complex(z)) for z in zs], np.complex128)

    return _MemoFun(batched)


def _winding_polyline(f: _MemoFun, vertices: np.ndarray, opts: SearchOptions) -> float:
    """Total phase of f along the closed polyline, in turns."""
    pts = []
    k = max(2, opts.quadrature)
    for i in range(len(vertices)):
        a, b = vertices[i], vertices[(i + 1) % len(vertices)]
        ts = np.arange(k) / k
        pts.extend(a + ts * (b - a))
    pts.append(pts[0])
    zs = np.array(pts, np.complex128)
    vals = f(zs)

    for sweep in range(opts.max_phase_sweeps):
        mags = np.abs(vals)
        scale = np.median(mags)
        if scale == 0.0 or mags.min() < opts.floor_ratio * scale:
            raise BoundaryZeroError(
                f"|f| = {mags.min():.3e} on the contour (scale {scale:.3e})"
            )
        ratios = vals[1:] / vals[:-1]
        dphi = np.angle(ratios)
        bad = np.nonzero(np.abs(dphi) >= 0.5 * np.pi)[0]
        if bad.size == 0:
            return float(dphi.sum() / (2.0 * np.pi))
        mids = 0.5 * (zs[bad] + zs[bad + 1])
        mvals = f(mids)
        zs = np.insert(zs, bad + 1, mids)
        vals = np.insert(vals, bad + 1, mvals)
    raise NonConvergenceError("phase continuation did not settle below pi/2 steps")


def _count_box(f: _MemoFun, box: Box, opts: SearchOptions) -> tuple[int, Box]:
    """Winding count with boundary-zero jitter; returns the box actually counted."""
    last: Exception | None = None
    for attempt in range(opts.max_jitters + 1):
        candidate = box if attempt == 0 else box.jittered(attempt)
        try:
            turns = _winding_polyline(f, candidate.corners(), opts)
        except (BoundaryZeroError, NonConvergenceError) as exc:
            # a stalling phase refinement usually means a zero hugging the
            # contour; move the contour and try again
            last = exc
            continue
        count = int(np.rint(turns))
        if abs(turns - count) > opts.winding_int_tol:
            raise NonConvergenceError(
                f"winding {turns:.3f} not close to an integer on {candidate}"
            )
        if count < 0:
            raise NonConvergenceError(f"negative winding {count} (function not analytic?)")
        return count, candidate
    raise BoundaryZeroError(
        f"zero suspected on the boundary after {opts.max_jitters} jitters: {last}"
    )


#: Deterministic cut offsets: irrational-looking fractions keep every cutting
#: cross away from the coordinate axes where real eigenvalues live.
_CUT_OFFSETS = ((0.093, 0.117), (-0.137, -0.089), (0.171, -0.113), (-0.071, 0.151))


def _count_exact(f: _MemoFun, box: Box, opts: SearchOptions) -> int:
    """Winding count on the box exactly as given (no jitter): partition-safe."""
    turns = _winding_polyline(f, box.corners(), opts)
    count = int(np.rint(turns))
    if abs(turns - count) > opts.winding_int_tol:
        raise NonConvergenceError(f"winding {turns:.3f} not close to an integer")
    if count < 0:
        raise NonConvergenceError(f"negative winding {count} (function not analytic?)")
    return count


def count_zeros(f, box: Box, quadrature: int = 16) -> int:
    """Number of zeros (with multiplicity) of an analytic f inside the box."""
    opts = SearchOptions(quadrature=quadrature)
    count, _ = _count_box(_as_batch(f), box, opts)
    return count


def _newton(f: _MemoFun, z0: complex, mult: int, opts: SearchOptions) -> complex | None:
    z = complex(z0)
    for _ in range(opts.newton_max_iter):
        h = 1e-6 * (1.0 + abs(z))
        vals = f(np.array([z, z + h, z - h]))
        f0, d = vals[0], (vals[1] - vals[2]) / (2.0 * h)
        if d == 0 or not np.isfinite(d) or not np.isfinite(f0):
            return None
        step = mult * f0 / d
        cap = 0.5 * (1.0 + abs(z))
        if abs(step) > cap:
            step *= cap / abs(step)
        z -= step
        if abs(step) < opts.root_tol_rel * (1.0 + abs(z)):
            return z
    return None


def _disk_count(f: _MemoFun, center: complex, radius: float, opts: SearchOptions) -> int:
    verts = center + radius * np.exp(2j * np.pi * np.arange(32) / 32)
    turns = _winding_polyline(f, verts, opts)
    count = int(np.rint(turns))
    if abs(turns - count) > opts.winding_int_tol:
        raise NonConvergenceError(f"disk winding {turns:.3f} not integral")
    return count


def _certify_multiplicity(f: _MemoFun, root: complex, expected: int, opts: SearchOptions):
    radius = opts.mult_radius_rel * (1.0 + abs(root))
    for _ in range(3):
        try:
            got = _disk_count(f, root, radius, opts)
        except BoundaryZeroError:
            radius /= 10.0
            continue
        if got == expected:
            return radius
        radius /= 10.0  # count instability: shrink and retry
    return None


def _resolve(f_search, f_fine, box, count, depth, opts):
    if count == 0:
        return []
    z = _newton(f_fine, box.center, count, opts)
    if z is not None and box.contains(z, margin=1e-9):
        if _certify_multiplicity(f_fine, z, count, opts) is not None:
            return [(z, count)]
    small = box.diam <= opts.cluster_rel_diam * (1.0 + abs(box.center))
    if small or depth >= opts.max_depth:
        raise NonConvergenceError(
            f"could not resolve {count} zero(s) in {box} (depth {depth})"
        )
    counted = None
    mismatch = None
    for fx, fy in _CUT_OFFSETS:
        children = box.partition(fx, fy)
        try:
            cand = [_count_exact(f_search, c, opts) for c in children]
        except (BoundaryZeroError, NonConvergenceError):
            continue  # a zero sits on this cutting cross; move the cross
        if sum(cand) == count:
            counted = list(zip(cand, children))
            break
        mismatch = cand
    if counted is None:
        raise CountMismatchError(
            f"child counts {mismatch} do not sum to {count} in {box}"
        )
    roots = []
    for ccount, cbox in counted:
        roots.extend(_resolve(f_search, f_fine, cbox, ccount, depth + 1, opts))
    return roots


def find_zeros(f, box: Box, f_fine=None, opts: SearchOptions | None = None):
    """All zeros of f in the box: list of (root, multiplicity, |f(root)|), plus the count.

    ``f`` is used for counting; ``f_fine`` (default: f) for Newton polishing
    and multiplicity certification, allowing a cheaper function during the
    subdivision phase.
    """
    opts = opts or SearchOptions()
    fs = _as_batch(f)
    ff = fs if f_fine is None else _as_batch(f_fine)
    total, top = _count_box(fs, box, opts)
    roots = _resolve(fs, ff, top, total, 0, opts)
    if sum(m for _, m in roots) != total:
        raise CountMismatchError(
            f"located multiplicities sum to {sum(m for _, m in roots)}, counted {total}"
        )
    for i, (zi, _) in enumerate(roots):
        for zj, _ in roots[i + 1 :]:
            if abs(zi - zj) < 1e-11 * (1.0 + abs(zi)):
                raise CountMismatchError(f"duplicate roots located at {zi}")
    out = [(z, m, float(abs(ff(np.array([z]))[0]))) for z, m in roots]
    return out, total


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalue multiset of one boundary value problem over one search region.

    Eigenvalues are sorted by |lambda| with ties broken by the principal
    argument in (-pi, pi].  ``counted_total`` is the argument-principle count
    over the region; construction fails unless the multiplicities sum to it.
    """

    eigenvalues: tuple[tuple[complex, int], ...]
    region: Box
    problem: BoundarySpec
    residuals: tuple[float, ...]
    counted_total: int

    @property
    def count_verified(self) -> bool:
        return sum(m for _, m in self.eigenvalues) == self.counted_total

    def expanded(self) -> np.ndarray:
        out = []
        for lam, m in self.eigenvalues:
            out.extend([lam] * m)
        return np.array(out, np.complex128)

    def to_dict(self) -> dict:
        return {
            "problem": {
                "order": self.problem.order,
                "at_zero": list(self.problem.at_zero),
                "at_one": list(self.problem.at_one),
            },
            "region": self.region.to_dict(),
            "eigenvalues": [[lam.real, lam.imag, m] for lam, m in self.eigenvalues],
            "residuals": list(self.residuals),
            "counted_total": self.counted_total,
            "count_verified": self.count_verified,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Spectrum":
        prob = d["problem"]
        return cls(
            eigenvalues=tuple(
                (complex(e[0], e[1]), int(e[2])) for e in d["eigenvalues"]
            ),
            region=Box.from_dict(d["region"]),
            problem=BoundarySpec(
                int(prob["order"]), tuple(prob["at_zero"]), tuple(prob["at_one"])
            ),
            residuals=tuple(float(r) for r in d.get("residuals", [])),
            counted_total=int(d["counted_total"]),
        )


def _sorted_roots(roots):
    return sorted(roots, key=lambda t: (abs(t[0]), np.angle(t[0])))


def plan_search_box(n: int, count: int) -> Box:
    """Origin-centered square sized from the free-case eigenvalue growth.

    Eigenvalue moduli grow like (pi k)^n, so a half-width of (pi (count+2))^n
    holds at least ``count`` eigenvalues of every implemented problem for
    coefficients of moderate size, with margin.
    """
    if count < 1:
        raise ValidationError("count must be >= 1")
    w = (np.pi * (count + 2)) ** n
    return Box(0.0 + 0.0j, w, w)


def char_evaluator(F: AssociatedMatrix, spec: BoundarySpec, tol: float):
    """Vectorized, scale-normalized characteristic function of one problem."""
    eng = get_engine(F, (1.0,), tol)

    def f(lams):
        Ws = eng.boundary_values(lams)
        out = np.empty(len(Ws), np.complex128)
        for i, W in enumerate(Ws):
            out[i] = char_function(W, spec) / char_scale(W, spec)
        return out

    return _MemoFun(f)


def find_spectrum(
    F: AssociatedMatrix,
    spec: BoundarySpec,
    box: Box,
    max_count: int = 200,
    tol: float = DEFAULT_TOL,
    opts: SearchOptions | None = None,
) -> Spectrum:
    """Locate all eigenvalues of the problem inside the box.

    Counting and subdivision run on a relaxed integration tolerance; Newton
    polishing and multiplicity certification on ``tol``.
    """
    search_tol = max(tol, 1e-6)
    fs = char_evaluator(F, spec, search_tol)
    ff = char_evaluator(F, spec, tol) if tol < search_tol else fs
    opts = opts or SearchOptions()
    total, top = _count_box(fs, box, opts)
    if total > max_count:
        raise ValidationError(f"{total} zeros in region exceeds max_count = {max_count}")
    roots = _resolve(fs, ff, top, total, 0, opts)
    if sum(m for _, m in roots) != total:
        raise CountMismatchError("multiplicity sum disagrees with region count")
    ordered = _sorted_roots(roots)
    residuals = tuple(float(abs(ff(np.array([z]))[0])) for z, _ in ordered)
    return Spectrum(
        eigenvalues=tuple((complex(z), int(m)) for z, m in ordered),
        region=top,
        problem=spec,
        residuals=residuals,
        counted_total=total,
    )


def refine_root(f, z0: complex, mult: int = 1, opts: SearchOptions | None = None) -> complex:
    """Multiplicity-aware Newton polish from a known approximate root."""
    opts = opts or SearchOptions()
    z = _newton(_as_batch(f), z0, mult, opts)
    if z is None:
        raise NonConvergenceError(f"Newton did not converge from {z0}")
    return z


def laurent_coeff(
    f, lambda0: complex, k: int, radius: float, quadrature: int = 64
) -> complex:
    """Coefficient of (lambda - lambda0)^k via trapezoidal contour quadrature.

    Exponentially convergent for f analytic on the circle; the result is
    accepted only after agreement across two quadrature refinements.
    """
    if radius <= 0:
        raise ValidationError("radius must be positive")
    fb = _as_batch(f)

    def approx(q):
        theta = 2.0 * np.pi * np.arange(q) / q
        w = radius * np.exp(1j * theta)
        vals = fb(lambda0 + w)
        return complex(np.mean(vals * w ** (-k)))

    q = max(8, int(quadrature))
    a1, a2, a3 = approx(q), approx(2 * q), approx(4 * q)
    err = abs(a3 - a2)
    if err > 1e-8 * (1.0 + abs(a3)) and err > 0.05 * abs(a2 - a1):
        raise NonConvergenceError(
            f"contour quadrature not converged: |a(2q)-a(4q)| = {err:.3e}"
        )
    return a3
