"""Numerical verification of the structural relations between Weyl matrices.

Every check returns a residual (or a small report) that should sit at the
integration-error floor when the relation holds.  Checks never assert; they
measure.  Thresholds live with the callers (test suite, CLI report).

The spectral-parameter samples are drawn from a seeded generator on the
annulus 1 <= |lambda| <= 50 with rejection of near-pole points, so repeated
runs are identical.
"""

from __future__ import annotations

import numpy as np

from .characteristic import (
    BoundarySpec,
    build_sign_matrices,
    char_scale,
    delta_from_boundary,
    weyl_from_boundary,
    weyl_solution_matrix,
)
from .exceptions import CountMismatchError, NearPoleError, UnsupportedOrderError, ValidationError
from .model import AssociatedMatrix, build_star_matrix
from .propagator import DEFAULT_TOL, get_engine
from .rootfinder import Box, SearchOptions, _winding_polyline, char_evaluator, find_zeros, laurent_coeff
from .util import digest, max_workers, pair

IDENTITY_ANNULUS = (1.0, 50.0)
_POLE_CLEARANCE = 1e-2  # relative Delta_kk floor used when sampling lambdas


def _weyl(F: AssociatedMatrix, lam: complex, tol: float):
    W = get_engine(F, (1.0,), tol).boundary_values([lam])[0]
    return weyl_from_boundary(W, lam).matrix


def _star_of(F: AssociatedMatrix) -> AssociatedMatrix:
    Fs = F._cache.get("star")
    if Fs is None:
        Fs = build_star_matrix(F)
        F._cache["star"] = Fs
    return Fs


def _star_weyl(F: AssociatedMatrix, lam: complex, tol: float):
    """Weyl matrix of the companion problem at spectral parameter lambda.

    The companion's differential expression carries the sign (-1)^n, so its
    first-order system is driven by (-1)^n lambda.
    """
    n = F.order
    lam_sys = lam if n % 2 == 0 else -lam
    W = get_engine(_star_of(F), (1.0,), tol).boundary_values([lam_sys])[0]
    return weyl_from_boundary(W, lam).matrix


def check_symplectic(F: AssociatedMatrix, lam: complex, tol: float = DEFAULT_TOL) -> float:
    """Residual of [M*(lam)]^T J0 M(lam) = J0 and of M*(lam) = M((-1)^n lam)."""
    n = F.order
    sign = 1.0 if n % 2 == 0 else -1.0
    M = _weyl(F, lam, tol)
    Ms = _star_weyl(F, lam, tol)
    Mflip = _weyl(F, sign * lam, tol)
    J0 = build_sign_matrices(n).J0
    res_a = np.abs(Ms.T @ J0 @ M - J0).max()
    res_b = np.abs(Ms - Mflip).max()
    return float(max(res_a, res_b))


def check_order_relations(F: AssociatedMatrix, lam: complex, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Residuals of the order-specific Weyl-function identities at one lambda."""
    n = F.order
    M = _weyl(F, lam, tol)
    if n == 3:
        Mneg = _weyl(F, -lam, tol)
        return np.array([abs(Mneg[1, 0] - M[2, 1])])
    if n == 4:
        return np.array(
            [
                abs(M[3, 2] - M[1, 0]),
                abs(M[3, 1] - M[2, 1] * M[1, 0] + M[2, 0]),
            ]
        )
    Mneg = _weyl(F, -lam, tol)
    return np.array(
        [
            abs(Mneg[1, 0] - M[4, 3]),
            abs(Mneg[2, 1] - M[3, 2]),
            abs(Mneg[2, 0] - Mneg[1, 0] * M[3, 2] + M[4, 2]),
        ]
    )


def _mfun(F: AssociatedMatrix, j: int, k: int, tol: float, negate: bool = False):
    """Vectorized Weyl function m_{j,k}; optionally evaluated at -lambda."""
    eng = get_engine(F, (1.0,), tol)

    def f(lams):
        lams = np.atleast_1d(np.asarray(lams, np.complex128))
        Ws = eng.boundary_values(-lams if negate else lams)
        return np.array(
            [-delta_from_boundary(W, j, k) / delta_from_boundary(W, k, k) for W in Ws]
        )

    return f


def _measure_multiplicity(F, spec, lam0, radius, tol):
    f = char_evaluator(F, spec, tol)
    verts = lam0 + radius * np.exp(2j * np.pi * np.arange(32) / 32)
    turns = _winding_polyline(f, verts, SearchOptions())
    return int(np.rint(turns))


def check_laurent_convolution(
    F: AssociatedMatrix,
    lambda0: complex,
    kappa: int,
    tol: float = DEFAULT_TOL,
    F_alt: AssociatedMatrix | None = None,
    radius: float | None = None,
) -> float:
    """Residual of the singular-part convolution at a pole of the second column.

    Order 4, at a zero lambda0 of Delta_22 of multiplicity kappa:

        m42<i> = sum_{l=-kappa}^{i} m32<l> m21<i-l>,   i = -kappa..-1,

    order 5, at a zero of Delta_33, the analogue with m53, m43 and the
    analytic factor m21(-lambda).  With kappa = 0 (analytic point) the
    residual is zero by convention.  The stated kappa is verified against a
    winding count on the quadrature circle before anything is computed.
    """
    n = F.order
    if n not in (4, 5):
        raise UnsupportedOrderError("convolution relation exists for orders 4 and 5 only")
    if kappa < 0:
        raise ValidationError("kappa must be >= 0")
    if kappa == 0:
        return 0.0
    r = radius if radius is not None else 0.02 * (1.0 + abs(lambda0))
    kcol = 2 if n == 4 else 3
    measured = _measure_multiplicity(F, BoundarySpec.delta_diag(n, kcol), lambda0, r, tol)
    if measured != kappa:
        raise CountMismatchError(
            f"stated multiplicity {kappa} but winding count {measured} on radius {r:.3g}"
        )

    def residual_for(Fx):
        if n == 4:
            m_out = _mfun(Fx, 4, 2, tol)
            m_pole = _mfun(Fx, 3, 2, tol)
            m_reg = _mfun(Fx, 2, 1, tol)
        else:
            m_out = _mfun(Fx, 5, 3, tol)
            m_pole = _mfun(Fx, 4, 3, tol)
            m_reg = _mfun(Fx, 2, 1, tol, negate=True)
        out = {i: laurent_coeff(m_out, lambda0, i, r) for i in range(-kappa, 0)}
        pole = {l: laurent_coeff(m_pole, lambda0, l, r) for l in range(-kappa, 0)}
        reg = {j: laurent_coeff(m_reg, lambda0, j, r) for j in range(0, kappa)}
        worst = 0.0
        for i in range(-kappa, 0):
            conv = sum(pole[l] * reg[i - l] for l in range(-kappa, i + 1))
            scale = 1.0 + abs(out[i]) + abs(conv)
            worst = max(worst, abs(out[i] - conv) / scale)
        return worst

    res = residual_for(F)
    if F_alt is not None:
        res = max(res, residual_for(F_alt))
    return float(res)


def check_entire_ratio(
    F: AssociatedMatrix,
    F_tilde: AssociatedMatrix,
    box: Box,
    tol: float = DEFAULT_TOL,
) -> dict:
    """Singular parts of (D11 Dt21 - Dt11 D21) / D22 at the zeros of D22.

    When the two problems share the relevant spectra the ratio extends to an
    entire function and every singular coefficient vanishes; the report lists
    the normalized singular magnitude per zero (coefficients divided by the
    maximum of the ratio on the quadrature circle), whose maximum is the
    check's headline number.
    """
    n = F.order
    spec22 = BoundarySpec.delta_diag(n, 2)
    zeros, _ = find_zeros(char_evaluator(F, spec22, max(tol, 1e-8)), box,
                          f_fine=char_evaluator(F, spec22, tol))

    eng = get_engine(F, (1.0,), tol)
    eng_t = get_engine(F_tilde, (1.0,), tol)

    def ratio(lams):
        lams = np.atleast_1d(np.asarray(lams, np.complex128))
        Ws = eng.boundary_values(lams)
        Wts = eng_t.boundary_values(lams)
        out = np.empty(lams.size, np.complex128)
        for i, (W, Wt) in enumerate(zip(Ws, Wts)):
            g1 = delta_from_boundary(W, 1, 1) * delta_from_boundary(Wt, 2, 1) - (
                delta_from_boundary(Wt, 1, 1) * delta_from_boundary(W, 2, 1)
            )
            out[i] = g1 / delta_from_boundary(W, 2, 2)
        return out

    report = {"zeros": [], "max_singular_coeff": 0.0}
    locs = [z for z, _, _ in zeros]
    for z, kappa, _ in zeros:
        gaps = [abs(z - w) for w in locs if w is not z]
        r = 0.02 * (1.0 + abs(z))
        if gaps:
            r = min(r, 0.4 * min(gaps))
        circle = z + r * np.exp(2j * np.pi * np.arange(64) / 64)
        scale = 1.0 + float(np.abs(ratio(circle)).max())
        coeffs = {}
        worst = 0.0
        for nu in range(1, kappa + 1):
            c = laurent_coeff(ratio, z, -nu, r)
            coeffs[-nu] = c
            worst = max(worst, abs(c) / (r**nu * scale))
        report["zeros"].append(
            {"lambda": pair(z), "multiplicity": kappa, "radius": r,
             "coefficients": {str(k): pair(v) for k, v in coeffs.items()},
             "singular_magnitude": worst}
        )
        report["max_singular_coeff"] = max(report["max_singular_coeff"], worst)
    return report


def check_P_matrix(
    F: AssociatedMatrix,
    F_tilde: AssociatedMatrix,
    lambdas,
    x_points,
    tol: float = DEFAULT_TOL,
) -> float:
    """Lambda-independence of P(x, lambda) = Phi(x) inv(Phi~(x)), plus P(0) = I.

    Meaningful when the two problems share the Weyl matrix (identical
    problems, or pairs certified equivalent); then P is a unit
    lower-triangular function of x alone.
    """
    lambdas = [complex(l) for l in lambdas]
    if len(lambdas) < 2:
        raise ValidationError("need at least two lambda samples")
    xp = tuple(sorted({0.0} | {float(x) for x in x_points}))
    Ps = []
    eye_dev = 0.0
    for lam in lambdas:
        Phi = weyl_solution_matrix(F, lam, xp, tol)
        Phit = weyl_solution_matrix(F_tilde, lam, xp, tol)
        P = np.array([Phi[i] @ np.linalg.inv(Phit[i]) for i in range(len(xp))])
        Ps.append(P)
        eye_dev = max(eye_dev, float(np.abs(P[xp.index(0.0)] - np.eye(F.order)).max()))
    spread = 0.0
    for i in range(len(Ps)):
        for j in range(i + 1, len(Ps)):
            spread = max(spread, float(np.abs(Ps[i] - Ps[j]).max()))
    return spread + eye_dev


def check_separation(spec_pairs, tol: float = 1e-6) -> dict:
    """Minimal pairwise distance between paired zero sets; +inf when vacuous."""
    overall = float("inf")
    details = []
    for sa, sb in spec_pairs:
        la, lb = sa.expanded(), sb.expanded()
        if la.size == 0 or lb.size == 0:
            d = float("inf")
        else:
            d = float(np.abs(la[:, None] - lb[None, :]).min())
        details.append(d)
        overall = min(overall, d)
    return {
        "min_distance": overall,
        "pair_distances": details,
        "threshold": tol,
        "violation": overall < tol,
    }


def sample_identity_lambdas(
    F: AssociatedMatrix,
    seed: int,
    count: int,
    tol: float = 1e-8,
    annulus: tuple[float, float] = IDENTITY_ANNULUS,
) -> np.ndarray:
    """Seeded lambda samples in the annulus, away from all Weyl-matrix poles.

    Candidates are rejected when any diagonal characteristic determinant at
    lambda or at (-1)^n lambda is small relative to its minor's magnitude
    scale, so the identity checks stay clear of pole neighbourhoods (and so
    runs are reproducible).
    """
    n = F.order
    rng = np.random.default_rng(seed)
    eng = get_engine(F, (1.0,), tol)
    out: list[complex] = []
    r0, r1 = annulus
    guard = 0
    while len(out) < count and guard < 200:
        guard += 1
        m = 4 * (count - len(out))
        r = np.sqrt(rng.uniform(r0**2, r1**2, m))
        th = rng.uniform(0.0, 2.0 * np.pi, m)
        cands = r * np.exp(1j * th)
        for lam in cands:
            ok = True
            for probe in {complex(lam), complex(lam if n % 2 == 0 else -lam)}:
                W = eng.boundary_values([probe])[0]
                for k in range(1, n):
                    d = abs(delta_from_boundary(W, k, k))
                    s = char_scale(W, BoundarySpec.delta_diag(n, k))
                    if d < _POLE_CLEARANCE * s:
                        ok = False
                        break
                if not ok:
                    break
            if ok:
                out.append(complex(lam))
            if len(out) >= count:
                break
    if len(out) < count:
        raise ValidationError("could not find enough pole-free lambda samples")
    return np.array(out, np.complex128)


# --- report assembly --------------------------------------------------------

def _structure_residual(F: AssociatedMatrix, lams, tol: float) -> float:
    """Phi = C M consistency plus Wronskian drift at a few sample points."""
    from .propagator import fundamental_matrix
    from .characteristic import phi_solution, weyl_matrix

    worst = 0.0
    xs = (0.0, 0.5, 1.0)
    for lam in lams[:2]:
        sol = fundamental_matrix(F, lam, xs, tol)
        worst = max(worst, sol.det_drift)
        M = weyl_matrix(F, lam, tol).matrix
        for k in range(1, F.order + 1):
            phi = phi_solution(F, lam, k, xs, tol)
            for i in range(len(xs)):
                worst = max(worst, float(np.abs(phi[:, i] - sol.values[i] @ M[:, k - 1]).max()))
    return worst


DEFAULT_THRESHOLDS = {
    "structure": 1e-7,
    "symplectic": 1e-7,
    "order_relations": 1e-7,
    "laurent": 1e-5,
    "entire_ratio": 1e-6,
    "p_matrix": 1e-7,
    "separation": 1e-6,
}

ALL_CHECKS = tuple(DEFAULT_THRESHOLDS)


def run_verification(
    F: AssociatedMatrix,
    F_tilde: AssociatedMatrix | None = None,
    checks=ALL_CHECKS,
    seed: int = 0,
    lambda_count: int = 20,
    tol: float = DEFAULT_TOL,
    thresholds: dict | None = None,
    inputs: dict | None = None,
) -> dict:
    """Run the selected checks and assemble a deterministic report document."""
    from .rootfinder import find_spectrum, plan_search_box

    n = F.order
    Ft = F_tilde if F_tilde is not None else F
    th = dict(DEFAULT_THRESHOLDS)
    th.update(thresholds or {})
    lams = sample_identity_lambdas(F, seed, lambda_count, tol=max(tol, 1e-8))
    report = {
        "seed": seed,
        "order": n,
        "inputs_digest": digest(inputs or {}),
        "checks": [],
        "passed": True,
    }

    def add(name, residual, detail=None):
        entry = {
            "name": name,
            "residual": float(residual),
            "threshold": th[name],
            "passed": bool(residual <= th[name]),
        }
        if detail is not None:
            entry["detail"] = detail
        report["checks"].append(entry)
        report["passed"] = report["passed"] and entry["passed"]

    for name in checks:
        if name == "structure":
            add(name, _structure_residual(F, lams, tol))
        elif name == "symplectic":
            res = _map_lambdas(lambda l: check_symplectic(F, l, tol), lams)
            add(name, max(res), {"lambdas": [pair(l) for l in lams]})
        elif name == "order_relations":
            res = _map_lambdas(lambda l: float(check_order_relations(F, l, tol).max()), lams)
            add(name, max(res))
        elif name == "laurent":
            if n == 3:
                continue  # no second-column convolution relation at order 3
            kcol = 2 if n == 4 else 3
            sp = find_spectrum(F, BoundarySpec.delta_diag(n, kcol), plan_search_box(n, 2), tol=tol)
            lam0, kappa = sp.eigenvalues[0]
            add(name, check_laurent_convolution(F, lam0, kappa, tol))
        elif name == "entire_ratio":
            rep = check_entire_ratio(F, Ft, plan_search_box(n, 2), tol)
            add(name, rep["max_singular_coeff"], {"zeros": len(rep["zeros"])})
        elif name == "p_matrix":
            add(name, check_P_matrix(F, Ft, lams[:3], (0.0, 0.5, 1.0), tol))
        elif name == "separation":
            spectra = [
                find_spectrum(F, BoundarySpec.delta_diag(n, k), plan_search_box(n, 2), tol=tol)
                for k in range(1, n + 1)
            ]
            pairs_ = list(zip(spectra[:-1], spectra[1:]))
            rep = check_separation(pairs_, th["separation"])
            add(name, 0.0 if not rep["violation"] else 1.0, rep)
        else:
            raise ValidationError(f"unknown check {name!r}")
    return report


def _map_lambdas(fn, lams):
    """Evaluate a per-lambda check, concurrently when QUASISPEC_THREADS allows."""
    workers = max_workers(len(lams))
    if workers <= 1:
        return [fn(l) for l in lams]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, lams))
