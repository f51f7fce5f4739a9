import numpy as np
import pytest

from quasispec.characteristic import BoundarySpec
from quasispec.exceptions import ValidationError
from quasispec.model import CoefficientSet, build_associated_matrix
from quasispec.oracles import beam_eigenvalues
from quasispec.rootfinder import (
    Box,
    char_evaluator,
    count_zeros,
    find_spectrum,
    find_zeros,
    laurent_coeff,
    plan_search_box,
)


@pytest.fixture(scope="module")
def free():
    return {n: build_associated_matrix(CoefficientSet.zero(n)) for n in (3, 4, 5)}


def test_count_double_zero_at_origin():
    assert count_zeros(lambda z: z**2, Box(0j, 1.0, 1.0)) == 2


def test_count_known_factorization():
    f = lambda z: (z - 3.0) ** 2 * (z + 1.0)
    assert count_zeros(f, Box(3.0 + 0j, 1.0, 1.0)) == 2
    assert count_zeros(f, Box(-1.0 + 0j, 0.5, 0.5)) == 1
    assert count_zeros(f, Box(1.0 + 0j, 3.0, 1.0)) == 3


def test_count_free_delta11_order3_origin_box(free):
    f = char_evaluator(free[3], BoundarySpec.delta_diag(3, 1), 1e-8)
    assert count_zeros(f, Box(0j, 1.0, 1.0)) == 0


def test_find_zeros_synthetic_multiplicity():
    lam0 = 2.0 - 1.0j
    roots, total = find_zeros(lambda z: (z - lam0) ** 2, Box(1.5 - 0.5j, 2.0, 2.0))
    assert total == 2
    assert len(roots) == 1
    z, m, res = roots[0]
    assert m == 2
    assert abs(z - lam0) < 1e-8


def test_find_zeros_separated_roots():
    f = lambda z: (z - 1.0) * (z + 2.0) * (z - 1.0j)
    roots, total = find_zeros(f, Box(0j, 4.0, 4.0))
    assert total == 3
    got = sorted((complex(z) for z, _, _ in roots), key=lambda w: (w.real, w.imag))
    assert np.allclose(got, [-2.0, 1.0j, 1.0], atol=1e-9)


def test_boundary_zero_jitter():
    # zero exactly on the initial contour: the count must still succeed
    f = lambda z: z - 1.0
    assert count_zeros(f, Box(0j, 1.0, 1.0)) in (0, 1)
    # and a zero strictly inside is found regardless
    assert count_zeros(f, Box(1.0 + 0j, 0.5, 0.5)) == 1


def test_plan_search_box():
    b = plan_search_box(4, 3)
    assert b.half_re >= (5 * np.pi) ** 4 - 1e-9
    b3 = plan_search_box(3, 1)
    assert b3.half_re >= (3 * np.pi) ** 3 - 1e-9
    widths = [plan_search_box(4, c).half_re for c in range(1, 6)]
    assert all(w2 >= w1 for w1, w2 in zip(widths, widths[1:]))
    with pytest.raises(ValidationError):
        plan_search_box(4, 0)


def test_find_spectrum_beam(free):
    spec = BoundarySpec.from_spectrum_name(4, "S12")
    sp = find_spectrum(free[4], spec, plan_search_box(4, 3), tol=1e-10)
    assert sp.count_verified
    lams = sp.expanded()
    oracle = beam_eigenvalues(3)
    assert np.abs(lams[:3] - oracle).max() / oracle.max() < 1e-8
    assert all(m == 1 for _, m in sp.eigenvalues)
    # canonical ordering: nondecreasing modulus
    mods = np.abs(lams)
    assert np.all(np.diff(mods) >= -1e-12)


def test_find_spectrum_conjugation_symmetry(free, random_coefficients):
    # real coefficients: eigenvalue multiset closed under conjugation
    F = build_associated_matrix(random_coefficients(3, seed=21, amplitude=0.2))
    spec = BoundarySpec.from_spectrum_name(3, "S1")
    sp = find_spectrum(F, spec, plan_search_box(3, 3), tol=1e-9)
    lams = sp.expanded()
    for lam in lams:
        assert np.min(np.abs(lams - np.conj(lam))) < 1e-5 * (1 + abs(lam))


def test_spectrum_serialization_roundtrip(free):
    spec = BoundarySpec.from_spectrum_name(4, "S12")
    sp = find_spectrum(free[4], spec, Box(50.0 + 0j, 60.0, 10.0), tol=1e-9)
    back = type(sp).from_dict(sp.to_dict())
    assert back.counted_total == sp.counted_total
    assert np.allclose([e[0] for e in back.eigenvalues], [e[0] for e in sp.eigenvalues])


def test_laurent_simple_pole_residue():
    val = laurent_coeff(lambda z: 1.0 / (z - 2.0), 2.0, -1, radius=0.5)
    assert abs(val - 1.0) < 1e-12


def test_laurent_polynomial_coefficients():
    lam0 = 1.0 + 1.0j
    f = lambda z: (z - lam0) ** 2
    assert abs(laurent_coeff(f, lam0, 2, 0.7) - 1.0) < 1e-12
    assert abs(laurent_coeff(f, lam0, 1, 0.7)) < 1e-12


def test_laurent_analytic_negative_coefficients_vanish():
    f = lambda z: np.exp(z)
    for k in (-1, -2, -3):
        assert abs(laurent_coeff(f, 0.3 + 0.1j, k, 0.4)) < 1e-12


def test_laurent_weyl_residue_identity(free):
    # residue of m21 at a simple zero lam* of Delta11 equals
    # -Delta21(lam*) / Delta11'(lam*)  (finite-difference derivative oracle)
    from quasispec.characteristic import delta_from_boundary
    from quasispec.propagator import boundary_matrices, boundary_matrix

    F = free[3]
    d11 = char_evaluator(F, BoundarySpec.delta_diag(3, 1), 1e-10)
    sp = find_zeros(d11, Box(0j, 200.0, 200.0))
    roots = [z for z, m, _ in sp[0] if m == 1]
    assert roots, "expected at least one simple zero of Delta11 in the test box"
    lam星 = min(roots, key=abs)  # ~6.33, next zero ~161: radius 1 is safely clear

    def m21(zs):
        Ws = boundary_matrices(F, zs, tol=1e-11)
        return np.array(
            [-delta_from_boundary(W, 2, 1) / delta_from_boundary(W, 1, 1) for W in Ws]
        )

    res = laurent_coeff(m21, lam星, -1, radius=1.0)
    h = 1e-5 * (1 + abs(lam星))
    Wc, Wp, Wm = boundary_matrices(F, [lam星, lam星 + h, lam星 - h], tol=1e-11)
    d11p = (delta_from_boundary(Wp, 1, 1) - delta_from_boundary(Wm, 1, 1)) / (2 * h)
    expected = -delta_from_boundary(Wc, 2, 1) / d11p
    assert abs(res - expected) / abs(expected) < 1e-5
