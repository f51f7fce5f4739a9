import numpy as np
import pytest

from quasispec.characteristic import BoundarySpec, build_sign_matrices, weyl_from_boundary
from quasispec.exceptions import CountMismatchError
from quasispec.identities import (
    check_entire_ratio,
    check_laurent_convolution,
    check_order_relations,
    check_P_matrix,
    check_separation,
    check_symplectic,
    run_verification,
    sample_identity_lambdas,
)
from quasispec.model import CoefficientSet, build_associated_matrix, chebfit, chebfun
from quasispec.oracles import free_boundary_matrix
from quasispec.rootfinder import Box, char_evaluator, find_spectrum, find_zeros, plan_search_box


@pytest.fixture(scope="module")
def free():
    return {n: build_associated_matrix(CoefficientSet.zero(n)) for n in (3, 4, 5)}


def test_symplectic_order3_smooth():
    cs = CoefficientSet.from_callables(3, degree=10, p=lambda x: 0.4 * np.cos(np.pi * x) + 0.1 * x)
    F = build_associated_matrix(cs)
    assert check_symplectic(F, 2.0 + 1.0j, tol=1e-10) < 1e-8


def test_symplectic_order4_smooth():
    cs = CoefficientSet.from_callables(4, degree=10, tau1=lambda x: 0.3 * x, tau2=np.sin)
    F = build_associated_matrix(cs)
    assert check_symplectic(F, 5.0 + 0j, tol=1e-10) < 1e-8


def test_symplectic_order5_smooth():
    cs = CoefficientSet.from_callables(
        5, degree=8, sigma0=lambda x: 0.2 + 0.1 * x, sigma1=lambda x: 0.3 * x**2
    )
    F = build_associated_matrix(cs)
    assert check_symplectic(F, 3.0 - 1.0j, tol=1e-10) < 1e-8


@pytest.mark.parametrize("n", [3, 4, 5])
def test_symplectic_free_from_oracle(n):
    # identity checked on closed-form boundary matrices, no ODE integration
    lam = 1.0
    sign = 1.0 if n % 2 == 0 else -1.0
    M = weyl_from_boundary(free_boundary_matrix(n, lam), lam).matrix
    Ms = weyl_from_boundary(free_boundary_matrix(n, sign * lam), sign * lam).matrix
    J0 = build_sign_matrices(n).J0
    assert np.abs(Ms.T @ J0 @ M - J0).max() < 1e-10


def test_order_relations_order3_cosine():
    cs = CoefficientSet.from_callables(3, degree=12, p=lambda x: np.cos(np.pi * x))
    F = build_associated_matrix(cs)
    res = check_order_relations(F, 1.7, tol=1e-10)
    assert res.max() < 1e-8


def test_order_relations_order4():
    cs = CoefficientSet.from_callables(4, degree=12, tau1=lambda x: x, tau2=np.sin)
    F = build_associated_matrix(cs)
    res = check_order_relations(F, 2.0 - 1.0j, tol=1e-10)
    assert res.shape == (2,)
    assert res.max() < 1e-8


def test_order_relations_order5():
    cs = CoefficientSet.from_callables(
        5, degree=8, sigma0=lambda x: np.ones_like(x), sigma1=lambda x: x**2
    )
    F = build_associated_matrix(cs)
    res = check_order_relations(F, 3.0, tol=1e-10)
    assert res.shape == (3,)
    assert res.max() < 1e-8


def test_identity_residuals_gauge_blind(random_coefficients):
    # the tau2 -> tau2 + c x shift yields another valid family member, so the
    # identity residuals stay at the floor for both representatives
    cs = random_coefficients(4, seed=14)
    shifted = CoefficientSet(
        4,
        {
            "tau1": cs["tau1"],
            "tau2": cs["tau2"] + chebfun([0.15, 0.15]),  # + 0.3 x
        },
    )
    for c in (cs, shifted):
        F = build_associated_matrix(c)
        assert check_symplectic(F, 2.2 + 0.7j, tol=1e-10) < 1e-8
        assert check_order_relations(F, 2.2 + 0.7j, tol=1e-10).max() < 1e-8


def test_laurent_convolution_simple_pole_order4(random_coefficients):
    cs = random_coefficients(4, seed=17, amplitude=0.25)
    F = build_associated_matrix(cs)
    sp = find_spectrum(F, BoundarySpec.delta_diag(4, 2), plan_search_box(4, 2), tol=1e-10)
    lam0, kappa = sp.eigenvalues[0]
    assert kappa == 1
    res = check_laurent_convolution(F, lam0, kappa, tol=1e-10)
    assert res < 1e-6


def test_laurent_convolution_order5(random_coefficients):
    cs = random_coefficients(5, seed=23, amplitude=0.2)
    F = build_associated_matrix(cs)
    sp = find_spectrum(F, BoundarySpec.delta_diag(5, 3), plan_search_box(5, 1), tol=1e-10)
    lam0, kappa = sp.eigenvalues[0]
    res = check_laurent_convolution(F, lam0, kappa, tol=1e-10)
    assert res < 1e-6


def test_laurent_convolution_analytic_point(free):
    assert check_laurent_convolution(free[4], 1.0 + 1.0j, 0) == 0.0


def test_laurent_convolution_multiplicity_mismatch(free):
    with pytest.raises(CountMismatchError):
        check_laurent_convolution(free[4], 1.0 + 1.0j, 2, tol=1e-8)


def test_entire_ratio_identical_problems(free):
    rep = check_entire_ratio(free[4], free[4], plan_search_box(4, 2), tol=1e-9)
    assert rep["zeros"], "expected Delta22 zeros in the box"
    assert rep["max_singular_coeff"] < 1e-10


def test_entire_ratio_mismatched_problems_negative_control(random_coefficients):
    F = build_associated_matrix(random_coefficients(4, seed=31, amplitude=0.3))
    Ft = build_associated_matrix(random_coefficients(4, seed=32, amplitude=0.3))
    rep = check_entire_ratio(F, Ft, plan_search_box(4, 1), tol=1e-9)
    assert rep["max_singular_coeff"] > 1e-8  # value itself is not asserted


def test_p_matrix_identical_problems(random_coefficients):
    F = build_associated_matrix(random_coefficients(3, seed=19))
    res = check_P_matrix(F, F, [1.0 + 0.5j, 2.0 - 1.0j], (0.0, 0.5, 1.0), tol=1e-10)
    assert res < 1e-8


def test_p_matrix_unrelated_problems_negative_control(random_coefficients):
    F = build_associated_matrix(random_coefficients(4, seed=41, amplitude=0.4))
    Ft = build_associated_matrix(random_coefficients(4, seed=42, amplitude=0.4))
    res = check_P_matrix(F, Ft, [1.0 + 0.5j, 2.0 - 1.0j], (0.0, 0.5, 1.0), tol=1e-10)
    assert res > 1e-4  # lambda dependence detected; value not asserted


def test_separation_free_order4(free):
    spectra = [
        find_spectrum(free[4], BoundarySpec.delta_diag(4, k), plan_search_box(4, 2), tol=1e-9)
        for k in (1, 2)
    ]
    rep = check_separation([(spectra[0], spectra[1])])
    assert rep["min_distance"] > 1.0
    assert not rep["violation"]


def test_separation_identical_and_empty(free):
    sp = find_spectrum(free[4], BoundarySpec.delta_diag(4, 2), plan_search_box(4, 2), tol=1e-9)
    rep = check_separation([(sp, sp)])
    assert rep["min_distance"] == 0.0
    assert rep["violation"]
    empty = find_spectrum(free[4], BoundarySpec.delta_diag(4, 4), Box(1j, 2.0, 2.0), tol=1e-9)
    rep2 = check_separation([(sp, empty)])
    assert rep2["min_distance"] == float("inf")
    assert not rep2["violation"]


def test_sample_lambdas_deterministic_and_in_annulus(free):
    a = sample_identity_lambdas(free[4], seed=5, count=12)
    b = sample_identity_lambdas(free[4], seed=5, count=12)
    assert np.array_equal(a, b)
    assert ((np.abs(a) >= 1.0) & (np.abs(a) <= 50.0)).all()


def test_residuals_shrink_with_tighter_tolerance(random_coefficients):
    F = build_associated_matrix(random_coefficients(5, seed=3))
    lam = 4.0 + 1.0j
    loose = check_symplectic(F, lam, tol=1e-5)
    tight = check_symplectic(F, lam, tol=1e-10)
    assert tight < loose or tight < 1e-10


def test_run_verification_free_case(free):
    rep = run_verification(free[3], checks=("structure", "symplectic", "order_relations"),
                           seed=1, lambda_count=4, tol=1e-10)
    assert rep["passed"]
    assert {c["name"] for c in rep["checks"]} == {"structure", "symplectic", "order_relations"}
