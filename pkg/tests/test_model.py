import numpy as np
import pytest

from quasispec.exceptions import UnsupportedOrderError, ValidationError
from quasispec.model import (
    AssociatedMatrix,
    CoefficientSet,
    GridFunction,
    build_associated_matrix,
    build_star_matrix,
    chebfit,
    chebfun,
    verify_regularization,
)


def test_function_names_enforced():
    with pytest.raises(ValidationError):
        CoefficientSet(3, {"q": chebfun([1.0])})
    with pytest.raises(UnsupportedOrderError):
        CoefficientSet(6, {"p": chebfun([1.0])})
    cs = CoefficientSet(4, {"tau1": chebfun([0.0]), "tau2": chebfun([1.0])})
    assert cs.order == 4


def test_zero_coefficients_order3_matrix():
    F = build_associated_matrix(CoefficientSet.zero(3))
    M = F(0.37)
    expected = np.zeros((3, 3))
    expected[0, 1] = expected[1, 2] = 1.0
    assert np.allclose(M, expected)


def test_order4_constant_coefficient_entries():
    cs = CoefficientSet(4, {"tau1": chebfun([0.0]), "tau2": chebfun([1.0])})
    F = build_associated_matrix(cs)
    M = F(0.5)
    assert M[1, 0] == -1.0
    assert M[2, 1] == 2.0
    assert M[3, 0] == 1.0
    assert M[3, 2] == -1.0
    assert M[0, 1] == M[1, 2] == M[2, 3] == 1.0
    mask = np.ones((4, 4), bool)
    for idx in [(1, 0), (2, 1), (3, 0), (3, 2), (0, 1), (1, 2), (2, 3)]:
        mask[idx] = False
    assert np.abs(M[mask]).max() == 0.0


def test_order5_entries_follow_coefficients():
    cs = CoefficientSet.from_callables(5, degree=3, sigma0=lambda x: x, sigma1=lambda x: np.ones_like(x))
    F = build_associated_matrix(cs)
    for x in (0.0, 0.3, 1.0):
        M = F(x)
        assert np.isclose(M[2, 0], 1.0)
        assert np.isclose(M[2, 1], -x)
        assert np.isclose(M[3, 2], -x)
        assert np.isclose(M[4, 2], -1.0)


@pytest.mark.parametrize("order", [3, 4, 5])
def test_structure_invariants_on_random_sets(order, random_coefficients):
    F = build_associated_matrix(random_coefficients(order, seed=7))
    xs = np.linspace(0, 1, 33)
    vals = F.sample(xs)
    n = order
    for k in range(n - 1):
        assert np.abs(vals[:, k, k + 1] - 1.0).max() == 0.0
        if k + 2 < n:
            assert np.abs(vals[:, k, k + 2:]).max() == 0.0
    assert np.abs(vals.trace(axis1=1, axis2=2)).max() < 1e-13


@pytest.mark.parametrize("order", [3, 4, 5])
def test_star_equals_original_for_builtin_families(order, random_coefficients):
    F = build_associated_matrix(random_coefficients(order, seed=11, complex_valued=True))
    Fs = build_star_matrix(F)
    xs = np.linspace(0, 1, 17)
    assert np.abs(F.sample(xs) - Fs.sample(xs)).max() < 1e-14


def test_star_is_involution_on_generic_member():
    # random structurally valid constant lower triangle with zero trace
    rng = np.random.default_rng(3)
    n = 4
    base = np.zeros((n, n), np.complex128)
    for k in range(n - 1):
        base[k, k + 1] = 1.0
    for i in range(n):
        for j in range(i + 1):
            base[i, j] = rng.standard_normal() + 1j * rng.standard_normal()
    d = base.trace() / n
    for i in range(n):
        base[i, i] -= d

    F = AssociatedMatrix(order=n, sample=lambda xs: np.broadcast_to(base, (len(xs), n, n)).copy())
    FsFs = build_star_matrix(build_star_matrix(F))
    xs = np.linspace(0, 1, 5)
    assert np.abs(FsFs.sample(xs) - F.sample(xs)).max() < 1e-14


def test_grid_function_roundtrip_and_conversion():
    xs = np.linspace(0, 1, 41)
    g = GridFunction(np.sin(xs) + 0.5j * xs)
    assert np.abs(g(xs) - (np.sin(xs) + 0.5j * xs)).max() < 1e-15
    ch = g.to_chebyshev()
    assert np.abs(ch(0.5) - g(0.5)) < 1e-3
    cs = CoefficientSet(3, {"p": g})
    assert not cs.is_smooth
    assert cs.to_chebyshev().is_smooth


def test_serialization_roundtrip():
    cs = CoefficientSet(
        4,
        {
            "tau1": chebfun([0.1, 0.2 + 0.3j]),
            "tau2": GridFunction(np.array([0.0, 0.5, 1.0 + 1j])),
        },
    )
    back = CoefficientSet.from_dict(cs.to_dict())
    assert back.order == 4
    xs = np.linspace(0, 1, 9)
    assert np.abs(back["tau1"](xs) - cs["tau1"](xs)).max() < 1e-15
    assert np.abs(back["tau2"](xs) - cs["tau2"](xs)).max() < 1e-15


def test_gauge_offset_and_canonicalization():
    cs = CoefficientSet(4, {"tau1": chebfun([0.0]), "tau2": chebfit(lambda x: 0.2 * x + 0.1, 3)})
    assert np.isclose(cs.gauge_offset(), 0.2)
    assert not cs.is_canonical_gauge
    canon = cs.canonicalized()
    assert canon.is_canonical_gauge
    # only the linear-in-x part is removed
    assert np.isclose(complex(canon["tau2"](0.0)), 0.1)
    assert np.isclose(complex(canon["tau2"](1.0)), 0.1)


def test_regularization_constant_test_function():
    cs = CoefficientSet.from_callables(3, degree=4, p=lambda x: 1.0 + 0.5 * x)
    res = verify_regularization(cs, [1.0], np.linspace(0, 1, 21))
    assert res < 1e-12


def test_regularization_order3_cubic():
    # p = x^2, y = x^3: reference 6 + (x^2 x^3)' + x^2 (3x^2)
    cs = CoefficientSet.from_callables(3, degree=4, p=lambda x: x**2)
    res = verify_regularization(cs, [0.0, 0.0, 0.0, 1.0], np.linspace(0, 1, 21))
    assert res < 1e-10


def test_regularization_order4_free_quintic():
    cs = CoefficientSet.zero(4)
    res = verify_regularization(cs, [0, 0, 0, 0, 0, 1.0], np.linspace(0, 1, 21))
    assert res < 1e-12


@pytest.mark.parametrize("order", [3, 4, 5])
def test_regularization_random_smooth(order, random_coefficients):
    cs = random_coefficients(order, seed=5, modes=3)
    res = verify_regularization(cs, [0.3, -1.0, 0.25, 0.5], np.linspace(0, 1, 17))
    assert res < 1e-9


def test_regularization_rejects_grid_reps():
    cs = CoefficientSet(3, {"p": GridFunction(np.array([0.0, 1.0, 0.0]))})
    with pytest.raises(ValidationError):
        verify_regularization(cs, [1.0], np.linspace(0, 1, 5))
