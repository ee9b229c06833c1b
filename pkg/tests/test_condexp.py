import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cebayes.condexp import (
    ObsBasis,
    build_obs_basis,
    evaluate_map,
    galerkin_solve,
    gram,
    mmse_residual,
    orthogonality_defect,
)
from cebayes.errors import MismatchedSampleSpace
from cebayes.pce import gauss_grid, multi_index_set
from cebayes.rv import EnsembleRV, GermSpec, PCERV, covariance, cross_covariance, mean


def germ_pair(x_rows, y_rows, n, indices=None):
    """Two chaos RVs on a shared Gaussian germ (exact sample space)."""
    germ = GermSpec.gaussian(n)
    if indices is None:
        indices = multi_index_set(n, max(len(x_rows), len(y_rows)) - 1).indices
    x = PCERV(germ=germ, indices=indices, coeffs=np.asarray(x_rows, float))
    y = PCERV(germ=germ, indices=indices, coeffs=np.asarray(y_rows, float))
    return x, y, germ


# --------------------------------------------------------------------- basis


def test_basis_scalar_degree_two():
    basis = build_obs_basis(1, 2)
    assert basis.terms == ((0,), (1,), (2,))


def test_basis_affine_two_dims():
    basis = build_obs_basis(2, 1)
    assert basis.terms == ((0, 0), (1, 0), (0, 1))


def test_basis_scalar_degree_three_size():
    assert build_obs_basis(1, 3).size == 4


def test_basis_contains_constant_and_all_linear_terms():
    basis = build_obs_basis(3, 2)
    assert (0, 0, 0) in basis.terms
    for i in range(3):
        e_i = tuple(int(j == i) for j in range(3))
        assert e_i in basis.terms


def test_basis_rejects_degree_zero():
    with pytest.raises(ValueError):
        build_obs_basis(1, 0)


# ---------------------------------------------------------------------- gram


def test_gram_standard_gaussian_moments():
    # y = standard Gaussian germ, basis {1, y, y^2}: E y^2 = 1, E y^3 = 0, E y^4 = 3
    germ = GermSpec.gaussian(1)
    y = PCERV(germ=germ, indices=((0,), (1,)), coeffs=[[0.0], [1.0]])
    grid = gauss_grid(germ, 3)
    g = gram(build_obs_basis(1, 2), y, grid=grid)
    assert np.allclose(g.matrix, [[1, 0, 1], [0, 1, 0], [1, 0, 3]], atol=1e-12)


def test_gram_constant_basis():
    basis = ObsBasis(y_dim=1, degree=0, terms=((0,),))
    y = EnsembleRV(samples=[[3.0], [5.0], [-1.0]])
    g = gram(basis, y)
    assert g.matrix.shape == (1, 1)
    assert g.matrix[0, 0] == pytest.approx(1.0)


def test_gram_degenerate_constant_observation():
    c = 2.0
    y = EnsembleRV(samples=[[c], [c]])
    g = gram(build_obs_basis(1, 1), y)
    assert np.allclose(g.matrix, [[1.0, c], [c, c * c]], atol=1e-12)
    assert g.condition == math.inf


# ------------------------------------------------------------- galerkin solve


def test_affine_solve_matches_gauss_markov_closed_form():
    # x = xi1, y = xi1 + xi2: cov(x,y)=1, cov(y)=2, zero means -> phi(y) = 0.5 y
    x, y, _ = germ_pair(
        [[0.0], [1.0], [0.0]], [[0.0], [1.0], [1.0]], n=2,
        indices=((0, 0), (1, 0), (0, 1)),
    )
    grid = gauss_grid(x.germ, 2)
    fitted = galerkin_solve(build_obs_basis(1, 1), y, x, grid=grid)
    assert evaluate_map(fitted, np.array([2.0]))[0] == pytest.approx(1.0, abs=1e-12)
    assert evaluate_map(fitted, np.array([0.0]))[0] == pytest.approx(0.0, abs=1e-12)
    const, linear = fitted.affine_parts()
    assert const[0] == pytest.approx(0.0, abs=1e-12)
    assert linear[0, 0] == pytest.approx(0.5, abs=1e-12)


def test_constant_target_projects_to_constant():
    rng = np.random.default_rng(3)
    y = EnsembleRV(samples=rng.standard_normal((200, 1)))
    x = EnsembleRV(samples=np.full((200, 1), 4.0))
    fitted = galerkin_solve(build_obs_basis(1, 2), y, x)
    probe = rng.standard_normal((10, 1))
    assert np.allclose(evaluate_map(fitted, probe), 4.0, atol=1e-10)


def cubic_pair():
    # y = standard Gaussian germ, x = y^3 = 3 psi_1 + sqrt(6) psi_3
    germ = GermSpec.gaussian(1)
    indices = ((0,), (1,), (2,), (3,))
    x = PCERV(germ=germ, indices=indices, coeffs=[[0.0], [3.0], [0.0], [math.sqrt(6.0)]])
    y = PCERV(germ=germ, indices=indices, coeffs=[[0.0], [1.0], [0.0], [0.0]])
    return x, y, gauss_grid(germ, 5)


def test_cubic_target_affine_map_is_three_y():
    x, y, grid = cubic_pair()
    fitted = galerkin_solve(build_obs_basis(1, 1), y, x, grid=grid)
    const, linear = fitted.affine_parts()
    assert const[0] == pytest.approx(0.0, abs=1e-10)
    assert linear[0, 0] == pytest.approx(3.0, abs=1e-10)
    # large-N sampling cross-check
    rng = np.random.default_rng(11)
    ys = rng.standard_normal((200_000, 1))
    k = np.cov(ys[:, 0] ** 3, ys[:, 0])[0, 1] / np.var(ys[:, 0], ddof=1)
    assert k == pytest.approx(3.0, abs=0.1)


def test_cubic_affine_mmse_residual_is_six():
    # E (y^3 - 3y)^2 = 15 - 18 + 9 = 6 for standard Gaussian y
    x, y, grid = cubic_pair()
    fitted = galerkin_solve(build_obs_basis(1, 1), y, x, grid=grid)
    assert mmse_residual(fitted, x, y, grid=grid) == pytest.approx(6.0, abs=1e-10)


def test_solve_rejects_mismatched_spaces():
    y = EnsembleRV(samples=np.zeros((5, 1)))
    x = EnsembleRV(samples=np.zeros((6, 1)))
    with pytest.raises(MismatchedSampleSpace):
        galerkin_solve(build_obs_basis(1, 1), y, x)


def test_singular_gram_returns_min_norm_solution_and_flags():
    y = EnsembleRV(samples=[[2.0], [2.0], [2.0]])
    x = EnsembleRV(samples=[[1.0], [1.0], [1.0]])
    fitted = galerkin_solve(build_obs_basis(1, 1), y, x, whiten=False)
    assert fitted.regularized
    assert evaluate_map(fitted, np.array([2.0]))[0] == pytest.approx(1.0, abs=1e-10)


# ------------------------------------------------------------ map evaluation


def test_evaluate_affine_map():
    from cebayes.condexp import OptimalMap

    m = OptimalMap(basis=build_obs_basis(1, 1), coeffs=[[1.0], [0.5]])
    assert evaluate_map(m, np.array([2.0]))[0] == pytest.approx(2.0)


def test_evaluate_zero_map():
    from cebayes.condexp import OptimalMap

    m = OptimalMap(basis=build_obs_basis(2, 2), coeffs=np.zeros((6, 3)))
    assert np.all(evaluate_map(m, np.array([1.0, -2.0])) == 0.0)


def test_evaluate_quadratic_term():
    from cebayes.condexp import OptimalMap

    m = OptimalMap(basis=build_obs_basis(1, 2), coeffs=[[0.0], [0.0], [1.0]])
    assert evaluate_map(m, np.array([3.0]))[0] == pytest.approx(9.0)


# --------------------------------------------------------------- mmse residual


def test_residual_zero_when_target_in_span():
    rng = np.random.default_rng(5)
    ys = rng.standard_normal((300, 1))
    y = EnsembleRV(samples=ys)
    x = EnsembleRV(samples=2.0 * ys)
    fitted = galerkin_solve(build_obs_basis(1, 1), y, x)
    assert mmse_residual(fitted, x, y) == pytest.approx(0.0, abs=1e-20)


def test_residual_of_independent_target_is_its_variance():
    # x independent of y, zero mean: the map collapses to the mean
    germ = GermSpec.gaussian(2)
    indices = ((0, 0), (1, 0), (0, 1))
    x = PCERV(germ=germ, indices=indices, coeffs=[[0.0], [1.5], [0.0]])
    y = PCERV(germ=germ, indices=indices, coeffs=[[0.0], [0.0], [1.0]])
    grid = gauss_grid(germ, 3)
    fitted = galerkin_solve(build_obs_basis(1, 2), y, x, grid=grid)
    assert mmse_residual(fitted, x, y, grid=grid) == pytest.approx(1.5**2, abs=1e-10)


# ------------------------------------------------------------------ properties


@st.composite
def paired_ensembles(draw, n_min=8, n_max=40):
    n = draw(st.integers(n_min, n_max))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, 2))
    noise = rng.standard_normal((n, 1))
    y = np.tanh(x[:, :1]) + 0.3 * x[:, 1:2] ** 2 + 0.5 * noise
    return EnsembleRV(samples=x), EnsembleRV(samples=y)


@given(paired_ensembles(), st.integers(1, 3))
@settings(max_examples=30, deadline=None)
def test_galerkin_orthogonality(pair, degree):
    x, y = pair
    fitted = galerkin_solve(build_obs_basis(y.dim, degree), y, x)
    defect, r_inf = orthogonality_defect(fitted, x, y)
    assert defect <= 1e-10 * (r_inf + 1.0)


@given(paired_ensembles(), st.integers(1, 2))
@settings(max_examples=20, deadline=None)
def test_projection_idempotence(pair, degree):
    x, y = pair
    fitted = galerkin_solve(build_obs_basis(y.dim, degree), y, x)
    projected = EnsembleRV(samples=evaluate_map(fitted, y.samples), weights=y.weights)
    refit = galerkin_solve(fitted.basis, y, projected, whiten=False)
    if not refit.regularized:
        assert np.allclose(refit.coeffs, fitted.coeffs, atol=1e-10)


@given(paired_ensembles())
@settings(max_examples=20, deadline=None)
def test_residual_non_increasing_in_degree(pair):
    x, y = pair
    residuals = [
        mmse_residual(galerkin_solve(build_obs_basis(y.dim, p), y, x), x, y)
        for p in (1, 2, 3)
    ]
    for lo, hi in zip(residuals[1:], residuals[:-1]):
        assert lo <= hi + 1e-12 * max(1.0, hi)


@given(paired_ensembles(), st.integers(1, 3))
@settings(max_examples=30, deadline=None)
def test_pythagoras(pair, degree):
    x, y = pair
    fitted = galerkin_solve(build_obs_basis(y.dim, degree), y, x)
    w = y.weights
    total = float(w @ (x.samples**2).sum(axis=1))
    projected = evaluate_map(fitted, y.samples)
    explained = float(w @ (projected**2).sum(axis=1))
    residual = mmse_residual(fitted, x, y)
    assert total == pytest.approx(residual + explained, rel=1e-10, abs=1e-10)


@given(paired_ensembles())
@settings(max_examples=30, deadline=None)
def test_affine_basis_equivalence_with_kalman_gain(pair):
    x, y = pair
    fitted = galerkin_solve(build_obs_basis(y.dim, 1), y, x)
    const, linear = fitted.affine_parts()
    k = cross_covariance(x, y) @ np.linalg.inv(covariance(y))
    scale = max(1.0, float(np.abs(k).max()))
    assert np.allclose(linear, k, atol=1e-10 * scale)
    expected_const = mean(x) - k @ mean(y)
    cscale = max(1.0, float(np.abs(expected_const).max()))
    assert np.allclose(const, expected_const, atol=1e-10 * cscale)


def test_whitening_does_not_change_the_fitted_function():
    rng = np.random.default_rng(17)
    ys = 5.0 + 3.0 * rng.standard_normal((500, 1))
    xs = 0.2 * ys**2 + rng.standard_normal((500, 1))
    x, y = EnsembleRV(samples=xs), EnsembleRV(samples=ys)
    basis = build_obs_basis(1, 2)
    white = galerkin_solve(basis, y, x, whiten=True)
    raw = galerkin_solve(basis, y, x, whiten=False)
    probe = np.linspace(-2.0, 12.0, 29)[:, None]
    assert np.allclose(evaluate_map(white, probe), evaluate_map(raw, probe), atol=1e-8)


def test_map_json_round_trip():
    rng = np.random.default_rng(23)
    y = EnsembleRV(samples=rng.standard_normal((100, 2)))
    x = EnsembleRV(samples=rng.standard_normal((100, 3)))
    fitted = galerkin_solve(build_obs_basis(2, 2), y, x)
    from cebayes.condexp import OptimalMap

    back = OptimalMap.from_json(fitted.to_json())
    probe = rng.standard_normal((5, 2))
    assert np.allclose(evaluate_map(back, probe), evaluate_map(fitted, probe), atol=0)
