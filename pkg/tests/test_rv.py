import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cebayes.errors import BadBandwidth, BadLevel, MismatchedSampleSpace
from cebayes.rv import (
    EnsembleRV,
    GermSpec,
    MomentSummary,
    PCERV,
    covariance,
    cross_covariance,
    kde_pdf,
    mean,
    quantiles,
    sample_pce,
    total_variance,
)


def scalar_ens(values, weights=None):
    return EnsembleRV(samples=np.asarray(values, float)[:, None], weights=weights)


def pce_1d(coeffs, n=1):
    germ = GermSpec.gaussian(n)
    if n == 1:
        indices = [(k,) for k in range(len(coeffs))]
    else:
        raise NotImplementedError
    return PCERV(germ=germ, indices=tuple(indices), coeffs=np.asarray(coeffs, float))


# ---------------------------------------------------------------- construction


def test_weights_must_sum_to_one():
    with pytest.raises(ValueError):
        EnsembleRV(samples=[[0.0], [1.0]], weights=[0.6, 0.6])


def test_weights_must_be_nonnegative():
    with pytest.raises(ValueError):
        EnsembleRV(samples=[[0.0], [1.0]], weights=[1.5, -0.5])


def test_samples_must_be_finite():
    with pytest.raises(ValueError):
        EnsembleRV(samples=[[np.inf]])


def test_pce_requires_zero_index():
    with pytest.raises(ValueError):
        PCERV(germ=GermSpec.gaussian(1), indices=((1,),), coeffs=[[1.0]])


def test_pce_rejects_duplicate_indices():
    with pytest.raises(ValueError):
        PCERV(germ=GermSpec.gaussian(1), indices=((0,), (0,)), coeffs=[[1.0], [2.0]])


def test_pce_index_length_matches_germ():
    with pytest.raises(ValueError):
        PCERV(germ=GermSpec.gaussian(2), indices=((0,),), coeffs=[[1.0]])


def test_values_are_immutable():
    rv = scalar_ens([1.0, 2.0])
    with pytest.raises(ValueError):
        rv.samples[0, 0] = 3.0


# ---------------------------------------------------------------------- mean


def test_mean_uniform_ensemble():
    assert mean(scalar_ens([1.0, 2.0, 3.0]))[0] == pytest.approx(2.0)


def test_mean_pce_is_zero_index_row():
    rv = pce_1d([[1.0], [2.0]])
    assert mean(rv)[0] == pytest.approx(1.0)


def test_mean_single_sample():
    assert mean(scalar_ens([0.0]))[0] == 0.0


# ---------------------------------------------------------------- covariance


def test_two_point_variance_uses_divisor_n_minus_1():
    assert covariance(scalar_ens([0.0, 2.0]))[0, 0] == pytest.approx(2.0)


def test_two_point_cross_covariance():
    x = scalar_ens([0.0, 1.0])
    y = scalar_ens([0.0, 2.0])
    assert cross_covariance(x, y)[0, 0] == pytest.approx(1.0)


def test_pce_cross_covariance_contracts_coefficients():
    x = pce_1d([[0.0], [1.0]])
    y = pce_1d([[5.0], [2.0]])
    assert cross_covariance(x, y)[0, 0] == pytest.approx(2.0)


def test_cross_covariance_rejects_mismatched_spaces():
    with pytest.raises(MismatchedSampleSpace):
        cross_covariance(scalar_ens([0.0, 1.0]), scalar_ens([0.0, 1.0, 2.0]))
    with pytest.raises(MismatchedSampleSpace):
        cross_covariance(scalar_ens([0.0, 1.0]), pce_1d([[0.0], [1.0]]))


def test_covariance_needs_two_samples():
    with pytest.raises(ValueError):
        covariance(scalar_ens([1.0]))


# ------------------------------------------------------------ total variance


def test_total_variance_is_trace():
    rv = PCERV(
        germ=GermSpec.gaussian(2),
        indices=((0, 0), (1, 0), (0, 1)),
        coeffs=[[0.0, 0.0], [1.0, 0.0], [0.0, math.sqrt(3.0)]],
    )
    assert total_variance(rv) == pytest.approx(4.0)


def test_total_variance_zero_spread():
    assert total_variance(scalar_ens([3.0, 3.0])) == pytest.approx(0.0)


def test_total_variance_pce_sum_of_squares():
    rv = PCERV(
        germ=GermSpec.gaussian(1),
        indices=((0,), (1,), (2,)),
        coeffs=[[1.0, 1.0], [1.0, 0.0], [0.0, 2.0]],
    )
    assert total_variance(rv) == pytest.approx(5.0)


# -------------------------------------------------------------------- quantiles


def test_quantile_midpoint():
    assert quantiles(scalar_ens([1.0, 2.0, 3.0, 4.0]), 0, [0.5]) == [pytest.approx(2.5)]


def test_quantile_degenerate_single_sample():
    for level in (0.01, 0.5, 0.99):
        assert quantiles(scalar_ens([7.0]), 0, [level]) == [7.0]


def test_quantile_interpolation_rule_by_hand():
    # order statistics sit at (k-1)/(N-1) = 0, 1/3, 2/3, 1
    assert quantiles(scalar_ens([1.0, 2.0, 3.0, 4.0]), 0, [1.0 / 3.0]) == [
        pytest.approx(2.0)
    ]


def test_quantile_level_out_of_range():
    with pytest.raises(BadLevel):
        quantiles(scalar_ens([1.0, 2.0]), 0, [1.5])
    with pytest.raises(BadLevel):
        quantiles(scalar_ens([1.0, 2.0]), 0, [0.0])


def test_quantile_pce_requires_sampling_args():
    with pytest.raises(ValueError):
        quantiles(pce_1d([[0.0], [1.0]]), 0, [0.5])


def test_weighted_quantiles_match_uniform_when_weights_equal():
    values = [3.0, 1.0, 4.0, 1.5]
    uniform = quantiles(scalar_ens(values), 0, [0.25, 0.5, 0.75])
    weighted = quantiles(scalar_ens(values, weights=[0.25] * 4), 0, [0.25, 0.5, 0.75])
    assert weighted == uniform


def test_zero_weight_samples_carry_no_mass():
    rv = scalar_ens([5.0, 7.0], weights=[1.0, 0.0])
    for level in (0.1, 0.5, 0.9):
        assert quantiles(rv, 0, [level]) == [5.0]


# ------------------------------------------------------------------------- kde


def test_kde_single_kernel_peak():
    rv = scalar_ens([0.0])
    val = kde_pdf(rv, 0, [0.0], bandwidth=1.0)[0]
    assert val == pytest.approx(1.0 / math.sqrt(2.0 * math.pi), abs=1e-5)


def test_kde_two_kernels_analytic():
    rv = scalar_ens([-1.0, 1.0])
    val = kde_pdf(rv, 0, [0.0], bandwidth=1.0)[0]
    expected = math.exp(-0.5) / math.sqrt(2.0 * math.pi)
    assert val == pytest.approx(expected, rel=1e-12)


def test_kde_far_field_decays():
    rv = scalar_ens([0.0, 1.0, -1.0])
    assert kde_pdf(rv, 0, [50.0], bandwidth=1.0)[0] < 1e-100


def test_kde_integrates_to_one():
    rv = scalar_ens(np.linspace(-1.0, 1.0, 11))
    grid = np.linspace(-10.0, 10.0, 4001)
    density = kde_pdf(rv, 0, grid, bandwidth="auto")
    assert np.trapezoid(density, grid) == pytest.approx(1.0, abs=1e-6)


def test_kde_rejects_bad_bandwidth():
    rv = scalar_ens([0.0, 1.0])
    with pytest.raises(BadBandwidth):
        kde_pdf(rv, 0, [0.0], bandwidth=-1.0)
    with pytest.raises(BadBandwidth):
        kde_pdf(rv, 0, [0.0], bandwidth="silverman")
    with pytest.raises(BadBandwidth):
        kde_pdf(scalar_ens([2.0, 2.0]), 0, [0.0], bandwidth="auto")


# ------------------------------------------------------------------ sampling


def test_sample_pce_evaluates_expansion():
    # deterministic check of the evaluation rule the sampler uses: 1 + 2*xi at xi=0.5
    from cebayes.pce import evaluate_pce

    rv = pce_1d([[1.0], [2.0]])
    assert evaluate_pce(rv, np.array([[0.5]]))[0, 0] == pytest.approx(2.0)


def test_sample_pce_constant_is_deterministic():
    rv = pce_1d([[3.5]])
    ens = sample_pce(rv, 64, seed=1)
    assert np.all(ens.samples == 3.5)
    assert ens.uniform_weights


def test_sample_pce_clt_mean_bound():
    n = 10**5
    rv = pce_1d([[0.0], [1.0]])
    ens = sample_pce(rv, n, seed=123)
    assert abs(mean(ens)[0]) < 3.0 / math.sqrt(n)


def test_sample_pce_moments_match_coefficients():
    # mean/cov from coefficients vs sampled, within 3 standard errors at N=1e5
    n = 10**5
    rv = PCERV(
        germ=GermSpec.gaussian(2),
        indices=((0, 0), (1, 0), (0, 1), (1, 1)),
        coeffs=[[1.0, -0.5], [0.8, 0.2], [0.0, 0.6], [0.3, -0.1]],
    )
    ens = sample_pce(rv, n, seed=99)
    sigma = np.sqrt(np.diag(covariance(rv)))
    assert np.all(np.abs(mean(ens) - mean(rv)) < 3.0 * sigma / math.sqrt(n))
    c_exact, c_mc = covariance(rv), covariance(ens)
    # gaussian-ish standard error for covariance entries
    se = np.sqrt((np.outer(sigma, sigma) ** 2 + np.abs(c_exact) ** 2) / n)
    assert np.all(np.abs(c_mc - c_exact) < 3.0 * se + 1e-12)


def test_uniform_germ_sampling_range():
    rv = PCERV(germ=GermSpec.uniform(1), indices=((0,), (1,)), coeffs=[[0.0], [1.0]])
    ens = sample_pce(rv, 1000, seed=5)
    scaled = ens.samples / math.sqrt(3.0)  # orthonormal Legendre psi_1 = sqrt(3) xi
    assert np.all(np.abs(scaled) <= 1.0)


# ------------------------------------------------------------- serialization


def test_ensemble_csv_round_trip():
    rv = EnsembleRV(samples=[[1.0, -2.0], [0.25, 1e-17]], weights=[0.75, 0.25])
    text = rv.to_csv()
    assert text.splitlines()[0] == "w,x0,x1"
    back = EnsembleRV.from_csv(text)
    assert np.array_equal(back.samples, rv.samples)
    assert np.array_equal(back.weights, rv.weights)


def test_pce_json_round_trip():
    rv = PCERV(
        germ=GermSpec(("gaussian", "uniform")),
        indices=((0, 0), (1, 0), (0, 2)),
        coeffs=[[1.0, 2.0], [-0.125, 3.0], [1e-16, -7.0]],
    )
    back = PCERV.from_json(rv.to_json())
    assert back.germ == rv.germ
    assert back.indices == rv.indices
    assert np.array_equal(back.coeffs, rv.coeffs)


# ------------------------------------------------------------------ properties

finite_floats = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@st.composite
def ensembles(draw, max_n=12, max_d=3):
    n = draw(st.integers(2, max_n))
    d = draw(st.integers(1, max_d))
    samples = draw(
        st.lists(st.lists(finite_floats, min_size=d, max_size=d), min_size=n, max_size=n)
    )
    return EnsembleRV(samples=np.array(samples))


@given(ensembles())
@settings(max_examples=50, deadline=None)
def test_covariance_is_symmetric_psd(rv):
    c = covariance(rv)
    assert np.array_equal(c, c.T)
    eigmin = np.linalg.eigvalsh(c).min()
    assert eigmin >= -1e-10 * max(np.trace(c), 1.0)


@given(ensembles())
@settings(max_examples=50, deadline=None)
def test_cross_covariance_of_self_equals_covariance(rv):
    assert np.array_equal(cross_covariance(rv, rv), covariance(rv))


@given(ensembles())
@settings(max_examples=50, deadline=None)
def test_total_variance_equals_trace(rv):
    assert total_variance(rv) == pytest.approx(np.trace(covariance(rv)), rel=1e-12)


@given(ensembles(max_d=2), st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_affine_map_closure(rv, seed):
    # roundoff is relative to the operand magnitudes, which may cancel
    rng = np.random.default_rng(seed)
    d = rv.dim
    a = rng.uniform(-2.0, 2.0, (d, d))
    b = rng.uniform(-1.0, 1.0, d)
    mapped = EnsembleRV(samples=rv.samples @ a.T + b, weights=rv.weights)
    data_scale = max(1.0, float(np.abs(rv.samples).max()) * float(np.abs(a).max()))
    assert np.allclose(mean(mapped), a @ mean(rv) + b, rtol=0, atol=1e-12 * data_scale)
    cov_expected = a @ covariance(rv) @ a.T
    assert np.allclose(
        covariance(mapped), cov_expected, rtol=0, atol=1e-12 * data_scale**2
    )


def test_moment_summary_from_rv():
    rv = scalar_ens([0.0, 2.0])
    summary = MomentSummary.from_rv(rv)
    assert summary.mean[0] == pytest.approx(1.0)
    assert summary.total_variance == pytest.approx(2.0)
    assert summary.covariance.shape == (1, 1)
