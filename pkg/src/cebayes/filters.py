"""Posterior random-variable construction and sequential assimilation.

All updates share one shape: fix the observation-measurable component of
the forecast at the realized measurement and transport the orthogonal
fluctuation. The linear special case is the Gauss-Markov-Kalman filter;
its ensemble realization is the EnKF; a polynomial observation basis gives
the nonlinear filters. Moment-corrected variants rescale or re-shape the
fluctuation to hit fitted posterior second moments.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import condexp, pce
from .condexp import ObsBasis, OptimalMap, build_obs_basis, evaluate_map
from .errors import (
    MismatchedSampleSpace,
    NegativeTargetVariance,
    NotSPD,
    NumericError,
    TimeGridMismatch,
)
from .rv import (
    EnsembleRV,
    GermSpec,
    MomentSummary,
    PCERV,
    RV,
    _frozen_array,
    _require_same_space,
    covariance,
    cross_covariance,
    mean,
    total_variance,
)
from .seeding import stream_rng

GAIN_PINV_RTOL = 1e-12

UPDATE_KINDS = ("mean-only", "variance-scaled", "covariance-matched", "linear")


@dataclass(frozen=True)
class KalmanGain:
    """Linear-MMSE gain K = cov(x,y) cov(y)^+ with pseudo-inverse metadata."""

    matrix: np.ndarray
    regularized: bool
    cutoff: float

    def __post_init__(self):
        matrix = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        if not np.all(np.isfinite(matrix)):
            raise NumericError("Kalman gain has non-finite entries")
        object.__setattr__(self, "matrix", _frozen_array(matrix))

    def to_dict(self) -> dict:
        return {
            "K": [[float(v) for v in row] for row in self.matrix],
            "regularized": self.regularized,
            "cutoff": float(self.cutoff),
        }


@dataclass(frozen=True)
class UpdateReport:
    """Per-update diagnostics: prior/posterior moments and the estimator used."""

    prior: MomentSummary
    posterior: MomentSummary
    innovation_norm: float
    kind: str
    estimator: KalmanGain | OptimalMap | None = None
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.posterior.total_variance < 0:
            raise NumericError("posterior total variance must be nonnegative")
        parts = self.kind.split("-")
        if self.kind not in UPDATE_KINDS and not (
            parts[0] == "polynomial" and len(parts) == 2 and parts[1].isdigit()
        ):
            raise ValueError(f"unknown update kind {self.kind!r}")

    def to_dict(self) -> dict:
        estimator = None
        if isinstance(self.estimator, KalmanGain):
            estimator = {"gain": self.estimator.to_dict()}
        elif isinstance(self.estimator, OptimalMap):
            estimator = {"map": self.estimator.to_json()}
        return {
            "kind": self.kind,
            "innovation_norm": float(self.innovation_norm),
            "prior": self.prior.to_dict(),
            "posterior": self.posterior.to_dict(),
            "estimator": estimator,
            "notes": dict(self.notes),
        }


def _pinv_psd(matrix: np.ndarray, rtol: float = GAIN_PINV_RTOL):
    """Pseudo-inverse of a symmetric PSD matrix with an explicit cutoff."""
    sym = 0.5 * (matrix + matrix.T)
    eigvals, eigvecs = np.linalg.eigh(sym)
    hi = float(eigvals[-1])
    cutoff = max(hi, 0.0) * rtol
    keep = eigvals > cutoff
    inv = np.zeros_like(eigvals)
    inv[keep] = 1.0 / eigvals[keep]
    pinv = (eigvecs * inv[None, :]) @ eigvecs.T
    return pinv, bool(np.any(~keep)), cutoff


def kalman_gain(x: RV, y: RV) -> KalmanGain:
    """K = cov(x,y) cov(y)^+; flagged when the pseudo-inverse cutoff was active."""
    c_xy = cross_covariance(x, y)
    pinv, regularized, cutoff = _pinv_psd(covariance(y))
    return KalmanGain(matrix=c_xy @ pinv, regularized=regularized, cutoff=cutoff)


def _check_y_hat(y_hat, d_y: int) -> np.ndarray:
    y_hat = np.asarray(y_hat, dtype=float).reshape(-1)
    if y_hat.shape[0] != d_y:
        raise MismatchedSampleSpace(
            f"measurement has dimension {y_hat.shape[0]}, expected {d_y}"
        )
    return y_hat


def _report(x_f, x_a, y_f, y_hat, kind, estimator, notes=None) -> UpdateReport:
    return UpdateReport(
        prior=MomentSummary.from_rv(x_f),
        posterior=MomentSummary.from_rv(x_a),
        innovation_norm=float(np.linalg.norm(y_hat - mean(y_f))),
        kind=kind,
        estimator=estimator,
        notes=notes or {},
    )


def gmkf_update(
    x_f: RV, y_f: RV, y_hat, gain: KalmanGain | None = None
) -> tuple[RV, UpdateReport]:
    """Gauss-Markov-Kalman update x_a = x_f + K (y_hat - y_f), acting on RVs.

    On ensembles this moves every particle; on chaos coefficients the affine
    map acts row-wise, with K y_hat entering the mean row.
    """
    _require_same_space(x_f, y_f)
    y_hat = _check_y_hat(y_hat, y_f.dim)
    if gain is None:
        gain = kalman_gain(x_f, y_f)
    k = gain.matrix
    if isinstance(x_f, EnsembleRV):
        x_a = EnsembleRV(
            samples=x_f.samples + (y_hat[None, :] - y_f.samples) @ k.T,
            weights=x_f.weights,
        )
    else:
        coeffs = x_f.coeffs - y_f.coeffs @ k.T
        coeffs[x_f.zero_row] += k @ y_hat
        x_a = PCERV(germ=x_f.germ, indices=x_f.indices, coeffs=coeffs)
    return x_a, _report(x_f, x_a, y_f, y_hat, "linear", gain)


def enkf_update(x_f: EnsembleRV, y_f: EnsembleRV, y_hat) -> EnsembleRV:
    """Ensemble Kalman filter update: per-particle GMKF with sample covariances."""
    if not isinstance(x_f, EnsembleRV) or not isinstance(y_f, EnsembleRV):
        raise MismatchedSampleSpace("the EnKF acts on ensemble representations")
    x_a, _ = gmkf_update(x_f, y_f, y_hat)
    return x_a


def _fluctuation(x_f: RV, y_f: RV, optimal_map: OptimalMap, grid=None):
    """x_f - phi(y_f) in the RV's own representation, plus truncation info.

    For chaos RVs a nonlinear map is evaluated at quadrature nodes and the
    result re-projected onto the existing index set; the mass lost to the
    truncation is reported.
    """
    if isinstance(x_f, EnsembleRV):
        fluct = x_f.samples - evaluate_map(optimal_map, y_f.samples)
        return fluct, {}
    if optimal_map.basis.degree == 1:
        const, linear = optimal_map.affine_parts()
        coeffs = x_f.coeffs - y_f.coeffs @ linear.T
        coeffs[x_f.zero_row] -= const
        return coeffs, {}
    if grid is None:
        raise ValueError("nonlinear chaos updates need a quadrature grid")
    x_vals = pce.evaluate_pce(x_f, grid.nodes)
    y_vals = pce.evaluate_pce(y_f, grid.nodes)
    fluct_vals = x_vals - evaluate_map(optimal_map, y_vals)
    degree = max(sum(a) for a in x_f.indices)
    index_set = pce.MultiIndexSet(n=x_f.germ.dim, p=degree, indices=x_f.indices)
    projected = pce.project(fluct_vals, grid, index_set, x_f.germ)
    resid = fluct_vals - pce.evaluate_pce(projected, grid.nodes)
    notes = {
        "reprojection_lost_mass": float(grid.weights @ (resid * resid).sum(axis=1)),
    }
    return projected.coeffs.copy(), notes


def _recompose(x_f: RV, fluct, center: np.ndarray, transform=None) -> RV:
    """center + B (fluctuation), matching the input representation."""
    if isinstance(x_f, EnsembleRV):
        moved = fluct if transform is None else fluct @ transform.T
        return EnsembleRV(samples=center[None, :] + moved, weights=x_f.weights)
    coeffs = fluct.copy() if transform is None else fluct @ transform.T
    coeffs[x_f.zero_row] += center
    return PCERV(germ=x_f.germ, indices=x_f.indices, coeffs=coeffs)


def mean_correct_update(
    x_f: RV, y_f: RV, optimal_map: OptimalMap, y_hat, grid=None
) -> tuple[RV, UpdateReport]:
    """Translate the forecast so its mean lands on phi(y_hat).

    The fluctuation x_f - phi(y_f) has zero mean whenever the basis contains
    the constant, so the posterior mean equals the map at the measurement.
    """
    _require_same_space(x_f, y_f)
    y_hat = _check_y_hat(y_hat, y_f.dim)
    center = evaluate_map(optimal_map, y_hat)
    fluct, notes = _fluctuation(x_f, y_f, optimal_map, grid)
    x_a = _recompose(x_f, fluct, center)
    return x_a, _report(x_f, x_a, y_f, y_hat, "mean-only", optimal_map, notes)


def _fluct_total_variance(x_f: RV, fluct) -> float:
    if isinstance(x_f, EnsembleRV):
        return total_variance(EnsembleRV(samples=fluct, weights=x_f.weights))
    mask = np.ones(len(x_f.indices), dtype=bool)
    mask[x_f.zero_row] = False
    return float((fluct[mask] ** 2).sum())


def variance_scaled_update(
    x_f: RV,
    y_f: RV,
    map_x: OptimalMap,
    map_var: OptimalMap,
    y_hat,
    grid=None,
    clamp_negative: bool = False,
) -> tuple[RV, UpdateReport]:
    """Mean correction plus uniform fluctuation scaling to the fitted
    posterior total variance phi_var(y_hat).

    A non-positive fitted target raises unless clamping to zero is asked
    for explicitly; clamping is never silent.
    """
    _require_same_space(x_f, y_f)
    if map_var.out_dim != 1:
        raise ValueError("variance surrogate must be scalar-valued")
    y_hat = _check_y_hat(y_hat, y_f.dim)
    target = float(evaluate_map(map_var, y_hat)[0])
    notes = {"target_total_variance": target}
    if target <= 0.0:
        if not clamp_negative:
            raise NegativeTargetVariance(
                f"fitted posterior total variance {target:.6e} is not positive"
            )
        notes["clamped_from"] = target
        target = 0.0
    center = evaluate_map(map_x, y_hat)
    fluct, extra = _fluctuation(x_f, y_f, map_x, grid)
    notes.update(extra)
    current = _fluct_total_variance(x_f, fluct)
    if current <= 0.0:
        if target > 0.0:
            raise NumericError("cannot scale a zero-variance fluctuation upward")
        scale = 0.0
    else:
        scale = float(np.sqrt(target / current))
    if isinstance(x_f, EnsembleRV):
        scaled = fluct * scale
    else:
        scaled = fluct.copy()
        mask = np.ones(len(x_f.indices), dtype=bool)
        mask[x_f.zero_row] = False
        scaled[mask] *= scale
    x_a = _recompose(x_f, scaled, center)
    return x_a, _report(x_f, x_a, y_f, y_hat, "variance-scaled", map_x, notes)


def _chol_spd(matrix: np.ndarray, name: str) -> np.ndarray:
    sym = 0.5 * (matrix + matrix.T)
    try:
        return np.linalg.cholesky(sym)
    except np.linalg.LinAlgError:
        eigmin = float(np.linalg.eigvalsh(sym).min())
        raise NotSPD(f"{name} is not symmetric positive definite", eigmin) from None


def covariance_match_update(
    x_f: RV,
    y_f: RV,
    map_x: OptimalMap,
    c_a: np.ndarray,
    y_hat,
    grid=None,
) -> tuple[RV, UpdateReport]:
    """Mean correction plus the affine fluctuation transport B_a B_1^{-1}
    that gives the posterior exactly the covariance c_a.

    B_1 and B_a are Cholesky factors; any square root would do.
    """
    _require_same_space(x_f, y_f)
    y_hat = _check_y_hat(y_hat, y_f.dim)
    center = evaluate_map(map_x, y_hat)
    fluct, notes = _fluctuation(x_f, y_f, map_x, grid)
    if isinstance(x_f, EnsembleRV):
        c_1 = covariance(EnsembleRV(samples=fluct, weights=x_f.weights))
    else:
        mask = np.ones(len(x_f.indices), dtype=bool)
        mask[x_f.zero_row] = False
        c_1 = fluct[mask].T @ fluct[mask]
    b_1 = _chol_spd(c_1, "prior fluctuation covariance")
    b_a = _chol_spd(np.asarray(c_a, dtype=float), "target posterior covariance")
    transform = np.linalg.solve(b_1.T, b_a.T).T  # B_a B_1^{-1}
    x_a = _recompose(x_f, fluct, center, transform=transform)
    return x_a, _report(x_f, x_a, y_f, y_hat, "covariance-matched", map_x, notes)


def fit_posterior_covariance(
    x_f: RV,
    y_f: RV,
    map_x: OptimalMap,
    y_hat,
    basis: ObsBasis | None = None,
    grid=None,
) -> tuple[np.ndarray, dict]:
    """Posterior covariance target: fit (x - phi_x(y_hat)) outer products
    entrywise with the observation basis, evaluate at y_hat, symmetrize and
    clip negative eigenvalues at zero (clipped mass is reported)."""
    y_hat = _check_y_hat(y_hat, y_f.dim)
    if basis is None:
        basis = map_x.basis
    y_pts, x_pts, weights = condexp._aligned_points(y_f, x_f, grid)
    dev = x_pts - evaluate_map(map_x, y_hat)[None, :]
    d = dev.shape[1]
    outer = dev[:, :, None] * dev[:, None, :]
    map_cov = condexp.fit_map(
        basis, y_pts, outer.reshape(-1, d * d), weights, target="(x-phi(yhat))^2"
    )
    raw = evaluate_map(map_cov, y_hat).reshape(d, d)
    sym = 0.5 * (raw + raw.T)
    eigvals, eigvecs = np.linalg.eigh(sym)
    clipped = np.clip(eigvals, 0.0, None)
    c_a = (eigvecs * clipped[None, :]) @ eigvecs.T
    info = {"covariance_eig_clipped": float(np.sum(np.minimum(eigvals, 0.0)))}
    return c_a, info


def polynomial_filter_update(
    x_f: RV, y_f: RV, degree: int, y_hat, grid=None, whiten: bool = True
) -> tuple[RV, UpdateReport]:
    """Fit the degree-p optimal map for x and apply the mean correction.

    Degree one coincides with the GMKF on the same inputs.
    """
    if degree < 1:
        raise ValueError("polynomial filter degree must be at least one")
    _require_same_space(x_f, y_f)
    basis = build_obs_basis(y_f.dim, degree)
    optimal_map = condexp.galerkin_solve(basis, y_f, x_f, grid=grid, whiten=whiten)
    x_a, report = mean_correct_update(x_f, y_f, optimal_map, y_hat, grid=grid)
    notes = dict(report.notes)
    notes["mmse_residual"] = condexp.mmse_residual(optimal_map, x_f, y_f, grid=grid)
    return x_a, replace(report, kind=f"polynomial-{degree}", notes=notes)


# --------------------------------------------------------------------------
# Sequential assimilation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class UpdateScheme:
    """Which update to run each assimilation step."""

    kind: str  # gmkf | enkf | polynomial | variance-scaled | covariance-matched
    degree: int = 1
    clamp_negative_variance: bool = False

    KINDS = ("gmkf", "enkf", "polynomial", "variance-scaled", "covariance-matched")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown filter kind {self.kind!r}")
        if self.degree < 1:
            raise ValueError("filter degree must be at least one")


@dataclass(frozen=True)
class AssimilationStep:
    """One forecast/analysis cycle. For chaos runs the forecast and predicted
    observation live on the step's extended germ (state plus noise germs);
    the analysis is recompressed onto the state germ."""

    time: float
    forecast: RV
    obs_pred: RV | None
    analysis: RV
    report: UpdateReport | None


def _apply_scheme(scheme: UpdateScheme, x_f, y_f, y_hat, grid):
    if scheme.kind in ("gmkf", "enkf"):
        if scheme.kind == "enkf" and not isinstance(x_f, EnsembleRV):
            raise MismatchedSampleSpace("the EnKF requires an ensemble prior")
        return gmkf_update(x_f, y_f, y_hat)
    if scheme.kind == "polynomial":
        return polynomial_filter_update(x_f, y_f, scheme.degree, y_hat, grid=grid)
    basis = build_obs_basis(y_f.dim, scheme.degree)
    map_x = condexp.galerkin_solve(basis, y_f, x_f, grid=grid)
    if scheme.kind == "variance-scaled":
        y_pts, x_pts, weights = condexp._aligned_points(y_f, x_f, grid)
        dev = x_pts - evaluate_map(map_x, y_hat)[None, :]
        map_var = condexp.fit_map(
            map_x.basis, y_pts, (dev * dev).sum(axis=1), weights,
            target="|x-phi(yhat)|^2",
        )
        return variance_scaled_update(
            x_f, y_f, map_x, map_var, y_hat, grid=grid,
            clamp_negative=scheme.clamp_negative_variance,
        )
    c_a, info = fit_posterior_covariance(x_f, y_f, map_x, y_hat, grid=grid)
    x_a, report = covariance_match_update(x_f, y_f, map_x, c_a, y_hat, grid=grid)
    notes = dict(report.notes)
    notes.update(info)
    return x_a, replace(report, notes=notes)


def _noise_chol(cov) -> np.ndarray | None:
    if cov is None:
        return None
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if not cov.any():
        return None
    eigvals, eigvecs = np.linalg.eigh(0.5 * (cov + cov.T))
    if eigvals.min() < -1e-10 * max(eigvals.max(), 1.0):
        raise NotSPD("noise covariance is not PSD", float(eigvals.min()))
    return eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))[None, :]


class _EnsembleDriver:
    """Per-particle propagation with independent, reproducible noise streams."""

    def __init__(self, model, prior: EnsembleRV, master_seed, w_label, v_label):
        self.model = model
        self.state = prior
        self.seed = master_seed
        self.w_label = w_label
        self.v_label = v_label
        self.w_chol = _noise_chol(model.dyn_noise_cov)
        self.v_chol = _noise_chol(model.obs_noise_cov)

    def forecast(self, t0, t1, step):
        n = self.state.n_samples
        if self.w_chol is None:
            w = np.zeros((n, self.model.dyn_noise_dim))
        else:
            rng = stream_rng(self.seed, self.w_label, step)
            w = rng.standard_normal((n, self.w_chol.shape[1])) @ self.w_chol.T
        samples = self.model.forecast(self.state.samples, w, t0, t1)
        self.state = EnsembleRV(samples=samples, weights=self.state.weights)
        return self.state

    def predict_obs(self, step):
        n = self.state.n_samples
        if self.v_chol is None:
            v = np.zeros((n, self.model.obs_noise_dim))
        else:
            rng = stream_rng(self.seed, self.v_label, step)
            v = rng.standard_normal((n, self.v_chol.shape[1])) @ self.v_chol.T
        return EnsembleRV(
            samples=self.model.observe(self.state.samples, v),
            weights=self.state.weights,
        )

    def update(self, scheme, x_f, y_f, y_hat):
        x_a, report = _apply_scheme(scheme, self.state, y_f, y_hat, None)
        self.state = x_a
        return x_a, report

    def update_grid(self):
        return None

    def joint_forecast(self):
        return self.state


class _ChaosDriver:
    """Chaos-propagated driver on a fixed-size state germ.

    Noise enters through temporary Gaussian germ extensions; nonlinear maps
    are evaluated at tensor Gauss nodes and projected back. After each
    analysis the state is recompressed onto the base germ: coefficients
    touching only state germs are kept, the linear block is rebuilt from a
    symmetric square root so mean and covariance are preserved exactly, and
    the dropped cross-structure is reported.
    """

    def __init__(self, model, prior: PCERV, master_seed, grid_level: int):
        if prior.germ.dim < prior.dim:
            raise ValueError("state germ must have at least one component per state dim")
        self.model = model
        self.state = prior
        self.base_families = prior.germ.families
        self.level = grid_level
        self.degree = max(sum(a) for a in prior.indices)
        self.w_chol = _noise_chol(model.dyn_noise_cov)
        self.v_chol = _noise_chol(model.obs_noise_cov)
        self._joint_x = None
        self._grid = None

    @property
    def base_dim(self) -> int:
        return len(self.base_families)

    def _canonical(self, germ: GermSpec) -> pce.MultiIndexSet:
        return pce.multi_index_set(germ.dim, self.degree)

    def _pad(self, rv: PCERV, germ: GermSpec, index_set) -> PCERV:
        coeffs = np.zeros((len(index_set.indices), rv.dim))
        lookup = {alpha: i for i, alpha in enumerate(index_set.indices)}
        extra = germ.dim - rv.germ.dim
        for alpha, row in zip(rv.indices, rv.coeffs):
            coeffs[lookup[alpha + (0,) * extra]] = row
        return PCERV(germ=germ, indices=index_set.indices, coeffs=coeffs)

    def forecast(self, t0, t1, step):
        extra = 0 if self.w_chol is None else self.w_chol.shape[1]
        germ = self.state.germ.extended(GermSpec.gaussian(extra)) if extra else self.state.germ
        grid = pce.gauss_grid(germ, self.level)
        x_vals = pce.evaluate_pce(self.state, grid.nodes[:, : self.state.germ.dim])
        if extra:
            w = grid.nodes[:, self.state.germ.dim :] @ self.w_chol.T
        else:
            w = np.zeros((grid.n_nodes, self.model.dyn_noise_dim))
        fx = self.model.forecast(x_vals, w, t0, t1)
        projected = pce.project(fx, grid, self._canonical(germ), germ)
        self.state = self._recompress(projected)
        return self.state

    def predict_obs(self, step):
        extra = 0 if self.v_chol is None else self.v_chol.shape[1]
        germ = self.state.germ.extended(GermSpec.gaussian(extra)) if extra else self.state.germ
        index_set = self._canonical(germ)
        grid = pce.gauss_grid(germ, self.level)
        x_vals = pce.evaluate_pce(self.state, grid.nodes[:, : self.state.germ.dim])
        if extra:
            v = grid.nodes[:, self.state.germ.dim :] @ self.v_chol.T
        else:
            v = np.zeros((grid.n_nodes, self.model.obs_noise_dim))
        hy = self.model.observe(x_vals, v)
        y_f = pce.project(hy, grid, index_set, germ)
        self._joint_x = self._pad(self.state, germ, index_set)
        self._grid = grid
        return y_f

    def update(self, scheme, x_f, y_f, y_hat):
        x_a, report = _apply_scheme(scheme, self._joint_x, y_f, y_hat, self._grid)
        self.state = self._recompress(x_a)
        return x_a, report

    def update_grid(self):
        return self._grid

    def joint_forecast(self):
        return self._joint_x

    def _recompress(self, rv: PCERV) -> PCERV:
        base_n = self.base_dim
        if rv.germ.dim == base_n:
            return rv
        index_set = pce.multi_index_set(base_n, self.degree)
        coeffs = np.zeros((index_set.size, rv.dim))
        lookup = {alpha: i for i, alpha in enumerate(index_set.indices)}
        kept_sq = np.zeros((rv.dim, rv.dim))
        dropped = 0.0
        for alpha, row in zip(rv.indices, rv.coeffs):
            head, tail = alpha[:base_n], alpha[base_n:]
            if any(tail):
                dropped += float(row @ row)
                continue
            if sum(head) == 0:
                coeffs[lookup[head]] = row
            elif sum(head) >= 2:
                coeffs[lookup[head]] = row
                kept_sq += np.outer(row, row)
            else:
                dropped += float(row @ row)  # linear block rebuilt below
        fluct = rv.fluctuation_rows()
        deficit = fluct.T @ fluct - kept_sq
        eigvals, eigvecs = np.linalg.eigh(0.5 * (deficit + deficit.T))
        root = (eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))[None, :]) @ eigvecs.T
        for i in range(rv.dim):
            e_i = tuple(int(j == i) for j in range(base_n))
            coeffs[lookup[e_i]] = root[i]
        return PCERV(
            germ=GermSpec(self.base_families), indices=index_set.indices, coeffs=coeffs
        )


def assimilate_sequence(
    model,
    observations,
    prior: RV,
    scheme: UpdateScheme,
    master_seed: int = 0,
    t0: float = 0.0,
    grid_level: int | None = None,
    w_label: str = "filter.w",
    v_label: str = "filter.v",
) -> list[AssimilationStep]:
    """Alternate forecast, observation prediction and analysis through the
    observation schedule, recording moments at every step.

    Entries with y_hat None are forecast-only: the state is propagated and
    recorded but no update happens (a free run is a schedule of None).
    """
    times = [float(t) for t, _ in observations]
    if any(t2 <= t1 for t1, t2 in zip(times, times[1:])) or (times and times[0] <= t0):
        raise TimeGridMismatch("observation times must be strictly increasing")
    if isinstance(prior, EnsembleRV):
        driver = _EnsembleDriver(model, prior, master_seed, w_label, v_label)
    elif isinstance(prior, PCERV):
        if grid_level is None:
            grid_level = max(sum(a) for a in prior.indices) + 1
        driver = _ChaosDriver(model, prior, master_seed, grid_level)
    else:
        raise TypeError(f"unsupported prior representation {type(prior).__name__}")
    steps: list[AssimilationStep] = []
    t_prev = t0
    for step_index, (t_obs, y_hat) in enumerate(observations):
        x_f = driver.forecast(t_prev, float(t_obs), step_index)
        if y_hat is None:
            steps.append(
                AssimilationStep(
                    time=float(t_obs), forecast=x_f, obs_pred=None,
                    analysis=x_f, report=None,
                )
            )
        else:
            y_f = driver.predict_obs(step_index)
            x_f = driver.joint_forecast()
            x_a, report = driver.update(scheme, x_f, y_f, np.asarray(y_hat, float))
            steps.append(
                AssimilationStep(
                    time=float(t_obs), forecast=x_f, obs_pred=y_f,
                    analysis=x_a, report=report,
                )
            )
        t_prev = float(t_obs)
    return steps
