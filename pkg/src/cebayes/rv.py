"""Random vectors with finite variance, in two concrete representations.

An EnsembleRV is a weighted cloud of realizations (the particles of an
ensemble filter); a PCERV is a set of coefficients over an orthonormal
polynomial basis in independent standard germs. Both support the same
moment algebra, which is all the filters need.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadBandwidth,
    BadLevel,
    MismatchedSampleSpace,
    NotSPD,
    UnsupportedFamily,
)

GAUSSIAN = "gaussian"
UNIFORM = "uniform"
_FAMILIES = (GAUSSIAN, UNIFORM)

_WEIGHT_TOL = 1e-12


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class GermSpec:
    """n independent standard scalar germs, each Gaussian(0,1) or Uniform(-1,1)."""

    families: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "families", tuple(self.families))
        if len(self.families) < 1:
            raise UnsupportedFamily("germ needs at least one component")
        for fam in self.families:
            if fam not in _FAMILIES:
                raise UnsupportedFamily(f"unsupported germ family {fam!r}")

    @property
    def dim(self) -> int:
        return len(self.families)

    @classmethod
    def gaussian(cls, n: int) -> "GermSpec":
        return cls((GAUSSIAN,) * n)

    @classmethod
    def uniform(cls, n: int) -> "GermSpec":
        return cls((UNIFORM,) * n)

    def extended(self, other: "GermSpec") -> "GermSpec":
        return GermSpec(self.families + other.families)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Draw count iid germ vectors, column by column, shape (count, n)."""
        cols = []
        for fam in self.families:
            if fam == GAUSSIAN:
                cols.append(rng.standard_normal(count))
            else:
                cols.append(rng.uniform(-1.0, 1.0, count))
        return np.column_stack(cols)


@dataclass(frozen=True)
class EnsembleRV:
    """N weighted samples of a d-dimensional random vector.

    samples has shape (N, d); weights are nonnegative and sum to one.
    Values are immutable after construction.
    """

    samples: np.ndarray
    weights: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self):
        samples = np.atleast_2d(np.asarray(self.samples, dtype=float))
        if samples.ndim != 2:
            raise ValueError("samples must be a (N, d) matrix")
        n = samples.shape[0]
        if n < 1:
            raise ValueError("need at least one sample")
        if not np.all(np.isfinite(samples)):
            raise ValueError("sample entries must be finite")
        if self.weights is None:
            weights = np.full(n, 1.0 / n)
        else:
            weights = np.asarray(self.weights, dtype=float).reshape(-1)
            if weights.shape[0] != n:
                raise ValueError("weights must have one entry per sample")
            if np.any(weights < 0):
                raise ValueError("weights must be nonnegative")
            if abs(weights.sum() - 1.0) > _WEIGHT_TOL:
                raise ValueError("weights must sum to 1 within 1e-12")
        object.__setattr__(self, "samples", _frozen_array(samples))
        object.__setattr__(self, "weights", _frozen_array(weights))

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def uniform_weights(self) -> bool:
        return bool(np.all(self.weights == self.weights[0]))

    def component(self, index: int) -> np.ndarray:
        return self.samples[:, index]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["w"] + [f"x{i}" for i in range(self.dim)])
        for w, row in zip(self.weights, self.samples):
            writer.writerow([f"{w:.17g}"] + [f"{v:.17g}" for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "EnsembleRV":
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], rows[1:]
        if header[0] != "w":
            raise ValueError("ensemble CSV must start with a 'w' column")
        data = np.array([[float(v) for v in row] for row in body])
        return cls(samples=data[:, 1:], weights=data[:, 0])


@dataclass(frozen=True)
class PCERV:
    """Polynomial chaos coefficients over a multi-index set in a germ.

    coeffs has one row per multi-index and one column per state component.
    The basis is orthonormal, so the zero-index row is the mean and the
    remaining rows carry the fluctuation.
    """

    germ: GermSpec
    indices: tuple[tuple[int, ...], ...]
    coeffs: np.ndarray

    def __post_init__(self):
        indices = tuple(tuple(int(e) for e in alpha) for alpha in self.indices)
        coeffs = np.atleast_2d(np.asarray(self.coeffs, dtype=float))
        n = self.germ.dim
        if any(len(alpha) != n for alpha in indices):
            raise ValueError("every multi-index must have one entry per germ")
        if len(set(indices)) != len(indices):
            raise ValueError("multi-indices must be unique")
        if (0,) * n not in indices:
            raise ValueError("index set must contain the zero multi-index")
        if coeffs.shape[0] != len(indices):
            raise ValueError("one coefficient row per multi-index required")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "coeffs", _frozen_array(coeffs))

    @property
    def dim(self) -> int:
        return self.coeffs.shape[1]

    @property
    def zero_row(self) -> int:
        return self.indices.index((0,) * self.germ.dim)

    def fluctuation_rows(self) -> np.ndarray:
        mask = np.ones(len(self.indices), dtype=bool)
        mask[self.zero_row] = False
        return self.coeffs[mask]

    @classmethod
    def affine(cls, germ: GermSpec, mean, linear) -> "PCERV":
        """Degree-one chaos: mean plus linear (n, d) loading on the germ."""
        mean = np.asarray(mean, dtype=float).reshape(-1)
        linear = np.atleast_2d(np.asarray(linear, dtype=float))
        n = germ.dim
        if linear.shape != (n, mean.shape[0]):
            raise ValueError("linear block must be (germ dim, state dim)")
        indices = [(0,) * n] + [tuple(int(i == j) for j in range(n)) for i in range(n)]
        coeffs = np.vstack([mean, linear])
        return cls(germ=germ, indices=tuple(indices), coeffs=coeffs)

    def to_json(self) -> str:
        return json.dumps(
            {
                "germ": list(self.germ.families),
                "indices": [list(alpha) for alpha in self.indices],
                "coeffs": [[f"{v:.17g}" for v in row] for row in self.coeffs],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "PCERV":
        doc = json.loads(text)
        return cls(
            germ=GermSpec(tuple(doc["germ"])),
            indices=tuple(tuple(a) for a in doc["indices"]),
            coeffs=np.array([[float(v) for v in row] for row in doc["coeffs"]]),
        )


RV = EnsembleRV | PCERV


@dataclass(frozen=True)
class MomentSummary:
    """Mean, covariance and total variance of a random vector."""

    mean: np.ndarray
    covariance: np.ndarray
    total_variance: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        cov = 0.5 * (cov + cov.T)
        trace = float(np.trace(cov))
        eigmin = float(np.linalg.eigvalsh(cov).min()) if cov.size else 0.0
        if eigmin < -1e-10 * max(trace, 1.0):
            raise NotSPD("covariance is not PSD", smallest_eigenvalue=eigmin)
        object.__setattr__(self, "mean", _frozen_array(mean))
        object.__setattr__(self, "covariance", _frozen_array(cov))
        object.__setattr__(self, "total_variance", trace)

    @classmethod
    def from_rv(cls, rv: RV) -> "MomentSummary":
        return cls(mean=mean(rv), covariance=covariance(rv))

    def to_dict(self) -> dict:
        return {
            "mean": [float(v) for v in self.mean],
            "covariance": [[float(v) for v in row] for row in self.covariance],
            "total_variance": float(self.total_variance),
        }


def _require_same_space(x: RV, y: RV) -> None:
    if isinstance(x, EnsembleRV) and isinstance(y, EnsembleRV):
        if x.n_samples != y.n_samples or not np.allclose(
            x.weights, y.weights, rtol=0.0, atol=_WEIGHT_TOL
        ):
            raise MismatchedSampleSpace(
                "ensembles differ in sample count or weights"
            )
    elif isinstance(x, PCERV) and isinstance(y, PCERV):
        if x.germ != y.germ or x.indices != y.indices:
            raise MismatchedSampleSpace("chaos expansions differ in germ or index set")
    else:
        raise MismatchedSampleSpace(
            f"cannot mix representations {type(x).__name__} and {type(y).__name__}"
        )


def mean(rv: RV) -> np.ndarray:
    """Expectation: weighted sample average, or the zero-index coefficient row."""
    if isinstance(rv, EnsembleRV):
        return rv.weights @ rv.samples
    return rv.coeffs[rv.zero_row].copy()


def cross_covariance(rv_x: RV, rv_y: RV) -> np.ndarray:
    """Unbiased cross-covariance of two RVs on the same sample space."""
    _require_same_space(rv_x, rv_y)
    if isinstance(rv_x, EnsembleRV):
        if rv_x.n_samples < 2:
            raise ValueError("covariance needs at least two samples")
        w = rv_x.weights
        denom = 1.0 - float(w @ w)
        if denom <= 0.0:
            raise ValueError("effective sample size is one; covariance undefined")
        dx = rv_x.samples - mean(rv_x)
        dy = rv_y.samples - mean(rv_y)
        cov = (dx * w[:, None]).T @ dy / denom
    else:
        cov = rv_x.fluctuation_rows().T @ rv_y.fluctuation_rows()
    if rv_x is rv_y:
        cov = 0.5 * (cov + cov.T)
    return cov


def covariance(rv: RV) -> np.ndarray:
    """Unbiased auto-covariance (divisor N-1 for uniform ensemble weights)."""
    return cross_covariance(rv, rv)


def total_variance(rv: RV) -> float:
    return float(np.trace(covariance(rv)))


def _as_scalar_samples(rv: RV, component: int, sample_count, seed):
    if isinstance(rv, PCERV):
        if sample_count is None or seed is None:
            raise ValueError(
                "a chaos-represented RV must be sampled first; pass sample_count and seed"
            )
        rv = sample_pce(rv, sample_count, seed)
    return rv.component(component), rv.weights


def quantiles(
    rv: RV,
    component: int,
    levels,
    sample_count: int | None = None,
    seed=None,
) -> list[float]:
    """Empirical quantiles, linear interpolation between order statistics.

    The k-th of N order statistics sits at probability (k-1)/(N-1); the
    weighted case generalizes this with cumulative weights so that the
    uniform case is recovered exactly.
    """
    levels = [float(l) for l in np.atleast_1d(levels)]
    for level in levels:
        if not 0.0 < level < 1.0:
            raise BadLevel(f"quantile level {level} outside (0, 1)")
    values, weights = _as_scalar_samples(rv, component, sample_count, seed)
    keep = weights > 0.0  # zero-weight samples carry no probability mass
    values, weights = values[keep], weights[keep]
    order = np.argsort(values, kind="stable")
    v = values[order]
    w = weights[order]
    n = v.shape[0]
    if n == 1:
        return [float(v[0])] * len(levels)
    if w[-1] >= 1.0 - _WEIGHT_TOL:
        return [float(v[-1])] * len(levels)
    if np.all(w == w[0]):
        positions = np.arange(n) / (n - 1)
    else:
        positions = (np.cumsum(w) - w) / (1.0 - w[-1])
    return [float(np.interp(level, positions, v)) for level in levels]


def kde_pdf(
    rv: RV,
    component: int,
    grid,
    bandwidth="auto",
    sample_count: int | None = None,
    seed=None,
) -> np.ndarray:
    """Gaussian-kernel density estimate at the grid points.

    Output machinery only; the filters themselves never touch densities.
    """
    values, weights = _as_scalar_samples(rv, component, sample_count, seed)
    grid = np.asarray(grid, dtype=float).reshape(-1)
    if isinstance(bandwidth, str):
        if bandwidth != "auto":
            raise BadBandwidth(f"bandwidth must be positive or 'auto', got {bandwidth!r}")
        mu = float(weights @ values)
        denom = 1.0 - float(weights @ weights)
        if denom <= 0.0:
            raise BadBandwidth("auto bandwidth undefined for a single effective sample")
        sigma = math.sqrt(float(weights @ (values - mu) ** 2) / denom)
        if sigma == 0.0:
            raise BadBandwidth("auto bandwidth undefined for zero sample variance")
        h = 1.06 * sigma * values.shape[0] ** (-0.2)
    else:
        h = float(bandwidth)
        if not h > 0.0 or not math.isfinite(h):
            raise BadBandwidth(f"bandwidth must be positive, got {bandwidth}")
    z = (grid[:, None] - values[None, :]) / h
    kernel = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    return (kernel * weights[None, :]).sum(axis=1) / h


def sample_pce(rv: PCERV, count: int, seed) -> EnsembleRV:
    """Draw count iid germ realizations and evaluate the expansion at each."""
    from . import pce  # deferred import; pce builds on the types defined here

    if count < 1:
        raise ValueError("count must be at least one")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    xi = rv.germ.sample(rng, count)
    basis = pce.eval_basis_matrix(rv.indices, xi, rv.germ)
    return EnsembleRV(samples=basis @ rv.coeffs)
