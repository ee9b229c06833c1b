"""Multi-index sets, orthonormal polynomial bases, Gauss grids, projection.

Bases are orthonormal w.r.t. the germ's probability measure: normalized
probabilists' Hermite for Gaussian germs, normalized Legendre for
Uniform(-1,1) germs. Quadrature weights are normalized to sum to one, so
integrals read as expectations.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch, UnsupportedFamily
from .rv import GAUSSIAN, UNIFORM, GermSpec, PCERV, _frozen_array


def _graded_indices(n: int, degree: int):
    # graded lexicographic: total degree ascending, first component descending
    def compositions(total, parts):
        if parts == 1:
            yield (total,)
            return
        for head in range(total, -1, -1):
            for tail in compositions(total - head, parts - 1):
                yield (head,) + tail

    for d in range(degree + 1):
        yield from compositions(d, n)


@dataclass(frozen=True)
class MultiIndexSet:
    """All multi-indices of n nonnegative integers with total degree <= p."""

    n: int
    p: int
    indices: tuple[tuple[int, ...], ...]

    @property
    def size(self) -> int:
        return len(self.indices)

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "p": self.p, "indices": [list(a) for a in self.indices]})


def multi_index_set(n: int, p: int) -> MultiIndexSet:
    """Total-degree set in graded-lex order; nested as a prefix in p."""
    if n < 1:
        raise ValueError("germ dimension must be at least one")
    if p < 0:
        raise ValueError("degree must be nonnegative")
    indices = tuple(_graded_indices(n, p))
    assert len(indices) == math.comb(n + p, p)
    return MultiIndexSet(n=n, p=p, indices=indices)


def _hermite_orthonormal(max_degree: int, x: np.ndarray) -> np.ndarray:
    """psi_0..psi_k at x for the normalized probabilists' Hermite family."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (max_degree + 1,))
    out[..., 0] = 1.0
    if max_degree >= 1:
        out[..., 1] = x
    for k in range(1, max_degree):
        # psi_{k+1} = (x psi_k - sqrt(k) psi_{k-1}) / sqrt(k+1)
        out[..., k + 1] = (x * out[..., k] - math.sqrt(k) * out[..., k - 1]) / math.sqrt(k + 1)
    return out

def _legendre_orthonormal(max_degree: int, x: np.ndarray) -> np.ndarray:
    """psi_k = sqrt(2k+1) P_k, orthonormal for the Uniform(-1,1) germ."""
    x = np.asarray(x, dtype=float)
    p = np.empty(x.shape + (max_degree + 1,))
    p[..., 0] = 1.0
    if max_degree >= 1:
        p[..., 1] = x
    for k in range(1, max_degree):
        p[..., k + 1] = ((2 * k + 1) * x * p[..., k] - k * p[..., k - 1]) / (k + 1)
    scale = np.sqrt(2.0 * np.arange(max_degree + 1) + 1.0)
    return p * scale


_UNIVARIATE = {GAUSSIAN: _hermite_orthonormal, UNIFORM: _legendre_orthonormal}


def eval_basis(alpha, xi, germ: GermSpec) -> float:
    """Evaluate the product basis function psi_alpha at one germ point."""
    alpha = tuple(int(a) for a in alpha)
    xi = np.asarray(xi, dtype=float).reshape(-1)
    if len(alpha) != germ.dim or xi.shape[0] != germ.dim:
        raise ShapeMismatch("multi-index, point, and germ dimension must agree")
    value = 1.0
    for a, x, fam in zip(alpha, xi, germ.families):
        value *= _UNIVARIATE[fam](a, np.array(x))[..., a]
    return float(value)


def eval_basis_matrix(indices, points: np.ndarray, germ: GermSpec) -> np.ndarray:
    """Matrix of psi_alpha(xi_j): one row per point, one column per index."""
    indices = [tuple(a) for a in indices]
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != germ.dim:
        raise ShapeMismatch("points must have one column per germ component")
    max_deg = [max((a[i] for a in indices), default=0) for i in range(germ.dim)]
    uni = [
        _UNIVARIATE[fam](max_deg[i], points[:, i])
        for i, fam in enumerate(germ.families)
    ]
    out = np.ones((points.shape[0], len(indices)))
    for col, alpha in enumerate(indices):
        for i, a in enumerate(alpha):
            if a:
                out[:, col] *= uni[i][:, a]
    return out


def evaluate_pce(rv: PCERV, points: np.ndarray) -> np.ndarray:
    """Realizations of the expansion at given germ points, shape (m, d)."""
    return eval_basis_matrix(rv.indices, points, rv.germ) @ rv.coeffs


@dataclass(frozen=True)
class QuadratureGrid:
    """Full tensor Gauss grid matched to a germ, probabilist normalization."""

    germ: GermSpec
    level: int
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "nodes", _frozen_array(self.nodes))
        object.__setattr__(self, "weights", _frozen_array(self.weights))

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    def to_json(self) -> str:
        return json.dumps(
            {
                "germ": list(self.germ.families),
                "level": self.level,
                "nodes": [[f"{v:.17g}" for v in row] for row in self.nodes],
                "weights": [f"{v:.17g}" for v in self.weights],
            }
        )


def _gauss_rule(family: str, level: int):
    if family == GAUSSIAN:
        nodes, weights = np.polynomial.hermite_e.hermegauss(level)
        return nodes, weights / math.sqrt(2.0 * math.pi)
    if family == UNIFORM:
        nodes, weights = np.polynomial.legendre.leggauss(level)
        return nodes, weights / 2.0
    raise UnsupportedFamily(f"unsupported germ family {family!r}")


def gauss_grid(germ: GermSpec, level: int) -> QuadratureGrid:
    """Tensor product of level-point Gauss rules, one per germ component.

    Exact for integrands of per-dimension polynomial degree <= 2*level - 1.
    """
    if level < 1:
        raise ValueError("quadrature level must be at least one")
    rules = [_gauss_rule(fam, level) for fam in germ.families]
    idx = np.array(list(itertools.product(*[range(level)] * germ.dim)))
    nodes = np.column_stack([rules[i][0][idx[:, i]] for i in range(germ.dim)])
    weights = np.ones(idx.shape[0])
    for i in range(germ.dim):
        weights *= rules[i][1][idx[:, i]]
    return QuadratureGrid(germ=germ, level=level, nodes=nodes, weights=weights)


def project(values, grid: QuadratureGrid, basis: MultiIndexSet, germ: GermSpec) -> PCERV:
    """Non-intrusive projection: coefficients c_a = E[f psi_a] by quadrature.

    The caller guarantees the grid is exact enough for the integrands.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if values.shape[0] != grid.n_nodes:
        raise ShapeMismatch(
            f"got {values.shape[0]} value rows for {grid.n_nodes} grid nodes"
        )
    if germ != grid.germ:
        raise ShapeMismatch("grid and projection germ differ")
    psi = eval_basis_matrix(basis.indices, grid.nodes, germ)
    coeffs = psi.T @ (grid.weights[:, None] * values)
    return PCERV(germ=germ, indices=basis.indices, coeffs=coeffs)


def project_regression(
    values, xi_samples: np.ndarray, basis: MultiIndexSet, germ: GermSpec
) -> PCERV:
    """Least-squares fallback on sampled germ points, for when grids blow up."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    xi_samples = np.atleast_2d(np.asarray(xi_samples, dtype=float))
    if values.shape[0] != xi_samples.shape[0]:
        raise ShapeMismatch("one value row per sampled germ point required")
    psi = eval_basis_matrix(basis.indices, xi_samples, germ)
    coeffs, *_ = np.linalg.lstsq(psi, values, rcond=None)
    return PCERV(germ=germ, indices=basis.indices, coeffs=coeffs)
