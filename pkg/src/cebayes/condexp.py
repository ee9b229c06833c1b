"""Conditional expectation as orthogonal projection onto functions of y.

The optimal map phi(y) approximating E[Psi(x)|y] is found by a Galerkin
solve over a monomial basis in the observation: assemble the Gram matrix
G[a,b] = E[psi_a(y) psi_b(y)] and the right-hand side r_a = E[psi_a(y) Psi(x)],
then solve G v = r per output component. Expectations always use the RV's
native measure: weighted sample means for ensembles, germ quadrature for
chaos expansions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import pce
from .errors import MismatchedSampleSpace, ShapeMismatch
from .rv import EnsembleRV, PCERV, RV, _frozen_array, covariance, mean

# Gram eigenvalues at or below max-eigenvalue times this are treated as zero
# and the minimum-norm least-squares solution is returned instead.
PINV_RTOL = 1e-12
CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class ObsBasis:
    """Monomials in the observation up to a total degree, with an optional
    affine pre-transform z = (y - shift) / scale applied before the powers.

    The pre-transform controls Gram conditioning; maps fitted on a
    pre-transformed basis still evaluate in original y units.
    """

    y_dim: int
    degree: int
    terms: tuple[tuple[int, ...], ...]
    shift: np.ndarray = None  # type: ignore[assignment]
    scale: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self):
        shift = np.zeros(self.y_dim) if self.shift is None else np.asarray(self.shift, float)
        scale = np.ones(self.y_dim) if self.scale is None else np.asarray(self.scale, float)
        if shift.shape != (self.y_dim,) or scale.shape != (self.y_dim,):
            raise ShapeMismatch("pre-transform must have one entry per observation component")
        if np.any(scale <= 0):
            raise ValueError("pre-transform scale must be positive")
        object.__setattr__(self, "terms", tuple(tuple(t) for t in self.terms))
        object.__setattr__(self, "shift", _frozen_array(shift))
        object.__setattr__(self, "scale", _frozen_array(scale))

    @property
    def size(self) -> int:
        return len(self.terms)

    @property
    def has_identity_transform(self) -> bool:
        return bool(np.all(self.shift == 0.0) and np.all(self.scale == 1.0))

    def design_matrix(self, y_points: np.ndarray) -> np.ndarray:
        """Rows psi_a(y_j) for each point, after the pre-transform."""
        y = np.atleast_2d(np.asarray(y_points, dtype=float))
        if y.shape[1] != self.y_dim:
            raise ShapeMismatch(f"expected observations of dimension {self.y_dim}")
        z = (y - self.shift) / self.scale
        max_deg = [max(t[i] for t in self.terms) for i in range(self.y_dim)]
        powers = [
            np.power(z[:, i][:, None], np.arange(max_deg[i] + 1)[None, :])
            for i in range(self.y_dim)
        ]
        out = np.ones((y.shape[0], self.size))
        for col, alpha in enumerate(self.terms):
            for i, a in enumerate(alpha):
                if a:
                    out[:, col] *= powers[i][:, a]
        return out

    def with_transform(self, shift, scale) -> "ObsBasis":
        return ObsBasis(self.y_dim, self.degree, self.terms, shift, scale)

    def to_dict(self) -> dict:
        return {
            "y_dim": self.y_dim,
            "degree": self.degree,
            "terms": [list(t) for t in self.terms],
            "shift": [float(v) for v in self.shift],
            "scale": [float(v) for v in self.scale],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ObsBasis":
        return cls(
            y_dim=int(doc["y_dim"]),
            degree=int(doc["degree"]),
            terms=tuple(tuple(t) for t in doc["terms"]),
            shift=np.array(doc["shift"], float),
            scale=np.array(doc["scale"], float),
        )


def build_obs_basis(y_dim: int, degree: int) -> ObsBasis:
    """Monomial basis of total degree <= degree; always contains the constant
    and, for degree >= 1, every linear monomial."""
    if degree < 1:
        raise ValueError("observation basis degree must be at least one")
    terms = pce.multi_index_set(y_dim, degree).indices
    return ObsBasis(y_dim=y_dim, degree=degree, terms=terms)


@dataclass(frozen=True)
class GramMatrix:
    matrix: np.ndarray
    basis: ObsBasis
    condition: float

    def __post_init__(self):
        object.__setattr__(self, "matrix", _frozen_array(self.matrix))


@dataclass(frozen=True)
class OptimalMap:
    """Galerkin-fitted map phi(y) = sum_a v_a psi_a(y) approximating E[target|y]."""

    basis: ObsBasis
    coeffs: np.ndarray
    target: str = "x"
    regularized: bool = False
    condition: float = field(default=float("nan"))

    def __post_init__(self):
        coeffs = np.atleast_2d(np.asarray(self.coeffs, dtype=float))
        if coeffs.shape[0] != self.basis.size:
            raise ShapeMismatch("one coefficient row per basis term required")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("map coefficients must be finite")
        object.__setattr__(self, "coeffs", _frozen_array(coeffs))

    @property
    def out_dim(self) -> int:
        return self.coeffs.shape[1]

    def affine_parts(self) -> tuple[np.ndarray, np.ndarray]:
        """(constant, linear) of a degree-1 map, expressed in original y units."""
        if self.basis.degree != 1:
            raise ValueError("affine_parts is only defined for degree-1 maps")
        const = self.coeffs[0].copy()
        linear = np.zeros((self.out_dim, self.basis.y_dim))
        for row, alpha in enumerate(self.basis.terms):
            if sum(alpha) == 1:
                i = alpha.index(1)
                linear[:, i] = self.coeffs[row] / self.basis.scale[i]
        const = const - linear @ self.basis.shift
        return const, linear

    def to_json(self) -> str:
        return json.dumps(
            {
                "basis": self.basis.to_dict(),
                "coeffs": [[f"{v:.17g}" for v in row] for row in self.coeffs],
                "target": self.target,
                "regularized": self.regularized,
                "condition": float(self.condition),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "OptimalMap":
        doc = json.loads(text)
        return cls(
            basis=ObsBasis.from_dict(doc["basis"]),
            coeffs=np.array([[float(v) for v in row] for row in doc["coeffs"]]),
            target=doc["target"],
            regularized=bool(doc["regularized"]),
            condition=float(doc["condition"]),
        )


def observation_points(y: RV, grid: pce.QuadratureGrid | None = None):
    """(points, weights) carrying the RV's native expectation."""
    if isinstance(y, EnsembleRV):
        return y.samples, y.weights
    if grid is None:
        raise ValueError("a quadrature grid is required for chaos-represented RVs")
    if grid.germ != y.germ:
        raise MismatchedSampleSpace("quadrature grid germ differs from the RV germ")
    return pce.evaluate_pce(y, grid.nodes), grid.weights


def _aligned_points(y: RV, psi_x: RV, grid):
    if isinstance(y, EnsembleRV) and isinstance(psi_x, EnsembleRV):
        if y.n_samples != psi_x.n_samples or not np.allclose(
            y.weights, psi_x.weights, rtol=0.0, atol=1e-12
        ):
            raise MismatchedSampleSpace("observation and target ensembles differ")
        return y.samples, psi_x.samples, y.weights
    if isinstance(y, PCERV) and isinstance(psi_x, PCERV):
        if y.germ != psi_x.germ:
            raise MismatchedSampleSpace("observation and target germs differ")
        y_pts, w = observation_points(y, grid)
        return y_pts, pce.evaluate_pce(psi_x, grid.nodes), w
    raise MismatchedSampleSpace(
        f"cannot mix representations {type(y).__name__} and {type(psi_x).__name__}"
    )


def _gram_eig(basis: ObsBasis, y_pts, weights):
    phi = basis.design_matrix(y_pts)
    g = phi.T @ (weights[:, None] * phi)
    g = 0.5 * (g + g.T)
    eigvals = np.linalg.eigvalsh(g)
    lo, hi = float(eigvals[0]), float(eigvals[-1])
    condition = float("inf") if lo <= 0.0 else hi / lo
    return phi, g, condition


def gram(basis: ObsBasis, y: RV, grid: pce.QuadratureGrid | None = None) -> GramMatrix:
    """Gram matrix of the basis under the observation's distribution.

    Ill-conditioning is reported in the condition estimate, never raised.
    """
    y_pts, weights = observation_points(y, grid)
    _, g, condition = _gram_eig(basis, y_pts, weights)
    return GramMatrix(matrix=g, basis=basis, condition=condition)


def _solve_gram(g: np.ndarray, r: np.ndarray):
    """Solve G v = r; minimum-norm least squares when singular or condition > 1e12."""
    eigvals, eigvecs = np.linalg.eigh(g)
    hi = float(eigvals[-1])
    cutoff = hi * PINV_RTOL
    condition = float("inf") if eigvals[0] <= 0.0 else hi / float(eigvals[0])
    if hi <= 0.0:
        return np.zeros_like(r), True, condition
    if eigvals[0] <= cutoff or condition > CONDITION_LIMIT:
        inv = np.zeros_like(eigvals)
        keep = eigvals > cutoff
        inv[keep] = 1.0 / eigvals[keep]
        v = eigvecs @ (inv[:, None] * (eigvecs.T @ r))
        return v, True, condition
    return np.linalg.solve(g, r), False, condition


def whitened_basis(basis: ObsBasis, y: RV) -> ObsBasis:
    """Center and scale the basis by the observation's mean and std.

    Components with (near) zero spread keep unit scale so degenerate
    observations still assemble.
    """
    mu = mean(y)
    var = np.diag(covariance(y)).copy()
    std = np.sqrt(np.maximum(var, 0.0))
    std[std <= 1e-300] = 1.0
    return basis.with_transform(mu, std)


def galerkin_solve(
    basis: ObsBasis,
    y: RV,
    psi_x: RV,
    grid: pce.QuadratureGrid | None = None,
    whiten: bool = True,
    target: str = "x",
) -> OptimalMap:
    """Fit the optimal map for E[psi_x | y] over the given basis.

    With whiten=True (the default) a basis with an identity pre-transform is
    first centered and scaled by the observation's moments; this changes the
    conditioning but not the fitted function.
    """
    y_pts, targets, weights = _aligned_points(y, psi_x, grid)
    if whiten and basis.has_identity_transform:
        basis = whitened_basis(basis, y)
    return fit_map(basis, y_pts, targets, weights, target=target)


def fit_map(basis: ObsBasis, y_pts, targets, weights, target: str = "x") -> OptimalMap:
    """Galerkin solve against raw point values (shared by RV and node paths)."""
    targets = np.asarray(targets, dtype=float)
    if targets.ndim == 1:
        targets = targets[:, None]
    phi = basis.design_matrix(y_pts)
    g = phi.T @ (weights[:, None] * phi)
    g = 0.5 * (g + g.T)
    r = phi.T @ (weights[:, None] * targets)
    v, regularized, condition = _solve_gram(g, r)
    return OptimalMap(
        basis=basis, coeffs=v, target=target, regularized=regularized, condition=condition
    )


def evaluate_map(optimal_map: OptimalMap, y_value) -> np.ndarray:
    """phi(y) at a single observation vector or a batch of them."""
    y = np.asarray(y_value, dtype=float)
    single = y.ndim == 1
    values = optimal_map.basis.design_matrix(np.atleast_2d(y)) @ optimal_map.coeffs
    return values[0] if single else values


def mmse_residual(
    optimal_map: OptimalMap,
    psi_x: RV,
    y: RV,
    grid: pce.QuadratureGrid | None = None,
) -> float:
    """Achieved minimum E||psi_x - phi(y)||^2 under the native expectation."""
    y_pts, targets, weights = _aligned_points(y, psi_x, grid)
    residual = targets - optimal_map.basis.design_matrix(y_pts) @ optimal_map.coeffs
    return float(weights @ (residual * residual).sum(axis=1))


def orthogonality_defect(
    optimal_map: OptimalMap,
    psi_x: RV,
    y: RV,
    grid: pce.QuadratureGrid | None = None,
) -> tuple[float, float]:
    """(max_a |E[psi_a(y) (target - phi(y))]|, ||r||_inf) for diagnostics."""
    y_pts, targets, weights = _aligned_points(y, psi_x, grid)
    phi = optimal_map.basis.design_matrix(y_pts)
    residual = targets - phi @ optimal_map.coeffs
    defect = phi.T @ (weights[:, None] * residual)
    r = phi.T @ (weights[:, None] * targets)
    return float(np.abs(defect).max()), float(np.abs(r).max())
