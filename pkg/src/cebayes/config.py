"""Declarative experiment configuration.

Configs are JSON text with a closed schema: every key is either consumed or
rejected, defaults are filled in explicitly, and the raw byte stream is
hashed into the result manifest so bundles are traceable to their exact
input.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ParseError, UnknownFilter, UnknownModel, ValidationError
from .filters import UpdateScheme
from .models import (
    CubicToyModel,
    LinearGaussianModel,
    Lorenz84Model,
    Lorenz84ParamFModel,
    Lorenz84Params,
    Model,
)

MODEL_IDS = ("lorenz84", "lorenz84-fid", "cubic-toy", "linear-gaussian")
FILTER_KINDS = UpdateScheme.KINDS

DEFAULT_QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)

_MODEL_PARAM_KEYS = {
    "lorenz84": {"a", "b", "F", "G", "dt", "substeps", "obs", "obs_sigma"},
    "lorenz84-fid": {"a", "b", "F", "G", "dt", "substeps", "obs_sigma"},
    "cubic-toy": {"sigma_v"},
    "linear-gaussian": {"A", "H", "Q", "R"},
}

_LINEAR_GAUSSIAN_DEFAULTS = {
    "A": [[0.95, 0.1], [0.0, 0.9]],
    "H": [[1.0, 0.0]],
    "Q": [[0.02, 0.0], [0.0, 0.02]],
    "R": [[0.04]],
}


def _reject_unknown(section, allowed: set[str], where: str) -> None:
    if not isinstance(section, dict):
        raise ValidationError(where, "must be a JSON object")
    unknown = set(section) - allowed
    if unknown:
        raise ValidationError(where, f"unknown keys {sorted(unknown)}")


@dataclass(frozen=True)
class Representation:
    kind: str  # ensemble | pce
    n: int = 0            # ensemble size
    germ_dim: int = 0     # pce
    degree: int = 1       # pce
    grid_level: int = 0   # pce


@dataclass(frozen=True)
class PdfSpec:
    steps: tuple[int, ...]
    components: tuple[int, ...] | None
    grid: tuple[float, float, int] | str
    bandwidth: float | str


@dataclass(frozen=True)
class OutputSpec:
    directory: str | None
    quantiles: tuple[float, ...]
    quantile_samples: int
    pdf: PdfSpec | None
    metrics: tuple[str, ...]


@dataclass(frozen=True)
class ExperimentConfig:
    raw_text: str
    model_id: str
    model_params: dict
    truth_init: tuple[float, ...] | None
    truth_spinup: float
    prior_mean: tuple[float, ...]
    prior_cov: tuple[tuple[float, ...], ...]
    representation: Representation
    scheme: UpdateScheme
    obs_times: tuple[float, ...]
    seed: int
    output: OutputSpec

    def config_hash(self) -> str:
        return hashlib.sha256(self.raw_text.encode("utf-8")).hexdigest()


def _as_matrix(value, name: str, size: int | None = None) -> np.ndarray:
    """Accept a full matrix, a diagonal vector, or an isotropic scalar."""
    if isinstance(value, (int, float)):
        if size is None:
            raise ValidationError(name, "scalar covariance needs a known dimension")
        return float(value) * np.eye(size)
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 1:
        return np.diag(arr)
    if arr.ndim == 2 and arr.shape[0] == arr.shape[1]:
        return arr
    raise ValidationError(name, "must be a scalar, a diagonal vector, or a square matrix")


def parse_config(text: str) -> ExperimentConfig:
    """Parse and fully validate a JSON experiment config."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, position=exc.pos) from None
    if not isinstance(doc, dict):
        raise ValidationError("<root>", "config must be a JSON object")
    _reject_unknown(
        doc,
        {"model", "truth", "prior", "filter", "observations", "seed", "output"},
        "<root>",
    )
    for required in ("model", "prior", "filter", "observations"):
        if required not in doc:
            raise ValidationError(required, "section is required")

    model_sec = doc["model"]
    _reject_unknown(model_sec, {"id", "params"}, "model")
    model_id = model_sec.get("id")
    if model_id not in MODEL_IDS:
        raise UnknownModel(f"unknown model {model_id!r}; known: {', '.join(MODEL_IDS)}")
    params = dict(model_sec.get("params", {}))
    _reject_unknown(params, _MODEL_PARAM_KEYS[model_id], f"model.params[{model_id}]")
    if model_id == "linear-gaussian":
        for key, default in _LINEAR_GAUSSIAN_DEFAULTS.items():
            params.setdefault(key, default)
    if model_id.startswith("lorenz84"):
        params.setdefault("obs_sigma", "auto10")
        if params["obs_sigma"] == "auto10":
            pass
        elif isinstance(params["obs_sigma"], (int, float, list)):
            sig = np.broadcast_to(np.asarray(params["obs_sigma"], float), (3,))
            if np.any(sig < 0):
                raise ValidationError("model.params.obs_sigma", "must be nonnegative")
        else:
            raise ValidationError(
                "model.params.obs_sigma", "must be a number, a 3-vector, or 'auto10'"
            )
        if params.get("obs", "linear") not in ("linear", "cubic"):
            raise ValidationError("model.params.obs", "must be 'linear' or 'cubic'")
    elif model_id == "cubic-toy":
        sigma_v = params.get("sigma_v", 0.5)
        if not isinstance(sigma_v, (int, float)) or sigma_v < 0:
            raise ValidationError("model.params.sigma_v", "must be a nonnegative number")
    else:  # linear-gaussian: deep-validate by constructing the model
        try:
            LinearGaussianModel(A=params["A"], H=params["H"], Q=params["Q"], R=params["R"])
        except (ValueError, TypeError, NumericError) as exc:
            raise ValidationError("model.params", str(exc)) from None

    truth_sec = doc.get("truth", {})
    _reject_unknown(truth_sec, {"init", "spinup"}, "truth")
    truth_init = truth_sec.get("init")
    if truth_init is not None:
        truth_init = tuple(float(v) for v in truth_init)
    truth_spinup = float(truth_sec.get("spinup", 0.0))
    if truth_spinup < 0:
        raise ValidationError("truth.spinup", "must be nonnegative")

    prior_sec = doc["prior"]
    _reject_unknown(prior_sec, {"mean", "cov", "representation"}, "prior")
    if "mean" not in prior_sec or "representation" not in prior_sec:
        raise ValidationError("prior", "mean and representation are required")
    prior_mean = tuple(float(v) for v in np.atleast_1d(prior_sec["mean"]))
    d = len(prior_mean)
    prior_cov = _as_matrix(prior_sec.get("cov", 1.0), "prior.cov", size=d)
    if prior_cov.shape != (d, d):
        raise ValidationError("prior.cov", f"must be {d}x{d} to match the mean")
    eigmin = float(np.linalg.eigvalsh(0.5 * (prior_cov + prior_cov.T)).min())
    if eigmin <= 0:
        raise ValidationError("prior.cov", "must be symmetric positive definite")

    rep_sec = prior_sec["representation"]
    _reject_unknown(rep_sec, {"kind", "n", "germ_dim", "degree", "grid_level"}, "prior.representation")
    rep_kind = rep_sec.get("kind")
    if rep_kind == "ensemble":
        n = int(rep_sec.get("n", 0))
        if n < 2:
            raise ValidationError("prior.representation.n", "ensemble size must be >= 2")
        representation = Representation(kind="ensemble", n=n)
    elif rep_kind == "pce":
        degree = int(rep_sec.get("degree", 1))
        if degree < 1:
            raise ValidationError("prior.representation.degree", "must be >= 1")
        germ_dim = int(rep_sec.get("germ_dim", d))
        if germ_dim < d:
            raise ValidationError(
                "prior.representation.germ_dim",
                f"needs at least {d} germs to carry a full-rank prior covariance",
            )
        grid_level = int(rep_sec.get("grid_level", degree + 1))
        if grid_level < 1:
            raise ValidationError("prior.representation.grid_level", "must be >= 1")
        representation = Representation(
            kind="pce", germ_dim=germ_dim, degree=degree, grid_level=grid_level
        )
    else:
        raise ValidationError("prior.representation.kind", "must be 'ensemble' or 'pce'")

    filter_sec = doc["filter"]
    _reject_unknown(filter_sec, {"kind", "degree", "clamp_negative_variance"}, "filter")
    kind = filter_sec.get("kind")
    if kind not in FILTER_KINDS:
        raise UnknownFilter(f"unknown filter {kind!r}; known: {', '.join(FILTER_KINDS)}")
    degree = int(filter_sec.get("degree", 1))
    if degree < 1:
        raise ValidationError("filter.degree", "must be >= 1")
    if kind == "enkf" and representation.kind != "ensemble":
        raise ValidationError("filter.kind", "the EnKF needs an ensemble prior")
    scheme = UpdateScheme(
        kind=kind,
        degree=degree,
        clamp_negative_variance=bool(filter_sec.get("clamp_negative_variance", False)),
    )

    obs_sec = doc["observations"]
    _reject_unknown(obs_sec, {"times", "start", "stop", "every"}, "observations")
    if "times" in obs_sec:
        times = tuple(float(t) for t in obs_sec["times"])
    else:
        for key in ("start", "stop", "every"):
            if key not in obs_sec:
                raise ValidationError("observations", "give either times or start/stop/every")
        start, stop, every = (float(obs_sec[k]) for k in ("start", "stop", "every"))
        if every <= 0:
            raise ValidationError("observations.every", "must be positive")
        count = int(round((stop - start) / every))
        times = tuple(start + k * every for k in range(count + 1) if start + k * every <= stop + 1e-12)
    if not times or times[0] <= 0 or any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
        raise ValidationError("observations.times", "must be positive and strictly increasing")

    seed = doc.get("seed", 0)
    if not isinstance(seed, int):
        raise ValidationError("seed", "must be an integer")

    out_sec = doc.get("output", {})
    _reject_unknown(
        out_sec, {"dir", "quantiles", "quantile_samples", "pdf", "metrics"}, "output"
    )
    quantile_levels = tuple(float(q) for q in out_sec.get("quantiles", DEFAULT_QUANTILES))
    for q in quantile_levels:
        if not 0.0 < q < 1.0:
            raise ValidationError("output.quantiles", f"level {q} outside (0, 1)")
    quantile_samples = int(out_sec.get("quantile_samples", 4096))
    if quantile_samples < 2:
        raise ValidationError("output.quantile_samples", "must be >= 2")
    pdf_spec = None
    if "pdf" in out_sec:
        pdf_sec = out_sec["pdf"]
        _reject_unknown(pdf_sec, {"steps", "components", "grid", "bandwidth"}, "output.pdf")
        grid = pdf_sec.get("grid", "auto")
        if grid != "auto":
            _reject_unknown(grid, {"min", "max", "points"}, "output.pdf.grid")
            if not all(k in grid for k in ("min", "max", "points")):
                raise ValidationError("output.pdf.grid", "needs min, max, points")
            if float(grid["max"]) <= float(grid["min"]) or int(grid["points"]) < 2:
                raise ValidationError("output.pdf.grid", "needs max > min and points >= 2")
            grid = (float(grid["min"]), float(grid["max"]), int(grid["points"]))
        bandwidth = pdf_sec.get("bandwidth", "auto")
        if bandwidth != "auto" and (not isinstance(bandwidth, (int, float)) or bandwidth <= 0):
            raise ValidationError("output.pdf.bandwidth", "must be positive or 'auto'")
        components = pdf_sec.get("components")
        if components is not None:
            components = tuple(int(c) for c in components)
        pdf_spec = PdfSpec(
            steps=tuple(int(s) for s in pdf_sec.get("steps", [])),
            components=components,
            grid=grid,
            bandwidth=bandwidth if bandwidth == "auto" else float(bandwidth),
        )
    metrics = tuple(out_sec.get("metrics", ("rmse",)))
    for metric in metrics:
        if metric != "rmse":
            raise ValidationError("output.metrics", f"unknown metric {metric!r}")

    return ExperimentConfig(
        raw_text=text,
        model_id=model_id,
        model_params=params,
        truth_init=truth_init,
        truth_spinup=truth_spinup,
        prior_mean=prior_mean,
        prior_cov=tuple(tuple(float(v) for v in row) for row in prior_cov),
        representation=representation,
        scheme=scheme,
        obs_times=times,
        seed=seed,
        output=OutputSpec(
            directory=out_sec.get("dir"),
            quantiles=quantile_levels,
            quantile_samples=quantile_samples,
            pdf=pdf_spec,
            metrics=metrics,
        ),
    )


def build_model(config: ExperimentConfig, obs_sigma_override=None) -> Model:
    """Instantiate the configured model; the harness resolves 'auto10' noise."""
    params = config.model_params
    if config.model_id in ("lorenz84", "lorenz84-fid"):
        lp = Lorenz84Params(
            a=float(params.get("a", 0.25)),
            b=float(params.get("b", 4.0)),
            F=float(params.get("F", 8.0)),
            G=float(params.get("G", 1.0)),
            dt=float(params.get("dt", 0.05)),
            substeps=int(params.get("substeps", 1)),
        )
        obs_sigma = params.get("obs_sigma", "auto10")
        if obs_sigma_override is not None:
            obs_sigma = obs_sigma_override
        elif obs_sigma == "auto10":
            raise ValidationError(
                "model.params.obs_sigma",
                "'auto10' must be resolved against a truth run before building",
            )
        if config.model_id == "lorenz84":
            return Lorenz84Model(
                params=lp, obs_kind=params.get("obs", "linear"), obs_sigma=obs_sigma
            )
        return Lorenz84ParamFModel(params=lp, obs_sigma=obs_sigma)
    if config.model_id == "cubic-toy":
        return CubicToyModel(sigma_v=float(params.get("sigma_v", 0.5)))
    return LinearGaussianModel(
        A=params["A"], H=params["H"], Q=params["Q"], R=params["R"]
    )
