"""Experiment runner: twin experiment, assimilation, result bundle on disk.

A bundle directory contains manifest.json, trajectory.csv, updates.jsonl,
rmse.csv, truth.csv, observations.csv and optional pdf_<step>_<component>.csv
grids. Every emitted byte is a pure function of (config, master seed) except
the manifest's wall-time field; numbers carry 17 significant digits so files
round-trip.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, build_model
from .errors import IncompatibleBundles
from .filters import AssimilationStep, assimilate_sequence
from .models import Model, exact_kalman_step, make_twin_experiment
from .rv import (
    EnsembleRV,
    GermSpec,
    PCERV,
    RV,
    covariance,
    kde_pdf,
    mean,
    quantiles,
)
from .seeding import stream_rng


def _fmt(value: float) -> str:
    return f"{float(value):.17g}"


def _resolve_auto_sigma(config: ExperimentConfig) -> np.ndarray | None:
    """10% of the truth's climatological standard deviation per observed
    component, measured on a noise-free truth run over the schedule."""
    if not config.model_id.startswith("lorenz84"):
        return None
    if config.model_params.get("obs_sigma", "auto10") != "auto10":
        return None
    probe = build_model(config, obs_sigma_override=np.zeros(3))
    init = np.asarray(
        config.truth_init if config.truth_init is not None else probe.default_init,
        float,
    )
    if config.truth_spinup > 0:
        init = probe.forecast(init, np.zeros(probe.state_dim), -config.truth_spinup, 0.0)
    run = make_twin_experiment(probe, init, config.seed, config.obs_times)
    observed = np.array([y for _, y in run.observations])
    std = observed.std(axis=0, ddof=1)
    return 0.1 * np.maximum(std, 1e-12)


def _build_prior(config: ExperimentConfig, model: Model) -> RV:
    mean_vec = np.asarray(config.prior_mean, float)
    cov = np.asarray(config.prior_cov, float)
    chol = np.linalg.cholesky(0.5 * (cov + cov.T))
    rep = config.representation
    if rep.kind == "ensemble":
        rng = stream_rng(config.seed, "prior.init")
        z = rng.standard_normal((rep.n, mean_vec.shape[0]))
        return EnsembleRV(samples=mean_vec[None, :] + z @ chol.T)
    germ = GermSpec.gaussian(rep.germ_dim)
    linear = np.zeros((rep.germ_dim, mean_vec.shape[0]))
    linear[: mean_vec.shape[0], :] = chol.T
    prior = PCERV.affine(germ, mean_vec, linear)
    if rep.degree > 1:
        from . import pce

        index_set = pce.multi_index_set(rep.germ_dim, rep.degree)
        coeffs = np.zeros((index_set.size, mean_vec.shape[0]))
        lookup = {alpha: i for i, alpha in enumerate(index_set.indices)}
        for alpha, row in zip(prior.indices, prior.coeffs):
            coeffs[lookup[alpha]] = row
        prior = PCERV(germ=germ, indices=index_set.indices, coeffs=coeffs)
    return prior


@dataclass(frozen=True)
class ResultBundle:
    """Paths plus the in-memory tables an experiment produced."""

    directory: Path
    manifest: dict
    trajectory_rows: list
    rmse_rows: list
    reports: list
    steps: list

    @classmethod
    def load(cls, directory) -> "ResultBundle":
        directory = Path(directory)
        manifest = json.loads((directory / "manifest.json").read_text())
        trajectory_rows = _read_csv_rows(directory / "trajectory.csv")
        rmse_rows = _read_csv_rows(directory / "rmse.csv")
        reports = [
            json.loads(line)
            for line in (directory / "updates.jsonl").read_text().splitlines()
            if line.strip()
        ]
        return cls(
            directory=directory,
            manifest=manifest,
            trajectory_rows=trajectory_rows,
            rmse_rows=rmse_rows,
            reports=reports,
            steps=[],
        )


def _read_csv_rows(path: Path) -> list:
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    return [dict(zip(header, line.split(","))) for line in lines[1:] if line]


def _rv_quantiles(rv: RV, component: int, levels, config, step: int, phase: int):
    if isinstance(rv, PCERV):
        rng = stream_rng(config.seed, "pce.sampling", step, phase, component)
        return quantiles(
            rv, component, levels,
            sample_count=config.output.quantile_samples, seed=rng,
        )
    return quantiles(rv, component, levels)


def _trajectory_rows(config, steps: list[AssimilationStep], state_dim: int):
    levels = config.output.quantiles
    rows = []
    for k, step in enumerate(steps):
        for phase_idx, (phase, rv) in enumerate(
            (("forecast", step.forecast), ("analysis", step.analysis))
        ):
            mu = mean(rv)
            var = np.diag(covariance(rv))
            for c in range(state_dim):
                qs = _rv_quantiles(rv, c, levels, config, k, phase_idx)
                rows.append(
                    {
                        "time": step.time,
                        "phase": phase,
                        "component": c,
                        "mean": mu[c],
                        "var": var[c],
                        **{f"q_{level:g}": q for level, q in zip(levels, qs)},
                    }
                )
    return rows


def _write_trajectory(path: Path, rows, levels) -> None:
    header = ["time", "phase", "component", "mean", "var"] + [f"q_{l:g}" for l in levels]
    lines = [",".join(header)]
    for row in rows:
        lines.append(
            ",".join(
                [
                    _fmt(row["time"]), row["phase"], str(row["component"]),
                    _fmt(row["mean"]), _fmt(row["var"]),
                ]
                + [_fmt(row[f"q_{l:g}"]) for l in levels]
            )
        )
    path.write_text("\n".join(lines) + "\n")


def _rmse(mean_vec: np.ndarray, truth: np.ndarray) -> float:
    diff = mean_vec - truth
    return float(np.sqrt(np.mean(diff * diff)))


def _write_pdfs(config, steps, out_dir: Path) -> list[str]:
    spec = config.output.pdf
    written = []
    if spec is None:
        return written
    state_dim = len(config.prior_mean)
    components = spec.components if spec.components is not None else tuple(range(state_dim))
    for step_idx in spec.steps:
        if not 0 <= step_idx < len(steps):
            continue
        rv = steps[step_idx].analysis
        for c in components:
            if isinstance(rv, PCERV):
                rng = stream_rng(config.seed, "pce.sampling", step_idx, 2, c)
                sampled = {"sample_count": config.output.quantile_samples, "seed": rng}
            else:
                sampled = {}
            if spec.grid == "auto":
                mu = float(mean(rv)[c])
                sd = float(np.sqrt(max(np.diag(covariance(rv))[c], 1e-300)))
                grid = np.linspace(mu - 4 * sd, mu + 4 * sd, 201)
            else:
                lo, hi, points = spec.grid
                grid = np.linspace(lo, hi, points)
            density = kde_pdf(rv, c, grid, bandwidth=spec.bandwidth, **sampled)
            name = f"pdf_{step_idx}_{c}.csv"
            lines = ["abscissa,density"] + [
                f"{_fmt(g)},{_fmt(p)}" for g, p in zip(grid, density)
            ]
            (out_dir / name).write_text("\n".join(lines) + "\n")
            written.append(name)
    return written


def run_experiment(config: ExperimentConfig, out_dir=None, quiet: bool = True) -> ResultBundle:
    """Execute the configured twin experiment and write the result bundle."""
    started = time.time()
    sigma = _resolve_auto_sigma(config)
    model = build_model(config, obs_sigma_override=sigma)
    init = np.asarray(
        config.truth_init if config.truth_init is not None else model.default_init,
        float,
    )
    if config.truth_spinup > 0:
        init = model.forecast(init, np.zeros(model.state_dim), -config.truth_spinup, 0.0)
    twin = make_twin_experiment(model, init, config.seed, config.obs_times)
    prior = _build_prior(config, model)
    grid_level = (
        config.representation.grid_level if config.representation.kind == "pce" else None
    )
    steps = assimilate_sequence(
        model, twin.observations, prior, config.scheme,
        master_seed=config.seed, grid_level=grid_level,
    )
    free_steps = assimilate_sequence(
        model, [(t, None) for t in config.obs_times], prior, config.scheme,
        master_seed=config.seed, grid_level=grid_level, w_label="free.w",
    )

    out_dir = Path(out_dir) if out_dir is not None else Path(config.output.directory or ".")
    out_dir.mkdir(parents=True, exist_ok=True)

    state_dim = model.state_dim
    rows = _trajectory_rows(config, steps, state_dim)
    _write_trajectory(out_dir / "trajectory.csv", rows, config.output.quantiles)

    report_lines = []
    for k, step in enumerate(steps):
        doc = {"step": k, "time": step.time}
        doc.update(step.report.to_dict())
        report_lines.append(json.dumps(doc, sort_keys=True))
    (out_dir / "updates.jsonl").write_text("\n".join(report_lines) + "\n")

    rmse_lines = ["time,rmse_vs_truth,free_run_rmse"]
    rmse_rows = []
    for step, free, truth in zip(steps, free_steps, twin.truth):
        r = _rmse(mean(step.analysis), truth)
        fr = _rmse(mean(free.analysis), truth)
        rmse_rows.append({"time": step.time, "rmse_vs_truth": r, "free_run_rmse": fr})
        rmse_lines.append(f"{_fmt(step.time)},{_fmt(r)},{_fmt(fr)}")
    (out_dir / "rmse.csv").write_text("\n".join(rmse_lines) + "\n")

    (out_dir / "truth.csv").write_text(twin.truth_csv())
    (out_dir / "observations.csv").write_text(twin.observations_csv())
    pdf_files = _write_pdfs(config, steps, out_dir)

    manifest = {
        "config_sha256": config.config_hash(),
        "seed": config.seed,
        "model": config.model_id,
        "filter": {"kind": config.scheme.kind, "degree": config.scheme.degree},
        "representation": config.representation.kind,
        "pce": (
            None
            if config.representation.kind != "pce"
            else {
                "germ_dim": config.representation.germ_dim,
                "degree": config.representation.degree,
                "grid_level": config.representation.grid_level,
            }
        ),
        "obs_times": [float(t) for t in config.obs_times],
        "quantiles": [float(q) for q in config.output.quantiles],
        "pdf_files": pdf_files,
        "versions": {"cebayes": __version__, "numpy": np.__version__},
        "resolved_obs_sigma": None if sigma is None else [float(s) for s in sigma],
        "wall_time_s": time.time() - started,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    if not quiet:
        last = rmse_rows[-1]
        print(
            f"wrote {out_dir} ({len(steps)} steps, final rmse {last['rmse_vs_truth']:.4g} "
            f"vs free-run {last['free_run_rmse']:.4g})"
        )
    return ResultBundle(
        directory=out_dir,
        manifest=manifest,
        trajectory_rows=rows,
        rmse_rows=rmse_rows,
        reports=[json.loads(line) for line in report_lines],
        steps=steps,
    )


def compare_runs(bundles: list) -> dict:
    """Per-step, per-component posterior mean/variance differences against the
    first bundle, plus pdf-grid L1 distances where grids match."""
    loaded = [b if isinstance(b, ResultBundle) else ResultBundle.load(b) for b in bundles]
    if len(loaded) < 2:
        raise IncompatibleBundles("need at least two bundles to compare")
    base = loaded[0]
    for other in loaded[1:]:
        if other.manifest["model"] != base.manifest["model"] or list(
            other.manifest["obs_times"]
        ) != list(base.manifest["obs_times"]):
            raise IncompatibleBundles("bundles differ in model or observation schedule")

    def analysis_table(bundle):
        table = {}
        for row in bundle.trajectory_rows:
            if row["phase"] != "analysis":
                continue
            key = (float(row["time"]), int(row["component"]))
            table[key] = (float(row["mean"]), float(row["var"]))
        return table

    tables = [analysis_table(b) for b in loaded]
    rows = []
    for key in sorted(tables[0]):
        t, c = key
        entry = {"time": t, "component": c}
        for i, table in enumerate(tables):
            entry[f"mean_{i}"] = table[key][0]
            entry[f"var_{i}"] = table[key][1]
        for i in range(1, len(tables)):
            entry[f"mean_diff_{i}"] = abs(entry[f"mean_{i}"] - entry["mean_0"])
            entry[f"var_diff_{i}"] = abs(entry[f"var_{i}"] - entry["var_0"])
        rows.append(entry)

    pdf_rows = []
    for name in base.manifest.get("pdf_files", []):
        grids = []
        for bundle in loaded:
            path = Path(bundle.directory) / name
            if not path.exists():
                grids = []
                break
            data = np.array(
                [[float(v) for v in line.split(",")] for line in path.read_text().splitlines()[1:]]
            )
            grids.append(data)
        if not grids:
            continue
        abscissas = [g[:, 0] for g in grids]
        if any(a.shape != abscissas[0].shape or not np.array_equal(a, abscissas[0])
               for a in abscissas[1:]):
            continue
        x = abscissas[0]
        for i in range(1, len(grids)):
            diff = np.abs(grids[i][:, 1] - grids[0][:, 1])
            l1 = float(np.trapezoid(diff, x))
            pdf_rows.append({"pdf": name, "bundle": i, "l1_distance": l1})
    return {"analysis": rows, "pdf_l1": pdf_rows}


def exact_kalman_table(model, prior_mean, prior_cov, observations):
    """Oracle mean/covariance table for a linear-Gaussian assimilation run."""
    m = np.asarray(prior_mean, float)
    p = np.asarray(prior_cov, float)
    out = []
    for _, y_hat in observations:
        m, p = exact_kalman_step(model, m, p, y_hat)
        out.append((m.copy(), p.copy()))
    return out
