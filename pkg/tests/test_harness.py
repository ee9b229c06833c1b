import json

import numpy as np
import pytest

from cebayes.cli import main as cli_main
from cebayes.config import parse_config
from cebayes.errors import (
    IncompatibleBundles,
    ParseError,
    UnknownFilter,
    UnknownModel,
    ValidationError,
)
from cebayes.harness import ResultBundle, compare_runs, exact_kalman_table, run_experiment
from cebayes.models import make_twin_experiment


def make_config(**overrides):
    doc = {
        "model": {"id": "lorenz84", "params": {"obs_sigma": 0.1}},
        "truth": {"init": [1.0, 0.0, 0.0], "spinup": 10.0},
        "prior": {
            "mean": [1.0, 0.5, -0.5],
            "cov": 0.25,
            "representation": {"kind": "ensemble", "n": 64},
        },
        "filter": {"kind": "gmkf"},
        "observations": {"times": [1.0, 2.0, 3.0]},
        "seed": 3,
        "output": {},
    }
    doc.update(overrides)
    return json.dumps(doc, indent=1)


# ------------------------------------------------------------------ parsing


def test_minimal_config_gets_defaults():
    text = json.dumps(
        {
            "model": {"id": "lorenz84"},
            "prior": {"mean": [0, 0, 0], "representation": {"kind": "pce", "degree": 2}},
            "filter": {"kind": "gmkf"},
            "observations": {"times": [1.0]},
        }
    )
    config = parse_config(text)
    assert config.representation.germ_dim == 3
    assert config.representation.grid_level == 3
    assert config.output.quantiles == (0.05, 0.25, 0.5, 0.75, 0.95)
    assert config.seed == 0
    assert config.model_params["obs_sigma"] == "auto10"


def test_unknown_filter_rejected():
    with pytest.raises(UnknownFilter):
        parse_config(make_config(filter={"kind": "kalmann"}))


def test_unknown_model_rejected():
    with pytest.raises(UnknownModel):
        parse_config(make_config(model={"id": "lorenz85"}))


def test_quantile_level_out_of_range_rejected():
    with pytest.raises(ValidationError):
        parse_config(make_config(output={"quantiles": [0.5, 1.5]}))


def test_unknown_keys_rejected_everywhere():
    with pytest.raises(ValidationError):
        parse_config(make_config(extra_section={}))
    with pytest.raises(ValidationError):
        parse_config(make_config(prior={"mean": [0.0], "representation": {"kind": "ensemble", "n": 4}, "typo": 1}))
    with pytest.raises(ValidationError):
        parse_config(make_config(model={"id": "lorenz84", "params": {"rho": 28}}))


def test_malformed_json_is_a_parse_error():
    with pytest.raises(ParseError):
        parse_config("{not json")


def test_enkf_requires_ensemble_representation():
    with pytest.raises(ValidationError):
        parse_config(
            make_config(
                filter={"kind": "enkf"},
                prior={"mean": [0, 0, 0], "representation": {"kind": "pce", "degree": 1}},
            )
        )


def test_auto10_restricted_to_lorenz():
    with pytest.raises(ValidationError):
        parse_config(
            make_config(
                model={"id": "cubic-toy", "params": {"sigma_v": "auto10"}},
            )
        )


def test_linear_gaussian_params_deep_validated():
    with pytest.raises(ValidationError):
        parse_config(
            make_config(model={"id": "linear-gaussian", "params": {"A": [[1.0, 0.0]]}})
        )


def test_schedule_from_start_stop_every():
    config = parse_config(make_config(observations={"start": 1.0, "stop": 5.0, "every": 2.0}))
    assert config.obs_times == (1.0, 3.0, 5.0)


# ------------------------------------------------------------------- running


def test_rerun_is_byte_identical(tmp_path):
    config = parse_config(make_config())
    run_experiment(config, out_dir=tmp_path / "a")
    run_experiment(config, out_dir=tmp_path / "b")
    for name in ("trajectory.csv", "updates.jsonl", "rmse.csv", "truth.csv", "observations.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    m1 = json.loads((tmp_path / "a" / "manifest.json").read_text())
    m2 = json.loads((tmp_path / "b" / "manifest.json").read_text())
    m1.pop("wall_time_s"), m2.pop("wall_time_s")
    assert m1 == m2


def test_different_seed_changes_outputs(tmp_path):
    run_experiment(parse_config(make_config(seed=1)), out_dir=tmp_path / "a")
    run_experiment(parse_config(make_config(seed=2)), out_dir=tmp_path / "b")
    assert (tmp_path / "a" / "trajectory.csv").read_text() != (
        tmp_path / "b" / "trajectory.csv"
    ).read_text()


def test_every_step_has_forecast_and_analysis_rows(tmp_path):
    config = parse_config(make_config())
    bundle = run_experiment(config, out_dir=tmp_path)
    for t in config.obs_times:
        for phase in ("forecast", "analysis"):
            rows = [
                r
                for r in bundle.trajectory_rows
                if r["time"] == t and r["phase"] == phase
            ]
            assert len(rows) == 3  # one per state component


def test_pce_gmkf_rmse_matches_exact_kalman_oracle(tmp_path):
    doc = {
        "model": {"id": "linear-gaussian"},
        "truth": {"init": [0.3, -0.2]},
        "prior": {"mean": [0.0, 0.0], "cov": [[1.0, 0.0], [0.0, 1.0]],
                  "representation": {"kind": "pce", "degree": 1, "grid_level": 2}},
        "filter": {"kind": "gmkf"},
        "observations": {"start": 1.0, "stop": 10.0, "every": 1.0},
        "seed": 11,
    }
    config = parse_config(json.dumps(doc))
    bundle = run_experiment(config, out_dir=tmp_path)
    from cebayes.config import build_model

    model = build_model(config)
    twin = make_twin_experiment(model, [0.3, -0.2], 11, config.obs_times)
    oracle = exact_kalman_table(model, [0.0, 0.0], np.eye(2), twin.observations)
    for row, (m, _), truth in zip(bundle.rmse_rows, oracle, twin.truth):
        expected = float(np.sqrt(np.mean((m - truth) ** 2)))
        assert row["rmse_vs_truth"] == pytest.approx(expected, abs=1e-8)


def test_gmkf_and_polynomial1_bundles_agree(tmp_path):
    base = make_config()
    run_experiment(parse_config(base), out_dir=tmp_path / "lin")
    poly = json.loads(base)
    poly["filter"] = {"kind": "polynomial", "degree": 1}
    run_experiment(parse_config(json.dumps(poly)), out_dir=tmp_path / "poly")
    table = compare_runs([tmp_path / "lin", tmp_path / "poly"])
    assert max(r["mean_diff_1"] for r in table["analysis"]) <= 1e-8
    assert max(r["var_diff_1"] for r in table["analysis"]) <= 1e-8


def test_cubic_toy_quadratic_residual_not_worse_at_first_step(tmp_path):
    def toy(degree):
        return json.dumps(
            {
                "model": {"id": "cubic-toy"},
                "truth": {"init": [1.0]},
                "prior": {"mean": [0.0], "cov": [[1.0]],
                          "representation": {"kind": "ensemble", "n": 4000}},
                "filter": {"kind": "polynomial", "degree": degree},
                "observations": {"times": [1.0]},
                "seed": 5,
            }
        )

    b1 = run_experiment(parse_config(toy(1)), out_dir=tmp_path / "p1")
    b2 = run_experiment(parse_config(toy(2)), out_dir=tmp_path / "p2")
    # same seed, so the first-step forecast ensembles coincide: nested bases
    r1 = b1.reports[0]["notes"]["mmse_residual"]
    r2 = b2.reports[0]["notes"]["mmse_residual"]
    assert r2 <= r1 + 1e-12


def test_compare_identical_bundles_is_zero(tmp_path):
    config = parse_config(make_config())
    run_experiment(config, out_dir=tmp_path / "a")
    run_experiment(config, out_dir=tmp_path / "b")
    table = compare_runs([tmp_path / "a", tmp_path / "b"])
    assert all(r["mean_diff_1"] == 0.0 for r in table["analysis"])


def test_compare_rejects_different_schedules(tmp_path):
    run_experiment(parse_config(make_config()), out_dir=tmp_path / "a")
    run_experiment(
        parse_config(make_config(observations={"times": [1.0, 2.0]})),
        out_dir=tmp_path / "b",
    )
    with pytest.raises(IncompatibleBundles):
        compare_runs([tmp_path / "a", tmp_path / "b"])


def test_manifest_hash_matches_config_bytes(tmp_path):
    import hashlib

    text = make_config()
    config = parse_config(text)
    bundle = run_experiment(config, out_dir=tmp_path)
    assert bundle.manifest["config_sha256"] == hashlib.sha256(text.encode()).hexdigest()


def test_bundle_load_round_trip(tmp_path):
    config = parse_config(make_config())
    bundle = run_experiment(config, out_dir=tmp_path)
    loaded = ResultBundle.load(tmp_path)
    assert loaded.manifest == bundle.manifest
    assert len(loaded.trajectory_rows) == len(bundle.trajectory_rows)
    assert len(loaded.reports) == len(bundle.reports)


# ----------------------------------------------------------------------- cli


def test_cli_validate_ok(tmp_path, capsys):
    path = tmp_path / "config.json"
    path.write_text(make_config())
    assert cli_main(["validate", str(path)]) == 0
    assert "ok" in capsys.readouterr().out


def test_cli_validate_bad_config_exits_2(tmp_path, capsys):
    path = tmp_path / "config.json"
    path.write_text(make_config(filter={"kind": "kalmann"}))
    assert cli_main(["validate", str(path)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"]["type"] == "UnknownFilter"


def test_cli_run_and_compare(tmp_path, capsys):
    path = tmp_path / "config.json"
    path.write_text(make_config())
    assert cli_main(["run", str(path), "--out", str(tmp_path / "a"), "--quiet"]) == 0
    assert cli_main(["run", str(path), "--out", str(tmp_path / "b"), "--quiet"]) == 0
    assert (tmp_path / "a" / "manifest.json").exists()
    assert cli_main(["compare", str(tmp_path / "a"), str(tmp_path / "b")]) == 0
    out = capsys.readouterr().out
    assert "mean_diff_1" in out.splitlines()[0]


def test_cli_seed_override_changes_bundle(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(make_config())
    cli_main(["run", str(path), "--out", str(tmp_path / "a"), "--quiet"])
    cli_main(["run", str(path), "--out", str(tmp_path / "b"), "--seed", "99", "--quiet"])
    assert (tmp_path / "a" / "trajectory.csv").read_text() != (
        tmp_path / "b" / "trajectory.csv"
    ).read_text()


def test_cli_default_output_root_env_var(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("CEBAYES_OUT", str(tmp_path / "root"))
    path = tmp_path / "config.json"
    text = make_config()
    path.write_text(text)
    assert cli_main(["run", str(path), "--quiet"]) == 0
    import hashlib

    expected = tmp_path / "root" / hashlib.sha256(text.encode()).hexdigest()[:12]
    assert (expected / "manifest.json").exists()


def test_cli_list_commands(capsys):
    assert cli_main(["list-models"]) == 0
    assert "lorenz84" in capsys.readouterr().out
    assert cli_main(["list-filters"]) == 0
    assert "gmkf" in capsys.readouterr().out


def test_cli_numeric_failure_exits_3(tmp_path, capsys):
    # a truth state this large overflows the quadratic terms immediately
    doc = {
        "model": {"id": "lorenz84", "params": {"obs_sigma": 0.1}},
        "truth": {"init": [1e154, 0.0, 0.0]},
        "prior": {"mean": [1.0, 0.0, 0.0], "cov": 0.25,
                  "representation": {"kind": "ensemble", "n": 16}},
        "filter": {"kind": "gmkf"},
        "observations": {"times": [1.0]},
        "seed": 0,
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    code = cli_main(["run", str(path), "--out", str(tmp_path / "r"), "--quiet"])
    err = json.loads(capsys.readouterr().err.splitlines()[-1])
    assert code == 3
    assert err["error"]["type"] == "NonFiniteState"
