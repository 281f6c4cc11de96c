import json

import pytest

from fieldattr import protocol as pr
from fieldattr.cli import main
from fieldattr.errors import ConfigError


def fast_cfg(synth_dir, **kw):
    return pr.load_config(synth_dir / "fast.json", kw)


def test_stage_graph_is_ordered():
    assert len(pr.STAGES) == 11
    for stage, deps in pr.STAGE_DEPS.items():
        for d in deps:
            assert pr.STAGES.index(d) < pr.STAGES.index(stage)


def test_artifact_store_enforces_dependencies():
    art = pr.ArtifactStore()
    art.stage = "observables"
    art.put("psi1", 1)
    art.stage = "models"
    art.put("fit_m2", 2)
    art.stage = "placebo"
    assert art.get("psi1") == 1
    with pytest.raises(RuntimeError):
        art.get("fit_m2")
    with pytest.raises(KeyError):
        art.get("missing")


def test_config_rejects_unknown_and_bad_values(synth_dir):
    base = json.loads((synth_dir / "fast.json").read_text())
    base = {**base, "prices": str(synth_dir / "prices.csv"), "vix": str(synth_dir / "vix.csv")}
    for bad in ({"wndow": 60}, {"window": -1}, {"stages": ["nope"]}, {"recipes": ["full_median/bogus"]},
                {"quiet_bands": [{"low": 18, "high": 15}]}, {"split_dates": ["not-a-date"]},
                {"seed": True}, {"prices": str(synth_dir / "missing.csv")}):
        with pytest.raises(ConfigError):
            pr.config_from_dict({**base, **bad})
    with pytest.raises(ConfigError):
        pr.config_from_dict({"vix": "x"})


def test_relative_paths_resolve_against_config_dir(synth_dir):
    cfg = fast_cfg(synth_dir)
    assert cfg.prices == str(synth_dir / "prices.csv")


def test_empty_report_writes_manifest_only(tmp_path):
    written = pr.emit(pr.ProtocolReport(), tmp_path)
    assert [p.name for p in written] == ["manifest.json"]


def test_only_first_stage(synth_dir, tmp_path):
    cfg = fast_cfg(synth_dir, stages=["observables"], output=str(tmp_path))
    rep = pr.run_protocol(cfg)
    assert rep.status["observables"] == "ok" and rep.status["models"] == "disabled"
    assert list(rep.tables) == ["observables"]


def test_dependents_skipped_after_failure(synth_dir, tmp_path):
    cfg = fast_cfg(synth_dir, stages=["models", "diagnostics"])
    rep = pr.run_protocol(cfg)
    assert rep.status["models"].startswith("skipped")
    assert rep.status["diagnostics"].startswith("skipped")


def test_emit_round_trip(synth_dir, tmp_path):
    cfg = fast_cfg(synth_dir, stages=["observables", "models", "granger"], regime=False)
    rep = pr.run_protocol(cfg)
    assert not rep.failed
    pr.emit(rep, tmp_path)
    back = pr.read_report(tmp_path)
    assert dict(back.status) == dict(rep.status)
    for name, rows in rep.tables.items():
        assert back.tables[name] == rows
    models = {r["model"]: r for r in rep.tables["model_comparison"]}
    assert models["M2"]["dbic_vs_m2"] == 0.0


def test_full_run_and_cli_exit_codes(synth_dir, tmp_path, capsys):
    out = tmp_path / "rep"
    code = main(["run-all", "--config", str(synth_dir / "fast.json"), "--output", str(out), "--quiet"])
    printed = capsys.readouterr().out
    assert code == 0, printed
    assert printed.count(" ok") == 11
    assert (out / "summary.json").exists() and (out / "manifest.json").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 0 and len(manifest["config_sha256"]) == 64


def test_cli_config_error_exit_2(tmp_path, capsys):
    assert main(["fit", "--config", str(tmp_path / "missing.json")]) == 2
    (tmp_path / "c.json").write_text(json.dumps({"prices": "p.csv", "vix": "v.csv", "colour": 1}))
    assert main(["fit", "--config", str(tmp_path / "c.json")]) == 2


def test_cli_stage_failure_exit_1(synth_dir, tmp_path):
    code = main(["oos", "--config", str(synth_dir / "fast.json"), "--split-dates", "1990-01-01",
                 "--output", str(tmp_path), "--quiet"])
    assert code == 1
