"""End-to-end command line checks: outputs, manifests, replay, exit codes."""

import csv
import json

from alignperc.cli import main
from alignperc.oracle import EdgePattern, pattern_to_json


def run(argv):
    return main([str(a) for a in argv])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# simulate


def test_simulate_writes_csv_and_manifest(tmp_path):
    out = tmp_path / "sim.csv"
    code = run(["simulate", "--p", 0.6, "--lambda", 0.5, "--size", 12,
                "--n", 4, "--seed", 11, "--out", out])
    assert code == 0
    rows = read_csv(out)
    assert len(rows) == 4
    assert list(rows[0]) == ["rep", "occupied_sites", "open_edges",
                             "n_components", "largest_cluster", "wrap_axis0"]
    manifest = json.loads((tmp_path / "sim.manifest.json").read_text())
    assert manifest["schema"] == "alignperc.manifest.v1"
    assert manifest["command"] == "simulate"
    assert manifest["outputs"].keys() == {"sim.csv"}


def test_simulate_one_choice_model(tmp_path):
    out = tmp_path / "oc.csv"
    assert run(["simulate", "--model", "one_choice", "--p", 0.5, "--size", 8,
                "--n", 2, "--seed", 3, "--out", out]) == 0
    assert len(read_csv(out)) == 2


def test_simulate_requires_lambda_for_independent(tmp_path):
    code = run(["simulate", "--p", 0.5, "--size", 8, "--n", 1,
                "--seed", 1, "--out", tmp_path / "x.csv"])
    assert code == 2


def test_simulate_size_refusal_exit_code(tmp_path):
    code = run(["simulate", "--p", 0.5, "--lambda", 0.5, "--size", 10000,
                "--n", 1, "--seed", 1, "--out", tmp_path / "x.csv"])
    assert code == 3


# ---------------------------------------------------------------------------
# oracle


def test_oracle_prints_twelve_digits(tmp_path, capsys):
    pat = EdgePattern.from_edges(2, [((0, 0), 0, True), ((0, 0), 1, True)])
    path = tmp_path / "pat.json"
    path.write_text(pattern_to_json(pat))
    assert run(["oracle", "--pattern", path, "--p", 0.5, "--lambda", 0.5]) == 0
    out = capsys.readouterr().out.strip()
    assert out == "0.250000000000"


def test_oracle_single_edge_marginal_is_lambda(tmp_path, capsys):
    pat = EdgePattern.from_edges(2, [((0, 0), 0, True)])
    path = tmp_path / "one.json"
    path.write_text(pattern_to_json(pat))
    assert run(["oracle", "--pattern", path, "--p", 0.37, "--lambda", 0.6]) == 0
    assert capsys.readouterr().out.strip() == "0.600000000000"


def test_oracle_missing_pattern_file(tmp_path):
    assert run(["oracle", "--pattern", tmp_path / "nope.json",
                "--p", 0.5, "--lambda", 0.5]) == 2


# ---------------------------------------------------------------------------
# covdecay


def test_covdecay_csv_columns(tmp_path):
    out = tmp_path / "cov.csv"
    code = run(["covdecay", "--L", 2, "--D", 8, "--p", 0.3, "--lambda", 0.5,
                "--event", "one_arm", "--n", 500, "--seed", 3, "--out", out])
    assert code == 0
    text = out.read_text().splitlines()
    assert text[0] == "L,D,p,lambda,event,n,cov_hat,sigma,bound,pass"
    rec = text[1].split(",")
    assert rec[9] in ("true", "false")
    assert (tmp_path / "cov.manifest.json").exists()


def test_covdecay_one_choice_leaves_lambda_blank(tmp_path):
    out = tmp_path / "cov.csv"
    assert run(["covdecay", "--L", 1, "--D", 6, "--p", 0.5, "--model",
                "one_choice", "--event", "all_open", "--n", 50,
                "--seed", 5, "--out", out]) == 0
    assert read_csv(out)[0]["lambda"] == ""


def test_covdecay_rejects_overlapping_boxes(tmp_path):
    assert run(["covdecay", "--L", 3, "--D", 5, "--p", 0.3, "--lambda", 0.5,
                "--event", "one_arm", "--n", 10, "--seed", 1,
                "--out", tmp_path / "x.csv"]) == 2


# ---------------------------------------------------------------------------
# renorm


def _qk(tmp_path, k, n=400, lam=0.95, out=None):
    out = out or (tmp_path / f"qk{k}.json")
    code = run(["renorm", "qk", "--family", "circuit_absent", "--L0", 4,
                "--k", k, "--p", 0.6, "--lambda", lam, "--n", n,
                "--seed", 7, "--out", out])
    assert code == 0
    return out


def test_renorm_qk_writes_estimate_json(tmp_path):
    out = _qk(tmp_path, 0)
    payload = json.loads(out.read_text())
    assert payload["schema"] == "alignperc.event_estimate.v1"
    assert payload["k"] == 0 and payload["n"] == 400
    assert 0 <= payload["point"] <= 1
    assert (tmp_path / "qk0.manifest.json").exists()


def test_renorm_check_runs_and_reports(tmp_path, capsys):
    a = _qk(tmp_path, 0)
    b = _qk(tmp_path, 1)
    report = tmp_path / "check.json"
    code = run(["renorm", "check", "--in", a, b, "--constants", "desk",
                "--out", report])
    out = capsys.readouterr().out
    assert "recurrence k=0 -> 1" in out
    assert "decay overall" in out
    payload = json.loads(report.read_text())
    assert payload["schema"] == "alignperc.check_report.v1"
    # a failing verdict exits 4, a passing one 0; either way the report exists
    assert code in (0, 4)


def test_renorm_check_requires_level_zero(tmp_path):
    b = _qk(tmp_path, 1)
    assert run(["renorm", "check", "--in", b]) == 2


def test_renorm_trigger_lambda0(tmp_path, capsys):
    out = tmp_path / "trig.json"
    code = run(["renorm", "trigger-lambda0", "--p", 0.5, "--L0", 4,
                "--constants", "desk", "--out", out])
    assert code == 0
    text = capsys.readouterr().out
    assert "lambda0" in text
    payload = json.loads(out.read_text())
    assert 0 < payload["lambda0"] < 1


def test_renorm_trigger_p0_with_known_psi(tmp_path, capsys):
    out = tmp_path / "p0.json"
    code = run(["renorm", "trigger-p0", "--lambda", 0.25, "--d", 2,
                "--L0", 4, "--psi-hat", 0.9, "--constants", "desk",
                "--out", out])
    assert code == 0
    payload = json.loads(out.read_text())
    assert 0 < payload["p0"] < 1


def test_renorm_trigger_p0_needs_seed_to_estimate():
    assert run(["renorm", "trigger-p0", "--lambda", 0.25, "--d", 2,
                "--L0", 4]) == 2


def test_renorm_halfline(tmp_path, capsys):
    out = tmp_path / "hl.csv"
    assert run(["renorm", "halfline", "--L0", 4, "--kmax", 2,
                "--out", out]) == 0
    rows = read_csv(out)
    assert [r["k"] for r in rows] == ["0", "1", "2"]
    assert "summability total" in capsys.readouterr().out


# ---------------------------------------------------------------------------
# hex


def test_hex_outputs(tmp_path, capsys):
    out = tmp_path / "hex.csv"
    code = run(["hex", "--p", 0.6, "--extent", 6, "--n", 120,
                "--seed", 9, "--out", out])
    assert code == 0
    rec = read_csv(out)[0]
    assert 0 < float(rec["lambda_hat"]) < 1
    assert float(rec["ci_low"]) <= float(rec["lambda_hat"]) <= float(rec["ci_high"])
    assert (tmp_path / "hex_curve.csv").exists()
    assert (tmp_path / "hex.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    manifest = json.loads((tmp_path / "hex.manifest.json").read_text())
    assert manifest["outputs"].keys() == {"hex.csv", "hex_curve.csv", "hex.png"}


# ---------------------------------------------------------------------------
# lambda-c and phase-diagram


def test_lambda_c_csv(tmp_path):
    out = tmp_path / "lc.csv"
    code = run(["lambda-c", "--p", 1.0, "--size", 16, "--n", 40, "--tol", 0.02,
                "--seeds", 3, "--seed", 5, "--out", out])
    assert code == 0
    rec = read_csv(out)[0]
    assert rec["geometry"] == "torus16^2"
    assert abs(float(rec["lambda_c_hat"]) - 0.5) < 0.1


def test_phase_diagram_files(tmp_path):
    prefix = tmp_path / "pd"
    code = run(["phase-diagram", "--p-grid", 0.6, 1.0, "--size", 10,
                "--n", 30, "--tol", 0.05, "--seeds", 2, "--seed", 5,
                "--out-prefix", prefix])
    assert code == 0
    assert len(read_csv(tmp_path / "pd.csv")) == 2
    svg = (tmp_path / "pd.svg").read_text()
    assert "<polyline" in svg
    assert (tmp_path / "pd.png").exists()
    manifest = json.loads((tmp_path / "pd.manifest.json").read_text())
    assert manifest["outputs"].keys() == {"pd.csv", "pd.svg", "pd.png"}


# ---------------------------------------------------------------------------
# replay


def test_replay_reproduces_byte_identical(tmp_path, capsys):
    out = tmp_path / "sim.csv"
    run(["simulate", "--p", 0.6, "--lambda", 0.4, "--size", 10, "--n", 3,
         "--seed", 21, "--out", out])
    redo = tmp_path / "redo"
    code = run(["replay", "--manifest", tmp_path / "sim.manifest.json",
                "--outdir", redo])
    assert code == 0
    assert "replay verified" in capsys.readouterr().out
    assert (redo / "sim.csv").read_bytes() == out.read_bytes()


def test_replay_detects_tampered_file_on_disk(tmp_path):
    out = tmp_path / "sim.csv"
    run(["simulate", "--p", 0.6, "--lambda", 0.4, "--size", 10, "--n", 3,
         "--seed", 21, "--out", out])
    out.write_text(out.read_text() + "extra,row,0,0,0,0\n")
    code = run(["replay", "--manifest", tmp_path / "sim.manifest.json",
                "--check-disk", "--outdir", tmp_path / "redo"])
    assert code == 4


def test_replay_missing_file_is_actionable(tmp_path, capsys):
    out = tmp_path / "sim.csv"
    run(["simulate", "--p", 0.6, "--lambda", 0.4, "--size", 10, "--n", 3,
         "--seed", 21, "--out", out])
    out.unlink()
    code = run(["replay", "--manifest", tmp_path / "sim.manifest.json",
                "--check-disk", "--outdir", tmp_path / "redo"])
    assert code == 4
    err = capsys.readouterr().err
    assert "missing" in err and "restore" in err


def test_replay_missing_manifest(tmp_path):
    assert run(["replay", "--manifest", tmp_path / "nope.json"]) == 2


def test_replay_version_mismatch_warns(tmp_path, capsys):
    out = tmp_path / "sim.csv"
    run(["simulate", "--p", 0.6, "--lambda", 0.4, "--size", 10, "--n", 3,
         "--seed", 21, "--out", out])
    path = tmp_path / "sim.manifest.json"
    payload = json.loads(path.read_text())
    payload["version"] = "0.0.0"
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    code = run(["replay", "--manifest", path, "--outdir", tmp_path / "redo"])
    assert code == 0
    assert "version" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# argparse plumbing


def test_unknown_subcommand_exits_2():
    assert run(["frobnicate"]) == 2


def test_help_exits_0(capsys):
    assert run(["--help"]) == 0
    assert "simulate" in capsys.readouterr().out
