import json

from varns.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out.strip(), captured.err.strip()


def last_json(out):
    return json.loads(out.splitlines()[-1])


def test_oscillator_resonance_exit_2(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "oscillator", "--a", "0", "--b", "9.8696044",
                           "--out", str(tmp_path))
    assert code == 2
    payload = last_json(out)
    assert payload["error"] == "resonance"
    assert payload["m"] == 1


def test_oscillator_healthy_run(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "oscillator", "--a", "1", "--b", "20",
                           "--alpha", "0", "--beta", "1", "--out", str(tmp_path))
    assert code == 0
    payload = last_json(out)
    assert abs(payload["order_estimate"] - 2.0) < 0.2
    assert payload["max_err"] < 1e-3
    csv = (tmp_path / "oscillator.csv").read_text().splitlines()
    assert csv[0] == "x,y1,y2,y_mean,y_diff,analytic"


def test_evaluate_zero_scenario(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "evaluate", "--scenario", "zero",
                           "--n", "8", "--time-nodes", "3", "--dt", "0.01",
                           "--out", str(tmp_path))
    assert code == 0
    assert last_json(out) == {"J": 0.0}
    assert (tmp_path / "lagrangian_report.json").exists()


def test_taylor_green_verify_spec_example(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "taylor-green-verify", "--nu", "0.1",
                           "--n", "32", "--refine", "3", "--out", str(tmp_path))
    assert code == 0
    payload = last_json(out)
    assert all(3.3 <= r <= 4.7 for r in payload["ratios"])
    assert (tmp_path / "taylor_green_orders.csv").exists()


def test_newton_dual_cli(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "newton-dual", "--n", "8", "--time-nodes",
                           "6", "--dt", "0.02", "--nu", "0.5",
                           "--perturb-w", "0.1", "--out", str(tmp_path))
    assert code == 0
    payload = last_json(out)
    assert payload["converged"] and payload["ok"]
    assert payload["u_w_gap"] <= 1e-8
    conv = (tmp_path / "convergence.csv").read_text().splitlines()
    assert conv[0] == "iter,residual,u_w_gap,J"
    assert len(conv) >= 3


def test_deterministic_outputs(tmp_path, capsys):
    d1, d2 = tmp_path / "r1", tmp_path / "r2"
    for d in (d1, d2):
        code, _, _ = run_cli(capsys, "evaluate", "--scenario", "random:7",
                             "--n", "10", "--time-nodes", "5", "--dt", "0.02",
                             "--out", str(d))
        assert code == 0
    assert (d1 / "lagrangian_report.json").read_bytes() == \
        (d2 / "lagrangian_report.json").read_bytes()


def test_out_dir_is_honored(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    out = tmp_path / "only-here"
    code, _, _ = run_cli(capsys, "evaluate", "--scenario", "zero", "--n", "8",
                         "--time-nodes", "3", "--dt", "0.01", "--out", str(out))
    assert code == 0
    entries = {p.name for p in tmp_path.iterdir()}
    assert entries == {"only-here"}


def test_env_var_default_out(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("VARNS_OUT", str(tmp_path / "envout"))
    code, _, _ = run_cli(capsys, "evaluate", "--scenario", "zero", "--n", "8",
                         "--time-nodes", "3", "--dt", "0.01")
    assert code == 0
    assert (tmp_path / "envout" / "lagrangian_report.json").exists()


def test_unknown_config_key_rejected(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"grid": {"dim": 2}, "viscosity": 0.1}))
    code, _, err = run_cli(capsys, "evaluate", "--config", str(cfg),
                           "--out", str(tmp_path))
    assert code == 1
    assert "viscosity" in err


def test_malformed_json_line_column(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{\n  "nu": 0.1,\n  oops\n}')
    code, _, err = run_cli(capsys, "evaluate", "--config", str(cfg),
                           "--out", str(tmp_path))
    assert code == 1
    payload = json.loads(err)
    assert "line 3" in payload["detail"]


def test_print_config_lists_all_defaults(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "evaluate", "--print-config",
                           "--out", str(tmp_path))
    assert code == 0
    cfg = json.loads(out)
    assert set(cfg) == {"grid", "nu", "solver", "scenario", "out", "seeds"}
    assert set(cfg["solver"]) == {"newton_tol", "max_newton",
                                  "continuation_steps", "time_scheme",
                                  "linear_tol"}


def test_config_file_with_overrides(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "grid": {"nodes": [12, 12], "time_nodes": 5, "dt": 0.02},
        "nu": 0.3, "scenario": "random:1"}))
    # flag wins over the file: the zero scenario forces J = 0 exactly
    code, out, _ = run_cli(capsys, "evaluate", "--config", str(cfg),
                           "--scenario", "zero", "--out", str(tmp_path))
    assert code == 0
    assert last_json(out)["J"] == 0.0
    report = json.loads((tmp_path / "lagrangian_report.json").read_text())
    assert "viscous" in report


def test_file_scenario_roundtrip(tmp_path, capsys):
    out1 = tmp_path / "dump"
    code, out, _ = run_cli(capsys, "solve-unsteady", "--scenario", "taylor-green",
                           "--n", "12", "--time-nodes", "5", "--dt", "0.02",
                           "--nu", "0.2", "--out", str(out1))
    assert code == 0
    code, out, _ = run_cli(capsys, "evaluate",
                           "--scenario", f"file:{out1}",
                           "--n", "12", "--time-nodes", "5", "--dt", "0.02",
                           "--nu", "0.2", "--out", str(tmp_path / "eval"))
    assert code == 0
    # marched state has the stationary structure, so J is near zero
    assert abs(last_json(out)["J"]) < 1e-10


def test_energy_cli(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "energy", "--scenario", "random:3",
                           "--n", "10", "--time-nodes", "5", "--dt", "0.02",
                           "--out", str(tmp_path))
    assert code == 0
    assert last_json(out)["pointwise_ok"] is True
    lines = (tmp_path / "energy_series.csv").read_text().splitlines()
    assert lines[0] == "t,E,rhs,mismatch"
    assert lines[1].endswith(",")          # no mismatch at the first node
    assert not lines[2].endswith(",")


def test_steady_cert_cli_zero_satisfied(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "steady-cert", "--scenario", "zero",
                           "--n", "10", "--out", str(tmp_path))
    assert code == 0
    payload = last_json(out)
    assert payload["satisfied"] is True
    assert payload["lhs"] == 0.0
    assert abs(payload["threshold"] - 4.820570513667908) < 1e-12
    assert payload["threshold_quoted_approx"] == 3.0


def test_steady_cert_cli_unsatisfied_exit_2(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "steady-cert", "--scenario", "taylor-green",
                           "--n", "16", "--nu", "0.01", "--out", str(tmp_path))
    assert code == 2
    assert last_json(out)["satisfied"] is False


def test_inequality_audit_cli(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "inequality-audit", "--scenario", "random:5",
                           "--n", "12", "--out", str(tmp_path))
    assert code == 0
    assert last_json(out)["asserted_ok"] is True
    lines = (tmp_path / "inequality_audit.csv").read_text().splitlines()
    assert lines[0] == "name,lhs,rhs,margin,asserted"
    assert len(lines) == 4


def test_boundary_audit_cli(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "boundary-audit", "--scenario", "zero",
                           "--n", "8", "--time-nodes", "3", "--dt", "0.05",
                           "--boundary", "wall", "--claimed-stationary",
                           "--out", str(tmp_path))
    assert code == 0
    assert last_json(out)["stationary_ok"] is True
    lines = (tmp_path / "boundary_audit.csv").read_text().splitlines()
    assert lines[0] == "face,node,check_a,check_b,check_c,check_d"


def test_variation_check_cli(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "variation-check", "--n", "10",
                           "--time-nodes", "5", "--dt", "0.02", "--seeds", "3",
                           "--out", str(tmp_path))
    assert code == 0
    assert last_json(out)["max_rel_err"] <= 1e-6


def test_solve_steady_cli_periodic_decay(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "solve-steady", "--scenario", "taylor-green",
                           "--n", "12", "--nu", "0.5", "--newton-tol", "1e-8",
                           "--out", str(tmp_path))
    assert code == 0
    payload = last_json(out)
    assert payload["converged"] is True
    assert payload["satisfied"] is True
