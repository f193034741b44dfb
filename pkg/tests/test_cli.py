import json

from ruswitch import cli

TINY = ["--set", "waveform.num_resource_blocks=10",
        "--set", "waveform.allocated_tones=120",
        "--set", "waveform.fft_size=256",
        "--set", "waveform.guard_tones=20",
        "--set", "optimizer.sweep_evm_req_db=-25",
        "--set", "sweep.channel_draws=200",
        "--set", "sweep.se_points=12"]


def run(args):
    return cli.main(args)


def read_csv(path):
    lines = path.read_text().strip().split("\n")
    header = lines[0].split(",")
    return header, [dict(zip(header, l.split(","))) for l in lines[1:]]


def test_evm_sweep_deterministic(tmp_path):
    args = ["evm-sweep", "--trials", "10", "--seed", "7",
            "--set", "sweep.backoff_min_db=4", "--set", "sweep.backoff_max_db=6"]
    assert run(args + TINY + ["--out", str(tmp_path / "a")]) == 0
    assert run(args + TINY + ["--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "evm_sweep.csv").read_bytes()
    b = (tmp_path / "b" / "evm_sweep.csv").read_bytes()
    assert a == b
    header, rows = read_csv(tmp_path / "a" / "evm_sweep.csv")
    assert header == ["waveform", "backoff_db", "evm_db", "trials", "seed"]
    assert len(rows) == 6
    assert {r["waveform"] for r in rows} == {"cp-ofdm", "dft-s-ofdm"}


def test_manifest_contents(tmp_path):
    out = tmp_path / "m"
    assert run(["papr", "--trials", "64", "--seed", "3", "--out", str(out)] + TINY) == 0
    doc = json.loads((out / "manifest.json").read_text())
    assert doc["command"] == "papr"
    assert doc["seed"] == 3
    assert doc["trials"] == 64
    assert len(doc["config_sha256"]) == 64
    assert "papr_ccdf.csv" in doc["outputs"]


def test_config_error_exit_code(tmp_path):
    assert run(["papr", "--set", "pa.bogus=1", "--out", str(tmp_path)]) == 2
    assert run(["papr", "--config", str(tmp_path / "missing.ini"),
                "--out", str(tmp_path)]) == 2
    assert run(["papr", "--set", "waveform.modulation_order=5",
                "--out", str(tmp_path)]) == 2


def test_infeasible_exit_code(tmp_path):
    code = run(["min-backoff", "--req", "-80", "--trials", "5",
                "--out", str(tmp_path)] + TINY)
    assert code == 3


def test_papr_csv_wellformed(tmp_path):
    assert run(["papr", "--trials", "256", "--seed", "1",
                "--out", str(tmp_path)] + TINY) == 0
    header, rows = read_csv(tmp_path / "papr_ccdf.csv")
    assert header == ["waveform", "papr_db", "ccdf"]
    ccdf = [float(r["ccdf"]) for r in rows]
    assert all(0 < c <= 1 for c in ccdf)


def test_min_backoff_table(tmp_path):
    assert run(["min-backoff", "--req", "-26", "--trials", "40", "--seed", "2",
                "--out", str(tmp_path)] + TINY) == 0
    header, rows = read_csv(tmp_path / "min_backoff.csv")
    table = {r["waveform"]: float(r["b_min_db"]) for r in rows}
    assert table["dft-s-ofdm"] < table["cp-ofdm"]


def test_crossover_artifacts(tmp_path):
    assert run(["crossover", "--trials", "40", "--seed", "2",
                "--out", str(tmp_path)] + TINY) == 0
    header, rows = read_csv(tmp_path / "crossover_curves.csv")
    assert header == ["se", "p_ru_simo", "p_ru_mimo", "mode_simo", "channel_label"]
    header, rows = read_csv(tmp_path / "crossover_points.csv")
    assert {r["mode_simo"] for r in rows} == {"SIMO-CP", "SIMO-DFT"}
    assert {r["channel_label"] for r in rows} == {"median", "fixed-draw"}


def test_sweep_artifacts_and_plots(tmp_path):
    assert run(["sweep-se", "--trials", "40", "--seed", "2", "--plot",
                "--out", str(tmp_path)] + TINY) == 0
    header, rows = read_csv(tmp_path / "se_sweep.csv")
    assert header == ["se_bits_hz", "mode", "inner_selection", "b_db", "p_tx_w",
                      "p_ru_w", "ee_bits_per_joule", "feasible"]
    assert {r["mode"] for r in rows} == {"Full-MIMO", "Switch-CP", "Switch-DFT"}
    assert (tmp_path / "power_vs_se.svg").exists()
    assert (tmp_path / "ee_vs_se.svg").exists()


def test_optimize_ee_ordering(tmp_path):
    assert run(["optimize-ee", "--trials", "60", "--seed", "2",
                "--out", str(tmp_path)] + TINY) == 0
    header, rows = read_csv(tmp_path / "ee_optimum.csv")
    assert header == ["mode", "p_star", "y_star", "ee", "iterations"]
    ee = {r["mode"]: float(r["ee"]) for r in rows}
    assert ee["Switch-DFT"] >= ee["Switch-CP"] >= ee["Full-MIMO"]


def test_nonconvergence_exit_code(tmp_path, monkeypatch):
    from ruswitch import optimizer as opt

    def explode(*args, **kwargs):
        raise opt.NonconvergenceError("stuck", ())

    monkeypatch.setattr("ruswitch.cli.opt.solve_mode", explode)
    code = run(["optimize-ee", "--trials", "30", "--seed", "2",
                "--out", str(tmp_path)] + TINY)
    assert code == 4


def test_config_file_not_mutated(tmp_path):
    from ruswitch.config import default_scenario, save_scenario

    path = tmp_path / "scen.ini"
    save_scenario(default_scenario(), path)
    before = path.read_bytes()
    assert run(["papr", "--config", str(path), "--trials", "64",
                "--out", str(tmp_path / "o")] + TINY) == 0
    assert path.read_bytes() == before
