import pytest

from flsim.cli import main

ROSE_PLAN_ARGS = [
    "plan", "--alpha", "65321", "--beta-min", "5", "--omega-min", "10",
    "--s-threshold-ms", "1000",
]


def read(path):
    return path.read_text(encoding="ascii")


def test_plan_rose_column(tmp_path, capsys):
    assert main(ROSE_PLAN_ARGS + ["--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "total_fls" in out and "195963" in out
    csv = read(tmp_path / "plan.csv").split("\n")
    assert csv[0] == "metric,value"
    table = dict(line.split(",") for line in csv[1:] if line)
    assert table["flocks"] == "218"
    assert table["total_extra_fls"] == "130642"
    assert table["overhead_pct"] == "200"


def test_plan_empty_alpha(capsys):
    assert main(["plan", "--alpha", "0", "--beta-min", "5", "--omega-min", "10",
                 "--s-threshold-ms", "1000"]) == 0
    assert "total_fls" in capsys.readouterr().out


def test_plan_small_derived_case(tmp_path):
    # alpha=12, beta=12s, omega=6s, threshold 3s: 3 flocks of 4, 2 extras each
    assert main([
        "plan", "--alpha", "12", "--beta-min", "0.2", "--omega-min", "0.1",
        "--s-threshold-ms", "3000", "--out", str(tmp_path),
    ]) == 0
    table = dict(
        line.split(",") for line in read(tmp_path / "plan.csv").split("\n")[1:] if line
    )
    assert table["flocks"] == "3"
    assert table["fls_per_flock"] == "4"
    assert table["extra_fls_per_flock"] == "2"
    assert table["total_fls"] == "18"


def test_plan_accepts_cloud_file(tmp_path, capsys):
    cloud = tmp_path / "cloud.txt"
    cloud.write_text("0 0 0 255 255 255 255\n1 0 0 255 255 255 255\n", encoding="ascii")
    assert main(["plan", "--cloud", str(cloud), "--beta-min", "5", "--omega-min", "10",
                 "--s-threshold-ms", "1000"]) == 0
    assert "flocks" in capsys.readouterr().out


def test_plan_invalid_threshold_fails_with_prefix(capsys):
    code = main(["plan", "--alpha", "10", "--beta-min", "5", "--omega-min", "10",
                 "--s-threshold-ms", "0"])
    assert code != 0
    assert capsys.readouterr().err.startswith("flsim: error:")


def test_analyze_rose_table(tmp_path, capsys):
    assert main([
        "analyze", "--alpha", "65321", "--mttf-hours", "720", "--mttr-seconds", "1",
        "--group-size", "10", "--group-size", "20", "--out", str(tmp_path),
    ]) == 0
    out = capsys.readouterr().out
    assert "published" in out and "note:" in out
    lines = read(tmp_path / "analyze.csv").split("\n")
    header = lines[0].split(",")
    rows = [dict(zip(header, line.split(","))) for line in lines[1:] if line]
    naive, g10, g20 = rows
    assert naive["group_size"] == "0"
    assert float(naive["mtdi_hours"]) * 3600 == pytest.approx(39.68, abs=0.01)
    assert g10["standby_count"] == "6533"
    assert g10["published_total_fls"] == "71853"
    assert g10["published_mtdi_hours"] == "2670"
    assert g20["total_fls"] == "68588"
    assert g20["published_total_fls"] == "68588"
    assert float(g10["mtdi_hours"]) == pytest.approx(2361.18, abs=0.01)
    assert float(g20["mtdi_hours"]) == pytest.approx(1295.70, abs=0.01)


def test_analyze_group_equals_alpha_boundary(capsys):
    assert main(["analyze", "--alpha", "50", "--mttf-hours", "720",
                 "--mttr-seconds", "1", "--group-size", "50"]) == 0
    out = capsys.readouterr().out
    row = [line for line in out.split("\n") if line.strip().startswith("50 ")][0]
    fields = row.split()
    assert fields[1] == "1"  # a single standby
    assert fields[2] == "51"


def test_analyze_requires_group_size(capsys):
    assert main(["analyze", "--alpha", "10", "--mttf-hours", "720",
                 "--mttr-seconds", "1"]) != 0
    assert capsys.readouterr().err.startswith("flsim: error:")


SIM_CONFIG = """
# desk-scale smoke configuration
kind=simulate
cloud=synth:grid:5:3
beta_min=15
omega_min=5
s_threshold_ms=180000
fls_speed=1e9
horizon_s=3600
"""


def test_simulate_deterministic_files(tmp_path, capsys):
    config = tmp_path / "exp.cfg"
    config.write_text(SIM_CONFIG, encoding="ascii")
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    assert main(["simulate", str(config), "--seed", "9", "--out", str(out_a)]) == 0
    assert main(["simulate", str(config), "--seed", "9", "--out", str(out_b)]) == 0
    assert read(out_a / "metrics_9.csv") == read(out_b / "metrics_9.csv")
    assert read(out_a / "summary.csv") == read(out_b / "summary.csv")
    table = dict(
        line.split(",") for line in read(out_a / "metrics_9.csv").split("\n")[1:] if line
    )
    assert table["max_transit"] == "0"
    assert table["onset_count"] == "0"
    assert table["min_illuminated"] == "5"


def test_simulate_multiple_replications(tmp_path):
    config = tmp_path / "exp.cfg"
    config.write_text(SIM_CONFIG, encoding="ascii")
    out = tmp_path / "runs"
    assert main(["simulate", str(config), "--seed", "1", "--replications", "3",
                 "--out", str(out)]) == 0
    assert sorted(p.name for p in out.glob("metrics_*.csv")) == [
        "metrics_1.csv", "metrics_2.csv", "metrics_3.csv",
    ]
    summary = dict(
        line.split(",") for line in read(out / "summary.csv").split("\n")[1:] if line
    )
    assert summary["replications"] == "3"


def test_simulate_zero_replications_is_an_error(tmp_path, capsys):
    config = tmp_path / "exp.cfg"
    config.write_text(SIM_CONFIG, encoding="ascii")
    code = main(["simulate", str(config), "--replications", "0", "--out", str(tmp_path / "x")])
    assert code != 0
    err = capsys.readouterr().err
    assert err.startswith("flsim: error:") and "nothing to run" in err


def test_simulate_unknown_key_rejected(tmp_path, capsys):
    config = tmp_path / "exp.cfg"
    config.write_text(SIM_CONFIG + "warp_speed=9\n", encoding="ascii")
    assert main(["simulate", str(config), "--out", str(tmp_path / "x")]) != 0
    assert "warp_speed" in capsys.readouterr().err


def test_simulate_missing_required_key(tmp_path, capsys):
    config = tmp_path / "exp.cfg"
    config.write_text("kind=simulate\ncloud=synth:grid:5:3\n", encoding="ascii")
    assert main(["simulate", str(config), "--out", str(tmp_path / "x")]) != 0
    assert "missing required" in capsys.readouterr().err


def test_simulate_wrong_kind(tmp_path, capsys):
    config = tmp_path / "exp.cfg"
    config.write_text("kind=plan\nalpha=5\n", encoding="ascii")
    assert main(["simulate", str(config), "--out", str(tmp_path / "x")]) != 0
    assert "kind" in capsys.readouterr().err
