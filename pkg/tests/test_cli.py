import numpy as np
import pytest

from pinnbias.artifacts import read_csv
from pinnbias.cli import EXIT_DATAERR, EXIT_NOINPUT, EXIT_NOT_CONVERGED, EXIT_OK, EXIT_USAGE, OUTPUT_ENV, main
from pinnbias.jetnet import init_params, save_params

SMALL_CONFIG = """
[train]
layer_sizes = 1,12,12,1
collocation = 64
checkpoint_interval = 50
"""


@pytest.fixture
def small_cfg(tmp_path):
    path = tmp_path / "small.ini"
    path.write_text(SMALL_CONFIG)
    return path


@pytest.fixture(scope="module")
def eq25_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "eq25"
    code = main(["train", "--problem", "eq25", "--k", "2", "--seed", "7", "--out", str(out), "--checkpoints"])
    return code, out


def test_train_converges_with_manifest_and_trace(eq25_run):
    code, out = eq25_run
    assert code == EXIT_OK
    assert (out / "manifest.ini").exists() and (out / "trace.csv").exists()
    assert read_csv(out / "trace.csv")[-1]["iteration"] == "1000"


def test_rerun_from_manifest_is_byte_identical(eq25_run, tmp_path):
    _, out = eq25_run
    assert main(["train", "--manifest", str(out / "manifest.ini"), "--out", str(tmp_path), "--no-plot"]) == EXIT_OK
    assert (tmp_path / "trace.csv").read_bytes() == (out / "trace.csv").read_bytes()
    assert (tmp_path / "solution.csv").read_bytes() == (out / "solution.csv").read_bytes()


def test_plot_from_solution_csv(eq25_run, tmp_path):
    _, out = eq25_run
    assert main(["plot", "--solution", str(out / "solution.csv"), "--out", str(tmp_path / "s.svg")]) == EXIT_OK
    rows = read_csv(out / "solution.csv")
    gap = max(abs(float(r["u_net"]) - float(r["closed_form"])) for r in rows)
    assert gap < 0.05 * max(abs(float(r["closed_form"])) for r in rows)


def test_spectrum_from_checkpoint(eq25_run, tmp_path):
    _, out = eq25_run
    ckpt = out / "checkpoints" / "params_0001000.bin"
    dest = tmp_path / "sp.csv"
    assert main(["spectrum", "--checkpoint", str(ckpt), "--problem", "eq25", "--k", "2", "--out", str(dest)]) == 0
    (row,) = read_csv(dest)
    assert row["iteration"] == "1000" and row["frequency"] == "2"
    assert float(row["abs_error"]) < 0.05


def test_no_convergence_exit(small_cfg, tmp_path):
    args = ["train", "--problem", "eq20", "--config", str(small_cfg), "--budget", "100", "--out", str(tmp_path)]
    assert main(args) == EXIT_NOT_CONVERGED


def test_config_file_names_problem(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[problem]\nid = eq21\nk = 2\n" + SMALL_CONFIG)
    assert main(["train", "--config", str(cfg), "--budget", "50", "--out", str(tmp_path / "o"), "--no-plot"]) in (0, 2)
    assert "eq21" in (tmp_path / "o" / "manifest.ini").read_text()


def test_output_dir_from_environment(small_cfg, tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
    main(["train", "--problem", "eq18", "--config", str(small_cfg), "--budget", "50", "--seed", "3", "--no-plot"])
    assert (tmp_path / "env" / "eq18_s3" / "trace.csv").exists()


@pytest.mark.parametrize(
    "argv",
    [
        ["train", "--problem", "eqXX"],
        ["train", "--problem", "eq21", "--k", "4"],
        ["train"],
        ["train", "--problem", "eq25", "--k", "2", "--bogus"],
        ["train", "--problem", "eq25", "--k", "2", "--activation", "relu"],
        ["train", "--problem", "eq25", "--k", "2", "--budget", "0"],
        ["frobnicate"],
        [],
        ["plot", "--out", "x.svg"],
    ],
)
def test_usage_errors(argv):
    assert main(argv) == EXIT_USAGE


def test_unreadable_checkpoint(tmp_path):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"garbage")
    args = ["spectrum", "--checkpoint", str(bad), "--problem", "eq17"]
    assert main(args) == EXIT_NOINPUT
    args[2] = str(tmp_path / "missing.bin")
    assert main(args) == EXIT_NOINPUT


def test_aliased_frequency(tmp_path):
    ckpt = tmp_path / "zero.bin"
    save_params(init_params(0, (1, 4, 1)).zeros_like(), ckpt)
    args = ["spectrum", "--checkpoint", str(ckpt), "--problem", "eq17", "--freqs", "2,128", "--out", str(tmp_path / "s.csv")]
    assert main(args) == EXIT_DATAERR
    args[-3] = "2,4"
    assert main(args) == EXIT_OK
    assert all(float(r["measured_amplitude"]) == 0.0 for r in read_csv(tmp_path / "s.csv"))


def test_plot_zero_network_from_checkpoint(tmp_path):
    ckpt = tmp_path / "zero.bin"
    save_params(init_params(0, (1, 4, 1)).zeros_like(), ckpt)
    svg = tmp_path / "flat.svg"
    assert main(["plot", "--checkpoint", str(ckpt), "--problem", "eq21", "--k", "2", "--out", str(svg)]) == EXIT_OK
    assert svg.read_text().startswith("<?xml")


def test_ntk_linear_debug_model(tmp_path, capsys):
    assert main(["ntk", "--linear", "--points-list", "1,2,3", "--out", str(tmp_path), "--no-plot"]) == EXIT_OK
    eig = [float(r["eigenvalue"]) for r in read_csv(tmp_path / "eigenvalues.csv")]
    # Gram matrix x x^T has the single nonzero eigenvalue |x|^2
    np.testing.assert_allclose(eig, [14.0, 0.0, 0.0], atol=1e-12)
    rows = read_csv(tmp_path / "mode_trace.csv")
    assert rows[0]["mode_index"] == "1" and rows[0]["checkpoint_iteration"] == "0"
    assert "rank_correlation" in capsys.readouterr().out


def test_ntk_small_mlp_eigenvalues_sorted(tmp_path):
    args = ["ntk", "--iterations", "20", "--checkpoint-interval", "10", "--drift", "--out", str(tmp_path), "--no-plot"]
    assert main(args) == EXIT_OK
    eig = [float(r["eigenvalue"]) for r in read_csv(tmp_path / "eigenvalues.csv")]
    assert len(eig) == 32 and eig == sorted(eig, reverse=True)
    drift = read_csv(tmp_path / "drift.csv")
    assert [r["iteration"] for r in drift] == ["0", "10", "20"]
    assert float(drift[0]["top_eigenvalue"]) == pytest.approx(eig[0], rel=1e-12)


def test_compare_and_suite(tmp_path, small_cfg, capsys):
    out = tmp_path / "cmp"
    args = ["compare", "--problem", "eq25", "--k", "2", "--budget", "100", "--config", str(small_cfg),
            "--out", str(out), "--no-plot"]
    assert main(args) == EXIT_OK
    rows = read_csv(out / "compare.csv")
    assert [r["mode"] for r in rows] == ["pinn", "supervised"]
