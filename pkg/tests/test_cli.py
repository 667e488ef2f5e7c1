"""
Command line tests: every subcommand on tiny runs, exit codes, resume and determinism.

Run with: pytest tests/test_cli.py -v
"""

import csv

import pytest

from wavepinn.main import main

TINY = [
    "--problem", "example1_small",
    "--epochs", "4",
    "--set", "test_interval=2",
    "--set", "hidden_widths=8,6",
    "--set", "subnet_count=2",
    "--set", "n_interior=32",
    "--set", "n_boundary=8",
    "--set", "n_initial=8",
    "--set", "eval_resolution=16",
]


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh, strict=True))


def report_bytes(out_dir):
    """Every text output below out_dir; checkpoints are binary archives and left out."""
    return {
        str(p.relative_to(out_dir)): p.read_bytes()
        for p in sorted(out_dir.rglob("*"))
        if p.is_file() and p.suffix in (".csv", ".txt", ".env")
    }


def with_epochs(args, epochs):
    args = list(args)
    args[args.index("--epochs") + 1] = str(epochs)
    return args


def test_train_writes_reports(tmp_path):
    out = tmp_path / "train"
    assert main(["train", *TINY, "--output-dir", str(out)]) == 0

    for name in ("rel_curve.csv", "loss_curve.csv", "error_grid.csv", "summary.txt", "effective_config.env"):
        assert (out / name).is_file(), name
    assert (out / "checkpoints" / "checkpoint_latest.npz").is_file()
    assert (out / "checkpoints" / "final.npz").is_file()

    assert len(read_rows(out / "loss_curve.csv")) == 5
    assert [row[0] for row in read_rows(out / "rel_curve.csv")] == ["epoch", "2", "4"]
    assert len(read_rows(out / "error_grid.csv")) == 16 * 16 + 1
    summary = (out / "summary.txt").read_text()
    assert "S-NFPINN" in summary


def test_eval_uses_checkpoint_problem(tmp_path):
    out = tmp_path / "train"
    assert main(["train", *TINY, "--normalization", "temporal", "--output-dir", str(out)]) == 0
    checkpoint = out / "checkpoints" / "final.npz"

    evaluated = tmp_path / "eval"
    code = main([
        "eval", "--checkpoint", str(checkpoint),
        "--set", "eval_resolution=10", "--output-dir", str(evaluated),
    ])
    assert code == 0
    rows = read_rows(evaluated / "error_grid.csv")
    assert rows[0] == ["x1", "x2", "t", "exact", "pred", "abs_err"]
    assert len(rows) == 101
    assert "T-NFPINN" in (evaluated / "summary.txt").read_text()


def test_compare_with_plain_baseline(tmp_path):
    out = tmp_path / "compare"
    assert main(["compare", *TINY, "--include-plain", "--output-dir", str(out)]) == 0

    for sub in ("none", "spatial", "temporal", "spatiotemporal", "plain"):
        assert (out / sub / "rel_curve.csv").is_file(), sub
        assert (out / sub / "checkpoints" / "final.npz").is_file(), sub
    rows = read_rows(out / "rel_curve.csv")
    assert rows[0] == ["epoch", "FPINN", "S-NFPINN", "T-NFPINN", "ST-NFPINN", "PINN"]
    assert len(rows) == 3
    summary = (out / "summary.txt").read_text()
    for label in ("FPINN", "S-NFPINN", "T-NFPINN", "ST-NFPINN", "PINN"):
        assert f"\n{label} " in summary


def test_compare_rerun_is_byte_identical(tmp_path):
    out = tmp_path / "compare"
    assert main(["compare", *TINY, "--output-dir", str(out)]) == 0
    first = report_bytes(out)
    assert main(["compare", *TINY, "--output-dir", str(out)]) == 0
    assert report_bytes(out) == first
    assert "rel_curve.csv" in first and "spatial/error_grid.csv" in first


def test_resume_matches_uninterrupted_run(tmp_path):
    assert main(["train", *TINY, "--output-dir", str(tmp_path / "first")]) == 0
    checkpoint = tmp_path / "first" / "checkpoints" / "checkpoint_latest.npz"

    longer = with_epochs(TINY, 8)
    assert main(["train", *longer, "--resume", str(checkpoint), "--output-dir", str(tmp_path / "resumed")]) == 0
    assert main(["train", *longer, "--output-dir", str(tmp_path / "full")]) == 0

    for name in ("loss_curve.csv", "rel_curve.csv", "error_grid.csv"):
        assert (tmp_path / "resumed" / name).read_bytes() == (tmp_path / "full" / name).read_bytes()


def test_resume_past_requested_epochs_is_config_error(tmp_path):
    assert main(["train", *TINY, "--output-dir", str(tmp_path / "first")]) == 0
    checkpoint = tmp_path / "first" / "checkpoints" / "checkpoint_latest.npz"
    code = main(["train", *with_epochs(TINY, 3), "--resume", str(checkpoint), "--output-dir", str(tmp_path / "again")])
    assert code == 2


def test_gradcheck_command(tmp_path):
    code = main([
        "gradcheck", "--seeds", "2", "--subnets", "1,3", "--points", "4", "--params", "10",
        "--output-dir", str(tmp_path),
    ])
    assert code == 0
    rows = read_rows(tmp_path / "gradcheck.csv")
    assert rows[0] == ["seed", "subnet_count", "first_layer", "grad_rel_err", "diag2_rel_err", "param_rel_err", "passed"]
    assert len(rows) == 1 + 2 * 2 * 2
    assert "failed: 0" in (tmp_path / "summary.txt").read_text()


def test_residualcheck_command(tmp_path):
    code = main([
        "residualcheck", "--problems", "example1_small,example4_sphere", "--modes", "none,spatiotemporal",
        "--points", "200", "--output-dir", str(tmp_path),
    ])
    assert code == 0
    rows = read_rows(tmp_path / "residualcheck.csv")
    assert rows[0][:3] == ["problem", "mode", "kind"]


def test_failed_check_exit_code(tmp_path):
    code = main([
        "residualcheck", "--problems", "example1_large", "--modes", "spatiotemporal",
        "--legacy-st-time-factor", "--points", "100", "--output-dir", str(tmp_path),
    ])
    assert code == 7
    assert (tmp_path / "residualcheck.csv").is_file()


@pytest.mark.parametrize(
    "argv, code",
    [
        (["train", "--set", "bogus_key=1"], 2),
        (["train", "--problem", "example42"], 2),
        (["train", "--set", "scales=1,2", "--set", "subnet_count=3", "--problem", "example1_small"], 2),
        (["train", "--config", "does/not/exist.env"], 3),
        (["eval", "--checkpoint", "does/not/exist.npz"], 3),
        (["train", "--problem", "example1_small", "--set", "adam_beta1=1.5"], 2),
        (["compare", "--problem", "example1_small", "--set", "adam_eps=-1"], 2),
    ],
)
def test_error_exit_codes(argv, code, tmp_path):
    assert main([*argv, "--output-dir", str(tmp_path)]) == code


def test_custom_problem_file(tmp_path):
    problem_file = tmp_path / "problem.env"
    problem_file.write_text(
        "name=standing_wave\n"
        "dim=2\n"
        "bounds=0,1;0,1\n"
        "t_max=1\n"
        "a_sq=1\n"
        "boundary=0\n"
        "initial_value=sin(pi*x1)*sin(pi*x2)\n"
        "exact=sin(pi*x1)*sin(pi*x2)*cos(sqrt(2)*pi*t)\n"
    )
    out = tmp_path / "run"
    args = [arg if arg != "example1_small" else "custom" for arg in TINY]
    assert main(["train", *args, "--set", f"problem_file={problem_file}", "--output-dir", str(out)]) == 0
    assert "standing_wave" in (out / "summary.txt").read_text()
    assert len(read_rows(out / "rel_curve.csv")) == 3


def test_invalid_network_config_writes_nothing(tmp_path):
    out = tmp_path / "run"
    code = main(["train", *TINY, "--set", "hidden_widths=7,6", "--output-dir", str(out)])
    assert code == 2
    assert not (out / "effective_config.env").exists()


def test_resume_from_run_directory(tmp_path):
    assert main(["train", *TINY, "--output-dir", str(tmp_path / "first")]) == 0
    longer = with_epochs(TINY, 6)
    assert main(["train", *longer, "--resume", str(tmp_path / "first"), "--output-dir", str(tmp_path / "resumed")]) == 0
    assert [row[0] for row in read_rows(tmp_path / "resumed" / "rel_curve.csv")] == ["epoch", "2", "4", "6"]
    assert main(["train", *longer, "--resume", str(tmp_path), "--output-dir", str(tmp_path / "again")]) == 3
