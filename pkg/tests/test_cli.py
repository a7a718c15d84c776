import os

import numpy as np
import pytest

from micky.cli import main
from micky.segmentation import disk_mask, load_pgm, save_pgm

DESK_CONFIG = """\
[workload]
kind = "segmentation"
fixture_size = 8
fixture_radius = 0.3
layout = [2, 2]

[graph]
agents = 4
edge_prob = 0.4

[algorithm]
blocks = 16
rounds = 400
tau = 0.5
stepsize = "diminishing"
c = 0.9
gamma = 0.55

[run]
seed = 42
record_every = 10
snapshots = [0, 400]
oracle = true
"""


@pytest.fixture
def desk_config(tmp_path):
    path = tmp_path / "desk.toml"
    path.write_text(DESK_CONFIG)
    return str(path)


def test_run_writes_expected_artifacts(desk_config, tmp_path):
    out = str(tmp_path / "out")
    assert main(["run", "--config", desk_config, "--out", out]) == 0
    trace = (tmp_path / "out" / "trace.csv").read_text().splitlines()
    assert trace[0] == "round,agent,consensus_err,f_value,f_best,block_selected"
    recorded_rounds = 41  # 0, 10, ..., 400
    assert len(trace) == 1 + 4 * recorded_rounds
    for i in range(4):
        assert os.path.exists(os.path.join(out, f"solution_agent_{i}.pgm"))
        assert os.path.exists(os.path.join(out, f"object_agent_{i}.pgm"))
    assert os.path.exists(os.path.join(out, "summary.txt"))
    summary = (tmp_path / "out" / "summary.txt").read_text()
    assert "oracle optimal cost" in summary


def test_emitted_pgms_are_reloadable(desk_config, tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--config", desk_config, "--out", str(out)]) == 0
    for path in out.glob("*.pgm"):
        image = load_pgm(path)
        assert image.shape == (8, 8)


def test_run_is_byte_deterministic(desk_config, tmp_path):
    out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
    assert main(["run", "--config", desk_config, "--out", out1]) == 0
    assert main(["run", "--config", desk_config, "--out", out2]) == 0
    a = open(os.path.join(out1, "trace.csv"), "rb").read()
    b = open(os.path.join(out2, "trace.csv"), "rb").read()
    assert a == b


def test_missing_image_path_names_the_file(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text(
        '[workload]\nkind = "segmentation"\nimage = "nope.pgm"\nlayout = [1, 1]\n'
        "\n[graph]\nagents = 2\n"
    )
    code = main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert code != 0
    err = capsys.readouterr().err
    assert "nope.pgm" in err


def test_validate_passes_on_good_config(desk_config, capsys):
    assert main(["validate", "--config", desk_config]) == 0
    out = capsys.readouterr().out
    assert "strongly connected" in out
    assert "doubly stochastic" in out
    assert "FAIL" not in out


def test_validate_rejects_non_square_summable_stepsize(tmp_path, capsys):
    cfg = tmp_path / "bad_gamma.toml"
    cfg.write_text(
        DESK_CONFIG.replace("gamma = 0.55", "gamma = 0.4")
    )
    assert main(["validate", "--config", str(cfg)]) == 1
    out = capsys.readouterr().out
    assert "FAIL" in out
    assert "summable" in out or "gamma" in out


def test_validate_notes_constant_stepsize_bias(tmp_path, capsys):
    cfg = tmp_path / "const.toml"
    cfg.write_text(
        DESK_CONFIG.replace(
            'stepsize = "diminishing"', 'stepsize = "constant"'
        ).replace("gamma = 0.55", "")
    )
    assert main(["validate", "--config", str(cfg)]) == 0
    assert "neighborhood" in capsys.readouterr().out


def test_oracle_recovers_disk_object(tmp_path):
    cfg = tmp_path / "disk.toml"
    cfg.write_text(
        '[workload]\nkind = "segmentation"\nfixture_size = 64\nlayout = [2, 4]\n'
        "\n[graph]\nagents = 8\n"
    )
    out = tmp_path / "oracle"
    assert main(["oracle", "--config", str(cfg), "--out", str(out)]) == 0
    obj = load_pgm(out / "oracle_mask.pgm").ravel() > 0.5
    truth = disk_mask(64)
    iou = (obj & truth).sum() / (obj | truth).sum()
    assert iou >= 0.95
    values = (out / "oracle_value.txt").read_text()
    assert "min_cut_value" in values and "optimal_set_cost" in values


def test_oracle_zero_lambda_separates_trivially(tmp_path):
    cfg = tmp_path / "zlam.toml"
    cfg.write_text(
        '[workload]\nkind = "segmentation"\nfixture_size = 4\nlayout = [1, 1]\n'
        "lambda = 0.0\n\n[graph]\nagents = 1\n"
    )
    out = tmp_path / "oracle"
    assert main(["oracle", "--config", str(cfg), "--out", str(out)]) == 0
    text = (out / "oracle_value.txt").read_text()
    value = float(text.splitlines()[0].split()[1])
    assert value == pytest.approx(0.0, abs=1e-12)


def test_oracle_single_pixel_image(tmp_path):
    image_path = tmp_path / "one.pgm"
    save_pgm(np.array([[1.0]]), image_path)
    cfg = tmp_path / "one.toml"
    cfg.write_text(
        f'[workload]\nkind = "segmentation"\nimage = "one.pgm"\nlayout = [1, 1]\n'
        "\n[graph]\nagents = 1\n"
    )
    out = tmp_path / "oracle"
    assert main(["oracle", "--config", str(cfg), "--out", str(out)]) == 0
    from micky.config import load_config, build_workload

    instances, _, _ = build_workload(load_config(cfg))
    expected = min(instances[0].a_s[0], instances[0].a_t[0])
    text = (out / "oracle_value.txt").read_text()
    value = float(text.splitlines()[0].split()[1])
    assert value == pytest.approx(expected, abs=1e-12)


def test_fixture_subcommand(tmp_path):
    out = tmp_path / "fx"
    assert main(["fixture", "--out", str(out)]) == 0
    disk = load_pgm(out / "fixture_disk.pgm")
    truth = load_pgm(out / "fixture_truth.pgm")
    assert disk.shape == (64, 64) and truth.shape == (64, 64)
    assert set(np.unique(truth)) <= {0.0, 1.0}


def test_synthetic_workload_run(tmp_path):
    cfg = tmp_path / "syn.toml"
    cfg.write_text(
        '[workload]\nkind = "synthetic-cut"\nground_size = 8\n'
        "\n[graph]\nagents = 4\nedge_prob = 0.5\n"
        "\n[algorithm]\nblocks = 8\nrounds = 500\n"
        "\n[run]\nseed = 3\noracle = true\n"
    )
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    assert (out / "trace.csv").exists()
    assert not list(out.glob("*.pgm"))  # no images for synthetic workloads


def test_seed_override_changes_results(desk_config, tmp_path):
    out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
    assert main(["run", "--config", desk_config, "--out", out1, "--seed", "1"]) == 0
    assert main(["run", "--config", desk_config, "--out", out2, "--seed", "2"]) == 0
    a = open(os.path.join(out1, "trace.csv")).read()
    b = open(os.path.join(out2, "trace.csv")).read()
    assert a != b


def test_unknown_config_key_is_rejected(tmp_path, capsys):
    cfg = tmp_path / "typo.toml"
    cfg.write_text("[workload]\nknd = \"segmentation\"\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "knd" in capsys.readouterr().err
