import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from levelpath.cli import load_theta, main, save_theta
from levelpath.config import build_spec, parse_config
from levelpath.network import NetworkSpec, random_theta

CONNECT_CFG = """
widths = 2,4,1
loss = square
data_n = 3
data_seed = 0
train_steps = 1500
train_lr = 0.05
train_seed_a = 1
train_seed_b = 2
out_dir = {out}
samples = 60
"""

CERTIFY_CFG = """
widths = 2,3,3
data_n = 3
data_seed = 7
out_dir = {out}
samples = 120
"""


@pytest.fixture()
def runner():
    return CliRunner()


def write_cfg(tmp_path, template, name="exp.cfg"):
    out = tmp_path / "out"
    cfg = tmp_path / name
    cfg.write_text(template.format(out=out))
    return cfg, out


def strip_timestamps(path: Path) -> dict:
    payload = json.loads(path.read_text())
    payload.pop("created_at", None)
    return payload


class TestTrainAndConnect:
    def test_full_pipeline(self, runner, tmp_path):
        cfg, out = write_cfg(tmp_path, CONNECT_CFG)
        result = runner.invoke(main, ["train", "--config", str(cfg)])
        assert result.exit_code == 0, result.output
        assert (out / "theta_a.npz").exists() and (out / "theta_b.npz").exists()

        result = runner.invoke(main, ["connect", str(out / "theta_a.npz"),
                                      str(out / "theta_b.npz"), "--config", str(cfg)])
        assert result.exit_code == 0, result.output
        report = json.loads((out / "path_report.json").read_text())
        assert report["verdict"] == "pass"
        trace = (out / "path_trace.csv").read_text().splitlines()
        assert trace[0] == "segment_index,lambda,loss,param_l2_norm,output_drift"
        seg_indices = [int(line.split(",")[0]) for line in trace[1:]]
        assert seg_indices == sorted(seg_indices)
        assert (out / "path_segments.json").exists()

    def test_verify_subcommand(self, runner, tmp_path):
        cfg, out = write_cfg(tmp_path, CONNECT_CFG)
        assert runner.invoke(main, ["train", "--config", str(cfg)]).exit_code == 0
        result = runner.invoke(main, ["verify", str(out / "theta_a.npz"),
                                      str(out / "theta_b.npz"), "--config", str(cfg)])
        assert result.exit_code == 0, result.output
        assert "pass" in result.output

    def test_width_rule_guard(self, runner, tmp_path):
        bad = CONNECT_CFG.replace("widths = 2,4,1", "widths = 2,3,1")
        cfg, out = write_cfg(tmp_path, bad)
        assert runner.invoke(main, ["train", "--config", str(cfg)]).exit_code == 0
        result = runner.invoke(main, ["connect", str(out / "theta_a.npz"),
                                      str(out / "theta_b.npz"), "--config", str(cfg)])
        assert result.exit_code == 2
        payload = json.loads(result.output.strip().splitlines()[-1])
        assert payload["error"] == "PreconditionError"
        assert "N+1" in payload["message"]

    def test_alpha_below_endpoints_rejected(self, runner, tmp_path):
        cfg, out = write_cfg(tmp_path, CONNECT_CFG)
        assert runner.invoke(main, ["train", "--config", str(cfg)]).exit_code == 0
        result = runner.invoke(main, ["connect", str(out / "theta_a.npz"),
                                      str(out / "theta_b.npz"), "--config", str(cfg),
                                      "--alpha", "1e-30"])
        assert result.exit_code == 2
        assert "PreconditionError" in result.output

    def test_divergence_reported(self, runner, tmp_path):
        diverging = CONNECT_CFG.replace("train_lr = 0.05", "train_lr = 1e6")
        cfg, _ = write_cfg(tmp_path, diverging)
        result = runner.invoke(main, ["train", "--config", str(cfg)])
        assert result.exit_code == 2
        assert "TrainingDiverged" in result.output


class TestCertifyAndContrast:
    def test_certify_writes_valid_certificate(self, runner, tmp_path):
        cfg, out = write_cfg(tmp_path, CERTIFY_CFG)
        result = runner.invoke(main, ["certify", "--config", str(cfg)])
        assert result.exit_code == 0, result.output
        cert = json.loads((out / "certificate.json").read_text())
        assert cert["valid"] is True
        assert cert["det_sign_theta"] * cert["det_sign_theta_prime"] == -1
        barrier = json.loads((out / "barrier.json").read_text())
        assert barrier["straight_line_barrier"] > 0.0

    def test_certify_rejects_wide_config(self, runner, tmp_path):
        bad = CERTIFY_CFG.replace("widths = 2,3,3", "widths = 2,4,3")
        cfg, _ = write_cfg(tmp_path, bad)
        result = runner.invoke(main, ["certify", "--config", str(cfg)])
        assert result.exit_code == 2
        assert "PreconditionError" in result.output

    def test_contrast(self, runner, tmp_path):
        cfg, out = write_cfg(tmp_path, CERTIFY_CFG)
        result = runner.invoke(main, ["contrast", "--config", str(cfg)])
        assert result.exit_code == 0, result.output
        payload = json.loads((out / "contrast.json").read_text())
        assert payload["certificate"]["valid"] is True
        assert payload["narrow_straight_line_barrier"] > 0.0
        assert payload["wide_report"]["verdict"] == "pass"


class TestDeterminism:
    def test_reports_identical_across_runs(self, runner, tmp_path):
        cfg, out = write_cfg(tmp_path, CONNECT_CFG)
        assert runner.invoke(main, ["train", "--config", str(cfg)]).exit_code == 0
        args = ["connect", str(out / "theta_a.npz"), str(out / "theta_b.npz"),
                "--config", str(cfg)]
        assert runner.invoke(main, args).exit_code == 0
        first = strip_timestamps(out / "path_report.json")
        first_trace = (out / "path_trace.csv").read_bytes()
        assert runner.invoke(main, args).exit_code == 0
        second = strip_timestamps(out / "path_report.json")
        assert first == second
        assert first_trace == (out / "path_trace.csv").read_bytes()

    def test_certificates_identical_across_runs(self, runner, tmp_path):
        cfg, out = write_cfg(tmp_path, CERTIFY_CFG)
        assert runner.invoke(main, ["certify", "--config", str(cfg)]).exit_code == 0
        first = strip_timestamps(out / "certificate.json")
        assert runner.invoke(main, ["certify", "--config", str(cfg)]).exit_code == 0
        assert first == strip_timestamps(out / "certificate.json")

    def test_seed_flag_changes_instance(self, runner, tmp_path):
        cfg, out = write_cfg(tmp_path, CERTIFY_CFG)
        assert runner.invoke(main, ["certify", "--config", str(cfg)]).exit_code == 0
        first = strip_timestamps(out / "certificate.json")
        assert runner.invoke(main, ["certify", "--config", str(cfg),
                                    "--seed", "99"]).exit_code == 0
        assert first != strip_timestamps(out / "certificate.json")


class TestThetaFiles:
    def test_roundtrip(self, tmp_path):
        spec = NetworkSpec((2, 4, 3, 1))
        theta = random_theta(spec, 0)
        save_theta(tmp_path / "t.npz", theta)
        loaded = load_theta(tmp_path / "t.npz", spec)
        assert loaded.equal(theta)

    def test_config_parser_rejects_unknown_keys(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("widths = 2,3,1\nbogus = 1\n")
        from levelpath.errors import PreconditionError
        with pytest.raises(PreconditionError):
            parse_config(cfg)

    def test_config_defaults_and_spec(self, tmp_path):
        cfg = tmp_path / "min.cfg"
        cfg.write_text("widths = 3,5,2\nloss = cross_entropy\n")
        parsed = parse_config(cfg)
        spec = build_spec(parsed)
        assert spec.widths == (3, 5, 2)
        assert spec.loss.name == "cross_entropy"
        assert parsed.alpha is None
