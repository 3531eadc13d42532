import json
import os

import numpy as np
import pytest

from scenbar.cli import main, parse_config
from scenbar.jsonio import dumps, load_file
from scenbar.sampling import read_header

TOY_CONFIG = """\
# zero-noise contracting linear system, sized for sound desk-scale runs
system = linear
linear_a = 0.5
sigma_w = 0
degree = 2
horizon = 3
rho = 0.5
beta = 0.005
beta_s = 0.005
delta = 0.05
epsilon = 0.15
lipschitz_bound = 10
variance_bound = 1.25e-5
mu = -1e-3
p_max = 4
state_lower = -1
state_upper = 1
initial_lower = -0.1
initial_upper = 0.1
unsafe_lower = 0.9
unsafe_upper = 1
run_seed = 99
"""


@pytest.fixture
def toy_config(tmp_path):
    path = tmp_path / "toy.cfg"
    path.write_text(TOY_CONFIG)
    return str(path)


def write_config(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestConfigParsing:
    def test_round_trip_defaults(self, toy_config):
        cfg = parse_config(toy_config)
        assert cfg.system == "linear"
        assert cfg.rho == 0.5
        assert cfg.state_lower == (-1.0,)
        assert cfg.run_seed == 99

    def test_unknown_key_rejected(self, tmp_path, capsys):
        bad = write_config(tmp_path, TOY_CONFIG + "flux_capacitor = 1\n")
        assert main(["counts", "--config", bad]) == 1
        assert "flux_capacitor" in capsys.readouterr().err

    def test_epsilon_exceeding_lipschitz_bound(self, tmp_path, capsys):
        bad = write_config(tmp_path, TOY_CONFIG.replace("epsilon = 0.15", "epsilon = 0.9")
                           .replace("lipschitz_bound = 10", "lipschitz_bound = 0.5"))
        assert main(["counts", "--config", bad]) == 1
        assert "epsilon exceeds lipschitz_bound" in capsys.readouterr().err

    def test_beta_s_zero_rejected(self, tmp_path, capsys):
        bad = write_config(tmp_path, TOY_CONFIG.replace("beta_s = 0.005", "beta_s = 0"))
        assert main(["counts", "--config", bad]) == 1
        assert "beta_s" in capsys.readouterr().err

    def test_digest_ignores_operational_keys(self, tmp_path):
        a = parse_config(write_config(tmp_path, TOY_CONFIG, "a.cfg"))
        b = parse_config(write_config(tmp_path, TOY_CONFIG + "workers = 4\n", "b.cfg"))
        assert a.digest_hex() == b.digest_hex()
        c = parse_config(write_config(tmp_path, TOY_CONFIG.replace("rho = 0.5", "rho = 0.6"),
                                      "c.cfg"))
        assert a.digest_hex() != c.digest_hex()


class TestCounts:
    def test_prints_required_counts(self, toy_config, capsys):
        assert main(["counts", "--config", toy_config]) == 0
        out = capsys.readouterr().out
        assert "939" in out  # minimal scenario count for this configuration
        assert "N^ (noise realizations)  = 1" in out

    def test_case_study_counts(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path,
            "system = room\nrun_seed = 1\n",  # everything else is the room default
        )
        assert main(["counts", "--config", cfg]) == 0
        out = capsys.readouterr().out
        assert "1018779" in out
        assert "4445" in out


class TestSampleAndVerify:
    def run_sample(self, toy_config, out_dir):
        assert main(["sample", "--config", toy_config, "--out", out_dir]) == 0
        return os.path.join(out_dir, "dataset.bcds")

    def test_sample_writes_complete_dataset(self, toy_config, tmp_path, capsys):
        ds_path = self.run_sample(toy_config, str(tmp_path / "out"))
        header = read_header(ds_path)
        assert header["complete"]
        assert header["n_total"] == 939
        assert header["n_hat"] == 1

    def test_sample_is_idempotent(self, toy_config, tmp_path, capsys):
        out = str(tmp_path / "out")
        p = self.run_sample(toy_config, out)
        first = open(p, "rb").read()
        assert main(["sample", "--config", toy_config, "--out", out]) == 0
        assert open(p, "rb").read() == first

    def test_verify_certifies_toy(self, toy_config, tmp_path, capsys):
        out = str(tmp_path / "out")
        ds_path = self.run_sample(toy_config, out)
        code = main(["verify", "--config", toy_config, "--out", out, ds_path])
        captured = capsys.readouterr()
        assert code == 0, captured.err
        report = load_file(os.path.join(out, "report.json"))
        assert report["verdict"]["status"] == "Certified"
        assert report["verdict"]["probability_lower_bound"] == 0.5
        assert report["verdict"]["confidence"] == 0.99
        assert report["report_version"] == 1
        cert = load_file(os.path.join(out, "certificate.json"))
        assert len(cert["coefficients"]) == 3
        assert os.path.exists(os.path.join(out, "audit.csv"))

    def test_report_roundtrip_is_byte_identical(self, toy_config, tmp_path, capsys):
        out = str(tmp_path / "out")
        ds_path = self.run_sample(toy_config, out)
        main(["verify", "--config", toy_config, "--out", out, ds_path])
        capsys.readouterr()
        path = os.path.join(out, "report.json")
        raw = open(path, "rb").read()
        reparsed = json.loads(raw)
        assert (dumps(reparsed) + "\n").encode() == raw

    def test_verify_is_idempotent_modulo_timing(self, toy_config, tmp_path, capsys):
        out = str(tmp_path / "out")
        ds_path = self.run_sample(toy_config, out)
        main(["verify", "--config", toy_config, "--out", out, ds_path])
        r1 = load_file(os.path.join(out, "report.json"))
        main(["verify", "--config", toy_config, "--out", out, ds_path])
        capsys.readouterr()
        r2 = load_file(os.path.join(out, "report.json"))
        r1.pop("timing")
        r2.pop("timing")
        assert dumps(r1) == dumps(r2)

    def test_dataset_config_mismatch(self, toy_config, tmp_path, capsys):
        out = str(tmp_path / "out")
        ds_path = self.run_sample(toy_config, out)
        drifted = write_config(tmp_path, TOY_CONFIG.replace("rho = 0.5", "rho = 0.45"))
        code = main(["verify", "--config", drifted, "--out", out, ds_path])
        assert code == 1
        assert "dataset/config mismatch" in capsys.readouterr().err

    def test_missing_dataset(self, toy_config, tmp_path, capsys):
        code = main(["verify", "--config", toy_config, "--out", str(tmp_path / "empty")])
        assert code == 1
        assert "missing dataset" in capsys.readouterr().err

    def test_unsafe_system_is_inconclusive(self, tmp_path, capsys):
        cfg_text = (
            TOY_CONFIG.replace("linear_a = 0.5", "linear_a = 1.5")
            .replace("horizon = 3", "horizon = 6")
            .replace("lipschitz_bound = 10", "lipschitz_bound = 26")
        )
        cfg = write_config(tmp_path, cfg_text)
        out = str(tmp_path / "out")
        assert main(["sample", "--config", cfg, "--out", out]) == 0
        code = main(["verify", "--config", cfg, "--out", out,
                     os.path.join(out, "dataset.bcds")])
        capsys.readouterr()
        assert code == 2
        report = load_file(os.path.join(out, "report.json"))
        assert report["verdict"]["status"] == "Inconclusive"

    def test_unsound_override_flags(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "system = room\nrun_seed = 5\n")
        out = str(tmp_path / "out")
        args = ["--config", cfg, "--out", out, "--unsound-N", "2000", "--unsound-Nhat", "30"]
        assert main(["sample", *args]) == 0
        code = main(["verify", *args, os.path.join(out, "dataset.bcds")])
        captured = capsys.readouterr()
        assert code == 2
        assert "UNSOUND" in captured.out
        report = load_file(os.path.join(out, "report.json"))
        assert report["soundness"]["sound"] is False
        assert report["counts"]["n"] == 2000


class TestAuditAndDump:
    def test_audit_subcommand(self, toy_config, tmp_path, capsys):
        out = str(tmp_path / "out")
        assert main(["sample", "--config", toy_config, "--out", out]) == 0
        main(["verify", "--config", toy_config, "--out", out,
              os.path.join(out, "dataset.bcds")])
        capsys.readouterr()
        code = main([
            "audit", "--config", toy_config, "--out", out,
            "--certificate", os.path.join(out, "certificate.json"),
            "--grid", "101", "--mc", "4",
        ])
        assert code == 0
        out_text = capsys.readouterr().out
        assert "max B on initial region" in out_text
        lines = open(os.path.join(out, "audit.csv")).read().splitlines()
        assert lines[0] == "x,B,region_tag,expected_next_B,martingale_slack"
        assert len(lines) == 102

    def test_lp_dump_deterministic(self, toy_config, tmp_path, capsys):
        out = str(tmp_path / "out")
        assert main(["sample", "--config", toy_config, "--out", out]) == 0
        ds = os.path.join(out, "dataset.bcds")
        p1, p2 = str(tmp_path / "a.lp"), str(tmp_path / "b.lp")
        assert main(["lp-dump", "--config", toy_config, "--out", out, "--lp-out", p1, ds]) == 0
        assert main(["lp-dump", "--config", toy_config, "--out", out, "--lp-out", p2, ds]) == 0
        capsys.readouterr()
        assert open(p1, "rb").read() == open(p2, "rb").read()
        head = open(p1).readline().strip()
        assert head == "scenbar-lp 1"
