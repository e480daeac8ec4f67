import hashlib
import json
from pathlib import Path

import pytest

from pcpow.cli import main

MINIMAL = """\
[protocol]
name = generic-parallel
rounds = 800
round_interval_seconds = 2.0

[params]
chains = 3
epoch_length = 50
mining_rate_per_second = 0.1
"""

ADVERSARIAL = MINIMAL + """
[adversary]
fraction = 0.3
strategy = epoch-delayer
"""

DECLARED_CSVS = (
    "forking_rate.csv",
    "adoption_delay.csv",
    "difficulty_changes.csv",
    "difficulty_band.csv",
    "summary.json",
)


def write_config(tmp_path, text=MINIMAL, name="run.ini"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def hash_dir(d: Path) -> dict:
    return {
        p.name: hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(d.iterdir()) if p.is_file()
    }


class TestRun:
    def test_minimal_run_produces_all_csvs(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["run", str(cfg), "--seed", "7", "--out", str(out)]) == 0
        for name in DECLARED_CSVS + ("events.log", "config.resolved.ini"):
            assert (out / name).exists(), name

    def test_override_changes_exactly_that_field(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        rc = main([
            "run", str(cfg), "--seed", "7", "--out", str(out),
            "--override", "adversary_fraction=0.3",
            "--override", "adversary_strategy=epoch-delayer",
        ])
        assert rc == 0
        resolved = (out / "config.resolved.ini").read_text()
        assert "fraction = 0.3" in resolved
        assert "strategy = epoch-delayer" in resolved
        summary = json.loads((out / "summary.json").read_text())
        assert summary["mined_blocks"] > 0

    def test_same_seed_identical_outputs(self, tmp_path):
        cfg = write_config(tmp_path, ADVERSARIAL)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["run", str(cfg), "--seed", "5", "--out", str(out1)]) == 0
        assert main(["run", str(cfg), "--seed", "5", "--out", str(out2)]) == 0
        assert hash_dir(out1) == hash_dir(out2)

    def test_unknown_key_rejected(self, tmp_path):
        cfg = write_config(tmp_path, MINIMAL + "typod_key = 3\n")
        assert main(["run", str(cfg), "--seed", "1",
                     "--out", str(tmp_path / "o")]) == 1

    def test_unknown_override_rejected(self, tmp_path):
        cfg = write_config(tmp_path)
        rc = main(["run", str(cfg), "--seed", "1",
                   "--out", str(tmp_path / "o"),
                   "--override", "adversary_fracton=0.3"])
        assert rc == 1

    def test_seed_required(self, tmp_path):
        cfg = write_config(tmp_path)
        with pytest.raises(SystemExit):
            main(["run", str(cfg), "--out", str(tmp_path / "o")])

    def test_multi_seed_merged_report(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "multi"
        rc = main(["run", str(cfg), "--seed", "1", "2", "3",
                   "--out", str(out)])
        assert rc == 0
        merged = json.loads((out / "summary.json").read_text())
        assert set(merged["per_seed"]) == {"1", "2", "3"}
        vals = [merged["per_seed"][s]["forking_rate"] for s in ("1", "2", "3")]
        assert merged["mean"]["forking_rate"] == pytest.approx(
            sum(vals) / 3
        )

    def test_duplicate_seeds_rejected(self, tmp_path):
        cfg = write_config(tmp_path)
        rc = main(["run", str(cfg), "--seed", "1", "1",
                   "--out", str(tmp_path / "o")])
        assert rc == 1


class TestValidateParams:
    def test_reasonable_parameters_pass(self, tmp_path):
        cfg = write_config(tmp_path, """\
[protocol]
name = generic-parallel

[params]
mining_rate_per_second = 0.005
epoch_length = 200000000
honest_advantage = 0.5
concentration_slack = 0.05
""")
        assert main(["validate-params", str(cfg)]) == 0

    def test_small_advantage_fails_with_named_condition(self, tmp_path, capsys):
        cfg = write_config(tmp_path, """\
[protocol]
name = generic-parallel

[params]
mining_rate_per_second = 0.005
epoch_length = 200000000
honest_advantage = 0.3
concentration_slack = 0.05
""")
        assert main(["validate-params", str(cfg)]) == 1
        out = capsys.readouterr().out
        assert "advantage-band" in out and "FAIL" in out

    def test_saturated_rate_reports_undefined_window(self, tmp_path, capsys):
        cfg = write_config(tmp_path, """\
[protocol]
name = generic-parallel

[params]
mining_rate_per_second = 0.5
epoch_length = 2016
""")
        assert main(["validate-params", str(cfg)]) == 1
        out = capsys.readouterr().out
        assert "undefined" in out


class TestAttackCalc:
    def test_simple(self, capsys):
        rc = main(["attack-calc", "--attack", "simple",
                   "--honest-rate", "1000000", "--adversary-rate", "300000",
                   "--depth", "20"])
        assert rc == 0
        out = capsys.readouterr().out
        exact = float(out.splitlines()[0].split()[1])
        limit = float(out.splitlines()[1].split()[1])
        assert abs(exact - limit) < 1e-3

    def test_catchup(self, capsys):
        rc = main(["attack-calc", "--attack", "catchup",
                   "--honest-rate", "2", "--adversary-rate", "1",
                   "--damping", "4", "--epoch-length", "2016"])
        assert rc == 0
        assert "672" in capsys.readouterr().out

    def test_domain_error_names_flags(self, capsys):
        rc = main(["attack-calc", "--attack", "catchup",
                   "--honest-rate", "2", "--adversary-rate", "1",
                   "--damping", "1", "--epoch-length", "2016"])
        assert rc == 1
        assert "--damping" in capsys.readouterr().err


class TestReport:
    def test_round_trip_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path, ADVERSARIAL)
        out = tmp_path / "out"
        assert main(["run", str(cfg), "--seed", "9", "--out", str(out)]) == 0
        before = hash_dir(out)
        assert main(["report", str(out)]) == 0
        after = hash_dir(out)
        for name in DECLARED_CSVS:
            assert before[name] == after[name], name

    def test_partial_log_rejected(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["run", str(cfg), "--seed", "9", "--out", str(out)]) == 0
        log = out / "events.log"
        lines = log.read_text().splitlines()
        mine_lines = [i for i, ln in enumerate(lines) if ",mine," in ln]
        del lines[mine_lines[0]]
        log.write_text("\n".join(lines) + "\n")
        assert main(["report", str(out)]) == 2

    def test_missing_log_rejected(self, tmp_path):
        assert main(["report", str(tmp_path)]) == 2
