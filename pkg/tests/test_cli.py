"""
Tests for run configuration merging and the command-line entrypoint.
"""

import contextlib
import io
import json
import tempfile
import unittest
from pathlib import Path

import pandas as pd
import yaml

from run import build_parser, main
from src.analysis.thresholds import DatumKind
from src.core.data.datum import Oscillatory, PowerLaw
from src.core.operators.kernel import KernelParams
from src.services.config import ConfigError, RunConfig, build_config
from src.services.experiments import EXPECTED_BETA_STAR, _predictions


class TestRunConfig(unittest.TestCase):

    def test_json_echo_parses_back(self):
        config = RunConfig.from_dict({
            "command": "thresholds",
            "kernel": {"beta": 0.5, "M": 24},
            "kind": "oscillatory",
            "quad": {"rel_tol": 1e-7},
            "profile": {"kind": "oscillatory", "A": 5.0, "N": 32.0, "M": 24.0},
        })
        echoed = json.loads(json.dumps(config.to_dict()))
        self.assertEqual(RunConfig.from_dict(echoed), config)

    def test_defaults(self):
        config = RunConfig.from_dict({"command": "scaling"})
        self.assertEqual(config.kernel.beta, 0.25)
        self.assertEqual(config.kernel.M, 8.0)
        self.assertEqual(config.fit_window, (1e2, 1e5))
        self.assertEqual(len(config.beta_grid), 21)

    def test_rejects_bad_configs(self):
        bad = [
            {"command": "plot"},
            {"command": "scaling", "colour": "blue"},
            {"command": "picard", "kernel": {"beta": 0.5, "M": 8}},
            {"command": "picard", "picard_mode": "loss"},
            {"command": "thresholds", "kind": "oscillatory", "kernel": {"beta": 0.25, "M": 8}},
            {"command": "averaging", "battery": "huge"},
            {"command": "collision", "omega1": [0.0, 1.0]},
            {"command": "scaling", "fit_window": [1e5, 1e2]},
            {"command": "scaling", "kernel": {"beta": 1.5, "M": 8}},
            {"command": "scaling", "profile": {"kind": "gaussian"}},
        ]
        for data in bad:
            with self.assertRaises(ConfigError, msg=str(data)):
                RunConfig.from_dict(data)


class TestRunnerChecks(unittest.TestCase):

    def test_full_exponent_checked_as_upper_bound(self):
        predicted = _predictions(KernelParams(0.25, 8), PowerLaw(8))
        self.assertEqual(predicted["full"], (-5.0, "upper"))
        self.assertEqual(predicted["full_leading"], (-6.0, "sharp"))
        self.assertEqual(predicted["gain"], (-4.0, "sharp"))
        self.assertEqual(predicted["C234_D22"][1], "upper")
        self.assertEqual(predicted["C234_D3"][1], "upper")
        self.assertEqual(_predictions(KernelParams(0.5, 24), Oscillatory(5.0, 32, 24))["full"], (-11.5, "sharp"))

    def test_full_threshold_has_no_expected_crossing(self):
        self.assertIsNone(EXPECTED_BETA_STAR[DatumKind.FULL_POWER])
        self.assertEqual(EXPECTED_BETA_STAR[DatumKind.GAIN_POWER], 0.25)


class TestFlagOverrides(unittest.TestCase):

    def test_flags_win_over_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "exp.yaml"
            path.write_text(yaml.safe_dump({"kernel": {"beta": 0.5, "M": 12}, "samples": 10,
                                            "quad": {"rel_tol": 1e-8}}))
            args = build_parser().parse_args(["scaling", "--config", str(path), "--beta", "0.25",
                                              "--fit-window", "1e2,1e4"])
            config = build_config("scaling", args, args.config)
        self.assertEqual(config.kernel.beta, 0.25)
        self.assertEqual(config.kernel.M, 12.0)
        self.assertEqual(config.samples, 10)
        self.assertEqual(config.quad.rel_tol, 1e-8)
        self.assertEqual(config.fit_window, (1e2, 1e4))

    def test_malformed_flag(self):
        args = build_parser().parse_args(["scaling", "--grid", "1e-2,1e6"])
        with self.assertRaises(ConfigError):
            build_config("scaling", args)

    def test_missing_config_file(self):
        with self.assertRaises(ConfigError):
            build_config("scaling", None, "/nonexistent/exp.yaml")


class TestEntrypoint(unittest.TestCase):

    def _main(self, argv):
        stdout = io.StringIO()
        with contextlib.redirect_stdout(stdout):
            code = main(argv)
        return code, stdout.getvalue()

    def test_spectra_single_beta(self):
        with tempfile.TemporaryDirectory() as tmp:
            code, _ = self._main(["spectra", "--beta", "0", "--out", tmp])
            self.assertEqual(code, 0)
            table = pd.read_csv(Path(tmp) / "spectra.csv")
            self.assertEqual(len(table), 1)
            self.assertEqual(table["nu"][0], -3.0)
            self.assertEqual(table["direct_capacity"][0], "finite")
            document = json.loads((Path(tmp) / "spectra.json").read_text())
        self.assertEqual(document["status"], "ok")
        self.assertEqual(RunConfig.from_dict(document["config"]).betas, (0.0,))

    def test_outputs_are_deterministic(self):
        with tempfile.TemporaryDirectory() as tmp:
            self._main(["spectra", "--out", tmp])
            first = [(Path(tmp) / name).read_bytes() for name in ("spectra.csv", "spectra.json")]
            self._main(["spectra", "--out", tmp])
            second = [(Path(tmp) / name).read_bytes() for name in ("spectra.csv", "spectra.json")]
        self.assertEqual(first, second)

    def test_invalid_input_writes_error_json(self):
        with tempfile.TemporaryDirectory() as tmp:
            code, stdout = self._main(["picard", "--beta", "0.5", "--out", tmp])
            self.assertEqual(code, 1)
            payload = json.loads(stdout)
            self.assertEqual(payload["status"], "error")
            self.assertEqual(payload["error_type"], "ConfigError")
            self.assertEqual(json.loads((Path(tmp) / "error.json").read_text()), payload)

    def test_averaging_small_battery(self):
        with tempfile.TemporaryDirectory() as tmp:
            code, _ = self._main(["averaging", "--battery", "small", "--beta", "0.5", "--out", tmp])
            self.assertIn(code, (0, 2))
            table = pd.read_csv(Path(tmp) / "averaging.csv")
            self.assertGreater(len(table), 0)
            document = json.loads((Path(tmp) / "averaging.json").read_text())
        self.assertLess(document["results"]["max_rel_deviation"], 1e-9)
        self.assertGreater(document["results"]["appendix_min_ratio"], 0.0)

    def test_collision_records_oscillation_window(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "exp.yaml"
            path.write_text(yaml.safe_dump({"kernel": {"beta": 0.25, "M": 8}, "omega1": [5.0],
                                            "quad": {"rel_tol": 1e-4, "osc_window": 4.0}}))
            code, _ = self._main(["collision", "--config", str(path), "--out", tmp])
            self.assertIn(code, (0, 2))
            document = json.loads((Path(tmp) / "collision.json").read_text())
        self.assertEqual(document["results"]["quad"], {"osc_freq": 0.0, "osc_window": 4.0})
        self.assertEqual(document["config"]["quad"]["osc_window"], 4.0)


if __name__ == '__main__':
    unittest.main()
