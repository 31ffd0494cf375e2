"""
Tests for experiment files, presets and layering.
"""

import pytest

from hidex.errors import ConfigurationError
from hidex.experiment import PRESETS, load_experiment, merge
from hidex.models import ReceiverName, Scenario


class TestMerge:
    """Tests for the recursive merge."""

    def test_tables_merge_by_key(self):
        """Nested tables keep keys the update does not touch."""
        merged = merge({"frame": {"preamble_len": 8, "header_len": 0}}, {"frame": {"header_len": 16}})
        assert merged == {"frame": {"preamble_len": 8, "header_len": 16}}

    def test_lists_replace(self):
        """Grids are replaced whole."""
        assert merge({"snr_grid_db": [0, 10]}, {"snr_grid_db": [20]}) == {"snr_grid_db": [20]}

    def test_does_not_mutate(self):
        """Inputs are left alone."""
        base = {"frame": {"preamble_len": 8}}
        merge(base, {"frame": {"preamble_len": 16}})
        assert base == {"frame": {"preamble_len": 8}}


class TestPresets:
    """Tests for per-scenario defaults."""

    def test_every_scenario_has_a_preset(self):
        """No scenario falls through to bare field defaults."""
        assert set(PRESETS) == set(Scenario)

    def test_default_scenario(self):
        """No file and no scenario gives the uncoded BER sweep."""
        cfg = load_experiment()
        assert cfg.scenario == Scenario.UNCODED
        assert cfg.receivers == [ReceiverName.GENIE, ReceiverName.BP, ReceiverName.MMSE, ReceiverName.CONVENTIONAL]

    def test_detect_prob_preset(self):
        """Detection sweeps an SINR grid at 20 dB."""
        cfg = load_experiment(scenario="detect-prob")
        assert cfg.snr_grid_db == [20.0]
        assert cfg.sinr_db == [0.0, 2.0, 4.0, 6.0, 8.0, 10.0]

    def test_coded_preset_frame(self):
        """Coded presets carry one (500, 250) codeword per frame."""
        cfg = load_experiment(scenario=Scenario.CODED)
        assert cfg.frame.payload_len == cfg.code.n == 500

    def test_schedules_preset(self):
        """The schedule comparison holds the detector-decoder budget fixed."""
        cfg = load_experiment(scenario="schedules")
        assert {s.total_iterations for s in cfg.schedules} == {30}


class TestLoadExperiment:
    """Tests for TOML loading and layering."""

    def test_file_overrides_preset(self, tmp_path):
        """File values replace the preset, untouched keys keep it."""
        path = tmp_path / "exp.toml"
        path.write_text(
            'scenario = "mse"\n'
            "snr_grid_db = [5.0, 15.0]\n"
            "trials = 30\n"
            "\n"
            "[frame]\n"
            "preamble_len = 32\n"
        )
        cfg = load_experiment(path)
        assert cfg.scenario == Scenario.MSE
        assert cfg.snr_grid_db == [5.0, 15.0]
        assert cfg.trials == 30
        assert cfg.frame.preamble_len == 32
        assert cfg.frame.header_len == 16
        assert ReceiverName.GENIE not in cfg.receivers

    def test_schedule_tables(self, tmp_path):
        """[[schedules]] entries become schedule configs."""
        path = tmp_path / "sched.toml"
        path.write_text(
            'scenario = "schedules"\n'
            "[[schedules]]\n"
            "i_det = 2\n"
            "i_dec = 5\n"
            "[[schedules]]\n"
            "i_det = 5\n"
            "i_dec = 2\n"
        )
        cfg = load_experiment(path)
        assert [s.label for s in cfg.schedules] == ["(2,5)", "(5,2)"]

    def test_overrides_win(self, tmp_path):
        """Command-line values beat the file; None means unset."""
        path = tmp_path / "exp.toml"
        path.write_text("trials = 30\nseed = 4\n")
        cfg = load_experiment(path, overrides={"trials": 5, "seed": None})
        assert cfg.trials == 5
        assert cfg.seed == 4

    def test_argument_scenario_beats_file(self, tmp_path):
        """The subcommand decides the scenario."""
        path = tmp_path / "exp.toml"
        path.write_text('scenario = "mse"\n')
        assert load_experiment(path, scenario="components").scenario == Scenario.COMPONENTS

    def test_unknown_scenario(self):
        """Unknown scenario names list the valid ones."""
        with pytest.raises(ConfigurationError, match="detect-prob"):
            load_experiment(scenario="fountain")

    def test_missing_file(self, tmp_path):
        """A missing file is a configuration error."""
        with pytest.raises(ConfigurationError, match="not found"):
            load_experiment(tmp_path / "nope.toml")

    def test_invalid_toml(self, tmp_path):
        """Syntax errors are reported with the path."""
        path = tmp_path / "broken.toml"
        path.write_text("trials = \n")
        with pytest.raises(ConfigurationError, match="invalid TOML"):
            load_experiment(path)

    def test_validation_names_the_field(self):
        """Field errors say where they are."""
        with pytest.raises(ConfigurationError, match="tau"):
            load_experiment(overrides={"tau": 1.5})

    def test_coded_payload_must_match_code(self):
        """A coded frame carries exactly one codeword."""
        with pytest.raises(ConfigurationError, match="payload_len"):
            load_experiment(scenario="coded", overrides={"frame": {"payload_len": 246}})

    def test_max_trials_below_trials(self):
        """The extension cap cannot undercut the initial batch."""
        with pytest.raises(ConfigurationError, match="max_trials"):
            load_experiment(overrides={"trials": 100, "max_trials": 10})
