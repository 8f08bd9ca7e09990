import json
import math

import pytest

from wpmec.config import ConfigError, NetworkConfig, env_overrides, load_config, make_config, validate_config
from wpmec.rng import make_rng


class TestValidation:
    def test_table2_defaults_accepted(self, table2):
        assert validate_config(table2) is table2
        assert table2 == NetworkConfig()

    def test_efficiency_out_of_range_named(self):
        with pytest.raises(ConfigError) as exc:
            validate_config(NetworkConfig(eh_efficiency=1.2))
        assert any("eh_efficiency" in p for p in exc.value.problems)

    def test_zero_slot_named(self):
        with pytest.raises(ConfigError, match="slot_duration"):
            validate_config(NetworkConfig(slot_duration=0.0))

    def test_every_problem_reported(self):
        with pytest.raises(ConfigError) as exc:
            validate_config(NetworkConfig(slot_duration=0.0, overhead=0.5, clip_eps=0.0))
        text = " ".join(exc.value.problems)
        for name in ("slot_duration", "overhead", "clip_eps"):
            assert name in text

    def test_infinite_zone_allowed(self):
        validate_config(NetworkConfig(zone_radius=math.inf))

    def test_unknown_field(self):
        with pytest.raises(ConfigError, match="bogus"):
            make_config("table2", bogus=1)


class TestLoading:
    def test_no_file_gives_desk(self):
        cfg = load_config(environ={})
        assert cfg == make_config("desk")
        assert (cfg.m_haps, cfg.n_wds, cfg.slots_per_episode, cfg.episodes) == (2, 6, 40, 300)

    def test_json_file_defaults_to_table2(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"n_wds": 7}))
        cfg = load_config(p, environ={})
        assert cfg == NetworkConfig(n_wds=7)

    def test_toml_with_preset(self, tmp_path):
        p = tmp_path / "c.toml"
        p.write_text('preset = "desk"\nbandwidth = 2e6\n')
        cfg = load_config(p, environ={})
        assert cfg.bandwidth == 2e6 and cfg.n_wds == 6

    def test_env_then_kwargs(self, tmp_path):
        env = {"WPMEC_N_WDS": "5", "WPMEC_HIDDEN": "32,16", "OTHER": "x"}
        assert env_overrides(env) == {"n_wds": "5", "hidden": "32,16"}
        cfg = load_config(environ=env, n_wds=4)
        assert cfg.n_wds == 4 and cfg.hidden == (32, 16)

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_config(tmp_path / "nope.json", environ={})

    def test_hash_stable_and_sensitive(self, desk):
        assert desk.config_hash() == make_config("desk").config_hash()
        assert desk.config_hash() != desk.replace(seed=1).config_hash()
        assert len(desk.config_hash()) == 12


class TestRng:
    def test_same_stream_same_draws(self):
        assert (make_rng(3, 1, 4).random(5) == make_rng(3, 1, 4).random(5)).all()

    def test_streams_differ(self):
        assert (make_rng(3, 1).random(5) != make_rng(3, 2).random(5)).all()
