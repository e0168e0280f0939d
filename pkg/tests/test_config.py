import pytest

from ragcritic.config import ConfigError, build, digest, known_keys, resolve, reward_config
from ragcritic.gateway import EndpointConfig
from ragcritic.rewards import RewardConfig


def test_defaults_file_env_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\nalpha_format = 0.2\nbeta_fix=3\nLAMBDA_TYPE = 0.4  # trailing\n")
    keys = known_keys(RewardConfig)
    env = {"CRITIC_BETA_FIX": "4", "UNRELATED": "x"}
    values = resolve(path, keys, overrides={"lambda_type": "0.6", "fix_max": None}, environ=env)
    cfg = reward_config(values)
    assert cfg.alpha_format == 0.2
    assert cfg.beta_fix == 4.0
    assert cfg.lambda_type == 0.6
    assert cfg.fix_max == 0.5


def test_matrix_cells(tmp_path):
    cfg = reward_config({"verdict_r_correct_incorrect": "-2"})
    assert cfg.verdict_matrix[0][1] == -2.0
    assert cfg.verdict_matrix[1][1] == 0.5


def test_tuple_and_optional_fields():
    cfg = reward_config({"generic_phrases": "try again, give up"})
    assert cfg.generic_phrases == ("try again", "give up")
    ep = build(EndpointConfig, {"judge_api_key": "none", "judge_max_retries": "5"}, prefix="judge_")
    assert ep.api_key is None and ep.max_retries == 5


def test_bad_values_raise_config_error(tmp_path):
    with pytest.raises(ConfigError):
        reward_config({"gamma_format": "-1"})
    with pytest.raises(ConfigError):
        reward_config({"beta_fix": "steep"})
    bad = tmp_path / "bad.cfg"
    bad.write_text("no equals sign\n")
    with pytest.raises(ConfigError):
        resolve(bad, [])


def test_digest_is_order_independent():
    assert digest({"a": 1, "b": 2}) == digest({"b": 2, "a": 1})
    assert digest({"a": 1}) != digest({"a": 2})
