import pytest
import tomli

from explorer.experiment import (
    ConfigError,
    ExperimentConfig,
    dump_config,
    load_config_file,
    map_paths,
    resolve_config,
    run_single,
)
from explorer.models.schemas import Method


def test_comma_separated_lists_are_parsed():
    config = resolve_config({"world": "room15"}, {"methods": "fd, proposed", "seeds": "3,4"})

    assert config.methods == [Method.FD, Method.PROPOSED]
    assert config.seeds == [3, 4]


def test_information_matrices_map_to_exploration_config():
    values = "50,0,0,0,50,0,0,0,200"
    config = resolve_config({"world": "room15"}, {"odometry_info": values})

    noise = config.exploration_config().utility.noise

    assert noise.odometry[0, 0] == 50.0 and noise.odometry[2, 2] == 200.0
    assert noise.loop[0, 0] == 400.0


@pytest.mark.parametrize(
    "values",
    [
        {},
        {"world": "room15", "map": "a.pgm"},
        {"world": "room15", "start_x": 3},
        {"world": "room15", "methods": ""},
        {"world": "room15", "ssim_window": 8},
        {"world": "room15", "series_step": 0},
        {"world": "room15", "colour": "red"},
        {"world": "room15", "free_threshold": 70},
        {"world": "room15", "loop_info": "1,0,0,0,-1,0,0,0,1"},
    ],
)
def test_invalid_configurations(values):
    with pytest.raises(ConfigError):
        resolve_config(values)


def test_flags_win_over_file_values():
    config = resolve_config({"world": "room15", "budget": 40}, {"budget": "7"})
    assert config.budget == 7


def test_dump_round_trips_through_toml(tmp_path):
    config = resolve_config(
        {"world": "corridor", "seeds": [1, 2], "hit_noise_std": 0.02, "start_x": 3, "start_y": 2}
    )
    path = tmp_path / "config.toml"
    path.write_text(dump_config(config))

    reloaded = resolve_config(load_config_file(path))

    assert reloaded == config
    assert "map =" not in path.read_text()
    assert tomli.loads(path.read_text())["methods"] == ["fd", "ags", "proposed"]


def test_config_file_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config_file(tmp_path / "missing.toml")

    broken = tmp_path / "broken.toml"
    broken.write_text("budget = = 3\n")
    with pytest.raises(ConfigError):
        load_config_file(broken)

    nested = tmp_path / "nested.toml"
    nested.write_text('[sensor]\nmax_range = 2.0\n')
    with pytest.raises(ConfigError):
        load_config_file(nested)


def test_map_paths_accepts_either_file(tmp_path):
    assert map_paths(tmp_path / "m.yaml") == (None, tmp_path / "m.yaml")
    assert map_paths(tmp_path / "m.pgm") == (tmp_path / "m.pgm", tmp_path / "m.yaml")


def test_run_single_uses_configured_start():
    config = resolve_config({"world": "room15", "start_x": 2, "start_y": 3, "budget": 1})

    outcome, summary = run_single(config, Method.FD, seed=0)

    assert outcome.start == (2, 3)
    assert summary.method == Method.FD
    assert summary.ticks <= 1


def test_defaults_cover_all_methods():
    config = ExperimentConfig(world="room15")
    assert config.methods == list(Method)
    assert config.start is None
