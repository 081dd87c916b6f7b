import json

import numpy as np
import pytest

import driftsquint.envsim as envsim
from driftsquint.errors import ConfigError


def spec(*segments, experts=2, horizon=6, seed=0):
    return envsim.EnvironmentSpec(experts, horizon, tuple(segments), seed)


def test_constant():
    losses = envsim.generate(spec(envsim.Segment(1, "constant", (0.0, 0.0))))
    assert losses.shape == (6, 2)
    assert not losses.any()


def test_table_is_echoed():
    rows = ((0.1, 0.9), (0.2, 0.8), (0.3, 0.7))
    losses = envsim.generate(
        spec(envsim.Segment(1, "constant", (0.5, 0.5)), envsim.Segment(4, "table", rows))
    )
    assert losses[:3].tolist() == [[0.5, 0.5]] * 3
    assert losses[3:].tolist() == [list(row) for row in rows]


def test_same_seed_same_losses():
    scenario = envsim.scenario("two-switch", 3, 64, seed=42)
    assert np.array_equal(envsim.generate(scenario), envsim.generate(scenario))
    other = envsim.scenario("two-switch", 3, 64, seed=43)
    assert not np.array_equal(envsim.generate(scenario), envsim.generate(other))


def test_cell_depends_on_seed_round_and_expert():
    # prefix of a longer horizon draws the same cells
    short = envsim.generate(envsim.scenario("stationary", 4, 32, seed=5))
    long = envsim.generate(envsim.scenario("stationary", 4, 64, seed=5))
    assert np.array_equal(short, long[:32])


def test_single_switch_means():
    horizon = 20000
    scenario = envsim.scenario("single-switch", 2, horizon, seed=1)
    assert scenario.boundaries == [horizon // 2 + 1]
    losses = envsim.generate(scenario)
    half = horizon // 2
    band = 4 * np.sqrt(0.1 * 0.9 / half)
    before, after = losses[:half].mean(axis=0), losses[half:].mean(axis=0)
    assert abs(before[0] - 0.1) < band and abs(before[1] - 0.9) < band
    assert abs(after[0] - 0.9) < band and abs(after[1] - 0.1) < band


def test_builtin_scenarios():
    names = [s.name for s in envsim.builtin_scenarios(4, 256)]
    assert names == ["stationary", "single-switch", "two-switch", "drift"]
    assert envsim.scenario("stationary", 4, 256).boundaries == []
    assert envsim.scenario("single-switch", 4, 256).boundaries == [129]
    assert envsim.scenario("two-switch", 4, 256).boundaries == [86, 171]
    drift = envsim.scenario("drift", 4, 256)
    assert drift.boundaries == [1 + j * 32 for j in range(1, 8)]
    assert all(segment.kind == "drift" for segment in drift.segments)
    with pytest.raises(ConfigError):
        envsim.scenario("sawtooth")


def test_drift_moves_means_linearly():
    segment = envsim.Segment(1, "drift", (0.0, 1.0), (1.0, 0.0))
    losses = envsim.generate(spec(segment, horizon=2))
    # the first round uses the start means and the last the target means exactly
    assert losses.tolist() == [[0.0, 1.0], [1.0, 0.0]]


def test_single_expert_and_single_round():
    for scenario in envsim.builtin_scenarios(1, 1):
        envsim.validate(scenario)
        assert envsim.generate(scenario).shape == (1, 1)


def test_validate():
    with pytest.raises(ConfigError):
        envsim.validate(spec(envsim.Segment(2, "coin", (0.5, 0.5))))
    with pytest.raises(ConfigError):
        envsim.validate(spec(envsim.Segment(1, "coin", (0.5,))))
    with pytest.raises(ConfigError):
        envsim.validate(spec(envsim.Segment(1, "coin", (0.5, 1.5))))
    with pytest.raises(ConfigError):
        envsim.validate(spec(envsim.Segment(1, "wave", (0.5, 0.5))))
    with pytest.raises(ConfigError):
        envsim.validate(spec(envsim.Segment(1, "drift", (0.5, 0.5))))
    with pytest.raises(ConfigError):
        envsim.validate(spec(envsim.Segment(1, "table", ((0.5, 0.5),))))
    with pytest.raises(ConfigError):
        envsim.validate(
            spec(envsim.Segment(1, "coin", (0.5, 0.5)), envsim.Segment(1, "coin", (0.5, 0.5)))
        )
    with pytest.raises(ConfigError):
        envsim.validate(spec(envsim.Segment(1, "coin", (0.5, 0.5)), seed=-1))


def test_json_round_trip():
    for scenario in envsim.builtin_scenarios(3, 40, seed=7):
        document = json.loads(envsim.spec_to_json(scenario))
        assert envsim.spec_from_dict(document) == scenario
    table = spec(envsim.Segment(1, "table", ((0.0, 1.0),) * 6))
    assert envsim.spec_from_dict(envsim.spec_to_dict(table)) == table


def test_spec_from_dict_errors():
    with pytest.raises(ConfigError):
        envsim.spec_from_dict({"experts": 2, "horizon": 4})
    with pytest.raises(ConfigError):
        envsim.spec_from_dict({"experts": "two", "horizon": 4, "segments": []})
