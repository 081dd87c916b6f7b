import numpy as np
import pandas as pd
import petl as etl

import driftsquint.envsim as envsim
import driftsquint.harness as harness
import driftsquint.tables as tables


def test_run_header():
    assert tables.run_header(2) == ["t", "l_1", "l_2", "w_1", "w_2", "r_1", "r_2", "ghat"]


def test_to_run_row():
    row = tables.to_run_row(3, np.array([0.0, 1.0]), np.array([0.25, 0.75]), [0.75, -0.25], None)
    assert row == [3, 0.0, 1.0, 0.25, 0.75, 0.75, -0.25, None]
    assert tables.to_run_row(1, [0.5], [1.0], [0.0], np.float64(0.125))[-1] == 0.125


def test_to_run_table():
    env = envsim.EnvironmentSpec(2, 4, (envsim.Segment(1, "constant", (0.0, 1.0)),))
    record = harness.run(harness.ExperimentConfig("hedge", env))
    table = tables.to_run_table(record)
    assert etl.nrows(table) == 4
    assert list(table.values("t")) == [1, 2, 3, 4]
    assert list(table.values("ghat")) == [None] * 4
    assert list(table.values("l_2")) == [1.0] * 4


def test_to_bound_table():
    frame = pd.DataFrame(
        {
            "I1": np.array([1, 2]),
            "I2": np.array([4, 3]),
            "Kset": ["1", "1 2"],
            "comparator": ["singleton", "best"],
            "R": [0.5, -0.25],
            "V": [0.5, 0.125],
            "bound_name": ["squint", "squint"],
            "bound": [4.0, 4.5],
            "slack": [3.5, 4.75],
            "asserted": [True, True],
        }
    )
    table = tables.to_bound_table(harness.BoundReport(frame))
    assert etl.header(table) == tuple(tables.BOUND_HEADER)
    assert [tuple(row) for row in table.data()] == [
        (1, 4, "1", 0.5, 0.5, "squint", 4.0, 3.5),
        (2, 3, "1 2", -0.25, 0.125, "squint", 4.5, 4.75),
    ]


def test_csv_round_trip(tmp_path):
    frame = pd.DataFrame({"I1": [1], "I2": [8], "regret:squint": [0.5]}).set_index(["I1", "I2"])
    path = str(tmp_path / "comparison.csv")
    tables.to_csv(frame, "comparison", path)
    table = tables.from_csv(path)
    assert etl.header(table) == ("I1", "I2", "regret:squint")
    assert [tuple(row) for row in table.data()] == [(1, 8, 0.5)]
    with open(path, "rb") as handle:
        assert b"\r" not in handle.read()
