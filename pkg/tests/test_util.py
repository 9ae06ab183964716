import json
import logging

import numpy as np
import pytest

from errors import MatrixFileError
from util import (
    configure_logging,
    derive_seed,
    format_number,
    read_matrix_json,
    write_csv,
    write_matrix_json,
)


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_derive_seed_is_deterministic():
    assert derive_seed(42, "T2.1", "power:0.5", 3, 0) == derive_seed(42, "T2.1", "power:0.5", 3, 0)


def test_derive_seed_separates_labels():
    seeds = {derive_seed(42, "T2.1", "power:0.5", 3, i) for i in range(50)}
    assert len(seeds) == 50
    assert derive_seed(42, "T2.1") != derive_seed(42, "T2.2")
    assert derive_seed(1, "A") != derive_seed(2, "A")


def test_derive_seed_fits_64_bits():
    assert 0 <= derive_seed(-1, "x") < 2**64


def test_read_matrix_json(sample_path):
    entries = read_matrix_json(sample_path("a.json"))
    np.testing.assert_array_equal(entries, np.diag([1.0, 4.0]))


def test_write_then_read_keeps_every_bit(tmp_path):
    entries = np.array([[0.1, 1 / 3], [1 / 3, np.pi]])
    path = str(tmp_path / "m.json")
    write_matrix_json(path, entries)
    np.testing.assert_array_equal(read_matrix_json(path), entries)
    assert json.loads((tmp_path / "m.json").read_text())["dim"] == 2


@pytest.mark.parametrize(
    "text, reason",
    [
        ('{"dim": 2, "rows": [[1, 0], [0, NaN]]}', "cannot parse"),
        ('{"dim": 2, "rows": [[1, 0], [0, Infinity]]}', "cannot parse"),
        ('{"dim": 2, "rows": [[1, 0]]}', "rows"),
        ('{"dim": 2, "rows": [[1, 0], [0]]}', "row 1"),
        ('{"dim": 1, "rows": [[true]]}', "non-numeric"),
        ('{"dim": 0, "rows": []}', "positive integer"),
        ('{"rows": [[1]]}', "dim"),
        ("not json", "cannot parse"),
    ],
)
def test_read_matrix_json_rejects(tmp_path, text, reason):
    path = _write(tmp_path / "bad.json", text)
    with pytest.raises(MatrixFileError) as info:
        read_matrix_json(path)
    assert info.value.path == path
    assert reason in str(info.value)


def test_read_matrix_json_missing_file(tmp_path):
    with pytest.raises(MatrixFileError, match="not found"):
        read_matrix_json(str(tmp_path / "absent.json"))


def test_write_matrix_json_rejects_nan(tmp_path):
    with pytest.raises(ValueError):
        write_matrix_json(str(tmp_path / "nan.json"), np.array([[np.nan]]))


@pytest.mark.parametrize(
    "value, expected",
    [
        (True, "true"),
        (False, "false"),
        (7, "7"),
        (np.int64(3), "3"),
        (0.1, "0.10000000000000001"),
        (float("inf"), "inf"),
    ],
)
def test_format_number(value, expected):
    assert format_number(value) == expected


def test_write_csv(tmp_path):
    path = str(tmp_path / "r.csv")
    count = write_csv(path, ["id", "value", "pass"], [("L2.1", 0.5, True), ("T2.1", float("inf"), False)])
    assert count == 2
    assert (tmp_path / "r.csv").read_text() == "id,value,pass\nL2.1,0.5,true\nT2.1,inf,false\n"


def test_configure_logging_accepts_names():
    configure_logging("debug")
    assert logging.getLogger().level == logging.DEBUG
    configure_logging("nonsense")
    assert logging.getLogger().level == logging.INFO
