import pytest

from src.config import Config, ConfigValidationError, parse_float_grid, parse_int_grid


def test_parse_float_grid_skips_bad_entries():
    assert parse_float_grid("0.5, 1,x,,2") == [0.5, 1.0, 2.0]
    assert parse_float_grid("") == []


def test_parse_int_grid_expands_ranges():
    assert parse_int_grid("4..7,10") == [4, 5, 6, 7, 10]
    assert parse_int_grid("a..b,3") == [3]


def test_defaults_validate():
    assert Config().validate_config()


@pytest.mark.parametrize(
    "attr,value",
    [
        ("THREADS", 0),
        ("WORKER_BACKEND", "cluster"),
        ("CHUNK_SIZE", 0),
        ("MAX_BREADTH_DEPTH", 31),
        ("STREAM_BUFFER", 0),
        ("DEFAULT_EPSILON0", 0.5),
        ("DIAMETER_MODE", "fast"),
        ("MODULUS_ETA", 1.0),
        ("MAX_RETRIES", 0),
    ],
)
def test_invalid_settings_rejected(monkeypatch, attr, value):
    monkeypatch.setattr(Config, attr, value)
    with pytest.raises(ConfigValidationError):
        Config()


def test_explicit_zero_threads_is_kept(monkeypatch):
    from src.config import _env_int_default

    monkeypatch.setenv("CASCADE_LAB_THREADS", "0")
    assert _env_int_default("CASCADE_LAB_THREADS", 8) == 0
    monkeypatch.setenv("CASCADE_LAB_THREADS", "many")
    assert _env_int_default("CASCADE_LAB_THREADS", 8) == 8
    monkeypatch.delenv("CASCADE_LAB_THREADS")
    assert _env_int_default("CASCADE_LAB_THREADS", 8) == 8
