from __future__ import annotations

from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fujita_lab.config import ConfigError, parse_config, parse_text, render_config

CONFIGS = sorted((Path(__file__).parent.parent / "configs").glob("*.ini"))


def test_minimal_config_uses_defaults():
    cfg = parse_text("version = 1\n")
    assert cfg["manifold"]["k"] == 3 and cfg["evolution"]["p"] == 2.0
    assert cfg["duhamel"]["lam"] == "auto"
    assert not cfg.has("manifold")


@pytest.mark.parametrize("path", CONFIGS, ids=lambda p: p.stem)
def test_checked_in_configs_parse(path):
    cfg = parse_config(path)
    assert cfg.version == 1


@pytest.mark.parametrize("path", CONFIGS, ids=lambda p: p.stem)
def test_render_round_trip(path):
    cfg = parse_config(path)
    again = parse_text(render_config(cfg))
    assert again.sections == cfg.sections
    assert again.present == cfg.present


@given(p=st.floats(1.01, 9.0), k=st.integers(2, 9), amp=st.floats(1e-6, 10.0), lam=st.floats(1e-3, 1e6))
def test_round_trip_property(p, k, amp, lam):
    text = f"version = 1\n[manifold]\nk = {k}\n[evolution]\np = {p!r}\namplitude = {amp!r}\n[duhamel]\nlam = {lam!r}\n"
    cfg = parse_text(text)
    assert parse_text(render_config(cfg)).sections == cfg.sections


def _errors(text):
    with pytest.raises(ConfigError) as info:
        parse_text(text)
    return info.value.errors


def test_missing_version():
    assert any("version" in e for e in _errors("[manifold]\nk = 3\n"))


def test_wrong_version():
    assert any("unsupported version" in e for e in _errors("version = 2\n"))


def test_unknown_key_names_its_section():
    errs = _errors("version = 1\n[manifold]\ndimention = 3\n")
    assert errs == ["manifold.dimention: unknown key in section [manifold]"]


def test_unknown_section():
    assert any("[plots]" in e for e in _errors("version = 1\n[plots]\nx = 1\n"))


def test_type_mismatch():
    assert any("manifold.k: type mismatch" in e for e in _errors("version = 1\n[manifold]\nk = three\n"))


def test_p_at_most_one_rejected():
    assert "evolution.p: p must exceed 1" in _errors("version = 1\n[evolution]\np = 1.0\n")


def test_all_errors_reported_together():
    errs = _errors("version = 1\n[manifold]\ndimention = 3\n[evolution]\np = 0.5\n[sweep]\nworkers = 0\n")
    assert len(errs) == 3


def test_hardy_range_checked():
    errs = _errors("version = 1\n[potential]\nfamily = hardy\nomega = -0.3\n")
    assert any("potential.omega" in e for e in errs)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        parse_config(tmp_path / "nope.ini")
