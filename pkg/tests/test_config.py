from pathlib import Path

import numpy as np
import pytest
import yaml
from hypothesis import given
from hypothesis import strategies as st

from em_maslov.config import GALLERY, gallery_config, load_config, number, parse_config
from em_maslov.errors import ConfigError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@pytest.mark.parametrize("name", list(GALLERY))
def test_shipped_configs_match_gallery(name):
    """[TRIVIAL] configs/*.yaml describe the same systems as the built-in gallery."""
    a = load_config(CONFIGS / f"{name}.yaml")
    b = gallery_config(name)
    np.testing.assert_allclose(a.x0, b.x0)
    np.testing.assert_allclose(a.v0, b.v0)
    assert a.T == pytest.approx(b.T) and a.kappa == pytest.approx(b.kappa)
    x = a.x0 + 0.1
    np.testing.assert_allclose(a.spec.g(x), b.spec.g(x))
    np.testing.assert_allclose(a.spec.Sigma(x), b.spec.Sigma(x))


def test_kappa_target_rescales_velocity():
    """[DERIVED] v0 is scaled so that g[v0, v0]/2 equals the requested energy."""
    cfg = parse_config({"dim": 2, "x0": [0, 0], "v0": [3, 4], "T": 1, "kappa_target": 2.0})
    assert cfg.kappa == pytest.approx(2.0)
    np.testing.assert_allclose(cfg.v0 / np.linalg.norm(cfg.v0), [0.6, 0.8])


def test_kappa_target_sign_mismatch():
    """[TRIVIAL] a spacelike velocity cannot be rescaled to negative energy."""
    with pytest.raises(ConfigError):
        parse_config({"dim": 2, "metric_index": 1, "metric": "minkowski", "x0": [0, 0], "v0": [0, 1], "T": 1,
                      "kappa_target": -0.5})


def test_corrupted_yaml_reports_line(tmp_path):
    """[TRIVIAL] a YAML syntax error is reported with its line number."""
    bad = tmp_path / "bad.yaml"
    bad.write_text("dim: 2\nx0: [0, 0]\nv0: [1, 0\nT: 1\n")
    with pytest.raises(ConfigError, match="line 4"):
        load_config(bad)


def test_invalid_value_reports_key_line(tmp_path):
    """[TRIVIAL] semantic errors name the offending key and its line."""
    bad = tmp_path / "bad.yaml"
    bad.write_text("dim: 2\nx0: [0, 0]\nv0: [1, 0]\nT: -1\n")
    with pytest.raises(ConfigError, match=r"line 4: T"):
        load_config(bad)


def test_missing_key():
    """[TRIVIAL] required keys are enforced."""
    with pytest.raises(ConfigError, match="T"):
        parse_config({"dim": 2, "x0": [0, 0], "v0": [1, 0]})


def test_polynomial_terms_round_trip(tmp_path):
    """[TRIVIAL] a polynomial metric and 2-form load from YAML."""
    data = {
        "dim": 2, "x0": [0.1, 0.2], "v0": [1, 0], "T": 1,
        "metric": {"terms": [{"i": 0, "j": 0, "coeff": 1}, {"i": 1, "j": 1, "coeff": 1},
                             {"i": 0, "j": 0, "coeff": 0.5, "powers": [2, 0]}]},
        "sigma": {"terms": [{"i": 0, "j": 1, "coeff": "pi"}]},
    }
    path = tmp_path / "poly.yaml"
    path.write_text(yaml.safe_dump(data))
    cfg = load_config(path)
    np.testing.assert_allclose(cfg.spec.g(cfg.x0), np.diag([1.005, 1.0]))
    assert cfg.spec.Sigma(cfg.x0)[0, 1] == pytest.approx(np.pi)
    assert cfg.name == "poly"


@given(st.floats(-100, 100), st.floats(0.5, 4))
def test_number_expressions(a, b):
    """[TRIVIAL] arithmetic strings evaluate like Python arithmetic."""
    assert number(f"{a!r}*pi/{b!r}") == pytest.approx(a * np.pi / b)


def test_number_rejects_names():
    """[TRIVIAL] only pi and e are known names."""
    with pytest.raises(ConfigError):
        number("__import__('os')")
