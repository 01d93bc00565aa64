"""
Tests for problem specs and config files
"""

import numpy as np
import pytest

from error_recovery import ConfigError, InvalidArgument
from problem_spec import BumpProfile, GridParams, ProblemSpec, load_config, write_config


def test_defaults_filled_in(tmp_path):
    path = tmp_path / "run.env"
    path.write_text("N=3\nMU=2\nP=1.5\n")
    spec = load_config(path)
    assert spec.n == 3 and spec.mu == 2.0 and spec.p == 1.5
    assert spec.R == 1.0
    assert spec.grid.dr == 2.0 ** -8
    assert spec.grid.cfl == 0.9
    assert spec.grid.t_max == 400.0
    assert spec.blowup_threshold == 1e6
    assert spec.output_stride == 4
    assert spec.f_profile == BumpProfile(1.0, 3)


def test_keys_are_case_insensitive(tmp_path):
    path = tmp_path / "run.env"
    path.write_text("n=2\nmu=0.5\np=1.3\nt_max=5\n")
    spec = load_config(path)
    assert spec.n == 2
    assert spec.grid.t_max == 5.0


def test_missing_key(tmp_path):
    path = tmp_path / "run.env"
    path.write_text("N=3\nMU=2\n")
    with pytest.raises(ConfigError, match="P"):
        load_config(path)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.env")


def test_unparseable_values(tmp_path):
    path = tmp_path / "run.env"
    path.write_text("N=3.5\nMU=2\nP=1.5\n")
    with pytest.raises(ConfigError):
        load_config(path)

    path.write_text("N=3\nMU=two\nP=1.5\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_power_must_stay_below_shifted_strauss():
    with pytest.raises(InvalidArgument):
        ProblemSpec(n=3, mu=2.0, p=1.9)
    with pytest.raises(InvalidArgument):
        ProblemSpec(n=3, mu=2.0, p=1.0)


def test_range_checks():
    with pytest.raises(InvalidArgument):
        ProblemSpec(n=1, mu=2.0, p=1.5)
    with pytest.raises(InvalidArgument):
        ProblemSpec(n=3, mu=0.0, p=1.5)
    with pytest.raises(InvalidArgument):
        ProblemSpec(n=3, mu=2.0, p=1.5, R=0.5)
    with pytest.raises(InvalidArgument):
        ProblemSpec(n=3, mu=2.0, p=1.5, blowup_threshold=10.0)
    with pytest.raises(InvalidArgument):
        GridParams(cfl=1.0)
    with pytest.raises(InvalidArgument):
        BumpProfile(smoothness=2)


def test_write_then_load(tmp_path):
    spec = ProblemSpec(n=3, mu=2.0, p=1.5, R=2.0, g_profile=BumpProfile(0.5, 4),
                       grid=GridParams(dr=2.0 ** -6, cfl=0.5, t_max=12.0))
    path = write_config(spec, tmp_path / "cfg" / "run.env")
    assert load_config(path) == spec


def test_bump_profile_support_and_peak():
    bump = BumpProfile(2.0, 3)
    r = np.array([0.0, 0.5, 1.0, 1.5])
    values = bump(r, 1.0)
    assert values[0] == 2.0
    assert values[1] == pytest.approx(2.0 * 0.75 ** 3)
    assert values[2] == 0.0 and values[3] == 0.0


def test_admissibility_and_scaling():
    spec = ProblemSpec(n=3, mu=2.0, p=1.5)
    assert spec.is_admissible()
    zero = spec.scaled_data(0.0)
    assert not zero.is_admissible()
    assert spec.scaled_data(0.5).g_profile.amplitude == 0.5
    assert spec.with_grid(cfl=0.45).grid.dt == pytest.approx(0.45 * 2.0 ** -8)
