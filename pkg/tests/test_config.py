import math
import textwrap

import pytest

from mfcair.config import (
    DEFAULT_PLAN,
    ConfigError,
    data_path,
    load_params,
    load_plan,
    load_profile,
    load_uncertainty,
    parse_fraction,
    parse_temperature,
)
from mfcair.params import REFERENCE_UNCERTAINTIES


def write(path, text):
    path.write_text(textwrap.dedent(text).lstrip())
    return path


@pytest.mark.parametrize("text,kelvin", [
    ("80 degC", 353.15), ("25°C", 298.15), ("-10 C", 263.15), ("300 K", 300.0), ("300", 300.0),
])
def test_temperature_units(text, kelvin):
    assert parse_temperature(text, "x") == pytest.approx(kelvin, abs=1e-12)


@pytest.mark.parametrize("text", ["hot", "12 F", ""])
def test_bad_temperature(text):
    with pytest.raises(ConfigError):
        parse_temperature(text, "x")


@pytest.mark.parametrize("text,frac", [("+20%", 0.2), ("-5 %", -0.05), ("0.12", 0.12), ("-0.1", -0.1)])
def test_fractions(text, frac):
    assert parse_fraction(text, "x") == pytest.approx(frac, abs=1e-15)


def test_default_params_are_in_kelvin(params):
    assert params.T_fc == pytest.approx(353.15)
    assert params.T_atm == pytest.approx(298.15)
    assert isinstance(params.n_cells, int)


def test_shipped_uncertainty_file_matches_table():
    assert load_uncertainty(data_path("uncertainty_reference.ini")) == REFERENCE_UNCERTAINTIES


def test_params_missing_key(tmp_path):
    text = data_path("params_default.ini").read_text().replace("gamma", "; gamma")
    with pytest.raises(ConfigError, match="gamma"):
        load_params(write(tmp_path / "p.ini", text))


def test_params_unknown_key(tmp_path):
    text = data_path("params_default.ini").read_text() + "\nflux = 3\n"
    with pytest.raises(ConfigError, match="flux"):
        load_params(write(tmp_path / "p.ini", text))


def test_params_invalid_value(tmp_path):
    text = data_path("params_default.ini").read_text()
    lines = [("V_ca = -0.01" if ln.startswith("V_ca") else ln) for ln in text.splitlines()]
    with pytest.raises(ConfigError, match="V_ca"):
        load_params(write(tmp_path / "p.ini", "\n".join(lines)))


def test_uncertainty_rejects_unlisted_parameter(tmp_path):
    with pytest.raises(ConfigError, match="gamma"):
        load_uncertainty(write(tmp_path / "u.ini", "[uncertainty]\ngamma = 5%\n"))


def test_profile_parsing(tmp_path):
    p = load_profile(write(tmp_path / "p.csv", """
        # comment
        0, 100
        50, 180

        300, end
    """))
    assert p.breakpoints == ((0.0, 100.0), (50.0, 180.0))
    assert p.duration == 300.0


@pytest.mark.parametrize("body,needle", [
    ("0, 100\n", "end"),
    ("0, 100\n10, end\n20, 5\n", "after"),
    ("0, 100, 3\n10, end\n", "time_s"),
    ("0, abc\n10, end\n", "number"),
    ("5, 100\n10, end\n", "t = 0"),
    ("0, 100\n10, -4\n20, end\n", "positive"),
])
def test_profile_errors(tmp_path, body, needle):
    with pytest.raises(ConfigError, match=needle):
        load_profile(write(tmp_path / "p.csv", body))


@pytest.mark.parametrize("name", ["profile1.csv", "profile2.csv"])
def test_shipped_profiles(name):
    p = load_profile(data_path(name))
    assert len(p.step_times) == 6
    assert min(i for _, i in p.breakpoints) > 1.0


def test_profile1_keeps_polynomial_setpoint_in_band():
    from mfcair.scenario import polynomial_reference
    p = load_profile(data_path("profile1.csv"))
    for _, xi in p.breakpoints:
        assert 2.0 <= polynomial_reference(xi) <= 2.2


def test_default_plan_has_eight_runs():
    plan = load_plan(data_path(DEFAULT_PLAN))
    assert len(plan) == 8
    combos = {(r.group, r.case) for r in plan.runs}
    assert combos == {(f"scenario{s}_profile{p}", c) for s in (1, 2) for p in (1, 2)
                      for c in ("nominal", "uncertain")}
    for r in plan.runs:
        assert (r.uncertainty is not None) == (r.case == "uncertain")
        assert r.reference.mode == ("constant" if r.group.startswith("scenario1") else "polynomial")


def minimal_plan(tmp_path, extra="", profile="profile1.csv"):
    params = data_path("params_default.ini")
    prof = data_path(profile) if profile == "profile1.csv" else tmp_path / profile
    return write(tmp_path / "plan.ini", f"""
        [DEFAULT]
        params = {params}
        profile = {prof}
        alpha = 0.06
        kp = 1.5
        tau = 0.3

        [run a]
        {extra}
    """)


def test_empty_plan(tmp_path):
    with pytest.raises(ConfigError, match="no runs"):
        load_plan(write(tmp_path / "plan.ini", "# nothing\n"))


def test_missing_profile_named(tmp_path):
    with pytest.raises(ConfigError, match="nowhere.csv"):
        load_plan(minimal_plan(tmp_path, profile="nowhere.csv"))


def test_missing_plan_file(tmp_path):
    with pytest.raises(ConfigError, match="missing.ini"):
        load_plan(tmp_path / "missing.ini")


def test_duration_shorter_than_window(tmp_path):
    with pytest.raises(ConfigError, match="tau"):
        load_plan(minimal_plan(tmp_path, "duration = 0.2"))


def test_bad_field_names_run(tmp_path):
    with pytest.raises(ConfigError, match="run 'a'.*kp"):
        load_plan(minimal_plan(tmp_path, "kp = -1"))


def test_unknown_key(tmp_path):
    with pytest.raises(ConfigError, match="colour"):
        load_plan(minimal_plan(tmp_path, "colour = red"))


def test_duplicate_outputs(tmp_path):
    path = minimal_plan(tmp_path, "output = x.csv")
    path.write_text(path.read_text() + "\n[run b]\noutput = x.csv\n")
    with pytest.raises(ConfigError, match="same output"):
        load_plan(path)


def test_parse_error_reports_line(tmp_path):
    with pytest.raises(ConfigError, match="line"):
        load_plan(write(tmp_path / "plan.ini", "[run a]\nparams\n= = =\n"))


def test_plan_defaults(tmp_path):
    (run,) = load_plan(minimal_plan(tmp_path)).runs
    assert run.case == "nominal" and run.group == "a" and run.output == "a.csv"
    assert run.controller.u_warmup is None
    assert run.controller.u_min == -math.inf
    assert run.sim.h == 1e-3 and run.sim.noise.sigma_w1 == 0.0
