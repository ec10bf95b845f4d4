"""Readers for parameter, uncertainty, profile and plan files.

Parameter, uncertainty and plan files are ``key = value`` text with ``#`` or
``;`` comments (INI syntax). Profiles are comma-separated ``time_s, current_A``
rows closed by a ``time_s, end`` row giving the duration.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path

from .mfc import ControllerConfig
from .params import UNCERTAIN_PARAMETERS, PhysicalParams, UncertaintySet
from .plant import NoiseConfig
from .scenario import CurrentProfile, ReferenceSpec
from .sim import SimConfig


class ConfigError(ValueError):
    """A configuration file could not be parsed or failed validation."""


def data_path(name: str) -> Path:
    """Path of a file shipped in the package data directory."""
    return Path(str(resources.files("mfcair") / "data" / name))


DEFAULT_PLAN = "default_plan.ini"

_TEMPERATURES = {"T_fc", "T_atm"}
_NUMBER = r"[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?"


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    cp.optionxform = str  # keys are case sensitive (T_fc, M_O2, ...)
    return cp


def _read(path) -> configparser.ConfigParser:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{path}: file not found")
    cp = _parser()
    try:
        cp.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return cp


def _float(value: str, where: str) -> float:
    try:
        v = float(value)
    except ValueError:
        raise ConfigError(f"{where}: expected a number, got {value!r}") from None
    if not math.isfinite(v):
        raise ConfigError(f"{where}: value must be finite")
    return v


def parse_temperature(value: str, where: str) -> float:
    """Parse ``80 degC``, ``353.15 K`` or a bare kelvin number into kelvin."""
    m = re.fullmatch(rf"\s*({_NUMBER})\s*(degC|°C|C|K)?\s*", value)
    if not m:
        raise ConfigError(f"{where}: cannot parse temperature {value!r}")
    v = float(m.group(1))
    unit = m.group(4) or "K"
    return v + 273.15 if unit in ("degC", "°C", "C") else v


def parse_fraction(value: str, where: str) -> float:
    """``+20%`` -> 0.2; plain numbers are taken as fractions."""
    value = value.strip()
    if value.endswith("%"):
        return _float(value[:-1], where) / 100.0
    return _float(value, where)


def load_params(path) -> PhysicalParams:
    cp = _read(path)
    if not cp.has_section("physical"):
        raise ConfigError(f"{path}: missing [physical] section")
    sec = cp["physical"]
    names = [f.name for f in fields(PhysicalParams)]
    unknown = set(sec) - set(names)
    if unknown:
        raise ConfigError(f"{path}: unknown parameter(s) {sorted(unknown)}")
    missing = [n for n in names if n not in sec]
    if missing:
        raise ConfigError(f"{path}: missing parameter(s) {missing}")
    values = {}
    for name in names:
        where = f"{path} [physical] {name}"
        if name in _TEMPERATURES:
            values[name] = parse_temperature(sec[name], where)
        elif name == "n_cells":
            v = _float(sec[name], where)
            if v != int(v):
                raise ConfigError(f"{where}: must be an integer")
            values[name] = int(v)
        else:
            values[name] = _float(sec[name], where)
    try:
        return PhysicalParams(**values)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def load_uncertainty(path) -> UncertaintySet:
    cp = _read(path)
    if not cp.has_section("uncertainty"):
        raise ConfigError(f"{path}: missing [uncertainty] section")
    sec = cp["uncertainty"]
    unknown = set(sec) - set(UNCERTAIN_PARAMETERS)
    if unknown:
        raise ConfigError(f"{path}: {sorted(unknown)} cannot be perturbed; "
                          f"allowed keys are {list(UNCERTAIN_PARAMETERS)}")
    values = {k: parse_fraction(v, f"{path} [uncertainty] {k}") for k, v in sec.items()}
    try:
        return UncertaintySet(**values)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def load_profile(path) -> CurrentProfile:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{path}: file not found")
    points, duration = [], None
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{path}:{lineno}"
        if duration is not None:
            raise ConfigError(f"{where}: rows after the 'end' row")
        parts = [s.strip() for s in line.split(",")]
        if len(parts) != 2:
            raise ConfigError(f"{where}: expected 'time_s, current_A'")
        t = _float(parts[0], where)
        if parts[1].lower() == "end":
            duration = t
        else:
            points.append((t, _float(parts[1], where)))
    if duration is None:
        raise ConfigError(f"{path}: missing final 'time_s, end' row")
    try:
        return CurrentProfile(tuple(points), duration)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


@dataclass(frozen=True)
class RunSpec:
    """One fully resolved run of an experiment plan."""

    name: str
    group: str
    case: str
    params_file: Path
    uncertainty_file: Path | None
    profile_file: Path
    params: PhysicalParams
    uncertainty: UncertaintySet | None
    profile: CurrentProfile
    reference: ReferenceSpec
    controller: ControllerConfig
    sim: SimConfig
    output: str


@dataclass(frozen=True)
class ExperimentPlan:
    path: Path
    runs: tuple

    def __len__(self):
        return len(self.runs)

    def names(self):
        return [r.name for r in self.runs]


_RUN_KEYS = {
    "params", "uncertainty", "profile", "reference", "lambda_const", "alpha", "kp", "tau",
    "ts", "h", "u_min", "u_max", "u_warmup", "sigma_w1", "sigma_w2", "seed", "band",
    "strict", "duration", "output", "group", "case",
}


def _bool(value: str, where: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{where}: expected a boolean, got {value!r}")


def _resolve(base: Path, value: str) -> Path:
    p = Path(value.strip())
    return p if p.is_absolute() else base / p


def _run_from_section(name: str, sec, base: Path, cache: dict) -> RunSpec:
    where = f"run {name!r}"
    unknown = set(sec) - _RUN_KEYS
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")
    for key in ("params", "profile"):
        if key not in sec:
            raise ConfigError(f"{where}: missing required key {key!r}")

    def cached(loader, path):
        key = (loader.__name__, path)
        if key not in cache:
            cache[key] = loader(path)
        return cache[key]

    def num(key, default=None):
        if key not in sec:
            if default is None:
                raise ConfigError(f"{where}: missing required key {key!r}")
            return default
        return _float(sec[key], f"{where} {key}")

    params_file = _resolve(base, sec["params"])
    profile_file = _resolve(base, sec["profile"])
    unc_value = sec.get("uncertainty", "none").strip()
    unc_file = None if unc_value.lower() in ("", "none") else _resolve(base, unc_value)
    for label, path in (("params", params_file), ("profile", profile_file), ("uncertainty", unc_file)):
        if path is not None and not path.is_file():
            raise ConfigError(f"{where}: {label} file {path} does not exist")
    try:
        params = cached(load_params, params_file)
        uncertainty = cached(load_uncertainty, unc_file) if unc_file else None
        profile = cached(load_profile, profile_file)
    except ConfigError as exc:
        raise ConfigError(f"{where}: {exc}") from exc

    try:
        reference = ReferenceSpec(sec.get("reference", "constant").strip(), num("lambda_const", 2.2))
        warm = sec.get("u_warmup", "auto").strip().lower()
        ctrl = ControllerConfig(
            alpha=num("alpha"), kp=num("kp"), tau=num("tau"), ts=num("ts", 0.01),
            u_min=num("u_min", -math.inf), u_max=num("u_max", math.inf),
            u_warmup=None if warm == "auto" else _float(warm, f"{where} u_warmup"),
            strict=_bool(sec.get("strict", "false"), f"{where} strict"),
        )
        seed = num("seed", 0)
        if seed != int(seed) or seed < 0:
            raise ConfigError(f"{where}: seed must be a non-negative integer")
        duration = num("duration", profile.duration)
        sim = SimConfig(
            h=num("h", 1e-3), ts=ctrl.ts, duration=duration,
            noise=NoiseConfig(num("sigma_w1", 0.0), num("sigma_w2", 0.0), int(seed)),
            strict=ctrl.strict, band=num("band", 0.02),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    if duration < ctrl.tau:
        raise ConfigError(f"{where}: duration {duration} s is shorter than tau = {ctrl.tau} s")
    if duration > profile.duration:
        raise ConfigError(f"{where}: duration {duration} s exceeds the profile ({profile.duration} s)")

    return RunSpec(
        name=name,
        group=sec.get("group", name).strip(),
        case=sec.get("case", "nominal" if unc_file is None else "uncertain").strip(),
        params_file=params_file,
        uncertainty_file=unc_file,
        profile_file=profile_file,
        params=params,
        uncertainty=uncertainty,
        profile=profile,
        reference=reference,
        controller=ctrl,
        sim=sim,
        output=sec.get("output", f"{name}.csv").strip(),
    )


def load_plan(path) -> ExperimentPlan:
    """Parse and fully validate a plan; every referenced file is loaded up front."""
    path = Path(path)
    cp = _read(path)
    base = path.parent
    bad = [s for s in cp.sections() if not s.startswith("run ")]
    if bad:
        raise ConfigError(f"{path}: unexpected section(s) {bad}; runs are '[run NAME]'")
    names = [s[4:].strip() for s in cp.sections()]
    if not names:
        raise ConfigError(f"{path}: no runs")
    if any(not n for n in names):
        raise ConfigError(f"{path}: empty run name")
    if len(set(names)) != len(names):
        raise ConfigError(f"{path}: duplicate run names")
    cache = {}
    runs = tuple(_run_from_section(n, cp[s], base, cache) for n, s in zip(names, cp.sections()))
    outputs = [r.output for r in runs]
    if len(set(outputs)) != len(outputs):
        raise ConfigError(f"{path}: two runs write the same output file")
    return ExperimentPlan(path, runs)
