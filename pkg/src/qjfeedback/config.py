"""Run configuration: unit-suffixed values, presets, and a sectioned key=value format.

Example::

    [photophysics]
    preset = dii
    k_bleach = 55/s

    [feedback]
    tau_d = 70us
    tau_off = 400us

    [ensemble]
    n_molecules = 56
    seed = 12345

Durations take ``ns``, ``us`` (or ``µs``), ``ms`` or ``s``; rates take ``/s``,
``k/s`` or ``M/s``.  Unknown keys are errors.  Every problem found is
reported at once, each with its line number.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from decimal import Decimal, InvalidOperation

from .controller import FeedbackConfig, FeedbackConfigError
from .ensemble import EnsembleConfig, LifetimeDistribution
from .photophysics import PhotophysicsParams

__all__ = [
    "ConfigError", "RunConfig", "PRESETS", "parse_config", "parse_duration", "parse_rate",
    "format_config", "preset_config",
]

_DURATION_UNITS = {"ns": Decimal("1e-9"), "us": Decimal("1e-6"), "µs": Decimal("1e-6"),
                   "ms": Decimal("1e-3"), "s": Decimal(1)}
_RATE_UNITS = {"/s": Decimal(1), "k/s": Decimal(1000), "M/s": Decimal(1_000_000)}
_NUMBER = re.compile(r"^\s*([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\s*(\S*)\s*$")


class ConfigError(ValueError):
    """All problems found in a configuration document."""

    def __init__(self, problems: list[tuple[int, int, str]]):
        self.problems = problems
        lines = [f"line {ln}, col {col}: {msg}" if ln else msg for ln, col, msg in problems]
        super().__init__("\n".join(lines))


class _ValueError(ValueError):
    pass


def _split(text: str) -> tuple[Decimal, str]:
    m = _NUMBER.match(text)
    if not m:
        raise _ValueError(f"not a number: {text.strip()!r}")
    try:
        return Decimal(m.group(1)), m.group(2)
    except InvalidOperation:  # pragma: no cover - regex already filters
        raise _ValueError(f"not a number: {text.strip()!r}")


def parse_duration(text: str) -> float:
    """``"70us"`` -> 7e-05 (seconds), correctly rounded."""
    value, unit = _split(text)
    if unit == "":
        unit = "s"
    if unit not in _DURATION_UNITS:
        kind = "a rate" if unit in _RATE_UNITS else "unknown"
        raise _ValueError(f"unit mismatch: {unit!r} is {kind} unit, expected a duration")
    return float(value * _DURATION_UNITS[unit])


def parse_rate(text: str) -> float:
    """``"30k/s"`` -> 30000.0 (events per second)."""
    value, unit = _split(text)
    if unit == "":
        unit = "/s"
    if unit not in _RATE_UNITS:
        kind = "a duration" if unit in _DURATION_UNITS else "unknown"
        raise _ValueError(f"unit mismatch: {unit!r} is {kind} unit, expected a rate")
    return float(value * _RATE_UNITS[unit])


def _parse_float(text: str) -> float:
    value, unit = _split(text)
    if unit:
        raise _ValueError(f"unexpected unit {unit!r} on a dimensionless value")
    return float(value)


def _parse_int(text: str) -> int:
    s = text.strip()
    if not re.fullmatch(r"[+-]?\d+", s):
        raise _ValueError(f"not an integer: {s!r}")
    return int(s)


def _parse_bool(text: str) -> bool:
    s = text.strip().lower()
    if s in ("true", "yes", "on", "1"):
        return True
    if s in ("false", "no", "off", "0"):
        return False
    raise _ValueError(f"not a boolean: {text.strip()!r}")


def _parse_durations(text: str) -> tuple[float, ...]:
    items = [x for x in text.split(",") if x.strip()]
    if not items:
        raise _ValueError("empty list")
    return tuple(parse_duration(x) for x in items)


def _choice(*options):
    def parse(text: str) -> str:
        s = text.strip()
        if s not in options:
            raise _ValueError(f"expected one of {', '.join(options)} (got {s!r})")
        return s
    return parse


_SCHEMA = {
    "photophysics": {
        "preset": _choice("dii", "terrylene"),
        "k_exc": parse_rate, "k_fl": parse_rate, "k_isc": parse_rate,
        "tau_t": parse_duration, "eta": _parse_float, "k_bleach": parse_rate,
        "dark_rate": parse_rate,
    },
    "feedback": {
        "tau_d": parse_duration, "tau_off": parse_duration, "latency": parse_duration,
        "enabled": _parse_bool,
    },
    "ensemble": {
        "n_molecules": _parse_int, "lifetime": _choice("fixed", "lognormal", "empirical"),
        "tau_t_median": parse_duration, "tau_t_mean": parse_duration, "sigma_log": _parse_float,
        "tau_t_values": _parse_durations, "horizon": parse_duration, "seed": _parse_int,
        "path": _choice("aggregated", "exact"), "min_rate": parse_rate,
    },
    "output": {"dir": str.strip},
}


def _dii():
    params = PhotophysicsParams(k_exc=1e8, k_fl=1e8, k_isc=200.0, tau_t=240e-6,
                                eta=4e-3, k_bleach=55.0)
    return params, LifetimeDistribution.lognormal(240e-6, 0.8)


def _terrylene():
    params = PhotophysicsParams(k_exc=1e8, k_fl=1e8, k_isc=200.0, tau_t=217e-6,
                                eta=4e-3, k_bleach=55.0)
    return params, LifetimeDistribution.lognormal(217e-6, 0.8)


PRESETS = {"dii": _dii, "terrylene": _terrylene}

DEFAULT_FEEDBACK = FeedbackConfig(tau_d=70e-6, tau_off=400e-6, latency=600e-9, enabled=True)


@dataclass(frozen=True)
class RunConfig:
    params: PhotophysicsParams
    lifetime: LifetimeDistribution
    feedback: FeedbackConfig = DEFAULT_FEEDBACK
    n_molecules: int = 56
    horizon: float = 600.0
    master_seed: int = 0
    path: str = "aggregated"
    min_rate: float | None = None
    out_dir: str = "."
    preset: str | None = None

    def ensemble(self) -> EnsembleConfig:
        return EnsembleConfig(
            n_molecules=self.n_molecules, params=self.params, lifetime=self.lifetime,
            feedback=self.feedback, horizon=self.horizon, master_seed=self.master_seed,
            path=self.path, min_rate=self.min_rate)

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, master_seed=seed)


def preset_config(name: str) -> RunConfig:
    params, lifetime = PRESETS[name]()
    return RunConfig(params=params, lifetime=lifetime, preset=name)


def _lines(text: str):
    section = None
    seen: dict[tuple[str, str], int] = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        stripped = line.strip()
        col = len(line) - len(line.lstrip()) + 1
        if stripped.startswith("["):
            m = re.fullmatch(r"\[\s*([A-Za-z_][A-Za-z0-9_]*)\s*\]", stripped)
            if not m:
                yield ln, col, None, None, "syntax error: malformed section header"
                section = ""  # keys below belong to no known section
                continue
            section = m.group(1)
            if section not in _SCHEMA:
                yield ln, col, None, None, f"unknown section [{section}]"
            continue
        if "=" not in line:
            yield ln, col, None, None, "syntax error: expected 'key = value'"
            continue
        key, value = line.split("=", 1)
        key = key.strip()
        if section is None:
            yield ln, col, None, None, f"key {key!r} outside of any section"
            continue
        if section not in _SCHEMA:
            continue
        if key not in _SCHEMA[section]:
            yield ln, col, None, None, f"unknown key {key!r} in [{section}]"
            continue
        if (section, key) in seen:
            yield ln, col, None, None, f"duplicate key {key!r} in [{section}] (first on line {seen[section, key]})"
            continue
        seen[section, key] = ln
        vcol = line.index("=") + 2 + (len(value) - len(value.lstrip()))
        yield ln, vcol, (section, key), value, None


def parse_config(text: str) -> RunConfig:
    """Parse and fully validate a configuration document."""
    problems: list[tuple[int, int, str]] = []
    values: dict[tuple[str, str], object] = {}
    where: dict[tuple[str, str], int] = {}
    for ln, col, sk, raw, err in _lines(text):
        if err:
            problems.append((ln, col, err))
            continue
        try:
            values[sk] = _SCHEMA[sk[0]][sk[1]](raw)
            where[sk] = ln
        except _ValueError as exc:
            problems.append((ln, col, f"{sk[0]}.{sk[1]}: {exc}"))

    def get(section, key, default=None):
        return values.get((section, key), default)

    def fail(section, key, msg):
        ln = where.get((section, key), 0)
        problems.append((ln, 1 if ln else 0, f"{section}.{key}: {msg}"))

    preset = get("photophysics", "preset")
    base_params, base_life = PRESETS[preset]() if preset else (None, None)

    # photophysics
    fields = {}
    for key in ("k_exc", "k_fl", "k_isc", "tau_t", "eta", "k_bleach", "dark_rate"):
        v = get("photophysics", key, getattr(base_params, key) if base_params else None)
        if v is None and key == "dark_rate":
            v = 0.0
        if v is None:
            fail("photophysics", key, "missing (no preset selected)")
            continue
        if key == "tau_t":
            ok = v > 0
        elif key == "eta":
            ok = 0 <= v <= 1
        else:
            ok = v >= 0
        if not ok or not math.isfinite(v):
            fail("photophysics", key, f"out of range ({v!r})")
            continue
        fields[key] = v
    params = None
    if len(fields) == 7:
        params = PhotophysicsParams(**fields)

    # feedback
    fb_fields = {}
    for key in ("tau_d", "tau_off", "latency", "enabled"):
        v = get("feedback", key, getattr(DEFAULT_FEEDBACK, key))
        if key == "latency" and v < 0:
            fail("feedback", key, f"must be >= 0 ({v!r})")
        elif key in ("tau_d", "tau_off") and not v > 0:
            fail("feedback", key, f"must be > 0 ({v!r})")
        fb_fields[key] = v
    feedback = None
    try:
        feedback = FeedbackConfig(**fb_fields)
    except FeedbackConfigError:
        pass  # already reported above

    # ensemble
    n = get("ensemble", "n_molecules", 56)
    if n < 1:
        fail("ensemble", "n_molecules", f"must be >= 1 ({n})")
    horizon = get("ensemble", "horizon", 600.0)
    if not horizon > 0:
        fail("ensemble", "horizon", f"must be > 0 ({horizon!r})")
    seed = get("ensemble", "seed", 0)
    if not 0 <= seed < 2 ** 64:
        fail("ensemble", "seed", "must be an unsigned 64-bit integer")
    min_rate = get("ensemble", "min_rate")
    lifetime = _lifetime(get, fail, base_life, params)

    if problems:
        problems.sort(key=lambda p: (p[0], p[1]))
        raise ConfigError(problems)
    return RunConfig(params=params, lifetime=lifetime, feedback=feedback, n_molecules=n,
                     horizon=horizon, master_seed=seed, path=get("ensemble", "path", "aggregated"),
                     min_rate=min_rate, out_dir=get("output", "dir", "."), preset=preset)


def _lifetime(get, fail, base_life, params):
    kind = get("ensemble", "lifetime")
    keys = ("tau_t_median", "tau_t_mean", "sigma_log", "tau_t_values")
    given = {k: get("ensemble", k) for k in keys if get("ensemble", k) is not None}
    if kind is None:
        if not given:
            if base_life is not None:
                return base_life
            return LifetimeDistribution.fixed(params.tau_t) if params else None
        kind = "lognormal" if "sigma_log" in given else (
            "empirical" if "tau_t_values" in given else None)
        if kind is None:
            fail("ensemble", "lifetime", "cannot infer the distribution kind; set lifetime = ...")
            return None
    try:
        if kind == "fixed":
            for k in given:
                fail("ensemble", k, "not used by a fixed lifetime (tau_t is taken from [photophysics])")
            return LifetimeDistribution.fixed(params.tau_t) if params else None
        if kind == "empirical":
            if "tau_t_values" not in given:
                fail("ensemble", "tau_t_values", "required for an empirical lifetime")
                return None
            return LifetimeDistribution.empirical(given["tau_t_values"])
        sigma = given.get("sigma_log", base_life.sigma_log if base_life and base_life.kind == "lognormal" else None)
        if sigma is None:
            fail("ensemble", "sigma_log", "required for a lognormal lifetime")
            return None
        if sigma < 0:
            fail("ensemble", "sigma_log", f"must be >= 0 ({sigma!r})")
            return None
        if "tau_t_median" in given and "tau_t_mean" in given:
            fail("ensemble", "tau_t_mean", "give either tau_t_median or tau_t_mean, not both")
            return None
        if "tau_t_mean" in given:
            return LifetimeDistribution.lognormal_with_mean(given["tau_t_mean"], sigma)
        median = given.get("tau_t_median",
                           base_life.median if base_life and base_life.kind == "lognormal" else None)
        if median is None:
            fail("ensemble", "tau_t_median", "required for a lognormal lifetime")
            return None
        if not median > 0:
            fail("ensemble", "tau_t_median", f"must be > 0 ({median!r})")
            return None
        return LifetimeDistribution.lognormal(median, sigma)
    except ValueError as exc:
        fail("ensemble", "lifetime", str(exc))
        return None


def format_config(cfg: RunConfig, output: bool = True) -> str:
    """Canonical text form; ``parse_config(format_config(c)) == c``.

    ``output=False`` leaves out the ``[output]`` section, which does not
    affect results; artifacts embed that form so that reruns into a
    different directory stay byte-identical.
    """
    p, fb, life = cfg.params, cfg.feedback, cfg.lifetime
    out = ["[photophysics]"]
    if cfg.preset:
        out.append(f"preset = {cfg.preset}")
    out += [
        f"k_exc = {p.k_exc!r}/s",
        f"k_fl = {p.k_fl!r}/s",
        f"k_isc = {p.k_isc!r}/s",
        f"tau_t = {p.tau_t!r}s",
        f"eta = {p.eta!r}",
        f"k_bleach = {p.k_bleach!r}/s",
        f"dark_rate = {p.dark_rate!r}/s",
        "",
        "[feedback]",
        f"tau_d = {fb.tau_d!r}s",
        f"tau_off = {fb.tau_off!r}s",
        f"latency = {fb.latency!r}s",
        f"enabled = {'true' if fb.enabled else 'false'}",
        "",
        "[ensemble]",
        f"n_molecules = {cfg.n_molecules}",
        f"lifetime = {life.kind}",
    ]
    if life.kind == "lognormal":
        out += [f"tau_t_median = {life.median!r}s", f"sigma_log = {life.sigma_log!r}"]
    elif life.kind == "empirical":
        out.append("tau_t_values = " + ", ".join(f"{v!r}s" for v in life.values))
    out += [
        f"horizon = {cfg.horizon!r}s",
        f"seed = {cfg.master_seed}",
        f"path = {cfg.path}",
    ]
    if cfg.min_rate is not None:
        out.append(f"min_rate = {cfg.min_rate!r}/s")
    if output:
        out += ["", "[output]", f"dir = {cfg.out_dir}"]
    out.append("")
    return "\n".join(out)
