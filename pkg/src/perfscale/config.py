"""Sweep configuration: a sectioned key-value file, strictly validated.

Unknown sections or keys are hard errors (with the offending line number);
defaults are filled in and echoed back, so the effective configuration can be
written next to the report and reparsed to an equal object.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass

from .geometry import HoleShape

KNOWN_QUANTITIES = (
    "A", "B", "C", "D",
    "poincare", "corrector-int", "corrector-grad", "bounded-D",
)


class ConfigError(ValueError):
    pass


def _parse_fraction(text: str) -> float:
    text = text.strip()
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def _format_fraction(x: float) -> str:
    # prefer the exact dyadic form when there is one
    for k in range(0, 16):
        n = x * 2**k
        if abs(n - round(n)) < 1e-12 and round(n) != 0:
            return "1" if (k == 0 and round(n) == 1) else (
                f"{round(n)}" if k == 0 else f"{round(n)}/{2**k}"
            )
    return repr(x)


@dataclass
class SweepConfig:
    # [domain]
    d: int = 2
    shape_kind: str = "ball"
    shape_size: tuple[float, ...] = (0.25,)
    etas: tuple[float, ...] = (0.25, 0.125, 0.0625, 0.03125)
    cells_per_eta: int = 8
    # [sweep]
    quantities: tuple[str, ...] = ("D", "C", "B", "A")
    p: tuple[float, ...] = (2.0,)
    bounded_eta: float = 0.25
    bounded_epsilons: tuple[float, ...] = ()
    seed: int = 12345
    trials: int = 32
    # [solver]
    tol: float = 1e-10
    power_tol: float = 1e-9
    workers: int = 1
    # [report]
    formats: tuple[str, ...] = ("csv", "json")
    prediction_override: str = ""

    def shape(self) -> HoleShape:
        return HoleShape(self.shape_kind, self.shape_size)

    def to_text(self) -> str:
        """Canonical serialization; reparsing yields an equal config."""
        lines = [
            "[domain]",
            f"d = {self.d}",
            f"shape = {self.shape_kind}",
            "size = " + " ".join(repr(s) for s in self.shape_size),
            "etas = " + " ".join(_format_fraction(e) for e in self.etas),
            f"cells_per_eta = {self.cells_per_eta}",
            "",
            "[sweep]",
            "quantities = " + " ".join(self.quantities),
            "p = " + " ".join(f"{x:g}" for x in self.p),
            f"bounded_eta = {_format_fraction(self.bounded_eta)}",
            "bounded_epsilons = "
            + " ".join(_format_fraction(e) for e in self.bounded_epsilons),
            f"seed = {self.seed}",
            f"trials = {self.trials}",
            "",
            "[solver]",
            f"tol = {self.tol:g}",
            f"power_tol = {self.power_tol:g}",
            f"workers = {self.workers}",
            "",
            "[report]",
            "formats = " + " ".join(self.formats),
            f"prediction_override = {self.prediction_override}",
            "",
        ]
        return "\n".join(lines)

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()


_SCHEMA = {
    "domain": {
        "d": ("int", "d"),
        "shape": ("str", "shape_kind"),
        "size": ("floats", "shape_size"),
        "etas": ("fractions", "etas"),
        "cells_per_eta": ("int", "cells_per_eta"),
    },
    "sweep": {
        "quantities": ("strs", "quantities"),
        "p": ("floats", "p"),
        "bounded_eta": ("fraction", "bounded_eta"),
        "bounded_epsilons": ("fractions", "bounded_epsilons"),
        "seed": ("int", "seed"),
        "trials": ("int", "trials"),
    },
    "solver": {
        "tol": ("float", "tol"),
        "power_tol": ("float", "power_tol"),
        "workers": ("int", "workers"),
    },
    "report": {
        "formats": ("strs", "formats"),
        "prediction_override": ("str", "prediction_override"),
    },
}

_TYPE_NAMES = {
    "int": "an integer",
    "float": "a real number",
    "fraction": "a number or fraction like 1/8",
    "fractions": "a space-separated list of numbers or fractions",
    "floats": "a space-separated list of real numbers",
    "strs": "a space-separated list of words",
    "str": "a string",
}


def _find_line(text: str, needle: str) -> int:
    for i, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith(needle):
            return i
    return 0


def _convert(kind: str, raw: str):
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind == "fraction":
        return _parse_fraction(raw)
    if kind == "fractions":
        return tuple(_parse_fraction(t) for t in raw.split())
    if kind == "floats":
        return tuple(float(t) for t in raw.split())
    if kind == "strs":
        return tuple(raw.split())
    return raw.strip()


def parse_config(text: str) -> SweepConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file: {exc}") from exc

    values = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            line = _find_line(text, f"[{section}]")
            raise ConfigError(f"unknown section [{section}] at line {line}")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                line = _find_line(text, key)
                known = ", ".join(sorted(_SCHEMA[section]))
                raise ConfigError(
                    f"unknown key {key!r} in section [{section}] at line {line} "
                    f"(known keys: {known})"
                )
            kind, attr = _SCHEMA[section][key]
            try:
                values[attr] = _convert(kind, raw)
            except (ValueError, ZeroDivisionError) as exc:
                line = _find_line(text, key)
                raise ConfigError(
                    f"bad value for {key!r} in section [{section}] at line "
                    f"{line}: expected {_TYPE_NAMES[kind]}, got {raw!r}"
                ) from exc

    cfg = SweepConfig(**values)
    _validate(cfg)
    return cfg


def load_config(path: str) -> SweepConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def _validate(cfg: SweepConfig):
    if cfg.d not in (2, 3):
        raise ConfigError("domain d must be 2 or 3")
    for q in cfg.quantities:
        if q not in KNOWN_QUANTITIES:
            known = ", ".join(KNOWN_QUANTITIES)
            raise ConfigError(f"unknown quantity {q!r} (known: {known})")
    if any(not 0 < e <= 1 for e in cfg.etas):
        raise ConfigError("etas must lie in (0, 1]")
    if any(p <= 1 for p in cfg.p):
        raise ConfigError("p values must be > 1")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    if not 0 < cfg.tol < 1 or not 0 < cfg.power_tol < 1:
        raise ConfigError("solver tolerances must lie in (0, 1)")
    cfg.shape()  # raises ConfigurationError on bad shape parameters
