"""Run configuration: an INI-style ``key = value`` file with sections.

Example::

    [run]
    system = shannon-scaling
    grid = 1024
    window = 128
    depth = 30
    s_range = 8
    seed = 0x5EED
    dilation = 2

    [tolerances]
    identity = 1e-9
    rank = 1e-8
    tail = 1e-6

    [output]
    out = results
    format = csv

    [spectrum:bump]
    pieces =
        -3.0 3.0 | 1, 0, -0.1

Every key can be overridden from the command line.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, fields

DEFAULT_SEED = 0x5EED


class ConfigError(ValueError):
    """A configuration value is missing or malformed; the message names the field."""


@dataclass
class RunConfig:
    systems: list[str] = field(default_factory=list)
    wavelet: str | None = None
    scaling: str | None = None
    dilation: list[list[int]] | None = None
    grid: int = 1024
    window: int | None = None
    depth: int = 30
    s_range: int = 8
    tol: float = 1e-9
    rank_tol: float = 1e-8
    tail_tol: float = 1e-6
    seed: int = DEFAULT_SEED
    out: str | None = None
    format: str = "csv"
    quasi_orthogonalize: bool = False
    unchecked: bool = False
    perturb: float = 0.0
    spectra: dict[str, str] = field(default_factory=dict)

    def validate(self) -> "RunConfig":
        for name in ("grid", "depth", "s_range"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.window is not None and self.window <= 0:
            raise ConfigError(f"window must be positive, got {self.window!r}")
        for name in ("tol", "rank_tol", "tail_tol"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ConfigError(f"{name} must lie in (0, 1), got {v!r}")
        if self.perturb < 0.0:
            raise ConfigError(f"perturb must be nonnegative, got {self.perturb!r}")
        if self.seed < 0:
            raise ConfigError(f"seed must be nonnegative, got {self.seed!r}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {self.format!r}")
        if self.dilation is not None:
            n = len(self.dilation)
            if any(len(r) != n for r in self.dilation):
                raise ConfigError("dilation must be a square integer matrix")
        return self

    def window_for(self, n: int) -> int:
        if self.window is not None:
            return self.window
        return 128 if n == 1 else 8

    # -- serialization ----------------------------------------------------------

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        run = {
            "system": ", ".join(self.systems),
            "grid": str(self.grid),
            "depth": str(self.depth),
            "s_range": str(self.s_range),
            "seed": hex(self.seed),
            "quasi_orthogonalize": str(self.quasi_orthogonalize).lower(),
            "unchecked": str(self.unchecked).lower(),
            "perturb": repr(self.perturb),
        }
        if self.window is not None:
            run["window"] = str(self.window)
        if self.wavelet:
            run["wavelet"] = self.wavelet
        if self.scaling:
            run["scaling"] = self.scaling
        if self.dilation is not None:
            run["dilation"] = format_matrix(self.dilation)
        cp["run"] = run
        cp["tolerances"] = {"identity": repr(self.tol), "rank": repr(self.rank_tol), "tail": repr(self.tail_tol)}
        output = {"format": self.format}
        if self.out:
            output["out"] = self.out
        cp["output"] = output
        for name, text in self.spectra.items():
            cp[f"spectrum:{name}"] = {"pieces": "\n" + text.strip()}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str) -> "RunConfig":
        cp = configparser.ConfigParser(interpolation=None)
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"unreadable config: {exc}") from None
        known = {"run", "tolerances", "output"}
        for sec in cp.sections():
            if sec not in known and not sec.startswith("spectrum:"):
                raise ConfigError(f"unknown section [{sec}]")
        cfg = cls()
        run = cp["run"] if cp.has_section("run") else {}
        allowed = {"system", "wavelet", "scaling", "dilation", "grid", "window", "depth", "s_range", "seed",
                   "quasi_orthogonalize", "unchecked", "perturb"}
        for key in run:
            if key not in allowed:
                raise ConfigError(f"unknown key run.{key}")
        if "system" in run:
            cfg.systems = split_list(run["system"])
        cfg.wavelet = run.get("wavelet") or None
        cfg.scaling = run.get("scaling") or None
        if "dilation" in run:
            cfg.dilation = parse_matrix(run["dilation"], "run.dilation")
        for key, conv in (("grid", int), ("window", int), ("depth", int), ("s_range", int)):
            if key in run:
                setattr(cfg, key, _convert(run[key], conv, f"run.{key}"))
        if "seed" in run:
            cfg.seed = _convert(run["seed"], lambda v: int(v, 0), "run.seed")
        if "perturb" in run:
            cfg.perturb = _convert(run["perturb"], float, "run.perturb")
        for key in ("quasi_orthogonalize", "unchecked"):
            if key in run:
                setattr(cfg, key, _convert(run[key], _boolean, f"run.{key}"))
        if cp.has_section("tolerances"):
            sec = cp["tolerances"]
            for key, attr in (("identity", "tol"), ("rank", "rank_tol"), ("tail", "tail_tol")):
                if key in sec:
                    setattr(cfg, attr, _convert(sec[key], float, f"tolerances.{key}"))
            for key in sec:
                if key not in ("identity", "rank", "tail"):
                    raise ConfigError(f"unknown key tolerances.{key}")
        if cp.has_section("output"):
            sec = cp["output"]
            cfg.out = sec.get("out") or None
            cfg.format = sec.get("format", cfg.format)
        for sec in cp.sections():
            if sec.startswith("spectrum:"):
                name = sec.split(":", 1)[1].strip()
                if "pieces" not in cp[sec]:
                    raise ConfigError(f"[{sec}] needs a 'pieces' entry")
                cfg.spectra[name] = cp[sec]["pieces"].strip()
        return cfg.validate()

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _boolean(v: str) -> bool:
    low = v.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _convert(value: str, conv, name: str):
    try:
        return conv(value.strip())
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{name}: {exc}") from None


def split_list(text: str) -> list[str]:
    return [p.strip() for p in text.split(",") if p.strip()]


def parse_matrix(text: str, name: str = "dilation") -> list[list[int]]:
    """Row-major comma list: '2' -> [[2]], '1,1,1,-1' -> [[1,1],[1,-1]]."""
    try:
        vals = [int(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"{name}: entries must be integers, got {text!r}") from None
    n = int(round(len(vals) ** 0.5))
    if n == 0 or n * n != len(vals):
        raise ConfigError(f"{name}: {len(vals)} entries do not form a square matrix")
    return [vals[i * n:(i + 1) * n] for i in range(n)]


def format_matrix(m: list[list[int]]) -> str:
    return ",".join(str(v) for row in m for v in row)
