"""Strict INI experiment configuration.

Grammar::

    [field]
    profile = smooth_random       ; name from landis.fields.PROFILES
    seed = 7
    params.q_amp = 0.5            ; one key per profile parameter

    [run]
    command = uci-check           ; any CLI subcommand
    x0 = 1, 5, 10                 ; lists are comma separated
    seeds = 0:50                  ; python-style half-open range or a list

    [output]
    directory = out
    formats = csv, dat

Unknown sections and keys are errors.  ``serialize`` writes floats with
``repr`` so ``parse(serialize(c)) == c``.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from .errors import ConfigParse

__all__ = ["ExperimentConfig", "RUN_KEYS", "COMMANDS", "parse", "serialize", "load"]

COMMANDS = ("rates", "solve", "bounce", "uci-check", "dense-scan", "eigen",
            "harmonics", "barrier", "demo-bessel")


def _floats(s):
    return tuple(float(x) for x in s.split(",") if x.strip())


def _seeds(s):
    s = s.strip()
    if ":" in s:
        lo, hi = s.split(":")
        return tuple(range(int(lo), int(hi)))
    return tuple(int(x) for x in s.split(",") if x.strip())


def _fmt_seq(v):
    return ", ".join(repr(x) for x in v)


def _fmt_param(v):
    if isinstance(v, tuple):
        # a trailing comma keeps one-element lists lists
        return _fmt_seq(v) + ("," if len(v) == 1 else "")
    return repr(float(v))


def _fmt_seeds(v):
    v = tuple(v)
    if len(v) > 1 and v == tuple(range(v[0], v[-1] + 1)):
        return f"{v[0]}:{v[-1] + 1}"
    return ", ".join(str(x) for x in v)


# key -> (parse, format)
_FLOAT = (float, repr)
_INT = (int, str)
_STR = (str, str)
_FLOATS = (_floats, _fmt_seq)
_SEEDS = (_seeds, _fmt_seeds)

RUN_KEYS = {
    "command": _STR,
    "x_lo": _FLOAT,
    "x_hi": _FLOAT,
    "x0": _FLOATS,
    "u0": _FLOAT,
    "du0": _FLOAT,
    "x_end": _FLOAT,
    "x_bar": _FLOAT,
    "x_tail": _FLOAT,
    "tol": _FLOAT,
    "tol_thm": _FLOAT,
    "residual_tol": _FLOAT,
    "grid_n": _INT,
    "method": _STR,
    "kappa": _FLOAT,
    "kappa_prime": _FLOAT,
    "seeds": _SEEDS,
    "workers": _INT,
    "radii": _FLOATS,
    "mesh_n": _INT,
    "mesh_density": _FLOAT,
    "band": _INT,
    "n_dim": _INT,
    "n_r": _INT,
    "R": _FLOAT,
    "R1": _FLOAT,
    "h": _FLOAT,
    "delta": _FLOAT,
    "grid": (lambda s: tuple(int(x) for x in s.lower().split("x")), lambda v: "x".join(map(str, v))),
}
OUTPUT_KEYS = {"directory": _STR, "formats": (lambda s: tuple(x.strip() for x in s.split(",") if x.strip()),
                                              lambda v: ", ".join(v))}
FIELD_KEYS = {"profile": _STR, "seed": _INT}


@dataclass(frozen=True)
class ExperimentConfig:
    profile: str = "constant"
    seed: int = 0
    params: dict = field(default_factory=dict)
    run: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    @property
    def command(self) -> str:
        return self.run.get("command", "")

    def with_overrides(self, run=None, field_=None, output=None, params=None) -> "ExperimentConfig":
        f = dict(field_ or {})
        return ExperimentConfig(
            f.get("profile", self.profile), f.get("seed", self.seed),
            {**self.params, **(params or {})}, {**self.run, **(run or {})},
            {**self.output, **(output or {})})


def _convert(section, key, raw, table):
    if key not in table:
        raise ConfigParse(f"unknown key '{key}' in section [{section}]")
    try:
        return table[key][0](raw)
    except ValueError as exc:
        raise ConfigParse(f"[{section}] {key} = {raw!r}: {exc}") from None


def parse(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";",),
                                   delimiters=("=",))
    cp.optionxform = str  # keys are case-sensitive (R vs r)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigParse(str(exc)) from None
    extra = set(cp.sections()) - {"field", "run", "output"}
    if extra:
        raise ConfigParse(f"unknown section(s): {', '.join(sorted(extra))}")
    fsec = dict(cp["field"]) if cp.has_section("field") else {}
    params, fvals = {}, {}
    for k, raw in fsec.items():
        if k.startswith("params."):
            try:
                params[k[len("params."):]] = _floats(raw) if "," in raw else float(raw)
            except ValueError:
                raise ConfigParse(f"[field] {k} = {raw!r} is not a number") from None
        else:
            fvals[k] = _convert("field", k, raw, FIELD_KEYS)
    run = {k: _convert("run", k, v, RUN_KEYS) for k, v in (cp["run"].items() if cp.has_section("run") else [])}
    out = {k: _convert("output", k, v, OUTPUT_KEYS)
           for k, v in (cp["output"].items() if cp.has_section("output") else [])}
    if "command" in run and run["command"] not in COMMANDS:
        raise ConfigParse(f"unknown command '{run['command']}'")
    return ExperimentConfig(fvals.get("profile", "constant"), fvals.get("seed", 0), params, run, out)


def serialize(cfg: ExperimentConfig) -> str:
    lines = ["[field]", f"profile = {cfg.profile}", f"seed = {cfg.seed}"]
    lines += [f"params.{k} = {_fmt_param(v)}" for k, v in cfg.params.items()]
    lines += ["", "[run]"]
    lines += [f"{k} = {RUN_KEYS[k][1](v)}" for k, v in cfg.run.items()]
    lines += ["", "[output]"]
    lines += [f"{k} = {OUTPUT_KEYS[k][1](v)}" for k, v in cfg.output.items()]
    return "\n".join(lines) + "\n"


def load(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())
