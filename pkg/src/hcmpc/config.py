"""INI-style configuration files.

Sections and keys::

    [model]
    scenario = double_integrator   ; optional preset: scalar_test, double_integrator, quadrotor
    name = double_integrator       ; builtin model identifier (defaults to the preset's)
    r = 0.1                        ; any other key is a model override (Python literal)

    [run]
    x0 = (-0.8, 0.6, -0.45, 0.65)
    T = 300

    [horizons]
    pairs = (10, 5), (10, 6)       ; explicit (N, Ntilde) pairs, or
    sweep_N = 10, 20               ; every valid Ntilde = 2..N-1 for each N

    [solver]                       ; SolverOptions fields
    kkt_tolerance = 1e-8

    [bounds]
    delta = heuristic | prop4
    nu = heuristic | prop7
    provenance = x0 | trajectory
    baseline_lcss = true

    [oracle]
    N_max = 6
    samples = 20
    state_nodes = 401
    input_nodes = 201
    tolerance = 1e-3

    [output]
    dir = out

Errors carry the file line of the offending entry.
"""

from __future__ import annotations

import ast
import configparser
import hashlib
import json
import re
from dataclasses import asdict, dataclass, field, fields

from .errors import ConfigError, HCMPCError
from .scenarios import ScenarioConfig, double_integrator_scenario, quadrotor_scenario, scalar_scenario
from .solver import SolverOptions

PRESETS = {
    "scalar_test": scalar_scenario,
    "double_integrator": double_integrator_scenario,
    "quadrotor": quadrotor_scenario,
}
SECTIONS = ("model", "run", "horizons", "solver", "bounds", "oracle", "output")
PROVENANCE_ALIASES = {"x0": "x0_only", "x0_only": "x0_only",
                      "trajectory": "full_trajectory", "full_trajectory": "full_trajectory"}
_ORACLE_KEYS = {"N_max": int, "samples": int, "state_nodes": int, "input_nodes": int,
                "tolerance": float, "interpolation": str}


@dataclass(frozen=True)
class OracleSettings:
    N_max: int = 6
    samples: int = 20
    state_nodes: int = 401
    input_nodes: int = 201
    tolerance: float = 1e-3
    interpolation: str = "multilinear"


@dataclass(frozen=True)
class AppConfig:
    scenario: ScenarioConfig
    oracle: OracleSettings = field(default_factory=OracleSettings)
    out_dir: str = "out"
    path: str = None

    def to_dict(self):
        s = self.scenario
        return {
            "model": s.model,
            "overrides": {k: _jsonable(v) for k, v in sorted(s.overrides.items())},
            "pairs": [[p.N, p.Ntilde] for p in s.pairs],
            "x0": list(s.x0),
            "T": int(s.T),
            "solver": asdict(s.solver),
            "delta": s.delta_method,
            "nu": s.nu_method,
            "provenance": s.provenance,
            "baseline_lcss": bool(s.baseline_lcss),
            "name": s.name,
            "oracle": asdict(self.oracle),
        }

    def config_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_scenario(self, **changes):
        from dataclasses import replace
        return replace(self, scenario=replace(self.scenario, **changes))


def _jsonable(v):
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    return v


class _Locator:
    """Line numbers of sections and keys in the raw text."""

    def __init__(self, text):
        self.lines = {}
        section = None
        for i, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            m = re.match(r"^\[([^\]]+)\]", line)
            if m:
                section = m.group(1).strip()
                self.lines.setdefault((section, None), i)
                continue
            m = re.match(r"^([^=:#;\s][^=:]*?)\s*[=:]", line)
            if m and section is not None:
                self.lines.setdefault((section, m.group(1).strip().lower()), i)

    def __call__(self, section, key=None):
        k = None if key is None else key.lower()
        return self.lines.get((section, k), self.lines.get((section, None)))


def _literal(text):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _tuple_of_numbers(text):
    v = _literal(text)
    if isinstance(v, (int, float)):
        return (float(v),)
    try:
        return tuple(float(x) for x in v)
    except TypeError:
        raise ValueError(f"expected a list of numbers, got {text!r}") from None


def _pairs(text):
    text = text.strip()
    if not text:
        return ()
    v = _literal(f"[{text}]")
    if not isinstance(v, list):
        raise ValueError(f"cannot read pairs from {text!r}")
    out = []
    for p in v:
        if not (isinstance(p, (tuple, list)) and len(p) == 2):
            raise ValueError(f"each pair must be (N, Ntilde), got {p!r}")
        out.append((p[0], p[1]))
    return tuple(out)


def _ints(text):
    text = text.strip()
    if not text:
        return ()
    v = _literal(f"[{text}]")
    if not all(isinstance(x, int) for x in v):
        raise ValueError(f"expected integers, got {text!r}")
    return tuple(v)


def parse_config(text, path=None):
    """Parse configuration text into an :class:`AppConfig`."""
    loc = _Locator(text)
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=path or "<config>")
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("entry before any [section] header", line=exc.lineno, path=path) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError("malformed line", line=line, path=path) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError(exc.message.split(": ", 1)[-1] if hasattr(exc, "message") else str(exc),
                          line=getattr(exc, "lineno", None), path=path) from None

    def fail(msg, section, key=None):
        raise ConfigError(msg, line=loc(section, key), path=path)

    for s in cp.sections():
        if s not in SECTIONS:
            fail(f"unknown section [{s}]; expected one of {', '.join(SECTIONS)}", s)
    if not cp.has_section("model"):
        raise ConfigError("missing [model] section", line=1, path=path)

    kw = {}
    model_sec = dict(cp.items("model"))
    preset = model_sec.pop("scenario", None)
    name = model_sec.pop("name", None)
    if preset is not None and preset not in PRESETS:
        fail(f"unknown scenario {preset!r}; choose from {sorted(PRESETS)}", "model", "scenario")
    if preset is None and name is None:
        fail("[model] needs 'scenario' or 'name'", "model")
    if name is not None:
        kw["model"] = name
    kw["overrides"] = {k: _literal(v) for k, v in model_sec.items()}

    if cp.has_section("run"):
        for key, raw in cp.items("run"):
            if key not in ("x0", "T"):
                fail(f"unknown key {key!r} in [run]", "run", key)
            try:
                kw[key] = _tuple_of_numbers(raw) if key == "x0" else int(raw)
            except ValueError as exc:
                fail(str(exc), "run", key)

    if cp.has_section("horizons"):
        h = dict(cp.items("horizons"))
        unknown = set(h) - {"pairs", "sweep_N"}
        if unknown:
            k = sorted(unknown)[0]
            fail(f"unknown key {k!r} in [horizons]", "horizons", k)
        pairs = []
        try:
            if "pairs" in h:
                pairs.extend(_pairs(h["pairs"]))
            if "sweep_N" in h:
                for N in _ints(h["sweep_N"]):
                    pairs.extend((N, Nt) for Nt in range(2, N))
        except ValueError as exc:
            fail(str(exc), "horizons", "pairs" if "pairs" in h else "sweep_N")
        if not pairs:
            fail("empty horizon list", "horizons", "pairs" if "pairs" in h else "sweep_N")
        kw["pairs"] = tuple(pairs)

    if cp.has_section("solver"):
        names = {f.name: f.type for f in fields(SolverOptions)}
        opts = {}
        for key, raw in cp.items("solver"):
            if key not in names:
                fail(f"unknown solver option {key!r}", "solver", key)
            v = _literal(raw)
            if key == "max_outer_iterations" and not isinstance(v, int):
                fail("max_outer_iterations must be an integer", "solver", key)
            opts[key] = v
        try:
            kw["solver"] = SolverOptions(**opts)
        except (HCMPCError, TypeError) as exc:
            fail(str(exc), "solver", next(iter(opts), None))

    if cp.has_section("bounds"):
        for key, raw in cp.items("bounds"):
            if key == "delta":
                kw["delta_method"] = raw
            elif key == "nu":
                kw["nu_method"] = raw
            elif key == "provenance":
                if raw not in PROVENANCE_ALIASES:
                    fail(f"provenance must be x0 or trajectory, got {raw!r}", "bounds", key)
                kw["provenance"] = PROVENANCE_ALIASES[raw]
            elif key == "baseline_lcss":
                try:
                    kw["baseline_lcss"] = _bool(raw)
                except ValueError as exc:
                    fail(str(exc), "bounds", key)
            else:
                fail(f"unknown key {key!r} in [bounds]", "bounds", key)

    oracle = {}
    if cp.has_section("oracle"):
        for key, raw in cp.items("oracle"):
            if key not in _ORACLE_KEYS:
                fail(f"unknown key {key!r} in [oracle]", "oracle", key)
            try:
                oracle[key] = _ORACLE_KEYS[key](raw)
            except ValueError as exc:
                fail(str(exc), "oracle", key)

    out_dir = "out"
    if cp.has_section("output"):
        for key, raw in cp.items("output"):
            if key != "dir":
                fail(f"unknown key {key!r} in [output]", "output", key)
            out_dir = raw

    try:
        if preset is not None:
            scen = PRESETS[preset](**kw)
        else:
            kw.setdefault("pairs", ())
            kw.setdefault("x0", ())
            scen = ScenarioConfig(**kw)
        scen.validate()
    except HCMPCError as exc:
        msg = str(exc)
        section, key = _blame(msg)
        if section == "horizons" and key is None:
            key = "pairs" if cp.has_option("horizons", "pairs") else "sweep_N"
        fail(msg, section, key)
    return AppConfig(scenario=scen, oracle=OracleSettings(**oracle), out_dir=out_dir,
                     path=path)


def _blame(msg):
    m = msg.lower()
    kw = re.search(r"keyword argument '([^']+)'", msg)
    if kw:
        return "model", kw.group(1)
    if "pair" in m or "ntilde" in m or "horizon" in m:
        return "horizons", None
    if "x0" in m:
        return "run", "x0"
    if "t must" in m:
        return "run", "T"
    if "delta" in m or "nu method" in m or "provenance" in m:
        return "bounds", None
    return "model", None


def load_config(path):
    """Read and parse a config file."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", path=str(path)) from None
    return parse_config(text, path=str(path))
