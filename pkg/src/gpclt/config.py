"""Run configuration: YAML in, validated RunConfig out."""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .scattering import DEFAULT_ELL, DEFAULT_INNER, RadialPotential


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending key path."""

    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path


DEFAULT_FOCK = {
    "modes": [[1, 0, 0], [-1, 0, 0]],
    "n_max": 16,
    "N": 40,
    "N_sweep": [10, 20, 40, 80],
    "eta": 0.3,
    "samples": 200,
    "max_dim": 20000,
    "cf": {
        "n_max": 20,
        "N": 40,
        "nus": [[[0.5, 0.0], [0.0, 0.3]], [[0.2, 0.1], [-0.4, 0.0]]],
    },
    "cubic": {
        "modes": [[1, 0, 0], [2, 0, 0], [3, 0, 0], [-1, 0, 0], [-2, 0, 0], [-3, 0, 0]],
        "low": [[1, 0, 0], [-1, 0, 0]],
        "high": [[2, 0, 0], [-2, 0, 0]],
        "n_max": 6,
        "eta": -0.4,
        "h": [[0, 0], [0, 0], [0.6, 0], [0.8, 0], [0, 0], [0, 0]],
    },
    "weyl_h": [[0.6, 0.0], [0.0, 0.8]],
}

DEFAULT_SWEEP = {
    "N": [100, 1000, 10000, 100000],
    "step4_N": [1000, 2000, 4000, 8000],
    "cutoff": 8,
    "shell_N": 1000,
}

DEFAULTS = {
    "potential": {"kind": "soft_sphere", "v0": 2.0, "R": 0.5},
    "N": [10000],
    "ell": DEFAULT_ELL,
    "cutoff": 4,
    "grid": DEFAULT_INNER,
    "observables": [{"name": "cos1", "preset": "cos", "n0": [1, 0, 0]}],
    "select": None,
    "excited": None,
    "s_grid": {"s_max": None, "n": None},
    "lambda_grid": {"min": -8.0, "max": 8.0, "n": 801},
    "fock": DEFAULT_FOCK,
    "sweep": DEFAULT_SWEEP,
    "seed": 0,
    "output": {"dir": "out", "format": "csv"},
}


@dataclass
class RunConfig:
    raw: dict
    potential: RadialPotential
    N: list
    ell: float
    cutoff: int
    grid: int
    observables: list
    select: list
    excited: list | None
    s_grid: dict
    lambda_grid: dict
    fock: dict
    sweep: dict
    seed: int
    out_dir: Path
    fmt: str
    source: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def digest(self) -> str:
        """sha256 of the canonical JSON of the resolved configuration.

        The output section only says where files go, so it is left out:
        the same run written to two directories carries the same hash.
        """
        content = {k: v for k, v in self.raw.items() if k != "output"}
        blob = json.dumps(content, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _num(d, key, path, lo=None, hi=None, integer=False, open_lo=False):
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}" if path else key, f"expected a number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(f"{path}.{key}" if path else key, f"expected an integer, got {v!r}")
    if not math.isfinite(v):
        raise ConfigError(f"{path}.{key}" if path else key, "must be finite")
    name = f"{path}.{key}" if path else key
    if lo is not None and (v < lo or (open_lo and v == lo)):
        raise ConfigError(name, f"must be {'>' if open_lo else '>='} {lo}, got {v}")
    if hi is not None and v > hi:
        raise ConfigError(name, f"must be <= {hi}, got {v}")
    return int(v) if integer else float(v)


def _triple(v, path):
    if not (isinstance(v, (list, tuple)) and len(v) == 3 and all(isinstance(c, int) and not isinstance(c, bool) for c in v)):
        raise ConfigError(path, f"expected an integer triple, got {v!r}")
    if tuple(v) == (0, 0, 0):
        raise ConfigError(path, "the zero mode is excluded")
    return [int(c) for c in v]


def _complex_list(v, path):
    if not isinstance(v, list):
        raise ConfigError(path, "expected a list of [re, im] pairs")
    out = []
    for i, c in enumerate(v):
        if isinstance(c, (int, float)) and not isinstance(c, bool):
            out.append(complex(c))
        elif isinstance(c, list) and len(c) == 2:
            out.append(complex(float(c[0]), float(c[1])))
        else:
            raise ConfigError(f"{path}[{i}]", f"expected a number or [re, im], got {c!r}")
    return out


def _potential(d: dict) -> RadialPotential:
    if not isinstance(d, dict) or "kind" not in d:
        raise ConfigError("potential", "needs a 'kind' (soft_sphere, zero or tabulated)")
    kind = d["kind"]
    try:
        if kind == "soft_sphere":
            return RadialPotential.soft_sphere(_num(d, "v0", "potential", lo=0),
                                               _num(d, "R", "potential", lo=0, open_lo=True))
        if kind == "zero":
            return RadialPotential.zero(_num(d, "R", "potential", lo=0, open_lo=True) if "R" in d else 1.0)
        if kind == "tabulated":
            return RadialPotential.tabulated(d["grid"], d["values"])
    except KeyError as exc:
        raise ConfigError(f"potential.{exc.args[0]}", "missing") from None
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("potential", str(exc)) from None
    raise ConfigError("potential.kind", f"unknown kind {kind!r}")


def _validate_observables(obs) -> list:
    if not isinstance(obs, list) or not obs:
        raise ConfigError("observables", "expected a non-empty list")
    names = set()
    for i, o in enumerate(obs):
        path = f"observables[{i}]"
        if not isinstance(o, dict):
            raise ConfigError(path, "expected a mapping")
        if "name" not in o:
            raise ConfigError(f"{path}.name", "missing")
        if o["name"] in names:
            raise ConfigError(f"{path}.name", f"duplicate name {o['name']!r}")
        names.add(o["name"])
        preset = o.get("preset")
        if preset in ("cos", "exp"):
            if "n0" not in o:
                raise ConfigError(f"{path}.n0", "missing")
            _triple(o["n0"], f"{path}.n0")
        elif preset == "diag":
            pass
        elif preset is None:
            if "coefficients" not in o:
                raise ConfigError(path, "needs either 'preset' or 'coefficients'")
            for j, c in enumerate(o["coefficients"]):
                if not isinstance(c, list) or len(c) not in (2, 3):
                    raise ConfigError(f"{path}.coefficients[{j}]", "expected [n, re] or [n, re, im]")
                if list(c[0]) != [0, 0, 0]:
                    _triple(c[0], f"{path}.coefficients[{j}][0]")
        else:
            raise ConfigError(f"{path}.preset", f"unknown preset {preset!r}")
    return obs


def _fock(d: dict) -> dict:
    for key in ("n_max", "N", "samples", "max_dim"):
        _num(d, key, "fock", lo=1, integer=True)
    if d["samples"] < 200:
        raise ConfigError("fock.samples", "bound fitting needs at least 200 random states")
    if d["n_max"] > d["N"]:
        raise ConfigError("fock.n_max", f"n_max = {d['n_max']} exceeds N = {d['N']}: the excitation space "
                          "holds at most N particles, so sqrt(N - N_+) would not be real")
    for i, m in enumerate(d["modes"]):
        _triple(m, f"fock.modes[{i}]")
    sweep = d["N_sweep"]
    if not isinstance(sweep, list) or len(sweep) < 2:
        raise ConfigError("fock.N_sweep", "expected at least two values")
    for i, N in enumerate(sweep):
        if not isinstance(N, int) or N < 2:
            raise ConfigError(f"fock.N_sweep[{i}]", f"expected an integer >= 2, got {N!r}")
    cf = d["cf"]
    if cf["n_max"] > cf["N"]:
        raise ConfigError("fock.cf.n_max", f"n_max = {cf['n_max']} exceeds N = {cf['N']}")
    for i, nu in enumerate(cf["nus"]):
        if len(_complex_list(nu, f"fock.cf.nus[{i}]")) != len(d["modes"]):
            raise ConfigError(f"fock.cf.nus[{i}]", f"needs one entry per mode ({len(d['modes'])})")
    cub = d["cubic"]
    for i, m in enumerate(cub["modes"]):
        _triple(m, f"fock.cubic.modes[{i}]")
    if min(sweep) < cub["n_max"]:
        raise ConfigError("fock.cubic.n_max", f"must not exceed the smallest swept N ({min(sweep)})")
    if len(_complex_list(cub["h"], "fock.cubic.h")) != len(cub["modes"]):
        raise ConfigError("fock.cubic.h", "needs one entry per cubic mode")
    if len(_complex_list(d["weyl_h"], "fock.weyl_h")) != len(d["modes"]):
        raise ConfigError("fock.weyl_h", "needs one entry per mode")
    # dense work is quadratic in the dimension; refuse before building
    dims = {
        "fock.n_max": math.comb(d["n_max"] + len(d["modes"]), len(d["modes"])),
        "fock.N_sweep": math.comb(max(sweep) + len(d["modes"]), len(d["modes"])),
        "fock.cubic.n_max": math.comb(cub["n_max"] + len(cub["modes"]), len(cub["modes"])),
        "fock.cf.n_max": math.comb(cf["n_max"] + len(d["modes"]), len(d["modes"])),
    }
    for path, dim in dims.items():
        if dim > d["max_dim"]:
            raise ConfigError(path, f"estimated basis dimension {dim} exceeds fock.max_dim = {d['max_dim']}")
    return d


def validate(raw: dict, source: str = "") -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "expected a mapping at the top level")
    unknown = set(raw) - set(DEFAULTS)
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown key")
    cfg = _merge(DEFAULTS, raw)
    pot = _potential(cfg["potential"])
    ell = _num(cfg, "ell", "", lo=0, hi=0.5, open_lo=True)
    if ell >= 0.5:
        raise ConfigError("ell", "must lie strictly inside (0, 1/2)")
    Ns = cfg["N"] if isinstance(cfg["N"], list) else [cfg["N"]]
    if not Ns:
        raise ConfigError("N", "expected at least one value")
    for i, N in enumerate(Ns):
        if isinstance(N, bool) or not isinstance(N, (int, float)) or N < 1:
            raise ConfigError(f"N[{i}]", f"expected a number >= 1, got {N!r}")
        if N * ell <= pot.support_radius:
            raise ConfigError(f"N[{i}]", f"N*ell = {N * ell:g} must exceed the potential support radius "
                              f"{pot.support_radius:g}")
    cutoff = _num(cfg, "cutoff", "", lo=1, integer=True)
    grid = _num(cfg, "grid", "", lo=16, integer=True)
    if grid % 2:
        raise ConfigError("grid", "must be even")
    obs = _validate_observables(cfg["observables"])
    names = [o["name"] for o in obs]
    select = cfg["select"] or names
    for i, s in enumerate(select):
        if s not in names:
            raise ConfigError(f"select[{i}]", f"observable {s!r} is not defined")
    if len(select) > 3:
        raise ConfigError("select", "at most three observables (k <= 3) can be gridded")
    excited = cfg["excited"]
    if excited is not None:
        if not isinstance(excited, dict) or "p" not in excited:
            raise ConfigError("excited.p", "missing")
        _triple(excited["p"], "excited.p")
        excited = list(excited["p"])
    lg = cfg["lambda_grid"]
    _num(lg, "min", "lambda_grid")
    _num(lg, "max", "lambda_grid")
    _num(lg, "n", "lambda_grid", lo=3, integer=True)
    if lg["max"] <= lg["min"]:
        raise ConfigError("lambda_grid.max", "must exceed lambda_grid.min")
    sg = cfg["s_grid"]
    if sg.get("s_max") is not None:
        _num(sg, "s_max", "s_grid", lo=0, open_lo=True)
    if sg.get("n") is not None:
        _num(sg, "n", "s_grid", lo=3, integer=True)
    fock = _fock(cfg["fock"])
    sweep = cfg["sweep"]
    for key in ("N", "step4_N"):
        if not isinstance(sweep[key], list) or len(sweep[key]) < 3:
            raise ConfigError(f"sweep.{key}", "at least three points are needed to fit a slope")
        for i, N in enumerate(sweep[key]):
            if N * ell <= pot.support_radius:
                raise ConfigError(f"sweep.{key}[{i}]", "N*ell must exceed the potential support radius")
    _num(sweep, "cutoff", "sweep", lo=2, integer=True)
    seed = _num(cfg, "seed", "", lo=0, integer=True)
    out = cfg["output"]
    if out.get("format") not in ("csv", "json"):
        raise ConfigError("output.format", f"expected csv or json, got {out.get('format')!r}")
    return RunConfig(raw=cfg, potential=pot, N=[float(N) for N in Ns], ell=ell, cutoff=cutoff, grid=grid,
                     observables=obs, select=list(select), excited=excited, s_grid=sg, lambda_grid=lg,
                     fock=fock, sweep=sweep, seed=seed, out_dir=Path(out["dir"]), fmt=out["format"],
                     source=source)


def load(path: str | Path | None, overrides: dict | None = None) -> RunConfig:
    raw = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
        try:
            raw = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError("--config", f"not valid YAML: {exc}") from None
    if overrides:
        raw = _merge(raw, overrides)
    return validate(raw, str(path or ""))
