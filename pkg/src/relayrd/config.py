"""Problem configuration files (TOML).

    weights = [[1, 1, 1, 1]]       # optional, top level; default: unit vectors + 12 random

    [source]
    alphabets = [2, 2, 1]          # |X|, |Y|, |Z|; use 1 for a relay without side information
    pmf = [0.375, 0.125, 0.125, 0.375]   # flat, row-major over (X, Y, Z)

    [distortion]
    dA = "hamming"                 # or a |Y| x |Yhat| matrix
    dB = [[0, 1], [1, 0]]          # |X| x |Xhat|

    [budgets]
    DA = 0.1                       # number, list, or {start, stop, count} (inclusive)
    DB = [0.0, 0.1]

    [solver]                       # any SolverConfig field
    restarts = 8
    seed = 0

    [run]                          # command-specific selectors
    bound = "inner"
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields
from typing import Any

import numpy as np
import tomli
import tomli_w

from .probcore import JointSource, SourceError, validate_source
from .rdsolve import DistortionMeasure, SolverConfig

RUN_KEYS = {
    "bound": str, "selector": str, "source": str, "enc_side": list, "dec_side": list, "template": str,
    "scenario": str, "reading": str, "compare": list, "tolerance": float, "cards": dict,
}
SOLVER_FIELDS = {f.name: f.type for f in fields(SolverConfig)}


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


@dataclass
class ProblemSpec:
    alphabets: tuple[int, int, int]
    pmf: list[float]
    dA: list[list[float]]
    dB: list[list[float]]
    DA: list[float]
    DB: list[float]
    solver: dict[str, Any]
    weights: list[list[float]] | None = None
    run: dict[str, Any] = field(default_factory=dict)

    # ------------------------------------------------------------ objects

    def source(self) -> JointSource:
        return validate_source(self.pmf, ("X", "Y", "Z"), self.alphabets)

    def d_A(self) -> DistortionMeasure:
        return DistortionMeasure(np.array(self.dA, dtype=float))

    def d_B(self) -> DistortionMeasure:
        return DistortionMeasure(np.array(self.dB, dtype=float))

    def cfg(self) -> SolverConfig:
        return SolverConfig(**self.solver)

    def budget_pairs(self) -> list[tuple[float, float]]:
        a, b = self.DA, self.DB
        if len(a) == 1:
            a = a * len(b)
        if len(b) == 1:
            b = b * len(a)
        return list(zip(a, b))

    # ------------------------------------------------------------ serialisation

    def resolved(self) -> dict:
        out = {
            "source": {"alphabets": list(self.alphabets), "pmf": list(self.pmf)},
            "distortion": {"dA": self.dA, "dB": self.dB},
            "budgets": {"DA": list(self.DA), "DB": list(self.DB)},
            "solver": dict(self.solver),
        }
        if self.weights is not None:
            out["weights"] = self.weights
        if self.run:
            out["run"] = dict(self.run)
        return out

    def to_toml(self) -> str:
        return tomli_w.dumps(_drop_none(self.resolved()))

    def digest(self) -> str:
        return hashlib.sha256(self.to_toml().encode("utf-8")).hexdigest()


def _drop_none(d):
    if isinstance(d, dict):
        return {k: _drop_none(v) for k, v in d.items() if v is not None}
    return d


def _num(x, where: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {x!r}")
    return float(x)


def _budget_grid(raw, where: str) -> list[float]:
    if isinstance(raw, dict):
        missing = {"start", "stop", "count"} - set(raw)
        if missing:
            raise ConfigError(f"{where}: grid needs start, stop and count (missing {sorted(missing)})")
        count = raw["count"]
        if not isinstance(count, int) or count < 1:
            raise ConfigError(f"{where}.count must be a positive integer")
        vals = np.linspace(_num(raw["start"], where), _num(raw["stop"], where), count).tolist()
    elif isinstance(raw, list):
        vals = [_num(v, f"{where}[{i}]") for i, v in enumerate(raw)]
    else:
        vals = [_num(raw, where)]
    if not vals:
        raise ConfigError(f"{where}: empty budget list")
    if any(v < 0 for v in vals):
        raise ConfigError(f"{where}: budgets must be >= 0")
    return vals


def _matrix(raw, rows: int, where: str) -> list[list[float]]:
    if raw == "hamming":
        return (1.0 - np.eye(rows)).tolist()
    if not isinstance(raw, list) or not raw or not all(isinstance(r, list) for r in raw):
        raise ConfigError(f"{where}: expected \"hamming\" or a matrix (list of rows)")
    m = [[_num(v, f"{where}[{i}][{j}]") for j, v in enumerate(r)] for i, r in enumerate(raw)]
    if len(m) != rows:
        raise ConfigError(f"{where}: dimension mismatch, {len(m)} rows but the source alphabet has {rows}")
    if len({len(r) for r in m}) != 1 or not m[0]:
        raise ConfigError(f"{where}: rows must have equal, nonzero length")
    if any(v < 0 for r in m for v in r):
        raise ConfigError(f"{where}: negative distortion entry")
    return m


def spec_from_dict(doc: dict) -> ProblemSpec:
    known = {"source", "distortion", "budgets", "solver", "weights", "run"}
    extra = set(doc) - known
    if extra:
        raise ConfigError(f"unknown top-level keys: {sorted(extra)}")
    for sec in ("source", "distortion", "budgets"):
        if not isinstance(doc.get(sec), dict):
            raise ConfigError(f"missing section [{sec}]")
    src = doc["source"]
    alph = src.get("alphabets")
    if not isinstance(alph, list) or not all(isinstance(a, int) and not isinstance(a, bool) for a in alph):
        raise ConfigError("source.alphabets: expected a list of integers [|X|, |Y|, |Z|]")
    if len(alph) == 2:
        raise ConfigError("source.alphabets: Z required (use cardinality 1 for no relay side information)")
    if len(alph) != 3:
        raise ConfigError(f"source.alphabets: expected 3 sizes [|X|, |Y|, |Z|], got {len(alph)}")
    if any(a < 1 for a in alph):
        raise ConfigError("source.alphabets: sizes must be >= 1")
    pmf = src.get("pmf")
    if not isinstance(pmf, list):
        raise ConfigError("source.pmf: expected a flat list of numbers")
    pmf = [_num(v, f"source.pmf[{i}]") for i, v in enumerate(pmf)]
    try:
        js = validate_source(pmf, ("X", "Y", "Z"), alph)
    except SourceError as exc:
        raise ConfigError(f"source.pmf: {exc}") from None
    dist = doc["distortion"]
    for key in ("dA", "dB"):
        if key not in dist:
            raise ConfigError(f"missing distortion.{key}")
    dA = _matrix(dist["dA"], js.sizes[1], "distortion.dA")
    dB = _matrix(dist["dB"], js.sizes[0], "distortion.dB")
    bud = doc["budgets"]
    for key in ("DA", "DB"):
        if key not in bud:
            raise ConfigError(f"missing budgets.{key}")
    DA, DB = _budget_grid(bud["DA"], "budgets.DA"), _budget_grid(bud["DB"], "budgets.DB")
    if len(DA) != len(DB) and 1 not in (len(DA), len(DB)):
        raise ConfigError(f"budgets: DA has {len(DA)} values and DB {len(DB)}; lengths must match or one be scalar")
    solver = dict(doc.get("solver", {}))
    bad = set(solver) - set(SOLVER_FIELDS)
    if bad:
        raise ConfigError(f"unknown solver keys: {sorted(bad)}")
    defaults = SolverConfig()
    resolved = {}
    for name in SOLVER_FIELDS:
        v = solver.get(name, getattr(defaults, name))
        if name == "card" and v is None:
            continue
        resolved[name] = v
    try:
        SolverConfig(**resolved)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"solver: {exc}") from None
    weights = doc.get("weights")
    if weights is not None:
        if not isinstance(weights, list) or not all(isinstance(w, list) and len(w) == 4 for w in weights):
            raise ConfigError("weights: expected a list of 4-element lists")
        weights = [[_num(v, f"weights[{i}]") for v in w] for i, w in enumerate(weights)]
        for i, w in enumerate(weights):
            if any(v < 0 for v in w) or not any(w):
                raise ConfigError(f"weights[{i}]: entries must be nonnegative and not all zero")
    run = dict(doc.get("run", {}))
    for k, v in run.items():
        if k not in RUN_KEYS:
            raise ConfigError(f"unknown run key {k!r}; known: {sorted(RUN_KEYS)}")
        want = RUN_KEYS[k]
        if want is float:
            run[k] = _num(v, f"run.{k}")
        elif not isinstance(v, want):
            raise ConfigError(f"run.{k}: expected {want.__name__}")
    return ProblemSpec(tuple(alph), pmf, dA, dB, DA, DB, resolved, weights, run)


def loads(text: str) -> ProblemSpec:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"parse error: {exc}") from None
    return spec_from_dict(doc)


def parse_config(path) -> ProblemSpec:
    try:
        with open(path, "rb") as fh:
            text = fh.read().decode("utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    spec = loads(text)
    return spec
