"""JSON scenario files and the random scenario generator.

Agents are numbered from 1 in scenario files, matching the CSV column names
``x_1 .. x_n``; everything in memory is 0-based.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .digraph import Digraph
from .engine import SimConfig
from .protocol import ProtocolParams, delay_bound

SCHEMA_VERSION = 1
REQUIRED = ("version", "name", "edges", "x0", "delta", "sigma", "h", "tau")
OPTIONAL = ("horizon_steps", "convergence_tol")


class ScenarioError(ValueError):
    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class ParseError(ScenarioError):
    pass


class SchemaError(ScenarioError):
    pass


class ValidationError(ScenarioError):
    pass


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    edges: tuple[tuple[int, int], ...]
    x0: tuple[float, ...]
    delta: tuple[float, ...]
    sigma: tuple[float, ...]
    h: float
    tau: float = 0.0
    horizon_steps: int = 100_000
    convergence_tol: float = 1e-8

    def __post_init__(self):
        n = len(self.x0)
        if n < 1:
            raise ValidationError("x0", "at least one agent is required")
        for fname in ("delta", "sigma"):
            if len(getattr(self, fname)) != n:
                raise ValidationError(fname, f"expected {n} entries, got {len(getattr(self, fname))}")
        seen = set()
        for e in self.edges:
            i, j = e
            if not (0 <= i < n and 0 <= j < n):
                raise ValidationError("edges", f"edge {[i + 1, j + 1]} out of range 1..{n}")
            if i == j:
                raise ValidationError("edges", f"self-loop on agent {i + 1}")
            if e in seen:
                raise ValidationError("edges", f"duplicate edge {[i + 1, j + 1]}")
            seen.add(e)
        for fname in ("x0", "delta", "sigma"):
            if not all(math.isfinite(v) for v in getattr(self, fname)):
                raise ValidationError(fname, "entries must be finite")
        if not self.h > 0:
            raise ValidationError("h", f"sampling period must satisfy h > 0, got {self.h}")
        if not 0 <= self.tau < self.h:
            raise ValidationError("tau", f"delay must satisfy 0 ≤ τ < h, got tau={self.tau}, h={self.h}")
        try:
            SimConfig(self.horizon_steps, self.convergence_tol)
        except ValueError as exc:
            field = "horizon_steps" if "horizon" in str(exc) else "convergence_tol"
            raise ValidationError(field, str(exc)) from None

    @property
    def n(self) -> int:
        return len(self.x0)

    def digraph(self) -> Digraph:
        return Digraph.from_edges(self.n, self.edges)

    def params(self) -> ProtocolParams:
        return ProtocolParams(self.delta, self.sigma, self.h, self.tau)

    def config(self, record_substeps: bool = False) -> SimConfig:
        return SimConfig(self.horizon_steps, self.convergence_tol, record_substeps)

    def to_dict(self) -> dict:
        return {
            "version": SCHEMA_VERSION,
            "name": self.name,
            "edges": [[i + 1, j + 1] for i, j in self.edges],
            "x0": list(self.x0),
            "delta": list(self.delta),
            "sigma": list(self.sigma),
            "h": self.h,
            "tau": self.tau,
            "horizon_steps": self.horizon_steps,
            "convergence_tol": self.convergence_tol,
        }

    def replace(self, **changes) -> "Scenario":
        kw = {k: getattr(self, k) for k in self.__dataclass_fields__}
        kw.update(changes)
        return Scenario(**kw)


def _numbers(raw: dict, key: str) -> tuple[float, ...]:
    v = raw[key]
    if not isinstance(v, list) or not all(isinstance(a, (int, float)) and not isinstance(a, bool) for a in v):
        raise SchemaError(key, "expected a list of numbers")
    return tuple(float(a) for a in v)


def _number(raw: dict, key: str) -> float:
    v = raw[key]
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise SchemaError(key, "expected a number")
    return float(v)


def scenario_from_dict(raw) -> Scenario:
    if not isinstance(raw, dict):
        raise SchemaError("<root>", "expected a JSON object")
    for key in REQUIRED:
        if key not in raw:
            raise SchemaError(key, "missing required field")
    extra = sorted(set(raw) - set(REQUIRED) - set(OPTIONAL))
    if extra:
        raise SchemaError(extra[0], "unknown field")
    if raw["version"] != SCHEMA_VERSION:
        raise SchemaError("version", f"unsupported version {raw['version']!r} (expected {SCHEMA_VERSION})")
    if not isinstance(raw["name"], str):
        raise SchemaError("name", "expected a string")
    edges = raw["edges"]
    if not isinstance(edges, list) or not all(
        isinstance(e, list) and len(e) == 2 and all(isinstance(a, int) and not isinstance(a, bool) for a in e) for e in edges
    ):
        raise SchemaError("edges", "expected a list of [receiver, source] integer pairs")
    kw = {}
    if "horizon_steps" in raw:
        hs = raw["horizon_steps"]
        if not isinstance(hs, int) or isinstance(hs, bool):
            raise SchemaError("horizon_steps", "expected an integer")
        kw["horizon_steps"] = hs
    if "convergence_tol" in raw:
        kw["convergence_tol"] = _number(raw, "convergence_tol")
    return Scenario(
        name=raw["name"],
        edges=tuple((i - 1, j - 1) for i, j in edges),
        x0=_numbers(raw, "x0"),
        delta=_numbers(raw, "delta"),
        sigma=_numbers(raw, "sigma"),
        h=_number(raw, "h"),
        tau=_number(raw, "tau"),
        **kw,
    )


def load_scenario(path) -> Scenario:
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError("<file>", f"{path}: {exc}") from None
    return scenario_from_dict(raw)


def save_scenario(s: Scenario, path) -> None:
    Path(path).write_text(json.dumps(s.to_dict(), indent=2) + "\n")


def _cycle_edges(nodes) -> list[tuple[int, int]]:
    # each node receives from its predecessor around the cycle
    m = len(nodes)
    return [(nodes[k], nodes[k - 1]) for k in range(m)] if m > 1 else []


def generate(kind: str, n: int, seed: int, delayed: bool = False, extra_edge_prob: float = 0.2) -> Scenario:
    """Random scenario with a guaranteed topology class and valid parameters.

    ``strongly-connected`` lays a random Hamiltonian cycle and adds extra
    edges. ``spanning-tree`` picks a closed root group (a cycle, or a single
    agent), hangs every other agent off an earlier one, then adds extra edges
    that never enter the root group, so the result is never strongly connected.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    rng = np.random.default_rng(seed)
    order = [int(v) for v in rng.permutation(n)]
    edges: set[tuple[int, int]] = set()
    if kind == "strongly-connected":
        edges.update(_cycle_edges(order))
        blocked: set[int] = set()
    elif kind == "spanning-tree":
        r = int(rng.integers(1, n))
        edges.update(_cycle_edges(order[:r]))
        for k in range(r, n):
            edges.add((order[k], order[int(rng.integers(0, k))]))
        blocked = set(order[:r])
    else:
        raise ValueError(f"unknown kind {kind!r}")
    for i in range(n):
        for j in range(n):
            if i != j and i not in blocked and rng.random() < extra_edge_prob:
                edges.add((i, j))

    delta = rng.uniform(0.05, 0.45, n)
    sigma = rng.uniform(0.05, 0.95, n) * (1 - 2 * delta)
    x0 = rng.uniform(-10, 10, n)
    h = float(10 ** rng.uniform(-2, 1))
    tau = 0.0
    if delayed:
        beta = delay_bound(ProtocolParams(delta, sigma, h))
        tau = float(rng.uniform(0.1, 0.9) * h * beta)
    return Scenario(
        name=f"{kind}-n{n}-s{seed}",
        edges=tuple(sorted(edges)),
        x0=tuple(float(v) for v in x0),
        delta=tuple(float(v) for v in delta),
        sigma=tuple(float(v) for v in sigma),
        h=h,
        tau=tau,
    )
