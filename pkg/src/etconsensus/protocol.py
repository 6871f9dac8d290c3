"""Control law, periodic event detector and parameter validation."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .digraph import Digraph, has_spanning_tree


@dataclass(frozen=True, eq=False)
class ProtocolParams:
    """Per-agent gains ``delta`` and thresholds ``sigma``, sampling period ``h``, delay ``tau``.

    Only the structural invariants (``h > 0``, ``0 <= tau < h``, matching
    lengths) are enforced here; the convergence conditions on ``delta`` and
    ``sigma`` are reported by :func:`validate`.
    """

    delta: np.ndarray
    sigma: np.ndarray
    h: float
    tau: float = 0.0

    def __post_init__(self):
        delta = np.array(self.delta, dtype=float).ravel()
        sigma = np.array(self.sigma, dtype=float).ravel()
        if sigma.size == 1 and delta.size > 1:
            sigma = np.full_like(delta, sigma[0])
        if delta.shape != sigma.shape:
            raise ValueError(f"delta and sigma lengths differ ({delta.size} vs {sigma.size})")
        if not self.h > 0:
            raise ValueError(f"sampling period must satisfy h > 0, got {self.h}")
        if not 0 <= self.tau < self.h:
            raise ValueError(f"delay must satisfy 0 <= tau < h, got tau={self.tau}, h={self.h}")
        for a in (delta, sigma):
            a.setflags(write=False)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "tau", float(self.tau))

    @property
    def n(self) -> int:
        return self.delta.size

    def with_(self, **changes) -> "ProtocolParams":
        kw = dict(delta=self.delta, sigma=self.sigma, h=self.h, tau=self.tau)
        kw.update(changes)
        return ProtocolParams(**kw)


@dataclass
class TriggerState:
    x_hat: np.ndarray
    q_hat_prev: np.ndarray
    last_event_step: np.ndarray

    @classmethod
    def initial(cls, x0, g: Digraph) -> "TriggerState":
        x_hat = np.array(x0, dtype=float)
        return cls(x_hat, q_hat_all(x_hat, g), np.zeros(x_hat.size, dtype=int))


def control_input(i: int, x_hat_delayed, g: Digraph, p: ProtocolParams) -> float:
    d = g.in_degrees[i]
    if d == 0:
        return 0.0
    x_hat = np.asarray(x_hat_delayed, dtype=float)
    a = g.adjacency[i]
    return float(-(p.delta[i] / (p.h * d)) * np.sum(a * (x_hat[i] - x_hat)))


def control_matrix(g: Digraph, p: ProtocolParams) -> np.ndarray:
    """``Delta D^-1 L`` with zero rows for agents without neighbors.

    One sampling period of constant input moves the state by ``-M @ x_hat``.
    """
    d = g.in_degrees
    L = np.diag(d) - g.adjacency
    scale = np.divide(p.delta, d, out=np.zeros_like(d), where=d > 0)
    return scale[:, None] * L


def q_hat(i: int, x_hat, g: Digraph) -> float:
    x_hat = np.asarray(x_hat, dtype=float)
    return float(np.sum(g.adjacency[i] * (x_hat[i] - x_hat) ** 2))


def q_hat_all(x_hat, g: Digraph) -> np.ndarray:
    x_hat = np.asarray(x_hat, dtype=float)
    diff = x_hat[:, None] - x_hat[None, :]
    return (g.adjacency * diff**2).sum(axis=1)


def trigger_threshold(i: int, state: TriggerState, g: Digraph, p: ProtocolParams) -> float:
    return p.sigma[i] * state.q_hat_prev[i] / (4.0 * g.in_degrees[i])


def trigger_check(i: int, x_current: float, state: TriggerState, g: Digraph, p: ProtocolParams) -> bool:
    """Event test at a sampling instant against the pre-judgement held value.

    Agents with no neighbors never re-trigger.
    """
    if g.in_degrees[i] == 0:
        return False
    err = x_current - state.x_hat[i]
    return bool(err * err > trigger_threshold(i, state, g, p))


def trigger_mask(x, x_hat, q_hat_prev, g: Digraph, p: ProtocolParams) -> np.ndarray:
    """Vectorized :func:`trigger_check` over all agents."""
    d = g.in_degrees
    err = np.asarray(x) - np.asarray(x_hat)
    threshold = np.divide(p.sigma * q_hat_prev, 4.0 * d, out=np.zeros_like(d), where=d > 0)
    return (d > 0) & (err * err > threshold)


def delay_bound(p: ProtocolParams) -> float:
    ratio = (1.0 - 2.0 * p.delta - p.sigma) / (4.0 * p.delta)
    return float(min(1.0, ratio.min()))


@dataclass
class ValidationReport:
    delayed: bool
    rows: list[tuple[str, int | None, bool, str]] = field(default_factory=list)
    beta: float | None = None

    @property
    def ok(self) -> bool:
        return all(r[2] for r in self.rows)

    def __bool__(self):
        return self.ok

    def failures(self):
        return [r for r in self.rows if not r[2]]

    def summary(self) -> str:
        bad = self.failures()
        if not bad:
            return "all conditions hold"
        return "; ".join(f"{name}" + (f" (agent {a + 1})" if a is not None else "") + f": {msg}" for name, a, _, msg in bad)

    def render(self) -> str:
        lines = [f"validation ({'delayed' if self.delayed else 'undelayed'}): {'PASS' if self.ok else 'FAIL'}"]
        for name, agent, ok, msg in self.rows:
            who = f"agent {agent + 1}" if agent is not None else "global"
            lines.append(f"  [{'pass' if ok else 'FAIL'}] {name:<10} {who:<9} {msg}")
        return "\n".join(lines)


def validate(g: Digraph, p: ProtocolParams, delayed: bool | None = None) -> ValidationReport:
    if delayed is None:
        delayed = p.tau > 0
    report = ValidationReport(delayed=delayed)
    rows = report.rows
    if p.n != g.n:
        rows.append(("size", None, False, f"{p.n} parameter entries for {g.n} agents"))
        return report
    rows.append(("topology", None, has_spanning_tree(g), "digraph must contain a spanning tree"))
    for i in range(p.n):
        d, s = p.delta[i], p.sigma[i]
        rows.append(("delta", i, bool(0 < d < 0.5), f"0 < delta={d:g} < 1/2"))
        rows.append(("sigma", i, bool(0 < s < 1 - 2 * d), f"0 < sigma={s:g} < 1 - 2*delta={1 - 2 * d:g}"))
    if delayed:
        beta = delay_bound(p)
        report.beta = beta
        rows.append(("tau", None, bool(0 < p.tau < p.h * beta), f"0 < tau={p.tau:g} < h*beta={p.h * beta:g}"))
    return report
