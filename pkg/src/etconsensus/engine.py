"""Closed-form simulation of the sampled, event-triggered closed loop.

Inputs are constant between breakpoints (``l*h`` and ``l*h + tau``), so every
trajectory is exactly piecewise linear and is advanced segment by segment.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .digraph import Digraph
from .errors import InvalidParameters, NonFiniteState
from .protocol import ProtocolParams, control_matrix, q_hat_all, trigger_mask, validate


@dataclass(frozen=True)
class SimConfig:
    horizon_steps: int = 100_000
    convergence_tol: float = 1e-8
    record_substeps: bool = False

    def __post_init__(self):
        if int(self.horizon_steps) != self.horizon_steps or self.horizon_steps < 1:
            raise ValueError(f"horizon_steps must be a positive integer, got {self.horizon_steps}")
        if not self.convergence_tol > 0:
            raise ValueError(f"convergence_tol must be positive, got {self.convergence_tol}")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Simulation record.

    ``samples[l]`` and ``held[l]`` are the state and the (post-judgement)
    broadcast values at ``t = l*h``. For delayed runs ``mid[l]`` is the state
    at ``l*h + tau``. ``times``/``states`` list every emitted breakpoint.
    """

    h: float
    tau: float
    times: np.ndarray
    states: np.ndarray
    samples: np.ndarray
    held: np.ndarray
    mid: np.ndarray | None
    events: list[tuple[int, int]]
    converged_at: int | None

    @property
    def final(self) -> np.ndarray:
        return self.samples[-1]

    @property
    def steps(self) -> int:
        return len(self.samples) - 1

    def event_counts(self, n: int | None = None) -> np.ndarray:
        n = self.samples.shape[1] if n is None else n
        counts = np.zeros(n, dtype=int)
        for agent, _ in self.events:
            counts[agent] += 1
        return counts

    def event_time(self, l: int) -> float:
        return l * self.h


def step_undelayed(x, x_hat, g: Digraph, p: ProtocolParams) -> np.ndarray:
    return np.asarray(x, dtype=float) - control_matrix(g, p) @ np.asarray(x_hat, dtype=float)


def _delayed_segments(x, x_hat_prev, x_hat, M, h, tau):
    # x_hat_prev is None during the warm-up period [0, tau): zero input
    x_mid = x if x_hat_prev is None else x - (tau / h) * (M @ x_hat_prev)
    return x_mid, x_mid - ((h - tau) / h) * (M @ x_hat)


def step_delayed(x, x_hat_prev, x_hat, g: Digraph, p: ProtocolParams) -> np.ndarray:
    """Advance one period under delay; pass ``x_hat_prev=None`` for ``l = 0``."""
    x = np.asarray(x, dtype=float)
    prev = None if x_hat_prev is None else np.asarray(x_hat_prev, dtype=float)
    return _delayed_segments(x, prev, np.asarray(x_hat, dtype=float), control_matrix(g, p), p.h, p.tau)[1]


def disagreement(x) -> float:
    x = np.asarray(x)
    return float(x.max() - x.min())


def run(g: Digraph, p: ProtocolParams, x0, cfg: SimConfig | None = None, unsafe: bool = False) -> Trajectory:
    cfg = cfg or SimConfig()
    x = np.array(x0, dtype=float)
    if x.shape != (g.n,):
        raise ValueError(f"x0 must have {g.n} entries, got shape {x.shape}")
    if not unsafe:
        report = validate(g, p, delayed=p.tau > 0)
        if not report.ok:
            raise InvalidParameters(report)

    M = control_matrix(g, p)
    h, tau = p.h, p.tau
    delayed = tau > 0

    x_hat = x.copy()
    x_hat_prev = None
    q_prev = q_hat_all(x_hat, g)
    events = [(i, 0) for i in range(g.n)]
    samples, held, mids = [], [], []
    times, states = [], []
    converged_at = None

    l = 0
    while True:
        if l >= 1:
            fire = trigger_mask(x, x_hat, q_prev, g, p)
            if fire.any():
                x_hat = x_hat.copy()
                x_hat[fire] = x[fire]
                events.extend((int(i), l) for i in np.flatnonzero(fire))
            q_prev = q_hat_all(x_hat, g)

        samples.append(x)
        held.append(x_hat)
        times.append(l * h)
        states.append(x)

        if disagreement(x) < cfg.convergence_tol:
            converged_at = l
            break
        if l == cfg.horizon_steps:
            break

        if delayed:
            x_mid, x_next = _delayed_segments(x, x_hat_prev, x_hat, M, h, tau)
            mids.append(x_mid)
            if cfg.record_substeps:
                times.append(l * h + tau)
                states.append(x_mid)
        else:
            x_next = x - M @ x_hat
        if not np.all(np.isfinite(x_next)):
            raise NonFiniteState(f"non-finite state after step {l}")
        x_hat_prev = x_hat
        x = x_next
        l += 1

    return Trajectory(
        h=h,
        tau=tau,
        times=np.array(times),
        states=np.array(states),
        samples=np.array(samples),
        held=np.array(held),
        mid=np.array(mids).reshape(-1, g.n) if delayed else None,
        events=events,
        converged_at=converged_at,
    )
