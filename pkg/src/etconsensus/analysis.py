"""Consensus-value prediction and checkers for the convergence certificates."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .digraph import Digraph, SpectralDecomposition, condense, left_eigenvector, laplacian
from .engine import Trajectory, disagreement
from .protocol import ProtocolParams, q_hat_all


def consensus_weights(g: Digraph, p: ProtocolParams, decomp: SpectralDecomposition | None = None) -> np.ndarray:
    """Normalized weights ``delta^-1 d xi`` on the closed SCC, zero elsewhere."""
    decomp = decomp or condense(g)
    K = decomp.closed_scc_index
    members = list(decomp.members(K))
    w = np.zeros(g.n)
    if len(members) == 1:
        w[members[0]] = 1.0
        return w
    raw = g.in_degrees[members] * decomp.xi[K] / p.delta[members]
    w[members] = raw / raw.sum()
    return w


def predicted_consensus(g: Digraph, p: ProtocolParams, x0, decomp: SpectralDecomposition | None = None) -> float:
    x0 = np.asarray(x0, dtype=float)
    decomp = decomp or condense(g)
    members = list(decomp.members(decomp.closed_scc_index))
    if len(members) == 1:
        # the root has no neighbors, so its input is zero and its state never moves
        return float(x0[members[0]])
    w = consensus_weights(g, p, decomp)
    return float(w[members] @ x0[members])


def lyapunov(x, g: Digraph, p: ProtocolParams, decomp: SpectralDecomposition | None = None, c_ref: float = 0.0) -> float:
    """Quadratic form ``1/2 (x - c)^T Xi D Delta^-1 (x - c)``.

    On a strongly connected graph this is taken over all agents. Otherwise it
    is summed over the non-closed blocks, each with its own ``xi`` from the
    auxiliary block Laplacian.
    """
    x = np.asarray(x, dtype=float)
    decomp = decomp or condense(g)
    d = g.in_degrees
    blocks = [0] if decomp.K == 1 else range(decomp.K - 1)
    total = 0.0
    for k in blocks:
        idx = list(decomp.members(k))
        dev = x[idx] - c_ref
        total += 0.5 * float(np.sum(decomp.xi[k] * d[idx] / p.delta[idx] * dev * dev))
    return total


def q_hat_blockwise(x_hat, decomp: SpectralDecomposition) -> np.ndarray:
    """Within-block plus downstream-block energy terms, per original agent."""
    x_hat = np.asarray(x_hat, dtype=float)
    out = np.zeros(x_hat.size)
    for k in range(decomp.K):
        idx = np.array(decomp.members(k))
        xk = x_hat[idx]
        lt = decomp.tilde_blocks[k]
        inner = -(lt * (xk[:, None] - xk[None, :]) ** 2).sum(axis=1)
        cross = np.zeros(idx.size)
        for j in range(k + 1, decomp.K):
            jdx = np.array(decomp.members(j))
            cross -= (decomp.block(k, j) * (xk[:, None] - x_hat[jdx][None, :]) ** 2).sum(axis=1)
        out[idx] = inner + cross
    return out


@dataclass
class BoundCheck:
    passed: bool
    worst_margin: float
    bound: float
    series: np.ndarray
    delayed: bool

    def rows(self, h: float, tau: float):
        offset = tau if self.delayed else 0.0
        return [(l, l * h + offset, float(v), self.bound) for l, v in enumerate(self.series)]


def lyapunov_bound_check(traj: Trajectory, g: Digraph, p: ProtocolParams) -> BoundCheck:
    """Check ``V`` against its telescoped bound at every sampling instant.

    Undelayed: ``V(lh) <= V(h) + 1/4 sum xi sigma q(0)`` for ``l >= 1``.
    Delayed: ``V(lh+tau) <= V(h+tau) + 1/4 sum xi (sigma + 2 tau delta / h) q(0)``.
    Requires a strongly connected graph.
    """
    xi = left_eigenvector(laplacian(g))
    w = 0.5 * xi * g.in_degrees / p.delta
    q0 = q_hat_all(traj.held[0], g)
    delayed = traj.tau > 0
    if delayed:
        pts = traj.mid
        coeff = p.sigma + 2.0 * traj.tau * p.delta / traj.h
    else:
        pts = traj.samples
        coeff = p.sigma
    series = (pts**2) @ w
    if len(series) < 2:
        return BoundCheck(True, float("inf"), float("nan"), series, delayed)
    bound = float(series[1] + 0.25 * np.sum(xi * coeff * q0))
    tol = 1e-8 * (1.0 + abs(bound))
    margins = bound + tol - series[1:]
    return BoundCheck(bool(margins.min() >= 0), float(margins.min()), bound, series, delayed)


@dataclass
class Lemma2Result:
    passed: bool
    c_hat: float
    lhs: np.ndarray
    rhs: float


def lemma2_check(x_hat, decomp: SpectralDecomposition, delta=None) -> Lemma2Result:
    """Squared distance of each closed-block value to its weighted mean,
    against ``(n_K - 1)`` times the block's total energy.

    ``x_hat`` and ``delta`` are indexed by original agent; ``delta`` defaults
    to equal gains.
    """
    x_hat = np.asarray(x_hat, dtype=float)
    K = decomp.closed_scc_index
    idx = list(decomp.members(K))
    nK = len(idx)
    if nK < 2:
        raise ValueError("the closed block must contain at least two agents")
    lt = decomp.tilde_blocks[K]
    d = np.diag(lt)
    dk = np.ones(nK) if delta is None else np.asarray(delta, dtype=float)[idx]
    mu = d * decomp.xi[K] / dk
    mu = mu / mu.sum()
    xk = x_hat[idx]
    c_hat = float(mu @ xk)
    q = -(lt * (xk[:, None] - xk[None, :]) ** 2).sum(axis=1)
    rhs = (nK - 1) * float(q.sum())
    lhs = (xk - c_hat) ** 2
    passed = bool(np.all(lhs <= rhs + 1e-12 * (1.0 + rhs)))
    return Lemma2Result(passed, c_hat, lhs, rhs)


def conserved_series(traj: Trajectory, g: Digraph, p: ProtocolParams) -> tuple[np.ndarray, float]:
    """Closed-SCC weighted sum at every breakpoint, with its scale.

    Breakpoints include the ``l*h + tau`` instants of a delayed run. The scale
    is ``sum |w_i x_i(0)|`` so a near-zero initial sum does not blow up the
    relative error.
    """
    decomp = condense(g)
    K = decomp.closed_scc_index
    idx = list(decomp.members(K))
    w = np.zeros(g.n)
    if len(idx) == 1:
        w[idx[0]] = 1.0
    else:
        w[idx] = g.in_degrees[idx] * decomp.xi[K] / p.delta[idx]
    pts = traj.samples if traj.mid is None else np.vstack([traj.samples, traj.mid])
    return pts @ w, float(np.abs(w * traj.samples[0]).sum())


def conservation_error(traj: Trajectory, g: Digraph, p: ProtocolParams) -> float:
    series, scale = conserved_series(traj, g, p)
    if scale == 0:
        return float(np.abs(series - series[0]).max())
    return float(np.abs(series - series[0]).max() / scale)


@dataclass
class AnalysisReport:
    predicted_c: float
    weights: np.ndarray
    lyapunov_series: np.ndarray | None = None
    bound_constant: float | None = None
    checks: dict[str, tuple[bool, str]] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(v[0] for v in self.checks.values())

    def render(self) -> str:
        lines = [f"predicted consensus c = {self.predicted_c:.17g}"]
        lines.append("weights: " + ", ".join(f"{w:.6g}" for w in self.weights))
        if self.bound_constant is not None:
            lines.append(f"lyapunov bound = {self.bound_constant:.10g}")
        for name, (ok, detail) in self.checks.items():
            lines.append(f"  [{'pass' if ok else 'FAIL'}] {name}: {detail}")
        return "\n".join(lines)


def analyze(g: Digraph, p: ProtocolParams, x0, traj: Trajectory | None = None, limit_tol: float = 1e-6) -> AnalysisReport:
    decomp = condense(g)
    report = AnalysisReport(predicted_consensus(g, p, x0, decomp), consensus_weights(g, p, decomp))
    if traj is None:
        return report
    c = report.predicted_c
    report.checks["converged"] = (traj.converged_at is not None, f"converged_at={traj.converged_at}, disagreement={disagreement(traj.final):.3e}")
    if traj.converged_at is not None:
        err = float(np.abs(traj.final - c).max())
        report.checks["limit"] = (err <= limit_tol, f"max |x - c| = {err:.3e} (tol {limit_tol:g})")
    cons = conservation_error(traj, g, p)
    report.checks["conservation"] = (cons <= 1e-8, f"relative drift {cons:.3e}")
    if decomp.K == 1:
        bc = lyapunov_bound_check(traj, g, p)
        report.lyapunov_series = bc.series
        report.bound_constant = bc.bound
        report.checks["lyapunov_bound"] = (bc.passed, f"worst margin {bc.worst_margin:.6g}")
    return report
