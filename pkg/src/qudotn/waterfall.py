"""Waterfall variant of the matrix method.

Instead of retaining every backward message, each row stores only a table of
best values, one entry per possible combination of its k predecessors.  A
table that is constant (in the restricted sense for k > 1) proves its
variable independent of everything before it; that resolves the variable and,
in cascade, every variable after it, at which point the stored tables can be
released.  With restarts disabled the resulting assignment is identical to
solve_matrix by construction, since each table row is the same conditional
marginal the matrix method computes for the realized prefix.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .chain_solver import (ChainFactors, ChainSolveResult, MessageState,
                           _candidates_flat, _check_chain_capacity, _digits,
                           _normalize_msg, _transfer_flat, result_cost)
from .problem import ChainProblem
from .tn_core import MarginalVector, SolverConfig


@dataclass
class WaterfallTable:
    """Best value of variable row per predecessor combination.

    entries[t] is the argmax value when the predecessors (x_{row-1},
    x_{row-2}, ...) take the combination encoded little-endian in t, nearest
    predecessor in the lowest digit.
    """

    row: int
    entries: np.ndarray  # (d**npred,) ints
    npred: int
    d: int


@dataclass
class WaterfallStats:
    uniform_events: int = 0
    w_prob: float = 0.0
    peak_tables_held: int = 0
    restarts: int = 0


@dataclass
class WaterfallResult:
    assignment: list
    cost: float
    stats: WaterfallStats = field(default_factory=WaterfallStats)
    marginals: list | None = None


def candidate_table(message: MessageState | None, chain: ChainProblem, m: int,
                    cfg: SolverConfig, fac: ChainFactors | None = None,
                    keep_vectors: bool = False):
    """Table of best values for row m over every predecessor combination.

    message is the backward message summarizing everything after variable m
    (None for the last row).  The candidate vectors themselves are transient
    unless keep_vectors is set.
    """
    fac = fac or ChainFactors(chain, cfg.tau)
    d = chain.d
    K = min(chain.k, m)
    tdig = _digits(d, K)
    cand = _candidates_flat(chain, fac, m, message, tdig)
    table = WaterfallTable(row=m, entries=np.argmax(cand, axis=1), npred=K, d=d)
    if keep_vectors:
        return table, cand
    return table


def check_cascade(tables, d: int, k: int):
    """Cascade test over consecutive tables starting at some row m.

    The first table must be globally constant; each following one only needs
    to be constant on the combinations consistent with the values already
    pinned, which is the restricted-constancy rule for k > 1.  Returns the
    pinned values, or None when the cascade does not fire.
    """
    vals: list = []
    for r, tab in enumerate(tables):
        idx = np.arange(len(tab.entries))
        mask = np.ones(len(tab.entries), dtype=bool)
        for j in range(min(r, tab.npred)):
            mask &= ((idx // d ** j) % d) == vals[r - 1 - j]
        sel = tab.entries[mask]
        if not np.all(sel == sel[0]):
            return None
        vals.append(int(sel[0]))
    return vals


def _lookup(table: WaterfallTable, assignment, m: int) -> int:
    t = 0
    for j in range(table.npred):
        t += assignment[m - 1 - j] * table.d ** j
    return int(table.entries[t])


def solve_waterfall(chain: ChainProblem, cfg: SolverConfig) -> WaterfallResult:
    """Backward pass keeping only candidate tables; forward pass is lookup.

    On a cascade at row m, variables m..n-1 are resolved immediately and all
    tables past row m+k are released; the tables for rows m..m+k-1 stay so
    cascade checks at earlier rows can still apply the restricted rule.  With
    restart_factor != 1, a cascade also re-solves the remaining prefix as a
    smaller subproblem under the rescaled tau, absorbing the known boundary
    values into the local costs.
    """
    _check_chain_capacity(chain)
    fac = ChainFactors(chain, cfg.tau)
    d, k, n = chain.d, chain.k, chain.n
    stats = WaterfallStats()
    tables: dict = {}
    vectors: dict = {}
    x: list = [None] * n
    resolved_from = n
    msg: MessageState | None = None  # becomes B_{m+1} at iteration m
    for m in range(n - 1, -1, -1):
        if cfg.keep_trace:
            tab, cand = candidate_table(msg, chain, m, cfg, fac, keep_vectors=True)
            vectors[m] = cand
        else:
            tab = candidate_table(msg, chain, m, cfg, fac)
        tables[m] = tab
        stats.peak_tables_held = max(stats.peak_tables_held, len(tables))
        run = [tables[r] for r in range(m, min(m + k, n)) if r in tables]
        vals = check_cascade(run, d, k)
        if vals is not None:
            stats.uniform_events += 1
            if resolved_from > m:
                for r in range(m, resolved_from):
                    off = r - m
                    if off < len(vals):
                        x[r] = vals[off]
                    else:
                        x[r] = _lookup(tables[r], x, r)
                resolved_from = m
                for r in [r for r in tables if r >= m + k]:
                    del tables[r]
                if cfg.restart_factor != 1.0 and m > 0:
                    return _restart(chain, cfg, fac, x, m, stats, vectors)
        if m > 0:
            if msg is None:
                msg = MessageState(entries=fac.sv[m].copy(), origin=m, length=1, d=d)
                if cfg.normalize:
                    msg.entries = _normalize_msg(msg.entries, m)
            else:
                msg = _transfer_flat(msg, m, fac, chain, cfg.normalize)
    for m in range(n):
        if x[m] is None:
            x[m] = _lookup(tables[m], x, m)
    stats.w_prob = stats.uniform_events / n
    marginals = _trace_marginals(vectors, x, cfg) if cfg.keep_trace else None
    return WaterfallResult(assignment=x, cost=result_cost(chain, x),
                           stats=stats, marginals=marginals)


def _trace_marginals(vectors: dict, x: list, cfg: SolverConfig):
    out = []
    for m in sorted(vectors):
        cand = vectors[m]
        T, d = cand.shape
        npred = 0
        while d ** npred < T:
            npred += 1
        t = sum(x[m - 1 - j] * d ** j for j in range(npred))
        vec = cand[t]
        if cfg.normalize:
            vec = _normalize_msg(vec, m)
        out.append(MarginalVector(entries=vec, scale_dropped=cfg.normalize))
    return out


def _restart(chain: ChainProblem, cfg: SolverConfig, fac: ChainFactors,
             x: list, m: int, stats: WaterfallStats, vectors: dict) -> WaterfallResult:
    """Re-solve variables 0..m-1 with the cascade boundary folded into the
    local costs and tau rescaled by the restart factor."""
    k = chain.k
    diag = chain.diag_cost[:m].copy()
    cross = chain.cross_cost[:m].copy()
    for l in range(max(0, m - k), m):
        for j in range(1, k + 1):
            tgt = l + j
            if m <= tgt <= chain.n - 1:
                diag[l] += chain.cross_cost[l, j - 1][:, x[tgt]]
                cross[l, j - 1] = 0.0
    sub = ChainProblem(problem=None, k=k, n=m, d=chain.d,
                       diag_cost=diag, cross_cost=cross)
    sub_cfg = replace(cfg, tau=cfg.tau * cfg.restart_factor, restart_factor=cfg.restart_factor)
    sub_res = solve_waterfall(sub, sub_cfg)
    x[:m] = sub_res.assignment
    stats.uniform_events += sub_res.stats.uniform_events
    stats.restarts += 1 + sub_res.stats.restarts
    stats.peak_tables_held = max(stats.peak_tables_held,
                                 sub_res.stats.peak_tables_held)
    stats.w_prob = stats.uniform_events / chain.n
    return WaterfallResult(assignment=x, cost=result_cost(chain, x), stats=stats,
                           marginals=None)
