"""Method dispatch and tau-grid best-of solving, shared by the CLI and the
benchmark harness."""
from __future__ import annotations

from dataclasses import dataclass, replace

from .chain_solver import solve_matrix, solve_tensor
from .dense_solver import solve_dense
from .errors import NumericFaultError, QudotnError
from .oracle import brute_force
from .problem import Problem, chain_view
from .tn_core import SolverConfig, tau_grid_values
from .waterfall import solve_waterfall

METHODS = ("dense", "matrix", "tensor", "waterfall", "brute")


@dataclass
class SolveOutcome:
    method: str
    assignment: list
    cost: float
    tau: float | None
    stats: object = None
    peak_memory_proxy: int = 0


def _solve_single(p: Problem, method: str, cfg: SolverConfig,
                  k: int | None) -> SolveOutcome:
    if method == "brute":
        res = brute_force(p)
        return SolveOutcome(method, res.best, res.best_cost, None)
    if method == "dense":
        res = solve_dense(p, cfg)
        return SolveOutcome(method, res.assignment, res.cost, cfg.tau,
                            peak_memory_proxy=p.n - 1)
    kk = k if k is not None else max(p.bandwidth, 1)
    chain = chain_view(p, kk)
    if method == "matrix":
        res = solve_matrix(chain, cfg)
        return SolveOutcome(method, res.assignment, res.cost, cfg.tau,
                            peak_memory_proxy=res.messages_held)
    if method == "tensor":
        res = solve_tensor(chain, cfg)
        return SolveOutcome(method, res.assignment, res.cost, cfg.tau,
                            peak_memory_proxy=res.messages_held)
    if method == "waterfall":
        res = solve_waterfall(chain, cfg)
        return SolveOutcome(method, res.assignment, res.cost, cfg.tau,
                            stats=res.stats,
                            peak_memory_proxy=res.stats.peak_tables_held)
    raise ValueError(f"unknown method {method!r}")


def solve_instance(p: Problem, method: str, cfg: SolverConfig,
                   k: int | None = None) -> SolveOutcome:
    """Solve with one method; with a tau grid, keep the lowest-cost result.

    Grid points that fault numerically (extreme tau) are skipped; at least
    one point must succeed.  Ties keep the first (smallest) tau, so results
    are deterministic.
    """
    if method == "brute" or cfg.tau_grid is None:
        return _solve_single(p, method, cfg, k)
    best: SolveOutcome | None = None
    last_fault: QudotnError | None = None
    for tau in tau_grid_values(cfg.tau_grid):
        try:
            out = _solve_single(p, method, replace(cfg, tau=float(tau), tau_grid=None), k)
        except NumericFaultError as exc:
            last_fault = exc
            continue
        if best is None or out.cost < best.cost:
            best = out
    if best is None:
        raise last_fault or NumericFaultError("every tau grid point faulted")
    return best
