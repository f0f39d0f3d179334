"""Dense stair-network solver for general (all-pairs) coupling.

The network is contracted row by row from the bottom (last variable) upward;
each row is absorbed right to left.  Intermediate boundary tensors from the
first determination are kept and reused for the remaining variables, so the
whole solve costs a single full contraction.

Two contraction routes exist: the default exploits the structural nonzero
patterns of the nodes (diagonal value transmission), while dense_nodes=True
materializes the full node tensors and contracts them with einsum.  Both must
agree to floating-point accuracy; the dense route exists to check that claim
and for benchmarking.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, NumericFaultError
from .problem import Problem, evaluate_cost
from .tn_core import MarginalVector, SolverConfig, argmax_extract, cross_cost, normalize, self_cost

DEFAULT_DENSE_CAP = 32768  # max boundary-tensor elements, d**(n-1)


def dense_cap() -> int:
    return int(os.environ.get("QUDOTN_DENSE_CAP", DEFAULT_DENSE_CAP))


# ---------------------------------------------------------------------------
# Network description


@dataclass(frozen=True)
class StairNode:
    kind: str  # plus | plus_trace | self | cross | cross_last | copy
    l: int = -1
    m: int = -1


@dataclass
class StairRow:
    var: int
    nodes: list


@dataclass
class StairNetwork:
    problem: Problem
    cfg: SolverConfig
    rows: list
    band_k: int

    def node_multiset(self):
        out = {}
        for row in self.rows:
            for node in row.nodes:
                out[node] = out.get(node, 0) + 1
        return out


def _stair_rows(n: int, band_k: int) -> list:
    """Row layout shared by the dense and banded stair networks.

    A cross node for the pair (i, j) sits in row i; pairs whose upper variable
    is the final one use the 3-index last-row variant.  Copy nodes replicate a
    variable's value down its column, one fewer than the crosses that read it.
    """
    rows = []
    readers = {j: 0 for j in range(n)}
    for i in range(n):
        nodes = [StairNode("plus", l=i), StairNode("self", l=i, m=i)]
        for j in range(i + 1, min(i + band_k, n - 1) + 1):
            kind = "cross_last" if j == n - 1 else "cross"
            nodes.append(StairNode(kind, l=i, m=j))
            readers[j] += 1
        nodes.append(StairNode("plus_trace", l=i))
        rows.append(StairRow(var=i, nodes=nodes))
    for j, count in readers.items():
        for _ in range(max(0, count - 1)):
            rows[j].nodes.append(StairNode("copy", m=j))
    return rows


def build_stair(p: Problem, cfg: SolverConfig) -> StairNetwork:
    """Full stair network; its contraction with row i left open is the
    marginal of variable i up to a dropped positive scale."""
    _check_capacity(p)
    return StairNetwork(problem=p, cfg=cfg, rows=_stair_rows(p.n, p.n - 1),
                        band_k=p.n - 1)


def _check_capacity(p: Problem):
    cap = dense_cap()
    if p.d ** (p.n - 1) > cap:
        raise CapacityError(
            f"dense contraction needs d^(n-1) = {p.d ** (p.n - 1)} boundary "
            f"elements, above the cap of {cap}"
        )


# ---------------------------------------------------------------------------
# Factor tables

class _Tables:
    """Per-(problem, tau) factor tables.

    Each factor is rescaled by its own maximum (a positive per-row constant)
    so that large tau cannot overflow; marginals are only defined up to scale.
    """

    def __init__(self, p: Problem, tau: float):
        n, d = p.n, p.d
        diag = np.empty((n, d))
        for l in range(n):
            for a in range(d):
                diag[l, a] = self_cost(p, l, a)
        diag = tau * diag
        diag -= diag.min(axis=1, keepdims=True)
        self.selfw = np.exp(-diag)
        self.crossw = {}
        for m in range(1, n):
            for l in range(m):
                c = np.empty((d, d))
                for a in range(d):
                    for b in range(d):
                        c[a, b] = cross_cost(p, l, m, a, b)
                c = tau * c
                c -= c.min()
                self.crossw[(l, m)] = np.exp(-c)


# ---------------------------------------------------------------------------
# Contraction


def _absorb_row_sparse(bound: np.ndarray, m: int, base: int, tables: _Tables,
                       fixed_vals: dict, do_norm: bool) -> np.ndarray:
    """Absorb row m into the boundary over free variables (base..m).

    Fixed variables (index < base) enter by selecting the matching slice of
    their cross factor, per the value-transmission constraint; free ones
    broadcast their full factor.  The row's own index is then summed out.
    """
    axes = m - base + 1  # boundary covers x_base .. x_m
    out = bound * tables.selfw[m]
    for l in range(m):
        f = tables.crossw[(l, m)]
        if l < base:
            out = out * f[fixed_vals[l], :]
        else:
            view = f.reshape((f.shape[0],) + (1,) * (m - l - 1) + (f.shape[1],))
            out = out * view
    out = out.sum(axis=axes - 1)
    if do_norm:
        out, _ = _normalize_step(out, m)
    return out


def _absorb_row_dense(bound: np.ndarray, m: int, base: int, tables: _Tables,
                      fixed_vals: dict, do_norm: bool) -> np.ndarray:
    """Same absorption using materialized dense node tensors and einsum."""
    d = tables.selfw.shape[1]
    axes = m - base + 1
    smat = np.diag(tables.selfw[m])
    work = np.tensordot(bound, smat, axes=([axes - 1], [0]))  # wire = x_m
    for l in range(m - 1, -1, -1):
        node = np.zeros((d, d, d, d))
        for i in range(d):
            for j in range(d):
                node[i, i, j, j] = tables.crossw[(l, m)][i, j]
        if l < base:
            vec = node[fixed_vals[l], fixed_vals[l]]  # (d, d) diagonal slice
            work = np.tensordot(work, vec, axes=([work.ndim - 1], [0]))
        else:
            pos = l - base
            moved = np.moveaxis(work, pos, -2)
            moved = np.einsum("...ij,imjn->...mn", moved, node)
            work = np.moveaxis(moved, -2, pos)
    work = work.sum(axis=-1)
    if do_norm:
        work, _ = _normalize_step(work, m)
    return work


def _normalize_step(arr: np.ndarray, row: int):
    try:
        return normalize(arr)
    except NumericFaultError as exc:
        raise NumericFaultError(f"row {row}: {exc}") from exc


def _row_local_marginal(vec: np.ndarray, i: int, tables: _Tables,
                        fixed_vals: dict) -> np.ndarray:
    """Multiply row i's own factors at the fixed prefix into a d-vector."""
    out = vec * tables.selfw[i]
    for l in range(i):
        out = out * tables.crossw[(l, i)][fixed_vals[l], :]
    return out


def contract_marginal(net: StairNetwork, i: int, fixed, *,
                      dense_nodes: bool = False) -> MarginalVector:
    """Marginal of variable i given fixed values for variables 0..i-1.

    Rows below i are absorbed bottom-to-top with normalization between
    absorptions; the remaining boundary is combined with row i's local
    factors.
    """
    p, cfg = net.problem, net.cfg
    _check_capacity(p)
    fixed_vals = {int(k): int(v) for k, v in dict(fixed or {}).items()}
    if sorted(fixed_vals) != list(range(i)):
        raise ValueError(f"fixed must cover exactly variables 0..{i - 1}")
    tables = _Tables(p, cfg.tau)
    absorb = _absorb_row_dense if dense_nodes else _absorb_row_sparse
    bound = np.ones((p.d,) * (p.n - i))  # boundary over x_i .. x_{n-1}
    for m in range(p.n - 1, i, -1):
        bound = absorb(bound, m, i, tables, fixed_vals, cfg.normalize)
    vec = _row_local_marginal(bound.reshape(p.d), i, tables, fixed_vals)
    vec, dropped = _normalize_step(vec, i) if cfg.normalize else (vec, False)
    return MarginalVector(entries=vec, scale_dropped=dropped)


@dataclass
class DenseSolveResult:
    assignment: list
    cost: float
    marginals: list = field(default_factory=list)


def solve_dense(p: Problem, cfg: SolverConfig, *, reuse: bool = True,
                dense_nodes: bool = False) -> DenseSolveResult:
    """Iteratively determine every variable from its marginal argmax.

    With reuse on, one backward sweep stores the boundary tensor left after
    absorbing rows above each position; later variables then need only a
    slice and a d-vector of local factors.
    """
    _check_capacity(p)
    net = build_stair(p, cfg)
    tables = _Tables(p, cfg.tau)
    absorb = _absorb_row_dense if dense_nodes else _absorb_row_sparse
    fixed_vals: dict = {}
    assignment = []
    marginals = []
    if reuse:
        stored = {}
        bound = np.ones((p.d,) * p.n) if p.n > 1 else None
        if p.n > 1:
            for m in range(p.n - 1, 0, -1):
                bound = absorb(bound, m, 0, tables, fixed_vals, cfg.normalize)
                stored[m - 1] = bound  # boundary over x_0 .. x_{m-1}
        for i in range(p.n):
            if i < p.n - 1:
                b = stored[i]
                idx = tuple(fixed_vals[l] for l in range(i))
                vec = np.asarray(b[idx], dtype=float)
            else:
                vec = np.ones(p.d)
            vec = _row_local_marginal(vec, i, tables, fixed_vals)
            if cfg.normalize:
                vec, _ = _normalize_step(vec, i)
            marg = MarginalVector(entries=vec, scale_dropped=cfg.normalize)
            val = argmax_extract(marg)
            fixed_vals[i] = val
            assignment.append(val)
            marginals.append(marg)
    else:
        for i in range(p.n):
            marg = contract_marginal(net, i, fixed_vals, dense_nodes=dense_nodes)
            val = argmax_extract(marg)
            fixed_vals[i] = val
            assignment.append(val)
            marginals.append(marg)
    return DenseSolveResult(assignment=assignment,
                            cost=evaluate_cost(p, assignment),
                            marginals=marginals)
