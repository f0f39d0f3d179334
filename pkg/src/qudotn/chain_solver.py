"""k-neighbor linear-chain solvers.

Two routes contract the same banded stair network:

* the matrix method works on flat message vectors over the d**k states of the
  next k undetermined variables, applying the sparse transfer rule through
  integer digit arithmetic (state t = sum_j d**j * value_j);
* the tensor method works on shaped boundary tensors with one axis per open
  variable, absorbing the row nodes one by one.

Backward messages run from the last variable toward the first; variables are
then determined first-to-last.  Both routes share the factor tables and the
lowest-index tie-break, so they must return identical assignments.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, NumericFaultError
from .problem import ChainProblem, chain_cost, evaluate_cost
from .tn_core import MarginalVector, SolverConfig, argmax_extract, normalize

DEFAULT_CHAIN_CAP = 1 << 20  # max d**k message entries


def chain_cap() -> int:
    return int(os.environ.get("QUDOTN_CHAIN_CAP", DEFAULT_CHAIN_CAP))


def result_cost(chain: ChainProblem, assignment) -> float:
    if chain.problem is not None:
        return evaluate_cost(chain.problem, assignment)
    return chain_cost(chain, assignment)


class ChainFactors:
    """exp(-tau * cost) tables for one (chain, tau) pair.

    Each factor is rescaled by its own maximum so that extreme tau values
    stay inside float range; messages are scale-free anyway.
    sv[m, z] is the local weight of variable m, cf[m, j-1, a, b] the
    interaction weight between variable m at a and variable m+j at b;
    sc and cc hold the corresponding shifted cost exponents, so that
    multi-factor products can be summed in exponent space and
    exponentiated once instead of multiplied into the underflow region.
    """

    def __init__(self, chain: ChainProblem, tau: float):
        diag = tau * chain.diag_cost
        self.sc = diag - diag.min(axis=1, keepdims=True)
        self.sv = np.exp(-self.sc)
        cross = tau * chain.cross_cost
        self.cc = cross - cross.min(axis=(2, 3), keepdims=True)
        self.cf = np.exp(-self.cc)


def _stable_weights(exponent: np.ndarray, values: np.ndarray,
                    axis=None) -> np.ndarray:
    """exp(-exponent) * values with the exponent shifted by its minimum over
    the states that still carry weight.

    values are nonnegative message entries (zeros allowed).  The shift is a
    positive rescale, which every caller discards through normalization or
    argmax, and it guarantees that the term at the shift point survives in
    float range, so products of many small factors cannot silently vanish.
    Raises when no weighted state exists at all.
    """
    masked = np.where(values > 0, exponent, np.inf)
    shift = masked.min(axis=axis, keepdims=axis is not None)
    if not np.all(np.isfinite(shift)):
        raise NumericFaultError(
            "underflow: all weighted states vanished during contraction")
    # exponent < shift only where values == 0; clamping avoids a spurious
    # overflow there without changing any surviving term
    return np.exp(-np.maximum(exponent - shift, 0.0)) * values


def _digits(d: int, length: int):
    """digit j (value of the j-th state variable) for every flat state index."""
    idx = np.arange(d ** length)
    return [(idx // d ** j) % d for j in range(length)]


@dataclass
class MessageState:
    """Backward message over the d**L states of variables origin..origin+L-1,
    flat little-endian (digit j holds the value of variable origin + j)."""

    entries: np.ndarray
    origin: int
    length: int
    d: int


def _check_chain_capacity(chain: ChainProblem):
    if chain.d ** chain.k > chain_cap():
        raise CapacityError(
            f"message size d^k = {chain.d ** chain.k} exceeds chain cap {chain_cap()}"
        )


def _transfer_flat(msg: MessageState, m: int, fac: ChainFactors,
                   chain: ChainProblem, do_norm: bool) -> MessageState:
    """One sparse transfer step: message with origin m+1 -> origin m.

    Each new state prepends a value z for variable m; the weight multiplies
    the local factor of m and its crosses into the state variables.  When the
    state is already k long, the oldest variable m+k is summed out; that sum
    plus the d**k target states is the d**(k+1)-operation sparse rule.
    """
    d, k, n = chain.d, chain.k, chain.n
    L = msg.length
    digs = _digits(d, L)
    expo = np.repeat(fac.sc[m][:, None], d ** L, axis=1)  # (d, states)
    for j in range(1, L + 1):
        expo = expo + fac.cc[m, j - 1][:, digs[j - 1]]
    w = _stable_weights(expo, msg.entries[None, :])
    if L == k and m + k <= n - 1:
        # drop variable m+k: most-significant digit of the old state
        w = w.reshape(d, d, d ** (k - 1)).sum(axis=1)
        new = w.T.ravel()
        new_len = k
    else:
        new = w.T.ravel()
        new_len = L + 1
    if do_norm:
        new = _normalize_msg(new, m)
    return MessageState(entries=new, origin=m, length=new_len, d=d)


def _normalize_msg(arr: np.ndarray, row: int) -> np.ndarray:
    try:
        out, _ = normalize(arr)
    except NumericFaultError as exc:
        raise NumericFaultError(f"row {row}: {exc}") from exc
    return out


def backward_pass_matrix(chain: ChainProblem, cfg: SolverConfig,
                         fac: ChainFactors | None = None) -> list:
    """Messages B_{n-1}, ..., B_1, all retained for reuse.

    B_m sums, over every variable past the state window, the product of all
    factors whose lowest variable is >= m.
    """
    _check_chain_capacity(chain)
    fac = fac or ChainFactors(chain, cfg.tau)
    d, n = chain.d, chain.n
    msg = MessageState(entries=fac.sv[n - 1].copy(), origin=n - 1, length=1, d=d)
    if cfg.normalize:
        msg.entries = _normalize_msg(msg.entries, n - 1)
    out = [msg]
    for m in range(n - 2, 0, -1):
        msg = _transfer_flat(msg, m, fac, chain, cfg.normalize)
        out.append(msg)
    return out


def transfer_operator_dense(chain: ChainProblem, m: int, tau: float) -> np.ndarray:
    """Dense d**k x d**k transfer matrix for an interior row m.

    Row index encodes (z, a_1..a_{k-1}), column index (a_1..a_k); an entry is
    nonzero only when the shared k-1 values agree, giving exactly d**(k+1)
    structural nonzeros.  Used for sparsity checks and the dense benchmark
    mode.
    """
    d, k, n = chain.d, chain.k, chain.n
    if not (1 <= m and m + k <= n - 1):
        raise ValueError("dense transfer operator is defined for interior rows")
    fac = ChainFactors(chain, tau)
    size = d ** k
    op = np.zeros((size, size))
    digs = _digits(d, k)
    for s in range(size):
        z = s % d
        shared = s // d  # (a_1..a_{k-1})
        for ak in range(d):
            sp = shared + ak * d ** (k - 1)
            wgt = fac.sv[m][z]
            for j in range(1, k + 1):
                wgt *= fac.cf[m, j - 1][z, digs[j - 1][sp]]
            op[s, sp] = wgt
    return op


def _candidates_flat(chain: ChainProblem, fac: ChainFactors, m: int,
                     msg: MessageState | None, tdig: list) -> np.ndarray:
    """Marginal-style candidate vectors for variable m, one row per
    predecessor combination.

    tdig[j] holds, per combination, the value of predecessor m-1-j.  The
    computation contracts the next backward message with variable m's local
    factors, the fixed crosses into m, and the fixed crosses that skip over m
    into later state variables (those exist only for k > 1).
    """
    d, k = chain.d, chain.k
    K = len(tdig)
    T = len(tdig[0]) if K else 1
    if msg is None:
        L = 0
        entries = np.ones(1)
        digs = []
    else:
        L = msg.length
        entries = msg.entries
        digs = _digits(d, L)
    states = d ** L
    # total shifted cost exponent, one slab per predecessor combination
    expo = np.zeros((T, d, states))
    expo += fac.sc[m][None, :, None]
    for j in range(1, L + 1):
        expo += fac.cc[m, j - 1][None, :, digs[j - 1]].reshape(1, d, states)
    for i in range(1, L + 1):  # state variable m+i
        for j in range(i + 1, k + 1):
            l = m + i - j
            if 0 <= l <= m - 1:
                expo += fac.cc[l, j - 1][tdig[j - i - 1][:, None], digs[i - 1][None, :]][:, None, :]
    for j in range(1, K + 1):
        expo += fac.cc[m - j, j - 1][tdig[j - 1], :][:, :, None]
    # stabilize per predecessor combination: each row is only ever used for
    # an argmax or a normalized marginal, so a per-row positive rescale is
    # exact
    w = _stable_weights(expo, entries[None, None, :], axis=(1, 2))
    return w.sum(axis=2)  # (T, d)


def marginal_matrix(chain: ChainProblem, fac: ChainFactors, m: int,
                    msg: MessageState | None, prefix) -> np.ndarray:
    """Conditional marginal of variable m given the solved prefix (flat route)."""
    K = min(chain.k, m)
    tdig = [np.array([prefix[m - 1 - j]]) for j in range(K)]
    return _candidates_flat(chain, fac, m, msg, tdig)[0]


@dataclass
class ChainSolveResult:
    assignment: list
    cost: float
    marginals: list = field(default_factory=list)
    messages_held: int = 0


def solve_matrix(chain: ChainProblem, cfg: SolverConfig, *,
                 dense_operator: bool = False) -> ChainSolveResult:
    """Transfer-matrix solve: one backward pass, then per-variable argmax.

    dense_operator=True applies the materialized d**k x d**k matrix on
    interior rows instead of the sparse rule; results must be identical up to
    rounding and the mode exists for benchmarking the dense-format claims.
    """
    _check_chain_capacity(chain)
    fac = ChainFactors(chain, cfg.tau)
    d, n = chain.d, chain.n
    if dense_operator:
        msgs = _backward_dense_operator(chain, cfg, fac)
    else:
        msgs = backward_pass_matrix(chain, cfg, fac)
    by_origin = {msg.origin: msg for msg in msgs}
    assignment: list = []
    marginals = []
    for m in range(n):
        msg = by_origin.get(m + 1)
        vec = marginal_matrix(chain, fac, m, msg, assignment)
        if cfg.normalize:
            vec = _normalize_msg(vec, m)
        marginals.append(MarginalVector(entries=vec, scale_dropped=cfg.normalize))
        assignment.append(argmax_extract(vec))
    return ChainSolveResult(assignment=assignment,
                            cost=result_cost(chain, assignment),
                            marginals=marginals,
                            messages_held=len(msgs))


def _backward_dense_operator(chain: ChainProblem, cfg: SolverConfig,
                             fac: ChainFactors) -> list:
    """Backward pass applying dense transfer matrices on interior rows."""
    d, k, n = chain.d, chain.k, chain.n
    msg = MessageState(entries=fac.sv[n - 1].copy(), origin=n - 1, length=1, d=d)
    if cfg.normalize:
        msg.entries = _normalize_msg(msg.entries, n - 1)
    out = [msg]
    for m in range(n - 2, 0, -1):
        if msg.length == k and m + k <= n - 1:
            op = transfer_operator_dense(chain, m, cfg.tau)
            new = op @ msg.entries
            if cfg.normalize:
                new = _normalize_msg(new, m)
            msg = MessageState(entries=new, origin=m, length=k, d=d)
        else:
            msg = _transfer_flat(msg, m, fac, chain, cfg.normalize)
        out.append(msg)
    return out


# ---------------------------------------------------------------------------
# Tensor (4-index) method


def build_chain_stair(chain: ChainProblem, cfg: SolverConfig):
    """Banded stair network: row i keeps cross nodes only for j - i <= k."""
    from .dense_solver import StairNetwork, _stair_rows
    _check_chain_capacity(chain)
    p = chain.problem
    return StairNetwork(problem=p, cfg=cfg,
                        rows=_stair_rows(chain.n, chain.k), band_k=chain.k)


def _transfer_shaped(bound: np.ndarray | None, m: int, fac: ChainFactors,
                     chain: ChainProblem, do_norm: bool) -> np.ndarray:
    """Absorb row m into the shaped boundary tensor (axis j = variable m+j).

    The row's nodes are applied one at a time: the fused local node adds the
    new axis, each cross node multiplies along its pair of axes, and the
    furthest cross contracts the departing axis.
    """
    d, k, n = chain.d, chain.k, chain.n
    if bound is None:
        out = fac.sv[m].copy()
    else:
        prev = bound.ndim
        expo = np.zeros((d,) + bound.shape)
        expo += fac.sc[m].reshape((d,) + (1,) * prev)
        full = prev == k and m + k <= n - 1
        for j in range(1, prev + 1):
            view = fac.cc[m, j - 1].reshape((d,) + (1,) * (j - 1) + (d,) + (1,) * (prev - j))
            expo = expo + view
        out = _stable_weights(expo, bound[None, ...])
        if full:
            out = out.sum(axis=-1)  # contract the departing variable m+k
    if do_norm:
        out = _normalize_msg(out, m)
    return out


def _marginal_shaped(chain: ChainProblem, fac: ChainFactors, m: int,
                     bound: np.ndarray | None, prefix) -> np.ndarray:
    """Conditional marginal of variable m from the shaped boundary above it."""
    d, k = chain.d, chain.k
    if bound is None:
        expo = fac.sc[m].copy()
        for j in range(1, min(k, m) + 1):
            expo = expo + fac.cc[m - j, j - 1][prefix[m - j], :]
        return _stable_weights(expo, np.ones(d))
    L = bound.ndim
    expo = np.zeros((d,) + bound.shape)
    expo += fac.sc[m].reshape((d,) + (1,) * L)
    for j in range(1, L + 1):
        view = fac.cc[m, j - 1].reshape((d,) + (1,) * (j - 1) + (d,) + (1,) * (L - j))
        expo = expo + view
    for i in range(1, L + 1):  # fixed crosses skipping over m
        for j in range(i + 1, k + 1):
            l = m + i - j
            if 0 <= l <= m - 1:
                vec = fac.cc[l, j - 1][prefix[l], :]
                expo = expo + vec.reshape((1,) * i + (d,) + (1,) * (L - i))
    for j in range(1, min(k, m) + 1):
        vec = fac.cc[m - j, j - 1][prefix[m - j], :]
        expo = expo + vec.reshape((d,) + (1,) * L)
    out = _stable_weights(expo, bound[None, ...])
    return out.sum(axis=tuple(range(1, L + 1)))


def solve_tensor(chain: ChainProblem, cfg: SolverConfig) -> ChainSolveResult:
    """Stair-tensor solve: shaped boundary with up to k open indices.

    Shares tie-break and factor tables with solve_matrix and must return the
    same assignment on every instance.
    """
    _check_chain_capacity(chain)
    build_chain_stair(chain, cfg)  # capacity + structure validation
    fac = ChainFactors(chain, cfg.tau)
    n = chain.n
    bounds: dict = {}
    bound = _transfer_shaped(None, n - 1, fac, chain, cfg.normalize)
    bounds[n - 1] = bound
    for m in range(n - 2, 0, -1):
        bound = _transfer_shaped(bound, m, fac, chain, cfg.normalize)
        bounds[m] = bound
    assignment: list = []
    marginals = []
    for m in range(n):
        above = bounds.get(m + 1)
        vec = _marginal_shaped(chain, fac, m, above, assignment)
        if cfg.normalize:
            vec = _normalize_msg(vec, m)
        marginals.append(MarginalVector(entries=vec, scale_dropped=cfg.normalize))
        assignment.append(argmax_extract(vec))
    return ChainSolveResult(assignment=assignment,
                            cost=result_cost(chain, assignment),
                            marginals=marginals,
                            messages_held=len(bounds))
