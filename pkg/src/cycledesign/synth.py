"""Stationary window distributions, transition matrices and input realizations.

Transition matrices use the column convention ``p_{k+1} = A p_k``: column
``x`` of ``A`` is the distribution of the next window given window ``x``.

Two constructions are provided, both satisfying ``A p = p`` exactly on the
support of ``p`` and only using edges of the memory graph:

``cycle-flow``
    Weighted superposition of the deterministic cycle shifts.  The chain stays
    on the cycles it starts on, so it is reducible whenever the support is
    covered by disjoint cycles.
``max-entropy``
    Next symbol drawn from the conditional distribution of the newest entry
    given the ``n-1`` overlapping entries.  This is the highest-entropy chain
    with the given window distribution and mixes across cycles that share an
    overlap.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError
from .graph import CycleBasis, MemoryGraph
from .models import Signal

CYCLE_FLOW = "cycle-flow"
MAX_ENTROPY = "max-entropy"
METHODS = (CYCLE_FLOW, MAX_ENTROPY)


@dataclass(frozen=True, eq=False)
class StationaryDistribution:
    graph: MemoryGraph
    probabilities: np.ndarray

    def __post_init__(self):
        p = np.array(self.probabilities, dtype=float)
        if p.shape != (self.graph.n_nodes,):
            raise ConfigError(f"expected {self.graph.n_nodes} probabilities, got shape {p.shape}")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ConfigError("stationary probabilities must be nonnegative and sum to one")
        p.setflags(write=False)
        object.__setattr__(self, "probabilities", p)

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.probabilities > 0)

    def marginal_gap(self) -> float:
        """Largest mismatch between the oldest-dropped and newest-dropped marginals."""
        nm, c = self.graph.memory, self.graph.size
        if nm == 1:
            return 0.0
        p = self.probabilities
        drop_oldest = p.reshape(c, -1).sum(axis=0)
        drop_newest = p.reshape(-1, c).sum(axis=1)
        return float(np.max(np.abs(drop_oldest - drop_newest)))

    def to_csv(self) -> str:
        nm = self.graph.memory
        head = ",".join(
            ["u_oldest" if k == 0 else "u_newest" if k == nm - 1 else f"u_{k}" for k in range(nm)]
            if nm > 1
            else ["u_newest"]
        )
        lines = [head + ",probability"]
        for x, pr in enumerate(self.probabilities):
            vals = ",".join(repr(v) for v in self.graph.node_values(x))
            lines.append(f"{vals},{float(pr)!r}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    graph: MemoryGraph
    entries: np.ndarray
    method: str = CYCLE_FLOW

    def __post_init__(self):
        A = np.array(self.entries, dtype=float)
        n = self.graph.n_nodes
        if A.shape != (n, n):
            raise ConfigError(f"transition matrix must be {n}x{n}, got {A.shape}")
        if np.any(A < 0):
            raise ConfigError("transition probabilities must be nonnegative")
        adj = self.graph.adjacency()
        if np.any(A.T[~adj] != 0):
            raise ConfigError("transition matrix uses a pair that is not a graph edge")
        A.setflags(write=False)
        object.__setattr__(self, "entries", A)

    def to_dict(self) -> dict:
        n = self.graph.n_nodes
        return {
            "format": "cycledesign/transition-matrix",
            "version": 1,
            "convention": "column-stochastic, p_next = A @ p",
            "method": self.method,
            "alphabet": list(self.graph.alphabet.values),
            "memory": self.graph.memory,
            "nodes": [list(self.graph.node_values(x)) for x in range(n)],
            "columns": [self.entries[:, x].tolist() for x in range(n)],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TransitionMatrix":
        from .graph import build_memory_graph

        try:
            graph = build_memory_graph(doc["alphabet"], doc["memory"])
            A = np.asarray(doc["columns"], dtype=float).T
            return cls(graph, A, doc.get("method", CYCLE_FLOW))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed transition matrix document: {exc}") from exc


def _check_weights(weights, basis: CycleBasis) -> np.ndarray:
    w = np.asarray(weights, dtype=float).ravel()
    if w.shape != (len(basis),):
        raise ConfigError(f"{len(basis)} basis cycles but {w.size} weights")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise ConfigError("weights must be nonnegative and sum to one")
    return w


def assemble_stationary(weights: Sequence[float], basis: CycleBasis) -> StationaryDistribution:
    w = _check_weights(weights, basis)
    p = np.zeros(basis.graph.n_nodes)
    for wi, cyc in zip(w, basis):
        if wi > 0:
            p[list(cyc.nodes)] += wi / cyc.length
    # roundoff only; the masses already sum to one within a few ulps
    p /= p.sum()
    return StationaryDistribution(basis.graph, p)


def _cycle_flow(w: np.ndarray, basis: CycleBasis, p: np.ndarray) -> np.ndarray:
    n = basis.graph.n_nodes
    F = np.zeros((n, n))  # F[y, x]: flow along x -> y
    for wi, cyc in zip(w, basis):
        if wi > 0:
            nxt = cyc.nodes[1:] + cyc.nodes[:1]
            F[list(nxt), list(cyc.nodes)] += wi / cyc.length
    A = np.zeros((n, n))
    live = p > 0
    A[:, live] = F[:, live] / F[:, live].sum(axis=0)
    return A


def _max_entropy(graph: MemoryGraph, p: np.ndarray) -> np.ndarray:
    n = graph.n_nodes
    A = np.zeros((n, n))
    for x in np.flatnonzero(p > 0):
        succ = list(graph.successors(int(x)))
        mass = p[succ]
        A[succ, x] = mass / mass.sum()
    return A


def build_transition_matrix(
    weights: Sequence[float], basis: CycleBasis, method: str = CYCLE_FLOW
) -> TransitionMatrix:
    """Markov chain on the graph nodes that leaves the assembled distribution invariant.

    Columns of zero-mass windows spread uniformly over the window's graph
    successors; those windows are never visited from a stationary start.
    """
    if method not in METHODS:
        raise ConfigError(f"unknown transition construction {method!r}; expected one of {METHODS}")
    w = _check_weights(weights, basis)
    p = assemble_stationary(w, basis).probabilities
    graph = basis.graph
    if method == CYCLE_FLOW:
        A = _cycle_flow(w, basis, p)
    else:
        A = _max_entropy(graph, p)
    for x in np.flatnonzero(p == 0):
        A[list(graph.successors(int(x))), x] = 1.0 / graph.size
    return TransitionMatrix(graph, A, method)


def generate_sequence(
    A: TransitionMatrix,
    stationary: StationaryDistribution,
    length: int,
    seed: int,
    burn_in: int = 0,
) -> Signal:
    """Run the chain and emit the newest entry of every visited window.

    The first window is drawn from ``stationary`` so the output is stationary
    from its first sample.  With ``burn_in > 0`` the first window is instead
    drawn uniformly over the support and ``burn_in`` steps are discarded.
    The returned signal's history is the first window minus its newest entry.
    """
    if length < 1:
        raise ConfigError(f"sequence length must be positive, got {length}")
    if burn_in < 0:
        raise ConfigError(f"burn_in must be nonnegative, got {burn_in}")
    graph = A.graph
    p = stationary.probabilities
    support = np.flatnonzero(p > 0)
    if support.size == 0:
        raise ConfigError("stationary distribution has empty support")
    rng = np.random.default_rng(seed)
    # successor windows of x are x's shift followed by each alphabet symbol
    succ = [list(graph.successors(x)) for x in range(graph.n_nodes)]
    cum = []
    for x, ys in enumerate(succ):
        col = np.cumsum(A.entries[ys, x])
        cum.append((col / col[-1]).tolist() if col[-1] > 0 else [1.0] * len(ys))

    if burn_in:
        state = int(support[rng.integers(support.size)])
    else:
        start = np.cumsum(p)
        start /= start[-1]
        state = int(np.searchsorted(start, rng.random(), side="right"))
    draws = rng.random(burn_in + length - 1).tolist()
    states = np.empty(burn_in + length, dtype=np.int64)
    states[0] = state
    for k, r in enumerate(draws, start=1):
        state = succ[state][bisect_right(cum[state], r)]
        states[k] = state
    states = states[burn_in:]
    vals = np.asarray(graph.alphabet.values)
    samples = vals[states % graph.size]
    prefill = graph.node_values(int(states[0]))[:-1]
    return Signal(samples, prefill)


def signal_to_csv(signal: Signal) -> str:
    return "".join(f"{v!r}\n" for v in signal.samples.tolist())


def signal_from_csv(text: str) -> Signal:
    vals = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            vals.append(float(line))
        except ValueError:
            raise ConfigError(f"signal file line {lineno}: {line!r} is not a number") from None
    if not vals:
        raise ConfigError("signal file contains no samples")
    return Signal(np.asarray(vals))
