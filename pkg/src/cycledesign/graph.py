"""De Bruijn memory graphs, elementary cycles and prime cycles.

Nodes of the memory-``n`` graph are the windows ``(u_{t-n+1}, ..., u_t)`` over
a finite alphabet.  A node is stored as an integer index: the window's symbol
indices read as a base-``c`` number, leftmost (oldest) entry most significant.
There is an edge ``x -> y`` whenever ``y`` is ``x`` shifted by one new symbol.

Elementary cycles are enumerated with Johnson's circuit search, restricted at
each stage to a strongly connected component found with Tarjan's algorithm.
Prime cycles of the memory-``n`` graph (the extreme points of the set of
stationary window distributions) are obtained by lifting the elementary cycles
of the memory-``(n-1)`` graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import ConfigError, ResourceLimitError
from .models import Signal

DEFAULT_MAX_NODES = 4096


@dataclass(frozen=True)
class Alphabet:
    """Ordered set of admissible input levels."""

    values: tuple[float, ...]

    def __init__(self, values: Iterable[float]):
        vals = tuple(float(v) for v in values)
        if not vals:
            raise ConfigError("alphabet must contain at least one value")
        if not all(math.isfinite(v) for v in vals):
            raise ConfigError(f"alphabet values must be finite, got {vals}")
        if len(set(vals)) != len(vals):
            raise ConfigError(f"alphabet values must be distinct, got {vals}")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def index(self, value: float) -> int:
        try:
            return self.values.index(float(value))
        except ValueError:
            raise ConfigError(f"{value!r} is not in the alphabet {self.values}") from None


@dataclass(frozen=True)
class MemoryGraph:
    alphabet: Alphabet
    memory: int

    @property
    def size(self) -> int:
        """Alphabet cardinality."""
        return len(self.alphabet)

    @property
    def n_nodes(self) -> int:
        return self.size**self.memory

    @property
    def n_edges(self) -> int:
        return self.size ** (self.memory + 1)

    def successors(self, node: int) -> range:
        c = self.size
        base = (node % (c ** (self.memory - 1))) * c
        return range(base, base + c)

    def has_edge(self, x: int, y: int) -> bool:
        return 0 <= x < self.n_nodes and y in self.successors(x)

    def edges(self) -> Iterator[tuple[int, int]]:
        for x in range(self.n_nodes):
            for y in self.successors(x):
                yield x, y

    def digits(self, node: int) -> tuple[int, ...]:
        """Symbol indices of a node, oldest first."""
        if not 0 <= node < self.n_nodes:
            raise IndexError(f"node {node} out of range for {self.n_nodes} nodes")
        out = []
        for _ in range(self.memory):
            node, d = divmod(node, self.size)
            out.append(d)
        return tuple(reversed(out))

    def node_values(self, node: int) -> tuple[float, ...]:
        vals = self.alphabet.values
        return tuple(vals[d] for d in self.digits(node))

    def node_index(self, window: Sequence[float]) -> int:
        if len(window) != self.memory:
            raise ConfigError(f"window {tuple(window)} does not have length {self.memory}")
        idx = 0
        for v in window:
            idx = idx * self.size + self.alphabet.index(v)
        return idx

    def adjacency(self) -> np.ndarray:
        n = self.n_nodes
        adj = np.zeros((n, n), dtype=bool)
        for x, y in self.edges():
            adj[x, y] = True
        return adj


def build_memory_graph(alphabet: Alphabet | Iterable[float], memory: int) -> MemoryGraph:
    if not isinstance(alphabet, Alphabet):
        alphabet = Alphabet(alphabet)
    if isinstance(memory, bool) or not isinstance(memory, (int, np.integer)) or memory < 1:
        raise ConfigError(f"memory must be a positive integer, got {memory!r}")
    return MemoryGraph(alphabet, int(memory))


def canonical_rotation(nodes: Sequence[int]) -> tuple[int, ...]:
    nodes = tuple(nodes)
    k = nodes.index(min(nodes))
    return nodes[k:] + nodes[:k]


@dataclass(frozen=True)
class ElementaryCycle:
    """Closed walk with no repeated node, stored once per cyclic permutation.

    ``nodes`` lists the distinct nodes in traversal order starting from the
    smallest index; ``path`` appends the first node again to close the cycle.
    """

    graph: MemoryGraph
    nodes: tuple[int, ...]

    def __post_init__(self):
        nodes = tuple(int(v) for v in self.nodes)
        if not nodes:
            raise ConfigError("a cycle needs at least one node")
        if len(set(nodes)) != len(nodes):
            raise ConfigError(f"cycle {nodes} repeats a node")
        for x, y in zip(nodes, nodes[1:] + nodes[:1]):
            if not self.graph.has_edge(x, y):
                raise ConfigError(
                    f"({x}, {y}) is not an edge of the memory-{self.graph.memory} graph"
                )
        object.__setattr__(self, "nodes", canonical_rotation(nodes))

    @classmethod
    def _trusted(cls, graph: MemoryGraph, nodes: tuple[int, ...]):
        """Skip validation for cycles produced by the enumerators (already canonical)."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "graph", graph)
        object.__setattr__(obj, "nodes", nodes)
        return obj

    @property
    def length(self) -> int:
        return len(self.nodes)

    @property
    def path(self) -> tuple[int, ...]:
        return self.nodes + self.nodes[:1]

    def windows(self) -> list[tuple[float, ...]]:
        return [self.graph.node_values(v) for v in self.nodes]

    def symbols(self) -> tuple[float, ...]:
        """Newest entry of each node along the cycle."""
        vals = self.graph.alphabet.values
        c = self.graph.size
        return tuple(vals[v % c] for v in self.nodes)


class PrimeCycle(ElementaryCycle):
    """Elementary cycle whose node set contains no smaller cycle.

    Its uniform distribution over ``nodes`` is one extreme point of the
    stationary window distributions.
    """


@dataclass(frozen=True)
class CycleBasis:
    graph: MemoryGraph
    cycles: tuple[PrimeCycle, ...]

    def __post_init__(self):
        cycles = tuple(self.cycles)
        if len({c.nodes for c in cycles}) != len(cycles):
            raise ConfigError("cycle basis contains duplicate cycles")
        for c in cycles:
            if c.graph != self.graph:
                raise ConfigError("all basis cycles must live on the basis graph")
        object.__setattr__(self, "cycles", cycles)

    def __len__(self) -> int:
        return len(self.cycles)

    def __iter__(self) -> Iterator[PrimeCycle]:
        return iter(self.cycles)

    def __getitem__(self, i: int) -> PrimeCycle:
        return self.cycles[i]

    def to_dict(self) -> dict:
        return {
            "format": "cycledesign/cycle-basis",
            "version": 1,
            "alphabet": list(self.graph.alphabet.values),
            "memory": self.graph.memory,
            "cycles": [[list(self.graph.node_values(v)) for v in c.path] for c in self.cycles],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CycleBasis":
        try:
            graph = build_memory_graph(doc["alphabet"], doc["memory"])
            cycles = []
            for path in doc["cycles"]:
                nodes = [graph.node_index(w) for w in path]
                if len(nodes) > 1 and nodes[0] == nodes[-1]:
                    nodes = nodes[:-1]
                cycles.append(PrimeCycle(graph, tuple(nodes)))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed cycle basis document: {exc}") from exc
        return cls(graph, tuple(cycles))


def _check_size(graph: MemoryGraph, max_nodes: int) -> None:
    n = graph.n_nodes
    if n > max_nodes:
        c, m = graph.size, graph.memory
        raise ResourceLimitError(
            f"instance too large: the memory-{m} graph over {c} symbols has {n} nodes "
            f"(cap {max_nodes}); Johnson's enumeration costs "
            f"O(c^n_m (c+1)(c_e+1)) = O({n * (c + 1)} * (c_e+1)) with c_e the number "
            "of elementary cycles, which grows super-exponentially"
        )


def _strongly_connected_components(nodes: Sequence[int], succ) -> list[list[int]]:
    """Tarjan's algorithm, iterative.  ``succ(v)`` yields neighbours inside ``nodes``."""
    index: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    comps: list[list[int]] = []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(succ(root)))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(succ(w))))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                comps.append(comp)
    return comps


def _circuits_from(start: int, succ) -> Iterator[list[int]]:
    """Johnson's CIRCUIT procedure rooted at ``start``, without recursion."""
    blocked = {start}
    block_map: dict[int, set[int]] = {}
    path = [start]
    work = [iter(succ(start))]
    closed = [False]

    def unblock(node: int) -> None:
        todo = [node]
        while todo:
            v = todo.pop()
            if v in blocked:
                blocked.discard(v)
                todo.extend(block_map.pop(v, ()))

    while work:
        v = path[-1]
        pushed = False
        for w in work[-1]:
            if w == start:
                yield list(path)
                closed[-1] = True
            elif w not in blocked:
                path.append(w)
                work.append(iter(succ(w)))
                closed.append(False)
                blocked.add(w)
                pushed = True
                break
        if pushed:
            continue
        work.pop()
        found = closed.pop()
        if found:
            unblock(v)
        else:
            for w in succ(v):
                block_map.setdefault(w, set()).add(v)
        path.pop()
        if closed:
            closed[-1] = closed[-1] or found


def elementary_cycles(graph: MemoryGraph, max_nodes: int = DEFAULT_MAX_NODES) -> list[ElementaryCycle]:
    """All elementary cycles of ``graph``, sorted by length then node indices."""
    _check_size(graph, max_nodes)
    found: list[tuple[int, ...]] = []
    succ_all = {v: tuple(graph.successors(v)) for v in range(graph.n_nodes)}
    remaining = set(range(graph.n_nodes))
    while remaining:
        members = sorted(remaining)
        succ_in = {v: [w for w in succ_all[v] if w in remaining] for v in members}
        comps = [
            c
            for c in _strongly_connected_components(members, succ_in.__getitem__)
            if len(c) > 1 or c[0] in succ_in[c[0]]
        ]
        if not comps:
            break
        comp = min(comps, key=min)
        start = min(comp)
        inside = set(comp)
        succ_comp = {v: [w for w in succ_in[v] if w in inside] for v in comp}
        # every circuit rooted at the component minimum is already canonical
        found.extend(tuple(c) for c in _circuits_from(start, succ_comp.__getitem__))
        remaining.discard(start)
    found.sort(key=lambda c: (len(c), c))
    return [ElementaryCycle._trusted(graph, c) for c in found]


def lift_prime_cycles(cycles: Iterable[ElementaryCycle], target: MemoryGraph) -> CycleBasis:
    """Map elementary cycles of the memory-``(n-1)`` graph to prime cycles of ``target``.

    Consecutive ``(n-1)``-windows of the periodically extended cycle are
    overlapped into ``n``-windows.  For ``n = 1`` the cycles are taken as they
    are.
    """
    source_memory = max(1, target.memory - 1)
    lifted = []
    for cyc in cycles:
        g = cyc.graph
        if g.alphabet != target.alphabet or g.memory != source_memory:
            raise ConfigError(
                f"cycle lives on the memory-{g.memory} graph over {g.alphabet.values}; "
                f"expected memory {source_memory} over {target.alphabet.values}"
            )
        for x, y in zip(cyc.nodes, cyc.nodes[1:] + cyc.nodes[:1]):
            if not g.has_edge(x, y):
                raise ConfigError(f"{cyc.nodes} is not a cycle of its source graph")
        if target.memory == 1:
            lifted.append(PrimeCycle(target, cyc.nodes))
            continue
        c = target.size
        nodes = cyc.nodes
        nxt = nodes[1:] + nodes[:1]
        lifted.append(PrimeCycle(target, tuple(x * c + y % c for x, y in zip(nodes, nxt))))
    lifted.sort(key=lambda p: (p.length, p.nodes))
    return CycleBasis(target, tuple(lifted))


def prime_cycle_basis(
    alphabet: Alphabet | Iterable[float], memory: int, max_nodes: int = DEFAULT_MAX_NODES
) -> CycleBasis:
    """Enumerate the memory-``(n-1)`` cycles and lift them onto the memory-``n`` graph."""
    target = build_memory_graph(alphabet, memory)
    source = build_memory_graph(target.alphabet, max(1, memory - 1))
    return lift_prime_cycles(elementary_cycles(source, max_nodes), target)


def cycle_signal(cycle: ElementaryCycle, length: int) -> Signal:
    """Periodic input obtained by walking ``cycle`` and emitting each node's newest entry.

    The history before the first sample is the first node minus its newest
    entry, so every sliding window of the signal is a node of the cycle.
    """
    if length < 1:
        raise ConfigError(f"signal length must be positive, got {length}")
    sym = np.asarray(cycle.symbols(), dtype=float)
    reps = -(-length // len(sym))
    samples = np.tile(sym, reps)[:length]
    prefill = cycle.graph.node_values(cycle.nodes[0])[:-1]
    return Signal(samples, prefill)
