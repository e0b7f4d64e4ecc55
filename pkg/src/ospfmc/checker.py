"""Explicit-state exploration and the E<>, A[] and A<> property checks.

A *system* is any object with ``initial()`` and ``successors(state)``; the
latter returns ``(Action, state)`` pairs in a deterministic order, with
labels unique per source state. States are hashable frozen values, and
deduplication uses state equality, which coincides with equality of
:func:`canonical_key`.
"""

from __future__ import annotations

import dataclasses
import hashlib
import time
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

DEFAULT_MAX_STATES = 5_000_000
DEFAULT_MAX_SECONDS = 60.0

Predicate = Callable[[object], bool]


class Verdict(Enum):
    SATISFIED = "SATISFIED"
    VIOLATED = "VIOLATED"
    INCONCLUSIVE = "INCONCLUSIVE"


class Quantifier(Enum):
    EXISTS_EVENTUALLY = "E<>"
    ALWAYS_GLOBALLY = "A[]"
    ALWAYS_EVENTUALLY = "A<>"


class TraceKind(Enum):
    WITNESS = "Witness"
    COUNTEREXAMPLE = "Counterexample"
    LASSO = "LassoCounterexample"


class StateLimitExceeded(RuntimeError):
    """Raised by :func:`explore` in strict mode; carries the partial graph."""

    def __init__(self, graph: "Graph") -> None:
        super().__init__(graph.truncated)
        self.graph = graph


# ---------------------------------------------------------------- encoding

def _encode(v, out: list) -> None:
    if v is None:
        out.append("N")
    elif isinstance(v, bool):
        out.append("T" if v else "F")
    elif isinstance(v, int):
        out.append(f"i{v}")
    elif isinstance(v, str):
        out.append(f"s{len(v)}:{v}")
    elif isinstance(v, Enum):
        out.append(f"e{type(v).__name__}.{v.name}")
    elif isinstance(v, (frozenset, set)):
        out.append("{")
        for item in sorted(v, key=canonical_key):
            _encode(item, out)
            out.append(",")
        out.append("}")
    elif isinstance(v, (tuple, list)):
        out.append("(")
        for item in v:
            _encode(item, out)
            out.append(",")
        out.append(")")
    elif dataclasses.is_dataclass(v):
        out.append(f"<{type(v).__name__}")
        for f in dataclasses.fields(v):
            if f.compare:
                out.append(f" {f.name}=")
                _encode(getattr(v, f.name), out)
        out.append(">")
    else:
        raise TypeError(f"cannot encode {type(v).__name__}")


def canonical_key(state) -> bytes:
    """Stable byte encoding: fixed field order, sets in ascending order."""
    out: list[str] = []
    _encode(state, out)
    return "".join(out).encode()


def digest(state) -> str:
    return hashlib.sha256(canonical_key(state)).hexdigest()[:16]


# ---------------------------------------------------------------- exploration

@dataclass
class Graph:
    states: list = field(default_factory=list)
    index: dict = field(default_factory=dict)
    edges: list[list[tuple[str, int]]] = field(default_factory=list)
    parent: list[Optional[tuple[int, str]]] = field(default_factory=list)
    expanded: list[bool] = field(default_factory=list)
    truncated: Optional[str] = None
    hit: Optional[int] = None
    seconds: float = 0.0

    @property
    def complete(self) -> bool:
        return self.truncated is None

    def __len__(self) -> int:
        return len(self.states)

    def add(self, state, parent: Optional[tuple[int, str]]) -> tuple[int, bool]:
        i = self.index.get(state)
        if i is not None:
            return i, False
        i = len(self.states)
        self.index[state] = i
        self.states.append(state)
        self.edges.append([])
        self.parent.append(parent)
        self.expanded.append(False)
        return i, True

    def path_to(self, i: int) -> list[tuple[str, int]]:
        """BFS-tree path from the initial state: ``[("<init>", 0), (label, idx), ...]``."""
        steps = []
        while True:
            p = self.parent[i]
            if p is None:
                steps.append(("<init>", i))
                break
            steps.append((p[1], i))
            i = p[0]
        steps.reverse()
        return steps

    def successors_of(self, i: int) -> list[tuple[str, int]]:
        return self.edges[i]


def explore(
    system,
    max_states: int = DEFAULT_MAX_STATES,
    max_seconds: float = DEFAULT_MAX_SECONDS,
    max_depth: Optional[int] = None,
    stop_when: Optional[Predicate] = None,
    strict: bool = False,
) -> Graph:
    """Breadth-first closure of the successor relation from ``system.initial()``.

    ``stop_when`` ends the search at the first state satisfying it (recorded
    in ``graph.hit``); the graph is then marked truncated with reason
    ``"stopped"``. Exceeding a limit marks it truncated with the limit name.
    """
    if max_states < 1:
        raise ValueError("max_states must be >= 1")
    start = time.monotonic()
    g = Graph()
    init = system.initial()
    g.add(init, None)
    depth = [0]
    if stop_when is not None and stop_when(init):
        g.hit = 0
        g.truncated = "stopped"
        g.seconds = time.monotonic() - start
        return g
    queue = deque([0])
    while queue:
        i = queue.popleft()
        if max_depth is not None and depth[i] >= max_depth:
            g.truncated = g.truncated or "max_depth"
            continue
        if time.monotonic() - start > max_seconds:
            g.truncated = "max_seconds"
            break
        state = g.states[i]
        out = g.edges[i]
        seen_labels: dict[str, int] = {}
        for action, nxt in system.successors(state):
            label = action.label if hasattr(action, "label") else str(action)
            j, new = g.add(nxt, (i, label))
            if label in seen_labels:
                if seen_labels[label] != j:
                    raise ValueError(f"ambiguous action label {label!r}")
                continue
            seen_labels[label] = j
            out.append((label, j))
            if new:
                depth.append(depth[i] + 1)
                if stop_when is not None and stop_when(nxt):
                    g.expanded[i] = True
                    g.hit = j
                    g.truncated = "stopped"
                    g.seconds = time.monotonic() - start
                    return g
                if len(g.states) >= max_states and queue:
                    g.truncated = "max_states"
                queue.append(j)
        g.expanded[i] = True
        if g.truncated == "max_states":
            break
    g.seconds = time.monotonic() - start
    if strict and g.truncated is not None and g.truncated != "stopped":
        raise StateLimitExceeded(g)
    return g


# ---------------------------------------------------------------- traces

@dataclass
class Trace:
    kind: TraceKind
    verdict: Verdict
    steps: list[tuple[str, str]]
    loop_start: Optional[int] = None

    @property
    def final_digest(self) -> str:
        return self.steps[-1][1]

    def to_text(self, header: Optional[dict] = None) -> str:
        lines = [f"# kind: {self.kind.value}", f"# verdict: {self.verdict.value}"]
        if self.loop_start is not None:
            lines.append(f"# loop_start: {self.loop_start}")
        for k, v in (header or {}).items():
            lines.append(f"# {k}: {v}")
        for idx, (label, dig) in enumerate(self.steps):
            lines.append(f"{idx}\t{label}\t{dig}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Trace":
        meta = {}
        steps = []
        for raw in text.splitlines():
            if not raw.strip():
                continue
            if raw.startswith("#"):
                key, _, value = raw[1:].partition(":")
                meta[key.strip()] = value.strip()
                continue
            idx, label, dig = raw.split("\t")
            if int(idx) != len(steps):
                raise ValueError(f"trace step {idx} out of order")
            steps.append((label, dig))
        loop = meta.get("loop_start")
        return cls(
            TraceKind(meta["kind"]),
            Verdict(meta["verdict"]),
            steps,
            int(loop) if loop is not None else None,
        )


def _trace_from(g: Graph, path: list[tuple[str, int]], kind: TraceKind, verdict: Verdict,
                loop_start: Optional[int] = None) -> Trace:
    return Trace(kind, verdict, [(label, digest(g.states[i])) for label, i in path], loop_start)


def replay(system, trace: Trace):
    """Re-execute ``trace`` from ``system.initial()``; return the final state or raise ValueError."""
    state = system.initial()
    label0, dig0 = trace.steps[0]
    if label0 != "<init>" or digest(state) != dig0:
        raise ValueError("trace does not start at the initial state")
    visited = [state]
    for k, (label, dig) in enumerate(trace.steps[1:], start=1):
        for action, nxt in system.successors(state):
            if action.label == label:
                state = nxt
                break
        else:
            raise ValueError(f"step {k}: action {label!r} not enabled")
        if digest(state) != dig:
            raise ValueError(f"step {k}: digest mismatch")
        visited.append(state)
    if trace.loop_start is not None and visited[trace.loop_start] != state:
        raise ValueError("lasso does not close")
    return state


def trace_replays(system, trace: Trace) -> bool:
    try:
        replay(system, trace)
    except ValueError:
        return False
    return True


# ---------------------------------------------------------------- checks

@dataclass
class CheckResult:
    verdict: Verdict
    trace: Optional[Trace]
    graph: Graph

    @property
    def states(self) -> int:
        return len(self.graph)


def check_exists_eventually(g: Graph, p: Predicate) -> CheckResult:
    hit = g.hit if g.hit is not None and p(g.states[g.hit]) else None
    if hit is None:
        hit = next((i for i, s in enumerate(g.states) if p(s)), None)
    if hit is not None:
        # BFS insertion order is depth order, so the first hit has a shortest path
        trace = _trace_from(g, g.path_to(hit), TraceKind.WITNESS, Verdict.SATISFIED)
        return CheckResult(Verdict.SATISFIED, trace, g)
    if not g.complete:
        return CheckResult(Verdict.INCONCLUSIVE, None, g)
    return CheckResult(Verdict.VIOLATED, None, g)


def check_always_globally(g: Graph, p: Predicate) -> CheckResult:
    bad = g.hit if g.hit is not None and not p(g.states[g.hit]) else None
    if bad is None:
        bad = next((i for i, s in enumerate(g.states) if not p(s)), None)
    if bad is not None:
        trace = _trace_from(g, g.path_to(bad), TraceKind.COUNTEREXAMPLE, Verdict.VIOLATED)
        return CheckResult(Verdict.VIOLATED, trace, g)
    if not g.complete:
        return CheckResult(Verdict.INCONCLUSIVE, None, g)
    return CheckResult(Verdict.SATISFIED, None, g)


def _find_cycle(g: Graph, bad: list[bool], roots: list[int]) -> Optional[list[tuple[str, int]]]:
    """Some cycle within the ``bad`` subgraph reachable from ``roots``, as labelled steps."""
    WHITE, GREY, BLACK = 0, 1, 2
    colour = [WHITE] * len(g.states)
    for root in roots:
        if colour[root] != WHITE:
            continue
        colour[root] = GREY
        stack = [(root, 0)]
        via: list[tuple[str, int]] = []
        while stack:
            u, k = stack[-1]
            edges = g.edges[u]
            if k >= len(edges):
                colour[u] = BLACK
                stack.pop()
                if via:
                    via.pop()
                continue
            stack[-1] = (u, k + 1)
            label, v = edges[k]
            if not bad[v]:
                continue
            if colour[v] == GREY:
                pos = next(idx for idx, (w, _) in enumerate(stack) if w == v)
                cycle = via[pos:] + [(label, v)]
                return [("<enter>", v)] + cycle
            if colour[v] == WHITE:
                colour[v] = GREY
                stack.append((v, 0))
                via.append((label, v))
    return None


def _bfs_within(g: Graph, allowed: list[bool], target: int) -> list[tuple[str, int]]:
    prev: dict[int, Optional[tuple[int, str]]] = {0: None}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        if u == target:
            break
        for label, v in g.edges[u]:
            if allowed[v] and v not in prev:
                prev[v] = (u, label)
                queue.append(v)
    steps = []
    i = target
    while prev[i] is not None:
        u, label = prev[i]
        steps.append((label, i))
        i = u
    steps.append(("<init>", 0))
    steps.reverse()
    return steps


def check_always_eventually(g: Graph, p: Predicate) -> CheckResult:
    """Violated iff the not-p region reachable from the start has a cycle or a deadlock.

    A lasso is preferred over a deadlock when both exist.
    """
    n = len(g.states)
    bad = [not p(s) for s in g.states]
    if not bad[0]:
        return CheckResult(Verdict.SATISFIED, None, g)
    # restrict to not-p states reachable from the start through not-p states
    region = [False] * n
    region[0] = True
    queue = deque([0])
    order = [0]
    while queue:
        u = queue.popleft()
        for _, v in g.edges[u]:
            if bad[v] and not region[v]:
                region[v] = True
                queue.append(v)
                order.append(v)
    cycle = _find_cycle(g, region, [0])
    if cycle is not None:
        entry = cycle[0][1]
        stem = _bfs_within(g, region, entry)
        loop_start = len(stem) - 1
        trace = _trace_from(g, stem + cycle[1:], TraceKind.LASSO, Verdict.VIOLATED, loop_start)
        return CheckResult(Verdict.VIOLATED, trace, g)
    for u in order:
        if g.expanded[u] and not g.edges[u]:
            trace = _trace_from(g, _bfs_within(g, region, u), TraceKind.COUNTEREXAMPLE, Verdict.VIOLATED)
            return CheckResult(Verdict.VIOLATED, trace, g)
    if not g.complete:
        return CheckResult(Verdict.INCONCLUSIVE, None, g)
    return CheckResult(Verdict.SATISFIED, None, g)


@dataclass(frozen=True)
class Limits:
    max_states: int = DEFAULT_MAX_STATES
    max_seconds: float = DEFAULT_MAX_SECONDS
    max_depth: Optional[int] = None


def check(system, quantifier: Quantifier, p: Predicate, limits: Limits = Limits()) -> CheckResult:
    """Explore ``system`` as far as ``quantifier`` needs and evaluate ``p``."""
    kw = dict(max_states=limits.max_states, max_seconds=limits.max_seconds, max_depth=limits.max_depth)
    if quantifier is Quantifier.EXISTS_EVENTUALLY:
        return check_exists_eventually(explore(system, stop_when=p, **kw), p)
    if quantifier is Quantifier.ALWAYS_GLOBALLY:
        return check_always_globally(explore(system, stop_when=lambda s: not p(s), **kw), p)
    return check_always_eventually(explore(system, **kw), p)


def regression_reachable(system, limits: Limits = Limits()) -> CheckResult:
    """E<> some adjacency node back in Init or ExStart (``system`` must be an adjacency model)."""
    from .protocol import NeighbourState

    low = (NeighbourState.INIT, NeighbourState.EXSTART)

    def regressed(s) -> bool:
        return any(n.nstate in low for n in s.nodes)

    return check(system, Quantifier.EXISTS_EVENTUALLY, regressed, limits)
