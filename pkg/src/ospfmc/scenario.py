"""Scenario files: JSON schema, validation, model construction and property evaluation."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional

from .adjacency import AdjacencyModel, full_node, initial_node
from .adversary import VECTORS, AttackerConfig, ContentFreedom, StartTime, new_runtime
from .checker import (
    CheckResult,
    Limits,
    Quantifier,
    Trace,
    Verdict,
    check,
    replay,
)
from .lsdb import LsaEntry, Lsdb, lsdb_sync, malicious_holds
from .ospf_net import NetModel, all_truthful, any_tainted, net_steady
from .protocol import MessageKind, NeighbourState
from .topology import ConnectivityMode, Topology, TopologyError

SCHEMA_VERSION = 1


class ScenarioError(ValueError):
    """Invalid scenario; ``where`` is a JSON path or ``line:col``."""

    def __init__(self, where: str, message: str) -> None:
        super().__init__(f"{where}: {message}")
        self.where = where


@dataclass(frozen=True)
class EntrySpec:
    origin: int
    links: tuple[int, ...]
    seq: int = 0
    malicious: bool = False

    def build(self) -> LsaEntry:
        return LsaEntry(self.origin, frozenset(self.links), self.seq, self.malicious)


@dataclass(frozen=True)
class AttackerSpec:
    node: int
    connectivity: str = "local"
    start: str = "init"
    alphabet: tuple[str, ...] = ()
    spoofing: bool = False
    content: str = "fake"
    budget: Optional[int] = None
    vectors: Optional[tuple[str, ...]] = None
    fake_lsdb: tuple[EntrySpec, ...] = ()


@dataclass(frozen=True)
class PropertySpec:
    name: str
    quantifier: str
    predicate: Any
    expect: Optional[str] = None
    from_witness: Optional[str] = None
    exhaust_attacker: bool = False


@dataclass(frozen=True)
class Scenario:
    name: str
    model: str
    node_count: int
    edges: tuple[tuple[int, int], ...]
    malicious_edges: tuple[tuple[int, int], ...] = ()
    attacker: Optional[AttackerSpec] = None
    pair: Optional[tuple[int, int]] = None
    adjacency_start: str = "down"
    initial_dbs: tuple[tuple[int, tuple[EntrySpec, ...]], ...] = ()
    suppress_saturated_hellos: bool = True
    urgent_origination: bool = True
    max_states: Optional[int] = None
    max_seconds: Optional[float] = None
    properties: tuple[PropertySpec, ...] = ()
    description: str = ""


# ---------------------------------------------------------------- parsing

_MISSING = object()


def _get(obj: dict, key: str, where: str, kind, default=_MISSING):
    if key not in obj:
        if default is _MISSING:
            raise ScenarioError(where, f"missing field {key!r}")
        return default
    value = obj[key]
    if value is None:
        return value
    # bool is an int subclass; reject it wherever a number is wanted
    numeric_bool = isinstance(value, bool) and kind is not bool
    if numeric_bool or not isinstance(value, kind):
        raise ScenarioError(f"{where}.{key}", f"expected {_kind_name(kind)}")
    return value


def _kind_name(kind) -> str:
    if isinstance(kind, tuple):
        return " or ".join(k.__name__ for k in kind)
    return kind.__name__


def _node(value, n: int, where: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise ScenarioError(where, "node id must be an integer")
    if not 0 <= value < n:
        raise ScenarioError(where, f"node {value} not in topology of {n} nodes")
    return value


def _pairs(raw, n: int, where: str) -> tuple[tuple[int, int], ...]:
    if not isinstance(raw, list):
        raise ScenarioError(where, "expected a list of [a, b] pairs")
    out = []
    for i, item in enumerate(raw):
        if not isinstance(item, list) or len(item) != 2:
            raise ScenarioError(f"{where}[{i}]", "expected [a, b]")
        a = _node(item[0], n, f"{where}[{i}][0]")
        b = _node(item[1], n, f"{where}[{i}][1]")
        if a == b:
            raise ScenarioError(f"{where}[{i}]", "self-loop")
        out.append((a, b))
    return tuple(out)


def _entry(raw, n: int, where: str) -> EntrySpec:
    if not isinstance(raw, dict):
        raise ScenarioError(where, "expected an object")
    origin = _node(_get(raw, "origin", where, int), n, f"{where}.origin")
    links = _get(raw, "links", where, list)
    links = tuple(sorted(_node(v, n, f"{where}.links") for v in links))
    spec = EntrySpec(origin, links, _get(raw, "seq", where, int, 0), _get(raw, "malicious", where, bool, False))
    try:
        spec.build()
    except ValueError as exc:
        raise ScenarioError(where, str(exc)) from None
    return spec


def _entries(raw, n: int, where: str) -> tuple[EntrySpec, ...]:
    if not isinstance(raw, list):
        raise ScenarioError(where, "expected a list of entries")
    return tuple(_entry(e, n, f"{where}[{i}]") for i, e in enumerate(raw))


_QUANTIFIERS = {q.value for q in Quantifier}
_VERDICTS = {v.value for v in Verdict}
_NSTATES = {s.name.capitalize(): s for s in NeighbourState}
_NSTATES["ExStart"] = NeighbourState.EXSTART


def _check_predicate(expr, n: int, model: str, where: str) -> None:
    if not isinstance(expr, dict) or len(expr) != 1:
        raise ScenarioError(where, "predicate must be an object with exactly one key")
    (op, arg), = expr.items()
    w = f"{where}.{op}"
    if op in ("and", "or"):
        if not isinstance(arg, list) or not arg:
            raise ScenarioError(w, "expected a non-empty list")
        for i, sub in enumerate(arg):
            _check_predicate(sub, n, model, f"{w}[{i}]")
    elif op == "not":
        _check_predicate(arg, n, model, w)
    elif op == "implies":
        if not isinstance(arg, list) or len(arg) != 2:
            raise ScenarioError(w, "expected [premise, conclusion]")
        _check_predicate(arg[0], n, model, f"{w}[0]")
        _check_predicate(arg[1], n, model, f"{w}[1]")
    elif op == "malicious":
        if not isinstance(arg, list):
            raise ScenarioError(w, "expected a list of {observer, targets}")
        for i, item in enumerate(arg):
            if not isinstance(item, dict):
                raise ScenarioError(f"{w}[{i}]", "expected an object")
            _node(_get(item, "observer", f"{w}[{i}]", int), n, f"{w}[{i}].observer")
            for t in _get(item, "targets", f"{w}[{i}]", list):
                _node(t, n, f"{w}[{i}].targets")
    elif op == "nstate":
        if model != "adjacency":
            raise ScenarioError(w, "nstate only applies to adjacency scenarios")
        if not isinstance(arg, dict):
            raise ScenarioError(w, "expected {node, in}")
        _node(_get(arg, "node", w, int), n, f"{w}.node")
        for s in _get(arg, "in", w, list):
            if s not in _NSTATES:
                raise ScenarioError(f"{w}.in", f"unknown neighbour state {s!r}")
    elif op == "lsdb_sync":
        _pairs(arg, n, w)
    elif op in ("truthful", "tainted", "steady", "all_full", "true", "false"):
        if arg is not True:
            raise ScenarioError(w, "expected true")
        if op == "truthful" and model != "net":
            raise ScenarioError(w, "truthful only applies to net scenarios")
        if op == "all_full" and model != "adjacency":
            raise ScenarioError(w, "all_full only applies to adjacency scenarios")
    else:
        raise ScenarioError(where, f"unknown predicate operator {op!r}")


def _pair_refs(expr) -> set[int]:
    """Node ids a predicate reads adjacency state of."""
    (op, arg), = expr.items()
    if op in ("and", "or", "implies"):
        return set().union(*(_pair_refs(e) for e in arg))
    if op == "not":
        return _pair_refs(arg)
    if op == "nstate":
        return {arg["node"]}
    if op == "lsdb_sync":
        return {v for p in arg for v in p}
    if op == "malicious":
        return {item["observer"] for item in arg}
    return set()


def _attacker(raw, n: int, where: str) -> AttackerSpec:
    if not isinstance(raw, dict):
        raise ScenarioError(where, "expected an object")
    node = _node(_get(raw, "node", where, int), n, f"{where}.node")
    connectivity = _get(raw, "connectivity", where, str, "local")
    if connectivity not in {m.value for m in ConnectivityMode}:
        raise ScenarioError(f"{where}.connectivity", f"unknown mode {connectivity!r}")
    start = _get(raw, "start", where, str, "init")
    if start not in {m.value for m in StartTime}:
        raise ScenarioError(f"{where}.start", f"unknown start time {start!r}")
    alphabet = _get(raw, "alphabet", where, list, [])
    kinds = {k.value for k in MessageKind}
    for k in alphabet:
        if k not in kinds:
            raise ScenarioError(f"{where}.alphabet", f"unknown message kind {k!r}")
    content = _get(raw, "content", where, str, "fake")
    if content not in {c.value for c in ContentFreedom}:
        raise ScenarioError(f"{where}.content", f"unknown content freedom {content!r}")
    budget = _get(raw, "budget", where, int, None)
    if budget is not None and budget < 0:
        raise ScenarioError(f"{where}.budget", "must be non-negative")
    vectors = _get(raw, "vectors", where, list, None)
    if vectors is not None:
        for v in vectors:
            if v not in VECTORS:
                raise ScenarioError(f"{where}.vectors", f"unknown vector {v!r}")
            if VECTORS[v].value not in alphabet:
                raise ScenarioError(f"{where}.vectors", f"vector {v!r} needs {VECTORS[v].value!r} in alphabet")
        vectors = tuple(sorted(vectors))
    return AttackerSpec(
        node=node,
        connectivity=connectivity,
        start=start,
        alphabet=tuple(sorted(alphabet)),
        spoofing=_get(raw, "spoofing", where, bool, False),
        content=content,
        budget=budget,
        vectors=vectors,
        fake_lsdb=_entries(_get(raw, "fake_lsdb", where, list, []), n, f"{where}.fake_lsdb"),
    )


def scenario_from_dict(raw: dict) -> Scenario:
    if not isinstance(raw, dict):
        raise ScenarioError("$", "scenario must be a JSON object")
    version = _get(raw, "version", "$", int)
    if version != SCHEMA_VERSION:
        raise ScenarioError("$.version", f"unsupported version {version}")
    name = _get(raw, "name", "$", str)
    model = _get(raw, "model", "$", str)
    if model not in ("net", "adjacency"):
        raise ScenarioError("$.model", f"unknown model {model!r}")

    topo = _get(raw, "topology", "$", dict)
    n = _get(topo, "nodes", "$.topology", int)
    if isinstance(n, bool) or not 1 <= n <= 16:
        raise ScenarioError("$.topology.nodes", "must be in 1..16")
    edges = _pairs(_get(topo, "edges", "$.topology", list), n, "$.topology.edges")
    malicious = _pairs(_get(topo, "malicious_edges", "$.topology", list, []), n, "$.topology.malicious_edges")

    attacker = None
    if raw.get("attacker") is not None:
        attacker = _attacker(raw["attacker"], n, "$.attacker")

    init = _get(raw, "initial", "$", dict, {})
    pair = None
    start = "down"
    if model == "adjacency":
        p = _get(init, "pair", "$.initial", list)
        if len(p) != 2:
            raise ScenarioError("$.initial.pair", "expected two node ids")
        pair = (_node(p[0], n, "$.initial.pair[0]"), _node(p[1], n, "$.initial.pair[1]"))
        if pair[0] == pair[1]:
            raise ScenarioError("$.initial.pair", "nodes must differ")
        start = _get(init, "start", "$.initial", str, "down")
        if start not in ("down", "full"):
            raise ScenarioError("$.initial.start", f"unknown start {start!r}")
        if attacker is not None and attacker.node in pair:
            raise ScenarioError("$.attacker.node", "attacker cannot be one of the adjacency pair")
    dbs_raw = _get(init, "dbs", "$.initial", dict, {})
    dbs = []
    for key in sorted(dbs_raw, key=lambda k: (len(k), k)):
        w = f"$.initial.dbs.{key}"
        try:
            owner = int(key)
        except ValueError:
            raise ScenarioError(w, "keys must be node ids") from None
        _node(owner, n, w)
        dbs.append((owner, _entries(dbs_raw[key], n, w)))

    options = _get(raw, "options", "$", dict, {})
    limits = _get(raw, "limits", "$", dict, {})
    max_states = _get(limits, "max_states", "$.limits", int, None)
    max_seconds = _get(limits, "max_seconds", "$.limits", (int, float), None)

    props = []
    names = set()
    for i, p in enumerate(_get(raw, "properties", "$", list, [])):
        w = f"$.properties[{i}]"
        if not isinstance(p, dict):
            raise ScenarioError(w, "expected an object")
        pname = _get(p, "name", w, str)
        if pname in names:
            raise ScenarioError(f"{w}.name", f"duplicate property {pname!r}")
        q = _get(p, "quantifier", w, str)
        if q not in _QUANTIFIERS:
            raise ScenarioError(f"{w}.quantifier", f"unknown quantifier {q!r}")
        pred = _get(p, "predicate", w, dict)
        _check_predicate(pred, n, model, f"{w}.predicate")
        if pair is not None and not _pair_refs(pred) <= set(pair):
            raise ScenarioError(f"{w}.predicate", "refers to a node outside the adjacency pair")
        expect = _get(p, "expect", w, str, None)
        if expect is not None and expect not in _VERDICTS:
            raise ScenarioError(f"{w}.expect", f"unknown verdict {expect!r}")
        source = _get(p, "from_witness", w, str, None)
        if source is not None and source not in names:
            raise ScenarioError(f"{w}.from_witness", f"no earlier property {source!r}")
        names.add(pname)
        props.append(PropertySpec(
            pname, q, pred, expect, source, _get(p, "exhaust_attacker", w, bool, False)))

    return Scenario(
        name=name,
        model=model,
        node_count=n,
        edges=edges,
        malicious_edges=malicious,
        attacker=attacker,
        pair=pair,
        adjacency_start=start,
        initial_dbs=tuple(dbs),
        suppress_saturated_hellos=_get(options, "suppress_saturated_hellos", "$.options", bool, True),
        urgent_origination=_get(options, "urgent_origination", "$.options", bool, True),
        max_states=max_states,
        max_seconds=None if max_seconds is None else float(max_seconds),
        properties=tuple(props),
        description=_get(raw, "description", "$", str, ""),
    )


def parse_scenario(text: str) -> Scenario:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{exc.lineno}:{exc.colno}", exc.msg) from None
    return scenario_from_dict(raw)


def load_scenario(path) -> Scenario:
    return parse_scenario(Path(path).read_text(encoding="utf-8"))


def _entry_dict(e: EntrySpec) -> dict:
    return {"origin": e.origin, "links": list(e.links), "seq": e.seq, "malicious": e.malicious}


def scenario_to_dict(s: Scenario) -> dict:
    out: dict = {"version": SCHEMA_VERSION, "name": s.name}
    if s.description:
        out["description"] = s.description
    out["model"] = s.model
    out["topology"] = {
        "nodes": s.node_count,
        "edges": [list(e) for e in s.edges],
        "malicious_edges": [list(e) for e in s.malicious_edges],
    }
    if s.attacker is not None:
        a = s.attacker
        out["attacker"] = {
            "node": a.node,
            "connectivity": a.connectivity,
            "start": a.start,
            "alphabet": list(a.alphabet),
            "spoofing": a.spoofing,
            "content": a.content,
            "budget": a.budget,
            "vectors": None if a.vectors is None else list(a.vectors),
            "fake_lsdb": [_entry_dict(e) for e in a.fake_lsdb],
        }
    init: dict = {}
    if s.pair is not None:
        init["pair"] = list(s.pair)
        init["start"] = s.adjacency_start
    init["dbs"] = {str(owner): [_entry_dict(e) for e in entries] for owner, entries in s.initial_dbs}
    out["initial"] = init
    out["options"] = {
        "suppress_saturated_hellos": s.suppress_saturated_hellos,
        "urgent_origination": s.urgent_origination,
    }
    limits = {}
    if s.max_states is not None:
        limits["max_states"] = s.max_states
    if s.max_seconds is not None:
        limits["max_seconds"] = s.max_seconds
    out["limits"] = limits
    props = []
    for p in s.properties:
        d = {"name": p.name, "quantifier": p.quantifier, "predicate": p.predicate}
        if p.expect is not None:
            d["expect"] = p.expect
        if p.from_witness is not None:
            d["from_witness"] = p.from_witness
        if p.exhaust_attacker:
            d["exhaust_attacker"] = True
        props.append(d)
    out["properties"] = props
    return out


def dump_scenario(s: Scenario) -> str:
    return json.dumps(scenario_to_dict(s), indent=2) + "\n"


# ---------------------------------------------------------------- construction

def build_topology(s: Scenario) -> Topology:
    try:
        return Topology.from_edges(s.node_count, s.edges, s.malicious_edges)
    except TopologyError as exc:
        raise ScenarioError("$.topology", str(exc)) from None


def _lsdb(n: int, entries) -> Lsdb:
    try:
        return Lsdb.of(n, [e.build() for e in entries])
    except ValueError as exc:
        raise ScenarioError("$.initial.dbs", str(exc)) from None


def build_attacker_config(a: AttackerSpec) -> AttackerConfig:
    return AttackerConfig(
        node=a.node,
        connectivity=ConnectivityMode(a.connectivity),
        start=StartTime(a.start),
        alphabet=frozenset(MessageKind(k) for k in a.alphabet),
        spoofing=a.spoofing,
        content=ContentFreedom(a.content),
        budget=a.budget,
        vectors=None if a.vectors is None else frozenset(a.vectors),
    )


def build_model(s: Scenario):
    t = build_topology(s)
    n = s.node_count
    rt = None
    if s.attacker is not None:
        fake = _lsdb(n, [replace(e, malicious=True) for e in s.attacker.fake_lsdb])
        rt = new_runtime(build_attacker_config(s.attacker), fake)
    dbs = {owner: _lsdb(n, entries) for owner, entries in s.initial_dbs}
    if s.model == "net":
        initial = [dbs.get(i, Lsdb.empty(n)) for i in range(n)]
        return NetModel(t, rt, initial, s.suppress_saturated_hellos, s.urgent_origination)
    a, b = s.pair
    da, db = dbs.get(a, Lsdb.empty(n)), dbs.get(b, Lsdb.empty(n))
    if s.adjacency_start == "full":
        if not lsdb_sync(da, db):
            raise ScenarioError("$.initial.dbs", "a Full start needs synchronised databases")
        nodes = (full_node(a, b, da), full_node(b, a, db))
    else:
        nodes = (initial_node(a, b, da), initial_node(b, a, db))
    return AdjacencyModel(t, nodes, rt)


# ---------------------------------------------------------------- predicates

def compile_predicate(expr: dict, model):
    """Turn a JSON predicate into a state callable for ``model``."""
    (op, arg), = expr.items()
    is_net = isinstance(model, NetModel)
    t = model.topology
    rt = model.initial().attacker
    attacker = None if rt is None else rt.config.node

    def db(s, i):
        return s.dbs[i] if is_net else s.db_of(i)

    if op == "and":
        subs = [compile_predicate(e, model) for e in arg]
        return lambda s: all(p(s) for p in subs)
    if op == "or":
        subs = [compile_predicate(e, model) for e in arg]
        return lambda s: any(p(s) for p in subs)
    if op == "not":
        sub = compile_predicate(arg, model)
        return lambda s: not sub(s)
    if op == "implies":
        pre, post = compile_predicate(arg[0], model), compile_predicate(arg[1], model)
        return lambda s: not pre(s) or post(s)
    if op == "true":
        return lambda s: True
    if op == "false":
        return lambda s: False
    if op == "malicious":
        pairs = [(item["observer"], tuple(item["targets"])) for item in arg]
        return lambda s: all(malicious_holds(db(s, o), ts) for o, ts in pairs)
    if op == "lsdb_sync":
        pairs = [tuple(p) for p in arg]
        return lambda s: all(lsdb_sync(db(s, x), db(s, y)) for x, y in pairs)
    if op == "nstate":
        node = arg["node"]
        allowed = frozenset(_NSTATES[v] for v in arg["in"])
        return lambda s: s.nstate_of(node) in allowed
    if op == "all_full":
        return lambda s: all(n.nstate == NeighbourState.FULL for n in s.nodes)
    if op == "truthful":
        return lambda s: all_truthful(s, t, attacker)
    if op == "tainted":
        if is_net:
            return any_tainted
        return lambda s: any(e.malicious for n in s.nodes for e in n.db)
    if op == "steady":
        if is_net:
            honest = [i for i in t.nodes if i != attacker]
            return lambda s: net_steady(s, t, honest)
        from .adjacency import adjacency_steady

        return adjacency_steady
    raise ValueError(f"unknown predicate operator {op!r}")


# ---------------------------------------------------------------- evaluation

@dataclass
class PropertyReport:
    scenario: str
    name: str
    quantifier: str
    verdict: Verdict
    states: int
    seconds: float
    expect: Optional[str]
    trace: Optional[Trace]
    result: Optional[CheckResult] = field(default=None, repr=False)
    system: Any = field(default=None, repr=False)

    @property
    def matched(self) -> bool:
        return self.expect is None or self.expect == self.verdict.value


def effective_limits(s: Scenario, max_states: Optional[int] = None, max_seconds: Optional[float] = None) -> Limits:
    base = Limits()
    return Limits(
        max_states=max_states or s.max_states or base.max_states,
        max_seconds=max_seconds or s.max_seconds or base.max_seconds,
    )


def evaluate(
    s: Scenario,
    only: Optional[str] = None,
    limits: Optional[Limits] = None,
) -> list[PropertyReport]:
    """Check every property of ``s`` (or just ``only`` and what it depends on)."""
    if only is not None and only not in {p.name for p in s.properties}:
        raise ScenarioError("$.properties", f"no property named {only!r}")
    limits = limits or effective_limits(s)
    base = build_model(s)
    wanted = _closure(s, only)
    done: dict[str, PropertyReport] = {}
    out = []
    for p in s.properties:
        if p.name not in wanted:
            continue
        system = base
        if p.from_witness is not None:
            src = done[p.from_witness]
            if src.trace is None or src.verdict is not Verdict.SATISFIED:
                rep = PropertyReport(s.name, p.name, p.quantifier, Verdict.INCONCLUSIVE, 0, 0.0, p.expect, None)
                done[p.name] = rep
                out.append(rep)
                continue
            state = replay(src.system, src.trace)
            if p.exhaust_attacker and state.attacker is not None:
                state = replace(state, attacker=state.attacker.exhaust())
            system = src.system.with_initial(state)
        pred = compile_predicate(p.predicate, system)
        started = time.monotonic()
        res = check(system, Quantifier(p.quantifier), pred, limits)
        rep = PropertyReport(
            s.name, p.name, p.quantifier, res.verdict, res.states,
            time.monotonic() - started, p.expect, res.trace, res, system,
        )
        done[p.name] = rep
        out.append(rep)
    return out


def _closure(s: Scenario, only: Optional[str]) -> set[str]:
    if only is None:
        return {p.name for p in s.properties}
    by_name = {p.name: p for p in s.properties}
    need = set()
    cur: Optional[str] = only
    while cur is not None:
        need.add(cur)
        cur = by_name[cur].from_witness
    return need
