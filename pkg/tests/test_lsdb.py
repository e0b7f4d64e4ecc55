from itertools import permutations

import pytest
from hypothesis import given, strategies as st

from ospfmc.lsdb import (
    SEQ_MAX,
    InstallOutcome,
    LsaEntry,
    Lsdb,
    RouteKind,
    entry,
    install,
    lsdb_sync,
    malicious_holds,
    realized_path,
    shortest_route,
)

N = 5


@st.composite
def entries(draw, n=N):
    origin = draw(st.integers(0, n - 1))
    links = draw(st.frozensets(st.integers(0, n - 1).filter(lambda v: v != origin)))
    return LsaEntry(origin, links, draw(st.integers(0, SEQ_MAX)), draw(st.booleans()))


@st.composite
def databases(draw, n=N):
    db = Lsdb.empty(n)
    for e in draw(st.lists(entries(n), max_size=8)):
        db = db.put(e)
    return db


def brute_force_shortest(db: Lsdb, src: int, dst: int):
    """Every simple path in the advertised graph; the lexicographically smallest among the shortest."""
    n = len(db.entries)
    usable = set()
    for e in db:
        for v in e.links:
            usable.add(frozenset((e.origin, v)))
    best = None
    others = [v for v in range(n) if v not in (src, dst)]
    for k in range(len(others) + 1):
        for mid in permutations(others, k):
            path = [src, *mid, dst]
            if all(frozenset(p) in usable for p in zip(path, path[1:])):
                if best is None or (len(path), path) < (len(best), best):
                    best = path
    return best


class TestEntry:
    def test_rejects_self_link(self):
        with pytest.raises(ValueError):
            entry(1, {1})

    def test_rejects_seq_overflow(self):
        with pytest.raises(ValueError):
            entry(1, {0}, SEQ_MAX + 1)

    def test_rejects_duplicate_origin(self):
        with pytest.raises(ValueError):
            Lsdb.of(3, [entry(1, {0}), entry(1, {2})])


class TestInstall:
    def test_into_empty(self):
        db, out = install(Lsdb.empty(3), entry(1, {0}, 0))
        assert out is InstallOutcome.NEWER
        assert db.get(1) == entry(1, {0}, 0)

    def test_stale_rejected(self):
        db = Lsdb.of(3, [entry(1, {0}, 2)])
        db2, out = install(db, entry(1, {0}, 1))
        assert out is InstallOutcome.OLDER and db2 == db

    def test_duplicate(self):
        db = Lsdb.of(3, [entry(1, {0}, 1)])
        db2, out = install(db, entry(1, {0}, 1))
        assert out is InstallOutcome.DUPLICATE and db2 == db

    def test_newer_malicious_replaces(self):
        db = Lsdb.of(3, [entry(1, {0}, 1)])
        db2, out = install(db, entry(1, {0, 2}, 2, malicious=True))
        assert out is InstallOutcome.NEWER
        assert malicious_holds(db2, {1})

    @given(st.lists(entries(), max_size=20))
    def test_monotone_in_seq(self, offered):
        db = Lsdb.empty(N)
        for e in offered:
            db, _ = install(db, e)
        for origin in range(N):
            seqs = [e.seq for e in offered if e.origin == origin]
            stored = db.get(origin)
            if seqs:
                assert stored.seq == max(seqs)
            else:
                assert stored is None


class TestSync:
    def test_empty(self):
        assert lsdb_sync(Lsdb.empty(3), Lsdb.empty(3))

    def test_asymmetric_knowledge(self):
        assert not lsdb_sync(Lsdb.of(3, [entry(1, {0}, 1)]), Lsdb.empty(3))

    def test_ignores_taint(self):
        a = Lsdb.of(3, [entry(1, {0}, 1)])
        b = Lsdb.of(3, [entry(1, {0}, 1, malicious=True)])
        assert lsdb_sync(a, b)

    @given(databases(), databases(), databases())
    def test_equivalence_relation(self, a, b, c):
        assert lsdb_sync(a, a)
        assert lsdb_sync(a, b) == lsdb_sync(b, a)
        if lsdb_sync(a, b) and lsdb_sync(b, c):
            assert lsdb_sync(a, c)


class TestMaliciousHolds:
    def test_empty_targets(self):
        assert malicious_holds(Lsdb.empty(3), set())

    def test_missing_entry(self):
        assert not malicious_holds(Lsdb.empty(3), {2})

    def test_untainted_entry(self):
        assert not malicious_holds(Lsdb.of(3, [entry(2, {0})]), {2})


class TestShortestRoute:
    def test_direct(self):
        db = Lsdb.of(3, [entry(0, {1})])
        assert shortest_route(db, 0, 1) == [0, 1]

    def test_unreachable(self):
        db = Lsdb.of(3, [entry(0, {1})])
        assert shortest_route(db, 0, 2) is None

    def test_src_equals_dst(self):
        with pytest.raises(ValueError):
            shortest_route(Lsdb.empty(2), 0, 0)

    def test_either_endpoint_suffices(self):
        db = Lsdb.of(3, [entry(2, {1}), entry(0, {1})])
        assert shortest_route(db, 0, 2) == [0, 1, 2]

    def test_poisoned_suboptimal(self):
        # victim's view on topology (b) once the fake 1-3 link is installed
        db = Lsdb.of(4, [
            entry(0, {1, 2}, 1), entry(1, {0, 2, 3}, 3, True),
            entry(2, {0, 1, 3}, 2), entry(3, {1, 2}, 2, True),
        ])
        assert shortest_route(db, 0, 3) == [0, 1, 3]

    @given(databases(), st.integers(0, N - 1), st.integers(0, N - 1))
    def test_matches_brute_force(self, db, src, dst):
        if src == dst:
            return
        assert shortest_route(db, src, dst) == brute_force_shortest(db, src, dst)


class TestRealizedPath:
    def test_consistent_line(self):
        db = Lsdb.of(3, [entry(0, {1}), entry(1, {0, 2}), entry(2, {1})])
        out = realized_path([db] * 3, 0, 2, 5)
        assert out.kind is RouteKind.DELIVERED and out.path == (0, 1, 2)

    def test_suboptimal_detour(self):
        truth = [entry(0, {1, 2}, 1), entry(1, {0, 2}, 1), entry(2, {0, 1, 3}, 1), entry(3, {2}, 1)]
        honest = Lsdb.of(4, truth)
        victim = honest.put(entry(1, {0, 2, 3}, 2, True)).put(entry(3, {1, 2}, 2, True))
        out = realized_path([victim, honest, honest, honest], 0, 3, 8)
        assert out.kind is RouteKind.DELIVERED
        assert out.path == (0, 1, 2, 3) and out.hops == 3
        assert len(shortest_route(honest, 0, 3)) - 1 == 2

    def test_blackhole_drops(self):
        truth = [entry(0, {1, 3}, 1), entry(1, {0, 2, 3}, 1), entry(2, {1}, 1), entry(3, {0, 1}, 1)]
        honest = Lsdb.of(4, truth)
        victim = (honest.put(entry(1, {0, 3}, 2, True)).put(entry(2, {3}, 2, True))
                  .put(entry(3, {0, 1, 2}, 2, True)))
        out = realized_path([victim, honest, honest, honest], 0, 2, 8, blackhole=3)
        assert out.kind is RouteKind.DROPPED and out.path == (0, 3)

    def test_loop_detected(self):
        # 0 reaches 2 via 1, while 1 believes 2 hangs off 0
        a = Lsdb.of(3, [entry(0, {1}), entry(1, {0, 2})])
        b = Lsdb.of(3, [entry(0, {1, 2}), entry(1, {0})])
        out = realized_path([a, b, a], 0, 2, 8)
        assert out.kind is RouteKind.LOOP and out.path == (0, 1, 0)

    def test_hop_limit_validated(self):
        with pytest.raises(ValueError):
            realized_path([Lsdb.empty(2)] * 2, 0, 1, 0)

    @given(databases(), st.integers(0, N - 1), st.integers(0, N - 1))
    def test_identical_views_follow_shortest_route(self, db, src, dst):
        if src == dst:
            return
        route = shortest_route(db, src, dst)
        out = realized_path([db] * N, src, dst, N)
        if route is None:
            assert out.kind is RouteKind.DROPPED
        else:
            assert out.kind is RouteKind.DELIVERED and list(out.path) == route
