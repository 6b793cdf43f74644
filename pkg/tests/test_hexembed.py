"""Honeycomb embedding tests: structure, edge-state law, threshold."""

import json
from collections import Counter

import numpy as np
import pytest
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

import alignperc.hexembed as hexembed
from alignperc.errors import ParameterError
from alignperc.hexembed import (
    P_C_HEX,
    build_hex,
    crossing_bottlenecks,
    edge_lines,
    embedded_edge_levels,
    embedded_edge_states,
    hex_crossing_curve,
    hex_threshold_estimate,
)
from alignperc.rng import RandomSource


# ---------------------------------------------------------------------------
# structure


def test_extent2_hand_patch():
    emb = build_hex(2, 2)
    assert emb.v1 == ((0, 0, 2), (0, 1, 1), (1, 0, 1), (1, 1, 0))
    assert emb.v2 == ((0, 0, 3), (0, 1, 2), (1, 0, 2), (1, 1, 1))
    assert emb.edges == (
        ((0, 0, 2), (1, 0, 2)),
        ((0, 0, 2), (0, 1, 2)),
        ((0, 0, 2), (0, 0, 3)),
        ((0, 1, 1), (1, 1, 1)),
        ((0, 1, 1), (0, 1, 2)),
        ((1, 0, 1), (1, 1, 1)),
        ((1, 0, 1), (1, 0, 2)),
        ((1, 1, 0), (1, 1, 1)),
    )
    # the single bounded face is a hexagon
    assert len(emb.edges) - len(emb.vertices) + 1 == 1
    assert _girth(emb) == 6


def _adjacency(emb):
    index = {v: i for i, v in enumerate(emb.vertices)}
    nbrs = {i: [] for i in range(len(emb.vertices))}
    for u, v in emb.edges:
        nbrs[index[u]].append(index[v])
        nbrs[index[v]].append(index[u])
    return index, nbrs


def _girth(emb):
    # shortest cycle via BFS from every vertex
    _, nbrs = _adjacency(emb)
    best = None
    for s in nbrs:
        dist = {s: 0}
        par = {s: -1}
        queue = [s]
        while queue:
            x = queue.pop(0)
            for y in nbrs[x]:
                if y not in dist:
                    dist[y] = dist[x] + 1
                    par[y] = x
                    queue.append(y)
                elif par[x] != y and par[y] != x:
                    cyc = dist[x] + dist[y] + 1
                    if best is None or cyc < best:
                        best = cyc
    return best


def test_structure_degrees_faces_bipartite():
    emb = build_hex(4, 3)
    deg = Counter()
    for u, v in emb.edges:
        deg[u] += 1
        deg[v] += 1
    assert Counter(deg.values()) == Counter({3: 8, 2: 8, 1: 2})
    # bipartition by plane
    for u, v in emb.edges:
        assert sum(u) == 4 and sum(v) == 5
    assert _girth(emb) == 6
    # cycle-space dimension equals the hexagonal face count
    assert len(emb.edges) - len(emb.vertices) + 1 == (3 - 1) ** 2
    # every face cycle is present edge by edge
    es = set(emb.edges)
    k = 4
    for x in range(2):
        for y in range(2):
            u1 = (x, y, k - x - y)
            w1 = (x + 1, y, k - x - y)
            u2 = (x + 1, y, k - x - y - 1)
            w2 = (x + 1, y + 1, k - x - y - 1)
            u3 = (x, y + 1, k - x - y - 1)
            w3 = (x, y + 1, k - x - y)
            for a, b in ((u1, w1), (u2, w1), (u2, w2), (u3, w2), (u3, w3), (u1, w3)):
                assert (a, b) in es


def test_bulk_neighbors_and_plane_step():
    emb = build_hex(9, 5)
    es = set(emb.edges)
    u = (2, 2, 5)
    for a in range(3):
        v = (u[0] + (a == 0), u[1] + (a == 1), u[2] + (a == 2))
        assert (u, v) in es
    for u, v in emb.edges:
        diff = tuple(b - a for a, b in zip(u, v))
        assert sorted(diff) == [0, 0, 1]


@pytest.mark.parametrize("extent", [2, 3, 5, 8])
def test_each_edge_on_its_own_line(extent):
    emb = build_hex(2 * (extent - 1), extent)
    keys = edge_lines(emb)
    assert len(set(keys)) == len(emb.edges)


def test_build_validation():
    with pytest.raises(ParameterError):
        build_hex(0, 1)


# ---------------------------------------------------------------------------
# edge-state law


def test_embedded_states_trivial_lambdas():
    emb = build_hex(6, 4)
    rng = RandomSource(11).derive("triv")
    allopen = embedded_edge_states(0.4, 1.0, emb, rng.derive(0), batch=50)
    assert allopen.all()
    none = embedded_edge_states(0.4, 0.0, emb, rng.derive(1), batch=50)
    assert not none.any()


def test_marginal_is_lambda_for_every_p():
    emb = build_hex(6, 4)
    lam = 0.37
    n, chunk = 100_000, 10_000
    for tag, p in (("pone", 1.0), ("pmid", 0.45)):
        rng = RandomSource(12).derive(tag)
        counts = np.zeros(len(emb.edges), dtype=np.int64)
        for c in range(n // chunk):
            st = embedded_edge_states(p, lam, emb, rng.derive(c), batch=chunk)
            counts += st.sum(axis=0)
        sigma = np.sqrt(lam * (1 - lam) / n)
        assert np.all(np.abs(counts / n - lam) < 4.5 * sigma)
        assert abs(counts.mean() / n - lam) < 4 * sigma


def test_levels_distinct_at_p_one():
    emb = build_hex(6, 4)
    lv = embedded_edge_levels(1.0, emb, RandomSource(13).derive("lv"), batch=8)
    assert np.isfinite(lv).all()
    assert len(np.unique(lv)) == lv.size


def test_independence_battery():
    # marginal, pairwise correlation, and a runs test along the edge order
    emb = build_hex(6, 4)
    m = len(emb.edges)
    p, lam = 0.5, 0.4
    n, chunk = 100_000, 10_000
    rng = RandomSource(14).derive("battery")
    counts = np.zeros(m, dtype=np.int64)
    cross = np.zeros((m, m), dtype=np.int64)
    runs_z_sum, runs_valid = 0.0, 0
    for c in range(n // chunk):
        st = embedded_edge_states(p, lam, emb, rng.derive(c), batch=chunk)
        counts += st.sum(axis=0)
        sti = st.astype(np.int64)
        cross += sti.T @ sti
        runs = 1 + (st[:, 1:] != st[:, :-1]).sum(axis=1)
        n1 = sti.sum(axis=1).astype(np.float64)
        n0 = m - n1
        valid = (n1 > 0) & (n0 < m)
        valid &= n0 > 0
        mu = 1 + 2 * n1 * n0 / m
        var = 2 * n1 * n0 * (2 * n1 * n0 - m) / (m * m * (m - 1))
        z = (runs - mu)[valid] / np.sqrt(var[valid])
        runs_z_sum += z.sum()
        runs_valid += int(valid.sum())
    freq = counts / n
    assert np.all(np.abs(freq - lam) < 4.5 * np.sqrt(lam * (1 - lam) / n))
    denom = np.sqrt(np.outer(freq * (1 - freq), freq * (1 - freq)))
    corr = (cross / n - np.outer(freq, freq)) / denom
    off = corr[~np.eye(m, dtype=bool)]
    assert np.max(np.abs(off)) < 4.5 / np.sqrt(n)
    assert abs(runs_z_sum / np.sqrt(runs_valid)) < 4.0


# ---------------------------------------------------------------------------
# crossing and threshold


def _direct_crossing(emb, states):
    index = {v: i for i, v in enumerate(emb.vertices)}
    nv = len(emb.vertices)
    left = [i for v, i in index.items() if v[0] == 0]
    right = [i for v, i in index.items() if v[0] == emb.extent - 1]
    eu = np.array([index[u] for u, _ in emb.edges])
    ev = np.array([index[v] for _, v in emb.edges])
    out = np.zeros(states.shape[0], dtype=bool)
    for rep in range(states.shape[0]):
        sel = states[rep]
        graph = coo_matrix(
            (np.ones(int(sel.sum())), (eu[sel], ev[sel])), shape=(nv, nv)
        )
        _, comp = connected_components(graph, directed=False)
        out[rep] = bool(np.isin(comp[left], comp[right]).any())
    return out


def test_bottleneck_agrees_with_direct_crossing():
    # same derived streams -> same uniforms -> indicator must match exactly
    extent, p, lam, chunkn = 4, 0.6, 0.55, 200
    emb = build_hex(2 * (extent - 1), extent)
    rng = RandomSource(15).derive("agree")
    bott = crossing_bottlenecks(p, extent, chunkn, rng)
    chunk = hexembed._hex_chunk(extent, 6 * 6 * 10)
    direct = []
    for c in range((chunkn + chunk - 1) // chunk):
        count = min(chunk, chunkn - c * chunk)
        st = embedded_edge_states(
            p, lam, emb, rng.derive("hex-chunk", c), batch=count
        )
        direct.append(_direct_crossing(emb, st))
    assert np.array_equal(np.concatenate(direct), bott < lam)


def test_crossing_curve_monotone_and_high_lambda():
    curve = hex_crossing_curve(
        0.7, 16, 800, RandomSource(16).derive("curve"), (0.3, 0.5, 0.65, 0.8, 0.9)
    )
    probs = [q for _, q in curve]
    assert all(0 <= q <= 1 for q in probs)
    assert all(a <= b for a, b in zip(probs, probs[1:]))
    assert probs[-1] > 0.99


def test_threshold_near_reference_and_p_invariant():
    est1 = hex_threshold_estimate(1.0, 16, 1500, RandomSource(17).derive("tp1"))
    assert abs(est1.lambda_hat - P_C_HEX) < 0.03
    assert est1.ci_low <= est1.lambda_hat <= est1.ci_high
    est2 = hex_threshold_estimate(0.35, 16, 1500, RandomSource(17).derive("tp2"))
    assert abs(est2.lambda_hat - P_C_HEX) < 0.03
    assert est1.ci_low <= est2.ci_high and est2.ci_low <= est1.ci_high


def test_threshold_thread_determinism(monkeypatch):
    outs = []
    for threads in ("1", "8"):
        monkeypatch.setenv("ALIGNPERC_THREADS", threads)
        est = hex_threshold_estimate(0.5, 8, 400, RandomSource(18).derive("det"))
        outs.append(json.dumps(est.to_dict(), sort_keys=True))
    assert outs[0] == outs[1]


def test_threshold_validation_and_bracketing(monkeypatch):
    rng = RandomSource(19)
    with pytest.raises(ParameterError):
        crossing_bottlenecks(0.0, 8, 10, rng)
    with pytest.raises(ParameterError):
        crossing_bottlenecks(0.5, 8, 0, rng)
    monkeypatch.setattr(
        hexembed, "crossing_bottlenecks", lambda *a, **k: np.full(100, np.inf)
    )
    with pytest.raises(ParameterError, match="bracket"):
        hex_threshold_estimate(0.5, 8, 100, rng)
