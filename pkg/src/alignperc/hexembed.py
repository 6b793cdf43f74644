"""Honeycomb embedding between adjacent diagonal planes of Z^3.

The sites of the planes x+y+z = k and x+y+z = k+1, joined by the Z^3
bonds running between them, form a patch of the hexagonal lattice.  A
canonical line meets each plane in exactly one site, so every embedding
edge lies on its own line and is covered by its own feasible pair; under
the alignment measure the embedding edges are therefore i.i.d.
Bernoulli(lambda) regardless of the site density p.  Critical behaviour
on the patch then pins the same lambda threshold for every p.

For d > 3 the same construction applies verbatim on the slice
x_4 = ... = x_d = 0, so only the d = 3 patch is built here.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.stats import binom

from alignperc.errors import ParameterError
from alignperc.lattice import LatticeSpec, alignperc_thread_count
from alignperc.model import (
    edge_arrays_from_uniforms,
    edge_levels_from_uniforms,
    pair_uniforms,
    site_uniforms,
)
from alignperc.rng import RandomSource

P_C_HEX = 1.0 - 2.0 * math.sin(math.pi / 18.0)


@dataclass(frozen=True)
class HexEmbedding:
    """Honeycomb patch: vertices of both planes plus the bonds between.

    vertices lists the lower plane (sum k) first, then the upper plane
    (sum k+1); edges hold coordinate pairs (u, v) with v = u + e_a.
    """

    k: int
    extent: int
    vertices: tuple[tuple[int, int, int], ...]
    edges: tuple[tuple[tuple[int, int, int], tuple[int, int, int]], ...]

    @property
    def v1(self) -> tuple[tuple[int, int, int], ...]:
        return self.vertices[: self.extent**2]

    @property
    def v2(self) -> tuple[tuple[int, int, int], ...]:
        return self.vertices[self.extent**2 :]


def build_hex(k: int, extent: int) -> HexEmbedding:
    """Rhombic honeycomb patch between the planes x+y+z = k and k+1.

    The lower plane holds (x, y, k-x-y) and the upper (x, y, k+1-x-y)
    for 0 <= x, y < extent; each lower site joins the upper plane along
    +e3 and, inside the rhombus, along +e1 and +e2.
    """
    if extent < 2:
        raise ParameterError("extent must be at least 2")
    v1 = [(x, y, k - x - y) for x in range(extent) for y in range(extent)]
    v2 = [(x, y, k + 1 - x - y) for x in range(extent) for y in range(extent)]
    upper = set(v2)
    edges = []
    for u in v1:
        for a in range(3):
            v = (u[0] + (a == 0), u[1] + (a == 1), u[2] + (a == 2))
            if v in upper:
                edges.append((u, v))
    return HexEmbedding(k, extent, tuple(v1) + tuple(v2), tuple(edges))


def edge_lines(emb: HexEmbedding) -> list[tuple[int, int, int]]:
    """(axis, transverse coords) of the line carrying each edge.

    Distinct per edge by construction, which is what makes the edge
    states independent.
    """
    keys = []
    for u, v in emb.edges:
        axis = next(a for a in range(3) if v[a] != u[a])
        keys.append((axis,) + tuple(c for a, c in enumerate(u) if a != axis))
    return keys


def _bounding_spec(emb: HexEmbedding) -> tuple[LatticeSpec, np.ndarray]:
    """Occupied-frame box holding the patch strictly in its interior."""
    pts = np.array(emb.vertices, dtype=np.int64)
    lo = pts.min(axis=0) - 1
    hi = pts.max(axis=0) + 1
    extent = tuple(int(h - l + 1) for l, h in zip(lo, hi))
    return LatticeSpec(3, extent, "occupied_frame"), lo


def _edge_index_arrays(emb: HexEmbedding, lo: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    base = np.array([e[0] for e in emb.edges], dtype=np.int64)
    head = np.array([e[1] for e in emb.edges], dtype=np.int64)
    axis = np.argmax(head - base, axis=1)
    return axis, base - lo


def _gather(per_axis: tuple[np.ndarray, ...], axis: np.ndarray, base: np.ndarray, dtype) -> np.ndarray:
    lead = per_axis[0].shape[: per_axis[0].ndim - 3]
    out = np.empty(lead + (len(axis),), dtype=dtype)
    for a in range(3):
        sel = axis == a
        out[..., sel] = per_axis[a][..., base[sel, 0], base[sel, 1], base[sel, 2]]
    return out


def embedded_edge_states(
    p: float,
    lam: float,
    emb: HexEmbedding,
    rng: RandomSource,
    batch: int | None = None,
) -> np.ndarray:
    """Open/closed states of the embedding edges under the full model.

    Samples the alignment model on a bounding box with occupied-frame
    boundary and reads each embedding edge off its covering pair; the
    patch sits strictly inside, so the finite box reproduces the
    infinite-volume law of these edges exactly.
    """
    spec, lo = _bounding_spec(emb)
    axis, base = _edge_index_arrays(emb, lo)
    u_sites = site_uniforms(spec, rng, batch=batch)
    u_pairs = pair_uniforms(spec, rng, batch=batch)
    opens = edge_arrays_from_uniforms(spec, p, lam, u_sites, u_pairs)
    return _gather(opens, axis, base, bool)


def embedded_edge_levels(
    p: float,
    emb: HexEmbedding,
    rng: RandomSource,
    batch: int | None = None,
) -> np.ndarray:
    """Activation level of each embedding edge (open at lambda iff < lambda).

    One coupled draw covers the whole lambda axis at once.
    """
    spec, lo = _bounding_spec(emb)
    axis, base = _edge_index_arrays(emb, lo)
    u_sites = site_uniforms(spec, rng, batch=batch)
    u_pairs = pair_uniforms(spec, rng, batch=batch)
    levels = edge_levels_from_uniforms(spec, p, u_sites, u_pairs)
    out = _gather(levels, axis, base, np.float64)
    if not np.isfinite(out).all():
        raise AssertionError("embedding edge without covering pair; patch not interior")
    return out


# ---------------------------------------------------------------------------
# rhombus crossing and threshold


@njit(cache=True)
def _bottleneck_batch(levels, order, eu, ev, left_ids, right_ids, nv, out):
    """First level at which the two faces connect, per replicate.

    Edges enter in increasing level order; the recorded level is the
    bottleneck (max edge level on the best crossing path).
    """
    parent = np.empty(nv + 2, dtype=np.int64)
    lnode = nv
    rnode = nv + 1
    for rep in range(levels.shape[0]):
        for i in range(nv + 2):
            parent[i] = i
        for t in range(left_ids.shape[0]):
            a = left_ids[t]
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            parent[a] = lnode
        for t in range(right_ids.shape[0]):
            a = right_ids[t]
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            if a != rnode:
                parent[a] = rnode
        val = np.inf
        for s in range(order.shape[1]):
            e = order[rep, s]
            a = eu[e]
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            b = ev[e]
            while parent[b] != b:
                parent[b] = parent[parent[b]]
                b = parent[b]
            if a != b:
                parent[a] = b
            x = lnode
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            y = rnode
            while parent[y] != y:
                parent[y] = parent[parent[y]]
                y = parent[y]
            if x == y:
                val = levels[rep, e]
                break
        out[rep] = val


def _crossing_arrays(emb: HexEmbedding):
    index = {v: i for i, v in enumerate(emb.vertices)}
    eu = np.array([index[u] for u, _ in emb.edges], dtype=np.int64)
    ev = np.array([index[v] for _, v in emb.edges], dtype=np.int64)
    left = np.array([i for v, i in index.items() if v[0] == 0], dtype=np.int64)
    right = np.array(
        [i for v, i in index.items() if v[0] == emb.extent - 1], dtype=np.int64
    )
    return eu, ev, left, right


def _hex_chunk(extent: int, n_sites: int) -> int:
    # deterministic in the geometry alone, so thread count cannot move
    # chunk boundaries; small chunks keep d=3 batches within memory
    return int(np.clip(2**20 // n_sites, 2, 2048))


def crossing_bottlenecks(p: float, extent: int, n: int, rng: RandomSource) -> np.ndarray:
    """Coupled face-to-face crossing levels of the rhombic patch.

    The empirical crossing probability at lambda is the fraction of
    replicates whose bottleneck lies below lambda; it is non-decreasing
    in lambda by construction.
    """
    if not (0 < p <= 1):
        raise ParameterError("p must lie in (0, 1]")
    if n <= 0:
        raise ParameterError("n must be positive")
    emb = build_hex(2 * (extent - 1), extent)
    spec, lo = _bounding_spec(emb)
    axis, base = _edge_index_arrays(emb, lo)
    eu, ev, left, right = _crossing_arrays(emb)
    nv = len(emb.vertices)
    chunk = _hex_chunk(extent, int(np.prod(spec.extent)))
    n_chunks = (n + chunk - 1) // chunk

    def run_chunk(c: int) -> np.ndarray:
        count = min(chunk, n - c * chunk)
        crng = rng.derive("hex-chunk", c)
        u_sites = site_uniforms(spec, crng, batch=count)
        u_pairs = pair_uniforms(spec, crng, batch=count)
        levels = edge_levels_from_uniforms(spec, p, u_sites, u_pairs)
        lev = _gather(levels, axis, base, np.float64)
        order = np.argsort(lev, axis=1)
        out = np.empty(count, dtype=np.float64)
        _bottleneck_batch(lev, order, eu, ev, left, right, nv, out)
        return out

    threads = alignperc_thread_count()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run_chunk, range(n_chunks)))
    else:
        parts = [run_chunk(c) for c in range(n_chunks)]
    return np.concatenate(parts)


def hex_crossing_curve(
    p: float,
    extent: int,
    n: int,
    rng: RandomSource,
    lam_values: tuple[float, ...],
) -> list[tuple[float, float]]:
    """Empirical crossing probability at each lambda, from one coupled pass."""
    bott = crossing_bottlenecks(p, extent, n, rng)
    return [(float(lam), float(np.mean(bott < lam))) for lam in lam_values]


@dataclass(frozen=True)
class HexThreshold:
    p: float
    extent: int
    n: int
    lambda_hat: float
    ci_low: float
    ci_high: float
    master: int

    def to_dict(self) -> dict:
        return {
            "schema": "alignperc.hex_threshold.v1",
            "p": self.p,
            "extent": self.extent,
            "n": self.n,
            "lambda_hat": self.lambda_hat,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "master": self.master,
        }


def threshold_from_bottlenecks(
    bott: np.ndarray,
    p: float,
    extent: int,
    master: int,
    tol: float = 1e-4,
) -> HexThreshold:
    """Threshold summary computed from an existing bottleneck sample.

    Bisects the coupled empirical crossing curve (monotone in lambda by
    the shared-bottleneck coupling); the CI is the distribution-free
    order-statistic interval for the median of the bottleneck law.
    """
    n = len(bott)
    if float(np.mean(bott < 1.0)) < 0.5:
        raise ParameterError(
            "crossing probability at lambda = 1 is below one half; "
            "the threshold cannot be bracketed at this extent"
        )
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if float(np.mean(bott < mid)) < 0.5:
            lo = mid
        else:
            hi = mid
    srt = np.sort(bott)
    rank = int(binom.ppf(0.025, n, 0.5))
    ci_low = float(srt[max(rank - 1, 0)])
    ci_high = float(srt[min(n - rank, n - 1)])
    return HexThreshold(
        float(p), extent, n, 0.5 * (lo + hi), ci_low, ci_high, master
    )


def hex_threshold_estimate(
    p: float,
    extent: int,
    n: int,
    rng: RandomSource,
    tol: float = 1e-4,
) -> HexThreshold:
    """Lambda at which the rhombus crossing probability passes one half."""
    bott = crossing_bottlenecks(p, extent, n, rng)
    return threshold_from_bottlenecks(bott, p, extent, rng.master, tol)
