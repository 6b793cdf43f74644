"""Connectivity analytics over edge configurations.

Union-find components with displacement tracking (wrap detection on tori),
box crossings, one-arm connection events, and for d=2 the planar dual:
circuit absence around a box is decided by a dual-path search, with a
primal winding-number search kept as a reference implementation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from alignperc.errors import ParameterError
from alignperc.lattice import LatticeSpec
from alignperc.model import EdgeConfig

DUAL_OFFSET = (0.5, 0.5)


# ---------------------------------------------------------------------------
# union-find kernel


@njit(cache=True)
def _uf_find(parent, offsets, i, path):
    depth = 0
    r = i
    while parent[r] != r:
        path[depth] = r
        depth += 1
        r = parent[r]
    # second pass: point every node at the root, accumulating displacements
    for k in range(depth - 1, -1, -1):
        node = path[k]
        par = parent[node]
        if par != r:
            for a in range(offsets.shape[1]):
                offsets[node, a] += offsets[par, a]
        parent[node] = r
    return r


@njit(cache=True)
def _uf_components(n_sites, d, ea, eb, disp, parent, offsets, sizes, wraps):
    path = np.empty(64, dtype=np.int64)
    for k in range(ea.shape[0]):
        a = ea[k]
        b = eb[k]
        ra = _uf_find(parent, offsets, a, path)
        rb = _uf_find(parent, offsets, b, path)
        if ra == rb:
            for ax in range(d):
                gap = offsets[a, ax] + disp[k, ax] - offsets[b, ax]
                if gap != 0:
                    wraps[ax] = True
        else:
            if sizes[ra] < sizes[rb]:
                ra, rb = rb, ra
                a, b = b, a
                neg = True
            else:
                neg = False
            # attach rb beneath ra; offsets[rb] = pos(rb) - pos(ra)
            for ax in range(d):
                step = -disp[k, ax] if neg else disp[k, ax]
                offsets[rb, ax] = offsets[a, ax] + step - offsets[b, ax]
            parent[rb] = ra
            sizes[ra] += sizes[rb]
    for i in range(n_sites):
        _uf_find(parent, offsets, i, path)


@dataclass(frozen=True)
class ClusterReport:
    """Open-edge connectivity summary of one configuration."""

    spec: LatticeSpec
    labels: np.ndarray
    roots: np.ndarray
    component_sizes: np.ndarray
    wraps: tuple[bool, ...]
    crosses: tuple[bool, ...]

    @property
    def n_components(self) -> int:
        return len(self.roots)

    @property
    def largest_size(self) -> int:
        return int(self.component_sizes.max(initial=0))

    def size_of(self, site: tuple[int, ...]) -> int:
        label = self.labels[site]
        return int(self.component_sizes[np.searchsorted(self.roots, label)])


def _edge_lists(edges: EdgeConfig):
    spec = edges.spec
    d = spec.d
    torus = spec.boundary == "torus"
    blocks_a = []
    blocks_b = []
    blocks_disp = []
    for axis in range(d):
        anchors = np.argwhere(edges.open[axis])
        if anchors.size == 0:
            continue
        partner = anchors.copy()
        partner[:, axis] += 1
        # displacements live in the universal cover: always one unit step,
        # so a wrapping cycle accumulates a nonzero multiple of the extent
        disp = np.zeros_like(anchors)
        disp[:, axis] = 1
        if torus:
            wrap = partner[:, axis] == spec.extent[axis]
            partner[wrap, axis] = 0
        blocks_a.append(np.ravel_multi_index(anchors.T, spec.extent))
        blocks_b.append(np.ravel_multi_index(partner.T, spec.extent))
        blocks_disp.append(disp)
    if blocks_a:
        ea = np.concatenate(blocks_a).astype(np.int64)
        eb = np.concatenate(blocks_b).astype(np.int64)
        disp = np.concatenate(blocks_disp).astype(np.int64)
    else:
        ea = np.empty(0, dtype=np.int64)
        eb = np.empty(0, dtype=np.int64)
        disp = np.empty((0, d), dtype=np.int64)
    return ea, eb, disp


def components(edges: EdgeConfig) -> ClusterReport:
    """Label connected components of the open graph.

    On a torus a component wraps an axis iff some cycle has nonzero net
    coordinate displacement there; on a box a component crosses an axis iff
    it holds sites on both opposite faces.
    """
    spec = edges.spec
    n = spec.n_sites
    ea, eb, disp = _edge_lists(edges)
    parent = np.arange(n, dtype=np.int64)
    offsets = np.zeros((n, spec.d), dtype=np.int64)
    sizes = np.ones(n, dtype=np.int64)
    wraps = np.zeros(spec.d, dtype=np.bool_)
    _uf_components(n, spec.d, ea, eb, disp, parent, offsets, sizes, wraps)
    labels = parent.reshape(spec.extent)
    roots, counts = np.unique(parent, return_counts=True)
    crosses = []
    if spec.boundary != "torus":
        for axis in range(spec.d):
            lo = np.take(labels, 0, axis=axis).ravel()
            hi = np.take(labels, spec.extent[axis] - 1, axis=axis).ravel()
            crosses.append(bool(np.intersect1d(lo, hi).size > 0))
    else:
        crosses = [False] * spec.d
    return ClusterReport(
        spec,
        labels,
        roots,
        counts,
        tuple(bool(w) for w in wraps),
        tuple(crosses),
    )


def crossing(edges: EdgeConfig, axis: int) -> bool:
    """Box: open path joins the two opposite faces; torus: wrap flag."""
    spec = edges.spec
    if not (0 <= axis < spec.d):
        raise ParameterError(f"axis {axis} out of range")
    report = components(edges)
    if spec.boundary == "torus":
        return report.wraps[axis]
    return report.crosses[axis]


# ---------------------------------------------------------------------------
# windows and radial events


def _extract_window(edges: EdgeConfig, x: tuple[int, ...], radius: int):
    """Copy open arrays for the box of given radius around x, box semantics."""
    spec = edges.spec
    side = 2 * radius + 1
    lo = [c - radius for c in x]
    if spec.boundary == "torus":
        out = []
        for axis in range(spec.d):
            arr = edges.open[axis]
            for a, l in enumerate(lo):
                if spec.extent[a] < side:
                    raise ParameterError("window exceeds torus extent")
                idx = (np.arange(side) + l) % spec.extent[a]
                arr = np.take(arr, idx, axis=a)
            out.append(arr.copy())
    else:
        for a, l in enumerate(lo):
            if l < 0 or l + side > spec.extent[a]:
                raise ParameterError("window exceeds the geometry")
        sl = tuple(slice(l, l + side) for l in lo)
        out = [edges.open[axis][sl].copy() for axis in range(spec.d)]
    # cut edges pointing out of the window
    for axis in range(spec.d):
        cut = [slice(None)] * spec.d
        cut[axis] = side - 1
        out[axis][tuple(cut)] = False
    return out


def _window_report(open_arrays, d, extent) -> np.ndarray:
    spec = LatticeSpec(d, extent, "closed")
    cfg = EdgeConfig(spec, tuple(open_arrays))
    return components(cfg).labels


def one_arm(edges: EdgeConfig, x: tuple[int, ...], L: float) -> bool:
    """Does B(x, floor(L)) reach the shell at radius floor(10 L)?

    Only open edges with both endpoints inside B(x, floor(10 L)) count.
    """
    if L <= 0:
        raise ParameterError("L must be positive")
    r1 = int(np.floor(L))
    r2 = int(np.floor(10 * L))
    if r2 <= r1:
        raise ParameterError("outer radius must exceed inner radius")
    spec = edges.spec
    window = _extract_window(edges, x, r2)
    side = 2 * r2 + 1
    labels = _window_report(window, spec.d, (side,) * spec.d)
    grids = np.meshgrid(*[np.abs(np.arange(side) - r2) for _ in range(spec.d)], indexing="ij")
    radius = np.maximum.reduce(grids)
    inner_labels = np.unique(labels[radius <= r1])
    shell_labels = np.unique(labels[radius == r2])
    return bool(np.intersect1d(inner_labels, shell_labels).size > 0)


# ---------------------------------------------------------------------------
# planar dual (d=2)


@dataclass(frozen=True)
class DualConfig:
    """Dual edge states: e* is open exactly when the primal e is open."""

    spec: LatticeSpec
    open: tuple[np.ndarray, np.ndarray]
    offset: tuple[float, float] = DUAL_OFFSET

    @staticmethod
    def dual_of(site: tuple[int, int], axis: int):
        """Dual edge (anchor vertex, axis) crossing the given primal edge."""
        i, j = site
        if axis == 0:
            return (i, j - 1), 1
        return (i - 1, j), 0

    @staticmethod
    def primal_of(anchor: tuple[int, int], axis: int):
        a, b = anchor
        if axis == 1:
            return (a, b + 1), 0
        return (a + 1, b), 1

    def dual_open(self, anchor: tuple[int, int], axis: int) -> bool:
        site, primal_axis = self.primal_of(anchor, axis)
        return bool(self.open[primal_axis][site])


def dual_config(edges: EdgeConfig) -> DualConfig:
    """Planar dual of a d=2 configuration; states carried over unchanged."""
    if edges.spec.d != 2:
        raise ParameterError("the planar dual requires d=2")
    return DualConfig(edges.spec, (edges.open[0].copy(), edges.open[1].copy()))


@njit(cache=True)
def _dual_escape(open0, open1, r1, r2):
    """BFS over plaquettes: from the hole around the center to past the
    outer shell, stepping only across primal edges that are not open.

    Plaquette (pi, pj) has center (pi - r2 - 0.5, pj - r2 - 0.5) relative
    to the window center; grid side is 2 r2 + 2.
    """
    G = 2 * r2 + 2
    visited = np.zeros((G, G), dtype=np.bool_)
    qi = np.empty(G * G, dtype=np.int64)
    qj = np.empty(G * G, dtype=np.int64)
    head = 0
    tail = 0
    lo = r2 - r1
    hi = r2 + r1 + 1
    for pi in range(lo, hi + 1):
        for pj in range(lo, hi + 1):
            visited[pi, pj] = True
            qi[tail] = pi
            qj[tail] = pj
            tail += 1
    while head < tail:
        pi = qi[head]
        pj = qj[head]
        head += 1
        # right
        if pi + 1 < G and not visited[pi + 1, pj] and not open1[pi, pj - 1]:
            if pi + 1 == G - 1:
                return True
            visited[pi + 1, pj] = True
            qi[tail] = pi + 1
            qj[tail] = pj
            tail += 1
        # left
        if pi - 1 >= 0 and not visited[pi - 1, pj] and not open1[pi - 1, pj - 1]:
            if pi - 1 == 0:
                return True
            visited[pi - 1, pj] = True
            qi[tail] = pi - 1
            qj[tail] = pj
            tail += 1
        # up
        if pj + 1 < G and not visited[pi, pj + 1] and not open0[pi - 1, pj]:
            if pj + 1 == G - 1:
                return True
            visited[pi, pj + 1] = True
            qi[tail] = pi
            qj[tail] = pj + 1
            tail += 1
        # down
        if pj - 1 >= 0 and not visited[pi, pj - 1] and not open0[pi - 1, pj - 1]:
            if pj - 1 == 0:
                return True
            visited[pi, pj - 1] = True
            qi[tail] = pi
            qj[tail] = pj - 1
            tail += 1
    return False


def circuit_absent_radii(edges: EdgeConfig, x: tuple[int, int], r1: int, r2: int) -> bool:
    """No open circuit with sites at radius in [r1+1, r2] surrounds B(x, r1).

    Decided by the dual path criterion: absence holds iff closed edges let a
    dual path escape from the plaquettes around B(x, r1) to the plaquettes
    beyond radius r2.
    """
    if edges.spec.d != 2:
        raise ParameterError("circuit events require d=2")
    if not 0 <= r1 < r2:
        raise ParameterError("need 0 <= inner radius < outer radius")
    window = _extract_window(edges, x, r2)
    return bool(_dual_escape(window[0], window[1], r1, r2))


def annulus_circuit_absent(edges: EdgeConfig, x: tuple[int, int], L: float) -> bool:
    """True iff no open circuit in the annulus of radii L, 10L surrounds x."""
    if L <= 0:
        raise ParameterError("L must be positive")
    r1 = int(np.floor(L))
    r2 = int(np.floor(10 * L))
    return circuit_absent_radii(edges, x, r1, r2)


def circuit_exists_primal(edges: EdgeConfig, x: tuple[int, int], r1: int, r2: int) -> bool:
    """Reference search for an open circuit surrounding B(x, r1).

    Union-find over open edges whose endpoints both have radius in
    [r1+1, r2] around x, carrying a winding offset per site: the offset
    counts signed crossings of the ray going right from x along the path to
    the union-find root.  A cycle whose offsets mismatch has nonzero
    winding, and then some simple open circuit surrounds the box.
    """
    if edges.spec.d != 2:
        raise ParameterError("circuit events require d=2")
    return _circuit_exists_window(_extract_window(edges, x, r2), r1, r2)


def _circuit_exists_window(window, r1: int, r2: int) -> bool:
    side = 2 * r2 + 1

    # offsets are winding contributions: off[s] is the signed count of ray
    # crossings along the stored step from s to parent[s]; find_root sums
    # them without path compression (windows here are small)
    parent: dict = {}
    off: dict = {}

    def find_root(s):
        total = 0
        while parent[s] != s:
            total += off[s]
            s = parent[s]
        return s, total

    for i in range(side):
        for j in range(side):
            if r1 + 1 <= max(abs(i - r2), abs(j - r2)) <= r2:
                parent[(i, j)] = (i, j)
                off[(i, j)] = 0

    found = False
    for axis in range(2):
        for i, j in np.argwhere(window[axis]):
            a = (int(i), int(j))
            b = (a[0] + 1, a[1]) if axis == 0 else (a[0], a[1] + 1)
            if a not in parent or b not in parent:
                continue
            # the ray goes right from the center at height r2 + 1/2, so
            # exactly the vertical edges anchored at (i, r2) with i >= r2+1
            # cross it; traversing one upward counts +1
            delta = 1 if axis == 1 and a[1] == r2 and a[0] >= r2 + 1 else 0
            ra, wa = find_root(a)
            rb, wb = find_root(b)
            if ra == rb:
                if wb + delta - wa != 0:
                    found = True
            else:
                parent[rb] = ra
                off[rb] = wa - wb - delta
    return found


def circuit_exists_annulus(edges: EdgeConfig, x: tuple[int, int], L: float) -> bool:
    """Complement of annulus_circuit_absent via the primal reference search."""
    r1 = int(np.floor(L))
    r2 = int(np.floor(10 * L))
    return circuit_exists_primal(edges, x, r1, r2)
