"""Core sampling pipeline for the alignment percolation model.

The model has two layers of randomness. First every site of the region is
occupied independently with probability p. On each axis line the occupied
sites cut the line into feasible pairs: maximal runs of edges between two
consecutive occupied sites (with vacant interior). Second, every feasible
pair is declared open independently with probability lambda, and an edge
is open exactly when the unique pair covering it is open. Edges not
covered by any pair (possible on non-periodic boundaries, or on an empty
torus line) are closed.

Pair states are keyed by the pair's anchor, the occupied site that starts
it along its line (for the wrap-around pair of a cyclic line this is the
last occupied site). Distinct pairs on a line have distinct anchors, so
drawing one uniform per (axis, site) cell and reading it at the anchor
yields independent pair states. This keying is what makes the fast
vectorized sampler below agree sample-for-sample with the explicit
segmentation pipeline, and it gives monotone couplings in lambda for
free: a pair is open at level lambda exactly when its uniform is below
lambda.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .lattice import LatticeSpec
from .rng import RandomSource

__all__ = [
    "SiteConfig",
    "FeasiblePair",
    "LineSegmentation",
    "PairStates",
    "EdgeConfig",
    "sample_sites",
    "sample_sites_sparse",
    "extract_pairs",
    "assign_pair_states",
    "assign_pair_states_from_uniforms",
    "sample_one_choice",
    "project_edges",
    "coupled_sample_lambda",
    "coupled_sample_p",
    "sample_bernoulli_bonds",
    "sample_edges",
    "edge_arrays_from_uniforms",
    "edge_levels_from_uniforms",
    "site_uniforms",
    "pair_uniforms",
]


def _check_prob(value: float, name: str) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ParameterError(f"{name} must lie in [0, 1], got {value}")
    return value


# ---------------------------------------------------------------------------
# configuration types


@dataclass
class SiteConfig:
    """Occupancy field on a lattice region."""

    spec: LatticeSpec
    occupied: np.ndarray

    def __post_init__(self):
        self.occupied = np.asarray(self.occupied, dtype=bool)
        if self.occupied.shape != self.spec.extent:
            raise ParameterError(
                f"occupancy shape {self.occupied.shape} does not match extent {self.spec.extent}"
            )
        if self.spec.boundary == "occupied_frame":
            frame = self.spec.frame_mask()
            if not self.occupied[frame].all():
                raise ParameterError("occupied_frame requires every frame site occupied")

    @property
    def n_occupied(self) -> int:
        return int(self.occupied.sum())

    def occupied_sites(self) -> list[tuple[int, ...]]:
        return [tuple(int(c) for c in s) for s in np.argwhere(self.occupied)]


@dataclass(frozen=True)
class FeasiblePair:
    """A maximal vacant-interior run of edges on one axis line.

    ``transverse`` holds the line's fixed coordinates (all axes except
    ``axis``, in increasing axis order). The pair covers ``n_edges``
    consecutive edges anchored at positions start, start+1, ... along the
    line, wrapping modulo the extent on a torus. ``full_cycle`` marks the
    single pair of a cyclic line with exactly one occupied site; it covers
    the whole line and has one endpoint.
    """

    axis: int
    transverse: tuple[int, ...]
    start: int
    n_edges: int
    full_cycle: bool = False

    def edge_positions(self, extent: int) -> list[int]:
        return [(self.start + j) % extent for j in range(self.n_edges)]

    def endpoint_positions(self, extent: int, cyclic: bool) -> tuple[int, ...]:
        if self.full_cycle:
            return (self.start,)
        far = self.start + self.n_edges
        if cyclic:
            far %= extent
        return (self.start, far)

    def site_at(self, position: int) -> tuple[int, ...]:
        coords = list(self.transverse)
        coords.insert(self.axis, position)
        return tuple(coords)


@dataclass
class LineSegmentation:
    """All feasible pairs of a site configuration, with per-edge lookup.

    ``pair_index[a]`` maps each edge anchor (site array indexed like the
    occupancy field) to the covering pair's index in ``pairs``, or -1 when
    the edge is covered by no pair.
    """

    sites: SiteConfig
    pairs: list[FeasiblePair]
    pair_index: tuple[np.ndarray, ...]
    by_line: dict = field(default_factory=dict)

    @property
    def spec(self) -> LatticeSpec:
        return self.sites.spec

    @property
    def n_pairs(self) -> int:
        return len(self.pairs)

    def pairs_on_line(self, axis: int, transverse: tuple[int, ...]) -> list[int]:
        lo, count = self.by_line.get((axis, tuple(transverse)), (0, 0))
        return list(range(lo, lo + count))


@dataclass
class PairStates:
    """Open/closed state for every pair of a segmentation."""

    seg: LineSegmentation
    open: np.ndarray

    def __post_init__(self):
        self.open = np.asarray(self.open, dtype=bool)
        if self.open.shape != (self.seg.n_pairs,):
            raise ParameterError("pair state vector length does not match segmentation")


@dataclass
class EdgeConfig:
    """Open/closed state for every edge, one array per axis.

    ``open[a]`` is indexed like the site field by the edge anchor. On a
    non-torus box the slice at the last position along axis ``a`` does not
    correspond to an edge and is kept False.
    """

    spec: LatticeSpec
    open: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.open) != self.spec.d:
            raise ParameterError("need one edge array per axis")
        arrays = []
        for a, arr in enumerate(self.open):
            arr = np.asarray(arr, dtype=bool)
            if arr.shape != self.spec.extent:
                raise ParameterError(f"edge array {a} has shape {arr.shape}")
            arrays.append(arr)
        object.__setattr__(self, "open", tuple(arrays))

    @property
    def n_open(self) -> int:
        return int(sum(arr.sum() for arr in self.open))

    def is_open(self, site: tuple[int, ...], axis: int) -> bool:
        if not self.spec.edge_exists(site, axis):
            raise ParameterError(f"no edge at {site} along axis {axis}")
        return bool(self.open[axis][site])


# ---------------------------------------------------------------------------
# uniforms


def site_uniforms(spec: LatticeSpec, rng: RandomSource, batch: int | None = None) -> np.ndarray:
    """Uniforms driving site occupancy, shape (batch?, *extent)."""
    shape = spec.extent if batch is None else (batch, *spec.extent)
    return rng.derive("sites").generator().random(shape)


def pair_uniforms(
    spec: LatticeSpec, rng: RandomSource, batch: int | None = None
) -> tuple[np.ndarray, ...]:
    """Per-axis uniforms read at pair anchors, shape (batch?, *extent) each."""
    shape = spec.extent if batch is None else (batch, *spec.extent)
    return tuple(rng.derive("pairs", a).generator().random(shape) for a in range(spec.d))


def occupancy_from_uniforms(spec: LatticeSpec, p: float, u_sites: np.ndarray) -> np.ndarray:
    """Threshold site uniforms at p, forcing the frame when required.

    Accepts leading batch dimensions ahead of the extent axes.
    """
    occ = u_sites < p
    if spec.boundary == "occupied_frame":
        frame = spec.frame_mask()
        occ[(slice(None),) * (occ.ndim - spec.d) + (frame,)] = True
    return occ


# ---------------------------------------------------------------------------
# sampling sites


def sample_sites(spec: LatticeSpec, p: float, rng: RandomSource) -> SiteConfig:
    """Dense Bernoulli(p) occupancy sample."""
    p = _check_prob(p, "p")
    occ = occupancy_from_uniforms(spec, p, site_uniforms(spec, rng))
    return SiteConfig(spec, occ)


def sample_sites_sparse(spec: LatticeSpec, p: float, rng: RandomSource) -> SiteConfig:
    """Occupancy sample by geometric gap skipping, O(occupied) draws.

    Distributionally identical to sample_sites but uses its own stream, so
    the two samplers do not reproduce each other draw for draw. Intended
    for large extents with small p.
    """
    p = _check_prob(p, "p")
    n = spec.n_sites
    occ_flat = np.zeros(n, dtype=bool)
    if p > 0.0:
        if p == 1.0:
            occ_flat[:] = True
        else:
            gen = rng.derive("sites-sparse").generator()
            pos = -1
            expect = max(int(n * p * 1.5) + 16, 16)
            while True:
                gaps = gen.geometric(p, size=expect)
                steps = np.cumsum(gaps)
                idx = pos + steps
                inside = idx < n
                occ_flat[idx[inside]] = True
                if not inside.all():
                    break
                pos = int(idx[-1])
    occ = occ_flat.reshape(spec.extent)
    if spec.boundary == "occupied_frame":
        occ[spec.frame_mask()] = True
    return SiteConfig(spec, occ)


# ---------------------------------------------------------------------------
# segmentation


def extract_pairs(sites: SiteConfig) -> LineSegmentation:
    """Cut every axis line of the occupancy field into feasible pairs.

    Boundary rules: on a torus a line with t occupied sites yields t
    cyclic pairs (one full-cycle pair when t == 1, none when t == 0); on a
    box it yields t - 1 pairs between consecutive occupied sites, and the
    runs before the first and after the last occupied site are covered by
    nothing.
    """
    spec = sites.spec
    cyclic = spec.boundary == "torus"
    pairs: list[FeasiblePair] = []
    by_line: dict = {}
    index_arrays: list[np.ndarray] = []

    for axis in range(spec.d):
        ext = spec.extent[axis]
        moved = np.moveaxis(sites.occupied, axis, -1)
        lead_shape = moved.shape[:-1]
        flat = moved.reshape(-1, ext)
        # fill a contiguous buffer in line-major layout, restore axes after
        idx_moved = np.full(flat.shape, -1, dtype=np.int64)
        for li in range(flat.shape[0]):
            transverse = tuple(int(c) for c in np.unravel_index(li, lead_shape)) if lead_shape else ()
            occ_pos = np.flatnonzero(flat[li])
            t = occ_pos.size
            first = len(pairs)
            if cyclic:
                if t == 1:
                    s = int(occ_pos[0])
                    pairs.append(FeasiblePair(axis, transverse, s, ext, full_cycle=True))
                    idx_moved[li, :] = first
                elif t >= 2:
                    for j in range(t):
                        s = int(occ_pos[j])
                        e = int(occ_pos[(j + 1) % t])
                        n_edges = (e - s) % ext
                        pairs.append(FeasiblePair(axis, transverse, s, n_edges))
                        k = len(pairs) - 1
                        if s + n_edges <= ext:
                            idx_moved[li, s : s + n_edges] = k
                        else:
                            idx_moved[li, s:] = k
                            idx_moved[li, : (s + n_edges) % ext] = k
            else:
                for j in range(t - 1):
                    s = int(occ_pos[j])
                    e = int(occ_pos[j + 1])
                    pairs.append(FeasiblePair(axis, transverse, s, e - s))
                    idx_moved[li, s:e] = len(pairs) - 1
            by_line[(axis, transverse)] = (first, len(pairs) - first)
        index_arrays.append(
            np.ascontiguousarray(np.moveaxis(idx_moved.reshape(lead_shape + (ext,)), -1, axis))
        )

    return LineSegmentation(sites, pairs, tuple(index_arrays), by_line)


# ---------------------------------------------------------------------------
# pair states and projection


def _anchor_of(pair: FeasiblePair) -> tuple[int, ...]:
    return pair.site_at(pair.start)


def assign_pair_states_from_uniforms(
    seg: LineSegmentation, lam: float, u_pairs: tuple[np.ndarray, ...]
) -> PairStates:
    """Pair states read from anchor-keyed uniform fields: open iff u < lambda."""
    lam = _check_prob(lam, "lambda")
    states = np.zeros(seg.n_pairs, dtype=bool)
    for k, pair in enumerate(seg.pairs):
        states[k] = u_pairs[pair.axis][_anchor_of(pair)] < lam
    return PairStates(seg, states)


def assign_pair_states(seg: LineSegmentation, lam: float, rng: RandomSource) -> PairStates:
    """Independent Bernoulli(lambda) state per pair."""
    return assign_pair_states_from_uniforms(seg, lam, pair_uniforms(seg.spec, rng))


def project_edges(seg: LineSegmentation, states: PairStates) -> EdgeConfig:
    """Edge field: an edge is open iff its covering pair is open."""
    if states.seg is not seg:
        raise ParameterError("pair states belong to a different segmentation")
    open_arrays = []
    padded = np.concatenate([states.open, [False]])  # index -1 lands on False
    for a in range(seg.spec.d):
        open_arrays.append(padded[seg.pair_index[a]])
    return EdgeConfig(seg.spec, tuple(open_arrays))


def sample_one_choice(seg: LineSegmentation, rng: RandomSource) -> PairStates:
    """One-choice variant: every occupied site picks one incident pair
    uniformly at random, and a pair is open iff at least one of its
    endpoint sites picked it.

    A site's menu is its set of distinct incident pairs across all axes
    (a full-cycle pair appears once). Occupied sites with no incident pair
    make no choice.
    """
    spec = seg.spec
    cyclic = spec.boundary == "torus"
    incident: dict[tuple[int, ...], list[int]] = {}
    for k, pair in enumerate(seg.pairs):
        for pos in pair.endpoint_positions(spec.extent[pair.axis], cyclic):
            site = pair.site_at(pos)
            incident.setdefault(site, [])
            if k not in incident[site]:
                incident[site].append(k)
    u_choice = rng.derive("choice").generator().random(spec.extent)
    states = np.zeros(seg.n_pairs, dtype=bool)
    for site in map(tuple, np.argwhere(seg.sites.occupied)):
        menu = incident.get(site)
        if not menu:
            continue
        pick = menu[int(u_choice[site] * len(menu))]
        states[pick] = True
    return PairStates(seg, states)


# ---------------------------------------------------------------------------
# couplings


def coupled_sample_lambda(
    seg: LineSegmentation, lambdas: list[float], rng: RandomSource
) -> list[PairStates]:
    """Pair states at several lambda levels from one uniform field.

    The open sets are nested: a pair open at a smaller level is open at
    every larger one.
    """
    u_pairs = pair_uniforms(seg.spec, rng)
    return [assign_pair_states_from_uniforms(seg, lam, u_pairs) for lam in lambdas]


def coupled_sample_p(
    spec: LatticeSpec, ps: list[float], lam: float, rng: RandomSource
) -> list[tuple[SiteConfig, LineSegmentation, PairStates]]:
    """Configurations at several p levels from shared uniform fields.

    Occupied sets are nested in p sample by sample. Pair states share the
    anchor-keyed uniforms, so refining the segmentation re-reads the same
    field at the new anchors.
    """
    lam = _check_prob(lam, "lambda")
    u_sites = site_uniforms(spec, rng)
    u_pairs = pair_uniforms(spec, rng)
    out = []
    for p in ps:
        p = _check_prob(p, "p")
        occ = occupancy_from_uniforms(spec, p, u_sites)
        sites = SiteConfig(spec, occ)
        seg = extract_pairs(sites)
        out.append((sites, seg, assign_pair_states_from_uniforms(seg, lam, u_pairs)))
    return out


def sample_bernoulli_bonds(spec: LatticeSpec, lam: float, rng: RandomSource) -> EdgeConfig:
    """Plain independent Bernoulli(lambda) bonds, for reference runs."""
    lam = _check_prob(lam, "lambda")
    arrays = []
    for a in range(spec.d):
        u = rng.derive("bonds", a).generator().random(spec.extent)
        arr = u < lam
        if spec.boundary != "torus":
            sl = [slice(None)] * spec.d
            sl[a] = spec.extent[a] - 1
            arr[tuple(sl)] = False
        arrays.append(arr)
    return EdgeConfig(spec, tuple(arrays))


# ---------------------------------------------------------------------------
# fast vectorized path


def _axis_index(shape_len: int, spec_d: int, axis: int) -> int:
    return shape_len - spec_d + axis


def _anchors(spec: LatticeSpec, occ: np.ndarray, axis: int):
    """Anchor position of the pair covering each edge along one axis.

    Works with any number of leading batch dimensions on ``occ``. Returns
    (anchor, covered): anchor is the position of the covering pair's
    anchor along the axis (meaningful where covered), covered marks edges
    lying inside some pair.
    """
    ax = _axis_index(occ.ndim, spec.d, axis)
    ext = spec.extent[axis]
    shape = [1] * occ.ndim
    shape[ax] = ext
    idx = np.arange(ext, dtype=np.int64).reshape(shape)
    pos = np.where(occ, idx, -1)
    anchor = np.maximum.accumulate(pos, axis=ax)
    last = np.take(anchor, [ext - 1], axis=ax)
    if spec.boundary == "torus":
        covered = np.broadcast_to(last >= 0, occ.shape)
        anchor = np.where(anchor < 0, last, anchor)
    else:
        covered = (anchor >= 0) & (idx < last)
    return anchor, covered


def edge_arrays_from_uniforms(
    spec: LatticeSpec,
    p: float,
    lam: float,
    u_sites: np.ndarray,
    u_pairs: tuple[np.ndarray, ...],
) -> tuple[np.ndarray, ...]:
    """Open-edge arrays computed directly from uniform fields.

    Sample-for-sample identical to running extract_pairs,
    assign_pair_states_from_uniforms and project_edges on the same
    uniforms; this path just never materializes the pair list.
    """
    p = _check_prob(p, "p")
    lam = _check_prob(lam, "lambda")
    occ = occupancy_from_uniforms(spec, p, u_sites)
    out = []
    for a in range(spec.d):
        anchor, covered = _anchors(spec, occ, a)
        ax = _axis_index(occ.ndim, spec.d, a)
        u_at_anchor = np.take_along_axis(u_pairs[a], np.maximum(anchor, 0), axis=ax)
        out.append(covered & (u_at_anchor < lam))
    return tuple(out)


def edge_levels_from_uniforms(
    spec: LatticeSpec,
    p: float,
    u_sites: np.ndarray,
    u_pairs: tuple[np.ndarray, ...],
) -> tuple[np.ndarray, ...]:
    """Per-edge activation levels: the covering pair's uniform.

    An edge is open at level lambda exactly when its value here is below
    lambda; uncovered edges get +inf. Edges covered by the same pair share
    one value, which is what couples the whole lambda axis at once.
    """
    p = _check_prob(p, "p")
    occ = occupancy_from_uniforms(spec, p, u_sites)
    out = []
    for a in range(spec.d):
        anchor, covered = _anchors(spec, occ, a)
        ax = _axis_index(occ.ndim, spec.d, a)
        u_at_anchor = np.take_along_axis(u_pairs[a], np.maximum(anchor, 0), axis=ax)
        out.append(np.where(covered, u_at_anchor, np.inf))
    return tuple(out)


def sample_edges(spec: LatticeSpec, p: float, lam: float, rng: RandomSource) -> EdgeConfig:
    """Draw a full model sample and return the open-edge field."""
    arrays = edge_arrays_from_uniforms(
        spec, p, lam, site_uniforms(spec, rng), pair_uniforms(spec, rng)
    )
    return EdgeConfig(spec, arrays)
