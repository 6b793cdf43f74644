"""Exact probabilities of finite edge patterns, without any boundary.

The infinite-lattice probability of a finite pattern (a map from edges to
required states) is computed by enumerating occupancies of a finite support
set only.  The argument:

Every constrained edge lies on one axis line.  Collect, per line, the
minimal site interval spanning that line's constrained edges (endpoints
inclusive); the union over lines is the support.  Fix an occupancy of the
support.  On each line the occupied support sites cut the constrained edges
into maximal runs ("classes"): two edges share a class iff no occupied
support site lies between them.  Every infinite-volume occupancy extending
the assignment puts all edges of one class inside a single feasible pair,
because the sites strictly between them are support sites and vacant; and
it puts distinct classes inside distinct pairs, because same-line classes
are separated by an occupied site and different lines never share a pair.
A run reaching past the support interval still lies in one pair a.s.: with
p > 0 the nearest occupied site beyond the interval exists almost surely.
Two such escaping runs on one line with no occupied support site between
them are the same run, hence one class.  Conditionally on the support
occupancy the relevant pair states are therefore i.i.d. Bernoulli(lambda),
one per class, so a class contributes lambda if required entirely open,
1 - lambda if entirely closed, and 0 if its requirements conflict.  Summing
the product of class contributions against the occupancy weights
p^occ (1-p)^vac gives the exact marginal.  p = 0 is rejected: the escaping
pair would not exist.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import product as iter_product

import numpy as np

from alignperc.errors import ParameterError, PatternError, SizeRefusalError
from alignperc.lattice import LatticeSpec
from alignperc.model import (
    PairStates,
    SiteConfig,
    extract_pairs,
    project_edges,
)

Edge = tuple[tuple[int, ...], int]

DEFAULT_SUPPORT_CAP = 24


def _check_p_lambda(p: float, lam: float, allow_p_one: bool = True) -> tuple[float, float]:
    p = float(p)
    lam = float(lam)
    if not (0.0 < p <= 1.0) or (p == 1.0 and not allow_p_one):
        raise ParameterError(f"p must lie in (0, 1], got {p}")
    if not (0.0 <= lam <= 1.0):
        raise ParameterError(f"lambda must lie in [0, 1], got {lam}")
    return p, lam


@dataclass(frozen=True)
class EdgePattern:
    """Finite map from edges (site, axis) to a required open/closed state."""

    d: int
    constraints: tuple[tuple[tuple[int, ...], int, bool], ...]

    @staticmethod
    def from_edges(d: int, edges) -> "EdgePattern":
        """Build from (site, axis, state) triples; state is bool or "open"/"closed"."""
        if d < 2:
            raise PatternError("patterns require dimension >= 2")
        seen: dict[Edge, bool] = {}
        for site, axis, state in edges:
            site = tuple(int(c) for c in site)
            axis = int(axis)
            if len(site) != d:
                raise PatternError(f"site {site} has wrong dimension for d={d}")
            if not (0 <= axis < d):
                raise PatternError(f"axis {axis} out of range for d={d}")
            if isinstance(state, str):
                if state not in ("open", "closed"):
                    raise PatternError(f"unknown state {state!r}")
                req = state == "open"
            else:
                req = bool(state)
            key = (site, axis)
            if key in seen and seen[key] != req:
                raise PatternError(f"conflicting requirements for edge {key}")
            seen[key] = req
        if not seen:
            raise PatternError("pattern must constrain at least one edge")
        ordered = tuple(sorted((s, a, r) for (s, a), r in seen.items()))
        return EdgePattern(d, ordered)

    @property
    def n_edges(self) -> int:
        return len(self.constraints)

    def by_line(self) -> dict[tuple[int, tuple[int, ...]], list[tuple[int, bool]]]:
        """Constrained edges grouped by line; a line key is (axis, transverse)."""
        lines: dict[tuple[int, tuple[int, ...]], list[tuple[int, bool]]] = {}
        for site, axis, req in self.constraints:
            transverse = site[:axis] + site[axis + 1 :]
            lines.setdefault((axis, transverse), []).append((site[axis], req))
        for edges in lines.values():
            edges.sort()
        return lines


def pattern_from_json(text: str | dict) -> EdgePattern:
    """Parse the pattern file schema {"d": int, "edges": [{site, axis, state}]}."""
    obj = json.loads(text) if isinstance(text, str) else text
    try:
        d = int(obj["d"])
        triples = [(e["site"], e["axis"], e["state"]) for e in obj["edges"]]
    except (KeyError, TypeError) as exc:
        raise PatternError(f"malformed pattern object: {exc}") from exc
    return EdgePattern.from_edges(d, triples)


def pattern_to_json(pattern: EdgePattern) -> str:
    edges = [
        {"site": list(site), "axis": axis, "state": "open" if req else "closed"}
        for site, axis, req in pattern.constraints
    ]
    return json.dumps({"d": pattern.d, "edges": edges})


@dataclass(frozen=True)
class SupportSites:
    """Minimal enumeration support: per touched line, the spanning interval."""

    sites: tuple[tuple[int, ...], ...]
    intervals: dict[tuple[int, tuple[int, ...]], tuple[int, int]]


def support_sites(pattern: EdgePattern) -> SupportSites:
    """Sites of the minimal spanning interval of each touched line."""
    intervals = {}
    sites: set[tuple[int, ...]] = set()
    for (axis, transverse), edges in pattern.by_line().items():
        lo = min(pos for pos, _ in edges)
        hi = max(pos for pos, _ in edges) + 1
        intervals[(axis, transverse)] = (lo, hi)
        for pos in range(lo, hi + 1):
            sites.add(transverse[:axis] + (pos,) + transverse[axis:])
    return SupportSites(tuple(sorted(sites)), intervals)


@dataclass(frozen=True)
class PairClass:
    """Edges forced into one feasible pair by a support occupancy."""

    axis: int
    transverse: tuple[int, ...]
    required: tuple[bool, ...]
    escaping: bool

    @property
    def factor_kind(self) -> str:
        states = set(self.required)
        if len(states) == 2:
            return "conflict"
        return "open" if True in states else "closed"


def pair_classes(pattern: EdgePattern, occupied: frozenset | set) -> list[PairClass]:
    """Class decomposition of the pattern under one support occupancy.

    Edges at line positions a < b fall in the same class iff no occupied
    support site x satisfies a < x <= b; a class escapes when its run is not
    terminated by occupied support sites on both sides.
    """
    classes: list[PairClass] = []
    for (axis, transverse), edges in pattern.by_line().items():
        def site_of(pos: int) -> tuple[int, ...]:
            return transverse[:axis] + (pos,) + transverse[axis:]

        lo = min(pos for pos, _ in edges)
        hi = max(pos for pos, _ in edges) + 1
        occ_pos = sorted(pos for pos in range(lo, hi + 1) if site_of(pos) in occupied)
        t = len(occ_pos)
        runs: dict[int, list[bool]] = {}
        for pos, req in edges:
            run_id = sum(1 for x in occ_pos if x <= pos)
            runs.setdefault(run_id, []).append(req)
        for run_id, reqs in sorted(runs.items()):
            escaping = run_id == 0 or run_id == t
            classes.append(PairClass(axis, transverse, tuple(reqs), escaping))
    return classes


def pattern_probability(
    pattern: EdgePattern,
    p: float,
    lam: float,
    support_cap: int = DEFAULT_SUPPORT_CAP,
) -> float:
    """Exact infinite-lattice probability that every constraint holds."""
    p, lam = _check_p_lambda(p, lam)
    support = support_sites(pattern)
    n = len(support.sites)
    if n > support_cap:
        raise SizeRefusalError(f"support has {n} sites, cap is {support_cap}")
    if p == 1.0:
        assignments = [(1 << n) - 1]
    else:
        assignments = range(1 << n)
    terms: list[float] = []
    for mask in assignments:
        k = int(mask).bit_count()
        weight = p**k * (1.0 - p) ** (n - k)
        if weight == 0.0:
            continue
        occupied = frozenset(
            site for bit, site in enumerate(support.sites) if mask >> bit & 1
        )
        prod = weight
        for cls in pair_classes(pattern, occupied):
            kind = cls.factor_kind
            if kind == "conflict":
                prod = 0.0
                break
            prod *= lam if kind == "open" else 1.0 - lam
        if prod != 0.0:
            terms.append(prod)
    return math.fsum(terms)


def class_count(pattern: EdgePattern, occupied: frozenset | set) -> int:
    """Number of distinct feasible pairs meeting the pattern's edges."""
    return len(pair_classes(pattern, occupied))


def incident_edge_probability(p: float, lam: float, d: int) -> float:
    """Closed form for "the origin has an open incident edge".

    An occupied origin splits each of its d lines, so its 2d incident edges
    lie in 2d distinct pairs; a vacant origin leaves d pairs, one per line.
    The value p[1-(1-lam)^(2d)] + (1-p)[1-(1-lam)^d] is increasing in p.
    """
    p, lam = _check_p_lambda(p, lam)
    if d < 1:
        raise ParameterError("d must be >= 1")
    q = 1.0 - lam
    return p * (1.0 - q ** (2 * d)) + (1.0 - p) * (1.0 - q**d)


def _axis_pattern_edges(signs_open: dict[str, bool]) -> list[tuple[tuple[int, int], int, bool]]:
    """d=2 patterns over the four unit edges at the origin, keyed +1,-1,+2,-2."""
    site = {
        "+1": ((0, 0), 0),
        "-1": ((-1, 0), 0),
        "+2": ((0, 0), 1),
        "-2": ((0, -1), 1),
    }
    return [(site[k][0], site[k][1], req) for k, req in signs_open.items()]


def lattice_condition_gap(p: float, lam: float) -> float:
    """Signed gap of the lattice condition on the four unit edges at the origin.

    With x = "both axis-1 edges open, both axis-2 edges closed" and
    y = "the two positive edges open, the two negative closed", returns
    P(join) P(meet) - P(x) P(y).  Each factor has a closed form below, and
    each is cross-checked against pattern_probability before returning.
    """
    p, lam = _check_p_lambda(p, lam, allow_p_one=False)
    q = 1.0 - lam
    mu_x = p * lam**2 * q**2 + (1.0 - p) * lam * q
    mu_y = p * lam**2 * q**2
    mu_join = p * lam**3 * q
    mu_meet = p * lam * q**3
    closed = {
        "x": (mu_x, {"+1": True, "-1": True, "+2": False, "-2": False}),
        "y": (mu_y, {"+1": True, "+2": True, "-1": False, "-2": False}),
        "join": (mu_join, {"+1": True, "-1": True, "+2": True, "-2": False}),
        "meet": (mu_meet, {"+1": True, "-1": False, "+2": False, "-2": False}),
    }
    for name, (value, signs) in closed.items():
        pattern = EdgePattern.from_edges(2, _axis_pattern_edges(signs))
        check = pattern_probability(pattern, p, lam)
        if abs(check - value) > 1e-12:
            raise PatternError(
                f"internal inconsistency for term {name}: {check} vs {value}"
            )
    return mu_join * mu_meet - mu_x * mu_y


def all_open_probability(d: int, edges, p: float, lam: float) -> float:
    """Exact probability that every edge of a finite set is open.

    Equals the expectation of lambda^T where T counts the distinct feasible
    pairs meeting the set; non-increasing in p at fixed lambda because
    adding occupied sites can only split pairs.
    """
    edges = list(edges)
    if not edges:
        return 1.0
    pattern = EdgePattern.from_edges(d, [(site, axis, True) for site, axis in edges])
    return pattern_probability(pattern, p, lam)


# ---------------------------------------------------------------------------
# finite-geometry enumeration


def _line_sites(spec: LatticeSpec, axis: int, transverse: tuple[int, ...]):
    for pos in range(spec.extent[axis]):
        yield transverse[:axis] + (pos,) + transverse[axis:]


def pattern_probability_torus(
    pattern: EdgePattern,
    spec: LatticeSpec,
    p: float,
    lam: float,
    support_cap: int = DEFAULT_SUPPORT_CAP,
) -> float:
    """Exact pattern probability under torus semantics.

    Enumerates the occupancy of every full line the pattern touches; a line
    with no occupied site has no pair, so its edges are deterministically
    closed, and a line with one occupied site is covered by one full-cycle
    pair.  Both cases fall out of reusing the 1d segmentation.
    """
    p, lam = _check_p_lambda(p, lam)
    if spec.boundary != "torus":
        raise ParameterError("torus semantics require a torus spec")
    if pattern.d != spec.d:
        raise ParameterError("pattern dimension does not match the lattice")
    lines = {}
    for (axis, transverse), edges in pattern.by_line().items():
        transverse = tuple(
            c % e for c, e in zip(transverse, spec.extent[:axis] + spec.extent[axis + 1 :])
        )
        ext = spec.extent[axis]
        folded: dict[int, bool] = {}
        for pos, req in edges:
            pos %= ext
            if folded.setdefault(pos, req) != req:
                raise PatternError("pattern edges conflict after torus folding")
        lines[(axis, transverse)] = sorted(folded.items())
    site_list = sorted(
        {s for (axis, tr) in lines for s in _line_sites(spec, axis, tr)}
    )
    n = len(site_list)
    if n > support_cap:
        raise SizeRefusalError(f"touched lines hold {n} sites, cap is {support_cap}")
    site_bit = {s: i for i, s in enumerate(site_list)}
    terms: list[float] = []
    assignments = [(1 << n) - 1] if p == 1.0 else range(1 << n)
    line_cache = []
    for (axis, transverse), edges in lines.items():
        ext = spec.extent[axis]
        bits = [site_bit[s] for s in _line_sites(spec, axis, transverse)]
        line_cache.append((ext, bits, edges))
    line_spec_cache = {ext: LatticeSpec(1, (ext,), "torus") for ext, _, _ in line_cache}
    for mask in assignments:
        k = int(mask).bit_count()
        weight = p**k * (1.0 - p) ** (n - k)
        if weight == 0.0:
            continue
        prod = weight
        for ext, bits, edges in line_cache:
            occ = np.array([mask >> b & 1 for b in bits], dtype=bool)
            seg = extract_pairs(SiteConfig(line_spec_cache[ext], occ))
            groups: dict[int, set[bool]] = {}
            for pos, req in edges:
                pair_id = int(seg.pair_index[0][pos])
                if pair_id < 0:
                    if req:
                        prod = 0.0
                        break
                    continue
                groups.setdefault(pair_id, set()).add(req)
            if prod == 0.0:
                break
            for states in groups.values():
                if len(states) == 2:
                    prod = 0.0
                    break
                prod *= lam if True in states else 1.0 - lam
            if prod == 0.0:
                break
        if prod != 0.0:
            terms.append(prod)
    return math.fsum(terms)


def enumerate_box_probability(
    spec: LatticeSpec,
    p: float,
    lam: float,
    event=None,
    pattern: EdgePattern | None = None,
    max_sites: int = DEFAULT_SUPPORT_CAP,
) -> float:
    """Exact finite-geometry probability by exhaustive enumeration.

    Exactly one of event (a pure predicate over EdgeConfig) or pattern may
    be given.  Occupancies of all free sites are enumerated; with a pattern
    the per-occupancy value factorizes over covering pairs, otherwise all
    pair-state vectors are enumerated too.
    """
    p = float(p)
    lam = float(lam)
    if not (0.0 <= p <= 1.0):
        raise ParameterError(f"p must lie in [0, 1], got {p}")
    if not (0.0 <= lam <= 1.0):
        raise ParameterError(f"lambda must lie in [0, 1], got {lam}")
    if (event is None) == (pattern is None):
        raise ParameterError("give exactly one of event and pattern")
    frame = spec.frame_mask() if spec.boundary == "occupied_frame" else None
    if frame is not None:
        free_sites = [s for s in spec.sites() if not frame[s]]
    else:
        free_sites = list(spec.sites())
    n = len(free_sites)
    if n > max_sites:
        raise SizeRefusalError(f"{n} free sites exceed the cap of {max_sites}")
    if pattern is not None:
        folded: dict[Edge, bool] = {}
        for site, axis, req in pattern.constraints:
            if spec.boundary == "torus":
                site = tuple(c % e for c, e in zip(site, spec.extent))
            if not spec.edge_exists(site, axis):
                raise ParameterError(f"edge ({site}, {axis}) does not exist here")
            if folded.setdefault((site, axis), req) != req:
                raise PatternError("pattern edges conflict after folding")
        constraints = sorted((s, a, r) for (s, a), r in folded.items())

    occ = np.zeros(spec.extent, dtype=bool)
    terms: list[float] = []
    for mask in range(1 << n):
        k = int(mask).bit_count()
        weight = p**k * (1.0 - p) ** (n - k)
        if weight == 0.0:
            continue
        if frame is not None:
            occ[:] = frame
        else:
            occ[:] = False
        for bit, site in enumerate(free_sites):
            if mask >> bit & 1:
                occ[site] = True
        seg = extract_pairs(SiteConfig(spec, occ.copy()))
        if pattern is not None:
            groups: dict[int, set[bool]] = {}
            prod = weight
            for site, axis, req in constraints:
                pair_id = int(seg.pair_index[axis][site])
                if pair_id < 0:
                    if req:
                        prod = 0.0
                        break
                    continue
                groups.setdefault(pair_id, set()).add(req)
            if prod != 0.0:
                for states in groups.values():
                    if len(states) == 2:
                        prod = 0.0
                        break
                    prod *= lam if True in states else 1.0 - lam
            if prod != 0.0:
                terms.append(prod)
        else:
            m = seg.n_pairs
            for smask in range(1 << m):
                j = int(smask).bit_count()
                w2 = lam**j * (1.0 - lam) ** (m - j)
                if w2 == 0.0:
                    continue
                states = np.array([smask >> b & 1 for b in range(m)], dtype=bool)
                edges = project_edges(seg, PairStates(seg, states))
                if event(edges):
                    terms.append(weight * w2)
    return math.fsum(terms)
