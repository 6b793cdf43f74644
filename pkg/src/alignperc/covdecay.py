"""Correlation decay between local events in distant boxes.

Estimates covariances of box-local events under the alignment measure and
compares them against the occupancy-decay bound, whose rate comes from the
chance that some lattice line threads both boxes without an occupied site
in between.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

from alignperc.errors import ParameterError, SizeRefusalError
from alignperc.lattice import LatticeSpec, alignperc_thread_count
from alignperc.model import (
    edge_arrays_from_uniforms,
    extract_pairs,
    pair_uniforms,
    project_edges,
    sample_one_choice,
    sample_sites,
    site_uniforms,
)
from alignperc.renorm import RecurrenceConstants
from alignperc.rng import RandomSource
from alignperc.stats import covariance_se

EVENT_KINDS = ("all_open", "one_arm", "crossing")
MODELS = ("independent", "one_choice")

COV_CHUNK = 256  # fixed replicate chunking; independent of thread count


@dataclass(frozen=True)
class LocalEventSpec:
    """A catalogue event on the edges of B(center, L).

    all_open: every edge with both endpoints in the box is open.
    one_arm: the center reaches the radius-floor(L) shell inside the box.
    crossing: an open path joins the two axis-0 faces inside the box.
    All three read only edges with both endpoints in B(center, L).
    """

    center: tuple[int, ...]
    L: float
    event: str

    def __post_init__(self):
        if self.event not in EVENT_KINDS:
            raise ParameterError(
                f"event must be one of {EVENT_KINDS}, got {self.event!r}"
            )
        if self.L < 1:
            raise ParameterError("event radius L must be at least 1")
        object.__setattr__(self, "center", tuple(int(c) for c in self.center))

    @property
    def radius(self) -> int:
        return int(np.floor(self.L))

    def to_dict(self) -> dict:
        return {"center": list(self.center), "L": self.L, "event": self.event}

    @staticmethod
    def from_dict(obj: dict) -> "LocalEventSpec":
        return LocalEventSpec(tuple(obj["center"]), float(obj["L"]), obj["event"])


# ---------------------------------------------------------------------------
# event evaluation


@njit(cache=True)
def _arm_cross_batch(open0, open1, cx, cy, r, want_cross, out):
    """Per replicate: one-arm (center to shell) or axis-0 crossing in the
    radius-r box at (cx, cy), using only edges inside the box."""
    side = 2 * r + 1
    visited = np.zeros((side, side), dtype=np.uint8)
    stack = np.empty((side * side, 2), dtype=np.int64)
    touched = np.empty((side * side, 2), dtype=np.int64)
    for rep in range(open0.shape[0]):
        sp = 0
        nt = 0
        if want_cross:
            for j in range(side):
                stack[sp, 0] = 0
                stack[sp, 1] = j
                sp += 1
                visited[0, j] = 1
                touched[nt, 0] = 0
                touched[nt, 1] = j
                nt += 1
        else:
            stack[sp, 0] = r
            stack[sp, 1] = r
            sp += 1
            visited[r, r] = 1
            touched[nt, 0] = r
            touched[nt, 1] = r
            nt += 1
        hit = False
        while sp > 0:
            sp -= 1
            i = stack[sp, 0]
            j = stack[sp, 1]
            if want_cross:
                if i == side - 1:
                    hit = True
                    break
            else:
                if max(abs(i - r), abs(j - r)) == r:
                    hit = True
                    break
            for step in range(4):
                if step == 0:
                    ni, nj = i + 1, j
                    is_open = open0[rep, cx - r + i, cy - r + j]
                elif step == 1:
                    ni, nj = i - 1, j
                    is_open = (
                        open0[rep, cx - r + i - 1, cy - r + j] if i > 0 else False
                    )
                elif step == 2:
                    ni, nj = i, j + 1
                    is_open = open1[rep, cx - r + i, cy - r + j]
                else:
                    ni, nj = i, j - 1
                    is_open = (
                        open1[rep, cx - r + i, cy - r + j - 1] if j > 0 else False
                    )
                if ni < 0 or nj < 0 or ni >= side or nj >= side:
                    continue
                if visited[ni, nj] or not is_open:
                    continue
                visited[ni, nj] = 1
                touched[nt, 0] = ni
                touched[nt, 1] = nj
                nt += 1
                stack[sp, 0] = ni
                stack[sp, 1] = nj
                sp += 1
        out[rep] = hit
        for t in range(nt):
            visited[touched[t, 0], touched[t, 1]] = 0


def evaluate_events(open0: np.ndarray, open1: np.ndarray, ev: LocalEventSpec) -> np.ndarray:
    """Vector of event indicators over a batch of edge arrays (d=2)."""
    cx, cy = ev.center
    r = ev.radius
    if ev.event == "all_open":
        inside0 = open0[:, cx - r : cx + r, cy - r : cy + r + 1]
        inside1 = open1[:, cx - r : cx + r + 1, cy - r : cy + r]
        return inside0.all(axis=(1, 2)) & inside1.all(axis=(1, 2))
    out = np.zeros(open0.shape[0], dtype=bool)
    _arm_cross_batch(open0, open1, cx, cy, r, ev.event == "crossing", out)
    return out


# ---------------------------------------------------------------------------
# bound and decoupling event


def decay_bound(L: float, D: float, p: float, d: int) -> float:
    """Covariance bound 4 (2L+1)^(d-1) e^(-alpha(p) (D - 2L))."""
    if d < 1:
        raise ParameterError("d must be positive")
    if D <= 2 * L:
        raise ParameterError("need D > 2L for the decay bound")
    if not (0 < p <= 1):
        raise ParameterError("p must lie in (0, 1]")
    alpha = RecurrenceConstants.alpha(p)
    exponent = -alpha * (D - 2 * L)
    return 4.0 * (2 * L + 1) ** (d - 1) * (math.exp(exponent) if exponent > -745 else 0.0)


@dataclass(frozen=True)
class DecouplingReport:
    n_lines: int
    gap_sites: int
    exact: float
    union_bound: float


def decoupling_event_probability(
    L: float,
    D: int,
    p: float,
    d: int,
    offset: tuple[int, ...] | None = None,
    max_lines: int = 10**6,
) -> DecouplingReport:
    """Chance that some line threading both boxes is vacant between them.

    Boxes sit at mutual axis-0 distance D, optionally displaced by `offset`
    transversally.  A threading line must run through both transverse
    sections; its blocking stretch is the closed site segment from one
    facing rim to the other, D - 2 floor(L) + 1 sites, at least the D - 2L
    of the stated bound.  Lines occupy disjoint site sets, so the
    inclusion-exclusion over lines collapses to an exact product.
    """
    if D <= 2 * L:
        raise ParameterError("need D > 2L")
    if not (0 < p <= 1):
        raise ParameterError("p must lie in (0, 1]")
    r = int(np.floor(L))
    if offset is None:
        offset = (0,) * (d - 1)
    if len(offset) != d - 1:
        raise ParameterError("offset must have one entry per transverse axis")
    if any(abs(t) > D for t in offset):
        raise ParameterError("transverse displacement may not exceed D")
    n_lines = 1
    for t in offset:
        n_lines *= max(0, 2 * r + 1 - abs(t))
    if n_lines > max_lines:
        raise SizeRefusalError(f"{n_lines} lines exceeds the exact-mode cap")
    gap_sites = D - 2 * r + 1
    per_line = (1 - p) ** gap_sites
    exact = -math.expm1(n_lines * math.log1p(-per_line)) if p < 1 else 0.0
    union = (2 * L + 1) ** (d - 1) * (1 - p) ** (D - 2 * L)
    if exact > union + 1e-12:
        raise AssertionError("exact decoupling probability exceeded its bound")
    return DecouplingReport(n_lines, gap_sites, exact, union)


# ---------------------------------------------------------------------------
# covariance estimation


@dataclass(frozen=True)
class CovarianceEstimate:
    a: LocalEventSpec
    b: LocalEventSpec
    p: float
    lam: float | None
    model: str
    n: int
    n11: int
    na: int
    nb: int
    master: int

    @property
    def cov_hat(self) -> float:
        return self.n11 / self.n - (self.na / self.n) * (self.nb / self.n)

    @property
    def se(self) -> float:
        return covariance_se(self.n11, self.na, self.nb, self.n)

    @property
    def separation(self) -> int:
        return max(abs(x - y) for x, y in zip(self.a.center, self.b.center))

    def to_dict(self) -> dict:
        return {
            "schema": "alignperc.covariance_estimate.v1",
            "a": self.a.to_dict(),
            "b": self.b.to_dict(),
            "p": self.p,
            "lambda": self.lam,
            "model": self.model,
            "n": self.n,
            "n11": self.n11,
            "na": self.na,
            "nb": self.nb,
            "master": self.master,
            "cov_hat": self.cov_hat,
            "se": self.se,
        }


def pair_geometry(a: LocalEventSpec, b: LocalEventSpec) -> tuple[LatticeSpec, tuple[int, ...], tuple[int, ...]]:
    """Occupied-frame box holding both event boxes with margin 4 floor(L).

    Returns the spec plus both centers translated into box coordinates.
    """
    r = max(a.radius, b.radius)
    margin = 4 * r
    lo = [min(x, y) - r - margin for x, y in zip(a.center, b.center)]
    hi = [max(x, y) + r + margin for x, y in zip(a.center, b.center)]
    extent = tuple(h - l + 1 for l, h in zip(lo, hi))
    spec = LatticeSpec(len(extent), extent, "occupied_frame")
    ca = tuple(x - l for x, l in zip(a.center, lo))
    cb = tuple(x - l for x, l in zip(b.center, lo))
    return spec, ca, cb


def covariance_estimate(
    a: LocalEventSpec,
    b: LocalEventSpec,
    p: float,
    lam: float | None,
    n: int,
    rng: RandomSource,
    model: str = "independent",
) -> CovarianceEstimate:
    """Estimate Cov(A, B) from n shared replicates.

    Both events are read off the same sample, replicates are drawn in
    fixed-size chunks with derived streams, and integer counts are summed
    in chunk order, so the result depends only on the master seed.
    """
    if model not in MODELS:
        raise ParameterError(f"model must be one of {MODELS}")
    if a.center == b.center:
        raise ParameterError("events need distinct centers")
    if len(a.center) != 2 or len(b.center) != 2:
        raise ParameterError("covariance estimation is implemented for d=2")
    if n <= 0:
        raise ParameterError("n must be positive")
    D = max(abs(x - y) for x, y in zip(a.center, b.center))
    if D <= 2 * max(a.L, b.L):
        raise ParameterError("need separation D > 2L; the bound does not apply")
    if model == "independent":
        if lam is None:
            raise ParameterError("independent model needs lambda")
    spec, ca, cb = pair_geometry(a, b)
    ev_a = LocalEventSpec(ca, a.L, a.event)
    ev_b = LocalEventSpec(cb, b.L, b.event)
    n_chunks = (n + COV_CHUNK - 1) // COV_CHUNK

    def run_chunk(c: int) -> tuple[int, int, int]:
        count = min(COV_CHUNK, n - c * COV_CHUNK)
        crng = rng.derive("cov-chunk", c)
        if model == "independent":
            u_sites = site_uniforms(spec, crng, batch=count)
            u_pairs = pair_uniforms(spec, crng, batch=count)
            open0, open1 = edge_arrays_from_uniforms(spec, p, lam, u_sites, u_pairs)
        else:
            arrays0 = np.empty((count,) + spec.extent, dtype=bool)
            arrays1 = np.empty((count,) + spec.extent, dtype=bool)
            for i in range(count):
                rep = crng.derive(i)
                seg = extract_pairs(sample_sites(spec, p, rep.derive("sites")))
                states = sample_one_choice(seg, rep.derive("choices"))
                cfg = project_edges(seg, states)
                arrays0[i] = cfg.open[0]
                arrays1[i] = cfg.open[1]
            open0, open1 = arrays0, arrays1
        ia = evaluate_events(open0, open1, ev_a)
        ib = evaluate_events(open0, open1, ev_b)
        return int((ia & ib).sum()), int(ia.sum()), int(ib.sum())

    threads = alignperc_thread_count()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run_chunk, range(n_chunks)))
    else:
        parts = [run_chunk(c) for c in range(n_chunks)]
    n11 = sum(part[0] for part in parts)
    na = sum(part[1] for part in parts)
    nb = sum(part[2] for part in parts)
    return CovarianceEstimate(
        a, b, float(p), None if model == "one_choice" else float(lam),
        model, n, n11, na, nb, rng.master,
    )


def dominance_cells(
    L_values=(1, 2),
    D_values=(6, 10, 14),
    p_values=(0.2, 0.5, 0.8),
    lam_values=(0.3, 0.7),
) -> list[tuple[float, int, float, float]]:
    """The standard (L, D, p, lambda) grid; lambda alternates by cell parity
    so both values appear across every L, D, p slice."""
    cells = []
    idx = 0
    for L in L_values:
        for D in D_values:
            for p in p_values:
                cells.append((float(L), int(D), float(p), lam_values[idx % len(lam_values)]))
                idx += 1
    return cells
