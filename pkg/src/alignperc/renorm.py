"""Multiscale renormalization machinery.

Scale ladder, boundary covering nets, Monte Carlo estimation of the
level-k seed-event probabilities for the two event families, recurrence
and inductive-decay checkers with conservative interval arithmetic, and
the closed-form triggers that start the induction.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

from alignperc.cluster import annulus_circuit_absent, one_arm
from alignperc.errors import ParameterError, SizeRefusalError
from alignperc.lattice import (
    LatticeSpec,
    alignperc_thread_count,
    ball_radius,
    box_edge_count,
    max_sites_budget,
    shell_size,
)
from alignperc.model import (
    EdgeConfig,
    edge_arrays_from_uniforms,
    pair_uniforms,
    site_uniforms,
)
from alignperc.rng import RandomSource
from alignperc.stats import BinomialEstimate

EVENT_FAMILIES = ("circuit_absent", "one_arm")

QK_CHUNK = 32  # fixed replicate chunking; must never depend on thread count


# ---------------------------------------------------------------------------
# scale ladder


@dataclass(frozen=True)
class ScaleLadder:
    """Scales L_k with L_{k+1} = L_k^{3/2}, computed iteratively."""

    L0: float
    levels: tuple[float, ...]

    @property
    def kmax(self) -> int:
        return len(self.levels) - 1

    def level(self, k: int) -> float:
        if not (0 <= k <= self.kmax):
            raise ParameterError(f"level {k} outside ladder range 0..{self.kmax}")
        return self.levels[k]


def ladder(L0: float, kmax: int) -> ScaleLadder:
    L0 = float(L0)
    if L0 < 2:
        raise ParameterError("L0 must be at least 2")
    if kmax < 0:
        raise ParameterError("kmax must be nonnegative")
    levels = [L0]
    for k in range(kmax):
        try:
            nxt = levels[-1] ** 1.5
        except OverflowError:
            nxt = math.inf
        if not math.isfinite(nxt):
            raise ParameterError(
                f"scale overflow at level {k + 1}; largest usable kmax is {k}"
            )
        levels.append(nxt)
    return ScaleLadder(L0, tuple(levels))


# ---------------------------------------------------------------------------
# covering nets


@dataclass(frozen=True)
class CoverSet:
    """Net of centers whose radius-floor(L_k) boxes cover a shell."""

    which: int
    k: int
    d: int
    target_radius: int
    ball_radius: int
    separation_radius: int
    points: tuple[tuple[int, ...], ...]

    @property
    def size(self) -> int:
        return len(self.points)


def _shell_points(radius: int, d: int) -> np.ndarray:
    """All sites at sup-norm distance exactly radius from the origin,
    in lexicographic order."""
    side = np.arange(-radius, radius + 1)
    grids = np.meshgrid(*[side] * d, indexing="ij")
    coords = np.stack([g.ravel() for g in grids], axis=1)
    on_shell = np.abs(coords).max(axis=1) == radius
    return coords[on_shell]


def cover_sets(lad: ScaleLadder, k: int, which: int, d: int) -> CoverSet:
    """Greedy separated net on the target shell, then verified as a cover.

    Centers are accepted while their half-scale boxes stay pairwise
    disjoint; maximality makes the full-scale boxes cover the shell.  Both
    the covering property and the explicit size bounds are asserted here.
    """
    if which not in (1, 2):
        raise ParameterError("which must be 1 or 2")
    if d < 1:
        raise ParameterError("d must be positive")
    L_k = lad.level(k)
    L_k1 = lad.level(k + 1)
    target_radius = ball_radius(L_k1 if which == 1 else 5 * L_k1)
    r_ball = ball_radius(L_k)
    r_half = ball_radius(L_k / 2)
    n_shell = shell_size(target_radius, d)
    if n_shell > max_sites_budget():
        raise SizeRefusalError(
            f"shell of {n_shell} sites exceeds the site budget; reduce k"
        )
    shell = _shell_points(target_radius, d)
    chosen: list[np.ndarray] = []
    min_sep = 2 * r_half + 1  # boxes of radius r_half are disjoint iff this far
    for point in shell:
        ok = True
        for other in chosen:
            if np.abs(point - other).max() < min_sep:
                ok = False
                break
        if ok:
            chosen.append(point)
    net = np.array(chosen)

    # exhaustive covering check: every shell site within r_ball of the net
    dist = np.abs(shell[:, None, :] - net[None, :, :]).max(axis=2).min(axis=1)
    if int(dist.max(initial=0)) > r_ball:
        raise AssertionError("covering verification failed; this is a bug")

    # size bounds: the disjoint half-boxes each eat at least r_half^(d-1)
    # shell sites, and each full box covers at most d (2 r_ball + 1)^(d-1)
    exact_shell = shell_size(target_radius, d)
    upper = exact_shell / max(r_half, 1) ** (d - 1)
    paper_style_upper = 2 * d * (2 * target_radius + 1) ** (d - 1) / max(r_half, 1) ** (d - 1)
    lower = exact_shell / (d * (2 * r_ball + 1) ** (d - 1))
    if not (lower <= len(net) <= upper <= paper_style_upper + 1e-9):
        raise AssertionError(
            f"net size {len(net)} violates bounds [{lower}, {upper}]"
        )
    return CoverSet(
        which,
        k,
        d,
        target_radius,
        r_ball,
        r_half,
        tuple(tuple(int(c) for c in p) for p in net),
    )


# ---------------------------------------------------------------------------
# constants


@dataclass(frozen=True)
class RecurrenceConstants:
    """Constants of the two-scale recurrence bound."""

    d: int
    c0: float
    c1: float

    @staticmethod
    def alpha(p: float) -> float:
        if not (0 < p <= 1):
            raise ParameterError("alpha(p) needs p in (0, 1]")
        return -math.log1p(-p) if p < 1 else math.inf


def derive_constants(d: int) -> RecurrenceConstants:
    """Constants from the covering and decay bounds.

    Net sizes: a shell of radius R holds at most 2d(2R+1)^(d-1) sites and
    each disjoint half-scale box eats at least floor(L/2)^(d-1) >=
    (L/4)^(d-1) of them, so with R <= 5 L_next and 2 floor(5 L_next)+1 <=
    11 L_next the nets obey |net| <= 2d 44^(d-1) (L_next/L)^(d-1) =: c3 (...).
    Covariance of the two cascaded events, supported in radius-10L boxes:
    4 (2*10L+1)^(d-1) e^(-a (D - 20L)) <= 4*21^(d-1) L^(d-1) e^(...) =: c2 (...).
    The union bound over net pairs then gives c0 = c3^2 and c1 = c3^2 c2.
    """
    if d < 1:
        raise ParameterError("d must be positive")
    c3 = 2 * d * 44 ** (d - 1)
    c2 = 4 * 21 ** (d - 1)
    return RecurrenceConstants(d, float(c3 * c3), float(c3 * c3 * c2))


# ---------------------------------------------------------------------------
# q_k estimation


@dataclass(frozen=True)
class EventEstimate:
    """Monte Carlo estimate of one seed-event probability."""

    family: str
    k: int
    L: float
    p: float
    lam: float
    d: int
    boundary: str
    n: int
    successes: int
    master: int

    @property
    def binomial(self) -> BinomialEstimate:
        return BinomialEstimate(self.successes, self.n)

    @property
    def point(self) -> float:
        return self.binomial.point

    @property
    def lower(self) -> float:
        return self.binomial.lower

    @property
    def upper(self) -> float:
        return self.binomial.upper

    def to_dict(self) -> dict:
        return {
            "schema": "alignperc.event_estimate.v1",
            "family": self.family,
            "k": self.k,
            "L": self.L,
            "p": self.p,
            "lambda": self.lam,
            "d": self.d,
            "boundary": self.boundary,
            "n": self.n,
            "successes": self.successes,
            "master": self.master,
            "point": self.point,
            "lower": self.lower,
            "upper": self.upper,
        }

    @staticmethod
    def from_dict(obj: dict) -> "EventEstimate":
        if obj.get("schema") != "alignperc.event_estimate.v1":
            raise ParameterError("unknown estimate schema")
        return EventEstimate(
            obj["family"],
            int(obj["k"]),
            float(obj["L"]),
            float(obj["p"]),
            float(obj["lambda"]),
            int(obj["d"]),
            obj["boundary"],
            int(obj["n"]),
            int(obj["successes"]),
            int(obj["master"]),
        )


def qk_geometry(L: float, d: int, boundary: str = "occupied_frame") -> LatticeSpec:
    """Simulation box of side 2 floor(12 L) + 1, comfortably past 10 L."""
    side = 2 * int(np.floor(12 * L)) + 1
    return LatticeSpec(d, (side,) * d, boundary)


def _qk_chunk_successes(spec, center, family, L, p, lam, chunk_rng, count) -> int:
    u_sites = site_uniforms(spec, chunk_rng, batch=count)
    u_pairs = pair_uniforms(spec, chunk_rng, batch=count)
    opened = edge_arrays_from_uniforms(spec, p, lam, u_sites, u_pairs)
    hits = 0
    for i in range(count):
        cfg = EdgeConfig(spec, tuple(arr[i] for arr in opened))
        if family == "circuit_absent":
            hits += annulus_circuit_absent(cfg, center, L)
        else:
            hits += one_arm(cfg, center, L)
    return hits


def estimate_qk(
    family: str,
    lad: ScaleLadder,
    k: int,
    p: float,
    lam: float,
    n: int,
    rng: RandomSource,
    d: int = 2,
    boundary: str = "occupied_frame",
    center: tuple[int, ...] | None = None,
) -> EventEstimate:
    """Estimate the level-k event probability over n replicates.

    Replicates are drawn in fixed-size chunks, each from its own derived
    stream, and per-chunk success counts are summed; the result is a pure
    function of the master seed, independent of the worker thread count.
    A non-default center is for translation-invariance diagnostics; the
    caller must keep the radius-floor(10 L_k) window inside the box.
    """
    if family not in EVENT_FAMILIES:
        raise ParameterError(f"unknown family {family!r}; pick from {EVENT_FAMILIES}")
    if family == "circuit_absent" and d != 2:
        raise ParameterError("circuit events require d=2")
    if n <= 0:
        raise ParameterError("n must be positive")
    L = lad.level(k)
    spec = qk_geometry(L, d, boundary)
    if center is None:
        center = tuple(e // 2 for e in spec.extent)
    n_chunks = (n + QK_CHUNK - 1) // QK_CHUNK

    def run_chunk(c: int) -> int:
        count = min(QK_CHUNK, n - c * QK_CHUNK)
        return _qk_chunk_successes(
            spec, center, family, L, p, lam, rng.derive("qk-chunk", c), count
        )

    threads = alignperc_thread_count()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            successes = sum(pool.map(run_chunk, range(n_chunks)))
    else:
        successes = sum(run_chunk(c) for c in range(n_chunks))
    return EventEstimate(
        family, k, L, float(p), float(lam), d, boundary, n, int(successes), rng.master
    )


# ---------------------------------------------------------------------------
# checkers


@dataclass(frozen=True)
class RecurrenceReport:
    k: int
    lhs_upper: float
    quadratic_term: float
    error_term: float
    error_underflow: bool
    bound: float
    slack: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "schema": "alignperc.recurrence_report.v1",
            "k": self.k,
            "lhs_upper": self.lhs_upper,
            "quadratic_term": self.quadratic_term,
            "error_term": self.error_term,
            "error_underflow": self.error_underflow,
            "bound": self.bound,
            "slack": self.slack,
            "passed": self.passed,
        }


def recurrence_error_term(consts: RecurrenceConstants, L: float, p: float, d: int):
    """c1 L^(2d-2) e^(-3 a(p) L^(3/2)); flags hard underflow to zero."""
    exponent = -3.0 * RecurrenceConstants.alpha(p) * L**1.5
    raw = math.exp(exponent) if exponent > -745.0 else 0.0
    underflow = exponent <= -745.0
    return consts.c1 * L ** (2 * d - 2) * raw, underflow


def recurrence_check(
    q_k: EventEstimate,
    q_k1: EventEstimate,
    consts: RecurrenceConstants,
    lad: ScaleLadder,
    k: int,
) -> RecurrenceReport:
    """Conservative two-scale check: upper CI of q_{k+1} against the bound
    computed from the upper CI of q_k."""
    for name in ("family", "p", "lam", "d", "boundary"):
        if getattr(q_k, name) != getattr(q_k1, name):
            raise ParameterError(f"estimates disagree on {name}")
    if q_k.k != k or q_k1.k != k + 1:
        raise ParameterError("estimates must sit at levels k and k+1")
    if consts.d != q_k.d:
        raise ParameterError("constants were derived for a different dimension")
    d = q_k.d
    L = lad.level(k)
    quadratic = consts.c0 * L ** (d - 1) * q_k.upper**2
    error, underflow = recurrence_error_term(consts, L, q_k.p, d)
    bound = quadratic + error
    lhs = q_k1.upper
    return RecurrenceReport(
        k, lhs, quadratic, error, underflow, bound, bound - lhs, lhs <= bound
    )


@dataclass(frozen=True)
class DecayLevel:
    k: int
    L: float
    threshold: float
    point: float
    lower: float
    upper: float
    sound: bool
    refuted: bool


@dataclass(frozen=True)
class DecayReport:
    """Per-level comparison of q_k intervals with the L_k^(-2d) thresholds.

    A level is *sound* when even its upper confidence limit sits below the
    threshold, and *refuted* when its lower confidence limit exceeds it.
    Deep levels have thresholds far below what n replicates can resolve, so
    a zero count there stays merely consistent; `passed` records that no
    level refutes the decay, `all_sound` the demanding reading, and
    `first_unsound` the first level that fails certification.
    """

    levels: tuple[DecayLevel, ...]
    all_sound: bool
    any_refuted: bool
    first_unsound: int | None

    @property
    def passed(self) -> bool:
        return not self.any_refuted

    def to_dict(self) -> dict:
        return {
            "schema": "alignperc.decay_report.v1",
            "levels": [vars(l) for l in self.levels],
            "all_sound": self.all_sound,
            "any_refuted": self.any_refuted,
            "first_unsound": self.first_unsound,
            "passed": self.passed,
        }


def inductive_decay_check(estimates, lad: ScaleLadder, d: int) -> DecayReport:
    if not estimates:
        raise ParameterError("no estimates given")
    ks = [e.k for e in estimates]
    if ks != list(range(ks[0], ks[0] + len(ks))):
        raise ParameterError("estimate levels must be consecutive")
    levels = []
    for est in estimates:
        if est.d != d:
            raise ParameterError("estimate dimension mismatch")
        L = lad.level(est.k)
        threshold = L ** (-2 * d)
        levels.append(
            DecayLevel(
                est.k,
                L,
                threshold,
                est.point,
                est.lower,
                est.upper,
                est.upper <= threshold,
                est.lower > threshold,
            )
        )
    unsound = [l.k for l in levels if not l.sound]
    return DecayReport(
        tuple(levels),
        all(l.sound for l in levels),
        any(l.refuted for l in levels),
        unsound[0] if unsound else None,
    )


def k0(p: float, d: int, consts: RecurrenceConstants, lad: ScaleLadder) -> int:
    """Smallest ladder level where both inductive-step inequalities hold."""
    if not (0 < p <= 1):
        raise ParameterError("p must lie in (0, 1]")
    for k in range(lad.kmax + 1):
        L = lad.level(k)
        first = consts.c0 / L <= 0.5
        exponent = -3.0 * RecurrenceConstants.alpha(p) * L**1.5
        second = consts.c1 * L ** (5 * d - 2) * (
            math.exp(exponent) if exponent > -745.0 else 0.0
        ) <= 0.5
        if first and second:
            return k
    raise ParameterError(
        f"no level up to kmax={lad.kmax} satisfies the inductive-step "
        f"inequalities; extend the ladder (c0={consts.c0}, c1={consts.c1})"
    )


# ---------------------------------------------------------------------------
# triggers


@dataclass(frozen=True)
class LambdaTrigger:
    k0: int
    L: float
    n_edges: int
    lambda0: float
    one_minus_lambda0: float
    threshold: float

    @property
    def guarantee(self) -> str:
        return (
            f"for every lambda >= 1 - {self.one_minus_lambda0:.6e}, the level-{self.k0} "
            f"circuit-absence probability is at most {self.threshold:.6e}"
        )

    def to_dict(self) -> dict:
        return {
            "schema": "alignperc.lambda_trigger.v1",
            "k0": self.k0,
            "L": self.L,
            "n_edges": self.n_edges,
            "lambda0": self.lambda0,
            "one_minus_lambda0": self.one_minus_lambda0,
            "threshold": self.threshold,
            "guarantee": self.guarantee,
        }


def lambda0_trigger(
    p: float, d: int, lad: ScaleLadder, consts: RecurrenceConstants
) -> LambdaTrigger:
    """Pair-density trigger: above lambda0 the level-k0 event probability
    is at most L_{k0}^{-4}.

    With every edge having an endpoint in B(o, 10 L_{k0}) open, no circuit
    around the inner box is missing, so the event needs a closed edge
    there; the chance of that is at most 1 - lambda^N with N the exact
    count of such edges.  Solving 1 - lambda^N = L^{-4} gives lambda0.
    The complementary value is computed in log space because lambda0 sits
    within float rounding of 1 at large scales.
    """
    if d != 2:
        raise ParameterError("the circuit-family trigger is stated for d=2")
    level = k0(p, d, consts, lad)
    L = lad.level(level)
    radius = ball_radius(10 * L)
    n_edges = box_edge_count(radius, d)
    threshold = L**-4.0
    # lambda0 = (1 - L^-4)^(1/N): log1p keeps the tiny complement exact
    log_lambda0 = math.log1p(-threshold) / n_edges
    lambda0 = math.exp(log_lambda0)
    one_minus = -math.expm1(log_lambda0)
    return LambdaTrigger(level, L, n_edges, lambda0, one_minus, threshold)


@dataclass(frozen=True)
class PTrigger:
    k_tilde: int
    k0: int
    k1: int
    L: float
    n_sites: int
    p0: float
    one_minus_p0: float
    threshold: float

    def to_dict(self) -> dict:
        return {
            "schema": "alignperc.p_trigger.v1",
            "k_tilde": self.k_tilde,
            "k0": self.k0,
            "k1": self.k1,
            "L": self.L,
            "n_sites": self.n_sites,
            "p0": self.p0,
            "one_minus_p0": self.one_minus_p0,
            "threshold": self.threshold,
        }


def boundary_constant(d: int) -> float:
    """Shell-size smoothing: |shell(L)| <= 2d (2 floor(L) + 1)^(d-1)
    <= 2d 3^(d-1) L^(d-1) for L >= 1."""
    return 2 * d * 3 ** (d - 1)


def p0_trigger(
    lam: float,
    d: int,
    lad: ScaleLadder,
    consts: RecurrenceConstants,
    psi_hat: float,
    p_for_k0: float = 0.5,
) -> PTrigger:
    """Occupancy trigger for the one-arm family.

    k_tilde is the first level where the subcritical one-arm tail
    c(d) L^(d-1) e^(-psi L) drops under half the target threshold; above
    p0 the chance of any vacancy in B(o, 10 L_{k1}) stays under the other
    half.  The level-k0 restriction is evaluated at the least favorable
    occupancy p = 1/2 by default, configurable via p_for_k0.
    """
    if psi_hat <= 0:
        raise ParameterError("psi_hat must be positive")
    if not (0 <= lam < 1):
        raise ParameterError("lambda must be subcritical")
    c_d = boundary_constant(d)
    k_tilde = None
    for k in range(lad.kmax + 1):
        L = lad.level(k)
        if c_d * L ** (d - 1) * math.exp(max(-745.0, -psi_hat * L)) <= 0.5 * L ** (-2 * d):
            k_tilde = k
            break
    if k_tilde is None:
        raise ParameterError("no level reaches the one-arm tail condition; extend kmax")
    level0 = k0(p_for_k0, d, consts, lad)
    k1 = max(k_tilde, level0)
    L = lad.level(k1)
    radius = ball_radius(10 * L)
    n_sites = (2 * radius + 1) ** d
    threshold = 0.5 * L ** (-2 * d)
    log_p0 = math.log1p(-threshold) / n_sites
    return PTrigger(
        k_tilde,
        level0,
        k1,
        L,
        n_sites,
        math.exp(log_p0),
        -math.expm1(log_p0),
        threshold,
    )


# ---------------------------------------------------------------------------
# subcritical one-arm decay rate


@dataclass(frozen=True)
class PsiEstimate:
    lam: float
    d: int
    sizes: tuple[int, ...]
    log_probs: tuple[float, ...]
    psi_hat: float
    se: float
    r_squared: float
    infinite: bool


@njit(cache=True)
def _counter_uniform(x):
    """SplitMix64 finalizer as a counter-based uniform in [0, 1)."""
    z = (x + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)) * 2.0**-53


@njit(cache=True)
def _bond_arm_hits(seeds, radius, lam):
    """Count replicates whose center reaches the radius-`radius` shell.

    Bonds are Bernoulli(lam), generated lazily: bond (anchor, axis) of
    replicate r is open iff the counter uniform of seed[r] xor the bond's
    code is below lam.  Subcritical clusters are tiny, so only the edges
    the search touches are ever drawn.
    """
    side = 2 * radius + 1
    visited = np.zeros((side, side), dtype=np.uint8)
    stack = np.empty((side * side, 2), dtype=np.int64)
    touched = np.empty((side * side, 2), dtype=np.int64)
    hits = 0
    for r in range(seeds.shape[0]):
        base = seeds[r]
        sp = 0
        nt = 0
        stack[sp, 0] = radius
        stack[sp, 1] = radius
        sp += 1
        visited[radius, radius] = 1
        touched[nt, 0] = radius
        touched[nt, 1] = radius
        nt += 1
        reached = False
        while sp > 0:
            sp -= 1
            i = stack[sp, 0]
            j = stack[sp, 1]
            if max(abs(i - radius), abs(j - radius)) == radius:
                reached = True
                break
            for step in range(4):
                if step == 0:
                    ni, nj, ai, aj, ax = i + 1, j, i, j, 0
                elif step == 1:
                    ni, nj, ai, aj, ax = i - 1, j, i - 1, j, 0
                elif step == 2:
                    ni, nj, ai, aj, ax = i, j + 1, i, j, 1
                else:
                    ni, nj, ai, aj, ax = i, j - 1, i, j - 1, 1
                if ni < 0 or nj < 0 or ni >= side or nj >= side:
                    continue
                if visited[ni, nj]:
                    continue
                code = np.uint64((ai * side + aj) * 2 + ax)
                if _counter_uniform(base ^ code) < lam:
                    visited[ni, nj] = 1
                    touched[nt, 0] = ni
                    touched[nt, 1] = nj
                    nt += 1
                    stack[sp, 0] = ni
                    stack[sp, 1] = nj
                    sp += 1
        for t in range(nt):
            visited[touched[t, 0], touched[t, 1]] = 0
        if reached:
            hits += 1
    return hits


def estimate_psi(
    lam: float,
    d: int,
    sizes,
    n: int,
    rng: RandomSource,
    min_r_squared: float = 0.95,
) -> PsiEstimate:
    """Fit the exponential decay rate of the Bernoulli-bond one-arm event.

    Records how often the center of a radius-R box reaches the radius-R
    shell through open Bernoulli(lambda) bonds; the negated slope of
    log-probability against R estimates the decay rate.  For d=2 the
    search draws bonds lazily from a counter stream, so the cost per
    replicate is the subcritical cluster size rather than the box area.
    """
    from alignperc.model import sample_bernoulli_bonds
    from alignperc.stats import slope_fit

    sizes = sorted(int(r) for r in sizes)
    if len(sizes) < 3:
        raise ParameterError("need at least three radii for a slope fit")
    if sizes[0] < 1:
        raise ParameterError("radii must be positive")
    if not (0 <= lam < 1):
        raise ParameterError("lambda must be subcritical for decay")
    if n <= 0:
        raise ParameterError("n must be positive")
    if lam == 0.0:
        return PsiEstimate(lam, d, tuple(sizes), (), math.inf, 0.0, 1.0, True)
    counts = []
    for idx, radius in enumerate(sizes):
        if d == 2:
            seeds = rng.derive("psi", idx).generator().integers(
                0, 2**64, size=n, dtype=np.uint64
            )
            hits = int(_bond_arm_hits(seeds, radius, lam))
        else:
            side = 2 * radius + 1
            spec = LatticeSpec(d, (side,) * d, "closed")
            center = (radius,) * d
            hits = 0
            for rep in range(n):
                cfg = sample_bernoulli_bonds(spec, lam, rng.derive("psi", idx, rep))
                hits += one_arm_window(cfg, center, radius)
        counts.append(hits)
    if any(c == 0 for c in counts):
        raise ParameterError(
            "one-arm count hit zero; radii too large for this lambda and n"
        )
    xs = np.array(sizes, dtype=float)
    ys = np.log(np.array(counts, dtype=float) / n)
    slope, _, se, r2 = slope_fit(xs, ys)
    if r2 < min_r_squared:
        raise ParameterError(
            f"decay fit quality {r2:.3f} below {min_r_squared}; "
            "lambda may be too close to critical"
        )
    return PsiEstimate(
        lam, d, tuple(sizes), tuple(ys.tolist()), -slope, se, r2, False
    )


def one_arm_window(edges: EdgeConfig, center, radius: int) -> bool:
    """Center-to-shell connection inside one box (shell at exactly radius)."""
    from alignperc.cluster import components

    labels = components(edges).labels
    d = edges.spec.d
    side = 2 * radius + 1
    grids = np.meshgrid(
        *[np.abs(np.arange(side) - radius) for _ in range(d)], indexing="ij"
    )
    rad = np.maximum.reduce(grids)
    shell_labels = np.unique(labels[rad == radius])
    return bool(np.isin(labels[center], shell_labels))


# ---------------------------------------------------------------------------
# half-line cover


@dataclass(frozen=True)
class HalflineCover:
    points: tuple[tuple[tuple[int, int], ...], ...]
    s_values: tuple[int, ...]
    s_bounds: tuple[float, ...]
    summability_terms: tuple[float, ...]
    summability_total: float


def halfline_cover(lad: ScaleLadder, kmax: int) -> HalflineCover:
    """Deterministic box centers covering the right half-line per level.

    Level-k centers start at ceil(10 L_k) and advance by 2 floor(L_k)
    until reaching the first level-(k+1) center; consecutive radius-L_k
    boxes overlap, so their union covers the whole stretch.  Sizes obey
    s_k <= 5 L_k^(1/2), and the diagnostic series sum s_k 5 L_k^(-7/2)
    (an upper bound for sum s_k q_k under the proven decay) is reported.
    """
    if kmax < 0 or kmax > lad.kmax - 1:
        raise ParameterError("kmax must leave one ladder level of headroom")
    all_points = []
    s_values = []
    s_bounds = []
    terms = []
    for k in range(kmax + 1):
        L_k = lad.level(k)
        start = math.ceil(10 * L_k)
        step = 2 * int(math.floor(L_k))
        next_start = math.ceil(10 * lad.level(k + 1))
        xs = []
        i = 1
        while True:
            abscissa = start + (i - 1) * step
            xs.append((abscissa, 0))
            if abscissa >= next_start:
                break
            i += 1
        s_k = len(xs)
        bound = 5 * L_k**0.5
        if s_k > bound:
            raise AssertionError(f"cover size {s_k} exceeds 5 sqrt(L_{k})")
        # consecutive boxes must be adjacent or overlapping
        r = int(math.floor(L_k))
        for (a, _), (b, _) in zip(xs, xs[1:]):
            if b - r > a + r + 1:
                raise AssertionError("gap between consecutive cover boxes")
        all_points.append(tuple(xs))
        s_values.append(s_k)
        s_bounds.append(bound)
        terms.append(s_k * 5 * L_k ** (-3.5))
    return HalflineCover(
        tuple(all_points),
        tuple(s_values),
        tuple(s_bounds),
        tuple(terms),
        math.fsum(terms),
    )


# ---------------------------------------------------------------------------
# cascading witnesses


def cascade_witnesses(
    edges: EdgeConfig,
    center: tuple[int, ...],
    lad: ScaleLadder,
    k: int,
    family: str,
):
    """Find the two-net witness pair behind a level-(k+1) event.

    When the level-(k+1) event holds at `center`, the crossing object
    (open arm or radial dual path) meets both covering nets, realizing
    the level-k event at one point of each with centers at least
    4 floor(L_{k+1}) apart.  Returns such a pair in absolute coordinates,
    or None when no pair qualifies.
    """
    if family not in EVENT_FAMILIES:
        raise ParameterError(f"unknown family {family!r}; pick from {EVENT_FAMILIES}")
    d = edges.spec.d
    L_k = lad.level(k)
    min_sep = 4 * int(np.floor(lad.level(k + 1)))
    event = annulus_circuit_absent if family == "circuit_absent" else one_arm
    hits = []
    for which in (1, 2):
        net = cover_sets(lad, k, which, d)
        hits.append(
            [
                tuple(c + o for c, o in zip(center, offset))
                for offset in net.points
                if event(edges, tuple(c + o for c, o in zip(center, offset)), L_k)
            ]
        )
    for x1 in hits[0]:
        for x2 in hits[1]:
            if max(abs(a - b) for a, b in zip(x1, x2)) >= min_sep:
                return x1, x2
    return None
