"""Covariance decay tests: bound arithmetic, decoupling event, dominance."""

import inspect
import itertools
import json
import math

import numpy as np
import pytest

from alignperc.covdecay import (
    CovarianceEstimate,
    LocalEventSpec,
    covariance_estimate,
    decay_bound,
    decoupling_event_probability,
    dominance_cells,
    evaluate_events,
    pair_geometry,
)
from alignperc.errors import ParameterError, SizeRefusalError
from alignperc.rng import RandomSource


# ---------------------------------------------------------------------------
# event specs


def test_local_event_spec_validation_and_roundtrip():
    ev = LocalEventSpec((3, -2), 2.5, "one_arm")
    assert ev.radius == 2
    assert LocalEventSpec.from_dict(ev.to_dict()) == ev
    with pytest.raises(ParameterError):
        LocalEventSpec((0, 0), 2, "bogus")
    with pytest.raises(ParameterError):
        LocalEventSpec((0, 0), 0.5, "one_arm")


def test_event_semantics_hand_configs():
    # one replicate on a 9x9 field, event box radius 1 at (4, 4)
    open0 = np.zeros((1, 9, 9), dtype=bool)
    open1 = np.zeros((1, 9, 9), dtype=bool)

    arm = LocalEventSpec((4, 4), 1, "one_arm")
    assert not evaluate_events(open0, open1, arm)[0]
    open1[0, 4, 4] = True  # edge (4,4)-(4,5) reaches the shell
    assert evaluate_events(open0, open1, arm)[0]

    cross = LocalEventSpec((4, 4), 1, "crossing")
    assert not evaluate_events(open0, open1, cross)[0]
    open0[0, 3, 4] = True  # (3,4)-(4,4)
    open0[0, 4, 4] = True  # (4,4)-(5,4)
    assert evaluate_events(open0, open1, cross)[0]
    # drop the second rung; an edge exiting the box may not substitute
    open0[0, 4, 4] = False
    open1[0, 3, 5] = True  # (3,5)-(3,6) leaves the box
    assert not evaluate_events(open0, open1, cross)[0]

    allop = LocalEventSpec((4, 4), 1, "all_open")
    open0[:] = True
    open1[:] = True
    assert evaluate_events(open0, open1, allop)[0]
    open1[0, 3, 3] = False  # edge (3,3)-(3,4), both endpoints in the box
    assert not evaluate_events(open0, open1, allop)[0]
    open1[0, 3, 3] = True
    open0[0, 5, 5] = False  # edge (5,5)-(6,5) leaves the box: irrelevant
    assert evaluate_events(open0, open1, allop)[0]


def test_events_measurable_on_box_edges_only():
    rng = np.random.default_rng(2024)
    for _ in range(30):
        open0 = rng.random((1, 11, 11)) < 0.5
        open1 = rng.random((1, 11, 11)) < 0.5
        base = {}
        for kind in ("all_open", "one_arm", "crossing"):
            ev = LocalEventSpec((5, 5), 2, kind)
            base[kind] = bool(evaluate_events(open0, open1, ev)[0])
        # flip only edges with an endpoint outside B((5,5), 2)
        o0, o1 = open0.copy(), open1.copy()
        for arr, axis in ((o0, 0), (o1, 1)):
            for i in range(11):
                for j in range(11):
                    a = (i, j)
                    b = (i + 1, j) if axis == 0 else (i, j + 1)
                    inside = (
                        max(abs(a[0] - 5), abs(a[1] - 5)) <= 2
                        and max(abs(b[0] - 5), abs(b[1] - 5)) <= 2
                    )
                    if not inside and rng.random() < 0.5:
                        arr[0, i, j] = not arr[0, i, j]
        for kind in ("all_open", "one_arm", "crossing"):
            ev = LocalEventSpec((5, 5), 2, kind)
            assert bool(evaluate_events(o0, o1, ev)[0]) == base[kind]


# ---------------------------------------------------------------------------
# bound


def test_decay_bound_frozen_example():
    p = 1 - math.exp(-1)
    assert decay_bound(1, 5, p, 2) == pytest.approx(12 * math.exp(-3), rel=1e-14)
    assert decay_bound(1, 5, p, 2) == pytest.approx(0.5974448204143673, rel=1e-12)


def test_decay_bound_limits_and_validation():
    assert decay_bound(1, 9, 0.5, 2) < decay_bound(1, 7, 0.5, 2)
    assert decay_bound(1, 100000, 0.5, 2) == 0.0
    assert decay_bound(1, 5, 1.0, 2) == 0.0
    with pytest.raises(ParameterError):
        decay_bound(2, 4, 0.5, 2)
    with pytest.raises(ParameterError):
        decay_bound(1, 5, 0.0, 2)
    sig = inspect.signature(decay_bound)
    assert not any("lam" in name for name in sig.parameters)


# ---------------------------------------------------------------------------
# decoupling event


def _brute_decoupling(r, D, p, n_lines):
    """Oracle: enumerate occupancy of the gap segment of each line."""
    gap = D - 2 * r + 1
    total = 0.0
    for bits in itertools.product((0, 1), repeat=n_lines * gap):
        weight = 1.0
        for b in bits:
            weight *= p if b else (1 - p)
        rows = [bits[i * gap : (i + 1) * gap] for i in range(n_lines)]
        if any(not any(row) for row in rows):
            total += weight
    return total


def test_decoupling_exact_matches_brute_force():
    rep = decoupling_event_probability(1, 4, 0.3, 2)
    assert rep.n_lines == 3 and rep.gap_sites == 3
    assert rep.exact == pytest.approx(_brute_decoupling(1, 4, 0.3, 3), abs=1e-14)
    rep2 = decoupling_event_probability(1, 6, 0.45, 2, offset=(1,))
    assert rep2.n_lines == 2
    assert rep2.exact == pytest.approx(_brute_decoupling(1, 6, 0.45, 2), abs=1e-14)


def test_decoupling_single_line_and_disjoint():
    p = 0.35
    single = decoupling_event_probability(1, 6, p, 2, offset=(2,))
    assert single.n_lines == 1
    assert single.exact == pytest.approx((1 - p) ** 5, rel=1e-14)
    none = decoupling_event_probability(1, 8, p, 2, offset=(5,))
    assert none.n_lines == 0 and none.exact == 0.0


def test_decoupling_union_bound_grid():
    for L in (1, 2, 2.5):
        for D in (6, 9, 14):
            for p in (0.1, 0.5, 0.9):
                rep = decoupling_event_probability(L, D, p, 2)
                assert rep.exact <= rep.union_bound + 1e-12
                assert rep.gap_sites >= D - 2 * L


def test_decoupling_validation():
    with pytest.raises(ParameterError):
        decoupling_event_probability(2, 4, 0.5, 2)
    with pytest.raises(ParameterError):
        decoupling_event_probability(1, 6, 0.5, 2, offset=(1, 1))
    with pytest.raises(ParameterError):
        decoupling_event_probability(1, 6, 0.5, 2, offset=(7,))
    with pytest.raises(SizeRefusalError):
        decoupling_event_probability(2, 5, 0.5, 2, max_lines=3)


# ---------------------------------------------------------------------------
# covariance estimation


def test_geometry_margins():
    a = LocalEventSpec((0, 0), 2, "one_arm")
    b = LocalEventSpec((8, 0), 2, "one_arm")
    spec, ca, cb = pair_geometry(a, b)
    assert spec.extent == (8 + 10 * 2 + 1, 10 * 2 + 1)
    assert spec.boundary == "occupied_frame"
    assert ca == (10, 10) and cb == (18, 10)


def test_trivial_covariances():
    a = LocalEventSpec((0, 0), 1, "all_open")
    b = LocalEventSpec((6, 0), 1, "all_open")
    rng = RandomSource(8).derive("triv")
    full = covariance_estimate(a, b, 0.4, 1.0, 400, rng.derive(1))
    assert full.na == full.nb == full.n11 == 400
    assert full.cov_hat == 0.0
    empty = covariance_estimate(a, b, 0.4, 0.0, 400, rng.derive(2))
    assert empty.na == empty.nb == empty.n11 == 0
    assert empty.cov_hat == 0.0


def test_covariance_validation():
    a = LocalEventSpec((0, 0), 2, "one_arm")
    rng = RandomSource(9)
    with pytest.raises(ParameterError):
        covariance_estimate(a, a, 0.5, 0.5, 100, rng)
    near = LocalEventSpec((3, 0), 2, "one_arm")
    with pytest.raises(ParameterError):
        covariance_estimate(a, near, 0.5, 0.5, 100, rng)
    far = LocalEventSpec((8, 0), 2, "one_arm")
    with pytest.raises(ParameterError):
        covariance_estimate(a, far, 0.5, 0.5, 100, rng, model="bogus")
    with pytest.raises(ParameterError):
        covariance_estimate(a, far, 0.5, None, 100, rng)
    with pytest.raises(ParameterError):
        covariance_estimate(a, far, 0.5, 0.5, 0, rng)


@pytest.mark.parametrize("lam", [0.3, 0.7])
def test_dominance_independent_subgrid(lam):
    rng = RandomSource(41).derive("dom", str(lam))
    for L, D, p in ((1, 6, 0.2), (2, 6, 0.8)):
        for kind in ("all_open", "one_arm", "crossing"):
            a = LocalEventSpec((0, 0), L, kind)
            b = LocalEventSpec((D, 0), L, kind)
            est = covariance_estimate(
                a, b, p, lam, 20_000, rng.derive(kind, L, D, str(p))
            )
            bound = decay_bound(L, D, p, 2)
            assert abs(est.cov_hat) - 3 * est.se <= bound, (L, D, p, kind)


def test_dominance_one_choice_subgrid():
    rng = RandomSource(42).derive("dom-oc")
    cases = [
        (1, 6, 0.2, "all_open"),
        (1, 10, 0.5, "one_arm"),
        (2, 6, 0.8, "crossing"),
    ]
    for L, D, p, kind in cases:
        a = LocalEventSpec((0, 0), L, kind)
        b = LocalEventSpec((D, 0), L, kind)
        est = covariance_estimate(
            a, b, p, None, 2000, rng.derive(kind), model="one_choice"
        )
        assert est.lam is None and est.model == "one_choice"
        bound = decay_bound(L, D, p, 2)
        assert abs(est.cov_hat) - 3 * est.se <= bound, (L, D, p, kind)


def test_covariance_thread_determinism(monkeypatch):
    a = LocalEventSpec((0, 0), 1, "crossing")
    b = LocalEventSpec((7, 1), 1, "one_arm")
    outs = []
    for threads in ("1", "8"):
        monkeypatch.setenv("ALIGNPERC_THREADS", threads)
        est = covariance_estimate(
            a, b, 0.5, 0.6, 1000, RandomSource(55).derive("det")
        )
        outs.append(json.dumps(est.to_dict(), sort_keys=True))
    assert outs[0] == outs[1]
    oc = []
    for threads in ("1", "8"):
        monkeypatch.setenv("ALIGNPERC_THREADS", threads)
        est = covariance_estimate(
            a, b, 0.5, None, 300, RandomSource(55).derive("det-oc"),
            model="one_choice",
        )
        oc.append(json.dumps(est.to_dict(), sort_keys=True))
    assert oc[0] == oc[1]


def test_mixed_event_pair_and_serialization():
    a = LocalEventSpec((0, 0), 1, "all_open")
    b = LocalEventSpec((0, 9), 2, "crossing")
    est = covariance_estimate(a, b, 0.6, 0.5, 3000, RandomSource(66).derive("mx"))
    assert est.separation == 9
    payload = est.to_dict()
    assert payload["a"]["event"] == "all_open"
    assert payload["n11"] <= min(payload["na"], payload["nb"])
    assert est.se >= 0


def test_dominance_cells_grid_shape():
    cells = dominance_cells()
    assert len(cells) == 18
    assert {c[3] for c in cells} == {0.3, 0.7}
    assert {(c[0], c[1], c[2]) for c in cells} == {
        (float(L), D, p)
        for L in (1, 2)
        for D in (6, 10, 14)
        for p in (0.2, 0.5, 0.8)
    }
