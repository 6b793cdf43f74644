"""Finite lattice geometry.

A LatticeSpec describes a finite axis-aligned region of Z^d with one of
three boundary conventions:

* ``torus``: every axis is periodic, lines are cycles.
* ``closed``: lines end at the box faces, nothing beyond them.
* ``occupied_frame``: like closed, but every site on the outer face is
  forced occupied, so every edge of the box lies between two occupied
  sites on its line.

Edges are anchored at sites: the edge ``(site, axis)`` joins ``site`` to
``site + e_axis`` (wrapping on a torus). On a non-torus box the anchor's
coordinate along ``axis`` must be below ``extent[axis] - 1``.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, SizeRefusalError

BOUNDARIES = ("torus", "closed", "occupied_frame")

_DEFAULT_MAX_SITES = 1 << 26


def max_sites_budget() -> int:
    """Site-count ceiling for a single allocated geometry."""
    raw = os.environ.get("ALIGNPERC_MAX_SITES", "")
    if raw:
        try:
            val = int(raw)
        except ValueError as exc:
            raise ParameterError(f"ALIGNPERC_MAX_SITES is not an integer: {raw!r}") from exc
        if val <= 0:
            raise ParameterError("ALIGNPERC_MAX_SITES must be positive")
        return val
    return _DEFAULT_MAX_SITES


@dataclass(frozen=True)
class LatticeSpec:
    """Geometry of a finite simulation region.

    Parameters
    ----------
    d : int
        Dimension, at least 1.
    extent : tuple of int
        Sites per axis, each at least 2.
    boundary : str
        One of ``torus``, ``closed``, ``occupied_frame``.
    """

    d: int
    extent: tuple[int, ...]
    boundary: str = "torus"

    def __post_init__(self):
        if self.d < 1:
            raise ParameterError(f"dimension must be >= 1, got {self.d}")
        object.__setattr__(self, "extent", tuple(int(e) for e in self.extent))
        if len(self.extent) != self.d:
            raise ParameterError(f"extent has {len(self.extent)} entries for d={self.d}")
        if any(e < 2 for e in self.extent):
            raise ParameterError(f"every extent must be >= 2, got {self.extent}")
        if self.boundary not in BOUNDARIES:
            raise ParameterError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")
        if self.n_sites > max_sites_budget():
            raise SizeRefusalError(
                f"{self.n_sites} sites exceeds the budget of {max_sites_budget()} "
                "(raise ALIGNPERC_MAX_SITES to override)"
            )

    @property
    def n_sites(self) -> int:
        n = 1
        for e in self.extent:
            n *= e
        return n

    @property
    def n_edges(self) -> int:
        if self.boundary == "torus":
            return self.d * self.n_sites
        total = 0
        for a in range(self.d):
            per = self.extent[a] - 1
            for b in range(self.d):
                if b != a:
                    per *= self.extent[b]
            total += per
        return total

    def edge_exists(self, site: tuple[int, ...], axis: int) -> bool:
        if self.boundary == "torus":
            return True
        return site[axis] < self.extent[axis] - 1

    def sites(self):
        """Iterate all site coordinate tuples in C order."""
        return itertools.product(*(range(e) for e in self.extent))

    def frame_mask(self) -> np.ndarray:
        """Boolean array marking sites on the outer face of the box."""
        mask = np.zeros(self.extent, dtype=bool)
        for a in range(self.d):
            sl = [slice(None)] * self.d
            sl[a] = 0
            mask[tuple(sl)] = True
            sl[a] = self.extent[a] - 1
            mask[tuple(sl)] = True
        return mask

    def flat_index(self, site: tuple[int, ...]) -> int:
        return int(np.ravel_multi_index(site, self.extent))


def ball_radius(L: float) -> int:
    """Integer radius of the sup-norm ball B(x, L)."""
    if L < 0:
        raise ParameterError("radius must be nonnegative")
    return int(np.floor(L))


def box_sites(center: tuple[int, ...], L: float) -> np.ndarray:
    """All sites z with max-norm |z - center| <= floor(L), as an array."""
    r = ball_radius(L)
    ranges = [np.arange(c - r, c + r + 1) for c in center]
    grids = np.meshgrid(*ranges, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def shell_sites(center: tuple[int, ...], L: float) -> np.ndarray:
    """All sites z with max-norm |z - center| == floor(L)."""
    r = ball_radius(L)
    pts = box_sites(center, L)
    dist = np.max(np.abs(pts - np.asarray(center)), axis=1)
    return pts[dist == r]


def shell_size(r: int, d: int) -> int:
    """Exact number of sites at sup-norm distance r in Z^d."""
    if r == 0:
        return 1
    return (2 * r + 1) ** d - (2 * r - 1) ** d


def box_edge_count(r: int, d: int) -> int:
    """Edges of Z^d with at least one endpoint in a sup-norm ball of radius r.

    Counted directly: for each axis, anchors range over a box stretched by
    one extra layer behind the ball along that axis.
    """
    side = 2 * r + 1
    return d * (side + 1) * side ** (d - 1)


def alignperc_thread_count() -> int:
    """Worker cap from ALIGNPERC_THREADS. Never affects results."""
    raw = os.environ.get("ALIGNPERC_THREADS", "")
    if not raw:
        return 1
    try:
        val = int(raw)
    except ValueError as exc:
        raise ParameterError(f"ALIGNPERC_THREADS is not an integer: {raw!r}") from exc
    if val < 1:
        raise ParameterError("ALIGNPERC_THREADS must be >= 1")
    return val
