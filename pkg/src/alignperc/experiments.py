"""Critical-curve estimation, phase-diagram artifacts, and run manifests.

The lambda threshold at fixed p is located through torus wrapping: each
replicate carries coupled per-edge activation levels, and an incremental
union-find with winding displacements records the level at which a
cluster first wraps the axis-0 direction.  Bisecting the resulting
empirical crossing curve is monotone-valid because all lambda values
share one sample.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import numpy as np
from numba import njit
from scipy.stats import t as student_t

from alignperc.errors import ParameterError
from alignperc.hexembed import P_C_HEX
from alignperc.lattice import LatticeSpec, alignperc_thread_count
from alignperc.model import edge_levels_from_uniforms, pair_uniforms, site_uniforms
from alignperc.rng import RandomSource

# square-lattice value is exact; higher-d values are standard numerical
# references for the pure-Bernoulli comparison line
BOND_THRESHOLD = {2: 0.5, 3: 0.24881182}


def code_version() -> str:
    try:
        return metadata.version("alignperc")
    except metadata.PackageNotFoundError:
        return "0.1.0"


# ---------------------------------------------------------------------------
# torus wrapping levels


@njit(cache=True)
def _find1(parent, offset, i, path):
    depth = 0
    r = i
    while parent[r] != r:
        path[depth] = r
        depth += 1
        r = parent[r]
    for k in range(depth - 1, -1, -1):
        node = path[k]
        par = parent[node]
        if par != r:
            offset[node] += offset[par]
        parent[node] = r
    return r


@njit(cache=True)
def _wrap_level_batch(levels, order, ea, eb, disp, n_sites, out):
    """Level at which an axis-0 winding cycle first appears, per replicate.

    Edges enter in increasing level order; a same-root union whose
    universal-cover displacements disagree closes a wrapping cycle.
    """
    parent = np.empty(n_sites, dtype=np.int64)
    offset = np.empty(n_sites, dtype=np.int64)
    size = np.empty(n_sites, dtype=np.int64)
    path = np.empty(64, dtype=np.int64)
    for rep in range(levels.shape[0]):
        for i in range(n_sites):
            parent[i] = i
            offset[i] = 0
            size[i] = 1
        val = np.inf
        for s in range(order.shape[1]):
            e = order[rep, s]
            lev = levels[rep, e]
            if not np.isfinite(lev):
                break
            a = ea[e]
            b = eb[e]
            step = disp[e]
            ra = _find1(parent, offset, a, path)
            rb = _find1(parent, offset, b, path)
            if ra == rb:
                if offset[a] + step - offset[b] != 0:
                    val = lev
                    break
            else:
                if size[ra] < size[rb]:
                    ra, rb = rb, ra
                    a, b = b, a
                    step = -step
                offset[rb] = offset[a] + step - offset[b]
                parent[rb] = ra
                size[ra] += size[rb]
        out[rep] = val


def _torus_edges(d: int, side: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n_sites = side**d
    ids = np.arange(n_sites, dtype=np.int64).reshape((side,) * d)
    ea, eb, disp = [], [], []
    for a in range(d):
        ea.append(ids.ravel())
        eb.append(np.roll(ids, -1, axis=a).ravel())
        disp.append(np.full(n_sites, 1 if a == 0 else 0, dtype=np.int64))
    return np.concatenate(ea), np.concatenate(eb), np.concatenate(disp)


def wrap_bottlenecks(p: float, d: int, size: int, n: int, rng: RandomSource) -> np.ndarray:
    """Coupled axis-0 wrapping levels on the size^d torus.

    The empirical wrapping probability at lambda is the fraction of
    replicates below lambda, non-decreasing in lambda by construction.
    """
    if not (0 < p <= 1):
        raise ParameterError("p must lie in (0, 1]")
    if n <= 0:
        raise ParameterError("n must be positive")
    if size < 2:
        raise ParameterError("torus side must be at least 2")
    spec = LatticeSpec(d, (size,) * d, "torus")
    n_sites = size**d
    ea, eb, disp = _torus_edges(d, size)
    chunk = int(np.clip(2**20 // n_sites, 2, 2048))
    n_chunks = (n + chunk - 1) // chunk

    def run_chunk(c: int) -> np.ndarray:
        count = min(chunk, n - c * chunk)
        crng = rng.derive("wrap-chunk", c)
        u_sites = site_uniforms(spec, crng, batch=count)
        u_pairs = pair_uniforms(spec, crng, batch=count)
        levels = edge_levels_from_uniforms(spec, p, u_sites, u_pairs)
        flat = np.concatenate([lv.reshape(count, -1) for lv in levels], axis=1)
        order = np.argsort(flat, axis=1)
        out = np.empty(count, dtype=np.float64)
        _wrap_level_batch(flat, order, ea, eb, disp, n_sites, out)
        return out

    threads = alignperc_thread_count()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run_chunk, range(n_chunks)))
    else:
        parts = [run_chunk(c) for c in range(n_chunks)]
    return np.concatenate(parts)


# ---------------------------------------------------------------------------
# lambda_c rows and the phase diagram


@dataclass(frozen=True)
class PhaseDiagramRow:
    p: float
    lambda_c_hat: float
    ci_low: float
    ci_high: float
    d: int
    geometry: str
    n: int

    def __post_init__(self):
        if not (0.0 <= self.lambda_c_hat <= 1.0):
            raise ParameterError("lambda_c_hat must lie in [0, 1]")
        if not (self.ci_low <= self.lambda_c_hat <= self.ci_high):
            raise ParameterError("need ci_low <= lambda_c_hat <= ci_high")


def lambda_c_estimate(
    p: float,
    d: int,
    size: int,
    n: int,
    tol: float,
    rng: RandomSource,
    seeds: int = 5,
) -> PhaseDiagramRow:
    """Wrapping-probability threshold with a replicated-bisection CI.

    Each of `seeds` independent streams contributes one bisection of its
    own coupled wrapping curve; the row carries their mean and a Student
    interval across seeds.
    """
    if tol <= 0:
        raise ParameterError("tol must be positive")
    if seeds < 2:
        raise ParameterError("need at least two seeds for a spread")
    estimates = []
    for i in range(seeds):
        bott = wrap_bottlenecks(p, d, size, n, rng.derive("seed", i))
        frac = float(np.mean(bott < 1.0))
        if frac < 0.5:
            raise ParameterError(
                f"wrapping probability {frac:.3f} at lambda = 1 is below one "
                "half; threshold not bracketed (enlarge the torus)"
            )
        lo, hi = 0.0, 1.0
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if float(np.mean(bott < mid)) < 0.5:
                lo = mid
            else:
                hi = mid
        estimates.append(0.5 * (lo + hi))
    arr = np.array(estimates)
    hat = float(arr.mean())
    half = float(student_t.ppf(0.975, seeds - 1) * arr.std(ddof=1) / np.sqrt(seeds))
    return PhaseDiagramRow(
        p=float(p),
        lambda_c_hat=hat,
        ci_low=max(0.0, hat - half),
        ci_high=min(1.0, hat + half),
        d=d,
        geometry=f"torus{size}^{d}",
        n=n,
    )


CSV_COLUMNS = ("p", "lambda_c_hat", "ci_low", "ci_high", "d", "geometry", "n")


def rows_to_csv(rows: list[PhaseDiagramRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        writer.writerow(
            [r.p, r.lambda_c_hat, r.ci_low, r.ci_high, r.d, r.geometry, r.n]
        )
    return buf.getvalue()


def rows_from_csv(text: str) -> list[PhaseDiagramRow]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != list(CSV_COLUMNS):
        raise ParameterError(f"unexpected CSV header {header}")
    rows = []
    for rec in reader:
        if not rec:
            continue
        rows.append(
            PhaseDiagramRow(
                p=float(rec[0]),
                lambda_c_hat=float(rec[1]),
                ci_low=float(rec[2]),
                ci_high=float(rec[3]),
                d=int(rec[4]),
                geometry=rec[5],
                n=int(rec[6]),
            )
        )
    return rows


def phase_diagram(
    p_grid: tuple[float, ...],
    d: int,
    size: int,
    n: int,
    rng: RandomSource,
    tol: float = 0.005,
    seeds: int = 5,
) -> tuple[list[PhaseDiagramRow], str, str]:
    """Rows plus rendered CSV and SVG for a grid of site densities."""
    if len(p_grid) == 0:
        raise ParameterError("p grid must be nonempty")
    rows = [
        lambda_c_estimate(p, d, size, n, tol, rng.derive("pd", str(float(p))), seeds)
        for p in p_grid
    ]
    return rows, rows_to_csv(rows), phase_diagram_svg(rows, d)


def _reference_curves(d: int) -> list[tuple[str, str, list[tuple[float, float]]]]:
    curves = [
        ("lower bound p/(2d-1)", "#c0392b", [(0.0, 0.0), (1.0, 1.0 / (2 * d - 1))]),
    ]
    if d >= 3:
        curves.append(
            ("hex threshold", "#8e44ad", [(0.0, P_C_HEX), (1.0, P_C_HEX)])
        )
    if d in BOND_THRESHOLD:
        curves.append(
            (
                "bond threshold",
                "#2980b9",
                [(0.0, BOND_THRESHOLD[d]), (1.0, BOND_THRESHOLD[d])],
            )
        )
    return curves


def phase_diagram_svg(rows: list[PhaseDiagramRow], d: int, width: int = 720, height: int = 540) -> str:
    """Self-contained SVG: reference polylines plus data points with CIs."""
    ml, mr, mt, mb = 70, 24, 24, 56

    def x(p: float) -> float:
        return ml + p * (width - ml - mr)

    def y(lam: float) -> float:
        return height - mb - lam * (height - mt - mb)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    for tick in (0.0, 0.2, 0.4, 0.6, 0.8, 1.0):
        parts.append(
            f'<line x1="{x(tick):.2f}" y1="{y(0):.2f}" x2="{x(tick):.2f}" '
            f'y2="{y(1):.2f}" stroke="#dddddd" stroke-width="1"/>'
        )
        parts.append(
            f'<line x1="{x(0):.2f}" y1="{y(tick):.2f}" x2="{x(1):.2f}" '
            f'y2="{y(tick):.2f}" stroke="#dddddd" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{x(tick):.2f}" y="{height - mb + 18:.2f}" '
            f'font-size="12" text-anchor="middle">{tick:.1f}</text>'
        )
        parts.append(
            f'<text x="{ml - 8:.2f}" y="{y(tick) + 4:.2f}" font-size="12" '
            f'text-anchor="end">{tick:.1f}</text>'
        )
    legend_y = mt + 14
    for label, color, pts in _reference_curves(d):
        coords = " ".join(f"{x(px):.2f},{y(py):.2f}" for px, py in pts)
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
            f'stroke-dasharray="6,4" points="{coords}"/>'
        )
        parts.append(
            f'<text x="{ml + 10}" y="{legend_y}" font-size="12" '
            f'fill="{color}">{label}</text>'
        )
        legend_y += 16
    for r in rows:
        parts.append(
            f'<line x1="{x(r.p):.2f}" y1="{y(r.ci_low):.2f}" '
            f'x2="{x(r.p):.2f}" y2="{y(r.ci_high):.2f}" '
            f'stroke="#1a1a1a" stroke-width="1.5"/>'
        )
        parts.append(
            f'<circle cx="{x(r.p):.2f}" cy="{y(r.lambda_c_hat):.2f}" r="4" '
            f'fill="#1a1a1a"/>'
        )
    parts.append(
        f'<text x="{(ml + width - mr) / 2:.2f}" y="{height - 14}" '
        f'font-size="14" text-anchor="middle">p (site density)</text>'
    )
    parts.append(
        f'<text x="18" y="{(mt + height - mb) / 2:.2f}" font-size="14" '
        f'text-anchor="middle" transform="rotate(-90 18 '
        f'{(mt + height - mb) / 2:.2f})">critical lambda</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def phase_diagram_png(rows: list[PhaseDiagramRow], d: int, path: str | Path) -> None:
    """Matplotlib rendering of the same diagram, written as PNG."""
    from matplotlib.figure import Figure

    fig = Figure(figsize=(7.2, 5.4), dpi=100)
    ax = fig.add_subplot(111)
    for label, color, pts in _reference_curves(d):
        ax.plot(*zip(*pts), linestyle="--", color=color, label=label)
    ps = [r.p for r in rows]
    hats = [r.lambda_c_hat for r in rows]
    lows = [r.lambda_c_hat - r.ci_low for r in rows]
    highs = [r.ci_high - r.lambda_c_hat for r in rows]
    ax.errorbar(
        ps, hats, yerr=[lows, highs], fmt="o", color="#1a1a1a",
        capsize=3, label="wrapping estimate",
    )
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_xlabel("p (site density)")
    ax.set_ylabel("critical lambda")
    ax.legend(loc="upper left", fontsize=9)
    ax.grid(alpha=0.3)
    fig.savefig(path, format="png", metadata={"Software": "alignperc"})


# ---------------------------------------------------------------------------
# manifests


@dataclass(frozen=True)
class ExperimentManifest:
    command: str
    params: dict
    seed: int
    version: str
    created: str
    outputs: dict

    def to_json(self) -> str:
        payload = {
            "schema": "alignperc.manifest.v1",
            "command": self.command,
            "params": self.params,
            "seed": self.seed,
            "version": self.version,
            "created": self.created,
            "outputs": self.outputs,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    @staticmethod
    def from_json(text: str) -> "ExperimentManifest":
        obj = json.loads(text)
        if obj.get("schema") != "alignperc.manifest.v1":
            raise ParameterError(f"unsupported manifest schema {obj.get('schema')!r}")
        return ExperimentManifest(
            command=obj["command"],
            params=obj["params"],
            seed=int(obj["seed"]),
            version=obj["version"],
            created=obj["created"],
            outputs=dict(obj["outputs"]),
        )


def sha256_path(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def build_manifest(command: str, params: dict, seed: int, outputs: list[Path]) -> ExperimentManifest:
    return ExperimentManifest(
        command=command,
        params=params,
        seed=seed,
        version=code_version(),
        created=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        outputs={Path(p).name: sha256_path(p) for p in outputs},
    )


def load_manifest(path: str | Path) -> ExperimentManifest:
    return ExperimentManifest.from_json(Path(path).read_text())


def verify_outputs(manifest: ExperimentManifest, directory: str | Path) -> list[tuple[str, str]]:
    """(filename, status) for each manifest output against files on disk.

    Status is "ok", "mismatch", or "missing"; interpretation is left to
    the caller.
    """
    directory = Path(directory)
    results = []
    for name, digest in sorted(manifest.outputs.items()):
        target = directory / name
        if not target.exists():
            results.append((name, "missing"))
        elif sha256_path(target) == digest:
            results.append((name, "ok"))
        else:
            results.append((name, "mismatch"))
    return results
