"""Command line interface: sampling, oracles, estimators, replayable runs.

Every file-writing subcommand records a manifest (parameters, seed, code
version, output digests) next to its primary output; `replay` re-runs
the recorded command and verifies byte-identical results.  Exit codes:
0 success, 2 parameter error, 3 size refusal, 4 failed statistical
verdict or replay mismatch.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import tempfile
from pathlib import Path

import numpy as np

from alignperc.cluster import components
from alignperc.covdecay import (
    EVENT_KINDS,
    MODELS,
    LocalEventSpec,
    covariance_estimate,
    decay_bound,
)
from alignperc.errors import (
    AlignpercError,
    ParameterError,
    SizeRefusalError,
    VerdictError,
)
from alignperc.experiments import (
    build_manifest,
    code_version,
    lambda_c_estimate,
    load_manifest,
    phase_diagram,
    phase_diagram_png,
    rows_to_csv,
    sha256_path,
    verify_outputs,
)
from alignperc.hexembed import (
    P_C_HEX,
    crossing_bottlenecks,
    threshold_from_bottlenecks,
)
from alignperc.lattice import LatticeSpec
from alignperc.model import (
    EdgeConfig,
    edge_arrays_from_uniforms,
    extract_pairs,
    occupancy_from_uniforms,
    pair_uniforms,
    project_edges,
    sample_one_choice,
    sample_sites,
    site_uniforms,
)
from alignperc.oracle import pattern_from_json, pattern_probability
from alignperc.renorm import (
    EventEstimate,
    RecurrenceConstants,
    derive_constants,
    estimate_psi,
    estimate_qk,
    halfline_cover,
    inductive_decay_check,
    ladder,
    lambda0_trigger,
    p0_trigger,
    recurrence_check,
)
from alignperc.rng import RandomSource


def _write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def _constants(label: str, d: int) -> RecurrenceConstants:
    if label == "derived":
        return derive_constants(d)
    return RecurrenceConstants(d, 1.0, 1.0)


def _finish(command: str, params: dict, seed: int, outputs: list[Path]) -> None:
    manifest = build_manifest(command, params, seed, outputs)
    stem = outputs[0]
    _write_text(stem.with_name(stem.stem + ".manifest.json"), manifest.to_json())


# ---------------------------------------------------------------------------
# runners (shared between direct invocation and replay)


def _run_simulate(params: dict, seed: int, outdir: Path) -> list[Path]:
    d = params["d"]
    spec = LatticeSpec(d, (params["size"],) * d, params["boundary"])
    rng = RandomSource(seed)
    rows = []
    for i in range(params["n"]):
        rep = rng.derive("rep", i)
        if params["model"] == "independent":
            u_sites = site_uniforms(spec, rep)
            u_pairs = pair_uniforms(spec, rep)
            occ = occupancy_from_uniforms(spec, params["p"], u_sites)
            arrays = edge_arrays_from_uniforms(
                spec, params["p"], params["lam"], u_sites, u_pairs
            )
            cfg = EdgeConfig(spec, arrays)
        else:
            sites = sample_sites(spec, params["p"], rep.derive("sites"))
            seg = extract_pairs(sites)
            states = sample_one_choice(seg, rep.derive("choices"))
            cfg = project_edges(seg, states)
            occ = sites.occupied
        report = components(cfg)
        rows.append(
            [
                i,
                int(occ.sum()),
                int(sum(int(a.sum()) for a in cfg.open)),
                report.n_components,
                report.largest_size,
                int(report.wraps[0]),
            ]
        )
    text = _csv_text(
        ("rep", "occupied_sites", "open_edges", "n_components",
         "largest_cluster", "wrap_axis0"),
        rows,
    )
    return [_write_text(outdir / params["out"], text)]


def _run_covdecay(params: dict, seed: int, outdir: Path) -> list[Path]:
    a = LocalEventSpec((0, 0), params["L"], params["event"])
    b = LocalEventSpec((params["D"], 0), params["L"], params["event"])
    est = covariance_estimate(
        a, b, params["p"], params["lam"], params["n"],
        RandomSource(seed), model=params["model"],
    )
    bound = decay_bound(params["L"], params["D"], params["p"], 2)
    passed = abs(est.cov_hat) - 3 * est.se <= bound
    row = [
        params["L"], params["D"], params["p"],
        "" if est.lam is None else est.lam,
        params["event"], params["n"], est.cov_hat, est.se, bound,
        "true" if passed else "false",
    ]
    text = _csv_text(
        ("L", "D", "p", "lambda", "event", "n", "cov_hat", "sigma", "bound", "pass"),
        [row],
    )
    return [_write_text(outdir / params["out"], text)]


def _run_renorm_qk(params: dict, seed: int, outdir: Path) -> list[Path]:
    lad = ladder(params["L0"], params["k"])
    est = estimate_qk(
        params["family"], lad, params["k"], params["p"], params["lam"],
        params["n"], RandomSource(seed), d=params["d"],
        boundary=params["boundary"],
    )
    text = json.dumps(est.to_dict(), sort_keys=True, indent=2) + "\n"
    return [_write_text(outdir / params["out"], text)]


def _run_hex(params: dict, seed: int, outdir: Path) -> list[Path]:
    rng = RandomSource(seed)
    bott = crossing_bottlenecks(
        params["p"], params["extent"], params["n"], rng
    )
    est = threshold_from_bottlenecks(
        bott, params["p"], params["extent"], rng.master, params["tol"]
    )
    out = outdir / params["out"]
    summary = _csv_text(
        ("p", "extent", "n", "lambda_hat", "ci_low", "ci_high"),
        [[est.p, est.extent, est.n, est.lambda_hat, est.ci_low, est.ci_high]],
    )
    lams = [i / 20 for i in range(1, 20)]
    curve = [(lam, float(np.mean(bott < lam))) for lam in lams]
    curve_text = _csv_text(("lambda", "crossing"), curve)
    paths = [
        _write_text(out, summary),
        _write_text(out.with_name(out.stem + "_curve.csv"), curve_text),
    ]
    png = out.with_suffix(".png")
    _hex_png(curve, est, png)
    paths.append(png)
    return paths


def _hex_png(curve, est, path: Path) -> None:
    from matplotlib.figure import Figure

    fig = Figure(figsize=(6.4, 4.8), dpi=100)
    ax = fig.add_subplot(111)
    ax.plot(*zip(*curve), marker="o", color="#1a1a1a", label="crossing probability")
    ax.axhline(0.5, color="#888888", linestyle=":")
    ax.axvline(est.lambda_hat, color="#c0392b", linestyle="--", label="estimate")
    ax.axvline(P_C_HEX, color="#2980b9", linestyle="-.", label="hex threshold")
    ax.set_xlabel("lambda (pair density)")
    ax.set_ylabel("rhombus crossing probability")
    ax.set_xlim(0, 1)
    ax.set_ylim(-0.02, 1.02)
    ax.legend(loc="upper left", fontsize=9)
    ax.grid(alpha=0.3)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="png", metadata={"Software": "alignperc"})


def _run_lambda_c(params: dict, seed: int, outdir: Path) -> list[Path]:
    row = lambda_c_estimate(
        params["p"], params["d"], params["size"], params["n"],
        params["tol"], RandomSource(seed), seeds=params["seeds"],
    )
    return [_write_text(outdir / params["out"], rows_to_csv([row]))]


def _run_phase_diagram(params: dict, seed: int, outdir: Path) -> list[Path]:
    rows, csv_text, svg_text = phase_diagram(
        tuple(params["p_grid"]), params["d"], params["size"], params["n"],
        RandomSource(seed), tol=params["tol"], seeds=params["seeds"],
    )
    prefix = outdir / params["out_prefix"]
    paths = [
        _write_text(prefix.with_suffix(".csv"), csv_text),
        _write_text(prefix.with_suffix(".svg"), svg_text),
    ]
    png = prefix.with_suffix(".png")
    png.parent.mkdir(parents=True, exist_ok=True)
    phase_diagram_png(rows, params["d"], png)
    paths.append(png)
    return paths


REPLAY_RUNNERS = {
    "simulate": _run_simulate,
    "covdecay": _run_covdecay,
    "renorm-qk": _run_renorm_qk,
    "hex": _run_hex,
    "lambda-c": _run_lambda_c,
    "phase-diagram": _run_phase_diagram,
}


# ---------------------------------------------------------------------------
# handlers


def _cmd_simulate(args) -> int:
    if args.model == "independent" and args.lam is None:
        raise ParameterError("--lambda is required for the independent model")
    out = Path(args.out)
    params = {
        "model": args.model, "p": args.p, "lam": args.lam, "d": args.d,
        "size": args.size, "boundary": args.boundary, "n": args.n,
        "out": out.name,
    }
    paths = _run_simulate(params, args.seed, out.parent)
    _finish("simulate", params, args.seed, paths)
    print(f"wrote {paths[0]} ({args.n} replicates)")
    return 0


def _cmd_oracle(args) -> int:
    pattern = pattern_from_json(Path(args.pattern).read_text())
    prob = pattern_probability(pattern, args.p, args.lam)
    print(f"{prob:.12f}")
    return 0


def _cmd_covdecay(args) -> int:
    if args.model == "independent" and args.lam is None:
        raise ParameterError("--lambda is required for the independent model")
    out = Path(args.out)
    params = {
        "L": args.L, "D": args.D, "p": args.p, "lam": args.lam,
        "event": args.event, "n": args.n, "model": args.model,
        "out": out.name,
    }
    paths = _run_covdecay(params, args.seed, out.parent)
    text = paths[0].read_text().splitlines()[1].split(",")
    print(
        f"cov_hat {text[6]} sigma {text[7]} bound {text[8]} pass {text[9]}"
    )
    _finish("covdecay", params, args.seed, paths)
    return 0


def _cmd_renorm_qk(args) -> int:
    out = Path(args.out)
    params = {
        "family": args.family, "L0": args.L0, "k": args.k, "p": args.p,
        "lam": args.lam, "n": args.n, "d": args.d,
        "boundary": args.boundary, "out": out.name,
    }
    paths = _run_renorm_qk(params, args.seed, out.parent)
    est = EventEstimate.from_dict(json.loads(paths[0].read_text()))
    print(
        f"q_{est.k} = {est.point:.6g}  CI [{est.lower:.6g}, {est.upper:.6g}]"
        f"  ({est.successes}/{est.n})"
    )
    _finish("renorm-qk", params, args.seed, paths)
    return 0


def _cmd_renorm_check(args) -> int:
    estimates = sorted(
        (
            EventEstimate.from_dict(json.loads(Path(f).read_text()))
            for f in args.inputs
        ),
        key=lambda e: e.k,
    )
    if estimates[0].k != 0:
        raise ParameterError("provide estimates starting at level 0")
    lad = ladder(estimates[0].L, estimates[-1].k)
    consts = _constants(args.constants, estimates[0].d)
    reports = [
        recurrence_check(estimates[i], estimates[i + 1], consts, lad, estimates[i].k)
        for i in range(len(estimates) - 1)
    ]
    decay = inductive_decay_check(estimates, lad, estimates[0].d)
    for rep in reports:
        print(
            f"recurrence k={rep.k} -> {rep.k + 1}: "
            f"{'passed' if rep.passed else 'FAILED'} "
            f"(lhs {rep.lhs_upper:.4g} vs bound {rep.bound:.4g})"
        )
    for lvl in decay.levels:
        state = "sound" if lvl.sound else ("REFUTED" if lvl.refuted else "consistent")
        print(f"decay level k={lvl.k}: {state} (upper {lvl.upper:.4g} vs threshold {lvl.threshold:.4g})")
    print(f"decay overall: {'passed' if decay.passed else 'FAILED'}")
    if args.out:
        payload = {
            "schema": "alignperc.check_report.v1",
            "constants": args.constants,
            "recurrence": [rep.to_dict() for rep in reports],
            "decay": decay.to_dict(),
        }
        _write_text(Path(args.out), json.dumps(payload, sort_keys=True, indent=2) + "\n")
    if not (decay.passed and all(rep.passed for rep in reports)):
        raise VerdictError("renormalization check failed")
    return 0


def _cmd_renorm_trigger_lambda0(args) -> int:
    lad = ladder(args.L0, args.kmax)
    trig = lambda0_trigger(args.p, args.d, lad, _constants(args.constants, args.d))
    print(
        f"k0 {trig.k0}  L {trig.L:.6g}  edges {trig.n_edges}  "
        f"lambda0 {trig.lambda0:.12g}  (1 - lambda0 = {trig.one_minus_lambda0:.6e})"
    )
    print(trig.guarantee)
    if args.out:
        _write_text(Path(args.out), json.dumps(trig.to_dict(), sort_keys=True, indent=2) + "\n")
    return 0


def _cmd_renorm_trigger_p0(args) -> int:
    lad = ladder(args.L0, args.kmax)
    consts = _constants(args.constants, args.d)
    psi_hat = args.psi_hat
    if psi_hat is None:
        if args.seed is None:
            raise ParameterError("--seed is required when estimating psi")
        psi = estimate_psi(
            args.lam, args.d, tuple(args.psi_sizes), args.psi_n,
            RandomSource(args.seed).derive("psi"),
        )
        psi_hat = psi.psi_hat
        print(f"psi_hat {psi_hat:.6g} (R^2 {psi.r_squared:.4f})")
    trig = p0_trigger(args.lam, args.d, lad, consts, psi_hat, p_for_k0=args.p_for_k0)
    print(
        f"k_tilde {trig.k_tilde}  k0 {trig.k0}  k1 {trig.k1}  L {trig.L:.6g}  "
        f"sites {trig.n_sites}  p0 {trig.p0:.12g}  (1 - p0 = {trig.one_minus_p0:.6e})"
    )
    if args.out:
        _write_text(Path(args.out), json.dumps(trig.to_dict(), sort_keys=True, indent=2) + "\n")
    return 0


def _cmd_renorm_halfline(args) -> int:
    lad = ladder(args.L0, args.kmax + 1)
    cover = halfline_cover(lad, args.kmax)
    rows = []
    for k, pts in enumerate(cover.points):
        spacing = pts[1][0] - pts[0][0] if len(pts) > 1 else 0
        rows.append(
            [k, lad.level(k), pts[0][0], spacing,
             len(pts), cover.s_values[k], cover.s_bounds[k]]
        )
        print(
            f"level {k}: start {pts[0][0]} spacing {spacing} "
            f"count {len(pts)} (bound {cover.s_bounds[k]:.4g})"
        )
    print(f"summability total {cover.summability_total:.6g}")
    if args.out:
        text = _csv_text(("k", "L", "start", "spacing", "count", "s_k", "s_bound"), rows)
        _write_text(Path(args.out), text)
    return 0


def _cmd_hex(args) -> int:
    out = Path(args.out)
    params = {
        "p": args.p, "extent": args.extent, "n": args.n, "tol": args.tol,
        "out": out.name,
    }
    paths = _run_hex(params, args.seed, out.parent)
    rec = paths[0].read_text().splitlines()[1].split(",")
    print(
        f"lambda_hat {rec[3]}  CI [{rec[4]}, {rec[5]}]  "
        f"(hex reference {P_C_HEX:.6f})"
    )
    _finish("hex", params, args.seed, paths)
    return 0


def _cmd_lambda_c(args) -> int:
    out = Path(args.out)
    params = {
        "p": args.p, "d": args.d, "size": args.size, "n": args.n,
        "tol": args.tol, "seeds": args.seeds, "out": out.name,
    }
    paths = _run_lambda_c(params, args.seed, out.parent)
    rec = paths[0].read_text().splitlines()[1].split(",")
    print(f"lambda_c_hat {rec[1]}  CI [{rec[2]}, {rec[3]}]")
    _finish("lambda-c", params, args.seed, paths)
    return 0


def _cmd_phase_diagram(args) -> int:
    prefix = Path(args.out_prefix)
    params = {
        "p_grid": [float(p) for p in args.p_grid], "d": args.d,
        "size": args.size, "n": args.n, "tol": args.tol,
        "seeds": args.seeds, "out_prefix": prefix.name,
    }
    paths = _run_phase_diagram(params, args.seed, prefix.parent)
    _finish("phase-diagram", params, args.seed, paths)
    print("wrote " + ", ".join(str(p) for p in paths))
    return 0


def _cmd_replay(args) -> int:
    manifest_path = Path(args.manifest)
    if not manifest_path.exists():
        raise ParameterError(f"manifest not found: {manifest_path}")
    manifest = load_manifest(manifest_path)
    if manifest.version != code_version():
        print(
            f"warning: manifest written by version {manifest.version}, "
            f"running {code_version()}",
            file=sys.stderr,
        )
    if manifest.command not in REPLAY_RUNNERS:
        raise ParameterError(f"command {manifest.command!r} is not replayable")
    failures = []
    if args.check_disk:
        for name, status in verify_outputs(manifest, manifest_path.parent):
            print(f"on disk: {name} {status}")
            if status == "missing":
                raise VerdictError(
                    f"recorded output {name} is missing next to the manifest; "
                    "restore it or replay without --check-disk"
                )
            if status == "mismatch":
                failures.append(f"on-disk {name}")
    outdir = Path(args.outdir) if args.outdir else Path(tempfile.mkdtemp(prefix="alignperc-replay-"))
    produced = REPLAY_RUNNERS[manifest.command](manifest.params, manifest.seed, outdir)
    digests = {p.name: sha256_path(p) for p in produced}
    for name, digest in sorted(manifest.outputs.items()):
        got = digests.get(name)
        status = "ok" if got == digest else ("missing" if got is None else "mismatch")
        print(f"reproduced: {name} {status}")
        if status != "ok":
            failures.append(f"reproduced {name}")
    if failures:
        raise VerdictError("replay mismatch: " + ", ".join(failures))
    print(f"replay verified in {outdir}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="alignperc",
        description="Alignment percolation: simulation, exact oracles, "
        "renormalization diagnostics, and threshold experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="sample configurations, write per-replicate summaries")
    sim.add_argument("--model", choices=MODELS, default="independent")
    sim.add_argument("--p", type=float, required=True, help="site density in [0,1]")
    sim.add_argument("--lambda", dest="lam", type=float, help="pair density in [0,1]")
    sim.add_argument("--d", type=int, default=2, help="dimension")
    sim.add_argument("--size", type=int, required=True, help="box side length in sites")
    sim.add_argument("--boundary", choices=("torus", "occupied_frame"), default="torus")
    sim.add_argument("--n", type=int, default=10, help="replicates")
    sim.add_argument("--seed", type=int, required=True, help="master seed")
    sim.add_argument("--out", required=True, help="output CSV path")
    sim.set_defaults(func=_cmd_simulate)

    orc = sub.add_parser("oracle", help="exact local-pattern probability")
    orc.add_argument("--pattern", required=True, help="pattern JSON file")
    orc.add_argument("--p", type=float, required=True)
    orc.add_argument("--lambda", dest="lam", type=float, required=True)
    orc.set_defaults(func=_cmd_oracle)

    cov = sub.add_parser("covdecay", help="covariance of distant local events vs decay bound")
    cov.add_argument("--L", type=float, required=True, help="event box radius in sites")
    cov.add_argument("--D", type=int, required=True, help="center separation in sites")
    cov.add_argument("--p", type=float, required=True)
    cov.add_argument("--lambda", dest="lam", type=float)
    cov.add_argument("--event", choices=EVENT_KINDS, required=True)
    cov.add_argument("--n", type=int, required=True, help="shared replicates")
    cov.add_argument("--model", choices=MODELS, default="independent")
    cov.add_argument("--seed", type=int, required=True)
    cov.add_argument("--out", required=True, help="output CSV path")
    cov.set_defaults(func=_cmd_covdecay)

    ren = sub.add_parser("renorm", help="multiscale renormalization diagnostics")
    rsub = ren.add_subparsers(dest="renorm_command", required=True)

    qk = rsub.add_parser("qk", help="estimate a level-k seed event probability")
    qk.add_argument("--family", choices=("circuit_absent", "one_arm"), required=True)
    qk.add_argument("--L0", type=float, required=True, help="base scale")
    qk.add_argument("--k", type=int, required=True, help="ladder level")
    qk.add_argument("--p", type=float, required=True)
    qk.add_argument("--lambda", dest="lam", type=float, required=True)
    qk.add_argument("--n", type=int, required=True)
    qk.add_argument("--d", type=int, default=2)
    qk.add_argument("--boundary", choices=("occupied_frame", "torus"), default="occupied_frame")
    qk.add_argument("--seed", type=int, required=True)
    qk.add_argument("--out", required=True, help="output JSON path")
    qk.set_defaults(func=_cmd_renorm_qk)

    chk = rsub.add_parser("check", help="recurrence and inductive decay verdicts")
    chk.add_argument("--in", dest="inputs", nargs="+", required=True, help="qk JSON files")
    chk.add_argument("--constants", choices=("derived", "desk"), default="derived")
    chk.add_argument("--out", help="optional JSON report path")
    chk.set_defaults(func=_cmd_renorm_check)

    tl = rsub.add_parser("trigger-lambda0", help="pair-density trigger for circuit absence")
    tl.add_argument("--p", type=float, required=True)
    tl.add_argument("--L0", type=float, required=True)
    tl.add_argument("--kmax", type=int, default=10)
    tl.add_argument("--d", type=int, default=2)
    tl.add_argument("--constants", choices=("derived", "desk"), default="derived")
    tl.add_argument("--out", help="optional JSON output path")
    tl.set_defaults(func=_cmd_renorm_trigger_lambda0)

    tp = rsub.add_parser("trigger-p0", help="occupancy trigger for the one-arm family")
    tp.add_argument("--lambda", dest="lam", type=float, required=True)
    tp.add_argument("--d", type=int, required=True)
    tp.add_argument("--L0", type=float, required=True)
    tp.add_argument("--kmax", type=int, default=10)
    tp.add_argument("--constants", choices=("derived", "desk"), default="derived")
    tp.add_argument("--psi-hat", type=float, help="known one-arm decay rate; estimated if omitted")
    tp.add_argument("--psi-sizes", type=int, nargs="+", default=[4, 8, 12], help="radii in sites for the psi fit")
    tp.add_argument("--psi-n", type=int, default=200_000, help="replicates per radius")
    tp.add_argument("--p-for-k0", type=float, default=0.5)
    tp.add_argument("--seed", type=int, help="master seed for the psi fit")
    tp.add_argument("--out", help="optional JSON output path")
    tp.set_defaults(func=_cmd_renorm_trigger_p0)

    hl = rsub.add_parser("halfline", help="half-line covering boxes per ladder level")
    hl.add_argument("--L0", type=float, required=True)
    hl.add_argument("--kmax", type=int, required=True)
    hl.add_argument("--out", help="optional CSV output path")
    hl.set_defaults(func=_cmd_renorm_halfline)

    hx = sub.add_parser("hex", help="honeycomb-patch crossing threshold")
    hx.add_argument("--p", type=float, required=True)
    hx.add_argument("--extent", type=int, required=True, help="rhombus side in cells")
    hx.add_argument("--n", type=int, required=True)
    hx.add_argument("--tol", type=float, default=1e-4)
    hx.add_argument("--seed", type=int, required=True)
    hx.add_argument("--out", required=True, help="output CSV path")
    hx.set_defaults(func=_cmd_hex)

    lc = sub.add_parser("lambda-c", help="critical lambda at one site density")
    lc.add_argument("--p", type=float, required=True)
    lc.add_argument("--d", type=int, default=2)
    lc.add_argument("--size", type=int, required=True, help="torus side in sites")
    lc.add_argument("--n", type=int, required=True, help="replicates per seed")
    lc.add_argument("--tol", type=float, default=0.005, help="bisection tolerance")
    lc.add_argument("--seeds", type=int, default=5, help="independent bisections")
    lc.add_argument("--seed", type=int, required=True)
    lc.add_argument("--out", required=True, help="output CSV path")
    lc.set_defaults(func=_cmd_lambda_c)

    pd = sub.add_parser("phase-diagram", help="critical curve over a p grid (CSV+SVG+PNG)")
    pd.add_argument("--p-grid", type=float, nargs="+", required=True)
    pd.add_argument("--d", type=int, default=2)
    pd.add_argument("--size", type=int, required=True)
    pd.add_argument("--n", type=int, required=True, help="replicates per seed")
    pd.add_argument("--tol", type=float, default=0.005)
    pd.add_argument("--seeds", type=int, default=5)
    pd.add_argument("--seed", type=int, required=True)
    pd.add_argument("--out-prefix", required=True, help="output path prefix")
    pd.set_defaults(func=_cmd_phase_diagram)

    rp = sub.add_parser("replay", help="re-run a manifest and verify digests")
    rp.add_argument("--manifest", required=True)
    rp.add_argument("--outdir", help="directory for reproduced outputs (default: temp)")
    rp.add_argument("--check-disk", action="store_true", help="also verify the original files")
    rp.set_defaults(func=_cmd_replay)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except VerdictError as exc:
        print(f"verdict: {exc}", file=sys.stderr)
        return 4
    except SizeRefusalError as exc:
        print(f"size refusal: {exc}", file=sys.stderr)
        return 3
    except (ParameterError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AlignpercError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
