"""Command-line front end: thin client over the core package.

Subcommands: ``build`` (config -> database file), ``align``, ``partition``,
``inspect``, ``interp`` (target -> ROM dump), ``sweep`` (frequency or
stability -> CSV), ``inverse``, ``sample`` (adaptive build) and ``serve``
(start the HTTP query service).

Exit status: 0 on success; 2 for usage errors (unknown flags, malformed
config, domain violations); 1 for numerical failures, with one
machine-readable JSON error line on stderr naming the error taxonomy.

CSV export format: frequency sweeps emit one row per (grid point, output)
with columns ``p0..p{d-1}, x, output_index, re, im, db``; stability sweeps
emit one row per sample with columns ``p0..p{d-1}, q_crit, mode_index,
ambiguous`` (the swept coordinate replaces its slot in ``p``).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import analyze, consistency, dbstore, synth
from .errors import (
    InvalidDomainError,
    InvalidInputError,
    InvalidSpecError,
    OutOfDomainError,
    RomDbError,
)
from .manifold import ManifoldSpec, SchemeSpec, interpolate_rom
from .romtypes import normalization_weights, rom_distance
from .service.models import encode_rom

_USAGE_ERRORS = (InvalidSpecError, OutOfDomainError, InvalidDomainError)


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidSpecError(f"cannot read config {path}: {exc}") from exc


def _parse_floats(text):
    try:
        return np.asarray([float(x) for x in text.split(",") if x != ""], dtype=float)
    except ValueError as exc:
        raise InvalidSpecError(f"malformed number list {text!r}") from exc


def _parse_grid(text):
    parts = text.split(":")
    if len(parts) != 3:
        raise InvalidSpecError("grid must be start:stop:count")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise InvalidSpecError(f"malformed grid {text!r}") from exc
    return np.linspace(start, stop, count)


def _scheme_from_cfg(cfg):
    return SchemeSpec.from_dict(cfg) if cfg else None


def _plan_from_cfg(cfg):
    if not cfg:
        return None
    return {key: ManifoldSpec.from_dict(d) for key, d in cfg.items()}


# ---------------------------------------------------------------------------
# Subcommand implementations
# ---------------------------------------------------------------------------


def _cmd_build(args):
    cfg = _read_json(args.config)
    builder = synth.family_from_dict(cfg.get("family", {}))
    points = synth.points_from_dict(cfg.get("points", {}))
    rob_cfg = cfg.get("rob", {})
    dgp_opts = None
    if "dgp" in rob_cfg:
        dgp = rob_cfg["dgp"]
        dgp_opts = synth.DgpOptions(
            wavenumbers=tuple(dgp["wavenumbers"]),
            derivatives_per_point=int(dgp.get("derivatives_per_point", 8)),
        )
    db = synth.build_database(
        builder,
        points,
        rob_method=rob_cfg.get("method", "modal"),
        k=int(rob_cfg.get("k", 4)),
        domain=synth.domain_from_dict(cfg.get("domain")),
        dgp_opts=dgp_opts,
        pod_freqs=np.asarray(rob_cfg["pod_frequencies"], dtype=float)
        if "pod_frequencies" in rob_cfg
        else None,
    )
    scheme = _scheme_from_cfg(cfg.get("scheme"))
    plan = _plan_from_cfg(cfg.get("plan"))
    if scheme or plan:
        db = replace(db, scheme=scheme or db.scheme, plan=plan or db.plan)
    dbstore.save(db, args.out)
    print(json.dumps({"written": str(args.out), "n_records": db.n_records, "k": db.k}))
    return 0


def _max_pairwise_distance(db):
    ref = db.records[0].rom
    w = normalization_weights(ref)
    worst = 0.0
    for i in range(db.n_records):
        for j in range(i + 1, db.n_records):
            worst = max(worst, rom_distance(db.records[i].rom, db.records[j].rom, w))
    return worst


def _cmd_align(args):
    db = dbstore.load(args.db)
    mode = args.mode.replace("-", "_")
    opts = consistency.FixedPointOptions(
        s_margin=args.s_margin, max_iters=args.max_iters, init=args.init
    )
    before = _max_pairwise_distance(db)
    aligned, reports = consistency.enforce_database_consistency(
        db,
        mode,
        ref_index=args.ref_index,
        opts=opts if mode.startswith("fixed_point") else None,
        theta_max=args.theta_max,
    )
    dbstore.save(aligned, args.out)
    summary = {
        "written": str(args.out),
        "mode": mode,
        "reference_index": aligned.consistency.reference_index,
        "max_pairwise_distance_before": before,
        "max_pairwise_distance_after": _max_pairwise_distance(aligned),
    }
    fp = [r for r in reports.values() if isinstance(r, consistency.FixedPointReport)]
    if fp:
        summary["max_criticality_residual"] = max(r.criticality_residual for r in fp)
        summary["all_converged"] = all(r.converged for r in fp)
        summary["max_iterations"] = max(r.iterations for r in fp)
    print(json.dumps(summary))
    return 0


def _cmd_partition(args):
    db = dbstore.load(args.db)
    boundaries = {}
    for spec in args.axis or []:
        name, _, vals = spec.partition("=")
        if not vals:
            raise InvalidSpecError(f"malformed axis boundary spec {spec!r} (want AXIS=v1,v2)")
        boundaries[int(name)] = [float(v) for v in vals.split(",")]
    try:
        out = dbstore.partition(db, boundaries)
    except InvalidInputError as exc:
        raise InvalidSpecError(str(exc)) from exc
    dbstore.save(out, args.out)
    print(
        json.dumps(
            {
                "written": str(args.out),
                "subdomains": len(out.domain.subdomains),
                "sizes": [len(sub) for sub in out.partition],
            }
        )
    )
    return 0


def _cmd_inspect(args):
    db = dbstore.load(args.db)
    checks = dbstore.verify_database(db)
    report = {
        "n_records": db.n_records,
        "kind": db.kind,
        "k": db.k,
        "n_inputs": db.n_inputs,
        "n_outputs": db.n_outputs,
        "scalar_field": db.scalar_field,
        "n_params": db.domain.n_params,
        "consistency": db.consistency.to_dict(),
        "subdomains": len(db.domain.subdomains),
        "partition_sizes": [len(sub) for sub in db.partition],
        "expected_scalar_count": dbstore.expected_scalar_count(db),
        "checks": {name: "PASS" if ok else "FAIL" for name, ok in checks.items()},
    }
    print(json.dumps(report, indent=2))
    return 0 if all(checks.values()) else 1


def _cmd_interp(args):
    db = dbstore.load(args.db)
    target = _parse_floats(args.target)
    rom = interpolate_rom(
        db, target, allow_inconsistent=args.allow_inconsistent,
        allow_extrapolation=args.allow_extrapolation,
    )
    payload = {
        "target": target.tolist(),
        "consistency": db.consistency.to_dict(),
        "rom": encode_rom(rom),
    }
    text = json.dumps(payload)
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text)
    return 0


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _cmd_sweep(args):
    db = dbstore.load(args.db)
    target = _parse_floats(args.target)
    d = db.domain.n_params
    coord_names = [f"p{i}" for i in range(d)]
    if args.damping:
        xs = np.linspace(db.domain.lower[args.axis], db.domain.upper[args.axis], args.samples)
        rows = []
        for x in xs:
            point = target.copy()
            point[args.axis] = x
            rom = interpolate_rom(db, point, allow_inconsistent=args.allow_inconsistent)
            res = analyze.eigen_analysis(rom)
            rows.append(list(point) + [float(np.min(res.damping_ratios))])
        _write_csv(args.out, coord_names + ["min_damping"], rows)
    elif args.stability:
        if args.crit_axis is None:
            raise InvalidSpecError("--stability needs --crit-axis")
        lo, hi = (
            (db.domain.lower[args.crit_axis], db.domain.upper[args.crit_axis])
            if args.crit_range is None
            else tuple(float(v) for v in args.crit_range.split(":"))
        )
        xs = np.linspace(db.domain.lower[args.axis], db.domain.upper[args.axis], args.samples)
        rows = []
        for x in xs:
            point = target.copy()
            point[args.axis] = x

            def family(q, base=point):
                probe = base.copy()
                probe[args.crit_axis] = q
                return interpolate_rom(db, probe, allow_inconsistent=args.allow_inconsistent)

            res = analyze.critical_parameter(family, (lo, hi), args.tol)
            rows.append(
                list(point) + [res.q_crit, res.mode_index, int(res.tracking_ambiguous)]
            )
        _write_csv(args.out, coord_names + ["q_crit", "mode_index", "ambiguous"], rows)
    else:
        if args.grid is None:
            raise InvalidSpecError("frequency sweep needs --grid start:stop:count")
        grid = _parse_grid(args.grid)
        rom = interpolate_rom(db, target, allow_inconsistent=args.allow_inconsistent)
        u = _parse_floats(args.input) if args.input else None
        resp = analyze.frequency_response(rom, grid, u)
        dbs = analyze.db_transform(resp.outputs)
        rows = []
        for i, x in enumerate(resp.grid):
            for j in range(resp.outputs.shape[1]):
                rows.append(
                    list(target)
                    + [x, j, resp.outputs[i, j].real, resp.outputs[i, j].imag, dbs[i, j]]
                )
        _write_csv(args.out, coord_names + ["x", "output_index", "re", "im", "db"], rows)
    print(json.dumps({"written": str(args.out), "rows": len(rows)}))
    return 0


def _optimizer_from_cfg(cfg):
    cfg = dict(cfg or {})
    kind = cfg.pop("kind", "simulated_annealing")
    if kind == "simulated_annealing":
        return analyze.SimulatedAnnealingSpec(**cfg)
    if kind == "pattern_search":
        return analyze.PatternSearchSpec(**cfg)
    raise InvalidSpecError(f"unknown optimizer kind {kind!r}")


def _inverse_spec_from_cfg(cfg, db):
    domain = synth.domain_from_dict(cfg.get("domain")) or db.domain
    wavenumbers = tuple(cfg["wavenumbers"])
    if "measured" in cfg:
        measured = np.asarray(cfg["measured"], dtype=float)
    elif "truth_point" in cfg and "family" in cfg:
        builder = synth.family_from_dict(cfg["family"])
        h = builder(np.asarray(cfg["truth_point"], dtype=float))
        _, outputs = synth.hdm_frequency_response(h, np.asarray(wavenumbers, dtype=float))
        measured = analyze.db_transform(outputs)
    else:
        raise InvalidSpecError("inverse spec needs 'measured' or ('family' + 'truth_point')")
    return analyze.InverseProblemSpec(
        measured=measured,
        wavenumbers=wavenumbers,
        weights_alpha=tuple(cfg.get("alpha", [1.0] * len(wavenumbers))),
        tikhonov_beta=float(cfg.get("beta", 0.0)),
        domain=domain,
        optimizer=_optimizer_from_cfg(cfg.get("optimizer")),
        input_u=np.asarray(cfg["input"], dtype=float) if "input" in cfg else None,
    )


def _cmd_inverse(args):
    db = dbstore.load(args.db)
    cfg = _read_json(args.spec)
    spec = _inverse_spec_from_cfg(cfg, db)
    result = analyze.solve_inverse(db, spec)
    report = {
        "mu_hat": result.mu_hat.tolist(),
        "objective": result.objective,
        "n_calls": result.n_calls,
        "rejected_probes": result.rejected_probes,
    }
    if "truth_point" in cfg:
        report["recovery_error"] = analyze.recovery_error(
            result.mu_hat, np.asarray(cfg["truth_point"], dtype=float), spec.domain
        )
    print(json.dumps(report))
    return 0


def _cmd_sample(args):
    cfg = _read_json(args.config)
    builder_fn = synth.family_from_dict(cfg["family"])
    rob_cfg = cfg.get("rob", {})
    method = rob_cfg.get("method", "modal")
    k = int(rob_cfg.get("k", 4))
    domain = synth.domain_from_dict(cfg["domain"])
    sampler_cfg = dict(cfg.get("sampler", {}))
    metric = sampler_cfg.get("metric", "output_error")
    grid = np.asarray(sampler_cfg.get("frequency_grid", [0.5, 1.0, 1.5]), dtype=float)

    def builder(point):
        h = builder_fn(point)
        rob = synth.build_rob(h, method, k)
        return synth.RomRecord(point=point, rom=synth.project(h, rob), hdm_dof_count=h.n, rob=rob)

    inverse_template = None
    if metric == "inverse_recovery":
        inv_cfg = dict(sampler_cfg.get("inverse", {}))
        wavenumbers = tuple(inv_cfg["wavenumbers"])
        inverse_template = analyze.InverseProblemSpec(
            measured=np.zeros((len(wavenumbers), builder_fn(domain.center()).n_outputs)),
            wavenumbers=wavenumbers,
            weights_alpha=tuple(inv_cfg.get("alpha", [1.0] * len(wavenumbers))),
            tikhonov_beta=float(inv_cfg.get("beta", 0.0)),
            domain=domain,
            optimizer=_optimizer_from_cfg(inv_cfg.get("optimizer")),
        )
        truth_grid = np.asarray(sorted(wavenumbers), dtype=float)
        reorder = np.argsort(np.argsort(np.asarray(wavenumbers)))

        def truth(point):
            _, outputs = synth.hdm_frequency_response(builder_fn(point), truth_grid)
            return analyze.db_transform(outputs)[reorder]

    else:

        def truth(point):
            _, outputs = synth.hdm_frequency_response(builder_fn(point), grid)
            return analyze.db_transform(outputs)

    config = analyze.SamplerConfig(
        error_tolerance=float(sampler_cfg.get("tolerance", 0.05)),
        max_refinements=int(sampler_cfg.get("max_refinements", 3)),
        initial_lattice=tuple(sampler_cfg.get("initial_lattice", [2] * domain.n_params)),
        metric=metric,
        align_mode=sampler_cfg.get("align_mode", "none"),
        frequency_grid=tuple(grid),
        inverse_template=inverse_template,
    )
    db, log = analyze.adaptive_sample(
        builder, truth, config, domain, scheme=_scheme_from_cfg(cfg.get("scheme"))
    )
    dbstore.save(db, args.out)
    print(
        json.dumps(
            {
                "written": str(args.out),
                "n_records": db.n_records,
                "converged": log.converged,
                "iterations": len(log.iterations),
                "failing_cells": len(log.failing_cells),
            }
        )
    )
    return 0 if log.converged else 1


def _cmd_serve(args):
    import uvicorn

    from .service import create_app

    databases = {}
    for path in args.db or []:
        p = Path(path)
        databases[p.stem] = dbstore.load(p)
    app = create_app(databases=databases or None, db_dir=args.db_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _build_parser():
    parser = argparse.ArgumentParser(prog="romdb", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build a database from a declarative family config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_build)

    p = sub.add_parser("align", help="enforce coordinate consistency across records")
    p.add_argument("--db", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", required=True,
                   choices=["procrustes", "fixed-point-g", "fixed-point-pg"])
    p.add_argument("--ref-index", type=int, default=None)
    p.add_argument("--theta-max", type=float, default=None)
    p.add_argument("--s-margin", type=float, default=1.5)
    p.add_argument("--max-iters", type=int, default=10_000)
    p.add_argument("--init", default="spectral",
                   choices=["identity", "random", "warm", "spectral"])
    p.set_defaults(fn=_cmd_align)

    p = sub.add_parser("partition", help="split the domain into sub-databases")
    p.add_argument("--db", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--axis", action="append", metavar="AXIS=v1,v2",
                   help="internal boundaries per axis (repeatable)")
    p.set_defaults(fn=_cmd_partition)

    p = sub.add_parser("inspect", help="print header and invariant checks")
    p.add_argument("--db", required=True)
    p.set_defaults(fn=_cmd_inspect)

    p = sub.add_parser("interp", help="interpolate a ROM at a target point")
    p.add_argument("--db", required=True)
    p.add_argument("--target", required=True, help="comma-separated coordinates")
    p.add_argument("--out", default=None)
    p.add_argument("--allow-inconsistent", action="store_true")
    p.add_argument("--allow-extrapolation", action="store_true")
    p.set_defaults(fn=_cmd_interp)

    p = sub.add_parser("sweep", help="frequency or stability sweep to CSV")
    p.add_argument("--db", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--grid", default=None, help="start:stop:count frequency grid")
    p.add_argument("--input", default=None, help="comma-separated input amplitudes")
    p.add_argument("--stability", action="store_true")
    p.add_argument("--damping", action="store_true",
                   help="sweep the smallest damping ratio along --axis")
    p.add_argument("--axis", type=int, default=0, help="swept parameter axis")
    p.add_argument("--samples", type=int, default=26)
    p.add_argument("--crit-axis", type=int, default=None)
    p.add_argument("--crit-range", default=None, help="lo:hi bracket for the crossing")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--allow-inconsistent", action="store_true")
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("inverse", help="solve the reduced inverse problem")
    p.add_argument("--db", required=True)
    p.add_argument("--spec", required=True)
    p.set_defaults(fn=_cmd_inverse)

    p = sub.add_parser("sample", help="adaptive database construction")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_sample)

    p = sub.add_parser("serve", help="start the HTTP query service")
    p.add_argument("--db", action="append", help="database file (repeatable)")
    p.add_argument("--db-dir", default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)
    p.set_defaults(fn=_cmd_serve)

    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except _USAGE_ERRORS as exc:
        print(json.dumps({"error": exc.taxonomy, "detail": str(exc)}), file=sys.stderr)
        return 2
    except RomDbError as exc:
        print(json.dumps({"error": exc.taxonomy, "detail": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
