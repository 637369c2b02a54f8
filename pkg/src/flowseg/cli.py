"""flowseg command line: field generation, tracing, search, neighborhood
characterization, reconstruction, saliency, statistical analysis, and the
experiment matrix."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .analysis import (GOOD, BAD, dominance_groups, histogram,
                       percentile_groups, sparse_rbn_report)
from .field import analytic_field, load_grid, rasterize, save_grid
from .harness import (default_config, load_config, run_matrix, select_best,
                      write_reconstruction_csv, write_saliency_csv,
                      MatrixRunner, ExperimentConfig)
from .neighborhood import average_distance, build_icosa_bins, uniformity
from .reconstruct import WeightScheme, reconstruct_field
from .saliency import SaliencyConfig, score_segments
from .search import (DistanceMetric, SearchConfig, build_index, knn, rbn)
from .tracer import (LEVEL_SEED_COUNTS, SeedSpec, decompose, generate_seeds,
                     length_epsilon, load_lines, save_lines, trace_many)
from .field import gradient_magnitude_field


def _parse_triple(text, cast=float):
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected X,Y,Z, got {text!r}")
    return [cast(p) for p in parts]


def _metric(name: str) -> DistanceMetric:
    return DistanceMetric(name)


def _search_config(args) -> SearchConfig:
    metric = _metric(args.metric)
    if args.knn is not None:
        return SearchConfig("knn", metric, k=args.knn,
                            corner_exclusion=not args.no_corner_exclusion)
    if args.rbn is not None:
        return SearchConfig("rbn", metric, r=args.rbn,
                            nearest_fallback=not args.no_fallback)
    raise SystemExit("one of --knn or --rbn is required")


def _add_search_args(p):
    p.add_argument("--metric", default="shortest",
                   choices=["shortest", "longest", "average"])
    p.add_argument("--knn", type=int, default=None, metavar="K")
    p.add_argument("--rbn", type=float, default=None, metavar="R")
    p.add_argument("--no-corner-exclusion", action="store_true")
    p.add_argument("--no-fallback", action="store_true")


def _load_scene(lines_path, grid_path):
    gf = load_grid(grid_path)
    lines = load_lines(lines_path)
    segs = decompose(lines, length_epsilon(gf.bounds))
    return gf, segs, build_index(segs, gf.bounds)


def cmd_field_gen(args):
    af = analytic_field(args.kind if args.kind != "saddle" else "saddle")
    gf = rasterize(af, args.dims)
    save_grid(gf, args.out)
    print(f"wrote {args.out}: dims {gf.dims}, bounds "
          f"{gf.bounds.min_corner.tolist()}..{gf.bounds.max_corner.tolist()}")


def cmd_trace(args):
    gf = load_grid(args.field)
    strategy = {"feature": "feature-aware"}.get(args.strategy, args.strategy)
    count = LEVEL_SEED_COUNTS.get(args.level, args.level)
    spec = SeedSpec(strategy, count, rng_seed=args.seed_rng)
    interest = (gradient_magnitude_field(gf)
                if strategy == "feature-aware" else None)
    seeds = generate_seeds(spec, gf.bounds, interest)
    h = args.step if args.step else 0.5 * float(np.min(gf.spacing))
    lines = trace_many(gf, seeds, h, args.max_steps)
    save_lines(lines, args.out)
    n_pts = sum(len(l.points) for l in lines)
    print(f"wrote {args.out}: {len(lines)} lines, {n_pts} points, h={h:g}")


def cmd_search(args):
    gf, segs, index = _load_scene(args.lines, args.field)
    cfg = _search_config(args)
    q = np.array(args.query)
    nb = (knn if cfg.method == "knn" else rbn)(index, q, cfg)
    entries = [{"segment_id": int(g), "distance": float(d),
                "streamline_id": int(segs.streamline_ids[g]),
                "a": segs.a[g].tolist(), "b": segs.b[g].tolist()}
               for g, d in zip(nb.seg_ids, nb.distances)]
    json.dump({"query": q.tolist(), "metric": args.metric,
               "method": cfg.method, "parameter": cfg.parameter,
               "entries": entries}, sys.stdout, indent=1)
    print()


def cmd_characterize(args):
    gf, segs, index = _load_scene(args.lines, args.grid)
    cfg = _parse_search_spec(args.search, args.metric)
    bins = build_icosa_bins()
    pts = gf.node_positions()
    from .search import knn_batch, rbn_batch
    batch = (knn_batch if cfg.method == "knn" else rbn_batch)(index, pts, cfg)
    out = sys.stdout if args.out == "-" else open(args.out, "w")
    out.write("x,y,z,n_neighbors,avg_dist,uniformity\n")
    for i in range(len(batch)):
        nb = batch[i]
        if len(nb) == 0:
            out.write("%.17g,%.17g,%.17g,0,nan,nan\n" % tuple(pts[i]))
            continue
        u = uniformity(nb, bins, eps_len=length_epsilon(gf.bounds))
        out.write("%.17g,%.17g,%.17g,%d,%.17g,%.17g\n" % (
            pts[i][0], pts[i][1], pts[i][2], len(nb),
            average_distance(nb), u.mu))
    if out is not sys.stdout:
        out.close()
        print(f"wrote {args.out}")


def _parse_search_spec(spec: str, metric: str) -> SearchConfig:
    kind, _, value = spec.partition(":")
    m = _metric(metric)
    if kind == "knn":
        return SearchConfig("knn", m, k=int(value))
    if kind == "rbn":
        return SearchConfig("rbn", m, r=float(value))
    raise SystemExit(f"bad search spec {spec!r}, expected knn:K or rbn:R")


def cmd_reconstruct(args):
    gf, segs, index = _load_scene(args.lines, args.field)
    cfg = _search_config(args)
    scheme = WeightScheme({"idw": "inverse-distance"}.get(args.scheme,
                                                          args.scheme))
    mode = "central-difference" if args.central_diff else "direct"
    recs, summary = reconstruct_field(gf, index, cfg, scheme, mode,
                                      normalized_summary=args.normalized)
    write_reconstruction_csv(recs, args.out)
    with open(args.out + ".summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, sort_keys=True, indent=1)
    print(f"wrote {args.out} (e_mean={summary['e_mean']:.6g})")


def cmd_saliency(args):
    gf, segs, index = _load_scene(args.lines, args.field)
    cfg = _search_config(args)
    ref_radius = None if args.ref_radius in (None, "auto") \
        else float(args.ref_radius)
    sal = score_segments(gf, index, SaliencyConfig(
        cfg, ref_samples=args.ref_samples, ref_radius=ref_radius,
        exclusion_window=args.exclusion_window))
    write_saliency_csv(sal, args.out)
    print(f"wrote {args.out}: {len(sal)} records "
          f"({sal.n_dropped_no_neighbor} no-neighbor, "
          f"{sal.n_dropped_no_reference} no-reference drops)")


def _read_record_csv(path):
    data = np.genfromtxt(path, delimiter=",", names=True)
    return data


def cmd_analyze(args):
    knn_data = _read_record_csv(args.knn_csv)
    rbn_data = _read_record_csv(args.rbn_csv)
    out = {}
    if args.good_bad:
        labels = percentile_groups(knn_data["err"], args.low_pct,
                                   100 - args.low_pct)
        for name, data in (("knn", knn_data), ("rbn", rbn_data)):
            labels = percentile_groups(data["err"], args.low_pct,
                                       100 - args.low_pct)
            out[f"{name}_good_bad"] = {
                "n_good": int((labels == GOOD).sum()),
                "n_bad": int((labels == BAD).sum()),
                "mean_err_good": float(data["err"][labels == GOOD].mean()),
                "mean_err_bad": float(data["err"][labels == BAD].mean()),
                "mean_uniformity_good":
                    float(data["uniformity"][labels == GOOD].mean()),
                "mean_uniformity_bad":
                    float(data["uniformity"][labels == BAD].mean()),
                "mean_avg_dist_good":
                    float(data["avg_dist"][labels == GOOD].mean()),
                "mean_avg_dist_bad":
                    float(data["avg_dist"][labels == BAD].mean()),
            }
    if args.dominance:
        labels = dominance_groups(knn_data["err"], rbn_data["err"],
                                  args.threshold_pct)
        values, counts = np.unique(labels.astype(str), return_counts=True)
        out["dominance"] = dict(zip(values.tolist(),
                                    [int(c) for c in counts]))
    if args.sparse:
        rep = sparse_rbn_report(rbn_data["err"], rbn_data["n"],
                                knn_data["err"])
        out["sparse_rbn"] = rep.__dict__
    if args.hist:
        col, _, nbins = args.hist.partition(":")
        vals = knn_data[col]
        h = histogram(vals, int(nbins or 20),
                      (float(np.min(vals)), float(np.max(vals))))
        out["histogram"] = {"column": col, "edges": h.edges.tolist(),
                            "counts": h.counts.tolist(), "total": h.total,
                            "overflow": h.overflow}
    json.dump(out, sys.stdout, indent=1, sort_keys=True)
    print()


def cmd_run(args):
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = default_config(args.out or "flowseg_out")
    if args.out:
        cfg.output_dir = args.out
    reports = run_matrix(cfg, jobs=args.jobs, resume=not args.no_resume)
    done = sum(1 for r in reports if r.status == "done")
    print(f"{done}/{len(reports)} cells done -> {cfg.output_dir}")


def cmd_best(args):
    runner = _reports_from_dir(args.dir)
    best = select_best(runner)
    for key, rep in sorted(best.items()):
        print("|".join(map(str, key)), "->", rep.key.cell_id,
              f"e_mean={rep.reconstruction['e_mean']:.6g}")


def cmd_report(args):
    reports = _reports_from_dir(args.dir)
    rows = []
    for rep in reports:
        row = {**rep.key.as_dict(), "status": rep.status}
        if rep.reconstruction:
            row.update({f"recon_{k}": v
                        for k, v in rep.reconstruction.items()})
        if rep.saliency:
            row.update({f"sal_{k}": v for k, v in rep.saliency.items()})
        rows.append(row)
    if args.format == "json":
        json.dump(rows, sys.stdout, indent=1, sort_keys=True)
        print()
        return
    cols = sorted({c for row in rows for c in row})
    print(",".join(cols))
    for row in rows:
        print(",".join(str(row.get(c, "")) for c in cols))


def _reports_from_dir(path):
    import glob
    import os
    from .harness import CellKey, ExperimentReport
    reports = []
    for mpath in sorted(glob.glob(os.path.join(path, "cells", "*.json"))):
        with open(mpath, "r", encoding="utf-8") as fh:
            m = json.load(fh)
        key = CellKey(**m["cell"])
        reports.append(ExperimentReport(key, m["status"],
                                        m.get("reconstruction"),
                                        m.get("saliency"), m.get("error")))
    return reports


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="flowseg",
        description="point-centered neighbor search over streamline "
                    "segments, with reconstruction and saliency tasks")
    sub = parser.add_subparsers(dest="command", required=True)

    p_field = sub.add_parser("field", help="ground-truth field utilities")
    fsub = p_field.add_subparsers(dest="subcommand", required=True)
    p_gen = fsub.add_parser("gen", help="rasterize an analytic field")
    p_gen.add_argument("--kind", required=True,
                       choices=["rotor", "saddle", "abc"])
    p_gen.add_argument("--dims", type=lambda s: _parse_triple(s, int),
                       required=True, metavar="NX,NY,NZ")
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=cmd_field_gen)

    p_trace = sub.add_parser("trace", help="seed and trace streamlines")
    p_trace.add_argument("--field", required=True)
    p_trace.add_argument("--strategy", required=True,
                         choices=["uniform", "jittered", "random",
                                  "feature", "feature-aware"])
    p_trace.add_argument("--level", type=int, required=True,
                         help="1|2|3 for 125/512/1728 seeds, or a raw count")
    p_trace.add_argument("--step", type=float, default=None)
    p_trace.add_argument("--max-steps", type=int, default=100)
    p_trace.add_argument("--seed-rng", type=int, default=0)
    p_trace.add_argument("--out", required=True)
    p_trace.set_defaults(func=cmd_trace)

    p_search = sub.add_parser("search", help="one neighborhood as JSON")
    p_search.add_argument("--lines", required=True)
    p_search.add_argument("--field", required=True,
                          help="VF1 grid defining the domain bounds")
    _add_search_args(p_search)
    p_search.add_argument("--query", type=_parse_triple, required=True,
                          metavar="X,Y,Z")
    p_search.set_defaults(func=cmd_search)

    p_char = sub.add_parser("characterize",
                            help="per-grid-point neighborhood measures CSV")
    p_char.add_argument("--lines", required=True)
    p_char.add_argument("--grid", required=True)
    p_char.add_argument("--search", required=True, metavar="knn:K|rbn:R")
    p_char.add_argument("--metric", default="shortest",
                        choices=["shortest", "longest", "average"])
    p_char.add_argument("--out", default="-")
    p_char.set_defaults(func=cmd_characterize)

    p_rec = sub.add_parser("reconstruct", help="reconstruct and score")
    p_rec.add_argument("--field", required=True)
    p_rec.add_argument("--lines", required=True)
    _add_search_args(p_rec)
    p_rec.add_argument("--scheme", default="idw",
                       choices=["idw", "uniform", "gaussian"])
    p_rec.add_argument("--central-diff", action="store_true")
    p_rec.add_argument("--normalized", action="store_true")
    p_rec.add_argument("--out", required=True)
    p_rec.set_defaults(func=cmd_reconstruct)

    p_sal = sub.add_parser("saliency", help="per-segment saliency CSV")
    p_sal.add_argument("--field", required=True)
    p_sal.add_argument("--lines", required=True)
    _add_search_args(p_sal)
    p_sal.add_argument("--ref-radius", default="auto")
    p_sal.add_argument("--ref-samples", type=int, default=16)
    p_sal.add_argument("--exclusion-window", type=int, default=1)
    p_sal.add_argument("--out", required=True)
    p_sal.set_defaults(func=cmd_saliency)

    p_an = sub.add_parser("analyze", help="statistics over record CSVs")
    p_an.add_argument("--knn-csv", required=True)
    p_an.add_argument("--rbn-csv", required=True)
    p_an.add_argument("--good-bad", action="store_true")
    p_an.add_argument("--dominance", action="store_true")
    p_an.add_argument("--sparse", action="store_true")
    p_an.add_argument("--hist", default=None, metavar="COL:BINS")
    p_an.add_argument("--low-pct", type=float, default=10)
    p_an.add_argument("--threshold-pct", type=float, default=80)
    p_an.set_defaults(func=cmd_analyze)

    p_run = sub.add_parser("run", help="run an experiment matrix")
    p_run.add_argument("--config", default=None)
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--jobs", type=int, default=None)
    p_run.add_argument("--no-resume", action="store_true")
    p_run.set_defaults(func=cmd_run)

    p_best = sub.add_parser("best", help="best cells of a finished run")
    p_best.add_argument("--dir", required=True)
    p_best.set_defaults(func=cmd_best)

    p_rep = sub.add_parser("report", help="dump all cell summaries")
    p_rep.add_argument("--dir", required=True)
    p_rep.add_argument("--format", default="csv", choices=["csv", "json"])
    p_rep.set_defaults(func=cmd_report)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
