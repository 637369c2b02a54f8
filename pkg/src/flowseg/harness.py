"""Experiment matrix: datasets x seeding x levels x methods x metrics x
parameter sweeps, with deterministic persistence and best-cell selection.

One *cell* is a (dataset, seeding, level, method, metric, parameter)
combination; each produces a reconstruction summary and a saliency
summary. Cells sharing (dataset, seeding, level) reuse one traced line
set and one segment index; cells sharing the metric additionally share
one k_max nearest-neighbor pass and one r_max radius pass, from which
every per-k and per-r result is an exact sorted-prefix slice (nearest
prefix property for KNN, strict-below-r prefix for RBN, corner exclusion
keeps a prefix too). All kernels are deterministic, so two runs of the
same config produce byte-identical manifests and CSVs.

Outputs under output_dir:
    run.json           config echo, radii, line-set hashes, trace counts
    run.log            timing (kept out of the comparable artifacts)
    fields/*.vf1       rasterized ground-truth grids
    lines/*.sl1        traced streamlines (content-hash cached)
    cells/*.json       one manifest per cell (summaries only)
    records/*.csv      per-point records for the overall best cells
    best.json          best-cell selection
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from dataclasses import dataclass, field as dcfield, asdict

import numpy as np

from .analysis import ccc as _ccc, pcc as _pcc
from .errors import DegenerateInputError
from .field import (GridField, analytic_field, gradient_magnitude_field,
                    load_grid, rasterize, rms_speed, save_grid)
from .neighborhood import build_icosa_bins, segment_bin_masks_csr
from .reconstruct import (WeightScheme, summarize, segment_vectors,
                          csr_weights, _row_reduce, ReconstructionSet)
from .saliency import SaliencyConfig, reference_saliency_many
from .search import (DistanceMetric, SearchConfig, build_index, row_counts)
from .tracer import (LEVEL_SEED_COUNTS, SeedSpec, decompose,
                     generate_seeds, length_epsilon, save_lines, load_lines,
                     trace_many)
from . import _kernels

METRIC_ORDER = ("shortest", "average", "longest")
DEFAULT_KNN_KS = (2, 4, 6, 8, 12, 16)
CALIBRATION_QUERIES = 100
CALIBRATION_BISECTIONS = 18


@dataclass
class ExperimentConfig:
    """One JSON-serializable document drives the whole matrix.

    fields: [{"name", "kind", "dims": [nx,ny,nz], "params"?} |
             {"name", "path"}]
    rbn_rs: {field name: [radii]}; missing/empty lists are calibrated so
    mean neighbor counts bracket the K sweep.
    """

    fields: list
    seed_strategies: list
    levels: list
    metrics: list
    knn_ks: list
    rbn_rs: dict
    output_dir: str
    rng_seed: int = 0
    scheme: dict = dcfield(default_factory=lambda: {"kind": "inverse-distance"})
    mode: str = "direct"
    saliency: dict = dcfield(default_factory=lambda: {
        "ref_samples": 16, "ref_radius": None, "exclusion_window": 1})
    step_factor: float = 0.5
    max_steps: int = 100
    jitter_fraction: float = 0.9
    record_policy: str = "best"

    def __post_init__(self):
        if not (self.fields and self.seed_strategies and self.levels
                and self.metrics and self.knn_ks):
            raise ValueError("all sweep lists must be nonempty")
        if self.record_policy not in ("none", "best", "all"):
            raise ValueError("record_policy must be none|best|all")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=1)


def default_config(output_dir: str, rng_seed: int = 20240) -> ExperimentConfig:
    """The desk-scale matrix: 3 analytic fields x 4 seedings x 3 levels x
    3 metrics x (6 Ks + 6 Rs) = 1296 cells over 64^3 grids."""
    return ExperimentConfig(
        fields=[{"name": "rotor", "kind": "rotor", "dims": [64, 64, 64]},
                {"name": "saddle", "kind": "saddle", "dims": [64, 64, 64]},
                {"name": "abc", "kind": "abc", "dims": [64, 64, 64]}],
        seed_strategies=["uniform", "jittered", "random", "feature-aware"],
        levels=[1, 2, 3],
        metrics=list(METRIC_ORDER),
        knn_ks=list(DEFAULT_KNN_KS),
        rbn_rs={},
        output_dir=output_dir,
        rng_seed=rng_seed,
    )


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return ExperimentConfig(**json.load(fh))


@dataclass(frozen=True)
class CellKey:
    dataset: str
    seeding: str
    level: int
    method: str
    metric: str
    parameter: float

    @property
    def cell_id(self) -> str:
        p = (f"k{int(self.parameter)}" if self.method == "knn"
             else f"r{repr(float(self.parameter))}")
        return (f"{self.dataset}_{self.seeding}_L{self.level}"
                f"_{self.method}_{self.metric}_{p}")

    def as_dict(self) -> dict:
        return {"dataset": self.dataset, "seeding": self.seeding,
                "level": self.level, "method": self.method,
                "metric": self.metric, "parameter": self.parameter}


@dataclass
class ExperimentReport:
    key: CellKey
    status: str
    reconstruction: dict | None = None
    saliency: dict | None = None
    error: str | None = None
    best_flags: tuple = ()


def _json_dump(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _derive_seed(root: int, *parts) -> int:
    tag = ":".join(str(p) for p in parts)
    digest = hashlib.sha256(f"{root}:{tag}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


class _Group:
    """Shared per-(line set, metric) query passes over one query set."""

    def __init__(self, index, queries, metric, kmax, r_max):
        n_seg = len(index.segments)
        counts, _, _ = index.raw_count(queries, r_max, metric)
        lens = np.maximum(np.minimum(kmax, n_seg), counts)
        self.indptr, self.gids, self.dists = index.raw_topk(
            queries, lens, metric)
        self.queries = queries
        self.rowlen = np.diff(self.indptr)
        self.rowid = np.repeat(np.arange(len(queries), dtype=np.int64),
                               self.rowlen)
        self.rank = (np.arange(len(self.gids), dtype=np.int64)
                     - np.repeat(self.indptr[:-1], self.rowlen))

    def prefix_len(self, method, param, dcorner=None):
        """Exact per-query kept-prefix lengths for one cell, with the
        corner-exclusion / nearest-fallback modifications applied."""
        if method == "knn":
            m0 = np.minimum(int(param), self.rowlen)
            flags = (self.rank < m0[self.rowid]) & \
                    (self.dists <= dcorner[self.rowid])
            m = row_counts(self.indptr, flags)
        else:
            m = row_counts(self.indptr, self.dists < float(param))
        return np.maximum(m, 1)


def _recon_group_stats(group, bins, segs, vecs, eps_len, eps_weight):
    masks = segment_bin_masks_csr(bins, group.queries, group.indptr,
                                  group.gids, segs.a, segs.b, eps_len)
    nnz = len(group.gids)
    cum_pop = np.empty(nnz, dtype=np.uint8)
    cum_d = np.empty(nnz)
    cum_iw = np.empty(nnz)
    cum_ivec = np.empty((nnz, 3))
    cum_vec = np.empty((nnz, 3))
    _kernels.prefix_stats(group.indptr, group.dists, masks, group.gids,
                          vecs, eps_weight, cum_pop, cum_d, cum_iw,
                          cum_ivec, cum_vec)
    return {"cum_pop": cum_pop, "cum_d": cum_d, "cum_iw": cum_iw,
            "cum_ivec": cum_ivec, "cum_vec": cum_vec}


def _recon_cell(group, stats, m, truth, scheme: WeightScheme, vecs):
    """Per-point reconstruction arrays for one cell from prefix stats."""
    idx = group.indptr[:-1] + m - 1
    n = m.astype(np.int64)
    avg = stats["cum_d"][idx] / n
    uni = stats["cum_pop"][idx].astype(np.float64) / 20.0
    if scheme.kind == "inverse-distance":
        recon = stats["cum_ivec"][idx] / stats["cum_iw"][idx, None]
    elif scheme.kind == "uniform":
        recon = stats["cum_vec"][idx] / n[:, None]
    else:
        recon = _gaussian_cell(group, m, scheme, vecs)
    err = np.linalg.norm(recon - truth, axis=1)
    return recon, err, n, avg, uni


def _gaussian_cell(group, m, scheme, vecs):
    take = _prefix_take(group.indptr, m)
    new_indptr = np.zeros(len(m) + 1, dtype=np.int64)
    np.cumsum(m, out=new_indptr[1:])
    w = csr_weights(new_indptr, group.dists[take], scheme)
    contrib = w[:, None] * vecs[group.gids[take]]
    out = np.empty((len(m), 3))
    for c in range(3):
        out[:, c] = _row_reduce(np.add, np.ascontiguousarray(contrib[:, c]),
                                new_indptr)
    return out


def _prefix_take(indptr, keep):
    total = int(keep.sum())
    new_starts = np.zeros(len(keep), dtype=np.int64)
    np.cumsum(keep[:-1], out=new_starts[1:])
    nz = keep > 0
    offs = np.arange(total, dtype=np.int64) - np.repeat(new_starts[nz],
                                                        keep[nz])
    return np.repeat(indptr[:-1][nz], keep[nz]) + offs


def _saliency_group_stats(group, segs, window, eps):
    nnz = len(group.gids)
    cum_wt = np.empty(nnz)
    cum_w = np.empty(nnz)
    cum_sd = np.empty(nnz)
    cum_n = np.empty(nnz, dtype=np.int64)
    qseg = np.arange(len(group.queries), dtype=np.int64)
    _kernels.saliency_prefix_stats(group.indptr, group.gids, qseg, segs.a,
                                   segs.direction, segs.streamline_ids,
                                   segs.index_on_curve, int(window),
                                   eps, cum_wt, cum_w, cum_sd, cum_n)
    return {"cum_wt": cum_wt, "cum_w": cum_w, "cum_sd": cum_sd,
            "cum_n": cum_n}


def _saliency_cell(group, stats, m, gf, segs, sal_cfg, eps_speed,
                   eps=1e-12):
    idx = group.indptr[:-1] + m - 1
    kcount = stats["cum_n"][idx]
    has_nb = kcount > 0
    wsum = stats["cum_w"][idx]
    s_cal = np.divide(stats["cum_wt"][idx], wsum,
                      out=np.full(len(m), np.nan), where=has_nb)
    if sal_cfg.ref_radius is not None:
        radii = np.full(len(m), float(sal_cfg.ref_radius))
    else:
        radii = np.divide(stats["cum_sd"][idx], kcount,
                          out=np.zeros(len(m)), where=has_nb)
        radii = np.maximum(radii, eps)
    s_ref, used = reference_saliency_many(gf, segs, radii, has_nb,
                                          sal_cfg.ref_samples, eps_speed)
    valid = has_nb & (used > 0)
    return s_cal, s_ref, radii, kcount, has_nb, valid


def _saliency_summary(s_cal, s_ref, kcount, has_nb, valid) -> dict:
    out = {
        "n_records": int(valid.sum()),
        "n_dropped_no_neighbor": int((~has_nb).sum()),
        "n_dropped_no_reference": int((has_nb & ~valid).sum()),
        "mean_n_neighbors": float(kcount[valid].mean()) if valid.any() else 0.0,
        "mean_s_cal": float(s_cal[valid].mean()) if valid.any() else None,
        "mean_s_ref": float(s_ref[valid].mean()) if valid.any() else None,
        "ccc": None, "pcc": None, "pcc_p": None, "correlation_error": None,
    }
    if valid.sum() >= 3:
        try:
            out["ccc"] = _ccc(s_cal[valid], s_ref[valid])
            r, p = _pcc(s_cal[valid], s_ref[valid])
            out["pcc"] = r
            out["pcc_p"] = p
        except DegenerateInputError as exc:
            out["correlation_error"] = str(exc)
    else:
        out["correlation_error"] = "fewer than 3 valid records"
    return out


def calibrate_radii(index, bounds, targets, rng_seed: int,
                    metric=DistanceMetric.SHORTEST) -> list[float]:
    """Radii whose mean neighbor counts at 100 seeded random grid points
    hit the given targets (log-space bisection, deterministic)."""
    rng = np.random.default_rng(rng_seed & (2 ** 64 - 1))
    queries = rng.uniform(bounds.min_corner, bounds.max_corner,
                          (CALIBRATION_QUERIES, 3))
    diag = bounds.diagonal
    out = []
    for target in targets:
        lo, hi = math.log(diag * 1e-4), math.log(diag)
        for _ in range(CALIBRATION_BISECTIONS):
            mid = 0.5 * (lo + hi)
            counts, _, _ = index.raw_count(queries, math.exp(mid), metric)
            if counts.mean() < target:
                lo = mid
            else:
                hi = mid
        out.append(math.exp(0.5 * (lo + hi)))
    return out


class MatrixRunner:
    """Executes one ExperimentConfig; see run_matrix."""

    def __init__(self, cfg: ExperimentConfig, jobs: int | None = None,
                 resume: bool = True):
        self.cfg = cfg
        self.resume = resume
        self.out = os.environ.get("FLOWSEG_OUT") or cfg.output_dir
        self.config_hash = _sha256(cfg.to_json().encode())[:16]
        self.bins = build_icosa_bins()
        self.traces_performed = 0
        self.line_sets = []
        self.reports: list[ExperimentReport] = []
        self.log_lines = []
        if jobs is not None:
            import numba
            numba.set_num_threads(max(1, int(jobs)))

    # -- persistence helpers ----------------------------------------------

    def _path(self, *parts) -> str:
        return os.path.join(self.out, *parts)

    def _log(self, msg: str):
        self.log_lines.append(f"[{time.time():.3f}] {msg}")

    def _prepare_dirs(self):
        for sub in ("fields", "lines", "cells", "records"):
            os.makedirs(self._path(sub), exist_ok=True)

    # -- inputs -------------------------------------------------------------

    def _load_field(self, spec: dict) -> GridField:
        path = self._path("fields", f"{spec['name']}.vf1")
        if self.resume and os.path.exists(path):
            return load_grid(path)
        if "path" in spec:
            gf = load_grid(spec["path"])
        else:
            af = analytic_field(spec["kind"], spec.get("params"))
            gf = rasterize(af, spec.get("dims", [64, 64, 64]))
        save_grid(gf, path)
        return gf

    def _line_set(self, fname: str, field_bytes_hash: str, gf: GridField,
                  strategy: str, level: int, interest) -> list:
        s_n = LEVEL_SEED_COUNTS.get(level, level)
        h = self.cfg.step_factor * float(np.min(gf.spacing))
        seed = _derive_seed(self.cfg.rng_seed, fname, strategy, level)
        spec = SeedSpec(strategy, s_n, self.cfg.jitter_fraction, seed)
        cache_key = _sha256(json.dumps(
            [field_bytes_hash, strategy, s_n, self.cfg.jitter_fraction,
             seed, h, self.cfg.max_steps], sort_keys=True).encode())[:16]
        base = f"{fname}_{strategy}_L{level}"
        lpath = self._path("lines", f"{base}.sl1")
        mpath = self._path("lines", f"{base}.meta.json")
        if os.path.exists(mpath) and os.path.exists(lpath):
            with open(mpath, "r", encoding="utf-8") as fh:
                meta = json.load(fh)
            if meta.get("cache_key") == cache_key:
                lines = load_lines(lpath)
                self.line_sets.append({**meta, "traced": False})
                return lines
        seeds = generate_seeds(spec, gf.bounds, interest)
        lines = trace_many(gf, seeds, h, self.cfg.max_steps)
        save_lines(lines, lpath)
        self.traces_performed += len(seeds)
        meta = {"cache_key": cache_key, "name": base, "n_lines": len(lines),
                "n_seeds": int(len(seeds)), "h": h,
                "sl1_sha256": _sha256(open(lpath, "rb").read())}
        _json_dump(meta, mpath)
        self.line_sets.append({**meta, "traced": True})
        return lines

    # -- cells ----------------------------------------------------------------

    def _cell_done(self, key: CellKey) -> dict | None:
        path = self._path("cells", f"{key.cell_id}.json")
        if not (self.resume and os.path.exists(path)):
            return None
        with open(path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
        if manifest.get("config_hash") != self.config_hash:
            return None
        return manifest

    def _write_cell(self, key: CellKey, status: str, recon=None,
                    saliency=None, error=None):
        manifest = {"cell": key.as_dict(), "config_hash": self.config_hash,
                    "status": status, "reconstruction": recon,
                    "saliency": saliency, "error": error}
        _json_dump(manifest, self._path("cells", f"{key.cell_id}.json"))
        self.reports.append(ExperimentReport(key, status, recon, saliency,
                                             error))

    def _report_from_manifest(self, key: CellKey, manifest: dict):
        self.reports.append(ExperimentReport(
            key, manifest["status"], manifest.get("reconstruction"),
            manifest.get("saliency"), manifest.get("error")))

    # -- main -------------------------------------------------------------------

    def run(self) -> list[ExperimentReport]:
        t0 = time.time()
        self._prepare_dirs()
        cfg = self.cfg
        scheme = WeightScheme(**cfg.scheme)
        radii_map = {}
        for fspec in cfg.fields:
            fname = fspec["name"]
            gf = self._load_field(fspec)
            fhash = _sha256(open(self._path("fields", f"{fname}.vf1"),
                                 "rb").read())[:16]
            self._log(f"field {fname} ready ({fhash})")
            needs_interest = "feature-aware" in cfg.seed_strategies
            interest = gradient_magnitude_field(gf) if needs_interest else None
            eps_len = length_epsilon(gf.bounds)
            eps_speed = 1e-6 * rms_speed(gf)
            sal_cfg_base = dict(cfg.saliency)
            self._lines_memo = {}
            radii = list(cfg.rbn_rs.get(fname) or [])
            if not radii:
                radii = self._calibrate_field(fname, fhash, gf, interest,
                                              eps_len)
                self._log(f"{fname}: calibrated radii {radii}")
            for strategy in cfg.seed_strategies:
                for level in cfg.levels:
                    lines = self._memo_line_set(
                        fname, fhash, gf, strategy, level,
                        interest if strategy == "feature-aware" else None)
                    segs = decompose(lines, eps_len)
                    self._log(f"{fname}/{strategy}/L{level}: "
                              f"{len(lines)} lines, {len(segs)} segments")
                    if len(segs) == 0:
                        self._fail_group(fname, strategy, level,
                                         "no segments traced", radii)
                        continue
                    index = build_index(segs, gf.bounds)
                    self._run_line_set(fname, strategy, level, gf, segs,
                                       index, scheme, sal_cfg_base,
                                       eps_len, eps_speed, radii)
            radii_map[fname] = radii
        self._finish(radii_map, time.time() - t0)
        return self.reports

    def _calibrate_field(self, fname, fhash, gf, interest, eps_len):
        """Pre-pass: radii from the uniform mid-level line set (falling
        back to the first configured strategy/level)."""
        cfg = self.cfg
        strategy = ("uniform" if "uniform" in cfg.seed_strategies
                    else cfg.seed_strategies[0])
        level = cfg.levels[min(1, len(cfg.levels) - 1)]
        lines = self._memo_line_set(
            fname, fhash, gf, strategy, level,
            interest if strategy == "feature-aware" else None)
        segs = decompose(lines, eps_len)
        if len(segs) == 0:
            return []
        index = build_index(segs, gf.bounds)
        return calibrate_radii(index, gf.bounds, cfg.knn_ks,
                               _derive_seed(cfg.rng_seed, fname, "calib"))

    def _memo_line_set(self, fname, fhash, gf, strategy, level, interest):
        memo_key = (strategy, level)
        if memo_key not in self._lines_memo:
            self._lines_memo[memo_key] = self._line_set(
                fname, fhash, gf, strategy, level, interest)
        return self._lines_memo[memo_key]

    def _fail_group(self, fname, strategy, level, message, radii):
        for metric_name in self.cfg.metrics:
            for key in self._group_keys(fname, strategy, level, metric_name,
                                        radii):
                if self._cell_done(key) is None:
                    self._write_cell(key, "failed", error=message)

    def _group_keys(self, fname, strategy, level, metric_name, radii):
        keys = [CellKey(fname, strategy, level, "knn", metric_name, float(k))
                for k in self.cfg.knn_ks]
        keys += [CellKey(fname, strategy, level, "rbn", metric_name, float(r))
                 for r in radii]
        return keys

    def _run_line_set(self, fname, strategy, level, gf, segs, index,
                      scheme, sal_cfg_base, eps_len, eps_speed, radii):
        cfg = self.cfg
        kmax = max(cfg.knn_ks)
        r_max = max(radii) if radii else 0.0
        grid_pts = gf.node_positions()
        truth = gf.values
        vecs = segment_vectors(segs, cfg.mode)
        sal_cfg = SaliencyConfig(
            SearchConfig("knn", DistanceMetric.SHORTEST, k=1),
            **sal_cfg_base)
        for metric_name in cfg.metrics:
            keys = self._group_keys(fname, strategy, level, metric_name,
                                    radii)
            todo = []
            for key in keys:
                manifest = self._cell_done(key)
                if manifest is None:
                    todo.append(key)
                else:
                    self._report_from_manifest(key, manifest)
            if not todo:
                continue
            metric = DistanceMetric(metric_name)
            tg0 = time.time()
            grid_group = _Group(index, grid_pts, metric, kmax, r_max)
            rstats = _recon_group_stats(grid_group, self.bins, segs, vecs,
                                        eps_len, scheme.epsilon)
            dcorner = index.corner_distances(grid_pts)
            start_group = _Group(index, segs.a, metric, kmax, r_max)
            sstats = _saliency_group_stats(start_group, segs,
                                           sal_cfg.exclusion_window, 1e-12)
            dcorner_s = index.corner_distances(segs.a)
            self._log(f"{fname}/{strategy}/L{level}/{metric_name}: group "
                      f"pass {time.time() - tg0:.1f}s")
            for key in todo:
                try:
                    m = grid_group.prefix_len(key.method, key.parameter,
                                              dcorner)
                    _, err, n, avg, uni = _recon_cell(
                        grid_group, rstats, m, truth, scheme, vecs)
                    recs = _SummaryView(err, n, avg, uni, truth)
                    recon_summary = summarize(recs)
                    ms = start_group.prefix_len(key.method, key.parameter,
                                                dcorner_s)
                    s_cal, s_ref, rad, kc, has_nb, valid = _saliency_cell(
                        start_group, sstats, ms, gf, segs, sal_cfg,
                        eps_speed)
                    sal_summary = _saliency_summary(s_cal, s_ref, kc,
                                                    has_nb, valid)
                    self._write_cell(key, "done", recon_summary,
                                     sal_summary)
                except Exception as exc:  # cell fails, matrix continues
                    self._write_cell(key, "failed", error=repr(exc))

    def _finish(self, radii_map, elapsed):
        best = select_best(self.reports)
        bestoverall = select_best(self.reports, per=("dataset", "method"))
        _json_dump({
            "per_line_set": {"|".join(map(str, k)): r.key.cell_id
                             for k, r in best.items()},
            "per_dataset": {"|".join(map(str, k)): r.key.cell_id
                            for k, r in bestoverall.items()},
        }, self._path("best.json"))
        if self.cfg.record_policy != "none":
            chosen = (self.reports if self.cfg.record_policy == "all"
                      else list(bestoverall.values()))
            for rep in chosen:
                if rep.status == "done":
                    self._write_records(rep.key)
        done = sum(1 for r in self.reports if r.status == "done")
        _json_dump({
            "config": asdict(self.cfg),
            "config_hash": self.config_hash,
            "radii": radii_map,
            "line_sets": self.line_sets,
            "traces_performed": self.traces_performed,
            "n_cells": len(self.reports),
            "cells_done": done,
            "cells_failed": len(self.reports) - done,
        }, self._path("run.json"))
        self._log(f"matrix finished in {elapsed:.1f}s")
        with open(self._path("run.log"), "a", encoding="utf-8") as fh:
            fh.write("\n".join(self.log_lines) + "\n")

    def _write_records(self, key: CellKey):
        """Re-derive one cell through the public single-cell path and dump
        per-point CSVs (values match the sweep summaries up to summation
        order)."""
        from .reconstruct import reconstruct_field
        from .saliency import score_segments
        rec_path = self._path("records", f"{key.cell_id}.recon.csv")
        sal_path = self._path("records", f"{key.cell_id}.saliency.csv")
        if self.resume and os.path.exists(rec_path) and \
                os.path.exists(sal_path):
            return
        gf = load_grid(self._path("fields", f"{key.dataset}.vf1"))
        lines = load_lines(self._path(
            "lines", f"{key.dataset}_{key.seeding}_L{key.level}.sl1"))
        eps_len = length_epsilon(gf.bounds)
        segs = decompose(lines, eps_len)
        index = build_index(segs, gf.bounds)
        cfg = self._search_config(key)
        scheme = WeightScheme(**self.cfg.scheme)
        recs, _ = reconstruct_field(gf, index, cfg, scheme, self.cfg.mode,
                                    self.bins)
        write_reconstruction_csv(recs, rec_path)
        sal = score_segments(gf, index, SaliencyConfig(cfg,
                                                       **self.cfg.saliency))
        write_saliency_csv(sal, sal_path)

    def _search_config(self, key: CellKey) -> SearchConfig:
        metric = DistanceMetric(key.metric)
        if key.method == "knn":
            return SearchConfig("knn", metric, k=int(key.parameter))
        return SearchConfig("rbn", metric, r=float(key.parameter))


class _SummaryView(ReconstructionSet):
    """Adapter exposing the per-cell arrays to summarize()."""

    def __init__(self, errors, n_neighbors, avg, uni, truth):
        self.errors = errors
        self.n_neighbors = n_neighbors
        self.avg_distance = avg
        self.uniformity = uni
        self.truth = truth


def write_reconstruction_csv(recs, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x,y,z,ex,ey,ez,err,n,avg_dist,uniformity\n")
        for i in range(len(recs)):
            p = recs.grid_points[i]
            v = recs.reconstructed[i]
            fh.write("%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,"
                     "%.17g,%.17g\n" % (p[0], p[1], p[2], v[0], v[1], v[2],
                                        recs.errors[i], recs.n_neighbors[i],
                                        recs.avg_distance[i],
                                        recs.uniformity[i]))


def write_saliency_csv(sal, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("segment_id,s_cal,s_ref,ref_radius,n_neighbors\n")
        for i in range(len(sal)):
            fh.write("%d,%.17g,%.17g,%.17g,%d\n" % (
                sal.seg_ids[i], sal.s_cal[i], sal.s_ref[i],
                sal.ref_radius[i], sal.n_neighbors[i]))


def run_matrix(cfg: ExperimentConfig, jobs: int | None = None,
               resume: bool = True) -> list[ExperimentReport]:
    """Run every cell of the config; returns one report per cell.

    Completed cells (manifest present with matching config hash) are
    skipped when resume is on, line sets are content-hash cached, failures
    are recorded per cell and do not stop the matrix.
    """
    return MatrixRunner(cfg, jobs=jobs, resume=resume).run()


def select_best(reports, per=("dataset", "seeding", "level", "method")) -> dict:
    """Minimum-e_mean report per key; ties prefer the smaller parameter,
    then the metric order shortest, average, longest."""
    groups: dict = {}
    for rep in reports:
        if rep.status != "done" or not rep.reconstruction:
            continue
        key = tuple(getattr(rep.key, f) for f in per)
        groups.setdefault(key, []).append(rep)
    out = {}
    for key, reps in groups.items():
        out[key] = min(reps, key=lambda r: (
            r.reconstruction["e_mean"], r.key.parameter,
            METRIC_ORDER.index(r.key.metric)))
    return out
