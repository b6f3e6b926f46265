"""Stage runner: each stage reads its predecessor's files and writes its own.

Layout of the output directory::

    polygon.csv, polygon.json             build-polygon
    cluster/polygon_XX.csv
    tiling.svg
    map.json, map_report.json             solve-map
    cluster/map_XX.json
    fit_A.json, fit_B.json                fit-generators
    cluster_A.csv/.json/.svg, cluster_B.*
    generators.json
    shell_sums_p<p>.csv, shell_sums.json  shell-sums
    p_star.json, decay.svg                p-star
    manifest.jsonl                        one record per stage run
"""
from __future__ import annotations

import json
import logging
import platform
import time
from importlib import metadata
from pathlib import Path

import numpy as np

from brennan import figures
from brennan.autfit import FitResult, fit_disk_automorphism, validate_cluster
from brennan.config import PipelineConfig
from brennan.conformal import SchwarzChristoffelMap, negative_jacobian_count, solve_parameter_problem
from brennan.errors import BrennanError, MissingArtifact, StageFailed
from brennan.grafting import group_pair
from brennan.moebius import MoebiusMap, cayley, commutator, from_disk_aut
from brennan.polygon import build_polygon, read_csv
from brennan.series import GeneratorQuadruple, ShellSumTable, estimate_p_star, fit_decay, shell_sums_multi

log = logging.getLogger(__name__)

STAGES = ("build-polygon", "solve-map", "fit-generators", "shell-sums", "p-star")
MANIFEST = "manifest.jsonl"
TILING_DEPTH = 4


def derived_seed(seed: int, *tags: int) -> int:
    """Independent 32-bit seed for a sub-task."""
    return int(np.random.SeedSequence([seed, *tags]).generate_state(1)[0])


def _dump(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")


def _need(path: Path) -> Path:
    if not path.exists():
        raise MissingArtifact(f"expected artifact {path} is missing; run the earlier stage first")
    return path


def _versions() -> dict:
    out = {"python": platform.python_version()}
    for pkg in ("numpy", "scipy", "numba", "matplotlib", "artifact"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def _cluster_names(cfg: PipelineConfig) -> list[str]:
    return [f"{i:02d}" for i in range(cfg.polygon.cluster_size)]


def _center(cfg: PipelineConfig, poly):
    return 0j if cfg.conformal.center == "origin" else poly.centroid()


# ---------------------------------------------------------------------------
# stages


def stage_build_polygon(cfg: PipelineConfig, out: Path) -> list[str]:
    pair = group_pair()
    pc = cfg.polygon
    main = build_polygon(pc.n, pc.max_word_length, derived_seed(cfg.seed, 0), pair, sep_min=pc.sep_min)
    main.to_csv(out / "polygon.csv")
    summary = {"main": {"vertices": len(main), "dropped": main.dropped, "diameter": main.diameter}}
    (out / "cluster").mkdir(exist_ok=True)
    written = ["polygon.csv"]
    for i, name in enumerate(_cluster_names(cfg)):
        poly = build_polygon(pc.cluster_n, pc.max_word_length, derived_seed(cfg.seed, 1, i), pair, sep_min=pc.sep_min)
        poly.to_csv(out / "cluster" / f"polygon_{name}.csv")
        summary[name] = {"vertices": len(poly), "dropped": poly.dropped}
        written.append(f"cluster/polygon_{name}.csv")
    _dump(out / "polygon.json", summary)
    figures.plot_tiling(out / "tiling.svg", TILING_DEPTH, main)
    return written + ["polygon.json", "tiling.svg"]


def _solve(cfg: PipelineConfig, poly) -> SchwarzChristoffelMap:
    cc = cfg.conformal
    return solve_parameter_problem(
        poly,
        center=_center(cfg, poly),
        nqpts=cc.quadrature_nodes,
        max_iters=cc.max_iters,
        tol_vertex=cc.tol_vertex,
        drop_crowded=cc.drop_crowded,
    )


def _save_map(fmap: SchwarzChristoffelMap, out: Path, stem: str, polygon_file: str) -> None:
    # a crowding drop changes the polygon; keep the predecessor's file untouched
    if fmap.polygon.dropped.get("crowding"):
        polygon_file = f"{stem}_polygon.csv"
        fmap.polygon.to_csv(out / polygon_file)
    fmap.save(out / f"{stem}.json", Path(polygon_file).name)


def stage_solve_map(cfg: PipelineConfig, out: Path) -> list[str]:
    main_poly = read_csv(_need(out / "polygon.csv"))
    cluster_polys = [read_csv(_need(out / "cluster" / f"polygon_{n}.csv")) for n in _cluster_names(cfg)]
    fmap = _solve(cfg, main_poly)
    _save_map(fmap, out, "map", "polygon.csv")
    report = {
        "main": {
            "vertices": len(fmap.polygon),
            "max_vertex_error": fmap.info["max_vertex_error"],
            "min_gap": fmap.info["min_gap"],
            "diameter": fmap.diameter,
            "negative_jacobian_cells": negative_jacobian_count(fmap),
            "crowding_dropped": fmap.polygon.dropped.get("crowding", 0),
        }
    }
    written = ["map.json"]
    for name, poly in zip(_cluster_names(cfg), cluster_polys):
        m = _solve(cfg, poly)
        _save_map(m, out / "cluster", f"map_{name}", f"polygon_{name}.csv")
        report[name] = {
            "vertices": len(m.polygon),
            "max_vertex_error": m.info["max_vertex_error"],
            "min_gap": m.info["min_gap"],
        }
        written.append(f"cluster/map_{name}.json")
    _dump(out / "map_report.json", report)
    return written + ["map_report.json"]


def _fit_pair(cfg: PipelineConfig, fmap, tag: int) -> tuple[FitResult, FitResult]:
    pair = group_pair()
    fc = cfg.fit
    fits = []
    for k, X in enumerate((pair.kleinian_A, pair.kleinian_B)):
        fits.append(
            fit_disk_automorphism(
                fmap, X, fc.samples, derived_seed(cfg.seed, 2, tag, k), fc.max_radius, fc.multistarts
            )
        )
    return fits[0], fits[1]


def stage_fit_generators(cfg: PipelineConfig, out: Path) -> list[str]:
    fmap = SchwarzChristoffelMap.load(_need(out / "map.json"))
    cluster_maps = [
        SchwarzChristoffelMap.load(_need(out / "cluster" / f"map_{n}.json")) for n in _cluster_names(cfg)
    ]
    fa, fb = _fit_pair(cfg, fmap, 0)
    fa.save(out / "fit_A.json")
    fb.save(out / "fit_B.json")
    runs_a, runs_b = [], []
    for i, m in enumerate(cluster_maps):
        ca, cb = _fit_pair(cfg, m, i + 1)
        runs_a.append(ca)
        runs_b.append(cb)
    written = ["fit_A.json", "fit_B.json"]
    for name, runs, main in (("A", runs_a, fa), ("B", runs_b, fb)):
        rep = validate_cluster(runs, main)
        rep.write(out / f"cluster_{name}.csv", out / f"cluster_{name}.json")
        figures.plot_cluster(out / f"cluster_{name}.svg", rep, name)
        written += [f"cluster_{name}.csv", f"cluster_{name}.json", f"cluster_{name}.svg"]
        if not rep.consistent:
            log.warning("main estimate of %s lies outside the cluster: %s", name, rep.z_scores)
    pair = group_pair()
    ah, bh = from_disk_aut(fa.estimate), from_disk_aut(fb.estimate)
    tr2 = commutator(ah, bh).trace ** 2
    _dump(
        out / "generators.json",
        {
            "A_hat": ah.to_dict(),
            "B_hat": bh.to_dict(),
            "A_target": pair.kleinian_A.to_dict(),
            "B_target": pair.kleinian_B.to_dict(),
            "relator_trace_squared": [tr2.real, tr2.imag],
        },
    )
    return written + ["generators.json"]


def load_generators(cfg: PipelineConfig, out: Path) -> GeneratorQuadruple:
    if cfg.series.homomorphism == "trivial":
        pair = group_pair()
        a = cayley(pair.fuchsian_A, "halfplane_to_disk")
        b = cayley(pair.fuchsian_B, "halfplane_to_disk")
        return GeneratorQuadruple.trivial(a, b)
    data = json.loads(_need(out / "generators.json").read_text())
    return GeneratorQuadruple(*(MoebiusMap.from_dict(data[k]) for k in ("A_hat", "B_hat", "A_target", "B_target")))


def table_file(p: float) -> str:
    return f"shell_sums_p{p:g}.csv"


def read_table(path, p: float) -> ShellSumTable:
    data = np.genfromtxt(path, delimiter=",", names=True)
    return ShellSumTable(p, int(data["n"][-1]), np.asarray(data["S_n"], dtype=float), data["count"].astype(int))


def stage_shell_sums(cfg: PipelineConfig, out: Path) -> list[str]:
    sc = cfg.series
    gens = load_generators(cfg, out)
    tables = shell_sums_multi(gens, sc.p_list, sc.max_n)
    report = {"max_n": sc.max_n, "n_min": sc.n_min, "homomorphism": sc.homomorphism, "tables": []}
    written = []
    for tab in tables:
        name = table_file(tab.p)
        tab.write_csv(out / name)
        written.append(name)
        fit = fit_decay(tab, sc.n_min)
        disc = tab.relative_discrepancy()
        report["tables"].append(
            {
                "p": tab.p,
                "file": name,
                "slope": fit.slope,
                "intercept": fit.intercept,
                "r_squared": fit.r_squared,
                "plain_vs_compensated": disc.tolist(),
                "max_plain_vs_compensated": float(disc.max()),
            }
        )
    _dump(out / "shell_sums.json", report)
    return written + ["shell_sums.json"]


def stage_p_star(cfg: PipelineConfig, out: Path) -> list[str]:
    sc = cfg.series
    gens = load_generators(cfg, out)
    tables = [read_table(_need(out / table_file(p)), p) for p in sc.p_list]
    interval = estimate_p_star(gens, sc.max_n, sc.n_min, sc.bracket[0], sc.bracket[1], sc.tol)
    interval.save(out / "p_star.json")
    ends = shell_sums_multi(gens, [interval.lower, interval.upper], sc.max_n, with_plain=False)
    figures.plot_decay(out / "decay.svg", tables + ends, sc.n_min)
    return ["p_star.json", "decay.svg"]


_RUNNERS = {
    "build-polygon": stage_build_polygon,
    "solve-map": stage_solve_map,
    "fit-generators": stage_fit_generators,
    "shell-sums": stage_shell_sums,
    "p-star": stage_p_star,
}


def _record(out: Path, cfg: PipelineConfig, stage: str, status: str, wall: float, artifacts, error=None) -> dict:
    rec = {
        "stage": stage,
        "status": status,
        "config_hash": cfg.digest(),
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "versions": _versions(),
        "wall_time_s": round(wall, 3),
        "artifacts": list(artifacts),
    }
    if error is not None:
        rec["error"] = error
    with open(out / MANIFEST, "a") as fh:
        fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return rec


def run_stage(stage: str, cfg: PipelineConfig) -> list[dict]:
    """Run one stage (or ``"full"``); returns the manifest records written."""
    cfg.validate()
    if stage == "full":
        return [rec for s in STAGES for rec in run_stage(s, cfg)]
    if stage not in _RUNNERS:
        raise ValueError(f"unknown stage {stage!r}")
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    log.info("stage %s -> %s", stage, out)
    t0 = time.perf_counter()
    try:
        artifacts = _RUNNERS[stage](cfg, out)
    except (BrennanError, ValueError, np.linalg.LinAlgError) as exc:
        msg = f"{type(exc).__name__}: {exc}"
        _record(out, cfg, stage, "failed", time.perf_counter() - t0, [], msg)
        raise StageFailed(f"stage {stage} failed: {msg}") from exc
    return [_record(out, cfg, stage, "ok", time.perf_counter() - t0, artifacts)]


def read_manifest(out) -> list[dict]:
    path = Path(out) / MANIFEST
    if not path.exists():
        return []
    return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]
