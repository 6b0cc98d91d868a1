"""Experiment driver: ``lfpp-lab <experiment> --config run.toml --set key=value``.

Every run writes CSVs plus ``manifest.json``; ``lfpp-lab replay manifest.json``
reruns the recorded config and checks output digests.

Exit codes: 0 success, 2 config error, 3 resource error, 4 digest mismatch.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import logging
import math
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .balls import filled_metric_ball, hitting_radius, write_ball_csv
from .confluence import confluence_report
from .core import SQRT_8_3, GridSpec, LFPPError, derive_params, resolve_dimension
from .experiments import (
    bilipschitz_estimate,
    crossing_report,
    fit_exponent,
    holder_scan,
    length_space_check,
    locality_check,
    rotation_anisotropy,
    tightness_compare,
    unit_square,
    weyl_constant_check,
)
from .field import MEAN_ZERO, CircleAverageZero, covariance_calibration, dump_field, sample_field
from .lfpp import build_graph, distance_field, trace_geodesic
from .measure import ball_volume_dimension, gmc_expectation
from .mollify import mollify
from .seeding import SeedCollisionError, task_seeds, worker_count

log = logging.getLogger("lfpp_lab")

EXIT_OK, EXIT_CONFIG, EXIT_RESOURCE, EXIT_DIGEST = 0, 2, 3, 4
EXPERIMENTS = (
    "field-sample", "dist", "ball", "geodesic", "confluence", "crossings", "fit",
    "bilip", "tightness", "rotation", "holder", "gmc", "dim", "axioms-all",
)
DYADIC = [2.0**-3, 2.0**-4, 2.0**-5, 2.0**-6]

DEFAULTS = {
    "run": {"seed": 0, "workers": 1, "memory_cap_gib": 4.0, "out_dir": "lfpp-out"},
    "params": {"gamma": SQRT_8_3, "d": "known"},
    "grid": {"n": 512, "side_length": 2.0, "window": None},
    "model": {"eps": 2.0**-5, "stencil": "eight", "anisotropy_a": 1.0},
    "field_sample": {"normalization": "mean_zero", "dump": True},
    "dist": {"source": None},
    "ball": {"radius": 0.15},
    "geodesic": {"source": None, "target": None},
    "confluence": {"replicas": 50, "inner": 0.15, "outer": [0.3], "targets": "all_boundary"},
    "crossings": {"eps": DYADIC, "replicas": 200},
    "fit": {"input": None, "bootstrap": 1000},
    "bilip": {"eps": [2.0**-3, 2.0**-5], "beta": 0.25, "pairs": 30, "replicas": 3, "stencil_a": "four", "stencil_b": "eight"},
    "tightness": {"r1": 0.25, "r2": 0.5, "replicas": 400, "eps": 2.0**-6},
    "rotation": {"anisotropy_a": 4.0, "eps": DYADIC, "replicas": 100},
    "holder": {"pairs": 500, "sources": 25},
    "gmc": {"eps": [2.0**-4, 2.0**-5], "replicas": 500},
    "dim": {"radii": [0.05, 0.1, 0.2, 0.4], "replicas": 20, "bootstrap": 1000},
    "axioms": {"replicas": 5, "shifts": [-1.0, 0.3, 2.0], "oracle_grids": 20},
}


class ConfigError(LFPPError):
    pass


class ResourceError(LFPPError):
    pass


class DigestMismatch(LFPPError):
    pass


# --- configuration ---------------------------------------------------------


def _parse_literal(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def merge_config(user: dict, overrides=()) -> dict:
    """Defaults, then the config file, then ``section.key=value`` overrides."""
    cfg = copy.deepcopy(DEFAULTS)
    layers = [user or {}]
    over = {}
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        key, value = item.split("=", 1)
        sec, name = key.strip().split(".", 1)
        over.setdefault(sec, {})[name] = _parse_literal(value.strip())
    layers.append(over)
    for layer in layers:
        for sec, body in layer.items():
            if sec not in cfg:
                raise ConfigError(f"unknown config section {sec!r}")
            if not isinstance(body, dict):
                raise ConfigError(f"section {sec!r} must be a table")
            for key, value in body.items():
                if key not in cfg[sec]:
                    raise ConfigError(f"unknown config key {sec}.{key!r}")
                cfg[sec][key] = value
    return cfg


def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _grid(cfg) -> GridSpec:
    g = cfg["grid"]
    window = None if g["window"] is None else tuple(g["window"])
    return GridSpec(int(g["n"]), float(g["side_length"]), window)


def _params(cfg):
    gamma = float(cfg["params"]["gamma"])
    return derive_params(gamma, resolve_dimension(gamma, cfg["params"]["d"]))


def check_memory(cfg) -> None:
    n = int(cfg["grid"]["n"])
    need = n * n * 8 * 16 * max(1, int(cfg["run"]["workers"]))
    cap = float(cfg["run"]["memory_cap_gib"]) * 2**30
    if need > cap:
        raise ResourceError(f"grid n={n} needs ~{need / 2**30:.2f} GiB, above the {cap / 2**30:.2f} GiB cap")


# --- experiments -----------------------------------------------------------


def _center(spec):
    return spec.nearest_vertex(spec.window_center)


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _fmt(x):
    return repr(float(x))


def run_field_sample(cfg, out, workers):
    spec = _grid(cfg)
    norm = cfg["field_sample"]["normalization"]
    if norm == "mean_zero":
        normalization = MEAN_ZERO
    elif norm == "circle_average_zero":
        normalization = CircleAverageZero(spec.window_center, 1.0)
    else:
        raise ConfigError(f"field_sample.normalization: unknown value {norm!r}")
    seed = task_seeds(cfg["run"]["seed"], "field-sample", 1)[0]
    f = sample_field(spec, seed, normalization)
    files = []
    if cfg["field_sample"]["dump"]:
        dump_field(out / "field.bin", f)
        files.append("field.bin")
    _write_rows(out / "field_stats.csv", ["seed", "n", "mean", "std", "min", "max"],
                [[seed, spec.n, _fmt(f.values.mean()), _fmt(f.values.std()), _fmt(f.values.min()), _fmt(f.values.max())]])
    return files + ["field_stats.csv"]


def _graph_from_cfg(cfg, seed):
    spec = _grid(cfg)
    p = _params(cfg)
    m = cfg["model"]
    hm = mollify(sample_field(spec, seed), float(m["eps"]))
    return build_graph(hm, p.xi, m["stencil"], float(m["anisotropy_a"]))


def _vertex(spec, v):
    return _center(spec) if v is None else (int(v[0]), int(v[1]))


def run_dist(cfg, out, workers):
    seed = task_seeds(cfg["run"]["seed"], "dist", 1)[0]
    g = _graph_from_cfg(cfg, seed)
    df = distance_field(g, [_vertex(g.spec, cfg["dist"]["source"])])
    df.write_csv(out / "dist.csv")
    return ["dist.csv"]


def run_ball(cfg, out, workers):
    seed = task_seeds(cfg["run"]["seed"], "ball", 1)[0]
    g = _graph_from_cfg(cfg, seed)
    df = distance_field(g, [_center(g.spec)])
    s = hitting_radius(df, float(cfg["ball"]["radius"]))
    write_ball_csv(out / "ball.csv", df, filled_metric_ball(df, s))
    return ["ball.csv"]


def run_geodesic(cfg, out, workers):
    seed = task_seeds(cfg["run"]["seed"], "geodesic", 1)[0]
    g = _graph_from_cfg(cfg, seed)
    src = _vertex(g.spec, cfg["geodesic"]["source"])
    tgt = cfg["geodesic"]["target"]
    if tgt is None:
        ix0, ix1, iy0, iy1 = g.spec.index_bounds
        tgt = (ix1, iy1)
    geo = trace_geodesic(distance_field(g, [src]), (int(tgt[0]), int(tgt[1])))
    geo.write_csv(out / "geodesic.csv", g)
    return ["geodesic.csv"]


def run_confluence(cfg, out, workers):
    c = cfg["confluence"]
    spec = _grid(cfg)
    p = _params(cfg)
    targets = c["targets"] if c["targets"] == "all_boundary" else ("sample", int(c["targets"]), cfg["run"]["seed"])
    seeds = task_seeds(cfg["run"]["seed"], "confluence", int(c["replicas"]))
    m = cfg["model"]

    def one(seed):
        g = build_graph(mollify(sample_field(spec, seed), float(m["eps"])), p.xi, m["stencil"], float(m["anisotropy_a"]))
        df = distance_field(g, [_center(spec)])
        s = hitting_radius(df, float(c["inner"]))
        ts = [hitting_radius(df, float(r)) for r in c["outer"]]
        return confluence_report(df, s, ts, targets, seed)

    from .seeding import parallel_map

    reports = parallel_map(one, seeds, workers)
    for i, rep in enumerate(reports):
        rep.write_csv(out / "confluence.csv", append=i > 0)
    return ["confluence.csv"]


def _crossing(cfg, workers):
    c = cfg["crossings"]
    return crossing_report(
        _params(cfg), _grid(cfg), [float(e) for e in c["eps"]], int(c["replicas"]), int(cfg["run"]["seed"]),
        stencil=cfg["model"]["stencil"], workers=workers,
    )


def run_crossings(cfg, out, workers):
    _crossing(cfg, workers).write_csv(out / "crossings.csv")
    return ["crossings.csv"]


def _read_crossings(path):
    by_eps = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            by_eps.setdefault(float(row["eps"]), []).append(float(row["crossing"]))
    eps = sorted(by_eps)
    return eps, np.array([by_eps[e] for e in eps]).T


def run_fit(cfg, out, workers):
    files = []
    if cfg["fit"]["input"]:
        eps, x = _read_crossings(cfg["fit"]["input"])
    else:
        rep = _crossing(cfg, workers)
        rep.write_csv(out / "crossings.csv")
        files.append("crossings.csv")
        eps, x = rep.eps, rep.crossings
    p = _params(cfg)
    fit = fit_exponent(np.log(eps), np.log(x), bootstrap=int(cfg["fit"]["bootstrap"]), seed=int(cfg["run"]["seed"]),
                       target=p.exponent_one_minus_xiq)
    fit.write_csv(out / "fit.csv")
    return files + ["fit.csv"]


def run_bilip(cfg, out, workers):
    b = cfg["bilip"]
    spec = _grid(cfg)
    p = _params(cfg)
    seeds = task_seeds(cfg["run"]["seed"], "bilip", int(b["replicas"]))
    rows, summary = [], []
    pid = 0
    for e in b["eps"]:
        for seed in seeds:
            hm = mollify(sample_field(spec, seed), float(e))
            ga = build_graph(hm, p.xi, b["stencil_a"])
            gb = build_graph(hm, p.xi, b["stencil_b"])
            rep = bilipschitz_estimate(ga, gb, float(b["beta"]), int(b["pairs"]), seed, workers)
            for r in rep.rows:
                rows.append([pid, _fmt(r[1]), _fmt(r[2]), _fmt(r[3]), _fmt(r[4])])
                pid += 1
            summary.append([_fmt(e), seed, _fmt(rep.c_min), _fmt(rep.c_max)])
    _write_rows(out / "bilip.csv", ["pair_id", "sep", "da", "db", "ratio"], rows)
    _write_rows(out / "bilip_summary.csv", ["eps", "seed", "c_min", "c_max"], summary)
    return ["bilip.csv", "bilip_summary.csv"]


def run_tightness(cfg, out, workers):
    t = cfg["tightness"]
    rep = tightness_compare(_params(cfg), _grid(cfg), float(t["r1"]), float(t["r2"]), int(t["replicas"]),
                            int(cfg["run"]["seed"]), float(t["eps"]), cfg["model"]["stencil"], workers)
    rep.write_csv(out / "tightness.csv")
    _write_rows(out / "tightness_ks.csv", ["r1", "r2", "ks"], [[_fmt(rep.r1), _fmt(rep.r2), _fmt(rep.statistic)]])
    return ["tightness.csv", "tightness_ks.csv"]


def run_rotation(cfg, out, workers):
    r = cfg["rotation"]
    rep = rotation_anisotropy(_params(cfg), _grid(cfg), float(r["anisotropy_a"]), [float(e) for e in r["eps"]],
                              int(r["replicas"]), int(cfg["run"]["seed"]), workers=workers)
    rep.write_csv(out / "rotation.csv")
    return ["rotation.csv"]


def run_holder(cfg, out, workers):
    h = cfg["holder"]
    seed = task_seeds(cfg["run"]["seed"], "holder", 1)[0]
    g = _graph_from_cfg(cfg, seed)
    rep = holder_scan(g, _params(cfg), int(h["pairs"]), seed, int(h["sources"]))
    rows = [[_fmt(s), _fmt(d), int(k), _fmt(sl)] for s, d, k, sl in zip(rep.separations, rep.distances, rep.decades, rep.pair_slopes)]
    _write_rows(out / "holder.csv", ["sep", "dist", "decade", "pair_slope"], rows)
    lo, hi = rep.band
    _write_rows(out / "holder_summary.csv", ["slope", "chi", "chi_prime"] + [f"inside_decade_{k}" for k in range(3)],
                [[_fmt(rep.slope), _fmt(lo), _fmt(hi)] + [_fmt(rep.fraction_inside(k)) for k in range(3)]])
    return ["holder.csv", "holder_summary.csv"]


def run_gmc(cfg, out, workers):
    g = cfg["gmc"]
    spec = _grid(cfg)
    rep = gmc_expectation(spec, _params(cfg).gamma, [float(e) for e in g["eps"]], int(g["replicas"]),
                          int(cfg["run"]["seed"]), unit_square(spec), workers)
    rep.write_csv(out / "gmc.csv", region_id="unit_square")
    return ["gmc.csv"]


def run_dim(cfg, out, workers):
    d = cfg["dim"]
    fit, rep = ball_volume_dimension(_params(cfg), _grid(cfg), [float(r) for r in d["radii"]], int(d["replicas"]),
                                     int(cfg["run"]["seed"]), float(cfg["model"]["eps"]), cfg["model"]["stencil"],
                                     bootstrap=int(d["bootstrap"]), workers=workers)
    rep.write_dim_csv(out / "dim.csv")
    fit.write_csv(out / "dim_fit.csv")
    return ["dim.csv", "dim_fit.csv"]


def run_axioms(cfg, out, workers):
    from .oracle import min_over_simple_paths
    from .lfpp import _run

    a = cfg["axioms"]
    spec = _grid(cfg)
    p = _params(cfg)
    rows = []
    seeds = task_seeds(cfg["run"]["seed"], "axioms", int(a["replicas"]))
    for seed in seeds:
        g = _graph_from_cfg(cfg, seed)
        c = _center(spec)
        for shift in a["shifts"]:
            err, same_tree = weyl_constant_check(g, c, float(shift))
            rows.append(["weyl", seed, _fmt(shift), _fmt(err), int(err <= 1e-12 and same_tree)])
        rng = np.random.Generator(np.random.Philox(key=seed))
        nx, ny = g.shape
        mask = rng.random(g.shape) < 0.85
        ix0, iy0 = g.origin
        u = (ix0 + nx // 4, iy0 + ny // 2)
        v = (ix0 + 3 * nx // 4, iy0 + ny // 2)
        mask[u[0] - ix0, u[1] - iy0] = mask[v[0] - ix0, v[1] - iy0] = True
        full, restricted = locality_check(g, mask, u, v, seed)
        rows.append(["locality", seed, "", _fmt(full), int(full == restricted)])
        gap = length_space_check(g, u, v)
        rows.append(["length_space", seed, "", _fmt(gap), int(gap == 0.0)])
    tiny = GridSpec(8, 8.0, (2.0, 2.0, 5.0, 5.0))
    for seed in task_seeds(cfg["run"]["seed"], "oracle", int(a["oracle_grids"])):
        from .field import FieldSample

        vals = np.random.Generator(np.random.Philox(key=seed)).normal(0, 1.5, (8, 8))
        from .mollify import MollifiedField

        f = FieldSample(tiny, seed, vals, "injected")
        g = build_graph(MollifiedField(f, 0.0, f.values), p.xi, cfg["model"]["stencil"])
        df = distance_field(g, [(2, 2)])
        brute = min_over_simple_paths(g.vertex_weight, g.offsets, g.lengths, 0)
        rows.append(["oracle", seed, "", _fmt(np.abs(df.dist - brute).max()), int(np.array_equal(df.dist, brute))])
    _write_rows(out / "axioms.csv", ["check", "seed", "param", "value", "passed"], rows)
    return ["axioms.csv"]


RUNNERS = {
    "field-sample": run_field_sample, "dist": run_dist, "ball": run_ball, "geodesic": run_geodesic,
    "confluence": run_confluence, "crossings": run_crossings, "fit": run_fit, "bilip": run_bilip,
    "tightness": run_tightness, "rotation": run_rotation, "holder": run_holder, "gmc": run_gmc,
    "dim": run_dim, "axioms-all": run_axioms,
}


# --- manifests -------------------------------------------------------------


def digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def execute(experiment: str, cfg: dict, out_dir=None) -> dict:
    """Run one experiment, write its outputs and manifest; return the manifest."""
    out = Path(out_dir or cfg["run"]["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    check_memory(cfg)
    _grid(cfg)
    _params(cfg)
    workers = worker_count(cfg["run"]["workers"])
    start = time.perf_counter()
    files = RUNNERS[experiment](cfg, out, workers)
    elapsed = time.perf_counter() - start
    manifest = {
        "tool": "lfpp-lab",
        "version": __version__,
        "experiment": experiment,
        "config": cfg,
        "root_seed": cfg["run"]["seed"],
        "seed_rule": "blake2b-64('{root_seed}/{experiment}/{replica_index}')",
        "covariance_calibration": covariance_calibration(int(cfg["grid"]["n"])),
        "outputs": {name: digest(out / name) for name in files},
        "timings": {"wall_clock_s": elapsed, "workers": workers},
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest


def replay(manifest_path, out_dir=None) -> list:
    """Rerun a manifest; return the list of output files whose digest differs."""
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    if manifest.get("version", "").split(".")[0] != __version__.split(".")[0]:
        raise ConfigError(f"manifest version {manifest.get('version')} incompatible with {__version__}")
    cfg = merge_config(manifest["config"])
    out = Path(out_dir) if out_dir else Path(tempfile.mkdtemp(prefix="lfpp-replay-"))
    fresh = execute(manifest["experiment"], cfg, out)
    return sorted(
        name for name, d in manifest["outputs"].items() if fresh["outputs"].get(name) != d
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lfpp-lab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="TOML config file")
        sp.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--workers", type=int)
        sp.add_argument("--n", type=int, help="grid cells per side")
        sp.add_argument("--memory-cap-gib", type=float)
    rp = sub.add_parser("replay")
    rp.add_argument("manifest")
    rp.add_argument("--out")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "replay":
            bad = replay(args.manifest, args.out)
            if bad:
                print(f"digest mismatch: {', '.join(bad)}", file=sys.stderr)
                return EXIT_DIGEST
            print("replay ok: all digests match")
            return EXIT_OK
        overrides = list(args.set)
        for flag, key in (("seed", "run.seed"), ("out", "run.out_dir"), ("workers", "run.workers"),
                          ("n", "grid.n"), ("memory_cap_gib", "run.memory_cap_gib")):
            value = getattr(args, flag)
            if value is not None:
                overrides.append(f"{key}={json.dumps(value)}")
        cfg = merge_config(load_config(args.config), overrides)
        manifest = execute(args.command, cfg)
        for name, d in manifest["outputs"].items():
            print(f"{name}  sha256:{d}")
        return EXIT_OK
    except (ConfigError, SeedCollisionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceError as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except LFPPError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
