"""Command-line interface: ``graphtf {denoise,path,simulate,transduce,theory}``.

Exit codes: 0 success, 1 input error, 2 solver did not converge, 3 a
theory check failed. Output files depend only on inputs, flags and seed;
wall time goes to stderr (and into metadata only with ``--timing``).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time
import warnings
from dataclasses import dataclass

import numpy as np

from . import io as gio
from .exceptions import GraphTFError, InvalidParameter
from .graph import grid2d, grid_coordinates, knn_graph
from .model_eval import estimate_df, lambda_path, mse, noise_snr
from .solvers import SolverOptions, laplacian_smooth, solve, sparse_gtf
from .synthesis import GENERATORS, add_noise, make_instance
from .theory import CHECKS, run_suite
from .transduction import MadProblem, mad_gtf, mad_laplacian, misclassification_rate

log = logging.getLogger("graphtf")

EXIT_OK, EXIT_INPUT, EXIT_UNCONVERGED, EXIT_CHECK = 0, 1, 2, 3


FLAG_NAMES = {"lam": "lambda", "max_iters": "max-iters", "lambda_grid": "lambda-grid"}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    graph: str | None = None
    signal: str | None = None
    truth: str | None = None
    k: int = 0
    lam: float | None = None
    lambda_grid: str | None = None
    lambda2: float | None = None
    method: str = "auto"
    rho: float | None = None
    tol: float = 1e-8
    max_iters: int = 5000
    seed: int = 0
    output: str | None = None
    generator: str | None = None
    sigma: str | None = None
    nnz: int = 30
    epsilon: float = 0.01
    prior: str = "uniform"
    baseline: str = "gtf"
    check: list | None = None
    n: int | None = None
    rows: int = 20
    cols: int = 20
    features: str | None = None
    knn: int = 5
    labels: str | None = None
    seeds_file: str | None = None
    per_class: int = 5
    fits_dir: str | None = None
    timing: bool = False

    @classmethod
    def from_mapping(cls, command, values):
        names = {f.name for f in dataclasses.fields(cls)} - {"command"}
        unknown = sorted(set(values) - names)
        if unknown:
            raise UsageError(f"unknown configuration keys: {', '.join(unknown)}")
        cfg = cls(command=command, **values)
        cfg.validate()
        return cfg

    def validate(self):
        if self.k < 0:
            raise UsageError("--k must be >= 0")
        for name in ("lam", "lambda2", "rho"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise UsageError(f"--{FLAG_NAMES.get(name, name)} must be >= 0")
        if self.tol <= 0 or self.max_iters < 1:
            raise UsageError("--tol must be positive and --max-iters >= 1")
        if self.method not in ("auto", "admm", "newton", "maxflow"):
            raise UsageError(f"unknown method {self.method!r}")
        if self.baseline not in ("gtf", "laplacian"):
            raise UsageError("--baseline must be 'gtf' or 'laplacian'")
        if self.epsilon <= 0:
            raise UsageError("--epsilon must be positive")

    def solver_options(self):
        return SolverOptions(rho=self.rho or None, max_iterations=self.max_iters, tolerance=self.tol)


# -- helpers ------------------------------------------------------------------


def _sidecar(path):
    root, ext = os.path.splitext(path)
    return root + ".json" if ext.lower() == ".csv" else path + ".json"


def _require(cfg, *names):
    for name in names:
        if getattr(cfg, name) is None:
            flag = FLAG_NAMES.get(name, name.replace("_", "-"))
            raise UsageError(f"--{flag} is required for '{cfg.command}'")


def _parse_grid(spec):
    try:
        lo, hi, count = spec.split(":")
        lo, hi, count = float(lo), float(hi), int(count)
    except ValueError:
        raise UsageError(f"--lambda-grid must look like lo:hi:count, got {spec!r}") from None
    if not (0 < lo <= hi) or count < 1:
        raise UsageError("--lambda-grid needs 0 < lo <= hi and count >= 1")
    if count == 1:
        return np.array([hi])
    return np.geomspace(hi, lo, count)


def _parse_sigmas(spec):
    try:
        vals = [float(s) for s in str(spec).split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"--sigma must be a comma-separated list of numbers, got {spec!r}") from None
    if not vals or any(v <= 0 for v in vals):
        raise UsageError("--sigma values must be positive")
    return vals


def _fit_metadata(cfg, fit, df):
    return {
        "lambda": fit.lam,
        "lambda2": fit.lam2,
        "k": fit.k,
        "method": fit.method,
        "df": int(df),
        "objective": fit.objective,
        "iterations": int(fit.iterations),
        "converged": bool(fit.converged),
        "seed": cfg.seed,
    }


# -- commands -----------------------------------------------------------------


def cmd_denoise(cfg):
    _require(cfg, "graph", "signal", "lam", "output")
    g = gio.read_edge_list(cfg.graph)
    y = gio.read_signal(cfg.signal, n=g.n)
    opts = cfg.solver_options()
    if cfg.lambda2:
        fit = sparse_gtf(y, g, cfg.k, cfg.lam, cfg.lambda2, opts)
    else:
        fit = solve(y, g, cfg.k, cfg.lam, method=cfg.method, opts=opts)
    gio.write_signal(cfg.output, fit.beta)
    meta = _fit_metadata(cfg, fit, estimate_df(fit, g))
    gio.write_json(_sidecar(cfg.output), meta)
    return EXIT_OK if fit.converged else EXIT_UNCONVERGED


def cmd_path(cfg):
    _require(cfg, "graph", "signal", "output")
    g = gio.read_edge_list(cfg.graph)
    y = gio.read_signal(cfg.signal, n=g.n)
    truth = gio.read_signal(cfg.truth, n=g.n) if cfg.truth else None
    grid = "auto" if cfg.lambda_grid in (None, "auto") else _parse_grid(cfg.lambda_grid)
    res = lambda_path(y, g, cfg.k, grid, cfg.solver_options(), truth=truth, method=cfg.method,
                      keep_fits=bool(cfg.fits_dir))
    res.to_csv(cfg.output)
    if cfg.fits_dir:
        os.makedirs(cfg.fits_dir, exist_ok=True)
        for i, e in enumerate(res.entries):
            gio.write_signal(os.path.join(cfg.fits_dir, f"fit_{i:03d}.csv"), e.fit.beta)
    converged = all(e.converged for e in res.entries)
    gio.write_json(
        _sidecar(cfg.output),
        {
            "k": cfg.k,
            "method": res.entries[0].method,
            "grid": "auto" if isinstance(grid, str) else cfg.lambda_grid,
            "count": len(res),
            "converged": converged,
            "truth": cfg.truth is not None,
        },
    )
    return EXIT_OK if converged else EXIT_UNCONVERGED


def cmd_simulate(cfg):
    _require(cfg, "generator", "output")
    if cfg.generator not in GENERATORS:
        raise UsageError(f"--generator must be one of {', '.join(GENERATORS)}")
    sigmas = _parse_sigmas(cfg.sigma if cfg.sigma is not None else "0.5,1,2")
    if cfg.graph:
        g = gio.read_edge_list(cfg.graph)
        coords = None
    else:
        g = grid2d(cfg.rows, cfg.cols)
        coords = grid_coordinates(cfg.rows, cfg.cols)
    os.makedirs(cfg.output, exist_ok=True)
    gio.write_edge_list(g, os.path.join(cfg.output, "graph.txt"))
    opts = cfg.solver_options()
    base = make_instance(cfg.generator, g, 0.0, seed=cfg.seed, coords=coords, nnz=cfg.nnz)
    truth = base.x
    noise_seeds = np.random.SeedSequence([cfg.seed, 1]).spawn(len(sigmas))
    lap_grid = np.geomspace(1e3, 1e-3, 50)
    rows = []
    converged = True
    for idx, (sigma, ns) in enumerate(zip(sigmas, noise_seeds)):
        y = add_noise(truth, sigma, ns)
        gio.write_signal(os.path.join(cfg.output, f"noisy_{idx}.csv"), y)
        snr = noise_snr(truth, sigma)
        path = lambda_path(y, g, cfg.k, "auto", opts, truth=truth, method=cfg.method)
        converged &= all(e.converged for e in path.entries)
        best_gtf = min(e.mse for e in path.entries)
        best_lap = min(mse(laplacian_smooth(y, g, cfg.k, lam), truth) for lam in lap_grid)
        rows.append((sigma, snr, f"gtf-k{cfg.k}", best_gtf))
        rows.append((sigma, snr, f"laplacian-k{cfg.k}", best_lap))
    gio.write_signal(os.path.join(cfg.output, "truth.csv"), truth)
    with open(os.path.join(cfg.output, "sweep.csv"), "w", newline="") as fh:
        fh.write("sigma,noise_snr,method,best_mse\n")
        for sigma, snr, method, best in rows:
            fh.write(f"{gio.format_float(sigma)},{gio.format_float(snr)},{method},{gio.format_float(best)}\n")
    meta = {"generator": base.descriptor, "seed": cfg.seed, "sigma": sigmas, "k": cfg.k, "n": g.n,
            "noisy_files": [f"noisy_{i}.csv" for i in range(len(sigmas))]}
    meta["converged"] = converged
    gio.write_json(os.path.join(cfg.output, "metadata.json"), meta)
    return EXIT_OK if converged else EXIT_UNCONVERGED


def _draw_seeds(truth_nodes, truth_labels, per_class, seed):
    rng = np.random.default_rng(seed)
    picks = []
    for c in np.unique(truth_labels):
        pool = truth_nodes[truth_labels == c]
        picks.append(rng.choice(pool, min(per_class, len(pool)), replace=False))
    nodes = np.sort(np.concatenate(picks))
    lookup = dict(zip(truth_nodes.tolist(), truth_labels.tolist()))
    return nodes, np.array([lookup[i] for i in nodes], dtype=np.int64)


def cmd_transduce(cfg):
    _require(cfg, "output")
    if cfg.features:
        g = knn_graph(gio.read_features(cfg.features), cfg.knn)
    elif cfg.graph:
        g = gio.read_edge_list(cfg.graph)
    else:
        raise UsageError("transduce needs --graph or --features")
    truth = None
    if cfg.labels:
        t_nodes, t_labels = gio.read_labels(cfg.labels)
        if t_nodes.size and t_nodes.max() >= g.n:
            raise UsageError(f"{cfg.labels}: node index outside the graph")
        truth = np.full(g.n, -1, dtype=np.int64)
        truth[t_nodes] = t_labels
    if cfg.seeds_file:
        s_nodes, s_labels = gio.read_labels(cfg.seeds_file)
        if s_nodes.size and s_nodes.max() >= g.n:
            raise UsageError(f"{cfg.seeds_file}: node index outside the graph")
    elif truth is not None:
        s_nodes, s_labels = _draw_seeds(t_nodes, t_labels, cfg.per_class, cfg.seed)
    else:
        raise UsageError("transduce needs --seeds-file or --labels to draw seeds from")
    K = int(max(s_labels.max(), truth.max() if truth is not None else 0)) + 1
    R = None
    if cfg.prior != "uniform":
        R = gio.read_features(cfg.prior)
    lam = 1.0 if cfg.lam is None else cfg.lam
    p = MadProblem.from_seeds(g, s_nodes, s_labels, n_classes=K, R=R, epsilon=cfg.epsilon,
                              lam=lam, k=cfg.k)
    if cfg.baseline == "laplacian":
        fit = mad_laplacian(p)
        method = "mad-laplacian"
    else:
        fit = mad_gtf(p)
        method = "mad-gtf"
    gio.write_labels(cfg.output, fit.labels)
    meta = {
        "method": method,
        "lambda": lam,
        "k": cfg.k,
        "epsilon": cfg.epsilon,
        "classes": K,
        "observed": int(len(p.observed)),
        "seed": cfg.seed,
        "converged": fit.converged,
    }
    if truth is not None:
        ev = np.setdiff1d(np.flatnonzero(truth >= 0), p.observed)
        meta["misclassification"] = misclassification_rate(fit.labels, truth, ev) if ev.size else None
    gio.write_json(_sidecar(cfg.output), meta)
    return EXIT_OK if fit.converged else EXIT_UNCONVERGED


def cmd_theory(cfg):
    checks = None
    if cfg.check:
        checks = [c for item in cfg.check for c in str(item).split(",") if c]
        bad = [c for c in checks if c not in CHECKS]
        if bad:
            raise UsageError(f"unknown check(s) {', '.join(bad)}; choose from {', '.join(sorted(CHECKS))}")
    reports = run_suite(checks, cfg.n)
    text = "".join(r.to_json() + "\n" for r in reports)
    if cfg.output:
        with open(cfg.output, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    failed = [r for r in reports if not r.passed]
    for r in failed:
        print(f"FAILED {r.to_json()}", file=sys.stderr)
    return EXIT_CHECK if failed else EXIT_OK


COMMANDS = {
    "denoise": cmd_denoise,
    "path": cmd_path,
    "simulate": cmd_simulate,
    "transduce": cmd_transduce,
    "theory": cmd_theory,
}


# -- argument parsing ---------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser():
    common = _Parser(add_help=False)
    a = common.add_argument
    a("--config", help="JSON file of option values; flags given explicitly win")
    a("--graph", help="edge-list file")
    a("--signal", help="node,value CSV")
    a("--truth", help="ground-truth node,value CSV")
    a("--k", type=int, help="order of the difference operator minus one")
    a("--lambda", dest="lam", type=float)
    a("--lambda-grid", dest="lambda_grid", help="lo:hi:count (geometric) or 'auto'")
    a("--lambda2", type=float, help="extra l1 penalty on the fit (sparse GTF)")
    a("--method", choices=["auto", "admm", "newton", "maxflow"])
    a("--rho", type=float)
    a("--tol", type=float)
    a("--max-iters", dest="max_iters", type=int)
    a("--seed", type=int)
    a("--output")
    a("--timing", action="store_true", default=None, help="record wall time in metadata")

    p = _Parser(prog="graphtf", description="Graph trend filtering.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("denoise", parents=[common], help="fit one lambda")
    pp = sub.add_parser("path", parents=[common], help="fit a lambda grid")
    pp.add_argument("--fits-dir", dest="fits_dir")
    ps = sub.add_parser("simulate", parents=[common], help="synthetic instances and noise sweep")
    ps.add_argument("--generator", choices=list(GENERATORS))
    ps.add_argument("--sigma", help="comma-separated noise levels")
    ps.add_argument("--nnz", type=int)
    ps.add_argument("--rows", type=int)
    ps.add_argument("--cols", type=int)
    pt = sub.add_parser("transduce", parents=[common], help="label imputation")
    pt.add_argument("--features", help="numeric CSV; builds a k-nearest-neighbour graph")
    pt.add_argument("--knn", type=int)
    pt.add_argument("--labels", help="node,class ground truth")
    pt.add_argument("--seeds-file", dest="seeds_file", help="node,class observed seeds")
    pt.add_argument("--per-class", dest="per_class", type=int)
    pt.add_argument("--epsilon", type=float)
    pt.add_argument("--prior", help="'uniform' or an n x K CSV")
    pt.add_argument("--baseline", choices=["gtf", "laplacian"])
    ph = sub.add_parser("theory", parents=[common], help="numerical checks")
    ph.add_argument("--check", action="append", help=f"one of {', '.join(sorted(CHECKS))}")
    ph.add_argument("--n", type=int)
    return p


def _config_from_args(ns):
    values = {}
    if ns.config:
        try:
            with open(ns.config) as fh:
                loaded = json.load(fh)
        except FileNotFoundError:
            raise UsageError(f"{ns.config}: no such file") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"{ns.config}:{exc.lineno}: invalid JSON ({exc.msg})") from None
        if not isinstance(loaded, dict):
            raise UsageError(f"{ns.config}: top level must be an object")
        values.update(loaded)
    for key, val in vars(ns).items():
        if key in ("command", "config") or val is None:
            continue
        values[key] = val
    return RunConfig.from_mapping(ns.command, values)


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s", stream=sys.stderr)
    parser = build_parser()
    ns = parser.parse_args(argv)
    start = time.perf_counter()
    try:
        cfg = _config_from_args(ns)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            code = COMMANDS[cfg.command](cfg)
        for w in caught:
            log.warning("%s", w.message)
    except (UsageError, GraphTFError, FileNotFoundError, ValueError, TypeError) as exc:
        print(f"graphtf {ns.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    elapsed = time.perf_counter() - start
    log.info("%s finished in %.3f s (exit %d)", cfg.command, elapsed, code)
    if cfg.timing and cfg.output and cfg.command in ("denoise", "path", "transduce"):
        side = _sidecar(cfg.output)
        with open(side) as fh:
            meta = json.load(fh)
        meta["wall_time"] = elapsed
        gio.write_json(side, meta)
    return code


if __name__ == "__main__":
    sys.exit(main())
