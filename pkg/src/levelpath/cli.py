"""Command-line interface.

Subcommands: ``train`` produces a seeded endpoint pair by full-batch
gradient descent, ``connect`` builds and verifies a sublevel path
between two saved endpoints, ``verify`` rebuilds the same path and
re-checks it at a higher sampling rate, ``certify`` constructs a
width-N disconnection certificate, and ``contrast`` runs the width-N
versus width-N+1 comparison.  Exit code 0 means the relevant verifier
or certificate passed; precondition failures exit nonzero with a
machine-readable reason on stdout.
"""

from __future__ import annotations

import datetime
import json
import sys
from pathlib import Path

import click
import numpy as np

from .config import (ExperimentConfig, build_dataset, build_spec, parse_config,
                     with_overrides)
from .connect import connect_sublevel
from .disconnect import (barrier_scan, build_width_n_instance,
                         certify_disconnection, embed_extra_neuron,
                         instance_hash, permute_neurons, width_n_spec)
from .errors import DegenerateDeterminant, LevelPathError
from .network import Dataset, NetworkSpec, Theta, loss
from .train import train_gd
from .verify import dump_json, path_description, verify_path, write_trace_csv

EXIT_FAIL = 1
EXIT_PRECONDITION = 2


def _timestamp() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def save_theta(path: str | Path, theta: Theta) -> None:
    arrays = {f"W{i + 1}": w for i, w in enumerate(theta.weights)}
    arrays.update({f"b{i + 1}": b for i, b in enumerate(theta.biases)})
    np.savez(path, **arrays)


def load_theta(path: str | Path, spec: NetworkSpec) -> Theta:
    with np.load(path) as archive:
        ws = tuple(archive[f"W{i + 1}"] for i in range(spec.depth))
        bs = tuple(archive[f"b{i + 1}"] for i in range(spec.depth - 1))
    theta = Theta(ws, bs)
    theta.validate_against(spec)
    return theta


def _load_config(config_path: str, seed: int | None, out: str | None,
                 samples: int | None, alpha: float | None) -> ExperimentConfig:
    cfg = parse_config(config_path)
    return with_overrides(cfg,
                          data_seed=seed,
                          out_dir=out,
                          samples=samples,
                          alpha=alpha)


def _fail(exc: LevelPathError) -> None:
    click.echo(json.dumps({"error": type(exc).__name__, "message": str(exc)}))
    sys.exit(EXIT_PRECONDITION)


def _common_options(fn):
    fn = click.option("--config", "config_path", required=True,
                      type=click.Path(exists=True), help="Flat key=value config file.")(fn)
    fn = click.option("--seed", type=int, default=None,
                      help="Override the data/instance seed.")(fn)
    fn = click.option("--out", type=click.Path(), default=None,
                      help="Override the output directory.")(fn)
    fn = click.option("--samples", type=int, default=None,
                      help="Verification samples per segment.")(fn)
    fn = click.option("--alpha", type=float, default=None,
                      help="Explicit sublevel bound (default: config policy).")(fn)
    return fn


@click.group()
def main():
    """Sublevel-set paths and disconnection certificates for small networks."""


@main.command()
@_common_options
def train(config_path, seed, out, samples, alpha):
    """Train two endpoints by full-batch gradient descent."""
    try:
        cfg = _load_config(config_path, seed, out, samples, alpha)
        cfg.validate_common()
        spec = build_spec(cfg)
        data = build_dataset(cfg, spec)
        out_dir = Path(cfg.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        results = {}
        for tag, train_seed in (("a", cfg.train_seed_a), ("b", cfg.train_seed_b)):
            result = train_gd(spec, data, cfg.train_steps, cfg.train_lr, seed=train_seed)
            save_theta(out_dir / f"theta_{tag}.npz", result.theta)
            results[tag] = result
        bound = cfg.alpha if cfg.alpha is not None else max(r.final_loss
                                                            for r in results.values())
        dump_json({
            "loss_a": results["a"].final_loss,
            "loss_b": results["b"].final_loss,
            "alpha": bound,
            "steps": cfg.train_steps,
            "lr": cfg.train_lr,
            "seeds": [cfg.train_seed_a, cfg.train_seed_b],
            "created_at": _timestamp(),
        }, out_dir / "train_summary.json")
        click.echo(f"trained endpoints at losses {results['a'].final_loss:.6g} "
                   f"and {results['b'].final_loss:.6g}; alpha = {bound:.6g}")
    except LevelPathError as exc:
        _fail(exc)


def _run_connect(cfg: ExperimentConfig, theta_a_path: str, theta_b_path: str,
                 write_trace: bool):
    cfg.validate_for_connect()
    spec = build_spec(cfg)
    data = build_dataset(cfg, spec)
    theta_a = load_theta(theta_a_path, spec)
    theta_b = load_theta(theta_b_path, spec)
    bound = cfg.alpha
    if bound is None:
        bound = max(loss(spec, theta_a, data), loss(spec, theta_b, data))
    path = connect_sublevel(spec, data, theta_a, theta_b, bound, rng=cfg.data_seed)
    report = verify_path(spec, data, path, bound, n_samples=cfg.samples,
                         inv_tol=cfg.inv_tol, verify_tol=cfg.verify_tol,
                         expected_endpoints=(theta_a, theta_b))
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = report.to_json_dict()
    payload["created_at"] = _timestamp()
    dump_json(payload, out_dir / "path_report.json")
    if write_trace:
        write_trace_csv(spec, data, path, out_dir / "path_trace.csv",
                        n_samples=max(2, cfg.samples // 4))
        dump_json(path_description(path), out_dir / "path_segments.json")
    return report


@main.command()
@click.argument("theta_a", type=click.Path(exists=True))
@click.argument("theta_b", type=click.Path(exists=True))
@_common_options
def connect(theta_a, theta_b, config_path, seed, out, samples, alpha):
    """Build and verify a sublevel path between two endpoint files."""
    try:
        cfg = _load_config(config_path, seed, out, samples, alpha)
        report = _run_connect(cfg, theta_a, theta_b, write_trace=True)
    except LevelPathError as exc:
        _fail(exc)
    click.echo(f"max sampled loss {report.max_loss:.6g} vs bound {report.bound:.6g} "
               f"-> {report.verdict}")
    sys.exit(0 if report.passed else EXIT_FAIL)


@main.command()
@click.argument("theta_a", type=click.Path(exists=True))
@click.argument("theta_b", type=click.Path(exists=True))
@_common_options
def verify(theta_a, theta_b, config_path, seed, out, samples, alpha):
    """Rebuild the deterministic path and re-verify it (no trace files)."""
    try:
        cfg = _load_config(config_path, seed, out, samples, alpha)
        if samples is None:
            cfg = with_overrides(cfg, samples=2 * cfg.samples)
        report = _run_connect(cfg, theta_a, theta_b, write_trace=False)
    except LevelPathError as exc:
        _fail(exc)
    click.echo(f"verification {report.verdict}: max loss {report.max_loss:.6g}, "
               f"bound {report.bound:.6g}")
    sys.exit(0 if report.passed else EXIT_FAIL)


@main.command()
@click.option("--retries", type=int, default=5, show_default=True,
              help="Instance redraws on a degenerate determinant.")
@_common_options
def certify(config_path, seed, out, samples, alpha, retries):
    """Build a width-N instance and certify disconnected global minima."""
    try:
        cfg = _load_config(config_path, seed, out, samples, alpha)
        cfg.validate_for_certify()
        N = cfg.data_n
        n0 = cfg.widths[0]
        out_dir = Path(cfg.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        cert = None
        used_seed = cfg.data_seed
        for attempt in range(retries):
            used_seed = cfg.data_seed + attempt
            data, theta = build_width_n_instance(N, n0, seed=used_seed, slope=cfg.slope)
            spec = width_n_spec(N, n0, cfg.slope)
            theta_swapped = permute_neurons(theta, 0, 1)
            try:
                cert = certify_disconnection(spec, data, theta, theta_swapped)
                break
            except DegenerateDeterminant:
                continue
        if cert is None:
            click.echo(json.dumps({"error": "DegenerateDeterminant",
                                   "message": f"no valid certificate in {retries} redraws"}))
            sys.exit(EXIT_FAIL)
        barrier = barrier_scan(spec, data, theta, theta_swapped,
                               strategies=("line",), n_samples=cfg.samples)
        payload = cert.to_json_dict()
        payload["instance_hash"] = instance_hash(data, theta)
        payload["seed"] = used_seed
        payload["created_at"] = _timestamp()
        dump_json(payload, out_dir / "certificate.json")
        dump_json({"straight_line_barrier": barrier, "seed": used_seed,
                   "created_at": _timestamp()}, out_dir / "barrier.json")
    except LevelPathError as exc:
        _fail(exc)
    click.echo(f"certificate {'valid' if cert.valid else 'invalid'}; "
               f"straight-line barrier {barrier:.6g}")
    sys.exit(0 if cert.valid else EXIT_FAIL)


@main.command()
@_common_options
def contrast(config_path, seed, out, samples, alpha):
    """Width-N disconnection versus width-N+1 connection, side by side."""
    try:
        cfg = _load_config(config_path, seed, out, samples, alpha)
        cfg.validate_for_certify()
        N, n0 = cfg.data_n, cfg.widths[0]
        out_dir = Path(cfg.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        data, theta = build_width_n_instance(N, n0, seed=cfg.data_seed, slope=cfg.slope)
        spec = width_n_spec(N, n0, cfg.slope)
        theta_swapped = permute_neurons(theta, 0, 1)
        cert = certify_disconnection(spec, data, theta, theta_swapped)
        narrow_barrier = barrier_scan(spec, data, theta, theta_swapped,
                                      strategies=("line",), n_samples=cfg.samples)
        wide_spec, wide_a = embed_extra_neuron(spec, theta, rng=cfg.data_seed)
        _, wide_b = embed_extra_neuron(spec, theta_swapped, rng=cfg.data_seed)
        bound = cfg.alpha if cfg.alpha is not None else 1e-10
        path = connect_sublevel(wide_spec, data, wide_a, wide_b, bound,
                                rng=cfg.data_seed)
        report = verify_path(wide_spec, data, path, bound, n_samples=cfg.samples,
                             inv_tol=cfg.inv_tol, verify_tol=cfg.verify_tol,
                             expected_endpoints=(wide_a, wide_b))
        dump_json({
            "certificate": cert.to_json_dict(),
            "narrow_straight_line_barrier": narrow_barrier,
            "wide_report": report.to_json_dict(),
            "created_at": _timestamp(),
        }, out_dir / "contrast.json")
    except LevelPathError as exc:
        _fail(exc)
    ok = cert.valid and report.passed
    click.echo(f"width-{N} certificate {'valid' if cert.valid else 'invalid'} "
               f"(barrier {narrow_barrier:.6g}); width-{N + 1} path {report.verdict} "
               f"(max loss {report.max_loss:.3g})")
    sys.exit(0 if ok else EXIT_FAIL)


if __name__ == "__main__":
    main()
