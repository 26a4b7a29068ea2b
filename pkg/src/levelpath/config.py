"""Flat key-value experiment configuration.

One human-editable file drives every CLI command.  Lines look like
``key = value``; blank lines and ``#`` comments are ignored.  All
tolerances are surfaced so the numerics can be tuned without touching
code.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import PreconditionError
from .network import (CrossEntropy, Dataset, LeakyReLU, NetworkSpec,
                      loss_kind_by_name)

__all__ = ["ExperimentConfig", "parse_config", "build_spec", "build_dataset"]

_DEFAULTS = {
    "widths": "2,4,1",
    "activation": "leaky_relu",
    "slope": "0.5",
    "loss": "square",
    "data_n": "3",
    "data_seed": "0",
    "data_path": "",
    "alpha": "max",
    "train_steps": "3000",
    "train_lr": "0.05",
    "train_seed_a": "1",
    "train_seed_b": "2",
    "inv_tol": "1e-8",
    "verify_tol": "1e-6",
    "rank_tol_rel": "1e-10",
    "samples": "200",
    "out_dir": "out",
}


@dataclass(frozen=True)
class ExperimentConfig:
    widths: tuple[int, ...]
    activation: str
    slope: float
    loss: str
    data_n: int
    data_seed: int
    data_path: str
    alpha: float | None  # None means "max of the endpoint losses"
    train_steps: int
    train_lr: float
    train_seed_a: int
    train_seed_b: int
    inv_tol: float
    verify_tol: float
    rank_tol_rel: float
    samples: int
    out_dir: str
    raw: dict = field(default_factory=dict, compare=False)

    def validate_common(self) -> None:
        for name in ("inv_tol", "verify_tol", "rank_tol_rel"):
            if getattr(self, name) <= 0.0:
                raise PreconditionError(f"{name} must be positive")
        if self.samples < 2:
            raise PreconditionError("samples must be at least 2")
        if self.data_n < 1:
            raise PreconditionError("data_n must be positive")

    def validate_for_connect(self) -> None:
        self.validate_common()
        if len(self.widths) < 3:
            raise PreconditionError("connection needs at least two weight layers")
        if self.widths[1] < self.data_n + 1:
            raise PreconditionError(
                f"n_1 must be >= N+1: first hidden width {self.widths[1]} "
                f"but N = {self.data_n}")
        hidden = self.widths[2:]
        if any(hidden[i] <= hidden[i + 1] for i in range(len(hidden) - 1)):
            raise PreconditionError("hidden widths after the first must strictly decrease")

    def validate_for_certify(self) -> None:
        self.validate_common()
        if len(self.widths) != 3 or self.widths[1] != self.data_n or \
                self.widths[2] != self.data_n:
            raise PreconditionError(
                f"certification needs widths (n0, N, N) with N = data_n = {self.data_n}, "
                f"got {self.widths}")
        if self.loss != "square":
            raise PreconditionError("certification is defined for the square loss")


def parse_config(path: str | Path, overrides: dict | None = None) -> ExperimentConfig:
    values = dict(_DEFAULTS)
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise PreconditionError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in body.split("=", 1))
        if key not in _DEFAULTS:
            raise PreconditionError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value
    if overrides:
        values.update({k: str(v) for k, v in overrides.items() if v is not None})
    try:
        alpha = None if values["alpha"].strip() == "max" else float(values["alpha"])
        cfg = ExperimentConfig(
            widths=tuple(int(w) for w in values["widths"].split(",")),
            activation=values["activation"],
            slope=float(values["slope"]),
            loss=values["loss"],
            data_n=int(values["data_n"]),
            data_seed=int(values["data_seed"]),
            data_path=values["data_path"],
            alpha=alpha,
            train_steps=int(values["train_steps"]),
            train_lr=float(values["train_lr"]),
            train_seed_a=int(values["train_seed_a"]),
            train_seed_b=int(values["train_seed_b"]),
            inv_tol=float(values["inv_tol"]),
            verify_tol=float(values["verify_tol"]),
            rank_tol_rel=float(values["rank_tol_rel"]),
            samples=int(values["samples"]),
            out_dir=values["out_dir"],
            raw=values,
        )
    except ValueError as exc:
        raise PreconditionError(f"bad value in {path}: {exc}") from exc
    return cfg


def with_overrides(cfg: ExperimentConfig, **kwargs) -> ExperimentConfig:
    updates = {k: v for k, v in kwargs.items() if v is not None}
    return replace(cfg, **updates) if updates else cfg


def build_spec(cfg: ExperimentConfig) -> NetworkSpec:
    if cfg.activation != "leaky_relu":
        raise PreconditionError(f"unknown activation {cfg.activation!r}")
    return NetworkSpec(cfg.widths, LeakyReLU(cfg.slope), loss_kind_by_name(cfg.loss))


def build_dataset(cfg: ExperimentConfig, spec: NetworkSpec) -> Dataset:
    """Load the data file when given, otherwise generate a seeded set."""
    if cfg.data_path:
        with np.load(cfg.data_path) as archive:
            return Dataset(archive["X"], archive["Y"])
    rng = np.random.default_rng(cfg.data_seed)
    X = rng.standard_normal((cfg.data_n, spec.widths[0]))
    if isinstance(spec.loss, CrossEntropy):
        labels = rng.integers(0, spec.widths[-1], size=cfg.data_n)
        Y = np.zeros((cfg.data_n, spec.widths[-1]))
        Y[np.arange(cfg.data_n), labels] = 1.0
    else:
        Y = rng.standard_normal((cfg.data_n, spec.widths[-1]))
    return Dataset(X, Y)
