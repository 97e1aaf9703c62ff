"""Flat ``key = value`` experiment configuration.

Recognized keys (all optional; defaults in :class:`ExperimentConfig`):

    graph           grid:RxC  or  edges:<path to a model file supplying the graph>
    states          number of labels per node (m)
    coupling        attractive | mixed
    gammas          comma-separated coupling strengths in [0, 1]
    alphas          comma-separated SNR values in [0, 1]; ``a:b:k`` gives k evenly spaced points
    ensemble        A | B | explicit   (explicit uses ``means`` and ``variances``)
    means, variances   comma-separated per-class values for the explicit ensemble
    trials          number of independent trials per (gamma, alpha)
    draws_per_trial observation vectors drawn per trial to estimate each MSE
    n_samples       0 for the infinite-data fit, else the number of sampled configurations
    smoothing       true | false   (pseudo-count 1/n before finite-data fits)
    methods         comma-separated subset of ind, bp, trw
    rho             uniform-spanning-tree | file:<path with one weight per edge>
    seed            master seed (unsigned 64-bit)
    tolerance, damping, max_iter   message-passing options
    workers         processes used for independent trials (1 = in-process)
    lipschitz       fixed L used by bound comparisons
    num_deltas      perturbations for the Lipschitz estimate
    y_samples       observation draws for bound comparisons
    sweep           none | A | B   (ensemble sweep for bound comparisons)
    sweep_values    mean separations (A) or second-class variances (B)
    instances       random models per coupling for stability probes

Lines starting with ``#`` and blank lines are ignored.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..prediction import ENSEMBLE_A, ENSEMBLE_B, MixtureSpec
from ..variational import MessagePassingOptions

METHODS = ("ind", "bp", "trw")


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


def _floats(text: str) -> tuple[float, ...]:
    text = text.strip()
    if text.count(":") == 2:
        a, b, k = text.split(":")
        return tuple(float(v) for v in np.round(np.linspace(float(a), float(b), int(k)), 12))
    return tuple(float(v) for v in text.split(",") if v.strip())


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    graph: str = "grid:3x3"
    states: int = 2
    coupling: str = "attractive"
    gammas: tuple[float, ...] = (0.7,)
    alphas: tuple[float, ...] = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
    ensemble: str = "A"
    means: tuple[float, ...] = ()
    variances: tuple[float, ...] = ()
    trials: int = 20
    draws_per_trial: int = 100
    n_samples: int = 0
    smoothing: bool = True
    methods: tuple[str, ...] = METHODS
    rho: str = "uniform-spanning-tree"
    seed: int = 0
    tolerance: float = 1e-10
    damping: float = 0.5
    max_iter: int = 5000
    workers: int = 1
    lipschitz: float = 0.10
    num_deltas: int = 200
    y_samples: int = 10000
    sweep: str = "none"
    sweep_values: tuple[float, ...] = field(default_factory=tuple)
    instances: int = 50

    def __post_init__(self):
        problems = []
        if not self.graph.startswith(("grid:", "edges:")):
            problems.append("graph must be grid:RxC or edges:<path>")
        if self.states < 2:
            problems.append("states must be at least 2")
        if self.coupling not in ("attractive", "mixed"):
            problems.append("coupling must be attractive or mixed")
        for name in ("gammas", "alphas"):
            vals = getattr(self, name)
            if not vals or any(not 0.0 <= v <= 1.0 for v in vals):
                problems.append(f"{name} must be a nonempty list within [0, 1]")
        if self.ensemble not in ("A", "B", "explicit"):
            problems.append("ensemble must be A, B or explicit")
        if self.trials < 1 or self.draws_per_trial < 1:
            problems.append("trials and draws_per_trial must be positive")
        if self.n_samples < 0:
            problems.append("n_samples must be nonnegative")
        if not self.methods or any(m not in METHODS for m in self.methods):
            problems.append(f"methods must be a nonempty subset of {METHODS}")
        if len(set(self.methods)) != len(self.methods):
            problems.append("methods must not repeat")
        if not (self.rho == "uniform-spanning-tree" or self.rho.startswith("file:")):
            problems.append("rho must be uniform-spanning-tree or file:<path>")
        if not 0 <= self.seed < 2 ** 64:
            problems.append("seed must be an unsigned 64-bit integer")
        if self.workers < 1 or self.instances < 1 or self.y_samples < 2 or self.num_deltas < 0:
            problems.append("workers, instances, y_samples and num_deltas out of range")
        if self.lipschitz < 0:
            problems.append("lipschitz must be nonnegative")
        if self.sweep not in ("none", "A", "B"):
            problems.append("sweep must be none, A or B")
        if self.sweep != "none" and not self.sweep_values:
            problems.append("sweep needs sweep_values")
        try:
            self.message_options()
        except ValueError as exc:
            problems.append(str(exc))
        if not problems:
            try:
                self.mixture()
            except ValueError as exc:
                problems.append(str(exc))
        if problems:
            raise ConfigError("; ".join(problems))

    def mixture(self) -> MixtureSpec:
        if self.ensemble == "A":
            mix = ENSEMBLE_A
        elif self.ensemble == "B":
            mix = ENSEMBLE_B
        else:
            mix = MixtureSpec(self.means, self.variances)
        if mix.num_classes != self.states:
            raise ValueError("mixture class count must equal states")
        return mix

    def message_options(self) -> MessagePassingOptions:
        return MessagePassingOptions(tolerance=self.tolerance, max_iter=self.max_iter,
                                     damping=self.damping)

    def replace(self, **changes) -> ExperimentConfig:
        return dataclasses.replace(self, **changes)


_PARSERS = {
    "graph": str.strip, "states": int, "coupling": str.strip, "gammas": _floats,
    "alphas": _floats, "ensemble": str.strip, "means": _floats, "variances": _floats,
    "trials": int, "draws_per_trial": int, "n_samples": int, "smoothing": _bool,
    "methods": lambda s: tuple(v.strip() for v in s.split(",") if v.strip()),
    "rho": str.strip, "seed": int, "tolerance": float, "damping": float, "max_iter": int,
    "workers": int, "lipschitz": float, "num_deltas": int, "y_samples": int,
    "sweep": str.strip, "sweep_values": _floats, "instances": int,
}


def parse_config(text: str, **overrides) -> ExperimentConfig:
    """Parse ``key = value`` lines; keyword overrides win over file values."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**values)


def load_config(path: str | Path, **overrides) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, **overrides)
