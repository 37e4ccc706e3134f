"""Load and generation time series at 5-minute resolution."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import GridModel

STEPS_PER_DAY = 288


@dataclass(frozen=True)
class Chronics:
    load: np.ndarray  # (steps, n_loads) MW
    gen: np.ndarray  # (steps, n_gens) MW, slack column is nominal only
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.load.ndim != 2 or self.gen.ndim != 2 or len(self.load) != len(self.gen):
            raise ValueError("load and gen series must be 2-D with equal step counts")
        if np.any(self.load < 0):
            raise ValueError("load demands must be non-negative")
        self.load.setflags(write=False)
        self.gen.setflags(write=False)

    def __len__(self) -> int:
        return len(self.load)

    def truncated(self, steps: int) -> Chronics:
        return Chronics(self.load[:steps].copy(), self.gen[:steps].copy(), self.seed)


def _ar1(rng: np.random.Generator, n: int, sigma: float, phi: float) -> np.ndarray:
    innov = rng.normal(0.0, sigma * np.sqrt(1.0 - phi**2), size=n)
    out = np.empty(n)
    prev = rng.normal(0.0, sigma)
    for k in range(n):
        prev = phi * prev + innov[k]
        out[k] = prev
    return out


def generate_chronics(
    model: GridModel,
    steps: int,
    seed: int,
    *,
    amplitude: float = 0.3,
    load_sigma: float = 0.05,
    renewable_sigma: float = 0.15,
    phi: float = 0.98,
    scale: float = 1.0,
) -> Chronics:
    """Daily sinusoid per load times AR(1) multiplicative noise.

    Non-slack generators follow total demand in proportion to ``p_max``; the
    renewable unit gets its own noise factor and is capped at ``p_max``.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(steps)
    n_loads, n_gens = model.n_loads, model.n_gens
    phases = rng.uniform(-0.5, 0.5, size=n_loads)  # radians
    load = np.empty((steps, n_loads))
    for d, ld in enumerate(model.loads):
        # trough at 04:00, peak at 16:00
        shape = 1.0 + amplitude * np.sin(2 * np.pi * (t / STEPS_PER_DAY - 10 / 24) + phases[d])
        noise = np.exp(_ar1(rng, steps, load_sigma, phi))
        load[:, d] = scale * ld.base * shape * noise
    total = load.sum(axis=1)
    p_max = np.array([g.p_max for g in model.generators])
    gen = total[:, None] * p_max[None, :] / p_max.sum()
    for g in model.generators:
        if g.renewable:
            gen[:, g.id] = np.minimum(gen[:, g.id] * np.exp(_ar1(rng, steps, renewable_sigma, phi)), g.p_max)
    return Chronics(load=load, gen=gen, seed=seed)


def load_chronics_csv(model: GridModel, path: str | Path) -> Chronics:
    """Read chronics from CSV with columns ``load_<id>`` and ``gen_<id>``."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: no rows")
    try:
        load = np.array([[float(r[f"load_{d}"]) for d in range(model.n_loads)] for r in rows])
        gen = np.array([[float(r[f"gen_{g}"]) for g in range(model.n_gens)] for r in rows])
    except KeyError as exc:
        raise ValueError(f"{path}: missing column {exc}") from exc
    return Chronics(load=load, gen=gen)


def save_chronics_csv(chronics: Chronics, path: str | Path) -> None:
    n_loads, n_gens = chronics.load.shape[1], chronics.gen.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"load_{d}" for d in range(n_loads)] + [f"gen_{g}" for g in range(n_gens)])
        for lrow, grow in zip(chronics.load, chronics.gen):
            w.writerow([repr(float(v)) for v in lrow] + [repr(float(v)) for v in grow])
