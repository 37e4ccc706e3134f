"""Random sensor faults: dropped readings and lognormal measurement errors."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

ZERO_PROB = 0.2
DURATION_P = 1.0 / 6.0


@dataclass(frozen=True)
class PerturbationRecord:
    index: int
    mode: str  # "zero" | "scale"
    factor: float = 1.0
    remaining: int = 1

    def apply(self, values: np.ndarray) -> None:
        if self.mode == "zero":
            values[self.index] = 0.0
        else:
            values[self.index] *= self.factor


@dataclass(frozen=True)
class RpaConfig:
    p: float = 0.2
    sigma: dict[str, float] = field(default_factory=lambda: {"gen": 0.3, "load": 0.3, "flow": 0.3})

    def __post_init__(self) -> None:
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        for group in ("gen", "load", "flow"):
            if not self.sigma.get(group, 0.0) > 0:
                raise ValueError(f"sigma for {group} must be > 0")


def draw_perturbation(
    rng: np.random.Generator, groups: tuple[str, ...], sigma: dict[str, float]
) -> PerturbationRecord:
    """One new fault: random index, zero w.p. 0.2 else lognormal factor, geometric duration."""
    i = int(rng.integers(len(groups)))
    if rng.random() < ZERO_PROB:
        mode, factor = "zero", 0.0
    else:
        mode, factor = "scale", float(rng.lognormal(0.0, sigma[groups[i]]))
    k = int(rng.geometric(DURATION_P))
    return PerturbationRecord(i, mode, factor, k)


def rpa_apply(
    cfg: RpaConfig,
    rng: np.random.Generator,
    active: list[PerturbationRecord],
    values: np.ndarray,
    groups: tuple[str, ...],
) -> tuple[np.ndarray, list[PerturbationRecord], np.ndarray]:
    """Perturb one observation vector.

    Returns the perturbed copy, the updated record list and a boolean mask of
    indices under an active perturbation this step.
    """
    out = np.array(values, dtype=float, copy=True)
    flags = np.zeros(out.size, dtype=bool)
    for rec in active:
        rec.apply(out)
        flags[rec.index] = True
    records = list(active)
    if rng.random() < cfg.p:
        new = draw_perturbation(rng, groups, cfg.sigma)
        out[new.index] = values[new.index]
        new.apply(out)
        flags[new.index] = True
        # a new fault on an already-faulty sensor replaces the old one
        records = [r for r in records if r.index != new.index] + [new]
    updated = [replace(r, remaining=r.remaining - 1) for r in records]
    return out, [r for r in updated if r.remaining > 0], flags
