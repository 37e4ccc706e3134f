"""Black-box gradient estimation and the two gradient-sign attacks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

FD_STEP = 0.01


class NonFiniteObjective(ValueError):
    pass


@dataclass(frozen=True)
class GepaConfig:
    iterations: int = 10  # W
    step_size: float = 0.02  # zeta
    max_perturbation: float = 0.10  # xi, relative
    fd_step: float = FD_STEP

    def __post_init__(self) -> None:
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if not self.step_size > 0:
            raise ValueError("step_size must be > 0")
        if not self.max_perturbation > 0:
            raise ValueError("max_perturbation must be > 0")
        if not self.fd_step > 0:
            raise ValueError("fd_step must be > 0")


def estimate_gradient(
    objective: Callable[[np.ndarray], float | np.ndarray],
    s: np.ndarray,
    fd_step: float = FD_STEP,
    batched: bool = False,
) -> np.ndarray:
    """Central finite differences, one coordinate at a time.

    With ``batched=True`` the objective receives a (2n, n) array of probe
    points (all +h rows first, then all -h rows) and must return 2n values;
    otherwise it is called 2n times on single vectors.
    """
    s = np.asarray(s, dtype=float)
    n = s.size
    eye = np.eye(n) * fd_step
    if batched:
        probes = np.concatenate([s + eye, s - eye])
        vals = np.asarray(objective(probes), dtype=float).reshape(2 * n)
        up, down = vals[:n], vals[n:]
    else:
        up = np.array([float(objective(s + eye[i])) for i in range(n)])
        down = np.array([float(objective(s - eye[i])) for i in range(n)])
    bad = ~(np.isfinite(up) & np.isfinite(down))
    if bad.any():
        raise NonFiniteObjective(f"objective not finite around index {int(np.flatnonzero(bad)[0])}")
    return (up - down) / (2.0 * fd_step)


def relative_bounds(s: np.ndarray, xi: float) -> tuple[np.ndarray, np.ndarray]:
    a, b = s * (1.0 - xi), s * (1.0 + xi)
    return np.minimum(a, b), np.maximum(a, b)


def gepa_attack(
    cfg: GepaConfig,
    objective: Callable[[np.ndarray], float | np.ndarray],
    s: np.ndarray,
    batched: bool = False,
) -> np.ndarray:
    """Projected multiplicative sign descent on ``objective`` within +-xi|s|."""
    s = np.asarray(s, dtype=float)
    lo, hi = relative_bounds(s, cfg.max_perturbation)
    adv = s.copy()
    for _ in range(cfg.iterations):
        g = estimate_gradient(objective, adv, cfg.fd_step, batched)
        adv = adv * (1.0 - cfg.step_size * np.sign(g))
        adv = np.clip(adv, lo, hi)
    return adv


def fgsm_attack(
    xi: float,
    objective: Callable[[np.ndarray], float | np.ndarray],
    s: np.ndarray,
    fd_step: float = FD_STEP,
    batched: bool = False,
) -> np.ndarray:
    """One signed step of size xi|s_i| that increases ``objective``."""
    s = np.asarray(s, dtype=float)
    g = estimate_gradient(objective, s, fd_step, batched)
    return s + xi * np.abs(s) * np.sign(g)
