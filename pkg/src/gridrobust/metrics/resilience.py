"""Resilience metrics: reward-gap area, degradation/recovery events, state similarity."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.ndimage import uniform_filter1d

from .trace import EpisodeTrace


def trapezoid_area(values: np.ndarray) -> float:
    """Unit-spaced trapezoidal integral; fewer than two samples give 0."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return 0.0
    return float((v[0] + v[-1]) / 2.0 + v[1:-1].sum())


def reward_delta_series(trace: EpisodeTrace) -> np.ndarray:
    """Perturbed minus unperturbed reward over the common prefix of both runs."""
    n = trace.aligned
    return trace.rewards_p[:n] - trace.rewards_u[:n]


def reward_gap_area(trace: EpisodeTrace) -> float:
    hp = trace.first_perturbation
    if hp < 0:
        return 0.0
    return trapezoid_area(reward_delta_series(trace)[hp:])


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float | None:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("vectors must have equal length")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return None
    if np.array_equal(a, b):
        return 1.0
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def cosine_series(trace: EpisodeTrace) -> np.ndarray:
    """Per-step cosine similarity of true states across the two runs; NaN where undefined."""
    n = trace.aligned
    out = np.full(n, np.nan)
    for k in range(n):
        c = cosine_similarity(trace.states_p[k], trace.states_u[k])
        if c is not None:
            out[k] = c
    return out


@dataclass(frozen=True)
class DegradationEvent:
    start: int
    trough: int
    recovery: int
    min_value: float
    max_value: float

    @property
    def degradation_time(self) -> int:
        return self.trough - self.start

    @property
    def restorative_time(self) -> int:
        return self.recovery - self.trough

    def to_dict(self) -> dict:
        d = asdict(self)
        d["degradation_time"] = self.degradation_time
        d["restorative_time"] = self.restorative_time
        return d


def smooth(series: np.ndarray, window: int) -> np.ndarray:
    s = np.asarray(series, dtype=float)
    if window <= 1 or s.size == 0:
        return s.copy()
    return uniform_filter1d(s, size=min(window, s.size), mode="nearest")


def degradation_segments(
    series: np.ndarray,
    threshold: float,
    window: int = 50,
    offset: int = 0,
) -> list[DegradationEvent]:
    """Find dips of the smoothed series below ``threshold``.

    An event spans a maximal run below the threshold.  Its trough is the
    smoothed minimum inside the run; recovery is the smoothed maximum between
    the trough and the first step back at or above the threshold (series end
    if it never returns).  Step indices are shifted by ``offset``; extrema are
    taken on the raw series.
    """
    raw = np.asarray(series, dtype=float)
    raw = np.where(np.isfinite(raw), raw, threshold)
    sm = smooth(raw, window)
    below = sm < threshold
    events: list[DegradationEvent] = []
    n = len(sm)
    i = 0
    while i < n:
        if not below[i]:
            i += 1
            continue
        j = i
        while j < n and below[j]:
            j += 1
        trough = i + int(np.argmin(sm[i:j]))
        end = min(j, n - 1)
        recovery = trough + int(np.argmax(sm[trough : end + 1]))
        events.append(
            DegradationEvent(
                start=offset + i,
                trough=offset + trough,
                recovery=offset + recovery,
                min_value=float(raw[i : end + 1].min()),
                max_value=float(raw[trough : end + 1].max()),
            )
        )
        i = j
    return events


def per_thousand(value: float, steps: int) -> float | None:
    if steps <= 0:
        return None
    return value / (steps / 1000.0)
