"""Writing campaign results: canonical JSON, text tables, per-step CSV, traces."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .. import __version__
from ..grid.env import ObservationLayout
from ..metrics import (
    EpisodeTrace,
    ResilienceReport,
    RobustnessReport,
    cosine_series,
    format_tables,
    reward_delta_series,
    weak_spot_map,
)
from .config import CampaignConfig


class OutputError(OSError):
    pass


def _plain(obj: Any) -> Any:
    """Recursively convert to JSON-native types; NaN/inf become null."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def canonical_json(obj: Any) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _num(x: float) -> str:
    return "" if not math.isfinite(x) else repr(float(x))


def _write_text(path: Path, text: str) -> None:
    try:
        path.write_text(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc


def write_reports(
    out: Path,
    robustness: RobustnessReport,
    resilience: ResilienceReport,
    config: CampaignConfig,
    failures: dict[int, str],
    label: str,
) -> None:
    head = {"code_version": __version__, "config": config.to_dict(), "failed_episodes": failures}
    _write_text(out / "robustness.json", canonical_json({**head, **robustness.to_dict()}))
    _write_text(out / "resilience.json", canonical_json({**head, **resilience.to_dict()}))
    _write_text(out / "tables.txt", format_tables({label: (robustness, resilience)}))


def write_series(out: Path, traces: Sequence[EpisodeTrace]) -> None:
    for t in traces:
        e = t.meta.get("episode", 0)
        n = t.aligned
        delta = reward_delta_series(t)
        rows = [(k, _num(t.rewards_u[k]), _num(t.rewards_p[k]), _num(delta[k])) for k in range(n)]
        _write_csv(out / f"rewards_ep{e}.csv", ("step", "R_u", "R_p", "delta"), rows)
        cos = cosine_series(t)
        _write_csv(out / f"cosine_ep{e}.csv", ("step", "cosine"), [(k, _num(c)) for k, c in enumerate(cos)])


def write_weakmap(out: Path, traces: Sequence[EpisodeTrace], layout: ObservationLayout, kind: str) -> np.ndarray:
    scores = weak_spot_map(list(traces), kind) if traces else np.full(len(layout), np.nan)
    rows = [
        (i, layout.elements[i], layout.groups[i], _num(scores[i]))
        for i in range(len(layout))
    ]
    _write_csv(out / "weakmap.csv", ("index", "element", "group", "score"), rows)
    return scores


def write_traces(out: Path, traces: Sequence[EpisodeTrace]) -> None:
    d = out / "traces"
    d.mkdir(parents=True, exist_ok=True)
    for t in traces:
        t.save(d / f"episode_{t.meta.get('episode', 0):04d}.npz")


def read_traces(out: Path) -> list[EpisodeTrace]:
    files = sorted((Path(out) / "traces").glob("episode_*.npz"))
    return [EpisodeTrace.load(f) for f in files]


def emit_outputs(result, out: str | Path | None = None) -> Path:
    """Persist everything for a finished campaign under ``out`` (default: config output)."""
    out = Path(out if out is not None else result.config.output)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create {out}: {exc}") from exc
    cfg = result.config
    _write_text(out / "config.json", canonical_json({"code_version": result.version, "config": cfg.to_dict()}))
    write_traces(out, result.traces)
    if result.robustness is not None:
        write_reports(out, result.robustness, result.resilience, cfg, result.failures, cfg.perturber.kind)
    else:
        empty = {"code_version": result.version, "config": cfg.to_dict(), "failed_episodes": result.failures}
        _write_text(out / "robustness.json", canonical_json(empty))
        _write_text(out / "resilience.json", canonical_json(empty))
    write_series(out, result.traces)
    write_weakmap(out, result.traces, result.layout, cfg.perturber.kind)
    return out
