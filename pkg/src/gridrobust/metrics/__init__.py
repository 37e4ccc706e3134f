from .reports import (
    MetricParams,
    ResilienceReport,
    RobustnessReport,
    build_reports,
    episode_resilience,
    episode_robustness,
    format_tables,
    mean_defined,
)
from .resilience import (
    DegradationEvent,
    cosine_series,
    cosine_similarity,
    degradation_segments,
    reward_delta_series,
    reward_gap_area,
    smooth,
    trapezoid_area,
)
from .robustness import (
    action_change_count,
    action_similarity,
    change_overlap,
    gepa_significance,
    reward_per_action,
    similarity_per_changed_action,
    substation_overlap,
    survival_steps,
    total_reward_delta,
    weak_spot_map,
)
from .trace import EpisodeTrace
