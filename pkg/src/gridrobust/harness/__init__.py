from .campaign import (
    CampaignContext,
    CampaignResult,
    run_campaign,
    run_episode,
    run_paired_episode,
    train_rlpa,
    train_rlpa_cmd,
)
from .config import CampaignConfig, ConfigError, config_from_dict, dump_config, load_config
from .outputs import canonical_json, emit_outputs, read_traces
