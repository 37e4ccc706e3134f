from .chronics import Chronics, generate_chronics, load_chronics_csv, save_chronics_csv
from .env import (
    EpisodeOverError,
    GridEnv,
    GridState,
    Observation,
    ObservationLayout,
    StepResult,
    initial_state,
    line_reward,
    observe,
    simulate,
    step,
)
from .model import GridFileError, GridModel, grid_from_dict, load_grid
from .powerflow import PowerFlowError, PowerFlowResult, dc_power_flow, nodal_mismatch, sensitivity
from .topology import DO_NOTHING, Action, ActionKind, Topology, enumerate_actions
