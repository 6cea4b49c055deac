"""Beyond-diagonal RIS: feasible sets, channel scenario, joint optimization, experiments."""

from .channel import ChannelRealization, SceneConfig, antenna_gain, path_loss, realize
from .optimizer import (
    OptimizerParams,
    SolveResult,
    pair_antennas,
    precoder_update,
    ris_update,
    select_grouping,
    solve,
    solve_nested,
    sum_rate,
)
from .scattering import (
    Architecture,
    EffectiveMatrices,
    Mode,
    RisConfig,
    ScatteringState,
    circuit_complexity,
    effective_matrices,
    project,
    quantize_phases,
    random_feasible,
    validate,
)

__version__ = "0.1.0"
