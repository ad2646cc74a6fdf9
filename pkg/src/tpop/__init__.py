"""Tree-Proof-of-Position: collaborative position verification, stochastic
models and Monte-Carlo experiments."""

from .core import (
    AgentState,
    ConfirmationOracle,
    DuplicatePolicy,
    InvalidInput,
    Position,
    StaticOracle,
    TPoPParams,
    UnknownAgent,
    VerificationOutcome,
    WitnessTree,
    build_tree,
    level_sizes,
    verify,
)
from .metrics import (
    ConfusionCounts,
    JsdReport,
    MapKind,
    MapSource,
    PerformanceMap,
    conditional_rate,
    global_jsd,
    jsd,
    pointwise_jsd,
)
from .model import (
    CellEstimate,
    NodeState,
    StatePriors,
    confirm_states,
    estimate_cell,
    exact_cell,
    sample_tree_outcome,
    sweep_grid,
)
from .world import (
    EpochResult,
    World,
    WorldConfig,
    neighbor_set,
    run_epoch,
    spawn,
    step,
    sweep_world,
)

__version__ = "0.1.0"
