"""Event-triggered sampled-data consensus on directed graphs."""
from .analysis import (
    AnalysisReport,
    analyze,
    consensus_weights,
    lemma2_check,
    lyapunov,
    lyapunov_bound_check,
    predicted_consensus,
)
from .digraph import (
    Digraph,
    Gramians,
    SpectralDecomposition,
    condense,
    gramians,
    has_spanning_tree,
    is_strongly_connected,
    laplacian,
    left_eigenvector,
)
from .engine import SimConfig, Trajectory, disagreement, run, step_delayed, step_undelayed
from .errors import InvalidParameters, NonFiniteState, NoSpanningTree, NotStronglyConnected
from .protocol import (
    ProtocolParams,
    TriggerState,
    ValidationReport,
    control_input,
    delay_bound,
    q_hat,
    trigger_check,
    validate,
)

__version__ = "0.1.0"
