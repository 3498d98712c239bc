"""Masked-diffusion language-model decoding engine.

Static, threshold-parallel, and lossless draft-and-verify decoders over
pluggable marginal predictors, plus a brute-force path laboratory and a
benchmark harness for NFE accounting.
"""

from .core import (
    AlphaSchedule,
    BlockLayout,
    DecisionSet,
    DeterministicRng,
    SequenceState,
    TimeSchedule,
    Vocabulary,
    alpha_linear,
    apply_decisions,
    make_uniform_schedule,
    unmask_quota,
)
from .diffusion import (
    ReverseTransition,
    ancestral_sample_step,
    forward_corrupt,
    reverse_transition,
)
from .engine import (
    DecodeResult,
    RoundRecord,
    decode_freedave,
    decode_static,
    decode_threshold,
    replay_path,
    verifier_h,
)
from .errors import (
    ConfigError,
    ContractViolation,
    MaskdiffError,
    PredictorError,
    TraceError,
    TraceFormatError,
    TraceMissError,
)
from .pathlab import (
    FeasibleGraph,
    LemmaReport,
    PathCuts,
    build_feasible_graph,
    check_lemma,
    greedy_verifier_path,
    optimal_path,
)
from .predictor import (
    MarginalEstimate,
    MarginalPredictor,
    NfeCounter,
    NgramPredictor,
    ReplayPredictor,
    TablePredictor,
    make_ngram_predictor,
    make_table_predictor,
    open_replay_predictor,
)
from .capture import record_static_trace
from .scheduler import SchedulerConfig, greedy_schedule, threshold_schedule
from .trace import TraceFile, TraceHeader, TraceRecord, canonical_state_key

__version__ = "0.1.0"
