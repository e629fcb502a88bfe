"""Decoding engine for mask-based diffusion language models.

The model is exposed as a predict-all backend; schedulers decide which
masked positions to commit each step, from plain greedy through position
beam search to a confidence-switched controller, and a benchmark harness
compares them on planted instances where ground truth is known.
"""

from .backends import (
    ModelBackend,
    PlantedBackend,
    PlantedInstance,
    PlantedModelParams,
    StubBackend,
    generate_instance,
    generate_run_instance,
    planted_predict,
)
from .bench import (
    BASIN_PARAMS,
    DEFAULT_BENCH_CONFIGS,
    PLATEAU_PARAMS,
    BenchmarkReport,
    BenchRow,
    RunSpec,
    bench_backend,
    bench_prompt,
    exhaustive_order_oracle,
    parse_report,
    planted_accuracy,
    run_benchmark,
)
from .errors import (
    BackendError,
    BackendFailure,
    DecodingError,
    EmptyBeam,
    EmptyPool,
    EmptySelection,
    EmptyTrace,
    InsufficientTopK,
    LengthMismatch,
    MissingPrediction,
    NothingMasked,
    NoTokensInScope,
    PositionNotMasked,
    ProtocolError,
    SubsetTooLarge,
    TooLong,
    TooManyCombinations,
    WorkerTimeout,
)
from .metrics import (
    ConfidenceMetric,
    average_confidence,
    confidence,
    global_arness,
    mode_usage_histogram,
    step_score,
)
from .protocol import (
    WorkerConnection,
    connect_worker,
    loopback_connection,
    remote_predict_batch,
    spawn_worker,
)
from .schedulers import (
    DecodeConfig,
    Strategy,
    adaptive_parallel_step,
    beam_update,
    decode,
    greedy_step,
    pbs_expand,
    rank_pool,
    soar_expand,
    soar_step,
)
from .state import (
    Beam,
    Candidate,
    DecodedToken,
    DecodeState,
    DecodeTrace,
    Mode,
    PredictionMatrix,
    StepRecord,
    TokenDistribution,
    Vocabulary,
    apply_unmask,
    forward_mask,
    initial_state,
    traces_equal,
)
from .subsets import ScoredSubset, brute_force_subsets, min_candidate_count, top_k_subsets
from .trace import emit_trace, parse_trace

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
