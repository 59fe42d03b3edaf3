"""prefsteer: multi-objective preference steering for next-token decoders.

Training-free control of text generation: natural-language preferences with
importance weights steer any next-token probability source at decode time.
Per-token rewards are discovered as conditioned/unconditioned log-ratios,
weights are rebalanced by a closed-form KL-anchored rule, and the output
distribution is refined by closed-form follow-the-regularized-leader steps
before each token is sampled.
"""

from .backends import (
    ANCHOR_TAG,
    BASE_TAG,
    BackendCapabilities,
    Conditioning,
    ConditioningContext,
    NGramBackend,
    PolicyBackend,
    RemoteBackend,
    TableBackend,
)
from .config import RunConfig, build_backend, load_config, parse_config, serialize_config
from .decoder import (
    VARIANTS,
    DecodeConfig,
    GenerationTrace,
    StepRecord,
    decode,
    decode_variant,
    read_trace_jsonl,
    trace_to_jsonl,
    write_trace_jsonl,
)
from .distributions import (
    LogDistribution,
    SamplingStrategy,
    Vocab,
    align_supports,
    entropy,
    kl_divergence,
    normalize_log,
    sample,
)
from .errors import (
    BackendError,
    BackendUnavailable,
    ConfigInvalid,
    PrefsteerError,
    UnknownContext,
)
from .harness import (
    ParetoPoint,
    ScoreMatrix,
    SyntheticScorer,
    ablation_grid,
    compute_metrics,
    pareto_sweep,
    seeded_ablation,
    synthetic_case,
)
from .online import FtrlConfig, fuse, ftrl_step, oracle_ftrl_step, run_online_optimization
from .prompts import (
    render_anchor_prompt,
    render_base_prompt,
    render_judge_prompt,
    render_preference_prompt,
)
from .rewards import PreferenceSpec, RewardState, sequence_reward, token_rewards
from .weights import WeightVector, optimize_weights, oracle_optimize_weights

__version__ = "0.1.0"

__all__ = [
    "ANCHOR_TAG",
    "BASE_TAG",
    "BackendCapabilities",
    "BackendError",
    "BackendUnavailable",
    "Conditioning",
    "ConditioningContext",
    "ConfigInvalid",
    "DecodeConfig",
    "FtrlConfig",
    "GenerationTrace",
    "LogDistribution",
    "NGramBackend",
    "ParetoPoint",
    "PolicyBackend",
    "PreferenceSpec",
    "PrefsteerError",
    "RemoteBackend",
    "RewardState",
    "RunConfig",
    "SamplingStrategy",
    "ScoreMatrix",
    "StepRecord",
    "SyntheticScorer",
    "TableBackend",
    "UnknownContext",
    "VARIANTS",
    "Vocab",
    "WeightVector",
    "ablation_grid",
    "align_supports",
    "build_backend",
    "compute_metrics",
    "decode",
    "decode_variant",
    "entropy",
    "fuse",
    "ftrl_step",
    "kl_divergence",
    "load_config",
    "normalize_log",
    "optimize_weights",
    "oracle_ftrl_step",
    "oracle_optimize_weights",
    "parse_config",
    "pareto_sweep",
    "read_trace_jsonl",
    "render_anchor_prompt",
    "render_base_prompt",
    "render_judge_prompt",
    "render_preference_prompt",
    "run_online_optimization",
    "sample",
    "seeded_ablation",
    "sequence_reward",
    "serialize_config",
    "synthetic_case",
    "token_rewards",
    "trace_to_jsonl",
    "write_trace_jsonl",
]
