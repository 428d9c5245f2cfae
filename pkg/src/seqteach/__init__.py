"""Training-sequence optimization for a grapheme-to-phoneme learner.

The package simulates a small feedforward learner that acquires
spelling-to-sound mappings from a stream of word presentations, and
searches for the time-varying sampling distribution over a training
pool that leaves the learner best able to generalize to held-out
words.
"""

from .analysis import (
    CorrelationRow,
    WordVariables,
    correlate_with_mean_pq,
    levenshtein,
    orthographic_neighbors,
    phonological_density,
    phonological_neighbors,
    spearman_rho,
    two_sample_t_test,
    unit_entropy,
    word_variables,
)
from .harness import (
    ComparisonReport,
    EfficiencyReport,
    ExperimentConfig,
    efficiency_experiment,
    load_config,
    run_comparison,
)
from .learner import (
    LearnerState,
    Prediction,
    batch_train_to_convergence,
    decode_output,
    decode_phoneme,
    forward,
    init_learner,
    predict_correct,
    terminal_cost,
    train_step,
)
from .optimizer import (
    OptimizerConfig,
    OptimizerRunState,
    QuadraticHook,
    RolloutContext,
    build_context,
    estimate_gradient,
    expected_terminal_cost,
    optimize_stage1,
    optimize_stage2,
    sample_unit_vector,
    select_best_sequence,
    sgd_step,
)
from .schedule import (
    LogitVector,
    Multinomial,
    TimeVaryingDistribution,
    TrainingSequence,
    baseline_distribution,
    interpolate,
    logits_to_multinomial,
    sample_sequence,
    stationary,
)
from .seeds import mix
from .vocab import (
    PhonemeInventory,
    PoolSplit,
    Vocabulary,
    VocabError,
    WordItem,
    align_word,
    encode_orthography,
    encode_phonology,
    generate_synthetic_vocabulary,
    parse_phoneme_inventory,
    parse_vocabulary,
    split_vocabulary,
)

__version__ = "0.1.0"
