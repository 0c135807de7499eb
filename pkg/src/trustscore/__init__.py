"""Test-time trust scores for small dense classifiers.

The package trains a seeded MLP, assigns each test sample a confidence
score by optimizing a sparse input perturbation toward the predicted class
and measuring how far the sample's features moved, and evaluates any such
score with risk-coverage metrics, distribution-shift reports, and
Monte-Carlo checks of the underlying high-dimensional geometry.
"""

from .baselines import DropoutConfig, entropy, mc_dropout_score, msp_score
from .data import (
    CorruptionSpec,
    Dataset,
    SyntheticSpec,
    corrupt,
    gen_microclusters,
    gen_ood,
    load_cifar10_bin,
    load_dataset,
    save_dataset,
)
from .geometry import (
    McReport,
    cos_noise_bound_check,
    expected_min_cos,
    mc_sorting_error,
    min_pairwise_cos,
    norm_concentration,
    normal_cdf,
    sample_sphere,
    sorting_error_cos_vs_direct,
    sorting_error_prob,
)
from .metrics import (
    ScoredPrediction,
    accuracy_at_top,
    aurc,
    ause,
    histogram,
    mmd,
    risk_coverage_curve,
    sparsification_curve,
    spearman,
)
from .nn import (
    AdamState,
    ForwardTrace,
    Mlp,
    MlpConfig,
    ShapeError,
    adam_init,
    adam_step,
    backward,
    cross_entropy_t,
    feature,
    forward,
    init_mlp,
    load_checkpoint,
    save_checkpoint,
    softmax_t,
)
from .scoring import (
    OptimizationError,
    TrustConfig,
    TrustResult,
    batch_trust_scores,
    cosine_similarity,
    trust_score,
)
from .training import TrainConfig, TrainHistory, evaluate, logitnorm_loss, train

__version__ = "0.1.0"
