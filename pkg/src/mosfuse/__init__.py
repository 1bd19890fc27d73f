"""MOS-guided score-level fusion for spoofed-speech detection.

The package bundles the full experimental loop: a synthetic benchmark
generator with a known Bayes oracle, MOS-band data filtering, four
fusion models (MLP, MOS-gated MLP, gradient-boosted trees, and a MOS
fuser, each composable with a hard MOS threshold rule), seeded SGD
training, and exact EER/AUC evaluation with bootstrap significance
testing.
"""

from .data import (
    DataError,
    Dataset,
    ScoreRecord,
    labeled_subset,
    load_records,
    save_records,
    select_split,
)
from .gbdt import GbdtConfig, TreeEnsemble, gbdt_predict, train_gbdt
from .metrics import (
    EvalReport,
    SignificanceResult,
    bootstrap_significance,
    compute_auc,
    compute_eer,
    evaluate_scores,
    relative_reduction,
)
from .models import (
    FEATURES_FAD,
    FEATURES_FAD_MOS,
    GatedMlpParams,
    MlpParams,
    MosFuserParams,
    ThresholdConfig,
    ThresholdedModel,
    apply_threshold,
    gated_mlp_forward,
    init_gated_mlp,
    init_mlp,
    init_mos_fuser,
    mlp_forward,
    mos_fuser_forward,
    predict_batch,
)
from .mos_filter import (
    BalanceReport,
    FilterConfig,
    balance_report,
    filter_by_mos,
    mos_histogram,
    quantize_mos,
)
from .serialize import load_model, save_model
from .synthgen import GenConfig, bayes_posterior, bayes_posteriors, generate, oracle_eer
from .training import TrainConfig, TrainHistory, bce_loss, grad_check, train_model

__version__ = "0.1.0"
