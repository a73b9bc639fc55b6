"""seriesmps: matrix-product-state engine for univariate time-series ML.

Learns a joint probability density over fixed-length series and exposes
imputation, classification, generative sampling and entanglement-based
interpretability on top of the single learned model.
"""

from .analysis import SEEProfile, conditional_see_profile, dataset_mean_profile, see
from .classifier import Prediction, evaluate_accuracy, predict, predict_batch
from .config import TrainConfig, read_config_file, write_config_file
from .data import (
    Dataset,
    NTSParams,
    generate_nts,
    load_csv,
    mae,
    mask_contiguous,
    nn1_impute,
    resample_folds,
    save_csv,
)
from .encoding import (
    EncodedSeries,
    FeatureMap,
    Preprocessor,
    apply_preprocessor,
    encode_series,
    encoding_error,
    feature_map,
    fit_preprocessor,
    invert_preprocessor,
    legendre_basis,
)
from .imputer import (
    RDM,
    ConditionedState,
    ImputationResult,
    conditional_cdf,
    from_mps,
    impute,
    marginal_density,
    median_estimate,
    project_site,
    single_site_rdm,
)
from .model import (
    MPS,
    ModelBundle,
    canonicalize,
    density,
    load_bundle,
    mps_norm,
    overlap,
    random_init,
    save_bundle,
)
from .sampler import SamplerConfig, generate_dataset, inverse_cdf_sample, sample_trajectory
from .tensor import TruncationReport, contract, qr_orthogonalize, svd_truncate
from .trainer import TrainReport, bond_gradient, fit, nll_loss, split_bond, tsgo_update
from .tuning import SearchSpace, latin_hypercube, lhs_search

try:
    from importlib.metadata import version as _version

    __version__ = _version("seriesmps")
except Exception:  # pragma: no cover
    __version__ = "0.0.0"

__all__ = [name for name in dir() if not name.startswith("_")]
