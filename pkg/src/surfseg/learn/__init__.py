from .voi import (AdaBoostModel, VOIError, detect_voi, train_voi,
                  training_windows, truth_voi)
from .naf import (NAFModel, PatchSample, extract_patch_samples, naf_distance,
                  sample_patch_centers,
                  naf_probability_map, train_naf)
from .features import FEATURE_NAMES, N_FEATURES, extract_features
from .rf import (ClusteredRFModel, RFError, rf_node_probabilities,
                 train_clustered_rf)
from .store import (load_naf_model, load_rf_model, load_voi_model,
                    save_naf_model, save_rf_model, save_voi_model)

__all__ = [
    "load_naf_model", "load_rf_model", "load_voi_model",
    "save_naf_model", "save_rf_model", "save_voi_model",
    "AdaBoostModel", "VOIError", "detect_voi", "train_voi", "truth_voi",
    "NAFModel", "PatchSample", "extract_patch_samples", "naf_distance",
    "sample_patch_centers", "training_windows",
    "naf_probability_map", "train_naf",
    "FEATURE_NAMES", "N_FEATURES", "extract_features",
    "ClusteredRFModel", "RFError", "rf_node_probabilities",
    "train_clustered_rf",
]
