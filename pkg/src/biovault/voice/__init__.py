"""Voice pipeline: framed spectral features, GMM speaker models, enrollment,
authentication, and mean-only linear adaptation."""

from .audio import AudioSignal, load_wav, save_wav
from .features import (
    FeatureConfig,
    FeatureVector,
    analyze,
    delta_features,
    dct_matrix,
    feature_matrix,
    formants,
    frame_window,
    hamming_window,
    mel_filterbank,
    mfcc,
    pitch_period,
    power_spectrum,
    spectral_features,
    spectral_moments,
)
from .gmm import (
    EmFitInfo,
    GmmModel,
    em_fit,
    em_fit_detailed,
    em_iterate,
    gmm_log_likelihood,
    responsibilities,
    select_k,
)
from .speaker import (
    AuthConfig,
    AuthDecision,
    EnrollmentDb,
    KPolicy,
    UserEntry,
    adapt_mllr,
    adapt_mllr_features,
    authenticate,
    enroll,
    score,
)

__all__ = [
    "AudioSignal",
    "AuthConfig",
    "AuthDecision",
    "EmFitInfo",
    "EnrollmentDb",
    "FeatureConfig",
    "FeatureVector",
    "GmmModel",
    "KPolicy",
    "UserEntry",
    "adapt_mllr",
    "adapt_mllr_features",
    "analyze",
    "authenticate",
    "dct_matrix",
    "delta_features",
    "em_fit",
    "em_fit_detailed",
    "em_iterate",
    "enroll",
    "feature_matrix",
    "formants",
    "frame_window",
    "gmm_log_likelihood",
    "hamming_window",
    "load_wav",
    "mel_filterbank",
    "mfcc",
    "pitch_period",
    "power_spectrum",
    "responsibilities",
    "save_wav",
    "score",
    "select_k",
    "spectral_features",
    "spectral_moments",
]
