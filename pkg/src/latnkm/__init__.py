"""Bayesian CPD tensor-network kernel machines with Laplace-approximate posteriors."""
from .cpd import CpdModel, FeatureMapSpec, FeatureSet, build_features, dense_weights, model_response, partial_response
from .config import ExperimentConfig
from .data import Dataset, gen_cubic, load_csv, split
from .hessian import HessianVariant
from .inference import GammaPosterior, LaplacePosterior, fit_bayes, sample_posterior
from .metrics import MetricReport, evaluate
from .predictive import PredictiveDist, predict, predict_la, predict_lla

__version__ = "0.1.0"

__all__ = [
    "CpdModel", "FeatureMapSpec", "FeatureSet", "build_features", "dense_weights", "model_response", "partial_response",
    "ExperimentConfig", "Dataset", "gen_cubic", "load_csv", "split", "HessianVariant",
    "GammaPosterior", "LaplacePosterior", "fit_bayes", "sample_posterior", "MetricReport", "evaluate",
    "PredictiveDist", "predict", "predict_la", "predict_lla",
]
