"""Class prediction from a label-indexed trained model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .encoding import apply_preprocessor, legendre_basis
from .errors import ConfigError, DomainError, NumericError, ShapeError
from .model import ModelBundle, density


@dataclass
class Prediction:
    label: int  # in 1..L
    scores: np.ndarray  # normalized |f^l|^2, sums to 1


def predict(bundle: ModelBundle, series: np.ndarray) -> Prediction:
    """Born-rule class scores, normalized to sum 1; ties break to the lowest label.

    The per-class densities are unnormalized likelihoods; under equal class
    priors their ratios (and hence the argmax) are unaffected by the
    normalization applied here for readability.
    """
    n_classes = bundle.mps.n_labels
    if n_classes < 2:
        raise ConfigError("classification needs a model with at least 2 classes")
    series = np.asarray(series, dtype=np.float64)
    if series.shape != (bundle.mps.n_sites,):
        raise ShapeError(
            f"series of length {series.shape} does not match model T={bundle.mps.n_sites}"
        )
    if not np.all(np.isfinite(series)):
        raise NumericError("series must be finite")
    encoded = legendre_basis(apply_preprocessor(bundle.preprocessor, series), bundle.mps.d)
    dens = density(bundle.mps, encoded)
    total = float(dens.sum())
    if total <= 0.0 or not np.isfinite(total):
        raise NumericError("series has zero density under every class")
    scores = dens / total
    return Prediction(label=int(np.argmax(scores)) + 1, scores=scores)


def predict_batch(bundle: ModelBundle, values: np.ndarray) -> list[Prediction]:
    return [predict(bundle, row) for row in np.asarray(values, dtype=np.float64)]


def evaluate_accuracy(bundle: ModelBundle, test: Dataset) -> float:
    """Fraction of correctly predicted labels on a labeled dataset."""
    if test.labels is None:
        raise DomainError("accuracy needs a labeled dataset")
    if test.n_instances == 0:
        raise DomainError("accuracy over an empty dataset is undefined")
    hits = sum(
        predict(bundle, test.values[i]).label == int(test.labels[i])
        for i in range(test.n_instances)
    )
    return hits / test.n_instances
