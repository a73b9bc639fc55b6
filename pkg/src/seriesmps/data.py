"""Datasets: synthetic generation, CSV I/O, masking, metrics, baselines, resampling.

CSV convention: one instance per row, optional trailing ``label`` column
(signalled by a header), NaN marks a missing value.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainError, ShapeError

TWO_PI = 2.0 * np.pi


@dataclass
class Dataset:
    """N x T amplitude matrix with optional labels and observation mask.

    ``mask`` entries are True where a value is observed; a missing mask means
    fully observed.  Labels are integers in ``1..L``.
    """

    values: np.ndarray
    labels: np.ndarray | None = None
    mask: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ShapeError("dataset values must be an (N, T) matrix")
        n = self.values.shape[0]
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (n,):
                raise ShapeError("labels must be one integer per instance")
            if n and self.labels.min() < 1:
                raise ValueError("labels are 1-based")
        if self.mask is not None:
            self.mask = np.asarray(self.mask, dtype=bool)
            if self.mask.shape != self.values.shape:
                raise ShapeError("mask shape must match values")

    @property
    def n_instances(self) -> int:
        return self.values.shape[0]

    @property
    def length(self) -> int:
        return self.values.shape[1]

    @property
    def n_classes(self) -> int:
        return 0 if self.labels is None else int(self.labels.max(initial=0))


@dataclass(frozen=True)
class NTSParams:
    """Noisy trendy sinusoid family: ``sin(2 pi t / tau + psi) + m t / T + sigma n_t``.

    ``phases=None`` draws the offset uniformly from ``[0, 2 pi)``; a sequence
    restricts it to that finite set.  Periods and slopes are drawn uniformly
    from their choice sets.  Samples are taken at t = 1..T.
    """

    n_instances: int
    length: int
    tau_choices: tuple[float, ...] = (20.0,)
    m_choices: tuple[float, ...] = (3.0,)
    sigma: float = 0.1
    seed: int = 0
    phases: tuple[float, ...] | None = None

    def validate(self) -> "NTSParams":
        if self.n_instances < 0 or self.length < 1:
            raise ValueError("need n_instances >= 0 and length >= 1")
        if min(self.tau_choices) <= 0:
            raise ValueError("periods must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.phases is not None and len(self.phases) == 0:
            raise ValueError("phases set must be non-empty when given")
        return self


def nts_signal(t: np.ndarray, tau: float, m: float, psi: float, length: int) -> np.ndarray:
    """Noise-free trendy sinusoid at (1-based) sample indices ``t``."""
    return np.sin(TWO_PI * t / tau + psi) + m * t / length


def generate_nts(params: NTSParams) -> Dataset:
    """Draw a dataset from the NTS model with a seeded generator.

    Per instance the draw order is fixed: phase, period, slope, then the
    noise vector, so datasets are reproducible.
    """
    params = params.validate()
    rng = np.random.default_rng(params.seed)
    t = np.arange(1, params.length + 1, dtype=np.float64)
    values = np.empty((params.n_instances, params.length))
    for i in range(params.n_instances):
        if params.phases is None:
            psi = rng.uniform(0.0, TWO_PI)
        else:
            psi = params.phases[rng.integers(len(params.phases))]
        tau = params.tau_choices[rng.integers(len(params.tau_choices))]
        m = params.m_choices[rng.integers(len(params.m_choices))]
        noise = rng.standard_normal(params.length)
        values[i] = nts_signal(t, tau, m, psi, params.length) + params.sigma * noise
    return Dataset(values=values)


def mask_contiguous(dataset: Dataset, pct_missing: float, seed: int = 0) -> Dataset:
    """Mark one contiguous block per instance missing.

    The block length is ``pct_missing * T`` rounded half-up; its start is
    uniform over the valid offsets, independently per instance.
    """
    if not 0.0 < pct_missing <= 0.95:
        raise DomainError("pct_missing must lie in (0, 0.95]")
    length = dataset.length
    block = int(np.floor(pct_missing * length + 0.5))
    if block < 1:
        raise DomainError("missing block rounds to zero samples")
    if block >= length:
        raise DomainError(f"missing block of {block} covers the whole series")
    rng = np.random.default_rng(seed)
    mask = np.ones_like(dataset.values, dtype=bool)
    for i in range(dataset.n_instances):
        start = int(rng.integers(0, length - block + 1))
        mask[i, start : start + block] = False
    labels = None if dataset.labels is None else dataset.labels.copy()
    return Dataset(values=dataset.values.copy(), labels=labels, mask=mask)


def mae(actual: np.ndarray, imputed: np.ndarray, mask: np.ndarray) -> float:
    """Mean absolute error over the missing (mask False) entries."""
    actual = np.asarray(actual, dtype=np.float64)
    imputed = np.asarray(imputed, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if actual.shape != imputed.shape or actual.shape != mask.shape:
        raise ShapeError("actual, imputed and mask must share a shape")
    missing = ~mask
    if not np.any(missing):
        raise DomainError("no missing entries to score")
    return float(np.mean(np.abs(actual[missing] - imputed[missing])))


def nn1_impute(train: Dataset, values: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """Copy missing entries from the Euclidean-nearest training instance.

    Distance uses observed positions only; ties resolve to the lowest
    training index.
    """
    if train.n_instances == 0:
        raise DomainError("training set is empty")
    values = np.asarray(values, dtype=np.float64)
    if mask is None:
        mask = np.isfinite(values)
    else:
        mask = np.asarray(mask, dtype=bool)
    if values.shape != (train.length,) or mask.shape != values.shape:
        raise ShapeError("instance does not match the training length")
    diffs = train.values[:, mask] - values[mask]
    best = int(np.argmin(np.einsum("ij,ij->i", diffs, diffs)))
    out = values.copy()
    out[~mask] = train.values[best, ~mask]
    return out


def resample_folds(
    dataset: Dataset,
    n_folds: int,
    train_size: float | int,
    stratified: bool = False,
    seed: int = 0,
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Seeded train/test resamples preserving the requested size ratio.

    ``train_size`` is a count or a fraction of the dataset.  The stratified
    variant keeps per-class proportions within rounding and requires labels.
    """
    n = dataset.n_instances
    if n_folds < 1:
        raise ValueError("n_folds must be >= 1")
    if isinstance(train_size, float) and 0 < train_size < 1:
        n_train = int(round(train_size * n))
    else:
        n_train = int(train_size)
    if not 1 <= n_train < n:
        raise DomainError(f"train size {n_train} must leave a non-empty test set")
    rng = np.random.default_rng(seed)
    splits = []
    if stratified:
        if dataset.labels is None:
            raise DomainError("stratified resampling requires labels")
        frac = n_train / n
        classes = np.unique(dataset.labels)
        for _ in range(n_folds):
            train_idx, test_idx = [], []
            for cls in classes:
                members = np.flatnonzero(dataset.labels == cls)
                k = int(round(frac * members.size))
                if k < 1 or k >= members.size:
                    raise DomainError(
                        f"class {cls} cannot be split with at least one instance per side"
                    )
                perm = rng.permutation(members)
                train_idx.append(perm[:k])
                test_idx.append(perm[k:])
            splits.append(
                (np.sort(np.concatenate(train_idx)), np.sort(np.concatenate(test_idx)))
            )
    else:
        for _ in range(n_folds):
            perm = rng.permutation(n)
            splits.append((np.sort(perm[:n_train]), np.sort(perm[n_train:])))
    return splits


# -- CSV interchange ---------------------------------------------------------


def save_csv(dataset: Dataset, path, header: bool = True) -> None:
    """Write instances as rows; masked-out values are written as NaN."""
    values = dataset.values.copy()
    if dataset.mask is not None:
        values[~dataset.mask] = np.nan
    lines = []
    if header:
        cols = [f"t{j + 1}" for j in range(dataset.length)]
        if dataset.labels is not None:
            cols.append("label")
        lines.append(",".join(cols))
    for i in range(dataset.n_instances):
        row = [format(v, ".17g") for v in values[i]]
        if dataset.labels is not None:
            row.append(str(int(dataset.labels[i])))
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_float(token: str) -> float:
    token = token.strip()
    return float("nan") if token == "" else float(token)


def load_csv(path, labeled: bool | None = None) -> Dataset:
    """Read a dataset CSV; NaN (or empty) cells become missing values.

    A non-numeric first row is treated as a header; a trailing ``label``
    column is picked up from the header or forced with ``labeled=True``.
    """
    text = Path(path).read_text()
    rows = [line for line in text.splitlines() if line.strip()]
    if not rows:
        raise DomainError(f"{path}: empty dataset file")
    header_labeled = False
    first = rows[0].split(",")
    try:
        [_parse_float(tok) for tok in first]
        has_header = False
    except ValueError:
        has_header = True
        header_labeled = first[-1].strip().lower() == "label"
        rows = rows[1:]
    if labeled is None:
        labeled = header_labeled
    parsed = []
    for line in rows:
        parsed.append([_parse_float(tok) for tok in line.split(",")])
    matrix = np.asarray(parsed, dtype=np.float64)
    if matrix.ndim != 2:
        raise DomainError(f"{path}: rows have inconsistent lengths")
    labels = None
    if labeled:
        labels = matrix[:, -1].astype(np.int64)
        matrix = matrix[:, :-1]
    mask = np.isfinite(matrix)
    return Dataset(values=matrix, labels=labels, mask=None if mask.all() else mask)
