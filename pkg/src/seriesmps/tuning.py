"""Latin-hypercube hyperparameter search with cross-validated objectives."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .classifier import evaluate_accuracy
from .config import TrainConfig
from .data import Dataset, mae, mask_contiguous
from .errors import ConfigError
from .imputer import impute
from .trainer import fit


@dataclass(frozen=True)
class SearchSpace:
    """Inclusive ranges for (d, eta, chi_max); eta is stratified in log space."""

    d_range: tuple[int, int] = (5, 15)
    eta_range: tuple[float, float] = (1e-3, 0.5)
    chi_range: tuple[int, int] = (20, 40)
    n_samples: int = 8
    folds: int = 5
    seed: int = 0

    def validate(self) -> "SearchSpace":
        if self.d_range[0] > self.d_range[1] or self.d_range[0] < 1:
            raise ConfigError("bad d_range")
        if not 0 < self.eta_range[0] <= self.eta_range[1]:
            raise ConfigError("bad eta_range")
        if self.chi_range[0] > self.chi_range[1] or self.chi_range[0] < 1:
            raise ConfigError("bad chi_range")
        if self.n_samples < 1 or self.folds < 1:
            raise ConfigError("n_samples and folds must be >= 1")
        return self


@dataclass
class Trial:
    trial_id: int
    d: int
    eta: float
    chi_max: int
    fold_objectives: list[float] = field(default_factory=list)
    objective: float = math.inf
    failed: bool = False


def latin_hypercube(n_samples: int, n_dims: int, rng: np.random.Generator) -> np.ndarray:
    """(n_samples, n_dims) points in [0, 1): one per stratum per dimension."""
    u = np.empty((n_samples, n_dims))
    for j in range(n_dims):
        u[:, j] = (rng.permutation(n_samples) + rng.random(n_samples)) / n_samples
    return u


def _int_from_unit(u: float, lo: int, hi: int) -> int:
    return min(hi, lo + int(np.floor(u * (hi - lo + 1))))


def _log_from_unit(u: float, lo: float, hi: float) -> float:
    return float(np.exp(np.log(lo) + u * (np.log(hi) - np.log(lo))))


def lhs_search(
    space: SearchSpace, objective: Callable[[dict, int], float]
) -> tuple[dict, list[Trial]]:
    """Evaluate ``n_samples`` LHS configurations, mean objective across folds.

    ``objective(params, fold)`` scores one configuration on one fold (lower is
    better).  A trial raising on any fold is marked failed and skipped when
    picking the argmin; the full trial log is returned alongside the winner.
    """
    space = space.validate()
    rng = np.random.default_rng(space.seed)
    unit = latin_hypercube(space.n_samples, 3, rng)
    trials = []
    for i in range(space.n_samples):
        trial = Trial(
            trial_id=i,
            d=_int_from_unit(unit[i, 0], *space.d_range),
            eta=_log_from_unit(unit[i, 1], *space.eta_range),
            chi_max=_int_from_unit(unit[i, 2], *space.chi_range),
        )
        params = {"d": trial.d, "eta": trial.eta, "chi_max": trial.chi_max}
        try:
            for fold in range(space.folds):
                trial.fold_objectives.append(float(objective(params, fold)))
            trial.objective = float(np.mean(trial.fold_objectives))
            if not np.isfinite(trial.objective):
                trial.failed = True
        except Exception:
            trial.failed = True
        trials.append(trial)
    viable = [t for t in trials if not t.failed]
    if not viable:
        raise RuntimeError("every search trial failed")
    best = min(viable, key=lambda t: t.objective)
    return (
        {"d": best.d, "eta": best.eta, "chi_max": best.chi_max, "objective": best.objective},
        trials,
    )


def trial_log_rows(trials: Sequence[Trial]) -> list[tuple]:
    """(trial_id, d, eta, chi_max, fold, objective) rows for the tuning log."""
    rows = []
    for t in trials:
        if t.fold_objectives:
            for fold, value in enumerate(t.fold_objectives):
                rows.append((t.trial_id, t.d, t.eta, t.chi_max, fold, value))
        else:
            rows.append((t.trial_id, t.d, t.eta, t.chi_max, -1, math.nan))
    return rows


def cv_folds(n: int, n_folds: int, seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """Shuffled contiguous-chunk K-fold partition of ``range(n)``."""
    if n_folds < 1 or n_folds > n:
        raise ConfigError(f"cannot make {n_folds} folds from {n} instances")
    perm = np.random.default_rng(seed).permutation(n)
    chunks = np.array_split(perm, n_folds)
    folds = []
    for i in range(n_folds):
        val = np.sort(chunks[i])
        train = np.sort(np.concatenate([chunks[j] for j in range(n_folds) if j != i]))
        folds.append((train, val))
    return folds


def make_imputation_objective(
    values: np.ndarray,
    base: TrainConfig,
    n_folds: int,
    missing_fractions: Sequence[float] = (0.15, 0.45, 0.85),
    seed: int = 0,
    preprocessing: str = "min-max",
    max_val_instances: int | None = None,
    tune_sweeps: int | None = None,
) -> Callable[[dict, int], float]:
    """Objective: mean imputation MAE over the missing grid on held-out folds."""
    values = np.asarray(values, dtype=np.float64)
    folds = cv_folds(values.shape[0], n_folds, seed)

    def objective(params: dict, fold: int) -> float:
        train_idx, val_idx = folds[fold]
        if max_val_instances is not None:
            val_idx = val_idx[:max_val_instances]
        cfg = base.merged(
            d=params["d"],
            eta=params["eta"],
            chi_max=params.get("chi_max"),
            n_sweeps=tune_sweeps,
        )
        bundle, _ = fit(values[train_idx], cfg, preprocessing=preprocessing)
        from .imputer import from_mps

        base_state = from_mps(bundle.mps, bundle.feature_map)
        val = Dataset(values=values[val_idx])
        errors = []
        for j, frac in enumerate(missing_fractions):
            masked = mask_contiguous(val, frac, seed=seed + 1000 * fold + j)
            for i in range(masked.n_instances):
                row_mask = masked.mask[i]
                result = impute(bundle, masked.values[i], mask=row_mask, base_state=base_state)
                errors.append(mae(val.values[i], result.series, row_mask))
        return float(np.mean(errors))

    return objective


def make_classification_objective(
    values: np.ndarray,
    labels: np.ndarray,
    base: TrainConfig,
    n_folds: int,
    seed: int = 0,
    preprocessing: str = "robust-sigmoid",
    tune_sweeps: int | None = None,
) -> Callable[[dict, int], float]:
    """Objective: held-out misclassification rate (1 - accuracy)."""
    values = np.asarray(values, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    folds = cv_folds(values.shape[0], n_folds, seed)

    def objective(params: dict, fold: int) -> float:
        train_idx, val_idx = folds[fold]
        cfg = base.merged(
            d=params["d"],
            eta=params["eta"],
            chi_max=params.get("chi_max"),
            n_sweeps=tune_sweeps,
        )
        bundle, _ = fit(
            values[train_idx], cfg, labels=labels[train_idx], preprocessing=preprocessing
        )
        test = Dataset(values=values[val_idx], labels=labels[val_idx])
        return 1.0 - evaluate_accuracy(bundle, test)

    return objective
