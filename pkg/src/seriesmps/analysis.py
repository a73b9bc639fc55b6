"""Interpretability: single-site entanglement entropy and conditioned profiles.

Entropies are in nats.  A profile row ``k`` reports the SEE of every site
still unmeasured after conditioning on the first ``k`` series values;
measured positions are NaN, never zero.  The residual curve is the mean SEE
over unmeasured sites per ``k``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .encoding import apply_preprocessor
from .errors import DomainError
from .imputer import RDM, all_rdms, from_mps, project_site
from .model import ModelBundle

EIGENVALUE_TOL = 1e-12


def see(rdm) -> float:
    """Von Neumann entropy ``-sum(lambda ln lambda)`` of a single-site RDM.

    Eigenvalues at or below 1e-12 are excluded (the 0 ln 0 := 0 convention
    made numerically explicit).  Accepts an :class:`RDM` or a bare matrix.
    """
    matrix = rdm.matrix if isinstance(rdm, RDM) else np.asarray(rdm, dtype=np.float64)
    eigvals = np.linalg.eigvalsh((matrix + matrix.T) / 2.0)
    eigvals = eigvals[eigvals > EIGENVALUE_TOL]
    if eigvals.size == 0:
        return 0.0
    return float(-np.sum(eigvals * np.log(eigvals)))


@dataclass
class SEEProfile:
    """Measurement-conditioned entropy table.

    ``entries[k, t]`` is the SEE of site ``t`` after conditioning on the first
    ``k`` values (NaN where ``t < k``); ``residual[k]`` is the row mean over
    unmeasured sites.  ``n_failed`` counts instances skipped due to projection
    errors when averaging over a dataset.
    """

    entries: np.ndarray
    residual: np.ndarray
    n_failed: int = 0


def conditional_see_profile(bundle: ModelBundle, series: np.ndarray) -> SEEProfile:
    """Sequentially condition on ``series`` values and track unmeasured SEE."""
    n_sites = bundle.mps.n_sites
    series = np.asarray(series, dtype=np.float64)
    if series.shape != (n_sites,):
        raise DomainError(f"series must have length {n_sites}")
    encoded = apply_preprocessor(bundle.preprocessor, series)
    state = from_mps(bundle.mps, bundle.feature_map)
    entries = np.full((n_sites, n_sites), np.nan)
    residual = np.empty(n_sites)
    for k in range(n_sites):
        rhos = all_rdms(state)
        for site, rho in rhos.items():
            entries[k, site] = see(rho)
        residual[k] = float(np.mean([entries[k, site] for site in rhos]))
        if k < n_sites - 1:
            state = project_site(state, k, encoded[k])
    return SEEProfile(entries=entries, residual=residual)


def dataset_mean_profile(bundle: ModelBundle, dataset: Dataset) -> SEEProfile:
    """Elementwise mean of per-instance profiles, skipping failing instances."""
    if dataset.n_instances == 0:
        raise DomainError("dataset is empty")
    stacked = []
    residuals = []
    n_failed = 0
    for i in range(dataset.n_instances):
        try:
            profile = conditional_see_profile(bundle, dataset.values[i])
        except Exception:
            n_failed += 1
            continue
        stacked.append(profile.entries)
        residuals.append(profile.residual)
    if not stacked:
        raise DomainError(f"all {dataset.n_instances} instances failed projection")
    return SEEProfile(
        entries=np.mean(np.stack(stacked), axis=0),
        residual=np.mean(np.stack(residuals), axis=0),
        n_failed=n_failed,
    )


def profile_rows(profile: SEEProfile) -> list[tuple[int, int, float]]:
    """Plot-ready (k, site, see) rows, omitting measured (NaN) positions."""
    rows = []
    n_k, n_sites = profile.entries.shape
    for k in range(n_k):
        for site in range(n_sites):
            value = profile.entries[k, site]
            if np.isfinite(value):
                rows.append((k, site, float(value)))
    return rows


def residual_rows(profile: SEEProfile) -> list[tuple[int, float]]:
    return [(k, float(v)) for k, v in enumerate(profile.residual)]
