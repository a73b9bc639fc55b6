"""Conditioning a trained model on observed values and imputing the rest.

The conditioned model is held as a :class:`ConditionedState`: the chain of
still-unmeasured sites, kept in canonical gauge with the norm on ``center``.
Projecting a site contracts its feature vector, rescales by ``1/sqrt(P)`` so
the state stays normalized, and absorbs the resulting bond matrix into a
neighboring unmeasured site.  States are value-like: operations return new
states that share unchanged tensors, so many imputations can run concurrently
against one read-only model.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .encoding import (
    FeatureMap,
    KIND_MIN_MAX,
    apply_preprocessor,
    invert_preprocessor,
    legendre_basis,
)
from .errors import ConfigError, DomainError, NumericError, ProjectionError, ShapeError
from .model import MPS, ModelBundle
from .tensor import qr_orthogonalize

PROBABILITY_FLOOR = 1e-14


@dataclass(frozen=True)
class RDM:
    """Single-site reduced density matrix plus the feature map it lives in."""

    matrix: np.ndarray
    fmap: FeatureMap

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ShapeError("RDM must be a square matrix")
        if m.shape[0] != self.fmap.d:
            raise ShapeError("RDM dimension does not match the feature map")
        object.__setattr__(self, "matrix", (m + m.T) / 2.0)


@dataclass(frozen=True)
class ConditionedState:
    """Canonical chain over the not-yet-measured sites of a model."""

    tensors: tuple[np.ndarray, ...]
    times: tuple[int, ...]  # original site index of each chain position
    center: int
    fmap: FeatureMap
    log_density: float = 0.0
    tail: float = 1.0  # scalar left over once every site has been projected

    @property
    def remaining(self) -> tuple[int, ...]:
        return self.times


def from_mps(mps: MPS, fmap: FeatureMap) -> ConditionedState:
    """Start a conditioning session from a (single-class) trained model."""
    if mps.n_labels != 1:
        raise ConfigError("conditioning requires a single-class model (L = 1)")
    from .model import canonicalize

    canon = canonicalize(mps, 0)
    tensors = []
    for t, site in enumerate(canon.sites):
        tensors.append(site[:, :, 0, :] if site.ndim == 4 else site)
    return ConditionedState(
        tensors=tuple(tensors),
        times=tuple(range(mps.n_sites)),
        center=0,
        fmap=fmap,
    )


def _left_step(tensors: list[np.ndarray], pos: int) -> None:
    a = tensors[pos]
    q, r = qr_orthogonalize(a.reshape(a.shape[0] * a.shape[1], a.shape[2]))
    tensors[pos] = q.reshape(a.shape[0], a.shape[1], q.shape[1])
    tensors[pos + 1] = np.tensordot(r, tensors[pos + 1], axes=(1, 0))


def _right_step(tensors: list[np.ndarray], pos: int) -> None:
    a = tensors[pos]
    q, r = qr_orthogonalize(a.reshape(a.shape[0], a.shape[1] * a.shape[2]).T)
    tensors[pos] = q.T.reshape(q.shape[1], a.shape[1], a.shape[2])
    tensors[pos - 1] = np.tensordot(tensors[pos - 1], r.T, axes=(2, 0))


def move_center(state: ConditionedState, pos: int) -> ConditionedState:
    """Shift the orthogonality center to chain position ``pos``."""
    if not 0 <= pos < len(state.tensors):
        raise ValueError(f"position {pos} out of range")
    if pos == state.center:
        return state
    tensors = list(state.tensors)
    c = state.center
    while c < pos:
        _left_step(tensors, c)
        c += 1
    while c > pos:
        _right_step(tensors, c)
        c -= 1
    return replace(state, tensors=tuple(tensors), center=pos)


def _position_of(state: ConditionedState, site: int) -> int:
    try:
        return state.times.index(site)
    except ValueError:
        raise DomainError(f"site {site} is not an unmeasured site of this state") from None


def _center_rdm(tensor: np.ndarray) -> np.ndarray:
    rho = np.einsum("asb,atb->st", tensor, tensor, optimize=True)
    return (rho + rho.T) / 2.0


def single_site_rdm(state: ConditionedState, site: int) -> RDM:
    """RDM of ``site`` under the current conditional model.

    Valid as a plain partial trace because the basis satisfies
    ``int phi phi^T dx = I``: tracing a site is contracting its physical index
    pair directly.
    """
    pos = _position_of(state, site)
    centered = move_center(state, pos)
    return RDM(matrix=_center_rdm(centered.tensors[pos]), fmap=state.fmap)


def marginal_density(state: ConditionedState, site: int, x: float) -> float:
    """``P(x) = phi(x)^T rho_site phi(x)`` for the current conditional model."""
    rho = single_site_rdm(state, site).matrix
    phi = legendre_basis(np.float64(x), state.fmap.d)
    return float(phi @ rho @ phi)


def project_site(state: ConditionedState, site: int, x: float) -> ConditionedState:
    """Condition the state on ``site = x``; the chain shrinks by one site."""
    pos = _position_of(state, site)
    centered = move_center(state, pos)
    tensors = list(centered.tensors)
    c_tensor = tensors[pos]
    phi = legendre_basis(np.float64(x), state.fmap.d)
    rho = _center_rdm(c_tensor)
    prob = float(phi @ rho @ phi)
    if prob < PROBABILITY_FLOOR:
        raise ProjectionError(site, prob)
    bond = np.tensordot(phi, c_tensor, axes=(0, 1)) / np.sqrt(prob)  # (chiL, chiR)
    times = list(centered.times)
    if pos + 1 < len(tensors):
        tensors[pos + 1] = np.tensordot(bond, tensors[pos + 1], axes=(1, 0))
        new_center = pos
    elif pos - 1 >= 0:
        tensors[pos - 1] = np.tensordot(tensors[pos - 1], bond, axes=(2, 0))
        new_center = pos - 1
    else:
        return replace(
            state,
            tensors=(),
            times=(),
            center=-1,
            log_density=state.log_density + float(np.log(prob)),
            tail=state.tail * float(bond[0, 0]),
        )
    del tensors[pos]
    del times[pos]
    return replace(
        state,
        tensors=tuple(tensors),
        times=tuple(times),
        center=new_center,
        log_density=state.log_density + float(np.log(prob)),
    )


def state_norm(state: ConditionedState) -> float:
    """Exact norm of the conditioned chain (|tail| once fully projected)."""
    if not state.tensors:
        return abs(state.tail)
    env = np.ones((1, 1))
    for a in state.tensors:
        env = np.einsum("ab,asc,bsd->cd", env, a, a, optimize=True)
    return float(np.sqrt(max(env[0, 0], 0.0)))


def all_rdms(state: ConditionedState) -> dict[int, np.ndarray]:
    """RDM matrices of every unmeasured site, via one center sweep."""
    out = {}
    current = move_center(state, 0)
    tensors = list(current.tensors)
    for pos, site in enumerate(current.times):
        out[site] = _center_rdm(tensors[pos])
        if pos + 1 < len(tensors):
            _left_step(tensors, pos)
    return out


def conditional_cdf(rdm: RDM, x) -> float:
    """Normalized CDF ``F(x)`` of the RDM's conditional density."""
    return rdm.fmap.cdf_at(rdm.matrix, x)


def median_estimate(rdm: RDM) -> tuple[float, float]:
    """Conditional median (grid argmin of ``|F - 1/2|``) and its WMAD."""
    return rdm.fmap.grid_median_wmad(rdm.matrix)


@dataclass
class ImputationResult:
    """Completed series in the data domain plus per-site diagnostics.

    ``uncertainty`` holds the WMAD half-width at imputed positions (NaN
    elsewhere).  It lives in the data domain for the affine min-max transform;
    for robust-sigmoid pipelines it stays in the encoding domain and
    ``uncertainty_in_data_domain`` is False.  ``conditional_log_density``
    accumulates ``log P`` over every projection performed (observed values
    first, then imputed ones).
    """

    series: np.ndarray
    imputed_mask: np.ndarray
    uncertainty: np.ndarray
    uncertainty_in_data_domain: bool
    conditional_log_density: float


def impute(
    bundle: ModelBundle,
    values: np.ndarray,
    mask: np.ndarray | None = None,
    base_state: ConditionedState | None = None,
) -> ImputationResult:
    """Impute the missing entries of one series.

    ``values`` is in the original data domain; missing entries are NaN (or
    flagged False in ``mask``, where True means observed).  Observed sites are
    projected first, in time order; missing sites are then imputed strictly
    from earliest to latest via the conditional median, projecting each
    estimate before moving on.
    """
    values = np.asarray(values, dtype=np.float64)
    n_sites = bundle.mps.n_sites
    if values.shape != (n_sites,):
        raise ShapeError(f"series of length {values.shape} does not match model T={n_sites}")
    if mask is None:
        mask = np.isfinite(values)
    else:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != values.shape:
            raise ShapeError("mask shape must match the series")
    if not np.all(np.isfinite(values[mask])):
        raise NumericError("observed values must be finite")
    observed = np.flatnonzero(mask)
    missing = np.flatnonzero(~mask)

    if missing.size == 0:
        return ImputationResult(
            series=values.copy(),
            imputed_mask=np.zeros(n_sites, dtype=bool),
            uncertainty=np.full(n_sites, np.nan),
            uncertainty_in_data_domain=True,
            conditional_log_density=0.0,
        )
    if observed.size == 0:
        raise DomainError("fully-missing series is unsupported: at least one value must be observed")

    pre = bundle.preprocessor
    obs_encoded = apply_preprocessor(pre, values[observed])

    state = base_state if base_state is not None else from_mps(bundle.mps, bundle.feature_map)
    for idx, site in enumerate(observed):
        state = project_site(state, int(site), obs_encoded[idx])

    estimates = np.empty(missing.size)
    wmads = np.empty(missing.size)
    for idx, site in enumerate(missing):
        pos = _position_of(state, int(site))
        state = move_center(state, pos)
        rho = _center_rdm(state.tensors[pos])
        x_star, wmad = state.fmap.grid_median_wmad(rho)
        estimates[idx] = x_star
        wmads[idx] = wmad
        state = project_site(state, int(site), x_star)

    series = values.copy()
    series[missing] = invert_preprocessor(pre, estimates)
    uncertainty = np.full(n_sites, np.nan)
    a, b = pre.target
    if pre.kind == KIND_MIN_MAX:
        scale = (pre.x_max - pre.x_min) / (b - a)
        uncertainty[missing] = wmads * scale
        in_data_domain = True
    else:
        uncertainty[missing] = wmads
        in_data_domain = False
    imputed_mask = np.zeros(n_sites, dtype=bool)
    imputed_mask[missing] = True
    return ImputationResult(
        series=series,
        imputed_mask=imputed_mask,
        uncertainty=uncertainty,
        uncertainty_in_data_domain=in_data_domain,
        conditional_log_density=state.log_density,
    )
