"""Two-site sweeping optimizer for the averaged negative log-likelihood.

One sweep is a right-to-left then left-to-right pass of bond updates.  At each
bond the two neighboring sites are merged into a bond tensor ``B`` (axes
``(chi_l, d_i, d_j, chi_r, L)``, the label axis riding along with the bond at
every step), updated by a normalized-gradient step, renormalized, and split
back by truncated SVD with the singular values absorbed toward the next bond.
Left/right environments over the batch are cached so each update costs one
pair of GEMMs rather than a full chain contraction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import TrainConfig
from .encoding import (
    KIND_MIN_MAX,
    Preprocessor,
    apply_preprocessor,
    feature_map,
    fit_preprocessor,
    legendre_basis,
)
from .errors import DomainError, NumericError, ShapeError
from .model import MPS, ModelBundle, random_init
from .tensor import TruncationReport, svd_truncate


class SkipUpdate(Exception):
    """Signal that a bond update cannot proceed (zero or non-finite gradient)."""


@dataclass
class TrainReport:
    loss_per_sweep: np.ndarray
    final_loss: float
    sweeps_run: int
    rejected: tuple[int, ...] = ()


@dataclass
class BondEnvironment:
    """Per-instance contractions of everything outside the current bond."""

    lenv: np.ndarray  # (N, chi_l)
    renv: np.ndarray  # (N, chi_r)
    enc_left: np.ndarray  # (N, d)
    enc_right: np.ndarray  # (N, d)
    labels: np.ndarray  # (N,) class indices in 1..L


def _batch_overlaps(sites, enc: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Own-class overlap ``f^{l_n}(x_n)`` for every instance in the batch."""
    n = enc.shape[0]
    env = np.ones((n, 1))
    lab = None
    for t, a in enumerate(sites):
        m = np.tensordot(enc[:, t, :], a, axes=(1, 1))
        if a.ndim == 3:
            if lab is None:
                env = (env[:, None, :] @ m)[:, 0, :]
            else:
                lab = lab @ m
        else:
            lab = np.einsum("na,nalb->nlb", env, m, optimize=True)
    f = lab[:, :, 0]
    return f[np.arange(n), labels - 1]


def nll_loss(mps: MPS, encoded_batch: np.ndarray, labels: np.ndarray | None = None) -> float:
    """Mean negative log density, each instance scored under its own class.

    Returns ``inf`` when some instance has exactly zero overlap; otherwise
    overlaps are floored at 1e-300 inside the log.
    """
    enc = np.asarray(encoded_batch, dtype=np.float64)
    if enc.ndim != 3 or enc.shape[1] != mps.n_sites or enc.shape[2] != mps.d:
        raise ShapeError(f"batch of shape {enc.shape} does not match model")
    if enc.shape[0] == 0:
        raise ValueError("empty batch")
    labels = _check_labels(labels, enc.shape[0], mps.n_labels)
    f = _batch_overlaps(mps.sites, enc, labels)
    if not np.all(np.isfinite(f)):
        raise NumericError("non-finite overlap in batch")
    if np.any(f == 0.0):
        return float("inf")
    return float(-np.mean(np.log(np.maximum(f * f, 1e-300))))


def _check_labels(labels, n: int, n_classes: int) -> np.ndarray:
    if labels is None:
        if n_classes != 1:
            raise ValueError("labels required for a multi-class model")
        return np.ones(n, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (n,):
        raise ShapeError("labels must be one integer per instance")
    if labels.min() < 1 or labels.max() > n_classes:
        raise ValueError(f"labels must lie in 1..{n_classes}")
    return labels


def _bond_products(env: BondEnvironment) -> tuple[np.ndarray, np.ndarray]:
    n = env.lenv.shape[0]
    x = (env.lenv[:, :, None] * env.enc_left[:, None, :]).reshape(n, -1)
    y = (env.enc_right[:, :, None] * env.renv[:, None, :]).reshape(n, -1)
    return x, y


def _overlaps_from_products(bond, x, y, labels) -> np.ndarray:
    a, s, t, b, n_lab = bond.shape
    bmat = bond.reshape(a * s, t * b, n_lab)
    if n_lab == 1:
        return ((x @ bmat[:, :, 0]) * y).sum(axis=1)
    f = np.empty(x.shape[0])
    for lab in range(n_lab):
        idx = labels == lab + 1
        if np.any(idx):
            f[idx] = ((x[idx] @ bmat[:, :, lab]) * y[idx]).sum(axis=1)
    return f


def _gradient_from_products(bond, x, y, labels, f) -> np.ndarray:
    a, s, t, b, n_lab = bond.shape
    n = x.shape[0]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        coef = -2.0 / (n * f)
    if not np.all(np.isfinite(coef)):
        raise NumericError("bond gradient is non-finite (vanishing overlap)")
    if n_lab == 1:
        grad = (x.T @ (coef[:, None] * y))[:, :, None]
    else:
        grad = np.zeros((a * s, t * b, n_lab))
        for lab in range(n_lab):
            idx = labels == lab + 1
            if np.any(idx):
                grad[:, :, lab] = x[idx].T @ (coef[idx, None] * y[idx])
    if not np.all(np.isfinite(grad)):
        raise NumericError("bond gradient overflowed")
    return grad.reshape(bond.shape)


def bond_gradient(bond: np.ndarray, env: BondEnvironment) -> np.ndarray:
    """Analytic gradient of the batch NLL with respect to the bond tensor.

    Each instance contributes ``-(2/N) v_n / f_n`` on its own label slice,
    where ``v_n`` is the outer product of its four fixed environment legs.
    """
    x, y = _bond_products(env)
    f = _overlaps_from_products(bond, x, y, env.labels)
    return _gradient_from_products(bond, x, y, env.labels, f)


def tsgo_update(bond: np.ndarray, gradient: np.ndarray, eta: float) -> np.ndarray:
    """Steepest-descent step along the unit gradient, then renormalize."""
    gnorm = float(np.linalg.norm(gradient))
    if gnorm == 0.0 or not np.isfinite(gnorm):
        raise SkipUpdate("zero-norm gradient")
    updated = bond - (eta / gnorm) * gradient
    unorm = float(np.linalg.norm(updated))
    if unorm == 0.0 or not np.isfinite(unorm):
        raise SkipUpdate("update annihilated the bond tensor")
    return updated / unorm


def split_bond(
    bond: np.ndarray,
    chi_max: int,
    cutoff: float,
    direction: str,
    label_goes_with: str | None = None,
) -> tuple[np.ndarray, np.ndarray, TruncationReport]:
    """SVD the bond tensor back into two site tensors.

    ``direction`` says where the singular values are absorbed ('left' or
    'right'); ``label_goes_with`` routes the label axis (required for 5-axis
    bonds).  The labeled output site has axes ``(chi, d, L, chi)``.
    """
    if direction not in ("left", "right"):
        raise ValueError("direction must be 'left' or 'right'")
    if bond.ndim == 5:
        if label_goes_with not in ("left", "right"):
            raise ValueError("label_goes_with must be 'left' or 'right' for labeled bonds")
        a, s, t, b, n_lab = bond.shape
        if label_goes_with == "left":
            mat = bond.transpose(0, 1, 4, 2, 3).reshape(a * s * n_lab, t * b)
        else:
            mat = bond.transpose(0, 1, 2, 4, 3).reshape(a * s, t * n_lab * b)
    elif bond.ndim == 4:
        a, s, t, b = bond.shape
        mat = bond.reshape(a * s, t * b)
    else:
        raise ShapeError(f"bond tensor must have 4 or 5 axes, got {bond.ndim}")

    u, sig, v, report = svd_truncate(mat, chi_max, cutoff)
    k = report.kept
    if direction == "left":
        left_mat, right_mat = u * sig, v.T
    else:
        left_mat, right_mat = u, sig[:, None] * v.T

    if bond.ndim == 5 and label_goes_with == "left":
        left = left_mat.reshape(a, s, n_lab, k)
        right = right_mat.reshape(k, t, b)
    elif bond.ndim == 5:
        left = left_mat.reshape(a, s, k)
        right = right_mat.reshape(k, t, n_lab, b)
    else:
        left = left_mat.reshape(a, s, k)
        right = right_mat.reshape(k, t, b)
    return left, right, report


def _merge(left_site: np.ndarray, right_site: np.ndarray) -> np.ndarray:
    """Contract two adjacent sites into a 5-axis bond tensor (a, s, t, b, L)."""
    if left_site.ndim == 4:
        merged = np.tensordot(left_site, right_site, axes=(3, 0))  # (a,s,l,t,b)
        return np.ascontiguousarray(merged.transpose(0, 1, 3, 4, 2))
    if right_site.ndim == 4:
        merged = np.tensordot(left_site, right_site, axes=(2, 0))  # (a,s,t,l,b)
        return np.ascontiguousarray(merged.transpose(0, 1, 2, 4, 3))
    raise ShapeError("one of the merged sites must carry the label axis")


def _advance_left(env: np.ndarray, site: np.ndarray, feats: np.ndarray) -> np.ndarray:
    m = np.tensordot(feats, site, axes=(1, 1))  # (N, chi_l, chi_r)
    return (env[:, None, :] @ m)[:, 0, :]


def _advance_right(env: np.ndarray, site: np.ndarray, feats: np.ndarray) -> np.ndarray:
    m = np.tensordot(feats, site, axes=(1, 1))  # (N, chi_l, chi_r)
    return (m @ env[:, :, None])[:, :, 0]


def _update_bond(bond, env, eta) -> np.ndarray:
    x, y = _bond_products(env)
    try:
        f = _overlaps_from_products(bond, x, y, env.labels)
        grad = _gradient_from_products(bond, x, y, env.labels, f)
        return tsgo_update(bond, grad, eta)
    except (SkipUpdate, NumericError):
        return bond


def _run_sweep(sites, enc, labels, config) -> None:
    """One backward plus one forward pass, updating ``sites`` in place."""
    n_sites = len(sites)
    eta, chi_max, cutoff = config.eta, config.chi_max, config.cutoff

    # backward: label starts on the rightmost site and travels left
    lstack = [np.ones((enc.shape[0], 1))]
    for t in range(n_sites - 1):
        lstack.append(_advance_left(lstack[t], sites[t], enc[:, t, :]))
    renv = np.ones((enc.shape[0], 1))
    for i in range(n_sites - 2, -1, -1):
        bond = _merge(sites[i], sites[i + 1])
        env = BondEnvironment(lstack[i], renv, enc[:, i, :], enc[:, i + 1, :], labels)
        bond = _update_bond(bond, env, eta)
        left, right, _ = split_bond(bond, chi_max, cutoff, "left", "left")
        left /= np.linalg.norm(left)
        sites[i], sites[i + 1] = left, right
        renv = _advance_right(renv, right, enc[:, i + 1, :])

    # forward: label starts on site 0 and travels right
    suffix = [None] * (n_sites + 1)
    suffix[n_sites] = np.ones((enc.shape[0], 1))
    for t in range(n_sites - 1, 1, -1):
        suffix[t] = _advance_right(suffix[t + 1], sites[t], enc[:, t, :])
    lenv = np.ones((enc.shape[0], 1))
    for i in range(n_sites - 1):
        bond = _merge(sites[i], sites[i + 1])
        env = BondEnvironment(lenv, suffix[i + 2], enc[:, i, :], enc[:, i + 1, :], labels)
        bond = _update_bond(bond, env, eta)
        left, right, _ = split_bond(bond, chi_max, cutoff, "right", "right")
        right /= np.linalg.norm(right)
        sites[i], sites[i + 1] = left, right
        lenv = _advance_left(lenv, sites[i], enc[:, i, :])


def fit(
    values: np.ndarray,
    config: TrainConfig,
    labels: np.ndarray | None = None,
    preprocessing: str = KIND_MIN_MAX,
    preprocessor: Preprocessor | None = None,
) -> tuple[ModelBundle, TrainReport]:
    """Train a model on an ``(N, T)`` amplitude matrix.

    Fits the preprocessor on the given data unless one is supplied, encodes
    every instance, and runs ``config.n_sweeps`` sweeps (or stops early once
    the sweep-over-sweep loss improvement drops below
    ``config.loss_tolerance``, when set).  Instances that cannot be encoded
    are dropped before training and reported in ``TrainReport.rejected``.
    """
    config = config.validate()
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 2:
        raise ShapeError("expected an (N, T) matrix with N >= 1, T >= 2")
    n, n_sites = values.shape
    if labels is not None:
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != (n,):
            raise ShapeError("labels must be one integer per instance")
        if labels.min() < 1:
            raise ValueError("labels are 1-based")
        n_classes = int(labels.max())
    else:
        labels = np.ones(n, dtype=np.int64)
        n_classes = 1

    if preprocessor is None:
        preprocessor = fit_preprocessor(values, preprocessing)

    transformed = np.empty_like(values)
    rejected = []
    keep = np.ones(n, dtype=bool)
    for idx in range(n):
        row = values[idx]
        if not np.all(np.isfinite(row)):
            rejected.append(idx)
            keep[idx] = False
            continue
        transformed[idx] = apply_preprocessor(preprocessor, row)
    if not np.any(keep):
        raise DomainError(f"all instances failed encoding (first bad index {rejected[0]})")
    transformed = transformed[keep]
    labels = labels[keep]

    enc = legendre_basis(transformed, config.d)
    mps = random_init(n_sites, config.d, config.chi_init, n_classes, config.seed)
    sites = list(mps.sites)

    losses = []
    for _ in range(config.n_sweeps):
        _run_sweep(sites, enc, labels, config)
        current = MPS(sites=list(sites), label_site=n_sites - 1, ortho_center=n_sites - 1)
        losses.append(nll_loss(current, enc, labels))
        if (
            config.loss_tolerance is not None
            and len(losses) >= 2
            and losses[-2] - losses[-1] < config.loss_tolerance
        ):
            break

    final = MPS(sites=sites, label_site=n_sites - 1, ortho_center=n_sites - 1)
    bundle = ModelBundle(
        mps=final,
        preprocessor=preprocessor,
        feature_map=feature_map(config.d, config.grid_size),
        train_config=config,
    )
    report = TrainReport(
        loss_per_sweep=np.asarray(losses),
        final_loss=losses[-1] if losses else float("nan"),
        sweeps_run=len(losses),
        rejected=tuple(rejected),
    )
    return bundle, report
