"""MPS container: construction, canonical forms, Born-rule evaluation, serialization.

A model is an ordered chain of 3-index site tensors ``(chi_left, d, chi_right)``
with unit outer bonds.  Exactly one site additionally carries a label index of
extent ``L`` (``L = 1`` for single-class generative models), stored as axis 2:
``(chi_left, d, L, chi_right)``.  Values are treated as immutable once
constructed; every operation returns new tensors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import TrainConfig, config_from_dict
from .encoding import EncodedSeries, FeatureMap, Preprocessor, feature_map
from .errors import ModelFormatError, ModelVersionError, ShapeError
from .tensor import qr_orthogonalize

FORMAT_VERSION = 1
_MAGIC = b"#seriesmps-model"


@dataclass
class MPS:
    """Site chain with a label index on ``label_site``."""

    sites: list[np.ndarray]
    label_site: int
    ortho_center: int | None = None

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def d(self) -> int:
        return self.sites[0].shape[1]

    @property
    def n_labels(self) -> int:
        return self.sites[self.label_site].shape[2]

    def site_shapes(self) -> list[tuple[int, ...]]:
        return [tuple(s.shape) for s in self.sites]


def random_init(n_sites: int, d: int, chi_init: int, n_labels: int = 1, seed: int = 0) -> MPS:
    """Seeded random MPS, label index on the rightmost site, canonical and normalized."""
    if n_sites < 2:
        raise ValueError("need at least 2 sites")
    if min(d, chi_init, n_labels) < 1:
        raise ValueError("d, chi_init and n_labels must be >= 1")
    rng = np.random.default_rng(seed)
    bonds = [1] + [chi_init] * (n_sites - 1) + [1]
    sites = []
    for t in range(n_sites - 1):
        sites.append(rng.standard_normal((bonds[t], d, bonds[t + 1])))
    sites.append(rng.standard_normal((bonds[n_sites - 1], d, n_labels, 1)))
    mps = MPS(sites=sites, label_site=n_sites - 1, ortho_center=None)
    return canonicalize(mps, n_sites - 1)


def _left_orthogonalize(sites: list[np.ndarray], t: int) -> None:
    """QR site ``t`` into an isometry, absorbing R into site ``t + 1``."""
    a = sites[t]
    rows = int(np.prod(a.shape[:-1]))
    q, r = qr_orthogonalize(a.reshape(rows, a.shape[-1]))
    sites[t] = q.reshape(a.shape[:-1] + (q.shape[1],))
    sites[t + 1] = np.tensordot(r, sites[t + 1], axes=(1, 0))


def _right_orthogonalize(sites: list[np.ndarray], t: int) -> None:
    """QR site ``t`` from the right, absorbing the remainder into site ``t - 1``."""
    a = sites[t]
    cols = int(np.prod(a.shape[1:]))
    q, r = qr_orthogonalize(a.reshape(a.shape[0], cols).T)
    sites[t] = q.T.reshape((q.shape[1],) + a.shape[1:])
    sites[t - 1] = np.tensordot(sites[t - 1], r.T, axes=(sites[t - 1].ndim - 1, 0))


def canonicalize(mps: MPS, center: int) -> MPS:
    """Gauge so every site left of ``center`` is left-orthogonal, every site
    right of it right-orthogonal, and the center holds unit norm."""
    if not 0 <= center < mps.n_sites:
        raise ValueError(f"center {center} out of range")
    sites = list(mps.sites)
    for t in range(center):
        _left_orthogonalize(sites, t)
    for t in range(mps.n_sites - 1, center, -1):
        _right_orthogonalize(sites, t)
    norm = float(np.linalg.norm(sites[center]))
    if norm == 0.0:
        raise ValueError("cannot normalize a zero MPS")
    sites[center] = sites[center] / norm
    return MPS(sites=sites, label_site=mps.label_site, ortho_center=center)


def mps_norm(mps: MPS) -> float:
    """Frobenius norm ``sqrt(<W|W>)`` summed over the label index."""
    env = np.ones((1, 1))
    for a in mps.sites:
        if a.ndim == 3:
            env = np.einsum("ab,asc,bsd->cd", env, a, a, optimize=True)
        else:
            env = np.einsum("ab,aslc,bsld->cd", env, a, a, optimize=True)
    return float(np.sqrt(max(env[0, 0], 0.0)))


def _series_features(mps: MPS, enc) -> np.ndarray:
    feats = enc.values if isinstance(enc, EncodedSeries) else np.asarray(enc, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[0] != mps.n_sites or feats.shape[1] != mps.d:
        raise ShapeError(
            f"encoded series of shape {feats.shape} does not match model "
            f"(T={mps.n_sites}, d={mps.d})"
        )
    return feats


def overlap(mps: MPS, enc) -> np.ndarray:
    """Contract all physical indices with the feature vectors; returns the
    length-``L`` vector ``f^l = W^l . Phi(x)``."""
    feats = _series_features(mps, enc)
    env = np.ones(1)
    lab = None
    for t, a in enumerate(mps.sites):
        if a.ndim == 3:
            m = np.tensordot(feats[t], a, axes=(0, 1))  # (chi_l, chi_r)
            if lab is None:
                env = env @ m
            else:
                lab = lab @ m
        else:
            m = np.tensordot(feats[t], a, axes=(0, 1))  # (chi_l, L, chi_r)
            lab = np.tensordot(env, m, axes=(0, 0))  # (L, chi_r)
    if lab is None:
        return env.reshape(1).copy()
    return lab[:, 0].copy()


def density(mps: MPS, enc) -> np.ndarray:
    """Born-rule (unnormalized per class) density ``|W^l . Phi(x)|^2``."""
    f = overlap(mps, enc)
    return f * f


@dataclass
class ModelBundle:
    """Everything needed to run inference: model, transform, feature map, config."""

    mps: MPS
    preprocessor: Preprocessor
    feature_map: FeatureMap
    train_config: TrainConfig
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        if self.mps.d != self.feature_map.d:
            raise ShapeError(
                f"model d={self.mps.d} does not match feature map d={self.feature_map.d}"
            )


def save_bundle(bundle: ModelBundle, path) -> None:
    """Write the bundle: one-line JSON header, then raw little-endian doubles."""
    mps = bundle.mps
    header = {
        "format_version": bundle.format_version,
        "n_sites": mps.n_sites,
        "d": mps.d,
        "n_labels": mps.n_labels,
        "label_site": mps.label_site,
        "ortho_center": mps.ortho_center,
        "site_shapes": [list(s) for s in mps.site_shapes()],
        "preprocessor": {
            "kind": bundle.preprocessor.kind,
            "median": bundle.preprocessor.median,
            "iqr": bundle.preprocessor.iqr,
            "x_min": bundle.preprocessor.x_min,
            "x_max": bundle.preprocessor.x_max,
            "target": list(bundle.preprocessor.target),
        },
        "feature_map": {"d": bundle.feature_map.d, "grid_size": bundle.feature_map.grid_size},
        "train_config": bundle.train_config.to_dict(),
    }
    blob = bytearray()
    blob += _MAGIC + b"\n"
    blob += json.dumps(header, sort_keys=True).encode("utf-8") + b"\n"
    for site in mps.sites:
        blob += np.ascontiguousarray(site, dtype="<f8").tobytes()
    Path(path).write_bytes(bytes(blob))


def load_bundle(path) -> ModelBundle:
    """Read a bundle written by :func:`save_bundle` (lossless round trip)."""
    raw = Path(path).read_bytes()
    magic, sep, rest = raw.partition(b"\n")
    if not sep or magic != _MAGIC:
        raise ModelFormatError(f"{path}: not a seriesmps model file")
    header_line, sep, payload = rest.partition(b"\n")
    if not sep:
        raise ModelFormatError(f"{path}: missing header")
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"{path}: unreadable header: {exc}") from exc
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelVersionError(
            f"{path}: format version {version!r} is not supported (expected {FORMAT_VERSION})"
        )
    shapes = [tuple(s) for s in header["site_shapes"]]
    expected = sum(int(np.prod(s)) for s in shapes) * 8
    if len(payload) != expected:
        raise ModelFormatError(
            f"{path}: payload has {len(payload)} bytes, expected {expected}"
        )
    sites = []
    offset = 0
    for shape in shapes:
        n = int(np.prod(shape))
        sites.append(
            np.frombuffer(payload, dtype="<f8", count=n, offset=offset)
            .astype(np.float64)
            .reshape(shape)
        )
        offset += n * 8
    mps = MPS(sites=sites, label_site=int(header["label_site"]), ortho_center=header["ortho_center"])
    pre = header["preprocessor"]
    preprocessor = Preprocessor(
        kind=pre["kind"],
        median=pre["median"],
        iqr=pre["iqr"],
        x_min=pre["x_min"],
        x_max=pre["x_max"],
        target=tuple(pre["target"]),
    )
    fmap = feature_map(int(header["feature_map"]["d"]), int(header["feature_map"]["grid_size"]))
    cfg = config_from_dict(header["train_config"])
    return ModelBundle(
        mps=mps,
        preprocessor=preprocessor,
        feature_map=fmap,
        train_config=cfg,
        format_version=version,
    )
