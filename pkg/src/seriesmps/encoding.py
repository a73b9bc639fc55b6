"""Amplitude encoding: orthonormal Legendre feature maps and pre-processing.

Raw amplitudes are first mapped into the compact encoding domain ``[-1, 1]``
by a fitted :class:`Preprocessor`, then embedded into a ``d``-dimensional
feature vector of orthonormal Legendre polynomial values.  The
:class:`FeatureMap` also owns the fixed quadrature grid on which all
single-site densities, CDFs and their summary statistics are evaluated.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as npleg

from .errors import DegenerateDataError, DomainError, NumericError

ENCODING_DOMAIN = (-1.0, 1.0)
DEFAULT_GRID_SIZE = 512
SIGMOID_IQR_FACTOR = 1.35

# float dust tolerated at the domain boundary before raising
_DOMAIN_SLACK = 1e-9


def legendre_basis(x, d: int) -> np.ndarray:
    """Evaluate the first ``d`` orthonormal Legendre polynomials at ``x``.

    Entry ``i`` (0-based) is ``sqrt((2i+1)/2) * P_i(x)`` with ``P_i`` the
    standard Legendre polynomial, so that ``int_{-1}^{1} b_i b_j dx = delta_ij``.
    Evaluation uses the stable three-term recurrence.  ``x`` may be a scalar
    or an array; the basis index is appended as the trailing axis.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise NumericError("legendre_basis: non-finite input")
    lo, hi = ENCODING_DOMAIN
    if np.any(x < lo - _DOMAIN_SLACK) or np.any(x > hi + _DOMAIN_SLACK):
        raise DomainError("legendre_basis: input outside [-1, 1]")
    x = np.clip(x, lo, hi)
    out = np.empty(x.shape + (d,), dtype=np.float64)
    p_prev = np.ones_like(x)
    out[..., 0] = np.sqrt(0.5) * p_prev
    if d > 1:
        p = x.copy()
        out[..., 1] = np.sqrt(1.5) * p
        for n in range(1, d - 1):
            p_next = ((2 * n + 1) * x * p - n * p_prev) / (n + 1)
            out[..., n + 1] = np.sqrt((2 * (n + 1) + 1) / 2.0) * p_next
            p_prev, p = p, p_next
    return out


class FeatureMap:
    """Legendre feature map of dimension ``d`` with its density grid.

    ``nodes``/``weights`` form a ``grid_size``-node Gauss-Legendre rule over
    ``[-1, 1]``, exact for every polynomial integrand arising from products
    of the basis functions at the dimensions used here.  CDF values at the
    grid are computed from exact antiderivatives of basis-function products,
    assembled once per map; between grid points the CDF is the monotone
    piecewise-linear interpolant through those values.
    """

    def __init__(self, d: int, grid_size: int = DEFAULT_GRID_SIZE):
        if d < 1:
            raise ValueError("d must be >= 1")
        if grid_size < 8:
            raise ValueError("grid_size must be >= 8")
        self.d = int(d)
        self.grid_size = int(grid_size)
        self.domain = ENCODING_DOMAIN
        nodes, weights = npleg.leggauss(self.grid_size)
        self.nodes = nodes
        self.weights = weights
        self.basis = legendre_basis(nodes, d)  # (G, d)
        self.knots = np.concatenate(([self.domain[0]], nodes, [self.domain[1]]))
        self._pair_cdf = None  # (G+2, d, d), built lazily

    def __repr__(self):  # pragma: no cover
        return f"FeatureMap(d={self.d}, grid_size={self.grid_size})"

    def __eq__(self, other):
        return (
            isinstance(other, FeatureMap)
            and self.d == other.d
            and self.grid_size == other.grid_size
        )

    def __hash__(self):
        return hash((self.d, self.grid_size))

    @property
    def pair_cdf(self) -> np.ndarray:
        """``K[m, a, b] = int_{-1}^{knots[m]} b_a(y) b_b(y) dy`` (exact)."""
        if self._pair_cdf is None:
            d = self.d
            coefs = []
            for i in range(d):
                c = np.zeros(i + 1)
                c[i] = np.sqrt((2 * i + 1) / 2.0)
                coefs.append(c)
            K = np.empty((self.knots.size, d, d))
            for a in range(d):
                for b in range(a + 1):
                    anti = npleg.legint(npleg.legmul(coefs[a], coefs[b]), lbnd=-1.0)
                    vals = npleg.legval(self.knots, anti)
                    K[:, a, b] = vals
                    K[:, b, a] = vals
            self._pair_cdf = K
        return self._pair_cdf

    # -- single-site density machinery -------------------------------------

    def pdf_on_grid(self, rho: np.ndarray) -> np.ndarray:
        """Normalized density ``phi(x)^T rho phi(x) / tr(rho)`` at the grid nodes."""
        vals = np.einsum("ga,ab,gb->g", self.basis, rho, self.basis)
        z = float(np.trace(rho))
        if z <= 0.0:
            raise NumericError("density matrix has non-positive trace")
        return np.maximum(vals / z, 0.0)

    def cdf_on_knots(self, rho: np.ndarray) -> np.ndarray:
        """CDF values at ``knots``; clamped monotone with F(-1)=0, F(1)=1."""
        raw = np.tensordot(self.pair_cdf, rho, axes=([1, 2], [0, 1]))
        z = raw[-1]
        if z <= 0.0:
            raise NumericError("density matrix has non-positive total mass")
        f = np.maximum.accumulate(np.clip(raw / z, 0.0, 1.0))
        f[0] = 0.0
        f[-1] = 1.0
        return f

    def cdf_at(self, rho: np.ndarray, x) -> np.ndarray | float:
        """CDF at ``x``: linear interpolation of the knot values."""
        x = np.asarray(x, dtype=np.float64)
        lo, hi = self.domain
        if np.any(x < lo - _DOMAIN_SLACK) or np.any(x > hi + _DOMAIN_SLACK):
            raise DomainError("cdf_at: input outside [-1, 1]")
        f = self.cdf_on_knots(rho)
        out = np.interp(np.clip(x, lo, hi), self.knots, f)
        return float(out) if out.ndim == 0 else out

    def grid_median(self, rho: np.ndarray) -> float:
        """Grid point minimizing ``|F(x) - 1/2|`` (ties toward smaller x)."""
        f_nodes = self.cdf_on_knots(rho)[1:-1]
        return float(self.nodes[int(np.argmin(np.abs(f_nodes - 0.5)))])

    def grid_median_wmad(self, rho: np.ndarray) -> tuple[float, float]:
        """Median plus the weighted median absolute deviation around it.

        Weights are the normalized density values on the grid; the weighted
        median is the smallest deviation at which the cumulative weight
        reaches one half.
        """
        f_nodes = self.cdf_on_knots(rho)[1:-1]
        med = float(self.nodes[int(np.argmin(np.abs(f_nodes - 0.5)))])
        pdf = self.pdf_on_grid(rho)
        total = pdf.sum()
        if total <= 0.0:
            raise NumericError("density vanishes on the whole grid")
        w = pdf / total
        dev = np.abs(self.nodes - med)
        order = np.argsort(dev, kind="stable")
        cum = np.cumsum(w[order])
        idx = int(np.searchsorted(cum, 0.5, side="left"))
        idx = min(idx, len(order) - 1)
        return med, float(dev[order[idx]])

    def grid_mean(self, rho: np.ndarray) -> float:
        """Mean of the normalized density, exact by Gauss-Legendre quadrature."""
        pdf = self.pdf_on_grid(rho)
        return float(np.sum(self.weights * self.nodes * pdf))

    def grid_mode(self, rho: np.ndarray) -> float:
        """Grid point of maximum density (ties toward smaller x)."""
        return float(self.nodes[int(np.argmax(self.pdf_on_grid(rho)))])

    def inverse_cdf(self, rho: np.ndarray, u: float) -> float:
        """Monotone search for ``x`` with ``F(x) = u``, linear between knots.

        Flat CDF segments (zero density) resolve deterministically to their
        left edge.
        """
        if not 0.0 <= u <= 1.0:
            raise DomainError("inverse_cdf: u outside [0, 1]")
        f = self.cdf_on_knots(rho)
        if u <= f[0]:
            return float(self.knots[0])
        if u >= f[-1]:
            return float(self.knots[-1])
        j = int(np.searchsorted(f, u, side="left"))
        f0, f1 = f[j - 1], f[j]
        x0, x1 = self.knots[j - 1], self.knots[j]
        if f1 <= f0:
            return float(x0)
        return float(x0 + (u - f0) / (f1 - f0) * (x1 - x0))


@lru_cache(maxsize=32)
def feature_map(d: int, grid_size: int = DEFAULT_GRID_SIZE) -> FeatureMap:
    """Shared, cached FeatureMap instances (construction is not free)."""
    return FeatureMap(d, grid_size)


# -- pre-processing ---------------------------------------------------------

KIND_MIN_MAX = "min-max"
KIND_ROBUST_SIGMOID = "robust-sigmoid"
_KINDS = (KIND_MIN_MAX, KIND_ROBUST_SIGMOID)


@dataclass(frozen=True)
class Preprocessor:
    """Fitted amplitude transform into the encoding domain.

    ``min-max`` rescales linearly from the training extrema to ``target``.
    ``robust-sigmoid`` first applies the outlier-robust sigmoid
    ``(1 + exp(-(x - median)/(iqr/1.35)))^-1`` with statistics pooled over
    all training entries, then min-max rescales the sigmoid outputs.
    """

    kind: str
    median: float
    iqr: float
    x_min: float  # extrema of the (possibly sigmoid-transformed) training data
    x_max: float
    target: tuple[float, float] = ENCODING_DOMAIN

    def _sigmoid(self, x: np.ndarray) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-(x - self.median) / (self.iqr / SIGMOID_IQR_FACTOR)))


def fit_preprocessor(
    train_values: np.ndarray,
    kind: str = KIND_MIN_MAX,
    target: tuple[float, float] = ENCODING_DOMAIN,
) -> Preprocessor:
    """Fit transform statistics from training data only (pooled entries)."""
    if kind not in _KINDS:
        raise ValueError(f"unknown preprocessor kind {kind!r}; expected one of {_KINDS}")
    x = np.asarray(train_values, dtype=np.float64)
    if x.size == 0:
        raise DegenerateDataError("cannot fit preprocessor on empty data")
    if not np.all(np.isfinite(x)):
        raise NumericError("fit_preprocessor: non-finite training entries")
    a, b = target
    if not a < b:
        raise ValueError("target range must satisfy a < b")
    flat = x.ravel()
    if kind == KIND_ROBUST_SIGMOID:
        med = float(np.median(flat))
        q75, q25 = np.percentile(flat, [75.0, 25.0])
        iqr = float(q75 - q25)
        if iqr <= 0.0:
            raise DegenerateDataError("robust-sigmoid: zero interquartile range")
        stage = 1.0 / (1.0 + np.exp(-(flat - med) / (iqr / SIGMOID_IQR_FACTOR)))
    else:
        med = float(np.median(flat))
        iqr = 0.0
        stage = flat
    x_min = float(stage.min())
    x_max = float(stage.max())
    if x_max <= x_min:
        raise DegenerateDataError("constant data: min-max range is zero")
    return Preprocessor(kind=kind, median=med, iqr=iqr, x_min=x_min, x_max=x_max, target=(float(a), float(b)))


def apply_preprocessor(p: Preprocessor, series: np.ndarray) -> np.ndarray:
    """Transform a series into the target range, repairing out-of-range output.

    Out-of-range values only arise on unseen data; the repair first shifts the
    series up so its minimum is the lower edge, then (if needed) rescales
    linearly so the maximum lands on the upper edge.
    """
    y = np.asarray(series, dtype=np.float64)
    if not np.all(np.isfinite(y)):
        raise NumericError("apply_preprocessor: non-finite input")
    a, b = p.target
    if p.kind == KIND_ROBUST_SIGMOID:
        y = p._sigmoid(y)
    y = (b - a) * (y - p.x_min) / (p.x_max - p.x_min) + a
    y_min = y.min()
    if y_min < a:
        y = y + (a - y_min)
    y_max = y.max()
    if y_max > b:
        y = a + (y - a) * ((b - a) / (y_max - a))
    return y


def invert_preprocessor(p: Preprocessor, series: np.ndarray) -> np.ndarray:
    """Exact functional inverse of the fitted transform (repairs excluded)."""
    y = np.asarray(series, dtype=np.float64)
    if not np.all(np.isfinite(y)):
        raise NumericError("invert_preprocessor: non-finite input")
    a, b = p.target
    stage = (y - a) * (p.x_max - p.x_min) / (b - a) + p.x_min
    if p.kind == KIND_ROBUST_SIGMOID:
        if np.any(stage <= 0.0) or np.any(stage >= 1.0):
            raise DomainError("invert_preprocessor: value at sigmoid saturation")
        return p.median - (p.iqr / SIGMOID_IQR_FACTOR) * np.log(1.0 / stage - 1.0)
    return stage


@dataclass(frozen=True)
class EncodedSeries:
    """A series embedded as one feature vector per time step."""

    values: np.ndarray  # (T, d)
    source: np.ndarray  # (T,) pre-processed amplitudes


def encode_series(x: np.ndarray, d: int) -> EncodedSeries:
    """Row-wise Legendre embedding of a series already in ``[-1, 1]``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("encode_series expects a 1-D series")
    return EncodedSeries(values=legendre_basis(x, d), source=x.copy())


def encoding_error(
    x: float, d: int, statistic: str = "median", grid_size: int = DEFAULT_GRID_SIZE
) -> float:
    """Finite-basis discrepancy ``|x - xhat|`` of a pure-state density.

    Encodes ``x`` as the rank-one density ``rho = phi(x) phi(x)^T`` (trace
    normalized), evaluates the requested central-tendency statistic of the
    resulting conditional density over ``[-1, 1]`` and returns the absolute
    deviation from ``x``.
    """
    fmap = feature_map(d, grid_size)
    phi = legendre_basis(np.float64(x), d)
    rho = np.outer(phi, phi)
    if statistic == "median":
        xhat = fmap.grid_median(rho)
    elif statistic == "mean":
        xhat = fmap.grid_mean(rho)
    elif statistic == "mode":
        xhat = fmap.grid_mode(rho)
    else:
        raise ValueError(f"unknown statistic {statistic!r}")
    return abs(float(x) - xhat)
