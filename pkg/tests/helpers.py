"""Independent oracles used across the test suite.

Everything here recomputes quantities by brute force (dense tensors, explicit
loops, fine grids) without reusing the library's contraction or quadrature
paths, so agreement is evidence rather than tautology.
"""

import numpy as np
from numpy.polynomial import legendre as npleg


def loop_contract(a, b, pairs):
    """Reference tensor contraction by explicit loops over all indices."""
    a = np.asarray(a)
    b = np.asarray(b)
    ax_a = [p[0] for p in pairs]
    ax_b = [p[1] for p in pairs]
    free_a = [i for i in range(a.ndim) if i not in ax_a]
    free_b = [i for i in range(b.ndim) if i not in ax_b]
    out_shape = [a.shape[i] for i in free_a] + [b.shape[i] for i in free_b]
    out = np.zeros(out_shape if out_shape else ())
    for idx_a in np.ndindex(*a.shape):
        for idx_b in np.ndindex(*b.shape):
            if any(idx_a[i] != idx_b[j] for i, j in pairs):
                continue
            pos = tuple(idx_a[i] for i in free_a) + tuple(idx_b[i] for i in free_b)
            out[pos] += a[idx_a] * b[idx_b]
    return out


def dense_weight_tensor(mps):
    """Contract the whole chain into an array of shape (d,)*T + (L,)."""
    acc = mps.sites[0]
    for site in mps.sites[1:]:
        acc = np.tensordot(acc, site, axes=(acc.ndim - 1, 0))
    acc = acc[0, ..., 0]  # strip the unit outer bonds
    # move the label axis (after the physical index of label_site) to the end
    label_axis = mps.label_site + 1
    return np.moveaxis(acc, label_axis, -1)


def dense_overlap(mps, feats):
    """Overlap from the dense tensor, one feature contraction per site."""
    w = dense_weight_tensor(mps)
    for t in range(mps.n_sites):
        w = np.tensordot(feats[t], w, axes=(0, 0))
    return w  # (L,)


def legendre_reference(x, d):
    """Orthonormal Legendre values via numpy's Legendre series evaluation."""
    out = np.empty(d)
    for i in range(d):
        coef = np.zeros(i + 1)
        coef[i] = np.sqrt((2 * i + 1) / 2.0)
        out[i] = npleg.legval(x, coef)
    return out


def dense_grid_cdf(rho, d, n_points=100_001):
    """Cumulative trapezoid CDF of phi^T rho phi on a dense uniform grid."""
    xs = np.linspace(-1.0, 1.0, n_points)
    vals = np.zeros((n_points, d))
    for i in range(d):
        coef = np.zeros(i + 1)
        coef[i] = np.sqrt((2 * i + 1) / 2.0)
        vals[:, i] = npleg.legval(xs, coef)
    pdf = np.einsum("ga,ab,gb->g", vals, rho, vals)
    steps = np.diff(xs)
    cum = np.concatenate(([0.0], np.cumsum((pdf[1:] + pdf[:-1]) / 2.0 * steps)))
    return xs, pdf / cum[-1], cum / cum[-1]


def quadrature_grid(n_nodes=8):
    return npleg.leggauss(n_nodes)


def dense_joint_density_integral(mps, n_nodes=8):
    """Integral of the Born density over all variables by tensor-grid quadrature."""
    nodes, weights = quadrature_grid(n_nodes)
    d = mps.d
    basis = np.zeros((n_nodes, d))
    for i in range(d):
        coef = np.zeros(i + 1)
        coef[i] = np.sqrt((2 * i + 1) / 2.0)
        basis[:, i] = npleg.legval(nodes, coef)
    total = 0.0
    t_count = mps.n_sites
    for idx in np.ndindex(*([n_nodes] * t_count)):
        feats = [basis[g] for g in idx]
        f = dense_overlap(mps, feats)
        total += np.prod([weights[g] for g in idx]) * float(np.sum(f * f))
    return total


def dense_partial_trace(mps, site):
    """RDM of one site from the dense tensor (L = 1 models)."""
    w = dense_weight_tensor(mps)[..., 0]
    axes = list(range(w.ndim))
    other = [ax for ax in axes if ax != site]
    return np.tensordot(w, w, axes=(other, other))


def dense_loss_of_bond(sites, bond_index, bond, enc_batch, labels):
    """Batch NLL as a function of one 5-axis bond tensor, via dense rebuild."""
    merged = []
    for t, site in enumerate(sites):
        if t == bond_index:
            merged.append(("bond", bond))
        elif t == bond_index + 1:
            continue
        else:
            merged.append(("site", site))
    total = 0.0
    n = enc_batch.shape[0]
    for num in range(n):
        env = np.ones(1)
        lab = None
        t_phys = 0
        for kind, arr in merged:
            if kind == "site":
                v = enc_batch[num, t_phys]
                m = np.tensordot(v, arr, axes=(0, 1))
                if arr.ndim == 3:
                    if lab is None:
                        env = env @ m
                    else:
                        lab = lab @ m
                else:
                    lab = np.tensordot(env, m, axes=(0, 0))
                t_phys += 1
            else:
                v1 = enc_batch[num, t_phys]
                v2 = enc_batch[num, t_phys + 1]
                m = np.einsum("s,astbl,t->abl", v1, arr, v2)
                lab = np.tensordot(env, m, axes=(0, 0))
                t_phys += 2
        f = lab[int(labels[num]) - 1, 0]
        total += -np.log(f * f)
    return total / n
