"""Variable-bandwidth Gaussian kernels and the discrete generator cascade.

The kernel between points i and j is exp(-r_ij^2 / (4 eps rho_i rho_j)).
Row sums divided by rho^d estimate the sampling density; a power of that
estimate removes sampling bias from the kernel; and a diagonal conjugation
turns the resulting Markov generator into a symmetric matrix whose
eigenvectors are recovered by an un-conjugation.

Matrices are dense ndarrays when no support pattern is given and CSR when
the kernel is truncated to a neighbor support. Evaluating the kernel on a
symmetric support pattern yields an exactly symmetric matrix because each
(i, j) and (j, i) entry is computed by identical arithmetic.
"""

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .neighbors import pair_sq_dists

_FORMULATIONS = ("left", "right", "symmetric")


@dataclass(frozen=True)
class ShapeConstants:
    """Moments of the kernel shape function h and of its square.

    ``m0`` and ``m2`` are the zeroth and (half) second moments of h, ``m``
    their ratio, which multiplies the generator prefactor; ``m0_hat`` and
    ``m2_hat`` are the corresponding moments of h^2 entering variance bounds.
    """

    m0: float
    m2: float
    m: float
    m0_hat: float
    m2_hat: float


def gaussian_shape_constants(d):
    """Closed-form shape moments of h(u) = exp(-u/4) in dimension d.

    With this shape, int h(|z|^2) dz = (4 pi)^(d/2) and
    (1/2) int z1^2 h(|z|^2) dz = (4 pi)^(d/2) as well, so m = m2/m0 = 1.
    For h^2 both plain moments equal (2 pi)^(d/2).
    """
    m0 = (4.0 * np.pi) ** (d / 2.0)
    m2 = m0
    m0_hat = (2.0 * np.pi) ** (d / 2.0)
    m2_hat = m0_hat
    return ShapeConstants(m0=m0, m2=m2, m=m2 / m0, m0_hat=m0_hat, m2_hat=m2_hat)


@dataclass(frozen=True)
class GeneratorMatrices:
    """Everything produced by the generator cascade at one epsilon.

    ``P``, ``D`` and ``S`` are the diagonals of the bandwidth, degree and
    conjugation matrices (S = P * sqrt(D)). ``Lhat`` is the symmetric
    conjugated generator; the Markov generator itself is
    diag(1/(eps P^2)) (diag(1/D) Kalpha - I).
    """

    eps: float
    alpha: float
    K: object
    qS: np.ndarray
    Kalpha: object
    q_eps_alpha: np.ndarray
    Lhat: object
    P: np.ndarray
    D: np.ndarray
    S: np.ndarray


def kernel_matrix(cloud, rho, eps, support=None):
    """Variable-bandwidth Gaussian kernel K_ij = exp(-r_ij^2/(4 eps rho_i rho_j)).

    ``support`` is an optional symmetric boolean CSR pattern (diagonal
    included); without it the full dense matrix is computed. Entries that
    underflow to zero are dropped from the sparse structure so that
    connectivity checks see the numerical graph.
    """
    pts = cloud.points
    rho = np.asarray(rho, dtype=float)
    if support is None:
        k = _dense_sq_dists(pts)
        k /= -4.0 * eps * np.outer(rho, rho)
        np.exp(k, out=k)
        return k
    pattern = support.tocoo()
    rows, cols = pattern.row, pattern.col
    vals = pair_sq_dists(pts, rows, cols)
    vals /= -4.0 * eps * rho[rows] * rho[cols]
    np.exp(vals, out=vals)
    out = sparse.csr_matrix((vals, (rows, cols)), shape=support.shape)
    out.eliminate_zeros()
    return out


def _dense_sq_dists(pts, block=256):
    # differences, not the a^2+b^2-2ab identity: keeps the matrix exactly
    # symmetric and the diagonal exactly zero
    n = pts.shape[0]
    out = np.empty((n, n))
    for start in range(0, n, block):
        stop = min(start + block, n)
        diff = pts[start:stop, None, :] - pts[None, :, :]
        out[start:stop] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


def _row_sums(mat):
    return np.asarray(mat.sum(axis=1)).ravel()


def qS_normalization(K, rho, d):
    """Density estimate from kernel row sums: qS_i = sum_j K_ij / rho_i^d."""
    return _row_sums(K) / np.asarray(rho, dtype=float) ** d


def alpha_normalize(K, qS, alpha):
    """Divide K_ij by (qS_i qS_j)^alpha; returns (Kalpha, its row sums)."""
    w = np.asarray(qS, dtype=float) ** (-alpha)
    if sparse.issparse(K):
        ka = K.tocsr(copy=True)
        ka.data = ka.data * np.repeat(w, np.diff(ka.indptr)) * w[ka.indices]
    else:
        ka = K * np.outer(w, w)
    return ka, _row_sums(ka)


def generator_symmetric(Kalpha, q_eps_alpha, rho, eps, alpha=0.0, K=None, qS=None):
    """Conjugated symmetric generator Lhat = (S^-1 Kalpha S^-1 - P^-2)/eps.

    The conjugation diagonal is S = rho * sqrt(q_eps_alpha); eigenvectors of
    the Markov generator are recovered as S^-1 times eigenvectors of Lhat.
    """
    rho = np.asarray(rho, dtype=float)
    s = rho * np.sqrt(q_eps_alpha)
    inv_s = 1.0 / s
    shift = 1.0 / rho**2
    if sparse.issparse(Kalpha):
        lhat = Kalpha.tocsr(copy=True)
        lhat.data = lhat.data * np.repeat(inv_s, np.diff(lhat.indptr)) * inv_s[lhat.indices]
        lhat.setdiag(lhat.diagonal() - shift)
        lhat.data /= eps
    else:
        lhat = Kalpha * np.outer(inv_s, inv_s)
        np.fill_diagonal(lhat, lhat.diagonal() - shift)
        lhat /= eps
    return GeneratorMatrices(eps=eps, alpha=alpha, K=K, qS=qS, Kalpha=Kalpha,
                             q_eps_alpha=q_eps_alpha, Lhat=lhat, P=rho,
                             D=q_eps_alpha, S=s)


def build_generator(cloud, rho, eps, alpha, d=None, support=None):
    """Run kernel -> density -> alpha -> conjugation for one epsilon."""
    if d is None:
        d = cloud.intrinsic_dim
    if d is None:
        raise ValueError("intrinsic dimension unknown; pass d explicitly")
    k = kernel_matrix(cloud, rho, eps, support=support)
    qs = qS_normalization(k, rho, d)
    kalpha, q_eps_alpha = alpha_normalize(k, qs, alpha)
    return generator_symmetric(kalpha, q_eps_alpha, rho, eps, alpha=alpha, K=k, qS=qs)


def generator_dense_nonsymmetric(gm):
    """Markov generator L = diag(1/(eps P^2)) (diag(1/D) Kalpha - I), densely.

    For verification on small instances: L is similar to Lhat via S.
    """
    ka = gm.Kalpha.toarray() if sparse.issparse(gm.Kalpha) else np.array(gm.Kalpha)
    lout = ka / gm.D[:, None]
    np.fill_diagonal(lout, lout.diagonal() - 1.0)
    lout /= gm.eps * gm.P[:, None] ** 2
    return lout


def apply_generator(cloud, rho, eps, alpha, formulation, f, d=None, support=None):
    """Apply one kernel-ratio generator estimate to a function sample.

    ``formulation`` picks where the bandwidth enters the kernel argument:
    'left' uses eps rho_i, 'right' uses eps rho_j, and 'symmetric' uses
    eps rho_i rho_j. The estimate at point i is

        (sum_j K_ij w_j f_j / sum_j K_ij w_j - f_i) / (eps m rho_i^p)

    with p = 1 for left/right and p = 2 for symmetric. The weights w_j are
    identically one except in the symmetric formulation with alpha != 0,
    where w_j = qS_j^(-alpha) removes sampling-density bias (the i-side
    factor cancels in the ratio).
    """
    if formulation not in _FORMULATIONS:
        raise ValueError(f"formulation must be one of {_FORMULATIONS}")
    if alpha != 0.0 and formulation != "symmetric":
        raise ValueError("alpha-normalization applies to the symmetric formulation only")
    if d is None:
        d = cloud.intrinsic_dim
    if alpha != 0.0 and d is None:
        raise ValueError("alpha-normalization needs the intrinsic dimension")
    pts = cloud.points
    rho = np.asarray(rho, dtype=float)
    f = np.asarray(f, dtype=float)
    m = gaussian_shape_constants(d if d is not None else 1).m
    if support is None:
        num, den = _ratio_dense(pts, rho, eps, alpha, formulation, f, d)
    else:
        num, den = _ratio_sparse(pts, rho, eps, alpha, formulation, f, d, support)
    p = 2 if formulation == "symmetric" else 1
    return (num / den - f) / (eps * m * rho**p)


def _kernel_args(r2, rho, eps, formulation, rows, cols):
    if formulation == "left":
        return r2 / (4.0 * eps * rho[rows])
    if formulation == "right":
        return r2 / (4.0 * eps * rho[cols])
    return r2 / (4.0 * eps * rho[rows] * rho[cols])


def _ratio_dense(pts, rho, eps, alpha, formulation, f, d, block=256):
    n = pts.shape[0]
    weights = np.ones(n)
    if alpha != 0.0:
        # first pass: kernel row sums give the density estimate behind w_j
        sums = np.empty(n)
        for start in range(0, n, block):
            stop = min(start + block, n)
            diff = pts[start:stop, None, :] - pts[None, :, :]
            r2 = np.einsum("ijk,ijk->ij", diff, diff)
            r2 /= -4.0 * eps * np.outer(rho[start:stop], rho)
            np.exp(r2, out=r2)
            sums[start:stop] = r2.sum(axis=1)
        weights = (sums / rho**d) ** (-alpha)
    num = np.empty(n)
    den = np.empty(n)
    for start in range(0, n, block):
        stop = min(start + block, n)
        diff = pts[start:stop, None, :] - pts[None, :, :]
        r2 = np.einsum("ijk,ijk->ij", diff, diff)
        if formulation == "left":
            r2 /= -4.0 * eps * rho[start:stop, None]
        elif formulation == "right":
            r2 /= -4.0 * eps * rho[None, :]
        else:
            r2 /= -4.0 * eps * np.outer(rho[start:stop], rho)
        np.exp(r2, out=r2)
        num[start:stop] = r2 @ (weights * f)
        den[start:stop] = r2 @ weights
    return num, den


def _ratio_sparse(pts, rho, eps, alpha, formulation, f, d, support):
    n = pts.shape[0]
    pattern = support.tocoo()
    rows, cols = pattern.row, pattern.col
    r2 = pair_sq_dists(pts, rows, cols)
    vals = np.exp(-_kernel_args(r2, rho, eps, formulation, rows, cols))
    weights = np.ones(n)
    if alpha != 0.0:
        sums = np.bincount(rows, weights=vals, minlength=n)
        weights = (sums / rho**d) ** (-alpha)
    num = np.bincount(rows, weights=vals * weights[cols] * f[cols], minlength=n)
    den = np.bincount(rows, weights=vals * weights[cols], minlength=n)
    return num, den


def save_sparse_csv(mat, path):
    """Write a sparse matrix as (i, j, value) coordinate triples."""
    coo = mat.tocoo() if sparse.issparse(mat) else sparse.coo_matrix(mat)
    out = np.column_stack([coo.row, coo.col, coo.data])
    np.savetxt(path, out, fmt=["%d", "%d", "%.17g"], delimiter=",",
               header="i,j,value", comments="")
