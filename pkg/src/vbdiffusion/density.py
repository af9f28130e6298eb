"""Pilot bandwidths, kernel density estimate, and the bandwidth power law.

The pipeline is: squared-distance average over the first few neighbors gives
a pilot bandwidth rho0, a Gaussian KDE with that pilot bandwidth gives a
density estimate q0, and the final kernel bandwidth is rho = q0**beta.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DuplicatePoints
from .neighbors import pair_sq_dists, symmetrized_support

# all-pairs sums are exact and affordable up to this many points
_DENSE_MAX = 5000


@dataclass(frozen=True)
class BandwidthProfile:
    """Per-point bandwidth data shared by every epsilon in a sweep.

    ``rho0`` is the pilot bandwidth, ``eps0`` the squared mean pilot
    bandwidth, ``rho0_tilde`` the pilot rescaled to unit mean, ``q0`` the
    density estimate, and ``rho = q0**beta`` the final kernel bandwidth.
    """

    rho0: np.ndarray
    eps0: float
    rho0_tilde: np.ndarray
    q0: np.ndarray
    beta: float
    rho: np.ndarray
    d: int


def pilot_bandwidth(graph, k0=8):
    """Root mean square distance to neighbors 2..k0 (self excluded).

    Raises :class:`DuplicatePoints` when any pilot bandwidth is exactly zero,
    which happens only when a point is repeated at least k0 - 1 times.
    """
    if graph.k < k0:
        raise ValueError(f"graph has k={graph.k} < k0={k0} neighbors")
    if k0 < 2:
        raise ValueError("k0 must be at least 2")
    rho0 = np.sqrt(np.mean(graph.distances[:, 1:k0] ** 2, axis=1))
    if np.any(rho0 == 0.0):
        raise DuplicatePoints(np.nonzero(rho0 == 0.0)[0])
    return rho0


def kde_pilot(cloud, rho0, d, graph=None):
    """Variable-bandwidth Gaussian density estimate at the sample points.

    Returns ``(q0, eps0)`` where eps0 is the squared mean pilot bandwidth.
    The estimate at point i is

        q0_i = (2 pi)^(-d/2) / (rho0_i^d N) * sum_l exp(-r_il^2 / (2 rho0_i rho0_l))

    with the l = i term included. Up to ``_DENSE_MAX`` points the sum runs
    over all pairs; beyond that it is truncated to the symmetrized neighbor
    support of ``graph`` (plus the diagonal), which the caller must provide.
    """
    pts = cloud.points
    n = pts.shape[0]
    eps0 = float(np.mean(rho0)) ** 2
    if n <= _DENSE_MAX or graph is None:
        sums = np.empty(n)
        block = max(1, int(2e7) // n)
        for start in range(0, n, block):
            stop = min(start + block, n)
            diff = pts[start:stop, None, :] - pts[None, :, :]
            r2 = np.einsum("ijk,ijk->ij", diff, diff)
            arg = r2 / (2.0 * rho0[start:stop, None] * rho0[None, :])
            sums[start:stop] = np.exp(-arg).sum(axis=1)
    else:
        support = symmetrized_support(graph).tocoo()
        rows, cols = support.row, support.col
        r2 = pair_sq_dists(pts, rows, cols)
        vals = np.exp(-r2 / (2.0 * rho0[rows] * rho0[cols]))
        sums = np.bincount(rows, weights=vals, minlength=n)
    q0 = (2.0 * np.pi) ** (-d / 2.0) / (rho0**d * n) * sums
    return q0, eps0


def bandwidth_from_density(q0, beta):
    """Final kernel bandwidth rho = q0**beta (beta = 0 gives a fixed bandwidth)."""
    return np.asarray(q0, dtype=float) ** beta


def c_constants(alpha, beta, d):
    """Drift coefficients of the limiting operator for given (alpha, beta, d).

    Returns ``(c1, c2)``; the limit acts as f -> lap f + c1 grad(log q) . grad f,
    and c2 > 0 signals error-divergence on unbounded densities.
    """
    c1 = 2.0 - 2.0 * alpha + d * beta + 2.0 * beta
    c2 = 0.5 - 2.0 * alpha + 2.0 * d * alpha + d * beta / 2.0 + beta
    return c1, c2


def bandwidth_profile(cloud, graph, beta, k0=8, d=None):
    """Run the full pilot -> KDE -> power-law cascade for one cloud."""
    if d is None:
        d = cloud.intrinsic_dim
    if d is None:
        raise ValueError("intrinsic dimension unknown; pass d explicitly")
    rho0 = pilot_bandwidth(graph, k0=k0)
    q0, eps0 = kde_pilot(cloud, rho0, d, graph=graph)
    rho = bandwidth_from_density(q0, beta)
    return BandwidthProfile(rho0=rho0, eps0=eps0, rho0_tilde=rho0 / np.sqrt(eps0),
                            q0=q0, beta=beta, rho=rho, d=d)


def save_csv(profile, path):
    """Write per-point bandwidth columns as CSV (i, rho0, q0, rho)."""
    n = profile.rho0.shape[0]
    out = np.column_stack([np.arange(n), profile.rho0, profile.q0, profile.rho])
    np.savetxt(path, out, fmt=["%d", "%.17g", "%.17g", "%.17g"], delimiter=",",
               header="i,rho0,q0,rho", comments="")
