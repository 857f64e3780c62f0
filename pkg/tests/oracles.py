"""Independent reference implementations used to cross-check the package.

Everything here is deliberately written from first principles with different
numerics than the library code (mpmath quadrature instead of log-domain
series, a dense linear solve instead of closed-form coefficients), so
agreement is meaningful.
"""

import mpmath as mp
import numpy as np


def rdp_subsampled_gaussian_quadrature(q: float, sigma: float, alpha: float, dps: int = 60) -> float:
    """RDP of the Poisson-subsampled Gaussian by direct numerical integration.

    A_alpha = E_{x~N(0,1)}[((1-q) + q*exp((2*sigma*x - 1)/(2*sigma^2)))^alpha],
    RDP = log(A_alpha)/(alpha - 1).
    """
    with mp.workdps(dps):
        qm, sm, am = mp.mpf(q), mp.mpf(sigma), mp.mpf(alpha)

        def integrand(x):
            return mp.npdf(x, 0, 1) * ((1 - qm) + qm * mp.exp((2 * sm * x - 1) / (2 * sm**2))) ** am

        # the mixture term shifts the effective bump to ~ alpha/sigma
        pts = [-mp.inf, 0, am / sm, am / sm + 8, mp.inf]
        a_val = mp.quad(integrand, pts)
        return float(mp.log(a_val) / (am - 1))


def rdp_subsampled_gaussian_binomial(q: float, sigma: float, alpha: int, dps: int = 80) -> float:
    """Exact binomial summation at integer orders, in plain high precision."""
    if alpha != int(alpha) or alpha < 2:
        raise ValueError("integer orders >= 2 only")
    alpha = int(alpha)
    with mp.workdps(dps):
        qm, sm = mp.mpf(q), mp.mpf(sigma)
        total = mp.mpf(0)
        for k in range(alpha + 1):
            total += (
                mp.binomial(alpha, k)
                * (1 - qm) ** (alpha - k)
                * qm**k
                * mp.exp(k * (k - 1) / (2 * sm**2))
            )
        return float(mp.log(total) / (alpha - 1))


def posterior_mean_dense(
    phi_hat_j: np.ndarray,
    others: list,
    sigma_c2: float,
    sigma_p2: float,
    tau2: float,
    alpha2: float,
    flat_prior_precision: float = 1e-12,
) -> np.ndarray:
    """Posterior mean of phi_j in the joint Gaussian model, by a 2x2 solve.

    Unknowns (phi, phi_j); peers' submissions are N(phi, v) with v = sigma_c2
    for opted-out peers and sigma_p2 for private peers; the focal client's own
    estimate is N(phi_j, alpha2); phi_j ~ N(phi, tau2); phi gets an (almost)
    flat prior.
    """
    phi_hat_j = np.atleast_1d(np.asarray(phi_hat_j, dtype=np.float64))
    d = phi_hat_j.shape[0]
    peer_prec = 0.0
    h0 = np.zeros(d)
    for vec, is_private in others:
        v = sigma_p2 if is_private else sigma_c2
        peer_prec += 1.0 / v
        h0 += np.atleast_1d(np.asarray(vec, dtype=np.float64)) / v
    J = np.array(
        [
            [peer_prec + 1.0 / tau2 + flat_prior_precision, -1.0 / tau2],
            [-1.0 / tau2, 1.0 / tau2 + 1.0 / alpha2],
        ]
    )
    h = np.stack([h0, phi_hat_j / alpha2])
    mean = np.linalg.solve(J, h)
    return mean[1]


def numeric_gradient(fn, theta: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences, one coordinate at a time."""
    theta = np.asarray(theta, dtype=np.float64)
    out = np.zeros_like(theta)
    for i in range(theta.size):
        up, dn = theta.copy(), theta.copy()
        up[i] += h
        dn[i] -= h
        out[i] = (fn(up) - fn(dn)) / (2 * h)
    return out
