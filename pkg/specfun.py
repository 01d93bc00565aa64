"""
Special Functions for the Test-Function Method
Modified Bessel function K_nu, temporal weight lambda(t), radial eigenfunction phi(r) and psi = lambda * phi
"""

import logging
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Tuple

import numpy as np
from scipy import integrate, special

from error_recovery import AccuracyWarning, InvalidArgument

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

REL_TOL = 1e-10
QUAD_EPSREL = 1e-12
QUAD_EPSABS = 1e-14
QUAD_LIMIT = 200
TAIL_LOG_CUTOFF = 45.0


@dataclass(frozen=True)
class BesselEval:
    nu: float
    t: float
    value: float
    log_value: float
    rel_err_estimate: float


def _quad(func: Callable[[float], float], a: float, b: float,
          epsrel: float = QUAD_EPSREL, limit: int = QUAD_LIMIT) -> Tuple[float, float, bool]:
    """
    QUADPACK integration without touching the global warnings filter

    Returns (value, abserr, converged).
    """
    out = integrate.quad(func, a, b, epsabs=QUAD_EPSABS, epsrel=epsrel, limit=limit, full_output=1)
    value, abserr = out[0], out[1]
    converged = len(out) < 4
    return value, abserr, converged


def _log_cosh(x: float) -> float:
    x = abs(x)
    return x + math.log1p(math.exp(-2.0 * x)) - math.log(2.0)


def _sum_quad(func: Callable[[float], float], breakpoints, epsrel: float) -> Tuple[float, float, bool]:
    total, err, ok = 0.0, 0.0, True
    for a, b in zip(breakpoints[:-1], breakpoints[1:]):
        if b <= a:
            continue
        v, e, c = _quad(func, a, b, epsrel=epsrel)
        total += v
        err += e
        ok = ok and c
    return total, err, ok


# ==================== BESSEL K ====================


@lru_cache(maxsize=4096)
def bessel_k_eval(nu: float, t: float, epsrel: float = QUAD_EPSREL) -> BesselEval:
    """
    K_nu(t) from its integral representation, evaluated in log-domain

    Integrates exp(-t(cosh z - 1) + log cosh(nu z) - shift) and carries
    exp(-t + shift) separately so that large t never underflows.
    """
    if t <= 0:
        raise InvalidArgument(f"bessel_k needs t > 0, got t={t}")
    a = abs(nu)

    def log_kernel(z: float) -> float:
        return -t * (math.cosh(z) - 1.0) + _log_cosh(a * z)

    z_peak = math.asinh(a / t) if a > 0 else 0.0
    shift = max(0.0, log_kernel(z_peak))

    z_end = z_peak + 1.0
    while log_kernel(z_end) - shift > -TAIL_LOG_CUTOFF:
        z_end = z_end * 1.5 + 1.0

    def integrand(z: float) -> float:
        return math.exp(log_kernel(z) - shift)

    value, abserr, converged = _sum_quad(integrand, [0.0, z_peak, z_end], epsrel)
    rel_err = abserr / value if value > 0 else math.inf
    if not converged or rel_err > REL_TOL:
        warnings.warn(f"K_{nu}({t}): quadrature error estimate {rel_err:.3g}", AccuracyWarning, stacklevel=2)

    log_value = math.log(value) + shift - t
    return BesselEval(nu=nu, t=t, value=math.exp(log_value), log_value=log_value, rel_err_estimate=rel_err)


def bessel_k(nu: float, t: float) -> float:
    """K_nu(t) for real order nu and t > 0"""
    return bessel_k_eval(float(nu), float(t)).value


def log_bessel_k(nu: float, t: float) -> float:
    """log K_nu(t), finite for every t > 0"""
    return bessel_k_eval(float(nu), float(t)).log_value


def bessel_k_derivative_residuals(nu: float, t: float, h: float) -> Tuple[float, float]:
    """
    Compare a centered difference of K_nu with both derivative identities

    Returns |D_h K - (-K_{nu+1} + (nu/t) K_nu)| and |D_h K + (K_{nu+1} + K_{nu-1})/2|.
    """
    if not (t > h > 0):
        raise InvalidArgument(f"need t > h > 0, got t={t}, h={h}")
    centered = (bessel_k(nu, t + h) - bessel_k(nu, t - h)) / (2.0 * h)
    first = -bessel_k(nu + 1.0, t) + (nu / t) * bessel_k(nu, t)
    second = -0.5 * (bessel_k(nu + 1.0, t) + bessel_k(nu - 1.0, t))
    return abs(centered - first), abs(centered - second)


def bessel_ode_residual(nu: float, t: float, h: float) -> float:
    """Relative residual of t^2 K'' + t K' - (t^2 + nu^2) K = 0"""
    k0 = bessel_k(nu, t)
    kp = bessel_k(nu, t + h)
    km = bessel_k(nu, t - h)
    d1 = (kp - km) / (2.0 * h)
    d2 = (kp - 2.0 * k0 + km) / (h * h)
    scale = (t * t + nu * nu) * abs(k0)
    return abs(t * t * d2 + t * d1 - (t * t + nu * nu) * k0) / scale


def asymptotic_ratio_error(nu: float, t: float) -> float:
    """|K_nu(t) sqrt(2t/pi) e^t - 1|, the relative error of the large-t form"""
    log_ratio = log_bessel_k(nu, t) + 0.5 * math.log(2.0 * t / math.pi) + t
    return abs(math.expm1(log_ratio))


# ==================== LAMBDA ====================


def _lambda_order(mu: float) -> float:
    if mu <= 0:
        raise InvalidArgument(f"mu must be > 0, got {mu}")
    return 0.5 * (mu - 1.0)


def log_lambda_fn(mu: float, t: float) -> float:
    """log lambda(t) with lambda(t) = (1+t)^((mu+1)/2) K_{(mu-1)/2}(1+t)"""
    nu = _lambda_order(mu)
    if t < 0:
        raise InvalidArgument(f"lambda needs t >= 0, got t={t}")
    return 0.5 * (mu + 1.0) * math.log1p(t) + log_bessel_k(nu, 1.0 + t)


def lambda_fn(mu: float, t: float) -> float:
    return math.exp(log_lambda_fn(mu, t))


def lambda_log_derivative(mu: float, t: float) -> float:
    """lambda'/lambda = mu/(1+t) - K_{(mu+1)/2}(1+t)/K_{(mu-1)/2}(1+t)"""
    nu = _lambda_order(mu)
    ratio = math.exp(log_bessel_k(nu + 1.0, 1.0 + t) - log_bessel_k(nu, 1.0 + t))
    return mu / (1.0 + t) - ratio


def lambda_prime(mu: float, t: float) -> float:
    """
    lambda'(t) from the identity
    mu (1+t)^((mu-1)/2) K_{(mu-1)/2}(1+t) - (1+t)^((mu+1)/2) K_{(mu+1)/2}(1+t)
    """
    return lambda_fn(mu, t) * lambda_log_derivative(mu, t)


def lambda_ode_residual(mu: float, t: float, h: float) -> float:
    """
    Relative residual of (1+t)^2 lam'' - mu (1+t) lam' + (mu - (1+t)^2) lam = 0

    lam'' is a centered difference of the lambda' identity.
    """
    lam = lambda_fn(mu, t)
    d1 = lambda_prime(mu, t)
    d2 = (lambda_prime(mu, t + h) - lambda_prime(mu, t - h)) / (2.0 * h)
    s = 1.0 + t
    return abs(s * s * d2 - mu * s * d1 + (mu - s * s) * lam) / abs(lam)


def log_lambda_grid(mu: float, t: np.ndarray) -> np.ndarray:
    """Vectorised log lambda(t) through the exponentially scaled K"""
    nu = _lambda_order(mu)
    s = 1.0 + np.asarray(t, dtype=float)
    return 0.5 * (mu + 1.0) * np.log(s) + np.log(special.kve(nu, s)) - s


def lambda_log_derivative_grid(mu: float, t: np.ndarray) -> np.ndarray:
    nu = _lambda_order(mu)
    s = 1.0 + np.asarray(t, dtype=float)
    return mu / s - special.kve(nu + 1.0, s) / special.kve(nu, s)


# ==================== PHI ====================


def sphere_area(m: int) -> float:
    """|S^m| = 2 pi^((m+1)/2) / Gamma((m+1)/2)"""
    return 2.0 * math.exp(0.5 * (m + 1) * math.log(math.pi) - special.gammaln(0.5 * (m + 1)))


def _check_dimension(n: int):
    if n < 2:
        raise InvalidArgument(f"phi needs n >= 2, got n={n}")


def log_phi_radial(n: int, r: float) -> float:
    """
    log phi(r), phi(x) the integral of exp(x . w) over the unit sphere

    Reduced to |S^{n-2}| * int_0^pi exp(r cos th) sin^(n-2) th dth, with exp(r) factored out.
    """
    _check_dimension(n)
    if r < 0:
        raise InvalidArgument(f"phi needs r >= 0, got r={r}")
    if r == 0:
        return math.log(sphere_area(n - 1))

    def integrand(theta: float) -> float:
        return math.exp(r * (math.cos(theta) - 1.0)) * math.sin(theta) ** (n - 2)

    value, abserr, converged = _quad(integrand, 0.0, math.pi)
    if not converged or abserr > REL_TOL * value:
        warnings.warn(f"phi_{n}({r}): quadrature error estimate {abserr / value:.3g}", AccuracyWarning, stacklevel=2)
    return math.log(sphere_area(n - 2)) + math.log(value) + r


def phi_radial(n: int, r: float) -> float:
    return math.exp(log_phi_radial(n, r))


def log_phi_grid(n: int, r: np.ndarray) -> np.ndarray:
    """
    Vectorised log phi(r) through phi(r) = (2 pi)^(n/2) r^(1-n/2) I_{n/2-1}(r)
    """
    _check_dimension(n)
    r = np.asarray(r, dtype=float)
    out = np.full(r.shape, math.log(sphere_area(n - 1)))
    pos = r > 0
    rp = r[pos]
    order = 0.5 * n - 1.0
    out[pos] = (0.5 * n * math.log(2.0 * math.pi) + (1.0 - 0.5 * n) * np.log(rp)
                + np.log(special.ive(order, rp)) + rp)
    return out


def phi_laplacian_residual(n: int, r: float, h: float) -> float:
    """Relative residual of phi'' + (n-1)/r phi' - phi with centered differences"""
    f0 = phi_radial(n, r)
    fp = phi_radial(n, r + h)
    fm = phi_radial(n, r - h)
    d1 = (fp - fm) / (2.0 * h)
    d2 = (fp - 2.0 * f0 + fm) / (h * h)
    return abs(d2 + (n - 1.0) / r * d1 - f0) / f0


# ==================== PSI ====================


def log_psi(mu: float, n: int, t: float, r: float) -> float:
    return log_lambda_fn(mu, t) + log_phi_radial(n, r)


def psi(mu: float, n: int, t: float, r: float) -> float:
    """Test function psi(t, x) = lambda(t) phi(x) at |x| = r"""
    return math.exp(log_psi(mu, n, t, r))


def conjugate_equation_residual(mu: float, n: int, t: float, r: float, h: float) -> float:
    """
    Relative residual of psi_tt - Laplace psi - (mu psi/(1+t))_t = 0
    """
    if t < h or r <= h:
        raise InvalidArgument(f"need t >= h and r > h, got t={t}, r={r}, h={h}")
    p0 = psi(mu, n, t, r)
    pt_plus, pt_minus = psi(mu, n, t + h, r), psi(mu, n, t - h, r)
    pr_plus, pr_minus = psi(mu, n, t, r + h), psi(mu, n, t, r - h)

    psi_tt = (pt_plus - 2.0 * p0 + pt_minus) / (h * h)
    psi_rr = (pr_plus - 2.0 * p0 + pr_minus) / (h * h)
    psi_r = (pr_plus - pr_minus) / (2.0 * h)
    damping_t = (mu * pt_plus / (1.0 + t + h) - mu * pt_minus / (1.0 + t - h)) / (2.0 * h)
    return abs(psi_tt - psi_rr - (n - 1.0) / r * psi_r - damping_t) / abs(p0)
