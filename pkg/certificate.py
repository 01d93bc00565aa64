"""
Blow-up Certificate
Explicit constants, iteration sequences and the lifespan upper bound of the blow-up argument
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

import numpy as np
from scipy import integrate, special

import specfun
from error_recovery import ConvergenceFailure, InvalidArgument
from exponents import gamma
from problem_spec import ProblemSpec

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

T0_START = 2.5
T0_STEP = 0.5
T0_CAP = 100.0
T0_ASYMPTOTIC_TOL = 0.1

RADIAL_PANELS = 8
RADIAL_ORDER = 32
ENVELOPE_T_MAX = 200.0
ENVELOPE_POINTS = 240
EPS0_DOMINANCE = 10.0


# ==================== QUADRATURE ====================


def gauss_legendre(func, a: float, b: float, panels: int, order: int) -> float:
    """Composite Gauss-Legendre rule for a vectorised integrand"""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    x = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    w = (half[:, None] * weights[None, :]).ravel()
    return float(np.sum(w * func(x)))


def log_gauss_legendre(log_func, a: float, b: float, panels: int, order: int) -> float:
    """log of a composite Gauss-Legendre sum of exp(log_func)"""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    x = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    log_w = np.log((half[:, None] * weights[None, :]).ravel())
    return float(special.logsumexp(log_w + log_func(x)))


def ball_volume(n: int) -> float:
    """vol(B^n(0,1)) = pi^(n/2) / Gamma(n/2 + 1)"""
    return math.exp(0.5 * n * math.log(math.pi) - special.gammaln(0.5 * n + 1.0))


# ==================== T0 ====================


def _inverse_weight_condition(mu: float, t: float) -> float:
    """
    (1+t)^(1/2) e^-(1+t) K(1+t) * int_0^t ds / ((1+s) K^2(1+s)),  K = K_{(mu-1)/2}

    The a-priori estimate needs this to be at least (1/2)^(1/p)/pi for every p > 1,
    so T0 requires >= 1/pi.
    """
    nu = 0.5 * (mu - 1.0)
    s_end = 1.0 + t

    def integrand(s: float) -> float:
        return math.exp(-math.log1p(s) - 2.0 * specfun.log_bessel_k(nu, 1.0 + s) - 2.0 * s_end)

    value, _ = integrate.quad(integrand, 0.0, t, epsabs=0.0, epsrel=1e-10, limit=200)
    return math.exp(0.5 * math.log(s_end) + s_end + specfun.log_bessel_k(nu, s_end)) * value


@lru_cache(maxsize=256)
def compute_T0(mu: float) -> float:
    """
    Smallest t in {2.5, 3, ..., 100} where the large-argument form of K is within
    10% for both orders (mu -/+ 1)/2 and the inverse-weight integral condition holds
    """
    if mu <= 0:
        raise InvalidArgument(f"mu must be > 0, got {mu}")
    orders = (0.5 * (mu - 1.0), 0.5 * (mu + 1.0))
    for t in np.arange(T0_START, T0_CAP + 0.5 * T0_STEP, T0_STEP):
        t = float(t)
        if any(specfun.asymptotic_ratio_error(nu, 1.0 + t) > T0_ASYMPTOTIC_TOL for nu in orders):
            continue
        if _inverse_weight_condition(mu, t) >= 1.0 / math.pi:
            logger.info(f"T0 for mu={mu}: {t}")
            return t
    raise ConvergenceFailure(f"no T0 <= {T0_CAP} found for mu={mu}")


# ==================== ITERATION ALGEBRA ====================


def iteration_exponents(n: int, mu: float, p: float) -> Tuple[float, float]:
    """(alpha, beta): growth rates of a_j and b_j"""
    alpha = mu + (n + mu - 1.0) * p / 2.0 + n + mu / (p - 1.0)
    beta = n + mu + 1.0 + (mu + 2.0) / (p - 1.0)
    return alpha, beta


def closed_form_a(n: int, mu: float, p: float, j: int) -> float:
    alpha, _ = iteration_exponents(n, mu, p)
    return alpha * p ** (j - 1) - (n + mu / (p - 1.0))


def closed_form_b(n: int, mu: float, p: float, j: int) -> float:
    _, beta = iteration_exponents(n, mu, p)
    return beta * p ** (j - 1) - (mu + 2.0) / (p - 1.0)


def partial_sums(p: float, j: int) -> Tuple[float, float]:
    """sum_{k=1}^{j-1} k p^(j-1-k) and sum_{k=1}^{j-1} p^k in closed form"""
    weighted = ((p ** j - 1.0) / (p - 1.0) - j) / (p - 1.0)
    plain = (p - p ** j) / (1.0 - p)
    return weighted, plain


# ==================== CERTIFICATE ====================


@dataclass(frozen=True)
class Certificate:
    n: int
    mu: float
    p: float
    R: float
    c0: float
    c_fg: float
    c_phi: float
    c_phi_r: float
    c1: float
    c2: float
    c3: float
    c4: float
    log_c4: float
    alpha: float
    beta: float
    s_p_inf: float
    t0: float
    gamma: float
    lifespan_exponent: float
    provenance: Dict[str, Any] = field(default_factory=dict, compare=False)

    @property
    def p_conj(self) -> float:
        return self.p / (self.p - 1.0)

    def log_D1(self, eps: float) -> float:
        return math.log(self.c2) + self.p * math.log(eps)

    def threshold(self, eps: float) -> float:
        """
        max{T0 + (e^(S_p + alpha log 2 + 1) / (C2 eps^p))^(2(p-1)/gamma), 2 T0 + 1}
        """
        if eps <= 0:
            raise InvalidArgument(f"eps must be > 0, got {eps}")
        log_power = self.log_c4 - self.lifespan_exponent * math.log(eps)
        power = math.exp(log_power) if log_power < 709.0 else math.inf
        return max(self.t0 + power, 2.0 * self.t0 + 1.0)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Certificate":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in data.items() if k in known})


def _c_fg(spec: ProblemSpec, panels: int, order: int) -> float:
    """int (g lambda(0) + K_{(mu+1)/2}(1) f) phi dx over the support ball"""
    n, mu = spec.n, spec.mu
    lam0 = specfun.lambda_fn(mu, 0.0)
    k_plus = specfun.bessel_k(0.5 * (mu + 1.0), 1.0)
    area = specfun.sphere_area(n - 1)

    def integrand(r):
        phi = np.exp(specfun.log_phi_grid(n, r))
        return (spec.g(r) * lam0 + k_plus * spec.f(r)) * phi * r ** (n - 1)

    return area * gauss_legendre(integrand, 0.0, spec.R, panels, order)


def log_phi_power_mass(n: int, p_conj: float, radius: float, order: int = 16) -> float:
    """log of int_{|x| <= radius} phi^p' dx"""
    log_area = math.log(specfun.sphere_area(n - 1))
    panels = max(8, int(math.ceil(2.0 * radius)))

    def log_integrand(r):
        return p_conj * specfun.log_phi_grid(n, r) + (n - 1) * np.log(r)

    return log_area + log_gauss_legendre(log_integrand, 0.0, radius, panels, order)


def envelope_constant(n: int, p: float, R: float) -> float:
    """
    C_phi: max over t in [0, 200] of
    int_{|x| <= t+R} phi^p' dx / ((R+t)^(n-1-(n-1)p'/2) e^(p'(t+R)))
    """
    p_conj = p / (p - 1.0)
    exponent = (n - 1.0) - (n - 1.0) * p_conj / 2.0
    t_grid = np.concatenate([[0.0], np.geomspace(1e-2, ENVELOPE_T_MAX, ENVELOPE_POINTS)])
    best = -math.inf
    for t in t_grid:
        rho = R + float(t)
        log_ratio = log_phi_power_mass(n, p_conj, rho) - exponent * math.log(rho) - p_conj * rho
        best = max(best, log_ratio)
    return math.exp(best)


def compute_constants(spec: ProblemSpec, panels: int = RADIAL_PANELS, order: int = RADIAL_ORDER) -> Certificate:
    """Every explicit constant of the blow-up argument for one problem instance"""
    if not spec.is_admissible():
        raise InvalidArgument("initial data vanish identically; the certificate needs f, g >= 0 not both zero")

    n, mu, p, R = spec.n, spec.mu, spec.p, spec.R
    logger.info(f"Building certificate for n={n}, mu={mu}, p={p}, R={R}")

    gam = gamma(p, n + mu)
    c0 = ball_volume(n) ** (1.0 - p) * R ** (-n * (p - 1.0))
    c_fg = _c_fg(spec, panels, order)
    if c_fg <= 0:
        raise InvalidArgument(f"C_fg = {c_fg} <= 0: data violate the nonnegativity hypothesis")

    c_phi = envelope_constant(n, p, R)
    c_phi_r = max(c_phi * R ** (n - 1.0 - (n - 1.0) * p / (2.0 * (p - 1.0))), c_phi)
    c1 = 0.5 * c_fg ** p * c_phi_r ** (1.0 - p) * math.exp(p * (1.0 - R)) * math.pi ** (-p)
    c2 = c1 / ((n + mu) * (n + mu + 1.0))
    alpha, beta = iteration_exponents(n, mu, p)
    c3 = c0 / beta ** 2
    s_p_inf = 2.0 * p * math.log(p) / (p - 1.0) ** 2 - p * math.log(c3) / (p - 1.0)
    lifespan_exponent = 2.0 * p * (p - 1.0) / gam
    log_c4 = (s_p_inf + alpha * math.log(2.0) + 1.0 - math.log(c2)) * 2.0 * (p - 1.0) / gam
    c4 = math.exp(log_c4) if log_c4 < 709.0 else math.inf
    t0 = compute_T0(mu)

    cert = Certificate(
        n=n, mu=mu, p=p, R=R,
        c0=c0, c_fg=c_fg, c_phi=c_phi, c_phi_r=c_phi_r,
        c1=c1, c2=c2, c3=c3, c4=c4, log_c4=log_c4,
        alpha=alpha, beta=beta, s_p_inf=s_p_inf, t0=t0,
        gamma=gam, lifespan_exponent=lifespan_exponent,
        provenance={
            "spec": spec.to_config(),
            "tolerances": {
                "bessel_rel_tol": specfun.REL_TOL,
                "t0_asymptotic_tol": T0_ASYMPTOTIC_TOL,
            },
            "quadrature": {
                "c_fg_panels": panels,
                "c_fg_order": order,
                "envelope_t_max": ENVELOPE_T_MAX,
                "envelope_points": ENVELOPE_POINTS + 1,
            },
        },
    )
    logger.info(f"Certificate: T0={t0}, C4={c4:.6g}, exponent={lifespan_exponent:.6g}")
    return cert


def write_certificate(cert: Certificate, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(cert.to_dict(), f, indent=2, sort_keys=True)
    return path


def read_certificate(path: Union[str, Path]) -> Certificate:
    with open(path) as f:
        return Certificate.from_dict(json.load(f))


# ==================== SEQUENCES ====================


@dataclass(frozen=True)
class IterationState:
    j: int
    log_D: float
    a: float
    b: float


def iterate_sequences(cert: Certificate, spec: ProblemSpec, j_max: int, eps: float) -> List[IterationState]:
    """
    D_j, a_j, b_j from the recursion, D kept as log D with the minimal admissible choice
    D_{j+1} = C0 D_j^p / (mu + p b_j + 2)^2
    """
    if j_max < 1:
        raise InvalidArgument(f"j_max must be >= 1, got {j_max}")
    if eps <= 0:
        raise InvalidArgument(f"eps must be > 0, got {eps}")
    n, mu, p = spec.n, spec.mu, spec.p
    log_c0 = math.log(cert.c0)

    a = mu + (n + mu - 1.0) * p / 2.0
    b = n + mu + 1.0
    log_d = cert.log_D1(eps)
    states = [IterationState(1, log_d, a, b)]
    for j in range(2, j_max + 1):
        log_d = p * log_d + log_c0 - 2.0 * math.log(mu + p * b + 2.0)
        a = mu + n * (p - 1.0) + p * a
        b = mu + 2.0 + p * b
        states.append(IterationState(j, log_d, a, b))
    return states


@dataclass(frozen=True)
class DjBound:
    value: float
    validity_index: int
    index_too_small: bool


def dj_validity_index(cert: Certificate) -> int:
    p = cert.p
    return int(math.floor(p * math.log(cert.c3) / (2.0 * math.log(p)) - 1.0 / (p - 1.0))) + 1


def log_Dj_lower_bound(cert: Certificate, spec: ProblemSpec, eps: float, j: int) -> DjBound:
    """p^(j-1) (log D1 - S_p(inf)), flagged when j does not exceed the validity index"""
    index = dj_validity_index(cert)
    value = spec.p ** (j - 1) * (cert.log_D1(eps) - cert.s_p_inf)
    too_small = j <= index
    if too_small:
        logger.warning(f"j={j} is not above the validity index {index}; bound returned flagged")
    return DjBound(value=value, validity_index=index, index_too_small=too_small)


def J_function(cert: Certificate, eps: float, t: float) -> float:
    """J(t) = log D1 - S_p(inf) - alpha log(1+t) + beta log(t - T0)"""
    if t <= cert.t0:
        raise InvalidArgument(f"J needs t > T0 = {cert.t0}, got {t}")
    return (cert.log_D1(eps) - cert.s_p_inf - cert.alpha * math.log1p(t)
            + cert.beta * math.log(t - cert.t0))


# ==================== LIFESPAN ====================


@dataclass(frozen=True)
class LifespanBound:
    t_bound: float
    t_asymptotic: float
    eps0: float


def lifespan_bound(cert: Certificate, eps: float) -> LifespanBound:
    """Exact two-branch bound, its C4 eps^-k form, and the branch-dominance diagnostic eps0"""
    t_bound = cert.threshold(eps)
    log_asym = cert.log_c4 - cert.lifespan_exponent * math.log(eps)
    t_asym = math.exp(log_asym) if log_asym < 709.0 else math.inf
    margin = EPS0_DOMINANCE * (2.0 * cert.t0 + 1.0) - cert.t0
    eps0 = math.exp((cert.log_c4 - math.log(margin)) / cert.lifespan_exponent)
    return LifespanBound(t_bound=t_bound, t_asymptotic=t_asym, eps0=eps0)


def denominator_envelope(cert: Certificate, spec: ProblemSpec, t: float) -> Tuple[float, float]:
    """
    log of int_{|x| <= t+R} psi^p' dx and of its envelope
    C_phiR (1+t)^(n-1+(p(mu+1)-(n-1)p)/(2(p-1))) e^(p'(t+R)) K^p'(1+t)
    """
    n, mu, p, R = spec.n, spec.mu, spec.p, spec.R
    pc = cert.p_conj
    log_lhs = pc * specfun.log_lambda_fn(mu, t) + log_phi_power_mass(n, pc, t + R)
    power = n - 1.0 + (p * (mu + 1.0) - (n - 1.0) * p) / (2.0 * (p - 1.0))
    log_rhs = (math.log(cert.c_phi_r) + power * math.log1p(t) + pc * (t + R)
               + pc * specfun.log_bessel_k(0.5 * (mu - 1.0), 1.0 + t))
    return log_lhs, log_rhs
