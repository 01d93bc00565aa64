"""
Critical Exponents and Lifespan Exponents
Closed-form calculus of the exponents that govern blow-up of the scale-invariant damped wave equation
"""

import json
import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, Optional

from error_recovery import InvalidArgument

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

ROOT_TOL = 1e-10


def gamma(p: float, d: float) -> float:
    """gamma(p, d) = 2 + (d+1)p - (d-1)p^2, the quadratic whose positive root is p_S(d)"""
    if d <= 1:
        raise InvalidArgument(f"gamma needs d > 1, got d={d}")
    if p <= 0:
        raise InvalidArgument(f"gamma needs p > 0, got p={p}")
    return 2.0 + (d + 1.0) * p - (d - 1.0) * p * p


def strauss_exponent(d: float) -> float:
    """
    Strauss exponent p_S(d)

    Radical formula followed by one Newton step on gamma to clean up cancellation.
    """
    if d <= 1:
        raise InvalidArgument(f"strauss_exponent needs d > 1, got d={d}")
    root = (d + 1.0 + math.sqrt(d * d + 10.0 * d - 7.0)) / (2.0 * (d - 1.0))
    slope = (d + 1.0) - 2.0 * (d - 1.0) * root
    return root - gamma(root, d) / slope


def fujita_exponent(n: int) -> float:
    """Fujita exponent p_F(n) = 1 + 2/n"""
    if n < 1:
        raise InvalidArgument(f"fujita_exponent needs n >= 1, got n={n}")
    return 1.0 + 2.0 / n


def mu_star(n: int) -> float:
    """Upper damping limit (n^2 + n + 2)/(n + 2) of the hypergeometric comparison bounds"""
    if n < 1:
        raise InvalidArgument(f"mu_star needs n >= 1, got n={n}")
    return (n * n + n + 2.0) / (n + 2.0)


def critical_exponent_mu2(n: int) -> float:
    """max{p_F(n), p_S(n+2)}: the critical power for mu = 2"""
    return max(fujita_exponent(n), strauss_exponent(n + 2.0))


def lifespan_exponent(n: int, mu: float, p: float) -> float:
    """2p(p-1)/gamma(p, n+mu) on 1 < p < p_S(n+mu), +inf above"""
    g = gamma(p, n + mu)
    if p <= 1 or g <= 0:
        return math.inf
    return 2.0 * p * (p - 1.0) / g


# ==================== COMPARISON BOUNDS ====================


@dataclass(frozen=True)
class ComparisonBound:
    """One competing lifespan estimate: T <= C eps^(-exponent)"""
    applicable: bool
    exponent: Optional[float]
    form: str
    regime: str


NOT_APPLICABLE = "not-applicable"


def _is_close(a: float, b: float) -> bool:
    return abs(a - b) <= 1e-12 * max(1.0, abs(b))


def ltw_lifespan_exponent(n: int, mu: float, p: float) -> ComparisonBound:
    """Strauss-type bound with the doubly shifted dimension n + 2mu"""
    upper_mu = (n * n + n + 2.0) / (2.0 * (n + 2.0))
    p_hi = strauss_exponent(n + 2.0 * mu)
    if 0 < mu < upper_mu and fujita_exponent(n) <= p < p_hi:
        value = 2.0 * p * (p - 1.0) / gamma(p, n + 2.0 * mu)
        return ComparisonBound(True, value, "2p(p-1)/gamma(p,n+2mu)", "p_F(n) <= p < p_S(n+2mu)")
    return ComparisonBound(False, None, "2p(p-1)/gamma(p,n+2mu)", NOT_APPLICABLE)


def ikeda_sobajima_lifespan(n: int, mu: float, p: float) -> ComparisonBound:
    """
    Hypergeometric-method bounds, delta kept symbolic

    For the critical branch the bound is exp(C eps^(-p(p-1))); the reported
    exponent is p(p-1) inside the exponential.
    """
    if n >= 2:
        if not (0 <= mu < mu_star(n)):
            return ComparisonBound(False, None, "", NOT_APPLICABLE)
        p_crit = strauss_exponent(n + mu)
        if _is_close(p, p_crit):
            return ComparisonBound(True, p * (p - 1.0), "exp(C eps^-(p(p-1)))", "critical")
        if strauss_exponent(n + 2.0 + mu) <= p < p_crit:
            value = 2.0 * p * (p - 1.0) / gamma(p, n + mu)
            return ComparisonBound(True, value, "2p(p-1)/gamma(p,n+mu) + delta", "strauss-subcritical")
        if fujita_exponent(n) <= p < strauss_exponent(n + 2.0 + mu):
            return ComparisonBound(True, 1.0, "1 + delta", "fujita-strauss")
        return ComparisonBound(False, None, "", NOT_APPLICABLE)

    if not (0 < mu < 4.0 / 3.0):
        return ComparisonBound(False, None, "", NOT_APPLICABLE)
    p_crit = strauss_exponent(1.0 + mu)
    if _is_close(p, p_crit):
        return ComparisonBound(True, p * (p - 1.0), "exp(C eps^-(p(p-1)))", "critical-1d")
    if max(3.0, 2.0 / mu) <= p < p_crit:
        value = 2.0 * p * (p - 1.0) / gamma(p, 1.0 + mu)
        return ComparisonBound(True, value, "2p(p-1)/gamma(p,1+mu) + delta", "strauss-subcritical-1d")
    if mu < 2.0 / 3.0 and 3.0 <= p < 2.0 / mu:
        return ComparisonBound(True, 2.0 * (p - 1.0) / mu, "2(p-1)/mu + delta", "weak-damping-1d")
    return ComparisonBound(False, None, "", NOT_APPLICABLE)


def wakasugi_lifespan_exponent(n: int, mu: float, p: float) -> ComparisonBound:
    """Heat-like bounds below the Fujita-type exponent"""
    if mu > 1 and 1 < p < fujita_exponent(n):
        denom = 2.0 - n * (p - 1.0)
        if denom > 0:
            return ComparisonBound(True, (p - 1.0) / denom, "(p-1)/(2-n(p-1))", "mu > 1")
    elif 0 < mu <= 1 and 1 < p < 1.0 + 2.0 / (n + mu - 1.0):
        denom = 2.0 - (n + mu - 1.0) * (p - 1.0)
        if denom > 0:
            return ComparisonBound(True, (p - 1.0) / denom, "(p-1)/(2-(n+mu-1)(p-1))", "0 < mu <= 1")
    return ComparisonBound(False, None, "", NOT_APPLICABLE)


# ==================== REMARK CHECK ====================


@dataclass(frozen=True)
class RemarkCheck:
    """Whether the lifespan exponent improves the heat-like bound in a sub-Fujita range"""
    improves: bool
    status: str
    branch: str
    lhs: Optional[float]
    rhs: Optional[float]
    reason: str


def remark_improvement_check(n: int, mu: float, p: float) -> RemarkCheck:
    """
    Check 2p(p-1)/gamma(p,n+mu) < heat-like exponent on the stated p-ranges

    Returns a tri-state status: "holds", "fails" or "not-applicable".
    """
    if n < 2:
        raise InvalidArgument(f"remark_improvement_check needs n >= 2, got n={n}")
    if mu <= 0 or p <= 1:
        raise InvalidArgument(f"remark_improvement_check needs mu > 0 and p > 1, got mu={mu}, p={p}")

    if 1 < mu < mu_star(n):
        branch = "strong-damping"
        low = max(1.0, 2.0 / (n + 1.0 - mu))
        high = fujita_exponent(n)
        denom = 2.0 - n * (p - 1.0)
    elif 0 < mu <= 1:
        branch = "weak-damping"
        low = max(1.0, 2.0 / (n + mu - 1.0))
        high = 1.0 + 2.0 / (n + mu - 1.0)
        denom = 2.0 - (n + mu - 1.0) * (p - 1.0)
    else:
        return RemarkCheck(False, NOT_APPLICABLE, "none", None, None,
                           f"mu={mu} outside (0, 1] and (1, mu_*={mu_star(n):.6g})")

    if not (low < p < high):
        return RemarkCheck(False, NOT_APPLICABLE, branch, None, None,
                           f"p={p} outside ({low:.6g}, {high:.6g})")
    if denom <= 0:
        return RemarkCheck(False, NOT_APPLICABLE, branch, None, None,
                           "heat-like bound not applicable: denominator <= 0")

    lhs = lifespan_exponent(n, mu, p)
    rhs = (p - 1.0) / denom
    if lhs < rhs:
        return RemarkCheck(True, "holds", branch, lhs, rhs, "exponent improved")
    return RemarkCheck(False, "fails", branch, lhs, rhs, "inequality evaluated false")


def ikeda_sobajima_improvement(n: int, mu: float, p: float) -> str:
    """
    On p_F(n) <= p < p_S(n+2+mu): gamma(p, n+2+mu) > 0 iff 2p(p-1)/gamma(p,n+mu) < 1

    Returns "holds", "fails" or "not-applicable".
    """
    if n < 2 or not (0 <= mu < mu_star(n)):
        return NOT_APPLICABLE
    if not (fujita_exponent(n) <= p < strauss_exponent(n + 2.0 + mu)):
        return NOT_APPLICABLE
    left = gamma(p, n + 2.0 + mu) > 0
    right = lifespan_exponent(n, mu, p) < 1.0
    return "holds" if left and right else "fails"


# ==================== REPORT ====================


CERTIFIED_KEY = "lifespan_exp_this_paper"
_NO_BOUND = ComparisonBound(False, None, "", NOT_APPLICABLE)


@dataclass(frozen=True)
class ExponentReport:
    """p-dependent fields are None (bounds: not applicable) when no p is given"""
    n: int
    mu: float
    p: Optional[float]
    gamma_shifted: Optional[float]
    p_strauss_shifted: float
    p_fujita: float
    mu_star: float
    lifespan_exp_certified: Optional[float]
    lifespan_exp_ltw: ComparisonBound
    lifespan_exp_is: ComparisonBound
    lifespan_exp_wakasugi: ComparisonBound
    remark_improvement: Optional[bool]

    def to_dict(self) -> Dict[str, Any]:
        """Report keys as published in the JSON output"""
        data = asdict(self)
        exp = data.pop("lifespan_exp_certified")
        if exp is not None and math.isinf(exp):
            exp = "inf"
        out: Dict[str, Any] = {}
        for key, value in data.items():
            out[key] = NOT_APPLICABLE if value is None and key != "p" else value
            if key == "mu_star":
                out[CERTIFIED_KEY] = NOT_APPLICABLE if exp is None else exp
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=False)


def lifespan_exponent_table(n: int, mu: float, p: Optional[float] = None) -> ExponentReport:
    """Every exponent and competing lifespan exponent for one (n, mu, p); p may be omitted"""
    if n < 1:
        raise InvalidArgument(f"n must be >= 1, got {n}")
    if mu <= 0:
        raise InvalidArgument(f"mu must be > 0, got {mu}")
    if p is not None and p <= 1:
        raise InvalidArgument(f"p must be > 1, got {p}")

    d = n + mu
    common = dict(n=n, mu=mu, p=p, p_strauss_shifted=strauss_exponent(d),
                  p_fujita=fujita_exponent(n), mu_star=mu_star(n))
    if p is None:
        report = ExponentReport(
            gamma_shifted=None, lifespan_exp_certified=None,
            lifespan_exp_ltw=_NO_BOUND, lifespan_exp_is=_NO_BOUND, lifespan_exp_wakasugi=_NO_BOUND,
            remark_improvement=None, **common,
        )
    else:
        report = ExponentReport(
            gamma_shifted=gamma(p, d),
            lifespan_exp_certified=lifespan_exponent(n, mu, p),
            lifespan_exp_ltw=ltw_lifespan_exponent(n, mu, p),
            lifespan_exp_is=ikeda_sobajima_lifespan(n, mu, p),
            lifespan_exp_wakasugi=wakasugi_lifespan_exponent(n, mu, p),
            remark_improvement=remark_improvement_check(n, mu, p).improves if n >= 2 else False,
            **common,
        )
    logger.debug(f"Exponent report for n={n}, mu={mu}, p={p}: {report}")
    return report


def format_report(report: ExponentReport) -> str:
    """Aligned text rendering of an ExponentReport"""
    def number(x: Optional[float]) -> str:
        return NOT_APPLICABLE if x is None else f"{x:.10g}"

    def bound(b: ComparisonBound) -> str:
        if not b.applicable:
            return NOT_APPLICABLE
        return f"{b.exponent:.10g}  [{b.form}; {b.regime}]"

    rows = [
        ("n", f"{report.n}"),
        ("mu", number(report.mu)),
        ("p", "-" if report.p is None else number(report.p)),
        ("gamma_shifted", number(report.gamma_shifted)),
        ("p_strauss_shifted", number(report.p_strauss_shifted)),
        ("p_fujita", number(report.p_fujita)),
        ("mu_star", number(report.mu_star)),
        (CERTIFIED_KEY, number(report.lifespan_exp_certified)),
        ("lifespan_exp_ltw", bound(report.lifespan_exp_ltw)),
        ("lifespan_exp_is", bound(report.lifespan_exp_is)),
        ("lifespan_exp_wakasugi", bound(report.lifespan_exp_wakasugi)),
        ("remark_improvement", NOT_APPLICABLE if report.remark_improvement is None
         else str(report.remark_improvement)),
    ]
    width = max(len(name) for name, _ in rows)
    return "\n".join(f"{name.ljust(width)}  {value}" for name, value in rows)
