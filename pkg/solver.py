"""
Radial Solver
Explicit finite differences for u_tt - Laplace u + mu/(1+t) u_t = |u|^p and its Liouville form,
with functional traces, blow-up detection and checks against the proven lower bounds
"""

import csv
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate, special

import specfun
from certificate import Certificate
from error_recovery import BoundViolated, InvalidArgument
from problem_spec import ProblemSpec

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

FORMS = ("original", "liouville")
TRACE_COLUMNS = ("t", "G", "G1", "Lp", "max_abs_u", "key_residual", "support_radius")
SUPPORT_TOL = 1e-12
POWER_FLOOR = 1e-300
SENSITIVITY_DECADES = 2

Forcing = Callable[[float, np.ndarray], np.ndarray]


# ==================== GRID ====================


@dataclass(frozen=True)
class RadialGrid:
    dr: float
    L: float
    dt: float
    r: np.ndarray = field(repr=False, compare=False)

    @classmethod
    def from_spec(cls, spec: ProblemSpec) -> "RadialGrid":
        """Radius L = t_max + R + 2 dr, so the light cone never touches the outer boundary"""
        dr = spec.grid.dr
        L = spec.grid.t_max + spec.R + 2.0 * dr
        m = int(math.ceil(L / dr))
        return cls(dr=dr, L=m * dr, dt=spec.grid.dt, r=dr * np.arange(m + 1))

    @property
    def M(self) -> int:
        return len(self.r) - 1

    def weights(self, n: int) -> np.ndarray:
        """Trapezoid weights for int ... dx of a radial function"""
        w = np.full(self.r.shape, self.dr)
        w[0] = w[-1] = 0.5 * self.dr
        return specfun.sphere_area(n - 1) * w * self.r ** (n - 1)

    def cone_index(self, t: float, R: float) -> int:
        """Last index with r <= t + R + dr"""
        return min(self.M - 1, int(math.floor((t + R) / self.dr + 1e-9)) + 1)


# ==================== TRACE ====================


@dataclass(frozen=True)
class BlowupRecord:
    t_num: float
    threshold_used: float
    threshold_sensitivity: float
    dt_refinement_delta: float = math.nan


@dataclass
class SolveTrace:
    spec: ProblemSpec
    eps: float
    form: str
    times: np.ndarray
    G: np.ndarray
    G1: np.ndarray
    Lp: np.ndarray
    Lpsi: np.ndarray
    max_abs_u: np.ndarray
    support_radius: np.ndarray
    key_residual: np.ndarray = field(default_factory=lambda: np.zeros(0))
    step_times: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    step_max: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    blowup: Optional[BlowupRecord] = None
    terminated_reason: str = "t_max"
    g1_identity_residual_max: float = math.nan
    profiles: Dict[float, Tuple[float, np.ndarray]] = field(default_factory=dict, repr=False)

    @property
    def t_num(self) -> float:
        return self.blowup.t_num if self.blowup else math.nan

    def meta(self) -> Dict[str, Any]:
        b = self.blowup
        return {
            "t_num": b.t_num if b else None,
            "threshold": b.threshold_used if b else self.spec.blowup_threshold,
            "threshold_sensitivity": b.threshold_sensitivity if b else None,
            "dt_refinement_delta": _json_float(b.dt_refinement_delta) if b else None,
            "terminated_reason": self.terminated_reason,
            "eps": self.eps,
            "form": self.form,
            "g1_identity_residual_max": _json_float(self.g1_identity_residual_max),
            "config": self.spec.to_config(),
        }


def _json_float(x: float) -> Optional[float]:
    return None if x is None or not math.isfinite(x) else x


# ==================== SCHEME ====================


def _abs_power(y: np.ndarray, p: float) -> np.ndarray:
    """|y|^p as exp(p log|y|), zero below 1e-300"""
    a = np.abs(y)
    out = np.zeros_like(a)
    live = a >= POWER_FLOOR
    out[live] = np.exp(p * np.log(a[live]))
    return out


def _laplacian(y: np.ndarray, r: np.ndarray, n: int, dr: float, k: int) -> np.ndarray:
    """u_rr + (n-1)/r u_r on indices 0..k, with n u_rr at the origin"""
    out = np.zeros(k + 1)
    inner = slice(1, k + 1)
    out[inner] = ((y[2:k + 2] - 2.0 * y[1:k + 1] + y[0:k]) / dr ** 2
                  + (n - 1.0) / r[inner] * (y[2:k + 2] - y[0:k]) / (2.0 * dr))
    out[0] = 2.0 * n * (y[1] - y[0]) / dr ** 2
    return out


def _even_origin(y: np.ndarray):
    # value at r = 0 from the even quadratic through r_1, r_2
    y[0] = (4.0 * y[1] - y[2]) / 3.0


class _Equation:
    """Right-hand side pieces for one of the two forms"""

    def __init__(self, spec: ProblemSpec, form: str, r: np.ndarray, forcing: Optional[Forcing]):
        self.spec = spec
        self.form = form
        self.r = r
        self.forcing = forcing

    def damping(self, t: float) -> float:
        return self.spec.mu / (1.0 + t) if self.form == "original" else 0.0

    def rhs(self, y: np.ndarray, t: float, k: int, dr: float) -> np.ndarray:
        spec, mu = self.spec, self.spec.mu
        yk = y[:k + 1]
        out = _laplacian(y, self.r, spec.n, dr, k)
        source = _abs_power(yk, spec.p)
        if self.form == "liouville":
            out -= mu * (2.0 - mu) / (4.0 * (1.0 + t) ** 2) * yk
            source *= (1.0 + t) ** (-mu * (spec.p - 1.0) / 2.0)
        out += source
        if self.forcing is not None:
            out += self.forcing(t, self.r[:k + 1])
        return out

    def to_u(self, y: np.ndarray, t: float) -> np.ndarray:
        if self.form == "original":
            return y
        return y * (1.0 + t) ** (-0.5 * self.spec.mu)


def _record(rec: Dict[str, List[float]], u: np.ndarray, t: float, grid: RadialGrid,
            weights: np.ndarray, log_phi: np.ndarray, spec: ProblemSpec):
    up = _abs_power(u, spec.p)
    psi = np.exp(specfun.log_lambda_grid(spec.mu, np.array([t]))[0] + log_phi)
    live = np.nonzero(np.abs(u) > SUPPORT_TOL)[0]
    rec["t"].append(t)
    rec["G"].append(float(np.dot(weights, u)))
    rec["G1"].append(float(np.dot(weights, u * psi)))
    rec["Lp"].append(float(np.dot(weights, up)))
    rec["Lpsi"].append(float(np.dot(weights, up * psi)))
    rec["max_abs_u"].append(float(np.max(np.abs(u))))
    rec["support_radius"].append(float(grid.r[live[-1]]) if live.size else 0.0)


def _integrate(spec: ProblemSpec, eps: float, form: str, forcing: Optional[Forcing],
               initial: Optional[Tuple[Callable, Callable]], snapshot_times: Sequence[float]) -> SolveTrace:
    grid = RadialGrid.from_spec(spec)
    r, dr, dt = grid.r, grid.dr, grid.dt
    mu, R = spec.mu, spec.R
    eq = _Equation(spec, form, r, forcing)
    weights = grid.weights(spec.n)
    log_phi = specfun.log_phi_grid(spec.n, r)

    if initial is None:
        u0, v0 = eps * spec.f(r), eps * spec.g(r)
    else:
        u0, v0 = np.asarray(initial[0](r), dtype=float), np.asarray(initial[1](r), dtype=float)
    if form == "liouville":
        v0 = v0 + 0.5 * mu * u0

    rec: Dict[str, List[float]] = {k: [] for k in ("t", "G", "G1", "Lp", "Lpsi", "max_abs_u", "support_radius")}
    step_times, step_max = [0.0], [float(np.max(np.abs(u0)))]
    profiles: Dict[float, Tuple[float, np.ndarray]] = {}
    pending = sorted(float(s) for s in snapshot_times)

    def snapshot(y: np.ndarray, t: float):
        while pending and t >= pending[0] - 0.5 * dt:
            profiles[pending.pop(0)] = (t, eq.to_u(y, t).copy())

    y_prev = u0.copy()
    _record(rec, eq.to_u(y_prev, 0.0), 0.0, grid, weights, log_phi, spec)
    snapshot(y_prev, 0.0)

    # Taylor first step
    k = grid.cone_index(dt, R)
    y = np.zeros_like(y_prev)
    accel = eq.rhs(y_prev, 0.0, k, dr) - eq.damping(0.0) * v0[:k + 1]
    y[:k + 1] = y_prev[:k + 1] + dt * v0[:k + 1] + 0.5 * dt * dt * accel
    _even_origin(y)

    threshold = spec.blowup_threshold
    n_steps = int(math.floor(spec.grid.t_max / dt + 1e-9))
    reason = "t_max"
    m = 1
    while True:
        t = m * dt
        u = eq.to_u(y, t)
        top = float(np.max(np.abs(u)))
        step_times.append(t)
        step_max.append(top)
        snapshot(y, t)
        if not math.isfinite(top):
            reason = "instability"
            logger.warning(f"Non-finite solution at t={t:.6g} (eps={eps}, form={form})")
            break
        done = top >= threshold or m >= n_steps
        if m % spec.output_stride == 0 or done:
            _record(rec, u, t, grid, weights, log_phi, spec)
        if top >= threshold:
            reason = "blowup"
            break
        if m >= n_steps:
            break

        k = grid.cone_index(t + dt, R)
        c = 0.5 * dt * eq.damping(t)
        y_next = np.zeros_like(y)
        with np.errstate(over="ignore", invalid="ignore"):
            y_next[:k + 1] = (2.0 * y[:k + 1] - (1.0 - c) * y_prev[:k + 1]
                              + dt * dt * eq.rhs(y, t, k, dr)) / (1.0 + c)
        _even_origin(y_next)
        y_prev, y = y, y_next
        m += 1

    trace = SolveTrace(
        spec=spec,
        eps=eps,
        form=form,
        times=np.array(rec["t"]),
        G=np.array(rec["G"]),
        G1=np.array(rec["G1"]),
        Lp=np.array(rec["Lp"]),
        Lpsi=np.array(rec["Lpsi"]),
        max_abs_u=np.array(rec["max_abs_u"]),
        support_radius=np.array(rec["support_radius"]),
        step_times=np.array(step_times),
        step_max=np.array(step_max),
        terminated_reason=reason,
        profiles=profiles,
    )
    trace.blowup = detect_blowup(trace, threshold) if reason == "blowup" else None
    with np.errstate(all="ignore"):
        trace.key_residual = key_identity_residual(trace, mu)
        g1_res = g1_identity_residual(trace, mu)
    finite = g1_res[np.isfinite(g1_res)]
    trace.g1_identity_residual_max = float(np.max(finite)) if finite.size else math.nan
    return trace


def solve(spec: ProblemSpec, eps: float, form: str = "original", *,
          forcing: Optional[Forcing] = None,
          initial: Optional[Tuple[Callable, Callable]] = None,
          snapshot_times: Sequence[float] = (),
          refine: bool = False) -> SolveTrace:
    """
    Integrate the radial Cauchy problem up to t_max or blow-up

    Args:
        spec: Problem instance (data, grid, threshold)
        eps: Data size; u(0) = eps f, u_t(0) = eps g
        form: "original" for u, "liouville" for w = (1+t)^(mu/2) u
        forcing: Extra source F(t, r) added to the right-hand side
        initial: (u0(r), u1(r)) overriding eps f and eps g
        snapshot_times: Times at which to keep the profile of u
        refine: Re-run with dt/2 and record the change in T_num

    Returns:
        SolveTrace with functionals of u at every output stride
    """
    if eps <= 0:
        raise InvalidArgument(f"eps must be > 0, got {eps}")
    if form not in FORMS:
        raise InvalidArgument(f"form must be one of {FORMS}, got {form!r}")

    logger.info(f"Solving n={spec.n}, mu={spec.mu}, p={spec.p}, eps={eps}, form={form}, dr={spec.grid.dr}")
    trace = _integrate(spec, eps, form, forcing, initial, snapshot_times)

    if refine and trace.blowup is not None:
        fine = _integrate(spec.with_grid(cfl=0.5 * spec.grid.cfl), eps, form, forcing, initial, ())
        if fine.blowup is not None:
            delta = abs(fine.blowup.t_num - trace.blowup.t_num)
            trace.blowup = replace(trace.blowup, dt_refinement_delta=delta)

    if trace.blowup:
        logger.info(f"Blow-up at T_num={trace.blowup.t_num:.6g} (eps={eps})")
    else:
        logger.info(f"Run ended at t={trace.times[-1]:.6g}: {trace.terminated_reason}")
    return trace


# ==================== BLOW-UP ====================


def _crossing(times: np.ndarray, values: np.ndarray, level: float) -> Optional[float]:
    hits = np.nonzero(values >= level)[0]
    if not hits.size:
        return None
    i = int(hits[0])
    if i == 0:
        return float(times[0])
    a, b = values[i - 1], values[i]
    if a <= 0:
        return float(times[i])
    frac = (math.log(level) - math.log(a)) / (math.log(b) - math.log(a))
    return float(times[i - 1] + frac * (times[i] - times[i - 1]))


def detect_blowup(trace: SolveTrace, threshold: float) -> Optional[BlowupRecord]:
    """
    First time max|u| reaches threshold, interpolated in log|u| between steps

    threshold_sensitivity is the gap to the crossing two decades lower.
    """
    if threshold < 1e3:
        raise InvalidArgument(f"threshold must be >= 1e3, got {threshold}")
    times, values = trace.step_times, trace.step_max
    if not values.size:
        return None
    finite = np.where(np.isfinite(values), values, -np.inf)
    t_num = _crossing(times, finite, threshold)
    if t_num is None:
        return None
    t_low = _crossing(times, finite, threshold * 10.0 ** -SENSITIVITY_DECADES)
    return BlowupRecord(t_num=t_num, threshold_used=threshold, threshold_sensitivity=abs(t_num - t_low))


# ==================== IDENTITIES ====================


def _normalised(defect: np.ndarray, integral: np.ndarray, start: float) -> np.ndarray:
    scale = np.maximum(np.abs(integral), abs(start))
    out = np.zeros_like(defect)
    live = scale > 0
    out[live] = np.abs(defect[live]) / scale[live]
    return out


def _time_derivative(values: np.ndarray, times: np.ndarray) -> np.ndarray:
    if len(times) < 3:
        return np.zeros_like(values)
    return np.gradient(values, times, edge_order=2)


def key_identity_residual(trace: SolveTrace, mu: float) -> np.ndarray:
    """
    (1+t)^mu G'(t) - G'(0) - int_0^t (1+s)^mu Lp(s) ds, relative to the integral term
    """
    t = trace.times
    if len(t) < 3:
        return np.zeros_like(t)
    dG = _time_derivative(trace.G, t)
    integral = integrate.cumulative_trapezoid((1.0 + t) ** mu * trace.Lp, t, initial=0.0)
    defect = (1.0 + t) ** mu * dG - dG[0] - integral
    return _normalised(defect, integral, dG[0])


def g1_identity_residual(trace: SolveTrace, mu: float) -> np.ndarray:
    """
    Q(t) - Q(0) - int_0^t Lpsi with Q = G1' + (mu/(1+t) - 2 lambda'/lambda) G1
    """
    t = trace.times
    if len(t) < 3 or not np.all(np.isfinite(trace.Lpsi)):
        return np.zeros_like(t)
    dG1 = _time_derivative(trace.G1, t)
    q = dG1 + (mu / (1.0 + t) - 2.0 * specfun.lambda_log_derivative_grid(mu, t)) * trace.G1
    integral = integrate.cumulative_trapezoid(trace.Lpsi, t, initial=0.0)
    return _normalised(q - q[0] - integral, integral, q[0])


# ==================== LOWER BOUNDS ====================


@dataclass(frozen=True)
class BoundCheck:
    name: str
    margin: Optional[float]
    points: int

    @property
    def ok(self) -> bool:
        return self.margin is None or self.margin >= 1.0


@dataclass
class VerifyReport:
    checks: Dict[str, BoundCheck] = field(default_factory=dict)
    skipped: bool = False
    reason: str = ""
    window: Tuple[float, float] = (math.nan, math.nan)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks.values())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "ok": self.ok,
            "skipped": self.skipped,
            "reason": self.reason,
            "window": list(self.window),
            "checks": {k: {"margin": c.margin, "points": c.points, "ok": c.ok} for k, c in self.checks.items()},
        }


def log_inverse_weight_integral(mu: float, t: float) -> float:
    """log of int_0^t (1+t) K^2(1+t) / ((1+s) K^2(1+s)) ds, K = K_{(mu-1)/2}"""
    if t <= 0:
        return -math.inf
    nu = 0.5 * (mu - 1.0)
    s_end = 1.0 + t

    def integrand(s: float) -> float:
        return math.exp(-math.log1p(s) - 2.0 * math.log(special.kve(nu, 1.0 + s)) + 2.0 * (s - t))

    value, _ = integrate.quad(integrand, 0.0, t, epsabs=0.0, epsrel=1e-10, limit=200)
    return math.log(s_end) + 2.0 * math.log(special.kve(nu, s_end)) + math.log(value)


def lower_bound_rhs(cert: Certificate, eps: float, t: float) -> Dict[str, float]:
    """log of the right-hand sides of the Lp, G and G1 lower bounds at time t > T0"""
    n, mu, p = cert.n, cert.mu, cert.p
    log_eps = math.log(eps)
    return {
        "Lp": math.log(cert.c1) + p * log_eps + (n - 1.0 - (n + mu - 1.0) * p / 2.0) * math.log1p(t),
        "G": (math.log(cert.c2) + p * log_eps - (mu + (n + mu - 1.0) * p / 2.0) * math.log1p(t)
              + (n + mu + 1.0) * math.log(t - cert.t0)),
        "G1": log_eps + math.log(cert.c_fg) + log_inverse_weight_integral(mu, t),
    }


def _log_or_neg_inf(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def _psi_mass_in_cone(spec: ProblemSpec, t: float, grid: RadialGrid, weights: np.ndarray,
                      log_phi: np.ndarray) -> float:
    """log of sum of psi^p' over the grid points inside the discrete cone"""
    k = grid.cone_index(t, spec.R)
    pc = spec.p / (spec.p - 1.0)
    log_psi = specfun.log_lambda_grid(spec.mu, np.array([t]))[0] + log_phi[:k + 1]
    return float(special.logsumexp(pc * log_psi, b=weights[:k + 1]))


def verify_lower_bounds(trace: SolveTrace, cert: Certificate, spec: ProblemSpec, eps: float,
                        strict: bool = False) -> VerifyReport:
    """
    Check the proven lower bounds on the recorded functionals

    The Lp, G and G1 bounds are checked for T0 < t < end of trace (capped at 0.9 T_num
    after blow-up); the two Hoelder steps are checked at every recorded t > 0. Margins
    are the minimum of LHS/RHS.
    """
    if not spec.is_admissible():
        logger.info("Zero data: lower-bound check skipped")
        return VerifyReport(skipped=True, reason="zero data")

    t = trace.times
    t_end = 0.9 * trace.blowup.t_num if trace.blowup else t[-1]
    window = (t > cert.t0) & (t < t_end)
    report = VerifyReport(window=(cert.t0, float(t_end)))

    logs: Dict[str, List[float]] = {"Lp": [], "G": [], "G1": []}
    for i in np.nonzero(window)[0]:
        rhs = lower_bound_rhs(cert, eps, float(t[i]))
        logs["Lp"].append(_log_or_neg_inf(trace.Lp[i]) - rhs["Lp"])
        logs["G"].append(_log_or_neg_inf(trace.G[i]) - rhs["G"])
        logs["G1"].append(_log_or_neg_inf(trace.G1[i]) - rhs["G1"])
    for name, values in logs.items():
        margin = math.exp(min(values)) if values else None
        report.checks[name] = BoundCheck(name, margin, len(values))

    grid = RadialGrid.from_spec(spec)
    weights = grid.weights(spec.n)
    log_phi = specfun.log_phi_grid(spec.n, grid.r)
    p = spec.p
    holder_support, holder_psi = [], []
    for i in np.nonzero((t > 0) & (t < t_end))[0]:
        if not (math.isfinite(trace.Lp[i]) and math.isfinite(trace.G[i]) and math.isfinite(trace.G1[i])):
            continue
        ti = float(t[i])
        log_lp = _log_or_neg_inf(trace.Lp[i])
        if trace.G[i] != 0:
            holder_support.append(log_lp - (math.log(cert.c0) - spec.n * (p - 1.0) * math.log1p(ti)
                                            + p * math.log(abs(trace.G[i]))))
        if trace.G1[i] != 0:
            log_den = _psi_mass_in_cone(spec, ti, grid, weights, log_phi)
            holder_psi.append(log_lp - (p * math.log(abs(trace.G1[i])) - (p - 1.0) * log_den))
    report.checks["holder_support"] = BoundCheck(
        "holder_support", math.exp(min(holder_support)) if holder_support else None, len(holder_support))
    report.checks["holder_test_function"] = BoundCheck(
        "holder_test_function", math.exp(min(holder_psi)) if holder_psi else None, len(holder_psi))

    for check in report.checks.values():
        logger.info(f"Bound {check.name}: margin={check.margin} over {check.points} points")
    if strict and not report.ok:
        failed = [c.name for c in report.checks.values() if not c.ok]
        raise BoundViolated(f"lower bounds violated: {failed}")
    return report


# ==================== PERSISTENCE ====================


def write_trace(trace: SolveTrace, path: Union[str, Path]) -> Tuple[Path, Path]:
    """Trace CSV plus its .meta.json sidecar"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = [trace.times, trace.G, trace.G1, trace.Lp, trace.max_abs_u, trace.key_residual, trace.support_radius]
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(TRACE_COLUMNS)
        for row in zip(*columns):
            writer.writerow([repr(float(x)) for x in row])

    meta_path = path.with_suffix(".meta.json")
    with open(meta_path, "w") as f:
        json.dump(trace.meta(), f, indent=2, sort_keys=True)
    return path, meta_path


def read_trace(path: Union[str, Path]) -> SolveTrace:
    path = Path(path)
    meta_path = path.with_suffix(".meta.json")
    with open(meta_path) as f:
        meta = json.load(f)
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if tuple(header) != TRACE_COLUMNS:
            raise InvalidArgument(f"unexpected trace columns {header}")
        data = np.array([[float(x) for x in row] for row in reader], dtype=float).reshape(-1, len(TRACE_COLUMNS))

    spec = ProblemSpec.from_mapping(meta["config"])
    blowup = None
    if meta.get("t_num") is not None:
        delta = meta.get("dt_refinement_delta")
        blowup = BlowupRecord(
            t_num=meta["t_num"],
            threshold_used=meta["threshold"],
            threshold_sensitivity=meta["threshold_sensitivity"],
            dt_refinement_delta=math.nan if delta is None else delta,
        )
    g1_max = meta.get("g1_identity_residual_max")
    return SolveTrace(
        spec=spec,
        eps=float(meta["eps"]),
        form=meta.get("form", "original"),
        times=data[:, 0],
        G=data[:, 1],
        G1=data[:, 2],
        Lp=data[:, 3],
        Lpsi=np.full(len(data), math.nan),
        max_abs_u=data[:, 4],
        key_residual=data[:, 5],
        support_radius=data[:, 6],
        blowup=blowup,
        terminated_reason=meta["terminated_reason"],
        g1_identity_residual_max=math.nan if g1_max is None else g1_max,
    )
