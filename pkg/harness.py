"""
Experiment Harness
Epsilon sweeps, scaling-law fits against the certificate, bound compliance, persistence and plot emission
"""

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from certificate import Certificate, compute_constants, lifespan_bound
from error_recovery import ErrorRecoverySystem, InstabilityDetected, InsufficientData, InvalidArgument
from problem_spec import ProblemSpec
from solver import SolveTrace, solve

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ("eps", "t_num", "threshold_sensitivity", "dt_delta",
                 "bound_threshold", "bound_ok", "c4_bound", "c4_ok")
SENSITIVITY_FRACTION = 0.05
MONOTONE_TOLERANCE = 0.05
MIN_FIT_POINTS = 3
CERT_HEADER_FIELDS = ("n", "mu", "p", "R", "c0", "c_fg", "c_phi", "c_phi_r", "c1", "c2", "c3", "c4",
                      "log_c4", "alpha", "beta", "s_p_inf", "t0", "gamma", "lifespan_exponent")

DATA_FILE = "scaling_data.txt"
PLOT_SCRIPT = "plot_scaling.py"
SUMMARY_FILE = "summary.txt"


def default_eps_list(start: float = 0.8, ratio: float = 0.7, count: int = 6) -> List[float]:
    return [start * ratio ** k for k in range(count)]


# ==================== RESULTS ====================


@dataclass
class SweepEntry:
    eps: float
    t_num: float = math.nan
    threshold_sensitivity: float = math.nan
    dt_delta: float = math.nan
    bound_threshold: float = math.nan
    bound_ok: bool = True
    c4_bound: float = math.nan
    c4_ok: bool = True
    terminated_reason: str = ""
    error: Optional[str] = None

    @property
    def blew_up(self) -> bool:
        return math.isfinite(self.t_num)

    @property
    def fit_valid(self) -> bool:
        """Blow-up detected and insensitive to the threshold"""
        return (self.blew_up and math.isfinite(self.threshold_sensitivity)
                and self.threshold_sensitivity < SENSITIVITY_FRACTION * self.t_num)


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r_squared: float


@dataclass
class SweepResult:
    config: Dict[str, str]
    cert: Certificate
    entries: List[SweepEntry]
    fit: Optional[FitResult] = None
    fit_status: str = "insufficient data"
    eps0: float = math.nan
    error_report: Dict[str, Any] = field(default_factory=dict)

    @property
    def predicted_slope(self) -> float:
        return -self.cert.lifespan_exponent

    @property
    def fitted_slope(self) -> float:
        return self.fit.slope if self.fit else math.nan

    @property
    def monotone_ok(self) -> bool:
        """T_num increases as eps decreases, up to 5% discretisation noise"""
        times = [e.t_num for e in self.entries if e.blew_up]
        return all(b > (1.0 - MONOTONE_TOLERANCE) * a for a, b in zip(times, times[1:]))


# ==================== FIT ====================


def fit_scaling(entries: Sequence[SweepEntry]) -> FitResult:
    """Least squares on (log eps, log T_num) over the fit-valid entries"""
    points = [(e.eps, e.t_num) for e in entries if e.fit_valid]
    if len(points) < MIN_FIT_POINTS:
        raise InsufficientData(f"need {MIN_FIT_POINTS} valid entries for a fit, got {len(points)}")
    x = np.log([pt[0] for pt in points])
    y = np.log([pt[1] for pt in points])
    res = stats.linregress(x, y)
    return FitResult(slope=float(res.slope), intercept=float(res.intercept), r_squared=float(res.rvalue ** 2))


# ==================== SWEEP ====================


def _check_stable(trace: SolveTrace) -> SolveTrace:
    if trace.terminated_reason == "instability":
        raise InstabilityDetected(f"non-finite solution for eps={trace.eps} before the threshold")
    return trace


def _run(spec: ProblemSpec, eps: float, refine: bool) -> SolveTrace:
    return _check_stable(solve(spec, eps, "original", refine=refine))


def _entry(cert: Certificate, spec: ProblemSpec, eps: float, trace: Optional[SolveTrace],
           error: Optional[str]) -> SweepEntry:
    bound = lifespan_bound(cert, eps)
    entry = SweepEntry(eps=eps, bound_threshold=bound.t_bound, c4_bound=bound.t_asymptotic, error=error)
    if trace is None:
        entry.terminated_reason = "failed"
        return entry

    entry.terminated_reason = trace.terminated_reason
    if trace.blowup is not None:
        entry.t_num = trace.blowup.t_num
        entry.threshold_sensitivity = trace.blowup.threshold_sensitivity
        entry.dt_delta = trace.blowup.dt_refinement_delta
        entry.bound_ok = entry.t_num <= entry.bound_threshold
        entry.c4_ok = entry.t_num <= entry.c4_bound
    else:
        # surviving past a certified blow-up time is a violation too
        t_end = float(trace.times[-1])
        entry.bound_ok = t_end < entry.bound_threshold
        entry.c4_ok = t_end < entry.c4_bound
    return entry


def sweep(spec: ProblemSpec, eps_list: Sequence[float], jobs: int = 1,
          cert: Optional[Certificate] = None,
          recovery: Optional[ErrorRecoverySystem] = None) -> SweepResult:
    """
    Solve for every eps, detect blow-up and compare with the certified bound

    Args:
        spec: Problem instance shared by all entries
        eps_list: Distinct positive data sizes
        jobs: Number of concurrent solves
        cert: Precomputed certificate for spec
        recovery: Error recovery system used for failed entries

    Returns:
        SweepResult sorted by descending eps
    """
    eps_sorted = sorted((float(e) for e in eps_list), reverse=True)
    if not eps_sorted:
        raise InvalidArgument("eps_list must not be empty")
    if len(set(eps_sorted)) != len(eps_sorted):
        raise InvalidArgument("eps_list entries must be distinct")
    if eps_sorted[-1] <= 0:
        raise InvalidArgument("eps_list entries must be > 0")
    if jobs < 1:
        raise InvalidArgument(f"jobs must be >= 1, got {jobs}")

    recovery = recovery or ErrorRecoverySystem()
    memory = recovery.check_memory_usage()
    if memory.get("status") == "critical":
        logger.warning(f"Memory usage at {memory.get('percent')}% before sweep")

    cert = cert or compute_constants(spec)
    smallest = eps_sorted[-1]
    logger.info(f"Sweep over {len(eps_sorted)} eps values with {jobs} jobs")

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = {eps: pool.submit(_run, spec, eps, eps == smallest) for eps in eps_sorted}
        outcomes: Dict[float, Tuple[Optional[SolveTrace], Optional[Exception]]] = {}
        for eps in eps_sorted:
            try:
                outcomes[eps] = (futures[eps].result(), None)
            except Exception as e:
                outcomes[eps] = (None, e)

    entries = []
    for eps in eps_sorted:
        trace, error = outcomes[eps]
        message = None
        if error is not None:
            context = {
                "eps": eps,
                "cfl": spec.grid.cfl,
                "retry_function": lambda cfl, eps=eps: _run(spec.with_grid(cfl=cfl), eps, eps == smallest),
            }
            result = recovery.handle_error(error, context)
            if result.get("success"):
                trace = result["result"]
            else:
                message = f"{type(error).__name__}: {error}"
        entries.append(_entry(cert, spec, eps, trace, message))
        logger.info(f"eps={eps:.6g}: T_num={entries[-1].t_num:.6g}, bound_ok={entries[-1].bound_ok}")

    result = SweepResult(
        config=spec.to_config(),
        cert=cert,
        entries=entries,
        eps0=lifespan_bound(cert, smallest).eps0,
        error_report=recovery.get_error_report(),
    )
    try:
        result.fit = fit_scaling(entries)
        result.fit_status = "ok"
    except InsufficientData as e:
        logger.warning(f"No scaling fit: {e}")
    if not result.monotone_ok:
        logger.warning("T_num is not increasing as eps decreases")
    return result


# ==================== PERSISTENCE ====================


def _fmt(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_bool(text: str) -> bool:
    return text.strip().lower() == "true"


def write_sweep(result: SweepResult, path: Union[str, Path]) -> Path:
    """sweep.csv with the config echo, certificate and fit as '# key=value' header lines"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        for key, value in result.config.items():
            f.write(f"# config.{key}={value}\n")
        for key in CERT_HEADER_FIELDS:
            f.write(f"# cert.{key}={_fmt(getattr(result.cert, key))}\n")
        f.write(f"# eps0={_fmt(result.eps0)}\n")
        f.write(f"# fit.status={result.fit_status}\n")
        if result.fit:
            f.write(f"# fit.slope={_fmt(result.fit.slope)}\n")
            f.write(f"# fit.intercept={_fmt(result.fit.intercept)}\n")
            f.write(f"# fit.r_squared={_fmt(result.fit.r_squared)}\n")
        f.write(f"# predicted_slope={_fmt(result.predicted_slope)}\n")

        writer = csv.writer(f)
        writer.writerow(SWEEP_COLUMNS)
        for e in result.entries:
            writer.writerow([_fmt(float(getattr(e, c))) if c not in ("bound_ok", "c4_ok") else _fmt(getattr(e, c))
                             for c in SWEEP_COLUMNS])
    return path


def read_sweep(path: Union[str, Path]) -> SweepResult:
    header: Dict[str, str] = {}
    rows: List[List[str]] = []
    with open(path, newline="") as f:
        body = []
        for line in f:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                header[key] = value
            else:
                body.append(line)
        rows = list(csv.reader(body))
    if not rows or tuple(rows[0]) != SWEEP_COLUMNS:
        raise InvalidArgument(f"{path} is not a sweep file")

    config = {k[len("config."):]: v for k, v in header.items() if k.startswith("config.")}
    cert_data: Dict[str, Any] = {}
    for key in CERT_HEADER_FIELDS:
        text = header[f"cert.{key}"]
        cert_data[key] = int(text) if key == "n" else float(text)

    entries = []
    for row in rows[1:]:
        values = dict(zip(SWEEP_COLUMNS, row))
        entries.append(SweepEntry(
            eps=float(values["eps"]),
            t_num=float(values["t_num"]),
            threshold_sensitivity=float(values["threshold_sensitivity"]),
            dt_delta=float(values["dt_delta"]),
            bound_threshold=float(values["bound_threshold"]),
            bound_ok=_parse_bool(values["bound_ok"]),
            c4_bound=float(values["c4_bound"]),
            c4_ok=_parse_bool(values["c4_ok"]),
        ))

    fit = None
    if header.get("fit.status") == "ok":
        fit = FitResult(float(header["fit.slope"]), float(header["fit.intercept"]), float(header["fit.r_squared"]))
    return SweepResult(
        config=config,
        cert=Certificate.from_dict(cert_data),
        entries=entries,
        fit=fit,
        fit_status=header.get("fit.status", "insufficient data"),
        eps0=float(header.get("eps0", "nan")),
    )


# ==================== PLOTS ====================


_PLOT_TEMPLATE = '''"""Measured lifespans against the certified bound"""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

T0 = {t0}
LOG_C4 = {log_c4}
EXPONENT = {exponent}
SLOPE = {slope}
INTERCEPT = {intercept}

data = np.atleast_2d(np.loadtxt("{data_file}"))
log_eps, log_t = data[:, 0], data[:, 1]

grid = np.linspace(log_eps.min() - 0.2, log_eps.max() + 0.2, 200)
bound = np.log(np.maximum(T0 + np.exp(LOG_C4 - EXPONENT * grid), 2.0 * T0 + 1.0))

fig, ax = plt.subplots(figsize=(6, 4))
ax.plot(log_eps, log_t, "o", label="measured T_num")
if np.isfinite(SLOPE):
    ax.plot(grid, INTERCEPT + SLOPE * grid, "-", label="fit, slope %.4f" % SLOPE)
ax.plot(grid, bound, "--", label="certified bound")
ax.set_xlabel("log eps")
ax.set_ylabel("log T")
ax.legend()
fig.tight_layout()
fig.savefig("scaling.png", dpi=150)
'''


def _literal(x: float) -> str:
    return repr(float(x)) if math.isfinite(x) else f"float({str(float(x))!r})"


def summary_text(result: SweepResult) -> str:
    blown = [e for e in result.entries if e.blew_up]
    lines = [
        "Lifespan sweep summary",
        f"n={result.cert.n} mu={result.cert.mu!r} p={result.cert.p!r}",
        f"entries: {len(result.entries)}, blow-up detected: {len(blown)}, "
        f"fit-valid: {sum(e.fit_valid for e in result.entries)}",
        f"fit status: {result.fit_status}",
        f"fitted slope: {result.fitted_slope!r}",
        f"predicted slope: {result.predicted_slope!r}",
        f"r squared: {result.fit.r_squared!r}" if result.fit else "r squared: nan",
        f"bound_ok: {sum(e.bound_ok for e in result.entries)}/{len(result.entries)}",
        f"c4_ok: {sum(e.c4_ok for e in result.entries)}/{len(result.entries)}",
        f"eps0: {result.eps0!r}",
        f"monotone: {_fmt(result.monotone_ok)}",
    ]
    return "\n".join(lines) + "\n"


def emit_plots(result: SweepResult, outdir: Union[str, Path]) -> List[Path]:
    """
    Data file, plotting script and text summary for one sweep

    A sweep without blow-up entries yields the summary only.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []

    blown = [e for e in result.entries if e.blew_up]
    if blown:
        data = np.column_stack([
            np.log([e.eps for e in blown]),
            np.log([e.t_num for e in blown]),
            np.log([e.bound_threshold for e in blown]),
        ])
        data_path = outdir / DATA_FILE
        np.savetxt(data_path, data, fmt="%.17g", header="log_eps log_t_num log_bound_threshold")
        written.append(data_path)

        script_path = outdir / PLOT_SCRIPT
        script_path.write_text(_PLOT_TEMPLATE.format(
            t0=_literal(result.cert.t0),
            log_c4=_literal(result.cert.log_c4),
            exponent=_literal(result.cert.lifespan_exponent),
            slope=_literal(result.fitted_slope),
            intercept=_literal(result.fit.intercept if result.fit else math.nan),
            data_file=DATA_FILE,
        ))
        written.append(script_path)

    summary_path = outdir / SUMMARY_FILE
    summary_path.write_text(summary_text(result))
    written.append(summary_path)
    logger.info(f"Wrote {[p.name for p in written]} to {outdir}")
    return written
