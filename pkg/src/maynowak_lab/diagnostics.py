"""Monitored norms, the mass residual, the n=1 functional, and run classification."""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import asdict, dataclass, fields
from typing import Optional, Sequence

import numpy as np

from .grid import dirichlet_energy, grad_norm_lq, max_face_gradient
from .models import ModelSpec, State, System
from .stepper import Termination, TerminationKind

PLATEAU_DELTA = 0.05
GROWTH_FACTOR = 2.0
PLATEAU_ATOL = 1e-12
MIN_ROWS = 10

CSV_COLUMNS = (
    "t",
    "dt",
    "mass_u",
    "mass_v",
    "mass_w",
    "linf_u",
    "linf_w",
    "grad_v_lq",
    "functional_E",
    "mass_ode_residual",
)


class TooFewSamples(ValueError):
    pass


@dataclass(frozen=True)
class DiagnosticsRow:
    t: float
    dt: float
    mass_u: float
    mass_v: float
    mass_w: Optional[float]
    linf_u: float
    linf_w: Optional[float]
    grad_v_lq: float
    functional_E: Optional[float]
    mass_ode_residual: Optional[float]
    max_grad_v: float = 0.0

    @property
    def z(self) -> float:
        return self.mass_u + self.mass_v


def default_q(n: int) -> float:
    return float(n + 1)


def functional_value(state: State, alpha: float) -> Optional[float]:
    """``(1/alpha) int u^alpha + (1/2) int |grad v|^2``; ``None`` unless ``alpha > 0``."""
    if not alpha > 0.0:
        return None
    grid = state.grid
    u = np.maximum(state.u, 0.0)
    return grid.integrate(u**alpha) / alpha + 0.5 * dirichlet_energy(grid, state.v)


def expected_mass(z_prev: float, elapsed: float, kappa: float, volume: float) -> float:
    """Exact solution of ``z' = -z + kappa |Omega|`` after ``elapsed``."""
    decay = math.exp(-elapsed)
    return z_prev * decay + kappa * volume * (1.0 - decay)


def compute_row(
    state: State,
    spec: ModelSpec,
    q: float,
    prev_row: Optional[DiagnosticsRow] = None,
    dt: float = 0.0,
) -> DiagnosticsRow:
    """Quadrature of every monitored quantity at ``state``.

    The mass residual compares ``int (u + v)`` with the exact linear ODE
    solution started from ``prev_row``; it is ``None`` when the identity does
    not apply (comparison systems, ``d1 != 1`` or ``d2 != 1``).
    """
    if not q > 1.0:
        raise ValueError(f"q must exceed 1, got {q}")
    grid = state.grid
    mass_u = grid.integrate(np.abs(state.u))
    mass_v = grid.integrate(np.abs(state.v))
    has_w = state.w is not None
    residual = None
    if spec.mass_identity_applies:
        z = grid.integrate(state.u) + grid.integrate(state.v)
        if prev_row is None:
            residual = 0.0
        else:
            residual = z - expected_mass(prev_row.z, state.t - prev_row.t, spec.kappa, grid.total_volume)
    return DiagnosticsRow(
        t=state.t,
        dt=dt,
        mass_u=mass_u,
        mass_v=mass_v,
        mass_w=grid.integrate(np.abs(state.w)) if has_w else None,
        linf_u=float(np.max(np.abs(state.u))),
        linf_w=float(np.max(np.abs(state.w))) if has_w else None,
        grad_v_lq=grad_norm_lq(grid, state.v, q),
        functional_E=functional_value(state, spec.conversion.alpha),
        mass_ode_residual=residual,
        max_grad_v=max_face_gradient(grid, state.v),
    )


class Recorder:
    """Observer that appends a :class:`DiagnosticsRow` per sampled state."""

    def __init__(self, spec: ModelSpec, q: float):
        self.spec = spec
        self.q = q
        self.rows: list[DiagnosticsRow] = []

    def __call__(self, state: State, dt: float) -> None:
        prev = self.rows[-1] if self.rows else None
        self.rows.append(compute_row(state, self.spec, self.q, prev, dt))


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


def rows_to_csv(rows: Sequence[DiagnosticsRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(getattr(row, c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def rows_from_csv(text: str) -> list[DiagnosticsRow]:
    reader = csv.DictReader(io.StringIO(text))
    out = []
    for rec in reader:
        values = {c: (float(rec[c]) if rec[c] != "" else None) for c in CSV_COLUMNS}
        out.append(DiagnosticsRow(**values))
    return out


class Classification(str, enum.Enum):
    BOUNDED = "Bounded"
    GROWING = "Growing"
    BLOW_UP = "BlowUp"
    INCONCLUSIVE = "Inconclusive"
    DIVERGED = "Diverged"


@dataclass(frozen=True)
class RunOutcome:
    classification: Classification
    t_detect: Optional[float]
    termination: str
    peak_linf_u: float
    peak_grad_v_lq: float
    peak_linf_w: Optional[float]
    plateau_ratios: dict
    reason: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["classification"] = self.classification.value
        return d


def _halves(series: Sequence[DiagnosticsRow], attr: str):
    values = [getattr(r, attr) for r in series]
    if any(v is None for v in values):
        return None
    t0, t1 = series[0].t, series[-1].t
    mid = 0.5 * (t0 + t1)
    first = max(v for r, v in zip(series, values) if r.t <= mid)
    later = [v for r, v in zip(series, values) if r.t > mid]
    last = max(later) if later else first
    return first, last


def plateau_ratio(series: Sequence[DiagnosticsRow], attr: str) -> Optional[float]:
    """Late-half maximum over early-half maximum of one monitored norm."""
    halves = _halves(series, attr)
    if halves is None:
        return None
    first, last = halves
    if first <= PLATEAU_ATOL:
        return 1.0 if last <= PLATEAU_ATOL else math.inf
    return last / first


def plateaus(series: Sequence[DiagnosticsRow], attr: str, delta: float = PLATEAU_DELTA) -> Optional[bool]:
    halves = _halves(series, attr)
    if halves is None:
        return None
    first, last = halves
    return bool(last <= (1.0 + delta) * first + PLATEAU_ATOL)


def classify(
    series: Sequence[DiagnosticsRow],
    termination: Termination,
    delta: float = PLATEAU_DELTA,
) -> RunOutcome:
    """Bounded / Growing / BlowUp / Inconclusive (plus Diverged for failed runs).

    Bounded requires ``|u|_inf``, ``|grad v|_q`` and (when present)
    ``|w|_inf`` to satisfy the two-halves plateau test with tolerance ``delta``.
    """
    if not series:
        raise TooFewSamples("empty series")
    peak_w = [r.linf_w for r in series if r.linf_w is not None]
    ratios = {a: plateau_ratio(series, a) for a in ("linf_u", "grad_v_lq", "linf_w")}
    common = dict(
        termination=termination.kind.value,
        peak_linf_u=max(r.linf_u for r in series),
        peak_grad_v_lq=max(r.grad_v_lq for r in series),
        peak_linf_w=max(peak_w) if peak_w else None,
        plateau_ratios=ratios,
    )
    if termination.kind is TerminationKind.BLOW_UP_SUSPECTED:
        return RunOutcome(Classification.BLOW_UP, termination.t, reason=termination.reason, **common)
    if termination.kind is TerminationKind.DIVERGED:
        return RunOutcome(Classification.DIVERGED, termination.t, reason=termination.reason, **common)
    if len(series) < MIN_ROWS:
        raise TooFewSamples(f"need at least {MIN_ROWS} rows, got {len(series)}")
    checks = [plateaus(series, a, delta) for a in ("linf_u", "grad_v_lq", "linf_w")]
    if all(c is not False for c in checks):
        return RunOutcome(Classification.BOUNDED, None, reason="all monitored norms plateau", **common)
    first, last = _halves(series, "linf_u")
    if last > GROWTH_FACTOR * first:
        return RunOutcome(Classification.GROWING, None, reason="late |u|_inf more than doubled", **common)
    return RunOutcome(Classification.INCONCLUSIVE, None, reason="plateau test failed", **common)


@dataclass(frozen=True)
class FunctionalReport:
    applicable: bool
    sup_E: Optional[float] = None
    plateau: Optional[bool] = None
    slope: Optional[float] = None
    intercept: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)


def check_functional_dissipation(
    series: Sequence[DiagnosticsRow], alpha: float, n: int, delta: float = PLATEAU_DELTA
) -> FunctionalReport:
    """Boundedness of ``E(t)`` and a least-squares fit ``dE/dt ~ intercept + slope * E`` on the tail.

    Only meaningful for ``n = 1`` and ``1 < alpha < 2``; otherwise returns a
    not-applicable report.  The fit is reported, not asserted.
    """
    if n != 1 or not 1.0 < alpha < 2.0:
        return FunctionalReport(applicable=False)
    rows = [r for r in series if r.functional_E is not None]
    if len(rows) < 2:
        return FunctionalReport(applicable=True)
    E = np.array([r.functional_E for r in rows])
    t = np.array([r.t for r in rows])
    tail = t > 0.5 * (t[0] + t[-1])
    slope = intercept = None
    if np.count_nonzero(tail) >= 3:
        tt, EE = t[tail], E[tail]
        dE = np.gradient(EE, tt)
        if np.ptp(EE) > 0.0:
            slope, intercept = (float(c) for c in np.polyfit(EE, dE, 1))
        else:
            slope, intercept = 0.0, 0.0
    return FunctionalReport(
        applicable=True,
        sup_E=float(E.max()),
        plateau=plateaus(rows, "functional_E", delta),
        slope=slope,
        intercept=intercept,
    )


def row_as_dict(row: DiagnosticsRow) -> dict:
    return {f.name: getattr(row, f.name) for f in fields(row)}
