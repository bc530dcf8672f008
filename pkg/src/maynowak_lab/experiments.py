"""Single runs, alpha/kappa sweeps, critical-exponent bisection and verification studies."""

from __future__ import annotations

import enum
import logging
import math
import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .diagnostics import (
    Classification,
    FunctionalReport,
    Recorder,
    RunOutcome,
    check_functional_dissipation,
    classify,
    default_q,
    expected_mass,
)
from .grid import GridSpec, build_grid, neumann_laplacian
from .initial_data import InitialData, sample_initial_state
from .models import ConversionKind, ConversionSpec, ModelSpec, State, System, homogeneous_equilibria
from .stepper import IntegrationResult, StepperConfig, integrate, integrate_ode

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunSetup:
    """Everything needed to reproduce one simulation."""

    model: ModelSpec
    grid: GridSpec
    stepper: StepperConfig
    initial: InitialData = field(default_factory=InitialData)
    seed: int = 0
    q: Optional[float] = None
    sample_interval: Optional[float] = None

    @property
    def monitor_q(self) -> float:
        return self.q if self.q is not None else default_q(build_grid(self.grid).dimension)

    @property
    def sampling(self) -> float:
        if self.sample_interval is not None:
            return self.sample_interval
        return self.stepper.t_end / 100.0


@dataclass
class RunRecord:
    setup: RunSetup
    rows: list
    outcome: RunOutcome
    integration: IntegrationResult
    functional: FunctionalReport
    wall_time: float
    snapshots: list = field(default_factory=list)
    """``State`` objects at the sample times, kept only when requested."""


def unreachable_threshold(state0: State, spec: ModelSpec, cfg: StepperConfig) -> bool:
    """True when the blow-up threshold is within a factor two of the largest peak the grid can hold.

    The comparison systems conserve ``int u``, so ``|u|_inf`` can never exceed
    the whole mass packed into the smallest cell, and it approaches that cap
    only slowly.  A collapsing run then crawls at tiny steps without crossing
    the threshold.
    """
    if spec.system is System.MAY_NOWAK_CHEMOTAXIS:
        return False
    grid = state0.grid
    cap = grid.integrate(state0.u) / float(np.min(grid.cell_volumes))
    return cfg.blowup_threshold * max(1.0, float(np.max(state0.u))) >= 0.5 * cap


def run_simulation(setup: RunSetup, keep_snapshots: bool = False) -> RunRecord:
    grid = build_grid(setup.grid)
    state0 = sample_initial_state(grid, setup.model, setup.initial, setup.seed)
    if unreachable_threshold(state0, setup.model, setup.stepper):
        log.warning("blow-up threshold is close to mass / smallest cell volume; refine the grid or lower it")
    recorder = Recorder(setup.model, setup.monitor_q)
    snapshots: list[State] = []

    def observe(state: State, dt: float) -> None:
        recorder(state, dt)
        if keep_snapshots:
            snapshots.append(state)

    start = time.perf_counter()
    result = integrate(state0, setup.model, setup.stepper, observe, setup.sampling)
    wall = time.perf_counter() - start
    outcome = classify(recorder.rows, result.termination)
    functional = check_functional_dissipation(recorder.rows, setup.model.conversion.alpha, grid.dimension)
    return RunRecord(setup, recorder.rows, outcome, result, functional, wall, snapshots)


def with_alpha(setup: RunSetup, alpha: float, kind: Optional[ConversionKind] = None) -> RunSetup:
    """Swap the conversion exponent; ``kind=None`` picks the prototype for ``alpha``."""
    conv = ConversionSpec.prototype(alpha) if kind is None else ConversionSpec(kind, alpha)
    return replace(setup, model=replace(setup.model, conversion=conv))


@dataclass(frozen=True)
class SweepSpec:
    base: RunSetup
    alpha_values: tuple[float, ...]
    kappa_values: tuple[float, ...]
    seeds: tuple[int, ...] = (0,)
    conversion_kind: Optional[ConversionKind] = None
    """``None`` uses the saturated prototype for alpha <= 1 and the power law above."""

    def __post_init__(self) -> None:
        if not (self.alpha_values and self.kappa_values and self.seeds):
            raise ValueError("sweep value lists must be nonempty")

    def tuples(self) -> list[tuple[float, float, int]]:
        return [(a, k, s) for a in self.alpha_values for k in self.kappa_values for s in self.seeds]

    def setup_for(self, alpha: float, kappa: float, seed: int) -> RunSetup:
        setup = with_alpha(self.base, alpha, self.conversion_kind)
        return replace(setup, model=replace(setup.model, kappa=kappa), seed=seed)


@dataclass
class SweepResult:
    outcomes: dict
    records: dict
    empirical_critical_alpha: Optional[float] = None
    critical_bracket: Optional[tuple[float, float]] = None
    invariant_checks: dict = field(default_factory=dict)

    def summary_rows(self) -> list[dict]:
        out = []
        for key in sorted(self.outcomes):
            alpha, kappa, seed = key
            o = self.outcomes[key]
            out.append(
                {
                    "alpha": alpha,
                    "kappa": kappa,
                    "seed": seed,
                    "classification": o.classification.value,
                    "t_detect": o.t_detect,
                    "peak_linf_u": o.peak_linf_u,
                    "peak_grad_v_lq": o.peak_grad_v_lq,
                    "peak_linf_w": o.peak_linf_w,
                }
            )
        return out


SWEEP_COLUMNS = ("alpha", "kappa", "seed", "classification", "t_detect", "peak_linf_u", "peak_grad_v_lq", "peak_linf_w")


def _safe_run(setup: RunSetup) -> RunRecord | RunOutcome:
    try:
        return run_simulation(setup)
    except Exception as exc:  # a failed tuple must not abort the sweep
        log.warning("run failed: %s", exc)
        return RunOutcome(Classification.DIVERGED, None, "error", math.nan, math.nan, None, {}, reason=repr(exc))


def check_run_invariants(record: RunRecord) -> dict:
    """Positivity and (when it applies) the upper mass bound along a finished run."""
    setup = record.setup
    checks = {"positivity": record.integration.worst_negativity >= -1e-12}
    if setup.model.mass_identity_applies and record.rows:
        volume = build_grid(setup.grid).total_volume
        bound = max(record.rows[0].z, setup.model.kappa * volume) + 1e-8
        checks["mass_bound"] = all(r.z <= bound for r in record.rows)
    return checks


def run_sweep(spec: SweepSpec, workers: int = 1, spot_fraction: float = 0.1, spot_seed: int = 0) -> SweepResult:
    """Run every ``(alpha, kappa, seed)`` tuple and collect outcomes keyed by tuple."""
    keys = spec.tuples()
    setups = [spec.setup_for(*k) for k in keys]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_safe_run, setups))
    else:
        results = [_safe_run(s) for s in setups]

    outcomes, records = {}, {}
    for key, res in zip(keys, results):
        if isinstance(res, RunRecord):
            outcomes[key] = res.outcome
            records[key] = res
        else:
            outcomes[key] = res
    sweep = SweepResult(outcomes, records)

    picker = random.Random(spot_seed)
    candidates = sorted(records)
    n_spot = max(1, int(round(spot_fraction * len(candidates)))) if candidates else 0
    for key in picker.sample(candidates, n_spot):
        sweep.invariant_checks[key] = check_run_invariants(records[key])

    blow = sorted(a for (a, _, _), o in outcomes.items() if o.classification is Classification.BLOW_UP)
    calm = sorted(a for (a, _, _), o in outcomes.items() if o.classification is Classification.BOUNDED)
    if blow and calm:
        below = [a for a in calm if a < blow[0]]
        if below:
            sweep.critical_bracket = (below[-1], blow[0])
            sweep.empirical_critical_alpha = 0.5 * (below[-1] + blow[0])
    return sweep


class BracketInvalid(ValueError):
    pass


@dataclass(frozen=True)
class CriticalAlphaEstimate:
    estimate: float
    bracket: tuple[float, float]
    evaluations: tuple[tuple[float, str], ...]


def estimate_critical_alpha(
    base: RunSetup,
    bracket: tuple[float, float],
    iterations: int,
    conversion_kind: Optional[ConversionKind] = ConversionKind.POWER_LAW,
) -> CriticalAlphaEstimate:
    """Bisect on the alpha at which the classification of ``base`` flips.

    The lower endpoint must not classify as blow-up and the upper one must;
    otherwise :class:`BracketInvalid` is raised.
    """
    lo, hi = bracket
    if not lo < hi:
        raise BracketInvalid(f"need lo < hi, got {bracket}")
    evaluations = []

    def blows_up(alpha: float) -> bool:
        outcome = run_simulation(with_alpha(base, alpha, conversion_kind)).outcome
        evaluations.append((alpha, outcome.classification.value))
        return outcome.classification is Classification.BLOW_UP

    lo_blows, hi_blows = blows_up(lo), blows_up(hi)
    if lo_blows == hi_blows:
        raise BracketInvalid(f"both endpoints classify {'BlowUp' if lo_blows else 'non-BlowUp'}")
    if lo_blows:
        raise BracketInvalid("blow-up at the lower endpoint but not the upper one")
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if blows_up(mid):
            hi = mid
        else:
            lo = mid
    return CriticalAlphaEstimate(0.5 * (lo + hi), (lo, hi), tuple(evaluations))


class ConvergenceKind(str, enum.Enum):
    LAPLACIAN_EIGEN = "laplacian_eigen"
    W_EQUATION_EXACT = "w_equation_exact"
    W_EQUATION_SPACE = "w_equation_space"
    MASS_ODE = "mass_ode"


@dataclass(frozen=True)
class ConvergenceRow:
    h: float
    error: float
    observed_order: Optional[float]


def _orders(hs: Sequence[float], errors: Sequence[float]) -> list[ConvergenceRow]:
    rows = []
    for i, (h, e) in enumerate(zip(hs, errors)):
        order = None
        if i > 0 and e > 0.0 and errors[i - 1] > 0.0:
            order = math.log(errors[i - 1] / e) / math.log(hs[i - 1] / h)
        rows.append(ConvergenceRow(h, e, order))
    return rows


def laplacian_eigen_error(cells: int) -> float:
    grid = build_grid(GridSpec.interval(1.0, cells))
    (x,) = grid.centers
    f = np.cos(math.pi * x)
    return float(np.max(np.abs(neumann_laplacian(grid, f) + math.pi**2 * f)))


def w_equation_error(cells: int, dt: float, t_end: float) -> float:
    """Max error of the full stepper against ``exp(-(1+pi^2) t) cos(pi x) + 1.5 exp(-t)``.

    ``u`` and ``v`` start at zero with ``kappa = 0`` so only the ``w``
    equation ``w_t = w_xx - w`` is active.
    """
    grid = build_grid(GridSpec.interval(1.0, cells))
    (x,) = grid.centers
    w0 = np.cos(math.pi * x) + 1.5
    zero = np.zeros(grid.shape)
    spec = ModelSpec(kappa=0.0)
    cfg = StepperConfig(t_end=t_end, dt_init=dt, dt_min=dt, dt_max=dt)
    final, _ = integrate(State(0.0, zero, zero.copy(), w0, grid), spec, cfg)
    exact = math.exp(-(1.0 + math.pi**2) * t_end) * np.cos(math.pi * x) + 1.5 * math.exp(-t_end)
    return float(np.max(np.abs(final.w - exact)))


def mass_ode_error(dt: float, t_end: float = 2.0, cells: int = 64, kappa: float = 1.0, seed: int = 0) -> float:
    """Largest deviation of ``int (u+v)`` from the exact linear-ODE solution."""
    grid = build_grid(GridSpec.interval(1.0, cells))
    spec = ModelSpec(kappa=kappa, conversion=ConversionSpec.identity())
    state0 = sample_initial_state(grid, spec, InitialData(), seed)
    z0 = grid.integrate(state0.u + state0.v)
    worst = [0.0]

    def observe(state: State, _dt: float) -> None:
        z = grid.integrate(state.u + state.v)
        worst[0] = max(worst[0], abs(z - expected_mass(z0, state.t, kappa, grid.total_volume)))

    cfg = StepperConfig(t_end=t_end, dt_init=dt, dt_min=dt * 1e-6, dt_max=dt)
    integrate(state0, spec, cfg, observe)
    return worst[0]


def convergence_study(kind: ConvergenceKind, levels: int = 3) -> list[ConvergenceRow]:
    """Errors against analytic solutions under successive halving of ``h`` or ``dt``."""
    kind = ConvergenceKind(kind)
    if levels < 3:
        raise ValueError("need at least three refinement levels")
    if kind is ConvergenceKind.LAPLACIAN_EIGEN:
        cells = [32 * 2**k for k in range(levels)]
        hs = [1.0 / c for c in cells]
        errors = [laplacian_eigen_error(c) for c in cells]
    elif kind is ConvergenceKind.W_EQUATION_EXACT:
        hs = [0.1 / 2**k for k in range(levels)]
        errors = [w_equation_error(128, dt, 1.0) for dt in hs]
    elif kind is ConvergenceKind.W_EQUATION_SPACE:
        cells = [16 * 2**k for k in range(levels)]
        hs = [1.0 / c for c in cells]
        # dt ~ h^2 keeps the first-order time error at the same order as the spatial one
        errors = [w_equation_error(c, 0.05 * h * h, 0.1) for c, h in zip(cells, hs)]
    else:
        hs = [0.01 / 2**k for k in range(levels)]
        errors = [mass_ode_error(dt) for dt in hs]
    return _orders(hs, errors)


@dataclass(frozen=True)
class PhaseRow:
    kappa: float
    limit_state: tuple[float, float, float]
    matched_equilibrium: Optional[tuple[float, float, float]]
    converged: bool


def ode_phase_study(
    kappa_values: Sequence[float],
    conversion: ConversionSpec = ConversionSpec(),
    t_end: float = 100.0,
    dt: float = 1e-2,
    perturbation: float = 0.1,
    tol: float = 1e-4,
) -> list[PhaseRow]:
    """Long RK4 runs of the kinetics from ``(kappa, p, p)`` matched against the equilibria."""
    rows = []
    for kappa in kappa_values:
        spec = ModelSpec(system=System.MAY_NOWAK_ODE, kappa=kappa, conversion=conversion)
        y0 = (kappa / spec.d1, perturbation, perturbation)
        limit, _ = integrate_ode(y0, spec, t_end, dt)
        match = None
        for eq in homogeneous_equilibria(spec):
            if max(abs(a - b) for a, b in zip(limit, eq)) <= tol:
                match = eq
                break
        rows.append(PhaseRow(kappa, tuple(limit), match, match is not None))
    return rows
