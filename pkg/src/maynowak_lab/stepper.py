"""IMEX Euler time stepping with step rejection, and RK4 for the kinetics ODE.

Diffusion and linear decay are implicit (tridiagonal solves, dimension-split
on rectangles).  Chemotactic transport and the reaction coupling are
explicit.  A step that produces a negative component beyond rounding is
rejected and retried with half the step.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .grid import Grid, chemotactic_outflow_rate
from .linalg import solve_shifted_laplacian
from .models import ModelSpec, State, System, elliptic_signal, rhs_may_nowak_ode, split_terms

NEGATIVITY_TOL = 1e-12
DT_GROWTH = 1.2


class Scheme(str, enum.Enum):
    IMEX_EULER = "imex_euler"
    RK4 = "rk4"


class StepperError(RuntimeError):
    def __init__(self, message: str, t: float):
        super().__init__(message)
        self.t = t


class StepTooSmall(StepperError):
    """The admissible step fell below ``dt_min``."""


class NonFiniteState(StepperError):
    """NaN or Inf appeared in the state."""


@dataclass(frozen=True)
class StepperConfig:
    t_end: float = 50.0
    dt_init: float = 1e-3
    dt_min: float = 1e-10
    dt_max: float = 1e-2
    cfl_safety: float = 0.5
    scheme: Scheme = Scheme.IMEX_EULER
    blowup_threshold: float = 1e6

    def __post_init__(self) -> None:
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not 0.0 < self.dt_min <= self.dt_init <= self.dt_max:
            raise ValueError("need 0 < dt_min <= dt_init <= dt_max")
        if not self.t_end > 0.0:
            raise ValueError("t_end must be positive")
        if not 0.0 < self.cfl_safety <= 1.0:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if not self.blowup_threshold > 1.0:
            raise ValueError("blowup_threshold must exceed 1")


@dataclass(frozen=True)
class StepResult:
    state: State
    dt_used: float
    rejected_count: int


def solve_implicit_diffusion(grid: Grid, f: np.ndarray, coeff: float, decay: float = 0.0) -> np.ndarray:
    """Backward-Euler inversion ``(I + decay - coeff Lap_h) x = f``."""
    return solve_shifted_laplacian(grid, f, coeff, decay)


def negativity_floor(fields) -> float:
    scale = max(float(np.max(np.abs(x))) for x in fields)
    return -NEGATIVITY_TOL * (1.0 + scale)


def admissible_dt(state: State, spec: ModelSpec, cfg: StepperConfig, dt_prev: Optional[float]) -> float:
    """Candidate step: ``dt_max``, the transport CFL bound and growth-limited ``dt_prev``."""
    dt = cfg.dt_max if dt_prev is None else min(cfg.dt_max, DT_GROWTH * dt_prev)
    if dt_prev is None:
        dt = min(dt, cfg.dt_init)
    chi = spec.chi if spec.system is System.MAY_NOWAK_CHEMOTAXIS else 1.0
    if chi != 0.0:
        rate = float(np.max(chemotactic_outflow_rate(state.grid, abs(chi) * state.v)))
        if rate > 0.0:
            dt = min(dt, cfg.cfl_safety / rate)
    return dt


def _advance(state: State, spec: ModelSpec, dt: float) -> State:
    grid = state.grid
    parts = split_terms(state, spec)
    new = {}
    for name, part in parts.items():
        x = getattr(state, name)
        new[name] = solve_implicit_diffusion(grid, x + dt * part.explicit, part.diffusivity * dt, part.decay * dt)
    if spec.system is System.KS_PARABOLIC_ELLIPTIC:
        new["v"] = elliptic_signal(grid, new["u"], spec)
    return replace(state, t=state.t + dt, **new)


def step_imex(
    state: State,
    spec: ModelSpec,
    cfg: StepperConfig,
    dt_prev: Optional[float] = None,
    dt_cap: Optional[float] = None,
) -> StepResult:
    """One IMEX Euler step with positivity-driven rejection.

    ``dt_cap`` clips the step to land on a sampling time or ``t_end``; a
    clipped step may be shorter than ``dt_min``.
    """
    dt = admissible_dt(state, spec, cfg, dt_prev)
    if dt < cfg.dt_min:
        raise StepTooSmall(f"CFL step {dt:.3e} below dt_min={cfg.dt_min:.3e}", state.t)
    capped = dt_cap is not None and dt_cap < dt
    if capped:
        dt = dt_cap
    rejected = 0
    while True:
        trial = _advance(state, spec, dt)
        fields = trial.nonnegative_fields(spec.system)
        if not trial.is_finite():
            raise NonFiniteState(f"non-finite state after step dt={dt:.3e}", state.t)
        floor = negativity_floor(fields)
        if all(float(np.min(x)) >= floor for x in fields):
            return StepResult(trial, dt, rejected)
        rejected += 1
        dt *= 0.5
        if dt < cfg.dt_min:
            raise StepTooSmall(f"positivity rejections drove dt to {dt:.3e}", state.t)


class TerminationKind(str, enum.Enum):
    REACHED_T_END = "reached_t_end"
    BLOW_UP_SUSPECTED = "blow_up_suspected"
    DIVERGED = "diverged"


@dataclass(frozen=True)
class Termination:
    kind: TerminationKind
    t: float
    reason: str = ""


@dataclass
class IntegrationResult:
    final: State
    termination: Termination
    steps: int = 0
    rejected: int = 0
    dt_smallest: float = math.inf
    dt_largest: float = 0.0
    dt_last: float = 0.0
    worst_negativity: float = 0.0
    """Minimum over accepted states of ``min(component) / (1 + sup norm)``."""

    def __iter__(self):
        yield self.final
        yield self.termination


Observer = Callable[[State, float], None]


def _relative_negativity(state: State, system: System) -> float:
    fields = state.nonnegative_fields(system)
    scale = 1.0 + max(float(np.max(np.abs(x))) for x in fields)
    return min(0.0, min(float(np.min(x)) for x in fields) / scale)


def integrate(
    state0: State,
    spec: ModelSpec,
    cfg: StepperConfig,
    observer: Optional[Observer] = None,
    sample_interval: Optional[float] = None,
) -> IntegrationResult:
    """Step from ``state0`` to ``cfg.t_end`` unless blow-up or divergence intervenes.

    ``observer(state, dt)`` is called at ``t = 0``, at every multiple of
    ``sample_interval`` (steps are clipped to land on them) and at the final
    state.  Without ``sample_interval`` it is called after every step.
    Blow-up is suspected when ``|u|_inf`` exceeds
    ``blowup_threshold * max(1, |u0|_inf)`` or the admissible step collapses
    below ``dt_min``.
    """
    if spec.system is System.MAY_NOWAK_ODE or cfg.scheme is Scheme.RK4:
        raise ValueError("use integrate_ode for the kinetics ODE; spatial systems step with imex_euler")
    if spec.system is System.KS_PARABOLIC_ELLIPTIC:
        state0 = replace(state0, v=elliptic_signal(state0.grid, state0.u, spec))
    limit = cfg.blowup_threshold * max(1.0, float(np.max(np.abs(state0.u))))
    result = IntegrationResult(state0, Termination(TerminationKind.REACHED_T_END, cfg.t_end))
    result.worst_negativity = _relative_negativity(state0, spec.system)
    if observer is not None:
        observer(state0, 0.0)

    state = state0
    dt_prev: Optional[float] = None
    sample_index = 1
    last_observed = 0.0
    while state.t < cfg.t_end:
        target = cfg.t_end
        if sample_interval is not None:
            target = min(target, sample_index * sample_interval)
        try:
            step = step_imex(state, spec, cfg, dt_prev, dt_cap=target - state.t)
        except StepTooSmall as exc:
            result.termination = Termination(TerminationKind.BLOW_UP_SUSPECTED, exc.t, str(exc))
            break
        except NonFiniteState as exc:
            result.termination = Termination(TerminationKind.DIVERGED, exc.t, str(exc))
            break
        clipped = step.dt_used == target - state.t and step.rejected_count == 0
        landed = step.state.t >= target - 1e-12 * max(1.0, target)
        state = replace(step.state, t=target) if landed else step.state
        # a step clipped onto a sampling time must not throttle the next one
        if not clipped:
            dt_prev = step.dt_used
        result.steps += 1
        result.rejected += step.rejected_count
        result.dt_smallest = min(result.dt_smallest, step.dt_used)
        result.dt_largest = max(result.dt_largest, step.dt_used)
        result.dt_last = step.dt_used
        result.worst_negativity = min(result.worst_negativity, _relative_negativity(state, spec.system))
        result.final = state

        sampled = sample_interval is None or landed
        if landed and sample_interval is not None:
            sample_index += 1
        if observer is not None and sampled:
            observer(state, step.dt_used)
            last_observed = state.t

        peak = float(np.max(np.abs(state.u)))
        if peak > limit:
            result.termination = Termination(
                TerminationKind.BLOW_UP_SUSPECTED,
                state.t,
                f"|u|_inf={peak:.3e} exceeded {limit:.3e}",
            )
            break

    if observer is not None and result.final.t > last_observed:
        observer(result.final, result.dt_last)
    return result


def rk4_step(y: tuple[float, float, float], spec: ModelSpec, dt: float) -> tuple[float, float, float]:
    def add(a, b, s):
        return tuple(x + s * k for x, k in zip(a, b))

    k1 = rhs_may_nowak_ode(y, spec)
    k2 = rhs_may_nowak_ode(add(y, k1, 0.5 * dt), spec)
    k3 = rhs_may_nowak_ode(add(y, k2, 0.5 * dt), spec)
    k4 = rhs_may_nowak_ode(add(y, k3, dt), spec)
    return tuple(
        x + dt / 6.0 * (a + 2.0 * b + 2.0 * c + d) for x, a, b, c, d in zip(y, k1, k2, k3, k4)
    )


def integrate_ode(
    y0,
    spec: ModelSpec,
    t_end: float,
    dt: float = 1e-2,
    observer: Optional[Callable[[float, tuple], None]] = None,
) -> tuple[tuple[float, float, float], Termination]:
    """Fixed-step classical RK4 for the homogeneous kinetics."""
    y = tuple(float(c) for c in y0)
    n = max(1, int(math.ceil(t_end / dt - 1e-9)))
    h = t_end / n
    if observer is not None:
        observer(0.0, y)
    for i in range(1, n + 1):
        y = rk4_step(y, spec, h)
        if not all(math.isfinite(c) for c in y):
            return y, Termination(TerminationKind.DIVERGED, i * h, "non-finite ODE state")
        if observer is not None:
            observer(i * h, y)
    return y, Termination(TerminationKind.REACHED_T_END, t_end)
