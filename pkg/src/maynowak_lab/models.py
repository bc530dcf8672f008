"""Right-hand sides of the chemotaxis May-Nowak system and its comparison systems.

Systems
-------
``MAY_NOWAK_CHEMOTAXIS``
    u_t = D1 Lap u - chi div(u grad v) - d1 u - f(u) w + kappa
    v_t = D2 Lap v - d2 v + f(u) w
    w_t = D3 Lap w - d3 w + r v
``MAY_NOWAK_ODE``
    the spatially homogeneous reaction part of the above.
``KS_PARABOLIC_PARABOLIC``
    u_t = Lap u - div(u grad v),  v_t = Lap v - v + f(u)
``KS_PARABOLIC_ELLIPTIC``
    u_t = Lap u - div(u grad v),  0 = Lap v - mean(f(u)) + f(u)

All systems carry homogeneous Neumann conditions.  The comparison systems
use unit coefficients; only the conversion ``f`` is configurable.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np

from .grid import Grid, chemotactic_divergence, neumann_laplacian
from .linalg import solve_neumann_poisson


class ModelError(ValueError):
    """Invalid model or conversion parameters."""


class ConversionKind(str, enum.Enum):
    SATURATED = "saturated"
    POWER_LAW = "power_law"
    IDENTITY = "identity"
    CUSTOM = "custom"


@dataclass(frozen=True)
class ConversionSpec:
    """Conversion function ``f`` with ``f >= 0``, ``f(0) = 0``.

    ``SATURATED`` is ``s / (1 + s**(1 - alpha))`` and ``POWER_LAW`` is
    ``s**alpha``; both satisfy ``f(s) <= s**alpha`` for ``s >= 1``.
    ``CUSTOM`` linearly interpolates ``table`` (pairs ``(s, f(s))`` starting
    at ``(0, 0)``) and is held constant beyond the last node.
    """

    kind: ConversionKind = ConversionKind.IDENTITY
    alpha: float = 1.0
    K_f: float = 1.0
    table: tuple[tuple[float, float], ...] = ()

    def __post_init__(self) -> None:
        kind = ConversionKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "K_f", float(self.K_f))
        if kind is ConversionKind.IDENTITY:
            object.__setattr__(self, "alpha", 1.0)
        if not (math.isfinite(self.alpha) and math.isfinite(self.K_f)):
            raise ModelError("alpha and K_f must be finite")
        if self.K_f <= 0.0:
            raise ModelError(f"K_f must be positive, got {self.K_f}")
        if kind is ConversionKind.CUSTOM:
            table = tuple((float(s), float(y)) for s, y in self.table)
            object.__setattr__(self, "table", table)
            if len(table) < 2:
                raise ModelError("custom conversion needs at least two table nodes")
            s_nodes = np.array([p[0] for p in table])
            f_nodes = np.array([p[1] for p in table])
            if s_nodes[0] != 0.0 or f_nodes[0] != 0.0:
                raise ModelError("custom conversion table must start at (0, 0)")
            if np.any(np.diff(s_nodes) <= 0.0):
                raise ModelError("custom conversion nodes must be strictly increasing")
            if np.any(f_nodes < 0.0):
                raise ModelError("custom conversion values must be nonnegative")

    @classmethod
    def saturated(cls, alpha: float) -> ConversionSpec:
        return cls(ConversionKind.SATURATED, alpha)

    @classmethod
    def power_law(cls, alpha: float) -> ConversionSpec:
        return cls(ConversionKind.POWER_LAW, alpha)

    @classmethod
    def identity(cls) -> ConversionSpec:
        return cls(ConversionKind.IDENTITY)

    @classmethod
    def prototype(cls, alpha: float) -> ConversionSpec:
        """Saturated prototype for ``alpha <= 1``, power law above."""
        return cls.saturated(alpha) if alpha <= 1.0 else cls.power_law(alpha)

    def __call__(self, s):
        return eval_f(self, s)


def _conversion(spec: ConversionSpec, s: np.ndarray) -> np.ndarray:
    """Evaluate ``f`` on ``s >= 0`` (no validation)."""
    kind = spec.kind
    if kind is ConversionKind.IDENTITY:
        return s.copy()
    if kind is ConversionKind.CUSTOM:
        nodes = np.array(spec.table)
        return np.interp(s, nodes[:, 0], nodes[:, 1])
    out = np.zeros_like(s)
    pos = s > 0.0
    sp = s[pos]
    if kind is ConversionKind.POWER_LAW:
        out[pos] = sp**spec.alpha
    else:
        out[pos] = sp / (1.0 + sp ** (1.0 - spec.alpha))
    return out


def eval_f(spec: ConversionSpec, s):
    """Evaluate the conversion function; scalar in, scalar out.

    Raises ``ModelError`` for negative arguments.
    """
    arr = np.asarray(s, dtype=float)
    if np.any(arr < 0.0):
        raise ModelError("conversion function is only defined for s >= 0")
    out = _conversion(spec, np.atleast_1d(arr)).reshape(arr.shape)
    return float(out) if out.ndim == 0 else out


def conversion_of_state(spec: ConversionSpec, u: np.ndarray) -> np.ndarray:
    """``f(u)`` with ``f`` extended by zero to ``u < 0``.

    Accepted states may dip below zero by rounding (the stepper tolerates
    ``-1e-12`` relative); the state itself is never modified.
    """
    return _conversion(spec, np.maximum(u, 0.0))


def check_conversion(spec: ConversionSpec, s_max: float = 100.0, samples: int = 4001) -> None:
    """Sample ``f`` on ``[0, s_max]`` and verify ``f(0) = 0``, ``f >= 0`` and the growth bound.

    The bound ``f(s) <= K_f s**alpha`` is checked on ``s >= 1``.  Custom tables
    are only checked for sign and ``f(0)``.
    """
    s = np.linspace(0.0, s_max, samples)
    values = _conversion(spec, s)
    if values[0] != 0.0:
        raise ModelError("f(0) must vanish")
    if np.any(values < 0.0):
        raise ModelError("f must be nonnegative")
    if spec.kind is ConversionKind.CUSTOM:
        return
    big = s >= 1.0
    bound = spec.K_f * s[big] ** spec.alpha
    if np.any(values[big] > bound * (1.0 + 1e-12)):
        raise ModelError(f"f violates f(s) <= {spec.K_f} s^{spec.alpha} on s >= 1")


class System(str, enum.Enum):
    MAY_NOWAK_CHEMOTAXIS = "may_nowak_chemotaxis"
    MAY_NOWAK_ODE = "may_nowak_ode"
    KS_PARABOLIC_PARABOLIC = "ks_parabolic_parabolic"
    KS_PARABOLIC_ELLIPTIC = "ks_parabolic_elliptic"

    @property
    def has_w(self) -> bool:
        return self in (System.MAY_NOWAK_CHEMOTAXIS, System.MAY_NOWAK_ODE)


_POSITIVE = ("D1", "D2", "D3", "d1", "d2", "d3", "r")


@dataclass(frozen=True)
class ModelSpec:
    system: System = System.MAY_NOWAK_CHEMOTAXIS
    D1: float = 1.0
    D2: float = 1.0
    D3: float = 1.0
    chi: float = 1.0
    d1: float = 1.0
    d2: float = 1.0
    d3: float = 1.0
    r: float = 1.0
    kappa: float = 0.0
    conversion: ConversionSpec = field(default_factory=ConversionSpec)

    def __post_init__(self) -> None:
        object.__setattr__(self, "system", System(self.system))
        for name in _POSITIVE:
            value = float(getattr(self, name))
            if not (math.isfinite(value) and value > 0.0):
                raise ModelError(f"{name} must be positive and finite, got {value}")
            object.__setattr__(self, name, value)
        if not math.isfinite(self.chi):
            raise ModelError("chi must be finite")
        if not (math.isfinite(self.kappa) and self.kappa >= 0.0):
            raise ModelError(f"kappa must be nonnegative, got {self.kappa}")
        object.__setattr__(self, "chi", float(self.chi))
        object.__setattr__(self, "kappa", float(self.kappa))

    @property
    def is_unit_normalized(self) -> bool:
        """True when every rate and diffusivity equals one (kappa and f are free)."""
        return all(getattr(self, n) == 1.0 for n in _POSITIVE + ("chi",))

    @property
    def mass_identity_applies(self) -> bool:
        """``d/dt int (u + v) = -int (u + v) + kappa |Omega|`` holds exactly."""
        return self.system is System.MAY_NOWAK_CHEMOTAXIS and self.d1 == 1.0 and self.d2 == 1.0

    def with_(self, **changes) -> ModelSpec:
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class State:
    """Time plus fields ``u, v, w`` on one grid (``w`` is ``None`` for Keller-Segel systems)."""

    t: float
    u: np.ndarray
    v: np.ndarray
    w: Optional[np.ndarray]
    grid: Grid

    def __post_init__(self) -> None:
        if self.t < 0.0:
            raise ValueError("time must be nonnegative")
        for name in ("u", "v", "w"):
            value = getattr(self, name)
            if value is not None and np.shape(value) != self.grid.shape:
                raise ValueError(f"{name} has shape {np.shape(value)}, grid is {self.grid.shape}")

    def fields(self) -> dict[str, np.ndarray]:
        out = {"u": self.u, "v": self.v}
        if self.w is not None:
            out["w"] = self.w
        return out

    def nonnegative_fields(self, system: System) -> list[np.ndarray]:
        """Fields that must stay nonnegative; the elliptic ``v`` has zero mean instead."""
        out = [self.u]
        if system is not System.KS_PARABOLIC_ELLIPTIC:
            out.append(self.v)
        if self.w is not None:
            out.append(self.w)
        return out

    def sup_norm(self) -> float:
        return max(float(np.max(np.abs(x))) for x in self.fields().values())

    def is_finite(self) -> bool:
        return all(bool(np.all(np.isfinite(x))) for x in self.fields().values())


class LinearPart(NamedTuple):
    """``x_t = diffusivity * Lap x - decay * x + explicit``."""

    diffusivity: float
    decay: float
    explicit: np.ndarray


def split_terms(state: State, spec: ModelSpec) -> dict[str, LinearPart]:
    """Stiff linear coefficients and the explicit remainder for each evolved field.

    For the parabolic-elliptic system only ``u`` evolves and ``state.v``
    must already solve the elliptic equation for ``state.u``.
    """
    grid = state.grid
    u, v, w = state.u, state.v, state.w
    system = spec.system
    if system is System.MAY_NOWAK_CHEMOTAXIS:
        fw = conversion_of_state(spec.conversion, u) * w
        return {
            "u": LinearPart(spec.D1, spec.d1, spec.chi * chemotactic_divergence(grid, u, v) - fw + spec.kappa),
            "v": LinearPart(spec.D2, spec.d2, fw),
            "w": LinearPart(spec.D3, spec.d3, spec.r * v),
        }
    if system is System.KS_PARABOLIC_PARABOLIC:
        return {
            "u": LinearPart(1.0, 0.0, chemotactic_divergence(grid, u, v)),
            "v": LinearPart(1.0, 1.0, conversion_of_state(spec.conversion, u)),
        }
    if system is System.KS_PARABOLIC_ELLIPTIC:
        return {"u": LinearPart(1.0, 0.0, chemotactic_divergence(grid, u, v))}
    raise ModelError(f"{system.value} has no spatial right-hand side")


def _assemble(grid: Grid, x: np.ndarray, part: LinearPart) -> np.ndarray:
    return part.diffusivity * neumann_laplacian(grid, x) - part.decay * x + part.explicit


def rhs_may_nowak_chemotaxis(state: State, spec: ModelSpec):
    """Return ``(du, dv, dw)`` for the chemotaxis May-Nowak system."""
    if spec.system is not System.MAY_NOWAK_CHEMOTAXIS:
        raise ModelError("spec is not the chemotaxis May-Nowak system")
    parts = split_terms(state, spec)
    return tuple(_assemble(state.grid, x, parts[n]) for n, x in state.fields().items())


def rhs_may_nowak_ode(y, spec: ModelSpec) -> tuple[float, float, float]:
    """Homogeneous reaction kinetics ``(u', v', w')``.

    With unit rates and ``f = id`` this is
    ``(-u - u w + kappa, -v + u w, -w + v)``.
    """
    u, v, w = (float(c) for c in y)
    fw = float(conversion_of_state(spec.conversion, np.array([u]))[0]) * w
    return (
        -spec.d1 * u - fw + spec.kappa,
        -spec.d2 * v + fw,
        -spec.d3 * w + spec.r * v,
    )


def rhs_ks_parabolic_parabolic(state: State, spec: ModelSpec):
    """Return ``(du, dv)`` for the parabolic-parabolic comparison system."""
    parts = split_terms(state, spec.with_(system=System.KS_PARABOLIC_PARABOLIC))
    return (_assemble(state.grid, state.u, parts["u"]), _assemble(state.grid, state.v, parts["v"]))


def elliptic_signal(grid: Grid, u: np.ndarray, spec: ModelSpec) -> np.ndarray:
    """Zero-mean ``v`` solving ``Lap v = mean(f(u)) - f(u)``."""
    fu = conversion_of_state(spec.conversion, u)
    return solve_neumann_poisson(grid, grid.mean(fu) - fu)


def rhs_ks_parabolic_elliptic(u: np.ndarray, spec: ModelSpec, grid: Grid):
    """Return ``(du, v)`` for the parabolic-elliptic comparison system."""
    v = elliptic_signal(grid, u, spec)
    du = neumann_laplacian(grid, u) + chemotactic_divergence(grid, u, v)
    return du, v


EQUILIBRIUM_EPS = 1e-12
_SCAN_INTERVALS = 1024


def _bisect(g, lo: float, hi: float, g_lo: float) -> float:
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        g_mid = g(mid)
        if g_mid == 0.0:
            return mid
        if (g_mid < 0.0) == (g_lo < 0.0):
            lo, g_lo = mid, g_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def homogeneous_equilibria(spec: ModelSpec) -> list[tuple[float, float, float]]:
    """Spatially constant steady states, infection-free state first.

    Infected states need ``f(u*) r / (d2 d3) = 1`` with ``v* = (kappa - d1 u*)/d2 > 0``
    and ``w* = r v* / d3``.  Roots are bracketed by scanning ``(eps, kappa/d1)``
    and refined by bisection.
    """
    u_free = spec.kappa / spec.d1
    found = [(u_free, 0.0, 0.0)]
    if u_free <= EQUILIBRIUM_EPS:
        return found
    gain = spec.r / (spec.d2 * spec.d3)
    conv = spec.conversion

    def g(s: float) -> float:
        return float(_conversion(conv, np.array([s]))[0]) * gain - 1.0

    nodes = np.linspace(EQUILIBRIUM_EPS, u_free, _SCAN_INTERVALS + 1)
    values = [g(s) for s in nodes]
    roots = []
    for i in range(_SCAN_INTERVALS):
        a, b = values[i], values[i + 1]
        if a == 0.0 and 0 < i:
            roots.append(float(nodes[i]))
        elif a * b < 0.0:
            roots.append(_bisect(g, float(nodes[i]), float(nodes[i + 1]), a))
    for u_star in roots:
        v_star = (spec.kappa - spec.d1 * u_star) / spec.d2
        if v_star > 0.0:
            found.append((u_star, v_star, spec.r * v_star / spec.d3))
    return found
