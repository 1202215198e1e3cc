"""Relaxation kernels g(t) for the memory convolution.

Three live kinds plus a degenerate one:

* ExponentialKernel  g(t) = g0 exp(-k t); its own decay-rate function is the
  constant k.
* PowerLawKernel     the exact solution of g' + C g^alpha = 0, stored in closed
  form so the differential relation holds identically.
* SampledKernel      user samples (t, g) with a mandatory analytic tail so the
  full-line mass integral is defined.
* ZeroKernel         g == 0, a degenerate test mode (never admissible).

Admissibility means g(0) > 0, g nonincreasing, and l = 1 - integral(g) > 0,
which keeps the effective stiffness of the damped wave operator positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "ExponentialKernel",
    "PowerLawKernel",
    "SampledKernel",
    "ZeroKernel",
    "XiFunction",
    "TypeIClass",
    "TypeIIClass",
    "AdmissibilityResult",
    "DecayClassResult",
    "eval_g",
    "kernel_mass",
    "admissibility",
    "decay_class_check",
    "blowup_mass_bound",
]


@dataclass(frozen=True)
class XiFunction:
    """Nonincreasing rate function xi(t) with xi(0) > 0 and its running integral."""

    fn: Callable[[np.ndarray], np.ndarray]
    xi0: float
    cumulative: Callable[[np.ndarray], np.ndarray]

    def __call__(self, t):
        return self.fn(np.asarray(t, dtype=float))

    @staticmethod
    def constant(value: float) -> "XiFunction":
        value = float(value)
        if value <= 0:
            raise ValueError("xi must be positive")
        return XiFunction(
            fn=lambda t: np.full_like(np.asarray(t, dtype=float), value),
            xi0=value,
            cumulative=lambda t: value * np.asarray(t, dtype=float),
        )


def _as_times(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if (t < 0).any():
        raise ValueError("kernel evaluation needs t >= 0")
    return t


@dataclass(frozen=True)
class ExponentialKernel:
    """g(t) = g0 * exp(-k t).  Satisfies g' = -k g, so xi(t) == k."""

    g0: float
    k: float
    kind: str = field(default="exponential_xi", init=False)

    def __post_init__(self):
        if self.g0 <= 0 or self.k <= 0:
            raise ValueError("exponential kernel needs g0 > 0 and k > 0")

    def g(self, t):
        return self.g0 * np.exp(-self.k * _as_times(t))

    def gprime(self, t):
        return -self.k * self.g(t)

    def mass(self, t: float | None = None) -> float:
        if t is None or math.isinf(t):
            return self.g0 / self.k
        if t < 0:
            raise ValueError("mass integral needs t >= 0")
        return self.g0 * (1.0 - math.exp(-self.k * t)) / self.k

    @property
    def l(self) -> float:
        return 1.0 - self.mass()

    @property
    def xi(self) -> XiFunction:
        return XiFunction.constant(self.k)


@dataclass(frozen=True)
class PowerLawKernel:
    """Exact solution of g' + C g^alpha = 0 with g(0) = g0 and 1 < alpha < 2.

    g(t) = (g0^(1-alpha) + C (alpha-1) t)^(-1/(alpha-1)), which decays like
    a power with exponent 1/(alpha-1) > 1, hence has finite mass.
    """

    g0: float
    C: float
    alpha: float
    kind: str = field(default="power_law", init=False)

    def __post_init__(self):
        if self.g0 <= 0 or self.C <= 0:
            raise ValueError("power-law kernel needs g0 > 0 and C > 0")
        if not (1.0 < self.alpha < 2.0):
            raise ValueError("power-law kernel needs alpha in (1, 2)")

    def _base(self, t):
        return self.g0 ** (1.0 - self.alpha) + self.C * (self.alpha - 1.0) * t

    def g(self, t):
        t = _as_times(t)
        return self._base(t) ** (-1.0 / (self.alpha - 1.0))

    def gprime(self, t):
        return -self.C * self.g(t) ** self.alpha

    def mass(self, t: float | None = None) -> float:
        beta = 1.0 / (self.alpha - 1.0)  # > 1
        A = self.g0 ** (1.0 - self.alpha)
        B = self.C * (self.alpha - 1.0)
        if t is None or math.isinf(t):
            return A ** (1.0 - beta) / (B * (beta - 1.0))
        if t < 0:
            raise ValueError("mass integral needs t >= 0")
        return (A ** (1.0 - beta) - self._base(t) ** (1.0 - beta)) / (B * (beta - 1.0))

    @property
    def l(self) -> float:
        return 1.0 - self.mass()

    def polynomial_envelope_coefficient(self) -> float:
        """C' with g(t) <= C' (1+t)^(-1/(alpha-1)) on t >= 0.

        g(t) (1+t)^beta is maximized where the two bases cross; bounding base
        growth from below by min(A, B) * (1+t) gives a closed-form C'.
        """
        beta = 1.0 / (self.alpha - 1.0)
        A = self.g0 ** (1.0 - self.alpha)
        B = self.C * (self.alpha - 1.0)
        return min(A, B) ** (-beta)


@dataclass(frozen=True)
class SampledKernel:
    """Kernel given by samples (times, values) plus an analytic tail.

    tail is ("exponential", rate): g(t) = g(T) exp(-rate (t-T)) beyond the last
    sample T, or ("power", beta, coef): g(t) = coef (1+t)^(-beta) with beta > 1.
    The tail makes the full-line mass integral well defined; without one the
    infinite integral is refused.
    """

    times: np.ndarray
    values: np.ndarray
    tail: tuple | None = None
    xi: XiFunction | None = None
    kind: str = field(default="general_xi", init=False)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        if t.ndim != 1 or t.shape != v.shape or t.size < 3:
            raise ValueError("sampled kernel needs matching 1-d arrays, >= 3 samples")
        if t[0] != 0.0 or (np.diff(t) <= 0).any():
            raise ValueError("sample times must start at 0 and increase")
        if self.tail is not None:
            kind = self.tail[0]
            if kind == "exponential":
                if len(self.tail) != 2 or self.tail[1] <= 0:
                    raise ValueError("exponential tail needs a positive rate")
            elif kind == "power":
                if len(self.tail) != 3 or self.tail[1] <= 1 or self.tail[2] <= 0:
                    raise ValueError("power tail needs beta > 1 and coef > 0")
            else:
                raise ValueError(f"unknown tail kind '{kind}'")

    def g(self, t):
        t = _as_times(t)
        T = float(self.times[-1])
        inside = np.interp(np.minimum(t, T), self.times, self.values)
        if self.tail is None:
            return inside
        out = inside
        beyond = t > T
        if np.any(beyond):
            out = np.array(inside, dtype=float, copy=True)
            tb = np.asarray(t, dtype=float)[beyond]
            if self.tail[0] == "exponential":
                out[beyond] = self.values[-1] * np.exp(-self.tail[1] * (tb - T))
            else:
                out[beyond] = self.tail[2] * (1.0 + tb) ** (-self.tail[1])
        return out

    def gprime(self, t):
        # central differences at the sample scale; analytic kinds never land here
        t = np.asarray(t, dtype=float)
        dt = float(np.min(np.diff(self.times))) * 0.5
        tp = t + dt
        tm = np.maximum(t - dt, 0.0)
        return (self.g(tp) - self.g(tm)) / (tp - tm)

    def _simpson_samples(self) -> float:
        t, v = self.times, self.values
        dt = np.diff(t)
        if not np.allclose(dt, dt[0], rtol=1e-9, atol=0.0):
            return float(np.trapz(v, t))
        h = float(dt[0])
        n = t.size
        if n % 2 == 1:
            return float(h / 3.0 * (v[0] + v[-1] + 4.0 * v[1:-1:2].sum() + 2.0 * v[2:-2:2].sum()))
        # even sample count: Simpson on the first n-1, trapezoid on the last panel
        head = h / 3.0 * (v[0] + v[-2] + 4.0 * v[1:-2:2].sum() + 2.0 * v[2:-3:2].sum())
        return float(head + 0.5 * h * (v[-2] + v[-1]))

    def _tail_mass(self) -> float:
        T = float(self.times[-1])
        if self.tail[0] == "exponential":
            return float(self.values[-1]) / self.tail[1]
        beta, coef = self.tail[1], self.tail[2]
        return coef * (1.0 + T) ** (1.0 - beta) / (beta - 1.0)

    def mass(self, t: float | None = None) -> float:
        if t is None or math.isinf(t):
            if self.tail is None:
                raise ValueError(
                    "sampled kernel has no tail model; the infinite mass integral "
                    "needs a tail specification"
                )
            return self._simpson_samples() + self._tail_mass()
        if t < 0:
            raise ValueError("mass integral needs t >= 0")
        T = float(self.times[-1])
        grid = np.linspace(0.0, min(t, T), 2049)
        inside = float(np.trapz(self.g(grid), grid))
        if t <= T:
            return inside
        if self.tail is None:
            raise ValueError("mass beyond the sample range needs a tail model")
        if self.tail[0] == "exponential":
            rate = self.tail[1]
            extra = self.values[-1] * (1.0 - math.exp(-rate * (t - T))) / rate
        else:
            beta, coef = self.tail[1], self.tail[2]
            extra = coef * ((1.0 + T) ** (1.0 - beta) - (1.0 + t) ** (1.0 - beta)) / (beta - 1.0)
        return inside + float(extra)

    @property
    def l(self) -> float:
        return 1.0 - self.mass()


@dataclass(frozen=True)
class ZeroKernel:
    """g == 0: switches the memory term off.  Degenerate; never admissible."""

    kind: str = field(default="zero", init=False)

    def g(self, t):
        return np.zeros_like(_as_times(t))

    def gprime(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))

    def mass(self, t: float | None = None) -> float:
        return 0.0

    @property
    def l(self) -> float:
        return 1.0


Kernel = ExponentialKernel | PowerLawKernel | SampledKernel | ZeroKernel


def eval_g(kernel, t) -> float | np.ndarray:
    """g(t) for t >= 0 (rejects negative times)."""
    out = kernel.g(_as_times(t))
    if np.ndim(t) == 0:
        return float(out)
    return out


def kernel_mass(kernel, t: float | None = None) -> float:
    """Integral of g over [0, t], or over the whole half line for t = None/inf."""
    return kernel.mass(t)


@dataclass(frozen=True)
class AdmissibilityResult:
    l: float
    ok: bool
    reasons: tuple[str, ...]


def admissibility(kernel, probe: np.ndarray | None = None) -> AdmissibilityResult:
    """g(0) > 0, g nonincreasing on its samples, and l = 1 - mass > 0."""
    reasons = []
    if isinstance(kernel, SampledKernel):
        grid = kernel.times
    elif probe is not None:
        grid = np.asarray(probe, dtype=float)
    elif isinstance(kernel, ZeroKernel):
        grid = np.linspace(0.0, 1.0, 11)
    else:
        # analytic kinds: probe a horizon scaled to the kernel's own decay
        horizon = 10.0 / kernel.k if isinstance(kernel, ExponentialKernel) else 50.0
        grid = np.linspace(0.0, horizon, 201)
    gv = kernel.g(grid)
    if not gv[0] > 0.0:
        reasons.append("g(0) must be positive")
    if (np.diff(gv) > 1e-12 * max(gv[0], 1.0)).any():
        reasons.append("g must be nonincreasing")
    try:
        l = 1.0 - kernel.mass()
    except ValueError as exc:
        return AdmissibilityResult(float("nan"), False, (*reasons, str(exc)))
    if not l > 0.0:
        reasons.append(f"kernel mass {1.0 - l:.6g} must stay below 1")
    return AdmissibilityResult(float(l), not reasons, tuple(reasons))


@dataclass(frozen=True)
class TypeIClass:
    """Hypothesis g'(t) <= -xi(t) g(t) with nonincreasing xi, xi(0) > 0."""

    xi: XiFunction


@dataclass(frozen=True)
class TypeIIClass:
    """Hypothesis g'(t) + C g(t)^alpha <= 0 with 1 < alpha < 2."""

    C: float
    alpha: float

    def __post_init__(self):
        if not (1.0 < self.alpha < 2.0):
            raise ValueError("decay class needs alpha in (1, 2)")
        if self.C <= 0:
            raise ValueError("decay class needs C > 0")


@dataclass(frozen=True)
class DecayClassResult:
    ok: bool
    worst_t: float
    worst_residual: float
    tol: float


def decay_class_check(kernel, decay_class, grid) -> DecayClassResult:
    """Verify the decay-class differential inequality on a time grid.

    g' is approximated by central differences (second-order one-sided at the
    ends); the inequality may be violated by at most 1e-8 * g(0).
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 3:
        raise ValueError("check grid needs at least 3 points")
    if (grid < 0).any() or (np.diff(grid) <= 0).any():
        raise ValueError("check grid must be increasing and nonnegative")
    gv = kernel.g(grid)
    gp = np.gradient(gv, grid, edge_order=2)
    if isinstance(decay_class, TypeIClass):
        residual = gp + decay_class.xi(grid) * gv
    elif isinstance(decay_class, TypeIIClass):
        residual = gp + decay_class.C * gv**decay_class.alpha
    else:
        raise TypeError(f"unknown decay class {decay_class!r}")
    g0 = float(kernel.g(0.0))
    tol = 1e-8 * g0
    idx = int(np.argmax(residual))
    return DecayClassResult(
        ok=bool(residual[idx] <= tol),
        worst_t=float(grid[idx]),
        worst_residual=float(residual[idx]),
        tol=tol,
    )


def blowup_mass_bound(p1: float) -> float:
    """Largest admissible kernel mass in the finite-time blow-up hypothesis.

    (p1/2 - 1) / (p1/2 - 1 + 1/(2 p1)); lies in (0, 1) and increases to 1 as
    p1 grows.
    """
    if p1 <= 2.0:
        raise ValueError("blow-up mass bound needs p1 > 2")
    half = p1 / 2.0 - 1.0
    return half / (half + 1.0 / (2.0 * p1))
