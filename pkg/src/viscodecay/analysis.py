"""Potential-well constants, decay-condition verdicts, envelopes, and fits.

Everything here is a pure computation over immutable inputs.  Condition
failures come back as structured reports rather than exceptions: "conditions
unmet" is a first-class scientific outcome for this lab, not an error.

The constant chain:

    B1      = max(1, B/sqrt(l), 1/sqrt(b))
    lambda1 = (1 / (b B1^p1))^(1/(p1-2))
    E1      = (1/2 - 1/p1) lambda1^2
    f(y)    = y^2/2 - (b/p1) B1^p1 max(y^p1, y^p2)   (potential well function)
    lambda2 = the root of f = E(0) below lambda1
    Ctilde  = r / (1 - r),  r = (2 b B1^p2 / p1) lambda2^(p1-2)
    omega   = (1 - 2/p2) Ctilde p2        (must stay below 2)

and the decay constants K (general-rate kernels) / K(alpha, sigma) (power-law
kernels) are assembled from a deterministic split of (2 - omega)/2 across the
three small parameters (eps, vareps, delta); see compute_K for the policy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .kernels import admissibility
from .solver import Trajectory

__all__ = [
    "StableSetConstants",
    "Condition",
    "ConditionReport",
    "KResult",
    "DecayEnvelope",
    "EnvelopeVerdict",
    "InvariantSetResult",
    "KomornikResult",
    "FitResult",
    "scheme_allowance",
    "f_lambda",
    "solve_lambda2",
    "compute_Ctilde",
    "derive_constants",
    "check_decay_conditions",
    "check_invariant_set",
    "check_blowup_conditions",
    "compute_K",
    "compute_K_alpha_sigma",
    "build_envelope",
    "envelope",
    "verify_envelope",
    "komornik_check",
    "fit_decay",
]


# Scheme-order allowance used wherever a continuum inequality is checked
# against discrete data.  The coefficient was calibrated once against the
# convergence suite (observed constants sit well below 1).
SCHEME_ALLOWANCE_COEFF = 1.0


def scheme_allowance(dt: float, h: float, coeff: float = SCHEME_ALLOWANCE_COEFF) -> float:
    return coeff * (dt + h * h)


@dataclass(frozen=True)
class StableSetConstants:
    """Constant block of the stability analysis, plus copied context.

    lambda2 / Ctilde / omega_small stay None until completed against an
    initial energy (they only exist for 0 < E0 < E1).  E0 and omega1 (first
    Dirichlet eigenvalue) ride along because the decay constants need them.
    """

    B: float
    B1: float
    lambda1: float
    E1: float
    lambda0: float
    l: float
    b: float
    p1: float
    p2: float
    omega1: float
    E0: float | None = None
    lambda2: float | None = None
    Ctilde: float | None = None
    omega_small: float | None = None


def f_lambda(lam: float, c: StableSetConstants) -> float:
    """Potential well function: increasing up to lambda1, decreasing after,
    with f(lambda1) = E1."""
    if lam < 0:
        raise ValueError("f is defined for lambda >= 0")
    power = max(lam**c.p1, lam**c.p2)
    return 0.5 * lam * lam - (c.b / c.p1) * c.B1**c.p1 * power


def solve_lambda2(E0: float, c: StableSetConstants) -> float | None:
    """Root of f(lambda) = E0 on (0, lambda1], or None when E0 is outside
    (0, E1) (a conditions-unmet outcome, not an error)."""
    if not (0.0 < E0 < c.E1):
        return None
    lo, hi = 0.0, c.lambda1
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f_lambda(mid, c) < E0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12:
            break
    return 0.5 * (lo + hi)


def compute_Ctilde(lambda2: float, c: StableSetConstants) -> float | None:
    """Source-control constant r/(1-r) with r = (2 b B1^p2 / p1) lambda2^(p1-2);
    None when r >= 1 (the bound degenerates)."""
    r = (2.0 * c.b * c.B1**c.p2 / c.p1) * lambda2 ** (c.p1 - 2.0)
    if r >= 1.0:
        return None
    return r / (1.0 - r)


def derive_constants(
    B: float,
    l: float,
    b: float,
    p1: float,
    p2: float,
    lambda0: float,
    omega1: float,
    E0: float | None = None,
) -> StableSetConstants:
    """Build the constant block; completes lambda2/Ctilde/omega when E0 is given."""
    if not (l > 0):
        raise ValueError("derive_constants needs l > 0")
    if p1 <= 2 or p2 < p1:
        raise ValueError("source exponents must satisfy 2 < p1 <= p2")
    B1 = max(1.0, B / math.sqrt(l), 1.0 / math.sqrt(b))
    lambda1 = (1.0 / (b * B1**p1)) ** (1.0 / (p1 - 2.0))
    E1 = (0.5 - 1.0 / p1) * lambda1**2
    c = StableSetConstants(
        B=B, B1=B1, lambda1=lambda1, E1=E1, lambda0=lambda0,
        l=l, b=b, p1=p1, p2=p2, omega1=omega1, E0=E0,
    )
    if E0 is None:
        return c
    lam2 = solve_lambda2(E0, c)
    if lam2 is None:
        return c
    ct = compute_Ctilde(lam2, c)
    om = (1.0 - 2.0 / p2) * ct * p2 if ct is not None else None
    return StableSetConstants(
        B=B, B1=B1, lambda1=lambda1, E1=E1, lambda0=lambda0,
        l=l, b=b, p1=p1, p2=p2, omega1=omega1, E0=E0,
        lambda2=lam2, Ctilde=ct, omega_small=om,
    )


# ---------------------------------------------------------------------------
# condition reports


@dataclass(frozen=True)
class Condition:
    name: str
    lhs: float
    rhs: float
    passed: bool
    margin: float

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "passed": self.passed,
            "margin": self.margin,
        }


@dataclass(frozen=True)
class ConditionReport:
    ok: bool
    conditions: tuple[Condition, ...]

    def as_dict(self) -> dict:
        return {"ok": self.ok, "conditions": [c.as_dict() for c in self.conditions]}

    def __getitem__(self, name: str) -> Condition:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)


def _lt(name: str, lhs: float, rhs: float) -> Condition:
    return Condition(name, float(lhs), float(rhs), bool(lhs < rhs), float(rhs - lhs))


def check_decay_conditions(E0: float, c: StableSetConstants, kernel=None) -> ConditionReport:
    """Sufficient conditions for the decay estimates.

    Checks 0 < E0 < (p1/p2)^(1/(p1-2)) lambda1^2 (1/2 - 1/p2), lambda(0) <
    lambda1, kernel admissibility (when a kernel is supplied; otherwise just
    l in (0,1]), and the derived consequence omega < 2.
    """
    thr = (c.p1 / c.p2) ** (1.0 / (c.p1 - 2.0)) * c.lambda1**2 * (0.5 - 1.0 / c.p2)
    conds = [
        _lt("initial_energy_positive", 0.0, E0),
        _lt("initial_energy_below_threshold", E0, thr),
        _lt("lambda0_below_lambda1", c.lambda0, c.lambda1),
    ]
    if kernel is not None:
        adm = admissibility(kernel)
        conds.append(Condition("kernel_admissible", adm.l, 0.0, adm.ok, adm.l))
    else:
        conds.append(Condition("kernel_admissible", c.l, 0.0, 0.0 < c.l <= 1.0, c.l))
    cc = c if c.omega_small is not None else derive_constants(
        c.B, c.l, c.b, c.p1, c.p2, c.lambda0, c.omega1, E0=E0
    )
    if cc.omega_small is not None:
        conds.append(_lt("omega_below_two", cc.omega_small, 2.0))
    else:
        conds.append(Condition("omega_below_two", float("nan"), 2.0, False, float("nan")))
    return ConditionReport(all(cond.passed for cond in conds), tuple(conds))


def check_blowup_conditions(E0: float, c: StableSetConstants, kernel, m2: float) -> ConditionReport:
    """Sufficient conditions for finite-time blow-up (qualitative check set)."""
    from .kernels import blowup_mass_bound

    mass = kernel.mass(None)
    factor = 1.0 - (1.0 - c.l) / (c.p1 * (c.p1 - 2.0) * c.l)
    conds = (
        _lt("damping_exponent_below_source", m2, c.p1),
        _lt("kernel_mass_below_bound", mass, blowup_mass_bound(c.p1)),
        _lt("initial_energy_below_factor_E1", E0, factor * c.E1),
        _lt("lambda1_below_lambda0", c.lambda1, c.lambda0),
    )
    return ConditionReport(all(cond.passed for cond in conds), conds)


@dataclass(frozen=True)
class InvariantSetResult:
    ok: bool
    worst_t: float
    worst_excess: float
    tol: float


def check_invariant_set(traj: Trajectory, lambda2: float, l: float) -> InvariantSetResult:
    """lambda(t)^2 <= lambda2^2 along the whole trajectory, up to the scheme
    allowance (the well is invariant for data starting inside it)."""
    tol = 1e-6 + scheme_allowance(traj.meta.get("dt", 0.0), traj.meta.get("h", 0.0))
    excess = traj.lambda_t**2 - lambda2**2
    idx = int(np.argmax(excess))
    return InvariantSetResult(
        ok=bool(excess[idx] <= tol),
        worst_t=float(traj.times[idx]),
        worst_excess=float(excess[idx]),
        tol=tol,
    )


# ---------------------------------------------------------------------------
# decay constants


@dataclass(frozen=True)
class KResult:
    ok: bool
    K: float | None = None
    eps: float | None = None
    vareps: float | None = None
    delta: float | None = None
    terms: dict = dc_field(default_factory=dict)
    reason: str = ""


def _case_of(m1: float, m2: float) -> int:
    if m1 > 2.0:
        return 1
    if m2 > 2.0:
        return 2
    return 3


def _split_small_parameters(
    c: StableSetConstants, m1: float, m2: float, a: float, domain_measure: float, case: int
) -> tuple[float | None, float, float, float]:
    """Deterministic choice of the small parameters (eps, vareps, delta).

    The stability budget (2 - omega)/2 is split equally across the balance
    terms that multiply the recurring energy integral:

        2 (1+|Omega|)^2 eps^(m2/(m2-2)) * max(E0^((m2-m1)/(m1-2)), 1)   [absent for m == 2]
        vareps (1+Ctilde) (1-l)/l
        delta^m1 * a * 2 B1^m2 / l^(m2/2) * (1+Ctilde)

    each target is inverted in closed form; if any inversion leaves (0, 1),
    all three shrink by a common factor (smaller parameters only slacken the
    budget, so the resulting K stays valid).
    """
    omega = c.omega_small
    total = 0.5 * (2.0 - omega)
    n_terms = 2 if case == 3 else 3
    tgt = total / n_terms
    onepc = 1.0 + c.Ctilde

    eps = None
    if case == 1:
        mfac = max(c.E0 ** ((m2 - m1) / (m1 - 2.0)), 1.0)
        eps = (tgt / (2.0 * (1.0 + domain_measure) ** 2 * mfac)) ** ((m2 - 2.0) / m2)
    elif case == 2:
        eps = (tgt / (2.0 * (1.0 + domain_measure) ** 2)) ** ((m2 - 2.0) / m2)
    vareps = tgt * c.l / (onepc * (1.0 - c.l))
    delta = (tgt * c.l ** (m2 / 2.0) / (2.0 * a * c.B1**m2 * onepc)) ** (1.0 / m1)

    chosen = [x for x in (eps, vareps, delta) if x is not None]
    peak = max(chosen)
    if peak >= 1.0:
        shrink = 0.5 / peak
        eps = eps * shrink if eps is not None else None
        vareps *= shrink
        delta *= shrink
    return eps, vareps, delta, tgt


def _validate_K_inputs(c, m1, m2, a, gamma):
    if c.omega_small is None or c.Ctilde is None or c.E0 is None:
        return "stable-set constants incomplete (need lambda2, Ctilde, omega, E0)"
    if c.omega_small >= 2.0:
        return f"decay constants unavailable: omega = {c.omega_small:.6g} >= 2"
    if not (0.0 < c.l < 1.0):
        return f"decay constants need 0 < l < 1, got l = {c.l:.6g}"
    if m2 < m1 or m1 < 2.0:
        return f"damping exponents must satisfy 2 <= m1 <= m2, got ({m1}, {m2})"
    if abs(gamma - 0.5 * (m2 - 2.0)) > 1e-12:
        return f"gamma must equal (m2-2)/2 = {0.5 * (m2 - 2.0):.6g}, got {gamma:.6g}"
    if a <= 0:
        return "decay constants need a > 0"
    return None


def compute_K(
    c: StableSetConstants,
    m1: float,
    m2: float,
    a: float,
    domain_measure: float,
    xi0: float,
    gamma: float,
) -> KResult:
    """Decay constant K for kernels with g' <= -xi g.

    K = bracket^(-1) * (1/xi(0)) * (2-omega)/2 where the bracket collects the
    boundary contributions of the weighted-energy estimate:

        3(1+C~)/(w1 l) + 3(1+C~)                        displacement/velocity pairings
        g(1+C~)/(w1 l (g+1)) + g(1+C~)/(g+1)            weight-derivative pairing (g = gamma)
        2(1+|O|)^2 eps^(-m2/2) / (a E0^gamma)           damping kick-back      (m1 > 2)
        2(1+|O|)^2/((g+1) a) + the eps term             m2 > m1 = 2 variant
        2/a                                             m == 2 variant (no eps at all)
        (1 + 1/(2 vareps)) * 2/(xi(0)(g+1))             memory pairing
        delta^(-m1/(m1-1)) / (g+1)                      damping/displacement coupling

    The m2 > m1 = 2 and m == 2 rows are re-derivations of the general case
    along the same estimate with the damping term absorbed directly into the
    energy decrement; the other rows are unchanged.
    """
    bad = _validate_K_inputs(c, m1, m2, a, gamma)
    if bad:
        return KResult(ok=False, reason=bad)
    if xi0 <= 0:
        return KResult(ok=False, reason="xi(0) must be positive")

    case = _case_of(m1, m2)
    eps, vareps, delta, tgt = _split_small_parameters(c, m1, m2, a, domain_measure, case)
    onepc = 1.0 + c.Ctilde
    om1l = c.omega1 * c.l
    gp1 = gamma + 1.0

    t_boundary = 3.0 * onepc / om1l + 3.0 * onepc
    t_weight = gamma * onepc / (om1l * gp1) + gamma * onepc / gp1
    if case == 1:
        t_damping = 2.0 * (1.0 + domain_measure) ** 2 * eps ** (-m2 / 2.0) / (a * c.E0**gamma)
    elif case == 2:
        t_damping = (
            2.0 * (1.0 + domain_measure) ** 2 / (gp1 * a)
            + 2.0 * (1.0 + domain_measure) ** 2 * eps ** (-m2 / 2.0) / (a * c.E0**gamma)
        )
    else:
        t_damping = 2.0 / a
    t_memory = (1.0 + 1.0 / (2.0 * vareps)) * 2.0 / (xi0 * gp1)
    t_delta = delta ** (-m1 / (m1 - 1.0)) / gp1

    bracket = t_boundary + t_weight + t_damping + t_memory + t_delta
    K = (1.0 / bracket) * (1.0 / xi0) * 0.5 * (2.0 - c.omega_small)
    return KResult(
        ok=True,
        K=K,
        eps=eps,
        vareps=vareps,
        delta=delta,
        terms={
            "boundary": t_boundary,
            "weight": t_weight,
            "damping": t_damping,
            "memory": t_memory,
            "delta": t_delta,
            "per_term_target": tgt,
        },
    )


def compute_K_alpha_sigma(
    c: StableSetConstants,
    m1: float,
    m2: float,
    a: float,
    domain_measure: float,
    alpha: float,
    sigma: float,
    C_kernel: float,
    gamma: float,
) -> KResult:
    """Decay constant K(alpha, sigma) for power-law kernels g' + C g^alpha <= 0.

    Requires 1 < alpha < 2, 0 < sigma < 1 and 2 alpha + sigma < 3 (so the
    kernel's (1-sigma) power keeps an integrable double tail).  The weight is
    identically one here, so the boundary row loses one pairing relative to
    the general-rate case; the memory row is replaced by the split-kernel pair

        (alpha-1)/(sigma+alpha-1) * 4(1+C~)/l * E0^(-gamma)
            * C^(1-sigma) / ((1 - r)(2 - r)),     r = (1-sigma)/(alpha-1) > 2
        sigma/(C (sigma+alpha-1)) * 1/(gamma r'/sigma + 1) * E0^(gamma r'/sigma - gamma)

    with r' = sigma + alpha - 1, both multiplied by (1 + 1/(2 vareps)), plus a
    standalone 2/(C (gamma+1)) row from the kernel-power energy pairing.
    """
    if not (1.0 < alpha < 2.0):
        raise ValueError("alpha must lie in (1, 2)")
    if not (0.0 < sigma < 1.0):
        raise ValueError("sigma must lie in (0, 1)")
    if 2.0 * alpha + sigma >= 3.0:
        raise ValueError(f"need 2*alpha + sigma < 3, got {2.0 * alpha + sigma:.6g}")
    if C_kernel <= 0:
        raise ValueError("kernel constant C must be positive")
    bad = _validate_K_inputs(c, m1, m2, a, gamma)
    if bad:
        return KResult(ok=False, reason=bad)

    case = _case_of(m1, m2)
    eps, vareps, delta, tgt = _split_small_parameters(c, m1, m2, a, domain_measure, case)
    onepc = 1.0 + c.Ctilde
    om1l = c.omega1 * c.l
    gp1 = gamma + 1.0
    r = (1.0 - sigma) / (alpha - 1.0)  # > 2 by the constraint
    rp = sigma + alpha - 1.0

    t_boundary = 2.0 * onepc / om1l + 2.0 * onepc
    t_weight = gamma * onepc / (om1l * gp1) + gamma * onepc / gp1
    if case == 1:
        t_damping = 2.0 * (1.0 + domain_measure) ** 2 * eps ** (-m2 / 2.0) / (a * c.E0**gamma)
    elif case == 2:
        t_damping = (
            2.0 * (1.0 + domain_measure) ** 2 / (gp1 * a)
            + 2.0 * (1.0 + domain_measure) ** 2 * eps ** (-m2 / 2.0) / (a * c.E0**gamma)
        )
    else:
        t_damping = 2.0 / a
    t_kernel = 2.0 / (C_kernel * gp1)
    inner_flat = (
        (alpha - 1.0) / rp
        * 4.0 * onepc / c.l
        / c.E0**gamma
        * C_kernel ** (1.0 - sigma)
        / (1.0 - r)
        / (2.0 - r)
    )
    power = gamma * rp / sigma
    inner_steep = sigma / (C_kernel * rp) / (power + 1.0) * c.E0 ** (power - gamma)
    t_memory = (1.0 + 1.0 / (2.0 * vareps)) * (inner_flat + inner_steep)
    t_delta = delta ** (-m1 / (m1 - 1.0)) / gp1

    bracket = t_boundary + t_weight + t_damping + t_kernel + t_memory + t_delta
    K = (1.0 / bracket) * 0.5 * (2.0 - c.omega_small)
    return KResult(
        ok=True,
        K=K,
        eps=eps,
        vareps=vareps,
        delta=delta,
        terms={
            "boundary": t_boundary,
            "weight": t_weight,
            "damping": t_damping,
            "kernel": t_kernel,
            "memory_flat": inner_flat,
            "memory_steep": inner_steep,
            "memory": t_memory,
            "delta": t_delta,
            "per_term_target": tgt,
        },
    )


# ---------------------------------------------------------------------------
# envelopes


@dataclass(frozen=True)
class DecayEnvelope:
    """Explicit upper bound E(0) * shape(t) that a verified trajectory obeys.

    kind: type1_poly | type1_exp | type2_poly | type2_exp.  Type-1 shapes are
    driven by the cumulative rate integral; type-2 shapes use plain time.
    """

    kind: str
    K: float
    E0: float
    m2: float
    xi_cumulative: Callable[[np.ndarray], np.ndarray] | None = None
    alpha: float | None = None
    sigma: float | None = None

    def __post_init__(self):
        if self.kind not in ("type1_poly", "type1_exp", "type2_poly", "type2_exp"):
            raise ValueError(f"unknown envelope kind '{self.kind}'")
        if self.K <= 0:
            raise ValueError("envelope needs K > 0")
        if self.kind.endswith("_poly") and self.m2 <= 2.0:
            raise ValueError("polynomial envelope needs m2 > 2")
        if self.kind.startswith("type1") and self.xi_cumulative is None:
            raise ValueError("type-1 envelope needs the cumulative rate integral")


def build_envelope(kind: str, K: float, E0: float, m2: float, xi=None,
                   alpha: float | None = None, sigma: float | None = None) -> DecayEnvelope:
    cum = xi.cumulative if xi is not None else None
    return DecayEnvelope(kind=kind, K=K, E0=E0, m2=m2, xi_cumulative=cum,
                         alpha=alpha, sigma=sigma)


def envelope(t, env: DecayEnvelope):
    """Evaluate the envelope; strictly decreasing, tends to zero."""
    t = np.asarray(t, dtype=float)
    if (t < 0).any():
        raise ValueError("envelope is defined for t >= 0")
    phi = env.xi_cumulative(t) if env.kind.startswith("type1") else t
    if env.kind.endswith("_exp"):
        out = env.E0 * np.exp(1.0 - env.K * phi)
    else:
        out = env.E0 * (env.m2 / (2.0 + env.K * (env.m2 - 2.0) * phi)) ** (2.0 / (env.m2 - 2.0))
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class EnvelopeVerdict:
    ok: bool
    max_violation: float
    tol: float
    margins: np.ndarray  # envelope*(1+tol) - E per record


def verify_envelope(traj: Trajectory, env: DecayEnvelope) -> EnvelopeVerdict:
    """E(t_i) <= envelope(t_i) * (1 + tol) at every record."""
    tol = 1e-3 + scheme_allowance(traj.meta.get("dt", 0.0), traj.meta.get("h", 0.0))
    bound = envelope(traj.times, env) * (1.0 + tol)
    E = traj.energies
    margins = bound - E
    return EnvelopeVerdict(
        ok=bool((margins >= 0.0).all()),
        max_violation=float(max(0.0, -margins.min())) if margins.size else 0.0,
        tol=tol,
        margins=margins,
    )


# ---------------------------------------------------------------------------
# integral-inequality oracle


@dataclass(frozen=True)
class KomornikResult:
    hypothesis_ok: bool | None
    conclusion_ok: bool
    inconclusive: bool
    worst_hypothesis_margin: float
    worst_conclusion_margin: float
    reason: str = ""


def komornik_check(
    E: Callable[[np.ndarray], np.ndarray],
    phi: Callable[[np.ndarray], np.ndarray],
    sigma: float,
    omega: float,
    horizon: float,
    n: int = 20001,
    tail: tuple | None = None,
    rtol: float = 1e-4,
) -> KomornikResult:
    """Numerically probe the integral-inequality decay criterion.

    Hypothesis: int_t^inf E(s)^(1+sigma) phi'(s) ds <= (1/omega) E(0)^sigma E(t)
    for every t.  Conclusion: E(t) <= E(0) e^(1-omega phi(t)) when sigma = 0,
    and E(t) <= E(0) ((1+sigma)/(1+omega sigma phi(t)))^(1/sigma) otherwise.

    The integral is tested on a uniform grid over [0, horizon]; the remainder
    beyond the horizon is bounded analytically from a declared tail model,
    ("exponential", rate) meaning E(s) <= E(h) exp(-rate (s-h)), or
    ("power", beta, rate) meaning E(s) <= E(h) ((1+rate h)/(1+rate s))^beta.
    phi' is assumed nonincreasing past the horizon (true for concave weights).
    A violation of the partial integral alone is definitive; a pass without a
    usable tail bound is only reported if the integrand has died out, else the
    verdict is inconclusive.
    """
    if sigma < 0 or omega <= 0 or horizon <= 0:
        raise ValueError("need sigma >= 0, omega > 0, horizon > 0")
    s = np.linspace(0.0, horizon, n)
    Ev = np.asarray(E(s), dtype=float)
    phiv = np.asarray(phi(s), dtype=float)
    if abs(phiv[0]) > 1e-12:
        raise ValueError("phi(0) must be 0")
    if (np.diff(phiv) <= 0).any():
        raise ValueError("phi must be strictly increasing")
    if (np.diff(Ev) > 1e-12 * max(1.0, abs(Ev[0]))).any():
        raise ValueError("E must be nonincreasing")
    E0 = float(Ev[0])
    scale = max(E0, 1e-300)

    phip = np.gradient(phiv, s, edge_order=2)
    integrand = Ev ** (1.0 + sigma) * phip
    panels = 0.5 * (integrand[1:] + integrand[:-1]) * np.diff(s)
    partial = np.concatenate([np.cumsum(panels[::-1])[::-1], [0.0]])

    tail_bound = None
    Eh = float(Ev[-1])
    php_h = float(phip[-1])
    if tail is not None:
        if tail[0] == "exponential":
            rate = float(tail[1])
            tail_bound = Eh ** (1.0 + sigma) * php_h / ((1.0 + sigma) * rate)
        elif tail[0] == "power":
            beta = float(tail[1])
            rate = float(tail[2]) if len(tail) > 2 else 1.0
            bprime = beta * (1.0 + sigma)
            if bprime <= 1.0:
                return KomornikResult(None, False, True, 0.0, 0.0,
                                      "power tail too heavy: beta*(1+sigma) <= 1")
            tail_bound = (
                Eh ** (1.0 + sigma) * php_h * (1.0 + rate * horizon) / (rate * (bprime - 1.0))
            )
        else:
            raise ValueError(f"unknown tail model '{tail[0]}'")
    elif integrand[-1] <= 1e-12 * max(integrand[0], 1e-300):
        tail_bound = 0.0  # integrand has died out; neglected remainder

    rhs = (E0**sigma / omega) * Ev
    atol = 1e-12 * scale
    lower_margin = rhs * (1.0 + rtol) + atol - partial
    if (lower_margin < 0.0).any():
        hyp_ok: bool | None = False
        inconclusive = False
        worst_h = float(lower_margin.min())
        reason = "partial integral already exceeds the bound"
    elif tail_bound is not None:
        full_margin = rhs * (1.0 + rtol) + atol - (partial + tail_bound)
        hyp_ok = bool((full_margin >= 0.0).all())
        inconclusive = False
        worst_h = float(full_margin.min())
        reason = "" if hyp_ok else "bound fails once the tail is added"
    else:
        hyp_ok = None
        inconclusive = True
        worst_h = float(lower_margin.min())
        reason = "horizon too short: integrand still live and no tail model declared"

    if sigma == 0.0:
        bound = E0 * np.exp(1.0 - omega * phiv)
    else:
        bound = E0 * ((1.0 + sigma) / (1.0 + omega * sigma * phiv)) ** (1.0 / sigma)
    conc_margin = bound * (1.0 + rtol) + atol - Ev
    conc_ok = bool((conc_margin >= 0.0).all())

    return KomornikResult(
        hypothesis_ok=hyp_ok,
        conclusion_ok=conc_ok,
        inconclusive=inconclusive,
        worst_hypothesis_margin=worst_h,
        worst_conclusion_margin=float(conc_margin.min()),
        reason=reason,
    )


# ---------------------------------------------------------------------------
# empirical decay fitting


@dataclass(frozen=True)
class FitResult:
    kind: str  # "exponential" | "polynomial" | "undetermined"
    rate: float | None
    r2: float
    r2_alt: float
    note: str = ""


def _fit_and_score(x_fit, y_fit, x_all, y_all) -> tuple[float, float]:
    slope, intercept = np.polyfit(x_fit, y_fit, 1)
    pred = slope * x_all + intercept
    ss_res = float(((y_all - pred) ** 2).sum())
    ss_tot = float(((y_all - y_all.mean()) ** 2).sum())
    if ss_tot == 0.0:
        return 0.0, float(slope)
    return 1.0 - ss_res / ss_tot, float(slope)


def fit_decay(traj: Trajectory) -> FitResult:
    """Classify the tail of the energy as exponential or polynomial decay.

    Least squares of log E against t and against log(1+t) over the trailing
    half of the positive records (transient-free window); each model is then
    scored by R^2 over the whole positive series, which lets the wrong class's
    extrapolation expose it.  The better model wins when the R^2 gap exceeds
    0.02, otherwise the fit is undetermined.
    """
    return fit_decay_series(np.asarray(traj.times), traj.energies)


def fit_decay_series(t: np.ndarray, E: np.ndarray) -> FitResult:
    t = np.asarray(t, dtype=float)
    E = np.asarray(E, dtype=float)
    keep = E > 0.0
    if keep.sum() < 50:
        return FitResult("undetermined", None, 0.0, 0.0,
                         note=f"only {int(keep.sum())} positive records (need 50)")
    t, E = t[keep], E[keep]
    half = t.size // 2
    logE = np.log(E)
    r2_exp, slope_exp = _fit_and_score(t[half:], logE[half:], t, logE)
    x_pol = np.log1p(t)
    r2_pol, slope_pol = _fit_and_score(x_pol[half:], logE[half:], x_pol, logE)
    if abs(r2_exp - r2_pol) <= 0.02:
        return FitResult("undetermined", None, r2_exp, r2_pol,
                         note="models indistinguishable")
    if r2_exp > r2_pol:
        note = "near-zero rate" if abs(slope_exp) < 1e-8 else ""
        return FitResult("exponential", -slope_exp, r2_exp, r2_pol, note)
    return FitResult("polynomial", -slope_pol, r2_pol, r2_exp)
