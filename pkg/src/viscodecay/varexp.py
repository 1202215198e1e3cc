"""Variable-exponent Lebesgue machinery on the discrete grid.

An exponent field is a nodal sampling of q(x) with 2 <= q1 <= q(x) <= q2.  The
modular is the plain nodal-trapezoid integral of |f|^q(x); the Luxemburg norm
is the scaling that drives the modular of f/lambda to one.  Exponents are
never interpolated: every integral shares the same nodal quadrature so the
modular seen by the energy audit is bit-identical to the one used here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import DomainSpec, node_weights

__all__ = [
    "ExponentField",
    "ValidationReport",
    "LogHolderResult",
    "validate_exponent_bounds",
    "log_holder_check",
    "modular",
    "luxemburg_norm",
    "check_modular_norm_bounds",
    "exponent_profile",
]


@dataclass(frozen=True)
class ExponentField:
    """Nodal exponent samples plus an optional log-Hoelder certificate (A, delta)."""

    values: np.ndarray
    logholder_A: float | None = None
    logholder_delta: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.size == 0:
            raise ValueError("exponent field must not be empty")
        if not np.isfinite(self.values).all():
            raise ValueError("exponent field must be finite")

    @property
    def q1(self) -> float:
        return float(self.values.min())

    @property
    def q2(self) -> float:
        return float(self.values.max())

    @property
    def is_constant(self) -> bool:
        return self.q2 - self.q1 <= 1e-14

    @staticmethod
    def constant(value: float, dom: DomainSpec) -> "ExponentField":
        return ExponentField(np.full(dom.shape, float(value)))


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    worst_index: tuple[int, ...] | None
    worst_value: float | None
    message: str


@dataclass(frozen=True)
class LogHolderResult:
    ok: bool
    worst_pair: tuple[int, int] | None
    A_required: float
    vacuous: bool


def validate_exponent_bounds(field: ExponentField, q_max: float) -> ValidationReport:
    """Every nodal value must lie in [2, q_max]; reports the worst offender."""
    v = field.values
    if v.size == 0:
        raise ValueError("empty exponent field")
    below = 2.0 - v
    above = v - float(q_max)
    worst = np.maximum(below, above)
    idx = int(np.argmax(worst))
    if worst.flat[idx] <= 0.0:
        return ValidationReport(True, None, None, "all exponents within [2, q_max]")
    w_idx = np.unravel_index(idx, v.shape)
    return ValidationReport(
        False,
        tuple(int(i) for i in w_idx),
        float(v.flat[idx]),
        f"exponent {v.flat[idx]:.6g} at node {tuple(int(i) for i in w_idx)} "
        f"outside [2, {q_max:.6g}]",
    )


def log_holder_check(
    field: ExponentField, A: float, delta: float, dom: DomainSpec
) -> LogHolderResult:
    """Check |q(x)-q(y)| * (-log|x-y|) <= A over all node pairs with |x-y| < delta.

    A_required is the max of the left-hand side over the tested pairs, so the
    certificate holds iff A_required <= A.  With delta at or below the grid
    spacing no pair is testable and the result is flagged vacuous.
    """
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    if A <= 0.0:
        raise ValueError("A must be positive")
    coords = dom.coords_flat()
    q = field.values.ravel()
    if q.shape[0] != coords.shape[0]:
        raise ValueError("exponent field does not match the grid")

    n = coords.shape[0]
    best = 0.0
    best_pair: tuple[int, int] | None = None
    tested = False
    # Pairwise sweep, chunked over rows to keep the distance matrix bounded.
    chunk = max(1, int(4e6) // max(n, 1))
    for start in range(0, n, chunk):
        stop = min(n, start + chunk)
        d = np.linalg.norm(coords[start:stop, None, :] - coords[None, :, :], axis=2)
        dq = np.abs(q[start:stop, None] - q[None, :])
        mask = (d > 0.0) & (d < delta)
        if not mask.any():
            continue
        tested = True
        val = np.zeros_like(d)
        val[mask] = dq[mask] * (-np.log(d[mask]))
        flat = int(np.argmax(val))
        i, j = np.unravel_index(flat, val.shape)
        if val[i, j] > best:
            best = float(val[i, j])
            best_pair = (start + int(i), int(j))
    if not tested:
        return LogHolderResult(False, None, 0.0, vacuous=True)
    return LogHolderResult(best <= A, best_pair, best, vacuous=False)


def _check_same_grid(f: np.ndarray, q: ExponentField, dom: DomainSpec) -> np.ndarray:
    f = dom.check_field(f)
    if q.values.shape != dom.shape:
        raise ValueError(
            f"exponent grid {q.values.shape} does not match domain grid {dom.shape}"
        )
    return f


def modular(f, q: ExponentField, dom: DomainSpec) -> float:
    """Nodal-trapezoid value of the modular integral of |f|^q(x)."""
    f = _check_same_grid(f, q, dom)
    return float((np.abs(f) ** q.values * node_weights(dom)).sum())


_BISECT_TOL = 1e-12  # absolute tolerance on the modular residual
_MAX_EXPAND = 200
_MAX_BISECT = 200


def luxemburg_norm(f, q: ExponentField, dom: DomainSpec) -> float:
    """Scaling lambda* with modular(f/lambda*) == 1, by safeguarded bisection.

    Returns 0 for the zero field.  The initial bracket comes from the
    modular/norm sandwich: the norm lies between rho^(1/q2) and rho^(1/q1)
    (in some order) when rho = modular(f), padded by a factor 2 each way and
    expanded geometrically if the residual has not changed sign yet.
    """
    f = _check_same_grid(f, q, dom)
    w = node_weights(dom)
    absf = np.abs(f)
    rho = float((absf ** q.values * w).sum())
    if rho == 0.0:
        return 0.0

    def residual(lam: float) -> float:
        with np.errstate(over="ignore"):
            val = ((absf / lam) ** q.values * w).sum()
        return float(val) - 1.0

    lo = 0.5 * rho ** (1.0 / q.q2)
    hi = 2.0 * rho ** (1.0 / q.q1)
    lo, hi = min(lo, hi), max(lo, hi)
    # residual is strictly decreasing in lambda: want residual(lo) >= 0 >= residual(hi)
    expansions = 0
    while residual(lo) < 0.0:
        lo *= 0.5
        expansions += 1
        if expansions > _MAX_EXPAND:
            raise ArithmeticError(
                f"luxemburg bracket failure: lo={lo:.3e}, rho={rho:.3e}"
            )
    expansions = 0
    while residual(hi) > 0.0:
        hi *= 2.0
        expansions += 1
        if expansions > _MAX_EXPAND:
            raise ArithmeticError(
                f"luxemburg bracket failure: hi={hi:.3e}, rho={rho:.3e}"
            )
    mid = 0.5 * (lo + hi)
    for _ in range(_MAX_BISECT):
        mid = 0.5 * (lo + hi)
        r = residual(mid)
        if abs(r) <= _BISECT_TOL:
            return mid
        if r > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(1.0, hi):
            break
    return mid


def check_modular_norm_bounds(
    f, q: ExponentField, dom: DomainSpec, rtol: float = 1e-8
) -> bool:
    """min(||f||^q1, ||f||^q2) <= modular(f) <= max(...), up to relative rtol."""
    rho = modular(f, q, dom)
    nrm = luxemburg_norm(f, q, dom)
    lo = min(nrm**q.q1, nrm**q.q2)
    hi = max(nrm**q.q1, nrm**q.q2)
    slack = rtol * max(1.0, hi)
    return (lo - slack) <= rho <= (hi + slack)


def exponent_profile(name: str, params: dict, dom: DomainSpec) -> ExponentField:
    """Build an exponent field from a named analytic profile.

    const:     {"value": v}
    linear:    {"lo": a, "hi": b}       ramps along the first axis
    sine-bump: {"base": a, "amplitude": c}  adds c*sin^2(pi x/L) on the first axis
    array:     {"values": nested list}  inline nodal samples
    """
    if name == "const":
        return ExponentField.constant(params["value"], dom)
    if name == "array":
        values = np.asarray(params["values"], dtype=float)
        return ExponentField(values.reshape(dom.shape))
    x = dom.axes()[0]
    L = dom.lengths[0]
    if name == "linear":
        lo, hi = float(params["lo"]), float(params["hi"])
        prof = lo + (hi - lo) * x / L
    elif name == "sine-bump":
        base, amp = float(params["base"]), float(params["amplitude"])
        prof = base + amp * np.sin(np.pi * x / L) ** 2
    else:
        raise ValueError(f"unknown exponent profile '{name}'")
    if dom.dim == 1:
        return ExponentField(prof)
    return ExponentField(np.repeat(prof[:, None], dom.nodes[1], axis=1))
