"""Uniform Dirichlet grids on an interval or rectangle, and their discrete operators.

The gradient norm integrates squared face-midpoint differences.  With the
standard central-difference Laplacian this makes

    <-laplacian(u), u>  ==  grad_sq_norm(u)

hold to rounding, so the energy bookkeeping downstream never fights the time
stepper over quadrature conventions.  Any change here must preserve that pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DomainSpec",
    "node_weights",
    "zero_boundary",
    "laplacian",
    "grad_sq_norm",
    "weighted_grad_flat",
    "l2_norm_sq",
    "inner_product",
    "first_eigenvalue",
    "first_eigenmode",
    "embedding_constant",
]


@dataclass(frozen=True)
class DomainSpec:
    """Uniform tensor grid on (0,L1) or (0,L1)x(0,L2), u = 0 on the boundary."""

    dim: int
    lengths: tuple[float, ...]
    nodes: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "lengths", tuple(float(L) for L in self.lengths))
        object.__setattr__(self, "nodes", tuple(int(n) for n in self.nodes))
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if len(self.lengths) != self.dim or len(self.nodes) != self.dim:
            raise ValueError("lengths / nodes must have one entry per axis")
        if any(L <= 0 for L in self.lengths):
            raise ValueError("lengths must be positive")
        if any(n < 3 for n in self.nodes):
            raise ValueError("need at least 3 nodes per axis")

    @property
    def h(self) -> tuple[float, ...]:
        return tuple(L / (n - 1) for L, n in zip(self.lengths, self.nodes))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.nodes

    @property
    def measure(self) -> float:
        return float(np.prod(self.lengths))

    @property
    def cell(self) -> float:
        """Measure of one grid cell (h in 1D, hx*hy in 2D)."""
        return float(np.prod(self.h))

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(0.0, L, n) for L, n in zip(self.lengths, self.nodes)]

    def meshgrid(self) -> list[np.ndarray]:
        return list(np.meshgrid(*self.axes(), indexing="ij"))

    def coords_flat(self) -> np.ndarray:
        """(N, dim) array of node coordinates, C order."""
        return np.stack([g.ravel() for g in self.meshgrid()], axis=1)

    def check_field(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != self.shape:
            raise ValueError(f"field shape {u.shape} does not match grid {self.shape}")
        return u


def node_weights(dom: DomainSpec) -> np.ndarray:
    """Trapezoidal quadrature weights per node (tensor product in 2D)."""
    axis_w = []
    for n, h in zip(dom.nodes, dom.h):
        w = np.full(n, h)
        w[0] = w[-1] = 0.5 * h
        axis_w.append(w)
    if dom.dim == 1:
        return axis_w[0]
    return np.outer(axis_w[0], axis_w[1])


def zero_boundary(u, dom: DomainSpec) -> np.ndarray:
    """Copy of u with the Dirichlet boundary forced to zero."""
    u = dom.check_field(u).copy()
    if dom.dim == 1:
        u[0] = u[-1] = 0.0
    else:
        u[0, :] = u[-1, :] = 0.0
        u[:, 0] = u[:, -1] = 0.0
    return u


def laplacian(u, dom: DomainSpec) -> np.ndarray:
    """Second-order central-difference Laplacian; boundary rows are zero."""
    u = dom.check_field(u)
    out = np.zeros_like(u)
    if dom.dim == 1:
        (h,) = dom.h
        out[1:-1] = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / (h * h)
    else:
        hx, hy = dom.h
        out[1:-1, 1:-1] = (
            (u[2:, 1:-1] - 2.0 * u[1:-1, 1:-1] + u[:-2, 1:-1]) / (hx * hx)
            + (u[1:-1, 2:] - 2.0 * u[1:-1, 1:-1] + u[1:-1, :-2]) / (hy * hy)
        )
    return out


def _face_diffs(u, dom: DomainSpec) -> list[np.ndarray]:
    """Forward differences per axis, divided by the spacing (face-midpoint gradient)."""
    if dom.dim == 1:
        (h,) = dom.h
        return [(u[1:] - u[:-1]) / h]
    hx, hy = dom.h
    return [(u[1:, :] - u[:-1, :]) / hx, (u[:, 1:] - u[:, :-1]) / hy]


def grad_sq_norm(u, dom: DomainSpec) -> float:
    """||grad u||_2^2 by face-midpoint quadrature; zero iff u vanishes identically."""
    u = dom.check_field(u)
    cell = dom.cell
    return float(sum((d * d).sum() for d in _face_diffs(u, dom)) * cell)


def weighted_grad_flat(u, dom: DomainSpec) -> np.ndarray:
    """Flattened gradient scaled so that its plain dot product equals grad_sq_norm."""
    u = dom.check_field(u)
    root = math.sqrt(dom.cell)
    return np.concatenate([d.ravel() for d in _face_diffs(u, dom)]) * root


def l2_norm_sq(u, dom: DomainSpec) -> float:
    u = dom.check_field(u)
    return float((u * u * node_weights(dom)).sum())


def inner_product(u, w, dom: DomainSpec) -> float:
    u = dom.check_field(u)
    w = dom.check_field(w)
    return float((u * w * node_weights(dom)).sum())


def first_eigenvalue(dom: DomainSpec) -> float:
    """Smallest Dirichlet eigenvalue of -laplacian (continuum value for the box)."""
    return float(sum((math.pi / L) ** 2 for L in dom.lengths))


def first_eigenmode(dom: DomainSpec) -> np.ndarray:
    """Product-of-sines ground mode, amplitude one."""
    axes = dom.axes()
    if dom.dim == 1:
        return np.sin(math.pi * axes[0] / dom.lengths[0])
    x, y = dom.meshgrid()
    return np.sin(math.pi * x / dom.lengths[0]) * np.sin(math.pi * y / dom.lengths[1])


def _poincare_constant(dom: DomainSpec) -> float:
    return 1.0 / math.sqrt(first_eigenvalue(dom))


def _const_exponent_bound(dom: DomainSpec, s: float) -> float:
    """Upper bound B_s with ||u||_s <= B_s ||grad u||_2 for constant exponent s >= 2.

    s == 2 uses the Poincare constant 1/sqrt(omega_1) directly.  Otherwise:

    1D: |u(x)|^2 <= min(x, L-x) ||u'||_2^2, so ||u||_inf <= sqrt(L/2) ||u'||_2,
        and Hoelder against the measure gives B_s = L^(1/s) sqrt(L/2).

    2D: the W^{1,1} Sobolev bound ||v||_2 <= ||grad v||_1 / (2 sqrt(pi)) applied
        to v = |u|^k gives the recursion

            C_{2k} = ( k/(2 sqrt(pi)) * C_{2(k-1)}^{k-1} )^{1/k},  C_2 = 1/sqrt(omega_1),

        and a fractional s is pulled under the next even integer s* by
        B_s = |Omega|^{1/s - 1/s*} C_{s*}.

    These are certified upper bounds, not sharp constants; overestimating B only
    tightens the sufficient conditions checked downstream.
    """
    if s < 2.0 - 1e-12:
        raise ValueError(f"constant-exponent bound needs s >= 2, got {s}")
    if abs(s - 2.0) <= 1e-12:
        return _poincare_constant(dom)
    if dom.dim == 1:
        L = dom.lengths[0]
        return L ** (1.0 / s) * math.sqrt(L / 2.0)
    s_even = 2 * math.ceil(s / 2.0)
    c = _poincare_constant(dom)
    for k in range(2, s_even // 2 + 1):
        c = (k / (2.0 * math.sqrt(math.pi)) * c ** (k - 1)) ** (1.0 / k)
    return dom.measure ** (1.0 / s - 1.0 / s_even) * c


def embedding_constant(dom: DomainSpec, q, override: float | None = None) -> float:
    """Certified upper bound B with ||u||_{q(x)} <= B ||grad u||_2.

    For a constant exponent the bound B_s above is returned directly.  For a
    genuinely variable exponent the norm is first pushed into the constant
    space with the larger exponent, which costs at most a factor |Omega| + 1,
    and the max over the two endpoint exponents keeps the bound safe whichever
    endpoint dominates.  ``override`` short-circuits everything (trusted user
    value).
    """
    if override is not None:
        if override <= 0:
            raise ValueError("embedding override must be positive")
        return float(override)
    q1, q2 = float(q.q1), float(q.q2)
    if abs(q2 - q1) <= 1e-12:
        return _const_exponent_bound(dom, q1)
    inflate = dom.measure + 1.0
    return inflate * max(_const_exponent_bound(dom, q1), _const_exponent_bound(dom, q2))
