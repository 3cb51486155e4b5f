"""Discrete gradient energies and their first variations.

The local regimes discretize E(u) = (1/p) int (|Du|^2 + eps^2)^(p/2) with a
per-cell forward-difference gradient vector; the nonlocal regime uses the
pairwise kernel from :mod:`dnflow.fractional`.  The constant eps**p is
subtracted cell-wise so E(0) = 0; gradients are unaffected.

``energy_gradient`` returns the gradient as a *density*: the raw partial
derivatives divided by the cell volume, which approximates -Delta_p u
pointwise for the local regimes.

Reduction order: every sum is a serial numpy reduction in node/cell index
order, so results are deterministic for fixed inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import Domain
from .errors import UnsupportedRegimeError

__all__ = [
    "BoundaryRegime",
    "EnergyParams",
    "jp",
    "energy",
    "energy_gradient",
    "energy_and_gradient",
    "trace_lp",
    "validate_regime",
]

_LOCAL_KINDS = {"dirichlet", "robin", "neumann"}


@dataclass(frozen=True)
class BoundaryRegime:
    """Which energy form and constraint set the flow runs under.

    kind is one of ``dirichlet``, ``robin``, ``neumann``, ``fractional``;
    ``beta`` is the Robin trace coefficient (> 0) and ``s`` the nonlocal
    order in (0, 1).
    """

    kind: str
    beta: float = 0.0
    s: float = 0.0

    def __post_init__(self):
        if self.kind not in _LOCAL_KINDS | {"fractional"}:
            raise UnsupportedRegimeError(f"unknown regime kind {self.kind!r}")
        if self.kind == "robin" and not self.beta > 0:
            raise ValueError(f"robin regime needs beta > 0, got {self.beta}")
        if self.kind == "fractional" and not 0.0 < self.s < 1.0:
            raise ValueError(f"fractional regime needs s in (0,1), got {self.s}")

    @classmethod
    def dirichlet(cls):
        return cls("dirichlet")

    @classmethod
    def robin(cls, beta: float):
        return cls("robin", beta=beta)

    @classmethod
    def neumann(cls):
        return cls("neumann")

    @classmethod
    def fractional(cls, s: float):
        return cls("fractional", s=s)


@dataclass(frozen=True)
class EnergyParams:
    """Exponent p in (1, inf) and the gradient-regularization length eps >= 0.

    eps = 0 keeps the bare |Du|^p energy and is only allowed for p >= 2,
    where it stays C^1.  The conjugate exponent q = p/(p-1) is derived.
    """

    p: float
    epsilon: float = 0.0

    def __post_init__(self):
        if not self.p > 1.0:
            raise ValueError(f"p must exceed 1, got {self.p}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon}")
        if self.epsilon == 0.0 and self.p < 2.0:
            raise ValueError("epsilon = 0 requires p >= 2")

    @property
    def q(self) -> float:
        return self.p / (self.p - 1.0)

    def with_epsilon(self, eps: float) -> "EnergyParams":
        return EnergyParams(self.p, eps)


def jp(z, p: float):
    """The odd power map |z|**(p-2) * z, computed as sign(z)*|z|**(p-1).

    Strictly increasing and odd; jp(0) = 0 for every p > 1.
    """
    z_arr = np.asarray(z, dtype=float)
    out = np.sign(z_arr) * np.abs(z_arr) ** (p - 1.0)
    return float(out) if np.isscalar(z) or z_arr.ndim == 0 else out


def validate_regime(dom: Domain, regime: BoundaryRegime) -> None:
    """Reject regime/domain pairs the discretization does not define."""
    if regime.kind == "robin" and dom.kind == "masked":
        raise UnsupportedRegimeError("robin regime needs a geometric normal; "
                                     "masked domains offer dirichlet and neumann only")
    if regime.kind == "fractional" and dom.kind != "interval":
        raise UnsupportedRegimeError("fractional regime is only offered on intervals")


def _cell_terms(r2, p, eps, want_grad):
    # Shared smooth kernel: returns (energy density per cell, multiplier m)
    # where d/dg of the cell energy is m * g for gradient component g.
    # The eps offset uses the identical expression as the cell power so the
    # zero field gives exactly zero energy.
    e2 = eps * eps
    if p == 2.0:
        m = np.ones_like(r2)
        cell = r2
    else:
        base = r2 + e2
        if eps == 0.0:
            # p > 2 here; 0**((p-2)/2) = 0 is the correct limit.
            m = np.where(base > 0.0, base, 1.0) ** ((p - 2.0) / 2.0)
            m = np.where(base > 0.0, m, 0.0)
            cell = m * base
        else:
            m = base ** ((p - 2.0) / 2.0)
            cell = m * base - e2 ** ((p - 2.0) / 2.0) * e2
    return cell, (m if want_grad else None)


def _robin_terms(dom, u, p, eps, beta, want_grad):
    ub = u[dom.trace_index]
    cell, m = _cell_terms(ub * ub, p, eps, want_grad)
    e_val = (beta / p) * float(np.sum(dom.trace_weight * cell))
    if not want_grad:
        return e_val, None
    raw = np.zeros_like(u)
    np.add.at(raw, dom.trace_index, beta * dom.trace_weight * m * ub)
    return e_val, raw


def _local_1d(dom, u, p, eps, regime_kind, want_grad):
    h = dom.hx
    if regime_kind == "dirichlet":
        padded = np.empty(u.size + 2)
        padded[0] = padded[-1] = 0.0
        padded[1:-1] = u
        g = np.diff(padded) / h
    else:
        g = np.diff(u) / h
    cell, m = _cell_terms(g * g, p, eps, want_grad)
    e_val = (h / p) * float(np.sum(cell))
    if not want_grad:
        return e_val, None
    s = m * g  # d(cell)/d(g)
    if regime_kind == "dirichlet":
        raw = s[:-1] - s[1:]
    else:
        raw = np.zeros_like(u)
        raw[:-1] -= s
        raw[1:] += s
    return e_val, raw


def _grid_arrays(dom, u):
    # Dense (rows, cols) array of field values; zeros off the mask.
    if dom.kind == "rectangle":
        return u.reshape(dom.shape), None
    grid = np.zeros(dom.shape)
    grid[dom.mask] = u
    return grid, dom.mask


def _local_2d_dirichlet(dom, u, p, eps, want_grad):
    hx, hy, vol = dom.hx, dom.hy, dom.cell_volume
    grid, mask = _grid_arrays(dom, u)
    ny, nx = grid.shape
    P = np.zeros((ny + 2, nx + 2))
    P[1:-1, 1:-1] = grid
    gx = np.diff(P, axis=1)[:-1, :] / hx  # (ny+1, nx+1) anchored cells
    gy = np.diff(P, axis=0)[:, :-1] / hy
    cell, m = _cell_terms(gx * gx + gy * gy, p, eps, want_grad)
    e_val = (vol / p) * float(np.sum(cell))
    if not want_grad:
        return e_val, None
    sx = (vol / hx) * m * gx
    sy = (vol / hy) * m * gy
    G = np.zeros_like(P)
    G[:-1, 1:] += sx
    G[:-1, :-1] -= sx
    G[1:, :-1] += sy
    G[:-1, :-1] -= sy
    inner = G[1:-1, 1:-1]
    raw = inner[mask] if mask is not None else inner.ravel()
    return e_val, raw


def _local_2d_neumann(dom, u, p, eps, want_grad):
    hx, hy, vol = dom.hx, dom.hy, dom.cell_volume
    grid, mask = _grid_arrays(dom, u)
    ny, nx = grid.shape
    gx = np.zeros_like(grid)
    gy = np.zeros_like(grid)
    dx = np.diff(grid, axis=1) / hx
    dy = np.diff(grid, axis=0) / hy
    if mask is not None:
        dx = np.where(mask[:, 1:] & mask[:, :-1], dx, 0.0)
        dy = np.where(mask[1:, :] & mask[:-1, :], dy, 0.0)
    gx[:, :-1] = dx
    gy[:-1, :] = dy
    cell, m = _cell_terms(gx * gx + gy * gy, p, eps, want_grad)
    e_val = (vol / p) * float(np.sum(cell))
    if not want_grad:
        return e_val, None
    sx = (vol / hx) * (m * gx)[:, :-1]
    sy = (vol / hy) * (m * gy)[:-1, :]
    G = np.zeros_like(grid)
    G[:, 1:] += sx
    G[:, :-1] -= sx
    G[1:, :] += sy
    G[:-1, :] -= sy
    raw = G[mask] if mask is not None else G.ravel()
    return e_val, raw


def _fractional_parts(dom, u, p, eps, s, want_grad):
    from .fractional import kernel_for

    ker = kernel_for(dom, s, p)
    h = dom.hx
    diff = u[:, None] - u[None, :]
    pair_cell, pair_m = _cell_terms(diff * diff, p, eps, True)
    ext_cell, ext_m = _cell_terms(u * u, p, eps, True)
    e_val = (float((ker.weights * pair_cell).sum())
             + 2.0 * h * float(np.sum(ker.exterior * ext_cell))) / p
    if not want_grad:
        return e_val, None
    raw = (2.0 * (ker.weights * (pair_m * diff)).sum(axis=1)
           + 2.0 * h * ker.exterior * (ext_m * u))
    return e_val, raw


def _parts(dom, u, params, regime, want_grad):
    u = dom.check_field(u)
    validate_regime(dom, regime)
    p, eps = params.p, params.epsilon
    if regime.kind == "fractional":
        return _fractional_parts(dom, u, p, eps, regime.s, want_grad)
    if dom.dimension == 1:
        e_val, raw = _local_1d(dom, u, p, eps, regime.kind, want_grad)
    elif regime.kind == "dirichlet":
        e_val, raw = _local_2d_dirichlet(dom, u, p, eps, want_grad)
    else:
        e_val, raw = _local_2d_neumann(dom, u, p, eps, want_grad)
    if regime.kind == "robin":
        e_b, raw_b = _robin_terms(dom, u, p, eps, regime.beta, want_grad)
        e_val += e_b
        if want_grad:
            raw = raw + raw_b
    return e_val, raw


def energy(dom: Domain, u, params: EnergyParams, regime: BoundaryRegime) -> float:
    """The regime's convex energy at u; zero at the zero field."""
    return _parts(dom, u, params, regime, want_grad=False)[0]


def energy_gradient(dom: Domain, u, params: EnergyParams, regime: BoundaryRegime) -> np.ndarray:
    """Exact gradient of the implemented energy, as a pointwise density."""
    _, raw = _parts(dom, u, params, regime, want_grad=True)
    return raw / dom.cell_volume


def energy_and_gradient(dom, u, params, regime):
    """(energy, raw partial derivatives) in one pass; solver hot path."""
    return _parts(dom, u, params, regime, want_grad=True)


def trace_lp(dom: Domain, u, p: float) -> float:
    """Discrete boundary integral int |Tu|^p dsigma.

    Trace values are read at the boundary-adjacent interior nodes with the
    domain's surface weights.  Only interval and rectangle domains carry a
    boundary trace.
    """
    if dom.kind == "masked":
        raise UnsupportedRegimeError("masked domains have no boundary trace")
    u = dom.check_field(u)
    ub = u[dom.trace_index]
    return float(np.sum(dom.trace_weight * np.abs(ub) ** p))
