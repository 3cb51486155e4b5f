"""Run the implicit scheme, build its interpolants, expose rescaled iterates.

Each step minimizes the backward functional at a frozen regularization
length eps_k = epsilon * max|u^{k-1}| (the relative default keeps the
per-step operator consistent with the flow's degree-p homogeneity as the
solution decays).  The per-step eps is recorded so diagnostics evaluate the
same functional the solver minimized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics as diag
from .domain import Domain, lp_norm
from .elliptic import SolverConfig, implicit_step, zero_pmean_shift
from .errors import NonConvergenceError
from .operators import BoundaryRegime, EnergyParams, energy, jp

__all__ = [
    "FlowTrajectory",
    "evolve",
    "evolve_until_settled",
    "auto_tau",
    "interpolant_v",
    "interpolant_w",
    "rescaled_profile",
    "write_snapshot",
    "read_snapshot",
]

# States whose L^p norm falls below this multiple of the initial norm are
# reported as the degenerate (identically vanishing) limit.
DEGENERATE_FLOOR = 1e3 * np.finfo(float).eps


@dataclass
class FlowTrajectory:
    """The scheme's state sequence u^0..u^K with per-step diagnostics."""

    dom: Domain
    tau: float
    params: EnergyParams
    regime: BoundaryRegime
    states: list
    eps_used: list
    diagnostics: list = field(default_factory=list)
    projected_initial: np.ndarray | None = None

    @property
    def steps(self) -> int:
        return len(self.states) - 1

    def regime_energy(self, k: int) -> float:
        """Energy of u^k under the eps frozen for that step (cached)."""
        if not hasattr(self, "_energy_cache"):
            self._energy_cache = {}
        val = self._energy_cache.get(k)
        if val is None:
            params_k = self.params.with_epsilon(self.eps_used[k])
            val = energy(self.dom, self.states[k], params_k, self.regime)
            self._energy_cache[k] = val
        return val


def _step_epsilon(params: EnergyParams, u_prev: np.ndarray, adaptive: bool) -> float:
    if not adaptive:
        return params.epsilon
    scale = float(np.max(np.abs(u_prev))) if u_prev.size else 0.0
    eps = params.epsilon * scale
    # Zero or underflowed scale: fall back to the nominal value (the state is
    # at or below the degenerate floor, where eps no longer matters).
    return eps if eps > 0.0 else params.epsilon


def evolve(dom: Domain, g, tau: float, steps: int, params: EnergyParams,
           regime: BoundaryRegime, cfg: SolverConfig,
           adaptive_epsilon: bool = True) -> FlowTrajectory:
    """March K implicit steps from g and record diagnostics per step.

    Neumann initial data is first shifted to its zero-p-mean representative.
    Solver failures propagate with the step index attached.
    """
    if steps < 1:
        raise ValueError(f"need at least one step, got {steps}")
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    g = dom.check_field(g)
    if np.isnan(g).all():
        raise ValueError("initial data is identically NaN")

    projected = None
    if regime.kind == "neumann":
        g = zero_pmean_shift(dom, g, params.p)
        projected = g

    traj = FlowTrajectory(dom=dom, tau=tau, params=params, regime=regime,
                          states=[g], eps_used=[], projected_initial=projected)
    traj.eps_used.append(_step_epsilon(params, g, adaptive_epsilon))
    traj.diagnostics.append(diag.build_row(dom, traj, 0))

    u = g
    for k in range(1, steps + 1):
        eps_k = _step_epsilon(params, u, adaptive_epsilon)
        try:
            u = implicit_step(dom, u, tau, params.with_epsilon(eps_k), regime, cfg)
        except NonConvergenceError as err:
            err.step = k
            raise
        if regime.kind == "neumann":
            u = zero_pmean_shift(dom, u, params.p)  # stay on the constraint set
        traj.states.append(u)
        traj.eps_used.append(eps_k)
        traj.diagnostics.append(diag.build_row(dom, traj, k))
        row = traj.diagnostics[k]
        row.lambda_decay = diag.lambda_decay_estimate(traj, k)
        row.energy_residual = diag.energy_identity_residual(traj, k)
    return traj


def auto_tau(dom: Domain, g, params: EnergyParams, regime: BoundaryRegime,
             cfg: SolverConfig, bootstrap_tau: float = 0.1,
             bootstrap_steps: int = 10) -> float:
    """Pick tau = 1/(2 lambda-hat) from a short bootstrap run.

    The decay estimator is scale-free, so the bootstrap step size needs no
    reference to the size of g.
    """
    traj = evolve(dom, g, bootstrap_tau, bootstrap_steps, params, regime, cfg)
    lam = traj.diagnostics[-1].lambda_decay
    if not math.isfinite(lam) or lam <= 0.0:
        return bootstrap_tau
    return 1.0 / (2.0 * lam)


def evolve_until_settled(dom: Domain, g, params: EnergyParams,
                         regime: BoundaryRegime, cfg: SolverConfig,
                         tau: float | None = None, rel_tol: float = 1e-7,
                         window: int = 10, max_steps: int = 400,
                         adaptive_epsilon: bool = True) -> FlowTrajectory:
    """Evolve until the decay-rate estimate is stationary.

    Stops once lambda-hat changes by less than rel_tol (relatively) over
    `window` consecutive steps, or at the step budget.
    """
    if tau is None:
        tau = auto_tau(dom, g, params, regime, cfg)
    g = dom.check_field(g)
    projected = None
    if regime.kind == "neumann":
        g = zero_pmean_shift(dom, g, params.p)
        projected = g
    traj = FlowTrajectory(dom=dom, tau=tau, params=params, regime=regime,
                          states=[g], eps_used=[], projected_initial=projected)
    traj.eps_used.append(_step_epsilon(params, g, adaptive_epsilon))
    traj.diagnostics.append(diag.build_row(dom, traj, 0))

    u = g
    settled = 0
    prev_lam = math.nan
    for k in range(1, max_steps + 1):
        eps_k = _step_epsilon(params, u, adaptive_epsilon)
        try:
            u = implicit_step(dom, u, tau, params.with_epsilon(eps_k), regime, cfg)
        except NonConvergenceError as err:
            err.step = k
            raise
        if regime.kind == "neumann":
            u = zero_pmean_shift(dom, u, params.p)  # stay on the constraint set
        traj.states.append(u)
        traj.eps_used.append(eps_k)
        traj.diagnostics.append(diag.build_row(dom, traj, k))
        row = traj.diagnostics[k]
        row.lambda_decay = diag.lambda_decay_estimate(traj, k)
        row.energy_residual = diag.energy_identity_residual(traj, k)

        lam = row.lambda_decay
        if math.isfinite(lam) and math.isfinite(prev_lam) and lam > 0:
            if abs(lam - prev_lam) < rel_tol * abs(lam):
                settled += 1
            else:
                settled = 0
        prev_lam = lam
        if settled >= window:
            break
        if row.Np <= (DEGENERATE_FLOOR ** params.p) * traj.diagnostics[0].Np:
            break  # degenerate limit; nothing left to estimate
    return traj


def interpolant_v(traj: FlowTrajectory, t: float) -> np.ndarray:
    """Piecewise-constant interpolant: g at t=0, u^k on ((k-1)tau, k tau]."""
    k = _step_of(traj, t, right_closed=True)
    return traj.states[k]


def interpolant_w(traj: FlowTrajectory, t: float) -> np.ndarray:
    """Piecewise-linear interpolant of jp(u^k) between the step images."""
    tau, p = traj.tau, traj.params.p
    if not 0.0 <= t <= traj.steps * tau + 1e-12 * tau:
        raise ValueError(f"t = {t} outside [0, {traj.steps * tau}]")
    k = min(int(t / tau), traj.steps - 1)
    theta = (t - k * tau) / tau
    w0 = jp(traj.states[k], p)
    w1 = jp(traj.states[k + 1], p)
    return w0 + theta * (w1 - w0)


def _step_of(traj, t, right_closed):
    tau = traj.tau
    top = traj.steps * tau
    if not 0.0 <= t <= top + 1e-12 * tau:
        raise ValueError(f"t = {t} outside [0, {top}]")
    if t == 0.0:
        return 0
    k = int(math.ceil(t / tau - 1e-12))
    return min(max(k, 1), traj.steps)


def rescaled_profile(traj: FlowTrajectory, k: int):
    """u^k normalized to unit L^p norm, sign preserved.

    Returns None (the degenerate-limit signal, not an error) once the state
    has decayed below the floating-point floor relative to the initial data.
    """
    u = traj.states[k]
    norm_k = lp_norm(traj.dom, u, traj.params.p)
    norm_0 = lp_norm(traj.dom, traj.states[0], traj.params.p)
    if norm_k <= DEGENERATE_FLOOR * norm_0 or norm_k == 0.0:
        return None
    return u / norm_k


def write_snapshot(path, dom: Domain, traj_or_params, regime: BoundaryRegime,
                   u, k: int, tau: float) -> None:
    """Plain-text state dump: one header line, then node values row-major."""
    if isinstance(traj_or_params, EnergyParams):
        p = traj_or_params.p
    else:
        p = traj_or_params.params.p
    if dom.kind == "interval":
        dims = f"n={dom.shape[0]} h={dom.hx!r}"
    elif dom.kind == "rectangle":
        dims = f"nx={dom.shape[1]} ny={dom.shape[0]} hx={dom.hx!r} hy={dom.hy!r}"
    else:
        dims = f"rows={dom.shape[0]} cols={dom.shape[1]} h={dom.hx!r}"
    reg = regime.kind
    if regime.kind == "robin":
        reg += f":beta={regime.beta!r}"
    elif regime.kind == "fractional":
        reg += f":s={regime.s!r}"
    header = f"kind={dom.kind} {dims} p={p!r} regime={reg} k={k} tau={tau!r}"
    u = dom.check_field(u)
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for v in u:
            fh.write(repr(float(v)) + "\n")


def read_snapshot(path):
    """Parse a snapshot file back into (metadata dict, value array)."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    meta = {}
    for tok in lines[0].split():
        key, _, val = tok.partition("=")
        meta[key] = val
    values = np.array([float(ln) for ln in lines[1:] if ln.strip()])
    return meta, values
