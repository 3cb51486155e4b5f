"""Every monotone quantity and estimator tracked along a trajectory.

Dual norms are evaluated through inverse elliptic solves:
||f||_*^q = <f, u> with -Delta_p u = f, which also equals p E(u) at the
minimizer.  The decay-rate estimator is exact on separated solutions, so it
has zero bias at the flow's fixed point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import Domain, integrate_power
from .elliptic import SolverConfig, inverse_operator
from .errors import DegenerateInputError
from .operators import BoundaryRegime, EnergyParams, jp

__all__ = [
    "DiagnosticsRow",
    "CSV_HEADER",
    "dual_norm_q",
    "dual_quotient",
    "lambda_decay_estimate",
    "mu_lambda_consistency",
    "energy_identity_residual",
    "fill_dual_columns",
    "rows_to_csv",
]

CSV_HEADER = ("k,t,Np,rayleigh,dual_q,lambda_decay,lambda_rayleigh,"
              "mu_from_dual,conservation,energy_residual")


@dataclass
class DiagnosticsRow:
    """One step's scalars: norms, quotients, estimators, defects."""

    k: int
    t: float
    Np: float
    rayleigh: float
    dual_q: float
    lambda_decay: float
    lambda_rayleigh: float
    mu_from_dual: float
    conservation: float
    energy_residual: float

    def csv_line(self) -> str:
        vals = [self.k, self.t, self.Np, self.rayleigh, self.dual_q,
                self.lambda_decay, self.lambda_rayleigh, self.mu_from_dual,
                self.conservation, self.energy_residual]
        return ",".join(repr(v) for v in vals)


def dual_norm_q(dom: Domain, f, params: EnergyParams, regime: BoundaryRegime,
                cfg: SolverConfig, warm_start=None):
    """q-th power of the dual norm: <f, (-Delta_p)^{-1} f> = p E(u).

    Returns the scalar; pass ``return_solution=True`` via
    :func:`dual_norm_q_with_solution` when the inverse is needed too.
    """
    val, _ = dual_norm_q_with_solution(dom, f, params, regime, cfg, warm_start)
    return val


def dual_norm_q_with_solution(dom, f, params, regime, cfg, warm_start=None):
    f = dom.check_field(f)
    u = inverse_operator(dom, f, params, regime, cfg, warm_start=warm_start)
    val = dom.cell_volume * float(f @ u)
    return val, u


def dual_quotient(dom: Domain, u, params: EnergyParams, regime: BoundaryRegime,
                  cfg: SolverConfig, warm_start=None) -> float:
    """int |u|^p divided by the dual q-norm of jp(u); equals mu at extremals."""
    u = dom.check_field(u)
    num = integrate_power(dom, u, params.p)
    if num == 0.0:
        raise DegenerateInputError("dual quotient of the zero field")
    f = jp(u, params.p)
    if regime.kind == "neumann":
        f = f - float(np.mean(f))  # project off solver drift; C-perp data
    denom = dual_norm_q(dom, f, params, regime, cfg, warm_start)
    return num / denom


def lambda_decay_estimate(traj, k: int) -> float:
    """Decay-rate estimator ((Np(k-1)/Np(k))^((p-1)/p) - 1) / tau.

    Exact on separated trajectories; returns nan once the state has decayed
    to the degenerate floor.
    """
    if k < 1:
        raise ValueError("estimator needs k >= 1")
    n_prev = traj.diagnostics[k - 1].Np
    n_cur = traj.diagnostics[k].Np
    if n_prev <= 0.0 or n_cur <= 0.0:
        return math.nan
    p = traj.params.p
    return ((n_prev / n_cur) ** ((p - 1.0) / p) - 1.0) / traj.tau


def mu_lambda_consistency(lam: float, mu: float, p: float) -> float:
    """Relative gap |mu - lam^(1/(p-1))| / lam^(1/(p-1))."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    ref = lam ** (1.0 / (p - 1.0))
    return abs(mu - ref) / ref


def energy_identity_residual(traj, k: int) -> float:
    """Defect of the discrete energy identity at step k.

    r_k = (1/p)(Np(k) - Np(k-1)) + (tau p/(p-1)) E(u^k); the scheme keeps
    r_k <= 0 up to solver slack.
    """
    if k < 1:
        raise ValueError("residual needs k >= 1")
    p = traj.params.p
    n_prev = traj.diagnostics[k - 1].Np
    n_cur = traj.diagnostics[k].Np
    e_k = traj.regime_energy(k)
    return (n_cur - n_prev) / p + (traj.tau / (p - 1.0)) * p * e_k


def fill_dual_columns(dom: Domain, traj, cfg: SolverConfig, stride: int = 1) -> None:
    """Compute dual_q / mu_from_dual for every stride-th row, warm-starting
    each inverse solve from the previous step's solution."""
    warm = None
    for k in range(0, len(traj.diagnostics), stride):
        row = traj.diagnostics[k]
        u = traj.states[k]
        if row.Np <= 0.0:
            continue
        params_k = traj.params.with_epsilon(traj.eps_used[k])
        f = jp(u, traj.params.p)
        if traj.regime.kind == "neumann":
            f = f - float(np.mean(f))
        val, sol = dual_norm_q_with_solution(dom, f, params_k, traj.regime,
                                             cfg, warm_start=warm)
        warm = sol
        row.dual_q = row.Np / val
        row.mu_from_dual = row.dual_q


def rows_to_csv(rows) -> str:
    return "\n".join([CSV_HEADER] + [r.csv_line() for r in rows]) + "\n"


def build_row(dom: Domain, traj, k: int) -> DiagnosticsRow:
    """Cheap (no inverse solve) diagnostics for step k of a trajectory."""
    u = traj.states[k]
    p = traj.params.p
    vol = dom.cell_volume
    n_p = integrate_power(dom, u, p)
    if n_p > 0.0:
        ray = p * traj.regime_energy(k) / n_p
    else:
        ray = math.nan
    cons = vol * float(np.sum(jp(u, p)))
    row = DiagnosticsRow(
        k=k, t=k * traj.tau, Np=n_p, rayleigh=ray, dual_q=math.nan,
        lambda_decay=math.nan, lambda_rayleigh=ray, mu_from_dual=math.nan,
        conservation=cons, energy_residual=math.nan)
    return row
