#!/usr/bin/env python3
# If the initial data is an extremal of the Poincare inequality, the backward
# scheme reproduces the separated solution exactly: every step rescales the
# profile by (1 + lambda*tau)^(-1/(p-1)), nothing else changes.
#
# Usage: python demos/02_separation_of_variables.py

import numpy as np

from dnflow import (
    BoundaryRegime,
    EnergyParams,
    SolverConfig,
    build_interval,
    evolve,
    lambda_decay_estimate,
    minimize_rayleigh,
)

dom = build_interval(63)
cfg = SolverConfig(grad_tol=1e-10)
p = 3.0
params = EnergyParams(p, 1e-6)
regime = BoundaryRegime.dirichlet()

eig = minimize_rayleigh(dom, params, regime, cfg, seed=0)
tau = 0.02 / eig.lam
steps = 40
traj = evolve(dom, eig.extremal, tau, steps, params, regime, cfg)

factor = (1.0 + eig.lam * tau) ** (-1.0 / (p - 1.0))
print(f"p = {p}, lambda = {eig.lam:.8f}, tau = {tau:.6f}")
print(f"per-step contraction (1+lambda*tau)^(-1/(p-1)) = {factor:.12f}")
print()
print(" k   |u^k|_inf        deviation from c^k * phi   lambda estimate")
for k in (1, 5, 10, 20, 40):
    ref = factor**k * eig.extremal
    dev = np.linalg.norm(traj.states[k] - ref) / np.linalg.norm(ref)
    lam_k = lambda_decay_estimate(traj, k)
    amp = np.abs(traj.states[k]).max()
    print(f"{k:3d}  {amp:.6e}   {dev:.3e}                {lam_k:.10f}")
print()
print("the decay estimator is exact on separated trajectories: the printed")
print("lambda column matches the quotient minimum at every step")
