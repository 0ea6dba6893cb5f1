"""
Damped oscillation of a qubit in a bosonic bath
===============================================

Closed-form sigma_z(t) against an independent master-equation run.
"""

import numpy as np

from qtmlab import spinboson as sb

bath = sb.OhmicClass(alpha=0.2, s=1.0, omega_c=2.0)
model = sb.SpinBosonModel(delta=1.0, epsilon=0.5, spectral=bath)
c = sb.coefficients(model)
print(f"nu = {c.nu:.6f}, gamma = {c.gamma:.6f}, sigma = {c.sigma:.6f}, phi = {c.phi:.6f}")

psi0 = sb.spin_state("up")
times = np.linspace(0, 30, 7)
closed = sb.expectation(model, c, psi0, times)
oracle = sb.master_equation_evolve(model, c, np.outer(psi0, psi0.conj()), times)
print("\n   t     <P(t)>      Tr[rho sz(t)]   |rho_+-|")
for t, p, q, od in zip(times, closed.real, oracle.sz_expect.real, oracle.offdiag_abs):
    print(f"{t:5.1f}  {p:+.8f}  {q:+.8f}   {od:.6f}")

# Temperature only rescales the damping by coth(beta nu Delta / 2).
print("\n beta   gamma     ratio to T=0")
for beta in (0.5, 1, 2, 5, 20):
    g = sb.coefficients(model.with_beta(beta)).gamma
    print(f"{beta:5.1f}  {g:.6f}  {g / c.gamma:.6f}")
