"""
Tuning a qubit into a spectral gap
==================================

If the bath has no modes at the transition frequency nu * Delta, the
damping vanishes and the oscillation keeps its amplitude.
"""

import math

import numpy as np

from qtmlab import spinboson as sb

bath = sb.NotchedOhmic(alpha=1.0, s=1.0, omega_c=1.0, omega0=2.0, width=0.5)
res = sb.tune_parameters(bath, delta=1.0, epsilon_box=(0, 5))
print(f"tuned epsilon = {res.epsilon:.12f}  (sqrt 3 = {math.sqrt(3):.12f}), gamma = {res.gamma:.1e}")

psi0 = sb.spin_state("up")
rho0 = np.outer(psi0, psi0.conj())
for eps in (res.epsilon, 1.2):
    m = sb.SpinBosonModel(1.0, eps, bath)
    tr = sb.master_equation_evolve(m, sb.coefficients(m), rho0, np.linspace(0, 100, 2001))
    upper, lower = sb.oscillation_envelope(m, tr)
    width = upper - lower
    print(f"eps = {eps:.4f}: envelope width at t=0 {width[0]:.6f}, at t=100 {width[-1]:.6f}")

# A notch below Delta cannot be reached with Delta fixed (nu >= 1) ...
low = sb.NotchedOhmic(omega0=0.5)
print("\nnotch at 0.5, Delta = 1:", sb.tune_parameters(low, 1.0, (-5, 5)).to_dict())
# ... but it can if Delta may move.
print("notch at 0.5, Delta in [0.2, 1]:", sb.tune_parameters(low, (0.2, 1.0), (-5, 5)).to_dict())

# Three independent qubits: coherence between |000> and |101> decays at 2 gamma.
m = sb.SpinBosonModel(1.0, 1.2, bath)
f = sb.coherence_factor(sb.coefficients(m), np.linspace(0, 5, 6))
print("\n|rho_ab| envelope for a=000, b=101:", np.round(sb.register_coherence_envelope([f] * 3, "000", "101"), 6))
