"""Why a fixed reference is not enough.

INPO solves the KL-regularized game against a fixed reference and lands on
its equilibrium, which is pulled towards the reference. COMAL keeps
re-anchoring the reference at its own output, and the pull vanishes.
"""

import numpy as np

from prefgame import RegularizedGame, SolverConfig, appendix_e_game, run, solve_regularized_nash
from prefgame.games import APPENDIX_E_NASH, theorem2_step_size

game = appendix_e_game()
init = np.array([0.2, 0.5, 0.3])
nash = APPENDIX_E_NASH

print(" tau      regularized equilibrium            distance to Nash")
for tau in (1.0, 0.3, 0.1, 0.03):
    star = solve_regularized_nash(RegularizedGame(game, tau, init)).policy
    print(f"{tau:5.2f}   {np.array2string(star, precision=5)}   {np.abs(star - nash).max():.4f}")

inpo = run(game, SolverConfig("INPO", eta=0.3, tau=0.1, outer_iterations=5000, initial=tuple(init)))
print("\nINPO after 5000 steps:", inpo.final)

# the inner solver contracts at rate (1 - eta tau / 2) for eta = tau / (tau^2 + 1/2)
tau = 0.1
eta = theorem2_step_size(tau)
inner = run(game, SolverConfig("RegularizedSolver", eta=eta, tau=tau, inner_iterations=400, initial=tuple(init)))
kl = inner.metric("kl_to_nash")
print(f"\ninner solver, eta={eta:.4f}: KL to its target every 100 steps", kl[::100])
print("predicted contraction per 100 steps:", (1 - eta * tau / 2) ** 100)

comal = run(game, SolverConfig("COMAL", eta=0.3, tau=tau, outer_iterations=40, epsilon_schedule="Exact", initial=tuple(init)))
kl = comal.metric("kl_to_nash")
print("\nCOMAL outer KL to Nash (never increases):")
print(kl[:10].round(5))
print("largest increase:", np.diff(kl).max())
