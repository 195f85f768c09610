"""Self-play on an intransitive three-response game.

b beats a 90% of the time, c beats b 90%, a beats c 80%. Nothing is
best, so plain multiplicative weights chases its own tail; re-anchored
regularized play settles on the mixed equilibrium [4/11, 3/11, 4/11].

    python3 demos/cycling_vs_comal.py [out.svg]
"""

import sys

import numpy as np

from prefgame import SolverConfig, appendix_e_game, run, solve_nash
from prefgame.plot import simplex_svg

game = appendix_e_game()
print(game.matrix)

nash = solve_nash(game).policy
print("equilibrium:", nash, " (4/11, 3/11, 4/11 =", np.array([4, 3, 4]) / 11, ")")

init = (0.2, 0.5, 0.3)
mwu = run(game, SolverConfig("MWU", eta=0.3, outer_iterations=5000, initial=init))
comal = run(game, SolverConfig("COMAL", eta=0.3, tau=0.1, outer_iterations=200, inner_iterations=25, initial=init))

# duality gap = how much the best pure response beats the policy by
print("\n  iter   MWU gap   COMAL gap")
for t in (1, 10, 50, 100, 200):
    print(f"{t:6d}  {mwu.steps[t - 1].duality_gap:8.5f}  {comal.steps[t - 1].duality_gap:10.2e}")
print(f"  5000  {mwu.steps[-1].duality_gap:8.5f}")

# MWU's late iterates hug the simplex edges
late = mwu.policies()[-500:]
print("\nMWU over its last 500 iterates: smallest entry", late.min(), " largest", late.max())
print("COMAL final:", comal.final)

svg = simplex_svg([("MWU", mwu.policies()[:1500]), ("COMAL", comal.policies())], nash=nash)
out = sys.argv[1] if len(sys.argv) > 1 else "cycling_vs_comal.svg"
with open(out, "w") as fh:
    fh.write(svg)
print("wrote", out)
