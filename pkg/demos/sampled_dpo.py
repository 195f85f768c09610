"""Iterated DPO from sampled comparisons.

Each round draws 10^5 pairs from the current policy, labels them with the
preference model, fits DPO with the current policy as reference and moves
to the fit. On an intransitive game it swings between near-pure policies.
"""

import numpy as np

from prefgame import OracleMode, SolverConfig, appendix_e_game, run

game = appendix_e_game()
cfg = SolverConfig(
    "IterDPO", eta=0.3, outer_iterations=100, oracle=OracleMode.sampled(100_000), seed=0, initial=(0.2, 0.5, 0.3)
)
traj = run(game, cfg)
pols = traj.policies()

for t in range(0, 101, 10):
    p = pols[t]
    print(f"t={t + 1:3d}  {np.array2string(p, precision=4, suppress_small=True)}  gap {traj.steps[t].duality_gap:.3f}")

top = pols.max(axis=1)
print("\nrounds with a response above 95%:", int((top > 0.95).sum()), "of", len(top))
print("which response dominates in those rounds:", np.bincount(pols[top > 0.95].argmax(axis=1), minlength=3))

ipo = run(game, SolverConfig("IterIPO", eta=0.3, outer_iterations=100, oracle=OracleMode.sampled(100_000), initial=(0.2, 0.5, 0.3)))
print("\nIterated IPO, same budget, final:", ipo.final, "gap", round(ipo.steps[-1].duality_gap, 3))
