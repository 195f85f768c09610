"""Preference losses as mirror-descent steps.

Each square-loss objective below is a regression whose exact minimizer is
(close to) the entropic prox step  pi(y) exp(eta g(y)) / Z.  Here the
regressions are solved numerically over logits and compared with the
closed form.
"""

import numpy as np

from prefgame import RegularizedGame, appendix_e_game, prox
from prefgame.games import reg_gradient, unreg_gradient
from prefgame.regression import RegressionSpec, minimize, population_pair_weights

game = appendix_e_game()
pi = np.array([0.2, 0.5, 0.3])
eta = 0.3

g = unreg_gradient(pi, game)  # win rate of each response against pi
print("win rates against pi:", g)
target = prox(pi, eta * g)
print("prox step:           ", target)

W = population_pair_weights(pi, game)  # exact comparison frequencies
print("\npair table (row wins against column):\n", W.round(4))

fits = {
    "IPO": RegressionSpec("IPO", eta, pi, pair_weights=W),
    "SPPO": RegressionSpec("SPPO", eta, pi, targets=g),
    "DRO": RegressionSpec("DRO", eta, pi, targets=g),
    "REBEL": RegressionSpec("REBEL", eta, pi, targets=g),
}
for name, spec in fits.items():
    res = minimize(spec)
    print(f"{name:5s} minimizer {res.policy}  |diff| {np.abs(res.policy - target).max():.1e}  ({res.steps} Newton steps)")

# SPPO hard-codes the normaliser, so it is off by a term of order eta^2
for e in (0.1, 0.3, 1.0):
    res = minimize(RegressionSpec("SPPO", e, pi, targets=g))
    print(f"SPPO at eta={e}: |diff| = {np.abs(res.policy - prox(pi, e * g)).max():.2e}")

# INPO: two references, the fixed pi_ref and the current mu
ref = np.full(3, 1 / 3)
mu = pi
tau = 0.1
spec = RegressionSpec("INPO", eta, ref, tau=tau, anchor=mu, pair_weights=population_pair_weights(mu, game))
closed = prox(mu, eta * reg_gradient(mu, RegularizedGame(game, tau, ref)))
print("\nINPO minimizer", minimize(spec).policy, "\nclosed form   ", closed)

# DPO has no closed form: its logistic loss keeps pushing winners up
res = minimize(RegressionSpec("DPO", eta, pi, pair_weights=W))
print("\nDPO one step:", res.policy, "capped:", res.capped)
