"""Preference models, game objectives, gradients and equilibrium solvers."""

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError, DomainError, SolverError
from .simplex import as_policy, kl_divergence, prox, uniform

SKEW_TOL = 1e-12
FILE_SKEW_TOL = 1e-9


@dataclass(frozen=True)
class PreferenceModel:
    """Pairwise win probabilities: ``matrix[i, j]`` is P(response i beats j)."""

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        P = np.array(self.matrix, dtype=np.float64)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] == 0:
            raise DimensionError(f"preference matrix must be square, got shape {P.shape}")
        if not np.all(np.isfinite(P)) or np.any(P < 0) or np.any(P > 1):
            raise DomainError("preference entries must lie in [0, 1]")
        err = np.abs(P + P.T - 1.0).max()
        if err > SKEW_TOL:
            raise DomainError(f"P[i,j] + P[j,i] deviates from 1 by {err:.3g}")
        P.flags.writeable = False
        object.__setattr__(self, "matrix", P)

    @property
    def n(self):
        return self.matrix.shape[0]

    def __eq__(self, other):
        return isinstance(other, PreferenceModel) and np.array_equal(self.matrix, other.matrix)

    def __hash__(self):
        return hash(self.matrix.tobytes())

    def __repr__(self):
        return f"PreferenceModel(n={self.n}, matrix={self.matrix.tolist()})"

    @classmethod
    def from_dict(cls, data, tol=FILE_SKEW_TOL):
        """Build from ``{"n": int, "p": [[...]]}``, checking skew-symmetry at ``tol``.

        Pairs that do not already sum to exactly one are symmetrized as
        (P + 1 - P^T) / 2, so a consistent file loads bit-for-bit.
        """
        if not isinstance(data, dict) or set(data) != {"n", "p"}:
            raise DomainError('game must be an object with exactly the keys "n" and "p"')
        n = data["n"]
        P = np.array(data["p"], dtype=np.float64)
        if not isinstance(n, int) or P.shape != (n, n):
            raise DimensionError(f"game declares n={n!r} but matrix has shape {P.shape}")
        err = np.abs(P + P.T - 1.0).max()
        if err > tol:
            raise DomainError(f"P[i,j] + P[j,i] deviates from 1 by {err:.3g} (tolerance {tol:g})")
        return cls(np.where(P + P.T == 1.0, P, (P + (1.0 - P.T)) / 2.0))

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        return {"n": self.n, "p": self.matrix.tolist()}

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def appendix_e_game():
    """The intransitive three-response game: b beats a, c beats b (0.9), a beats c (0.8)."""
    return PreferenceModel([[0.5, 0.1, 0.8], [0.9, 0.5, 0.1], [0.2, 0.9, 0.5]])


APPENDIX_E_NASH = np.array([4.0, 3.0, 4.0]) / 11.0
APPENDIX_E_INIT = np.array([0.2, 0.5, 0.3])


def random_model(n, rng, low=0.0, high=1.0):
    """Random valid preference model with upper-triangle entries ~ U(low, high)."""
    P = np.full((n, n), 0.5)
    iu = np.triu_indices(n, 1)
    P[iu] = rng.uniform(low, high, size=len(iu[0]))
    P[(iu[1], iu[0])] = 1.0 - P[iu]
    return PreferenceModel(P)


def bt_model(rewards):
    """Bradley-Terry preferences P[i, j] = sigmoid(r_i - r_j)."""
    r = np.asarray(rewards, dtype=np.float64)
    if r.ndim != 1:
        raise DimensionError("rewards must be a vector")
    if not np.all(np.isfinite(r)):
        raise DomainError("rewards must be finite")
    d = r[:, None] - r[None, :]
    upper = 1.0 / (1.0 + np.exp(-d))
    # build from one triangle so that P + P^T == 1 holds exactly
    P = np.triu(upper, 1)
    P = P + np.tril(1.0 - P.T, -1)
    np.fill_diagonal(P, 0.5)
    return PreferenceModel(P)


@dataclass(frozen=True)
class RegularizedGame:
    """The KL-regularized game anchored at ``reference`` with strength ``tau``."""

    model: PreferenceModel
    tau: float
    reference: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not self.tau > 0:
            raise DomainError(f"tau must be positive, got {self.tau!r}")
        ref = as_policy(self.reference)
        if ref.shape[0] != self.model.n:
            raise DimensionError(f"reference has length {ref.shape[0]}, model has {self.model.n} responses")
        object.__setattr__(self, "reference", ref)


@dataclass(frozen=True)
class NashResult:
    policy: np.ndarray
    gap: float
    method: str  # "SupportEnumeration" or "FixedPoint"
    iterations: int = 0


def _vec(p, n):
    v = np.asarray(p, dtype=np.float64)
    if v.shape != (n,):
        raise DimensionError(f"expected a vector of length {n}, got shape {v.shape}")
    return v


def win_rate(p1, p2, model):
    """Probability that a draw from ``p1`` beats a draw from ``p2``."""
    n = model.n
    return float(_vec(p1, n) @ model.matrix @ _vec(p2, n))


def game_value(p1, p2, model):
    return win_rate(p1, p2, model) - 0.5


def regularized_value(p1, p2, game):
    return (
        game_value(p1, p2, game.model)
        - game.tau * kl_divergence(p1, game.reference)
        + game.tau * kl_divergence(p2, game.reference)
    )


def unreg_gradient(opponent, model):
    """Win rate of every pure response against ``opponent``."""
    return model.matrix @ _vec(opponent, model.n)


def reg_gradient(current, game):
    """G(current) - tau * (log(current / reference) + 1) on the reference support."""
    mu = _vec(current, game.model.n)
    ref = game.reference
    on = ref > 0
    if np.any(mu[on] <= 0):
        raise DomainError("current policy must be positive on the reference support")
    if np.any(mu[~on] > 0):
        raise DomainError("current policy has mass outside the reference support")
    log_ratio = np.zeros_like(mu)
    log_ratio[on] = np.log(mu[on] / ref[on])
    return unreg_gradient(mu, game.model) - game.tau * (log_ratio + 1.0)


def duality_gap(p, model):
    """Best-response advantage max_y P(y beats p) - 1/2, clamped at zero."""
    g = float(np.max(unreg_gradient(p, model))) - 0.5
    if g < -1e-12:
        # only possible for an invalid model; a symmetric game has value 1/2
        raise DomainError(f"negative duality gap {g:.3g}")
    return max(g, 0.0)


def _support_candidate(model, S, tol):
    P = model.matrix
    k = len(S)
    A = np.vstack([P[np.ix_(S, S)], np.ones((1, k))])
    b = np.concatenate([np.full(k, 0.5), [1.0]])
    x, *_ = np.linalg.lstsq(A, b, rcond=None)
    if np.abs(A @ x - b).max() > tol or np.any(x < -tol):
        return None
    p = np.zeros(model.n)
    p[list(S)] = np.clip(x, 0.0, None)
    p /= p.sum()
    if duality_gap(p, model) > tol:
        return None
    return p


def admissible_supports(model, tol=1e-10):
    """All supports whose equalizing solution is a symmetric equilibrium."""
    found = []
    for size in range(1, model.n + 1):
        for S in itertools.combinations(range(model.n), size):
            p = _support_candidate(model, S, tol)
            if p is not None:
                found.append((S, p))
    return found


def solve_nash(model, tol=1e-10, max_n=12):
    """Symmetric equilibrium by support enumeration.

    Supports are tried by increasing size, lexicographically within a size;
    the first admissible candidate is returned. A game in which every entry
    is 1/2 returns the uniform policy.
    """
    if model.n > max_n:
        raise DimensionError(f"support enumeration is limited to n <= {max_n}, got {model.n}")
    if np.all(np.abs(model.matrix - 0.5) <= tol):
        u = uniform(model.n)
        return NashResult(u, duality_gap(u, model), "SupportEnumeration")
    for size in range(1, model.n + 1):
        for S in itertools.combinations(range(model.n), size):
            p = _support_candidate(model, S, tol)
            if p is not None:
                p = as_policy(p)
                return NashResult(p, duality_gap(p, model), "SupportEnumeration")
    raise SolverError("support enumeration found no admissible support")


def theorem2_step_size(tau):
    """Largest step size covered by the linear-rate guarantee: tau / (tau^2 + 1/2)."""
    return tau / (tau * tau + 0.5)


def solve_regularized_nash(game, tol=1e-12, max_iterations=10**7):
    """Equilibrium of the regularized game by its contracting mirror-descent map.

    Iterates mu <- prox(mu, eta * reg_gradient(mu)) from the reference with
    eta = tau / (tau^2 + 1/2) until the sup-norm change drops below
    tol * eta * tau. The returned ``gap`` is that final change.
    """
    eta = theorem2_step_size(game.tau)
    threshold = tol * eta * game.tau
    mu = game.reference
    for k in range(1, max_iterations + 1):
        nxt = prox(mu, eta * reg_gradient(mu, game))
        residual = float(np.abs(nxt - mu).max())
        mu = nxt
        if residual < threshold or residual == 0.0:
            return NashResult(mu, residual, "FixedPoint", k)
    raise SolverError(f"regularized solver did not reach residual {threshold:.3g} in {max_iterations} iterations")
