"""Iterative dynamics on preference games, each producing a :class:`Trajectory`.

Iteration counts follow two conventions. The baseline dynamics (MWU,
IterIPO, IterDPO, SPPO, INPO, MirrorProx, OMWU) perform ``outer_iterations``
updates, so their trajectories hold ``T + 1`` policies. COMAL performs
``T - 1`` outer updates and the regularized solver ``K - 1`` inner updates,
returning ``pi^T`` and ``mu^K`` respectively.
"""

import hashlib
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DomainError, SolverError
from .games import (
    RegularizedGame,
    duality_gap,
    reg_gradient,
    solve_nash,
    solve_regularized_nash,
    unreg_gradient,
)
from .oracles import OracleMode, RngState, estimate_win_gradient, sample_pairs
from .regression import RegressionSpec, minimize, population_pair_weights
from .simplex import as_policy, kl_divergence, prox

ALGORITHMS = ("MWU", "IterDPO", "IterIPO", "SPPO", "INPO", "COMAL", "MirrorProx", "OMWU", "RegularizedSolver")
SCHEDULES = ("FixedK", "Theoretical", "Exact")
NEEDS_TAU = ("INPO", "COMAL", "RegularizedSolver")

# consecutive non-improving inner steps treated as the float64 floor
_STALL_STEPS = 50
_MAX_INNER = 10**7


@dataclass(frozen=True)
class SolverConfig:
    algorithm: str
    eta: float
    tau: float = 0.0
    outer_iterations: int = 1
    inner_iterations: object = 1  # int, or one K_t per outer update for COMAL
    epsilon_schedule: str = "FixedK"
    oracle: OracleMode = OracleMode()
    seed: int = 0
    stream: int = 0
    initial: tuple = ()
    inner_tol: float = 1e-10
    log_inner: bool = False

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if not (self.eta > 0 and math.isfinite(self.eta)):
            raise ConfigError(f"eta must be positive, got {self.eta!r}")
        if not self.tau >= 0:
            raise ConfigError(f"tau must be non-negative, got {self.tau!r}")
        if self.algorithm in NEEDS_TAU and self.tau == 0:
            raise ConfigError(f"{self.algorithm} requires tau > 0")
        if self.outer_iterations < 1:
            raise ConfigError("outer_iterations must be >= 1")
        if self.epsilon_schedule not in SCHEDULES:
            raise ConfigError(f"unknown epsilon_schedule {self.epsilon_schedule!r}")
        k = self.inner_iterations
        if isinstance(k, (list, tuple)):
            k = tuple(int(x) for x in k)
            if self.algorithm == "COMAL" and len(k) != self.outer_iterations - 1:
                raise ConfigError("a K_t schedule needs one entry per outer update (T - 1 entries)")
            object.__setattr__(self, "inner_iterations", k)
            ks = k
        else:
            ks = (int(k),)
            object.__setattr__(self, "inner_iterations", int(k))
        if any(x < 1 for x in ks):
            raise ConfigError("inner iterations must be >= 1")
        if self.epsilon_schedule == "Theoretical" and not self.oracle.exact:
            raise ConfigError("the Theoretical schedule needs the exact oracle")
        object.__setattr__(self, "initial", tuple(float(x) for x in self.initial))
        if not self.initial:
            raise ConfigError("initial policy is required")
        as_policy(self.initial)

    def inner_steps(self, t):
        k = self.inner_iterations
        return k[t - 1] if isinstance(k, tuple) else k

    def to_dict(self):
        k = self.inner_iterations
        return {
            "algorithm": self.algorithm,
            "eta": self.eta,
            "tau": self.tau,
            "outer_iterations": self.outer_iterations,
            "inner_iterations": list(k) if isinstance(k, tuple) else k,
            "epsilon_schedule": self.epsilon_schedule,
            "oracle": self.oracle.to_dict(),
            "seed": self.seed,
            "stream": self.stream,
            "initial": list(self.initial),
            "inner_tol": self.inner_tol,
            "log_inner": self.log_inner,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "oracle" in d:
            d["oracle"] = OracleMode.from_dict(d["oracle"])
        return cls(**d)

    def canonical_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @property
    def run_id(self):
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]


@dataclass(frozen=True)
class ToleranceSchedule:
    """Constants bounding the inner-solve accuracy that keeps COMAL convergent."""

    p_sft: float
    D: float
    p_min: float
    c1: float
    c2: float
    log_c2: float

    def epsilon(self, t):
        return self.c1**2 / (9.0 * t**4)


def build_tolerance_schedule(initial, nash):
    initial = np.asarray(initial, dtype=np.float64)
    nash = np.asarray(nash, dtype=np.float64)
    on = initial > 0
    if not np.any(on & (nash > 0)):
        raise DomainError("initial and equilibrium supports do not overlap")
    if np.any(nash[on] <= 0):
        raise DomainError("equilibrium must have full support over the initial support")
    p_sft = float(initial[on].min())
    D = initial.size * math.log(1.0 / p_sft)
    p_min = float(nash[on].min())
    log_c1 = math.log(p_min) - (D + 2.0) / p_min
    c1 = math.exp(log_c1)
    log_c2 = log_c1 - 1.0 / c1 if c1 > 0 else -math.inf
    return ToleranceSchedule(p_sft, D, p_min, c1, math.exp(log_c2) if log_c2 > -745 else 0.0, log_c2)


@dataclass(frozen=True)
class Step:
    outer_iter: int
    inner_iter: int
    policy: np.ndarray
    kl_to_nash: float
    duality_gap: float
    kl_to_reference: float


@dataclass
class Trajectory:
    config: SolverConfig
    steps: list
    nash_reference: np.ndarray
    info: dict = field(default_factory=dict)

    def outer_steps(self):
        return [s for s in self.steps if s.inner_iter == 0]

    def policies(self, outer_only=True):
        steps = self.outer_steps() if outer_only else self.steps
        return np.array([s.policy for s in steps])

    def metric(self, name, outer_only=True):
        steps = self.outer_steps() if outer_only else self.steps
        return np.array([getattr(s, name) for s in steps])

    @property
    def final(self):
        return self.outer_steps()[-1].policy


class _Recorder:
    def __init__(self, model, nash):
        self.model = model
        self.nash = nash
        self.steps = []

    def log(self, outer, inner, policy, reference):
        self.steps.append(
            Step(outer, inner, policy, _safe_kl(self.nash, policy), duality_gap(policy, self.model), _safe_kl(policy, reference))
        )


def _safe_kl(p, q):
    try:
        return kl_divergence(p, q)
    except DomainError:
        return math.inf


class _Oracle:
    """Win-rate gradients and comparison tables, exact or sampled."""

    def __init__(self, model, config):
        self.model = model
        self.mode = config.oracle
        self.rng = None if self.mode.exact else RngState(config.seed, config.stream)

    def samples(self, mu):
        return sample_pairs(mu, self.model, self.rng, self.mode.pairs_per_iteration)

    def win_gradient(self, mu):
        if self.mode.exact:
            return unreg_gradient(mu, self.model)
        return estimate_win_gradient(mu, self.samples(mu))

    def pair_weights(self, mu):
        if self.mode.exact:
            return population_pair_weights(mu, self.model)
        return self.samples(mu).pair_weights(self.model.n)


def mwu_step(current, g, eta):
    """One multiplicative-weights step: prox(current, eta * g)."""
    return prox(current, eta * np.asarray(g, dtype=np.float64))


def _check(config, *algorithms):
    if config.algorithm not in algorithms:
        raise ConfigError(f"config is for {config.algorithm}, expected {'/'.join(algorithms)}")


def _setup(model, config, nash):
    init = as_policy(config.initial)
    if init.size != model.n:
        raise ConfigError(f"initial policy has {init.size} entries, model has {model.n}")
    if nash is None:
        nash = solve_nash(model).policy
    return init, _Recorder(model, nash), _Oracle(model, config)


def _trajectory(config, rec, **info):
    return Trajectory(config, rec.steps, rec.nash, info)


def run_mwu(model, config, nash=None):
    """Multiplicative weights on the win rate against the current policy."""
    _check(config, "MWU", "IterIPO")
    init, rec, oracle = _setup(model, config, nash)
    pi = init
    rec.log(1, 0, pi, init)
    for t in range(1, config.outer_iterations + 1):
        pi = mwu_step(pi, oracle.win_gradient(pi), config.eta)
        rec.log(t + 1, 0, pi, init)
    return _trajectory(config, rec)


def _regression_dynamics(model, config, nash, make_spec):
    init, rec, oracle = _setup(model, config, nash)
    pi = init
    rec.log(1, 0, pi, init)
    capped = 0
    for t in range(1, config.outer_iterations + 1):
        spec = make_spec(pi, oracle)
        try:
            res = minimize(spec)
        except SolverError as exc:
            raise SolverError(f"{config.algorithm} iteration {t}: {exc}") from exc
        capped += res.capped
        pi = res.policy
        rec.log(t + 1, 0, pi, init)
    return _trajectory(config, rec, capped_iterations=capped)


def run_iter_ipo(model, config, nash=None):
    """Iterated IPO. With the exact oracle this is MWU by the loss's closed form."""
    _check(config, "IterIPO")
    if config.oracle.exact:
        return run_mwu(model, config, nash)
    return _regression_dynamics(
        model, config, nash, lambda pi, o: RegressionSpec("IPO", config.eta, pi, pair_weights=o.pair_weights(pi))
    )


def run_iter_dpo(model, config, nash=None):
    """Iterated DPO against the current policy; exact mode uses population pair weights."""
    _check(config, "IterDPO")
    return _regression_dynamics(
        model, config, nash, lambda pi, o: RegressionSpec("DPO", config.eta, pi, pair_weights=o.pair_weights(pi))
    )


def run_sppo(model, config, nash=None):
    """Iterated SPPO square-loss regression onto exact or estimated win rates."""
    _check(config, "SPPO")
    return _regression_dynamics(
        model, config, nash, lambda pi, o: RegressionSpec("SPPO", config.eta, pi, targets=o.win_gradient(pi))
    )


def run_inpo(model, config, nash=None):
    """INPO with the fixed reference ``config.initial``; converges to the regularized equilibrium."""
    _check(config, "INPO")
    init, rec, oracle = _setup(model, config, nash)
    game = RegularizedGame(model, config.tau, init)
    mu = init
    rec.log(1, 0, mu, init)
    for t in range(1, config.outer_iterations + 1):
        mu = _regularized_step(game, mu, config.eta, oracle)
        rec.log(t + 1, 0, mu, init)
    return _trajectory(config, rec)


def _regularized_step(game, mu, eta, oracle):
    if oracle.mode.exact:
        return prox(mu, eta * reg_gradient(mu, game))
    spec = RegressionSpec(
        "INPO", eta, game.reference, tau=game.tau, anchor=mu, pair_weights=oracle.pair_weights(mu)
    )
    return minimize(spec).policy


def run_regularized_solver(game, config, nash=None):
    """Mirror descent on the regularized game from its reference for K - 1 steps.

    ``nash`` defaults to the regularized equilibrium, so ``kl_to_nash`` logs
    KL(pi*_tau || mu^k).
    """
    init = game.reference
    if nash is None:
        nash = solve_regularized_nash(game, tol=1e-12).policy
    rec = _Recorder(game.model, nash)
    oracle = _Oracle(game.model, config)
    mu = init
    rec.log(1, 0, mu, init)
    for k in range(1, config.inner_steps(1)):
        mu = _regularized_step(game, mu, config.eta, oracle)
        rec.log(k + 1, 0, mu, init)
    return _trajectory(config, rec)


def _inner_until(game, eta, stop):
    """Exact-oracle inner loop until ``stop(mu_next, mu)`` or the float64 floor."""
    mu = game.reference
    best = math.inf
    stale = 0
    for k in range(1, _MAX_INNER + 1):
        nxt = prox(mu, eta * reg_gradient(mu, game))
        if np.array_equal(nxt, mu):
            return nxt, k, "fixed_point"
        done, measure = stop(nxt, mu)
        mu = nxt
        if done:
            return mu, k, "tolerance"
        if measure < best:
            best, stale = measure, 0
        else:
            stale += 1
            if stale >= _STALL_STEPS:
                return mu, k, "float_floor"
    raise SolverError(f"inner solve did not stop within {_MAX_INNER} steps")


def run_comal(model, config, nash=None):
    """Re-anchored regularized game solving: pi^{t+1} = regularized equilibrium at reference pi^t.

    Inner solves run per ``epsilon_schedule``: ``FixedK`` takes exactly K_t
    mirror-descent steps (INPO regressions with a sampled oracle);
    ``Exact`` iterates until the sup-norm step is below ``inner_tol``;
    ``Theoretical`` iterates until KL(mu^{k+1}||mu^k) / (eta tau / 2)^2 is
    below the schedule's eps_t, or until float64 stops resolving progress.
    """
    _check(config, "COMAL")
    init, rec, oracle = _setup(model, config, nash)
    schedule = None
    if config.epsilon_schedule == "Theoretical":
        schedule = build_tolerance_schedule(init, rec.nash)
    eta, tau = config.eta, config.tau
    scale = (eta * tau / 2.0) ** 2
    pi = init
    rec.log(1, 0, pi, init)
    inner_counts, inner_stops = [], []
    for t in range(1, config.outer_iterations):
        game = RegularizedGame(model, tau, pi)
        try:
            if config.epsilon_schedule == "FixedK":
                mu = pi
                K = config.inner_steps(t)
                for k in range(1, K):
                    mu = _regularized_step(game, mu, eta, oracle)
                    if config.log_inner:
                        rec.log(t, k + 1, mu, pi)
                inner_counts.append(K - 1)
                inner_stops.append("fixed_k")
            elif config.epsilon_schedule == "Exact":
                tol = config.inner_tol

                def stop(nxt, cur):
                    r = float(np.abs(nxt - cur).max())
                    return r <= tol, r

                mu, k, why = _inner_until(game, eta, stop)
                inner_counts.append(k)
                inner_stops.append(why)
            else:
                eps = schedule.epsilon(t)

                def stop(nxt, cur):
                    proxy = kl_divergence(nxt, cur) / scale
                    return proxy <= eps, proxy

                mu, k, why = _inner_until(game, eta, stop)
                inner_counts.append(k)
                inner_stops.append(why)
        except (SolverError, DomainError) as exc:
            raise SolverError(f"COMAL outer iteration {t}: {exc}") from exc
        rec.log(t + 1, 0, mu, pi)
        pi = mu
    info = {"inner_steps": inner_counts, "inner_stop": inner_stops}
    if schedule is not None:
        info["schedule"] = schedule
    return _trajectory(config, rec, **info)


def run_mirror_prox(model, config, nash=None):
    """Extra-gradient form: half step from pi^t, then a full step from pi^t with the half-step gradient."""
    _check(config, "MirrorProx")
    init, rec, oracle = _setup(model, config, nash)
    pi = init
    rec.log(1, 0, pi, init)
    for t in range(1, config.outer_iterations + 1):
        half = prox(pi, config.eta * oracle.win_gradient(pi))
        pi = prox(pi, config.eta * oracle.win_gradient(half))
        rec.log(t + 1, 0, pi, init)
    return _trajectory(config, rec)


def run_omwu(model, config, nash=None):
    """Optimistic MWU in single-prox form: prox(pi^t, 2 eta g(pi^t) - eta g(pi^{t-1})), pi^0 = pi^1."""
    _check(config, "OMWU")
    init, rec, oracle = _setup(model, config, nash)
    pi = init
    rec.log(1, 0, pi, init)
    prev = None
    for t in range(1, config.outer_iterations + 1):
        g = oracle.win_gradient(pi)
        if prev is None:
            prev = g
        pi = prox(pi, config.eta * (2.0 * g - prev))
        prev = g
        rec.log(t + 1, 0, pi, init)
    return _trajectory(config, rec)


_RUNNERS = {
    "MWU": run_mwu,
    "IterIPO": run_iter_ipo,
    "IterDPO": run_iter_dpo,
    "SPPO": run_sppo,
    "INPO": run_inpo,
    "COMAL": run_comal,
    "MirrorProx": run_mirror_prox,
    "OMWU": run_omwu,
}


def run(model, config, nash=None):
    """Dispatch ``config`` to its algorithm."""
    if config.algorithm == "RegularizedSolver":
        game = RegularizedGame(model, config.tau, as_policy(config.initial))
        return run_regularized_solver(game, config, nash)
    return _RUNNERS[config.algorithm](model, config, nash)


def with_overrides(config, **changes):
    return replace(config, **changes)
