"""Tabular minimization of sampled preference losses over softmax logits.

Pairwise losses (DPO, IPO, INPO) consume a weight matrix ``W`` where
``W[i, j]`` is the probability mass of comparisons won by ``i`` against
``j``; it is either an empirical frequency table or the exact population
table from :func:`population_pair_weights`. Per-response losses (SPPO, DRO,
REBEL) consume win-rate targets ``g`` and response weights.

All losses are minimized with a projected damped Newton method on the
logits, one logit pinned to zero and the rest boxed to ``[-cap, cap]``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, log_expit, logsumexp

from .errors import ConfigError, DimensionError, SolverError
from .oracles import PreferenceBatch
from .simplex import PROB_FLOOR, apply_floor, log_normalize

LOSSES = ("DPO", "IPO", "INPO", "SPPO", "DRO", "REBEL")
PAIR_LOSSES = ("DPO", "IPO", "INPO")
TARGET_LOSSES = ("SPPO", "DRO", "REBEL")


@dataclass(frozen=True)
class OptimizerOptions:
    max_steps: int = 100_000
    step_size: float = 1.0
    gradient_tolerance: float = 1e-10
    logit_cap: float = 30.0


@dataclass(frozen=True)
class RegressionSpec:
    """One regression problem.

    ``reference`` is the policy in the log-ratio (pi for DPO/IPO/SPPO/DRO/REBEL,
    pi_ref for INPO). ``anchor`` is INPO's second reference mu.
    """

    loss: str
    eta: float
    reference: np.ndarray = field(repr=False)
    tau: float = 0.0
    anchor: np.ndarray = field(default=None, repr=False)
    pair_weights: np.ndarray = field(default=None, repr=False)
    targets: np.ndarray = field(default=None, repr=False)
    response_weights: np.ndarray = field(default=None, repr=False)
    optimizer: OptimizerOptions = OptimizerOptions()

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise ConfigError(f"unknown loss {self.loss!r}; expected one of {LOSSES}")
        if not self.eta > 0:
            raise ConfigError("eta must be positive")
        n = len(self.reference)
        if self.loss in PAIR_LOSSES:
            if self.pair_weights is None:
                raise ConfigError(f"{self.loss} needs pair_weights (samples or population weights)")
            W = np.asarray(self.pair_weights, dtype=np.float64)
            if W.shape != (n, n):
                raise DimensionError(f"pair_weights must be {n}x{n}, got {W.shape}")
            if W.sum() <= 0:
                raise ConfigError("pair_weights are empty")
        else:
            if self.targets is None:
                raise ConfigError(f"{self.loss} needs win-rate targets")
            if np.shape(self.targets) != (n,):
                raise DimensionError("targets must match the reference length")
        if self.loss == "INPO":
            if not self.tau > 0:
                raise ConfigError("INPO requires tau > 0")
            if self.anchor is None:
                raise ConfigError("INPO requires an anchor policy")

    @classmethod
    def from_samples(cls, loss, eta, reference, samples, **kw):
        n = len(reference)
        if not isinstance(samples, PreferenceBatch):
            samples = list(samples)
            if not samples:
                raise ConfigError("empty sample list")
            samples = PreferenceBatch(
                np.array([s.winner for s in samples]), np.array([s.loser for s in samples])
            )
        return cls(loss, eta, reference, pair_weights=samples.pair_weights(n), **kw)


@dataclass(frozen=True)
class RegressionResult:
    policy: np.ndarray
    logits: np.ndarray
    steps: int
    gradient_norm: float
    capped: bool
    loss_value: float
    log_partition: float = float("nan")  # DRO's fitted V (in units of eta); nan otherwise


def population_pair_weights(mu, model):
    """Exact comparison table for pairs drawn i.i.d. from ``mu`` and labelled by ``model``.

    W[i, j] = 2 mu_i mu_j P[i, j] for i != j and W[i, i] = mu_i^2.
    """
    mu = np.asarray(mu, dtype=np.float64)
    W = 2.0 * np.outer(mu, mu) * model.matrix
    np.fill_diagonal(W, mu * mu)
    return W


def _safe_log(p):
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(p, dtype=np.float64))


def _laplacian(C):
    S = C + C.T
    return np.diag(S.sum(axis=1)) - S


class _Objective:
    """Loss, gradient and Hessian in the logits restricted to the support."""

    def __init__(self, spec, on):
        self.spec = spec
        self.on = on
        eta = spec.eta
        ref = np.asarray(spec.reference, dtype=np.float64)[on]
        lref = np.log(ref)
        self.kind = spec.loss
        if spec.loss in PAIR_LOSSES:
            W = np.asarray(spec.pair_weights, dtype=np.float64)
            self.W = W[np.ix_(on, on)] / W.sum()
            if spec.loss == "INPO":
                lmu = np.log(np.asarray(spec.anchor, dtype=np.float64)[on])
                a = eta * spec.tau * lref + (1.0 - eta * spec.tau) * lmu
            else:
                a = lref
            self.a = a
            # residual theta_i - theta_j - (a_i - a_j) - eta/2 for IPO/INPO
            self.offset = a[:, None] - a[None, :] + (0.0 if spec.loss == "DPO" else eta / 2)
        else:
            g = np.asarray(spec.targets, dtype=np.float64)[on]
            w = spec.response_weights
            w = ref if w is None else np.asarray(w, dtype=np.float64)[on]
            self.w = w / w.sum()
            if spec.loss == "SPPO":
                self.t = lref + eta * g - eta / 2
            elif spec.loss == "DRO":
                self.t = lref + eta * g
            else:  # REBEL: pairs weighted by w w^T, residual scaled by 1/eta
                a = lref + eta * g
                self.offset = a[:, None] - a[None, :]
                self.W = np.outer(self.w, self.w) / eta**2

    def __call__(self, theta, order=2):
        k = self.kind
        if k in ("IPO", "INPO", "REBEL"):
            R = theta[:, None] - theta[None, :] - self.offset
            f = float(np.sum(self.W * R * R))
            if order == 0:
                return f, None, None
            C = self.W * R
            grad = 2.0 * (C.sum(axis=1) - C.sum(axis=0))
            return f, grad, 2.0 * _laplacian(self.W)
        if k == "DPO":
            eta = self.spec.eta
            d = (theta[:, None] - theta[None, :] - self.offset) / eta
            f = float(-np.sum(self.W * log_expit(d)))
            if order == 0:
                return f, None, None
            s = self.W * expit(-d) / eta
            grad = -(s.sum(axis=1) - s.sum(axis=0))
            c = self.W * expit(d) * expit(-d) / eta**2
            return f, grad, _laplacian(c)
        if k == "SPPO":
            lse = logsumexp(theta)
            p = np.exp(theta - lse)
            r = theta - lse - self.t
            f = float(np.dot(self.w, r * r))
            if order == 0:
                return f, None, None
            J = np.eye(len(theta)) - p[None, :]
            wr = self.w * r
            grad = 2.0 * J.T @ wr
            gn = 2.0 * J.T @ (self.w[:, None] * J)
            second = -2.0 * wr.sum() * (np.diag(p) - np.outer(p, p))
            H = gn + second
            if np.linalg.eigvalsh(H).min() <= 0:
                H = gn
            return f, grad, H
        # DRO: the optimal free scalar V makes the weighted mean residual zero
        s = theta - self.t
        r = s - np.dot(self.w, s)
        f = float(np.dot(self.w, r * r))
        if order == 0:
            return f, None, None
        J = np.eye(len(theta)) - self.w[None, :]
        grad = 2.0 * J.T @ (self.w * r)
        return f, grad, 2.0 * J.T @ (self.w[:, None] * J)

    def log_partition(self, theta):
        if self.kind != "DRO":
            return float("nan")
        # V such that log pi_theta/pi = eta g + eta V on average
        lp = theta - logsumexp(theta)
        return float(np.dot(self.w, lp - self.t)) / self.spec.eta


def _active(x, g, idx, cap):
    """Free coordinates not pressed against the logit box."""
    blocked = ((x[idx] <= -cap) & (g[idx] > 0)) | ((x[idx] >= cap) & (g[idx] < 0))
    return idx[~blocked]


def _active_norm(x, g, idx, cap):
    act = _active(x, g, idx, cap)
    return float(np.abs(g[act]).max()) if act.size else 0.0


def _newton(obj, x0, free_mask, opts):
    """Projected damped Newton over coordinates in ``free_mask``; others stay fixed."""
    cap = opts.logit_cap
    x = np.clip(x0, -cap, cap)
    x[~free_mask] = x0[~free_mask]
    idx = np.flatnonzero(free_mask)
    f, g, H = obj(x)
    for step in range(opts.max_steps + 1):
        act = _active(x, g, idx, cap)
        gnorm = float(np.abs(g[act]).max()) if act.size else 0.0
        if gnorm <= opts.gradient_tolerance:
            return x, step, gnorm, f, True
        if step == opts.max_steps:
            break
        Hf = H[np.ix_(act, act)]
        gf = g[act]
        evals, evecs = np.linalg.eigh(Hf)
        floor = 1e-12 * max(1.0, float(np.abs(evals).max()))
        direction = -evecs @ ((evecs.T @ gf) / np.maximum(evals, floor))
        moved = False
        trial = x.copy()
        trial[act] = np.clip(x[act] + direction, -cap, cap)
        ft, gt, Ht = obj(trial)
        if ft <= f + 1e-12 * abs(f) and _active_norm(trial, gt, idx, cap) < 0.5 * gnorm:
            # full Newton step near the optimum, where loss differences are rounding noise
            x, f, g, H = trial, ft, gt, Ht
            continue
        for search in (direction, -gf):
            alpha = opts.step_size
            for _ in range(80):
                trial = x.copy()
                trial[act] = np.clip(x[act] + alpha * search, -cap, cap)
                ft = obj(trial, order=0)[0]
                if ft <= f + 1e-4 * float(np.dot(gf, trial[act] - x[act])) and ft <= f:
                    moved = not np.array_equal(trial, x)
                    break
                alpha *= 0.5
            if moved:
                break
        if not moved:
            # line search failed: accept only if the Newton model predicts a
            # decrease below the rounding error of the loss itself
            predicted = -0.5 * float(np.dot(gf, direction))
            return x, step, gnorm, f, predicted <= 64 * np.finfo(float).eps * abs(f)
        x = trial
        f, g, H = obj(x)
    raise SolverError(f"regression did not converge: gradient norm {gnorm:.3g} after {opts.max_steps} steps")


def minimize(spec, init=None):
    """Minimize ``spec``'s loss over softmax logits starting from ``init``.

    ``init`` defaults to the log of the reference (the anchor for INPO).
    Adding a constant to ``init`` does not change the result.
    """
    ref = np.asarray(spec.reference, dtype=np.float64)
    on = ref > 0
    if spec.loss == "INPO":
        on = on & (np.asarray(spec.anchor) > 0)
    if init is None:
        init = _safe_log(spec.anchor if spec.loss == "INPO" else ref)
    init = np.asarray(init, dtype=np.float64)
    if init.shape != ref.shape:
        raise DimensionError("init logits must match the reference length")
    obj = _Objective(spec, on)
    theta0 = init[on].copy()
    pin = int(np.argmax(ref[on]))
    theta0 = theta0 - theta0[pin]
    free = np.ones(theta0.size, dtype=bool)
    free[pin] = False
    if theta0.size == 1:
        theta, steps, gnorm, f, ok = theta0, 0, 0.0, obj(theta0, order=0)[0], True
    else:
        theta, steps, gnorm, f, ok = _newton(obj, theta0, free, spec.optimizer)
    if not ok:
        raise SolverError(f"{spec.loss} regression stalled with gradient norm {gnorm:.3g}")
    capped = bool(np.any(np.abs(theta[free]) >= spec.optimizer.logit_cap))
    logits = np.full(ref.shape, -np.inf)
    logits[on] = theta
    policy = apply_floor(log_normalize(logits), PROB_FLOOR)
    policy.flags.writeable = False
    return RegressionResult(policy, logits, steps, gnorm, capped, f, obj.log_partition(theta))


def population_loss(spec, candidate):
    """Loss of ``spec`` evaluated at the policy ``candidate`` (DRO at its best V)."""
    ref = np.asarray(spec.reference, dtype=np.float64)
    on = ref > 0
    if spec.loss == "INPO":
        on = on & (np.asarray(spec.anchor) > 0)
    obj = _Objective(spec, on)
    theta = np.log(np.asarray(candidate, dtype=np.float64)[on])
    return obj(theta, order=0)[0]
