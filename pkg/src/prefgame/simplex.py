"""Arithmetic on the probability simplex.

Policies are plain read-only float64 arrays. Exact zeros mark responses
outside a policy's support and are preserved; positive entries below
``PROB_FLOOR`` are raised to the floor and the vector renormalized.
"""

import numpy as np

from .errors import DimensionError, DomainError

PROB_FLOOR = 1e-15
SUM_TOL = 1e-12

# |x| below this uses the series of (1+x)log(1+x) - x
_SERIES_CUTOFF = 1e-4


def _freeze(a):
    a.flags.writeable = False
    return a


def as_policy(probs, floor=PROB_FLOOR, atol=1e-9):
    """Validate ``probs`` as a distribution and return a read-only copy.

    Inputs must be finite, non-negative and sum to one within ``atol``.
    The result sums to one within ``SUM_TOL``.
    """
    p = np.array(probs, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise DimensionError(f"policy must be a non-empty vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise DomainError("policy has non-finite entries")
    if np.any(p < 0):
        raise DomainError(f"policy has negative entries at {np.flatnonzero(p < 0).tolist()}")
    total = p.sum()
    if abs(total - 1.0) > atol:
        raise DomainError(f"policy sums to {total!r}, expected 1")
    return _freeze(apply_floor(p / total, floor))


def apply_floor(p, floor=PROB_FLOOR):
    """Raise positive entries below ``floor`` to ``floor`` and renormalize."""
    p = np.asarray(p, dtype=np.float64)
    low = (p > 0) & (p < floor)
    if np.any(low):
        p = p.copy()
        p[low] = floor
        p = p / p.sum()
    return p


def uniform(n):
    return _freeze(np.full(n, 1.0 / n))


def pure(n, index):
    p = np.zeros(n)
    p[index] = 1.0
    return _freeze(p)


def support(p):
    return np.asarray(p) > 0


def _check_pair(p, q):
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise DimensionError(f"shape mismatch: {p.shape} vs {q.shape}")
    return p, q


def _entropy_gap(x):
    # (1+x) log(1+x) - x, accurate for tiny |x|; equals 1 at x = -1
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    small = np.abs(x) < _SERIES_CUTOFF
    xs = x[small]
    out[small] = xs * xs * (0.5 - xs * (1.0 / 6 - xs * (1.0 / 12 - xs / 20)))
    xl = x[~small]
    with np.errstate(divide="ignore", invalid="ignore"):
        out[~small] = np.where(xl == -1.0, 1.0, (1 + xl) * np.log1p(xl) - xl)
    return out


def kl_divergence(p, q):
    """KL(p || q) in nats.

    Evaluated termwise as q * ((1+x) log(1+x) - x) with x = p/q - 1, which is
    identical to sum p log(p/q) for normalized inputs but keeps full relative
    accuracy when p and q are nearly equal.
    """
    p, q = _check_pair(p, q)
    bad = (q == 0) & (p > 0)
    if np.any(bad):
        raise DomainError(f"support violation: q is zero where p is positive at index {int(np.flatnonzero(bad)[0])}")
    on = q > 0
    x = p[on] / q[on] - 1.0
    return float(max(np.dot(q[on], _entropy_gap(x)), 0.0))


def log_normalize(logits):
    """Softmax with max-subtraction. ``-inf`` logits map to exact zeros."""
    z = np.asarray(logits, dtype=np.float64)
    m = np.max(z)
    e = np.exp(z - m)
    return e / e.sum()


def prox(reference, g, floor=PROB_FLOOR):
    """Entropic prox step: the policy proportional to reference * exp(g).

    The step size is expected to be folded into ``g`` by the caller. The
    support of the result equals the support of ``reference``.
    """
    ref = np.asarray(reference, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if ref.shape != g.shape:
        raise DimensionError(f"shape mismatch: reference {ref.shape} vs gradient {g.shape}")
    if not np.all(np.isfinite(g)):
        raise DomainError("gradient has non-finite entries")
    on = ref > 0
    if np.all(g[on] == g[on][0]):
        # constant gradient: exact identity, without log/exp rounding
        return _freeze(apply_floor(ref / ref.sum(), floor).copy())
    with np.errstate(divide="ignore"):
        logits = np.where(on, np.log(ref) + g, -np.inf)
    out = log_normalize(logits)
    low = on & (out < floor)
    if np.any(low):
        # underflowed entries stay on the support at the floor
        out[low] = floor
        out /= out.sum()
    return _freeze(out)


def three_point_slack(z, g, z_prime, z_star):
    """RHS minus LHS of the three-point inequality for ``z_prime = prox(z, g)``.

    Returns KL(z*||z) - KL(z*||z') - KL(z'||z) - <g, z* - z'>, which is
    non-negative up to rounding.
    """
    g = np.asarray(g, dtype=np.float64)
    lhs = float(np.dot(g, np.asarray(z_star) - np.asarray(z_prime)))
    rhs = kl_divergence(z_star, z) - kl_divergence(z_star, z_prime) - kl_divergence(z_prime, z)
    return rhs - lhs
