"""Numerically stable scalar primitives for half-line truncated Gaussians.

These are the building blocks shared by the variational and the MCMC
engines: log of the standard normal CDF, the inverse Mills ratio, the
first/second moments of a unit-variance Gaussian truncated to a half
line, and an exact sampler for that distribution. Everything is pure;
the sampler mutates only the random generator it is handed.
"""

from __future__ import annotations

import enum

import numpy as np
from scipy import special

from .errors import DomainError

_LOG_2PI = np.log(2.0 * np.pi)


class TruncationSide(enum.Enum):
    """Which half line the latent variable lives on.

    ``POSITIVE`` is (0, inf) (binary outcome 1), ``NON_POSITIVE`` is
    (-inf, 0] (binary outcome 0). The sign indicator ``k`` is +1 / -1
    respectively.
    """

    POSITIVE = 1
    NON_POSITIVE = 0

    @property
    def k(self) -> int:
        return 1 if self is TruncationSide.POSITIVE else -1

    @staticmethod
    def from_outcome(y: int) -> "TruncationSide":
        return TruncationSide.POSITIVE if y == 1 else TruncationSide.NON_POSITIVE


def _require_finite(t, name: str = "argument"):
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise DomainError(f"{name} must be finite")
    return t


def log_std_normal_cdf(t):
    """log Phi(t), accurate deep into the left tail.

    Accepts scalars or arrays.
    """
    t = _require_finite(t, "t")
    return special.log_ndtr(t)


def inverse_mills(t):
    """Inverse Mills ratio phi(t)/Phi(t), computed in log space.

    The log-space quotient stays finite and accurate for arbitrarily
    negative t, where the naive ratio underflows to 0/0.
    """
    t = _require_finite(t, "t")
    log_phi = -0.5 * t * t - 0.5 * _LOG_2PI
    return np.exp(log_phi - special.log_ndtr(t))


def trunc_norm_mean(m, side: TruncationSide):
    """Mean of N(m, 1) truncated to the given half line.

    Equals m + k * lambda(k * m) with k the side's sign indicator.
    """
    m = _require_finite(m, "m")
    k = side.k
    return m + k * inverse_mills(k * m)


def trunc_norm_second_moment(m, z_bar):
    """Second moment of the truncated variable: 1 + m * z_bar.

    ``z_bar`` must be the truncated mean for the same location and side.
    """
    m = _require_finite(m, "m")
    z_bar = _require_finite(z_bar, "z_bar")
    return 1.0 + m * z_bar


def trunc_norm_residual_var(m, side: TruncationSide):
    """E[(z - m)^2] under the truncated law: 1 - k*m*lambda(k*m)."""
    m = _require_finite(m, "m")
    k = side.k
    return 1.0 - k * m * inverse_mills(k * m)


# Below this lower bound (in standard units) the inverse-CDF route loses
# precision, so sampling switches to an exponential rejection scheme.
_TAIL_SWITCH = 5.0


def _sample_std_lower_truncated(rng: np.random.Generator, a: np.ndarray) -> np.ndarray:
    """Draw standard normals conditioned on exceeding a (elementwise)."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    out = np.empty_like(a)

    easy = a <= _TAIL_SWITCH
    if np.any(easy):
        a_e = a[easy]
        sf = special.ndtr(-a_e)
        u = rng.random(a_e.shape)
        # Quantile written through the survival function so that deep
        # right tails (a near the switch point) keep full precision.
        out[easy] = -special.ndtri(sf * (1.0 - u))

    hard = ~easy
    if np.any(hard):
        a_h = a[hard]
        alpha = 0.5 * (a_h + np.sqrt(a_h * a_h + 4.0))
        draws = np.empty_like(a_h)
        pending = np.ones(a_h.shape, dtype=bool)
        while np.any(pending):
            idx = np.flatnonzero(pending)
            z = a_h[idx] + rng.exponential(1.0 / alpha[idx])
            accept = rng.random(idx.shape) <= np.exp(-0.5 * (z - alpha[idx]) ** 2)
            draws[idx[accept]] = z[accept]
            pending[idx[accept]] = False
        out[hard] = draws
    return out


def sample_trunc_norm(rng: np.random.Generator, m, side: TruncationSide):
    """Exact draw from N(m, 1) restricted to the side's half line.

    Scalar m gives a scalar draw; an array of locations gives one draw
    per entry (all on the same side). Robust for |m| well beyond 30.
    """
    m = _require_finite(m, "m")
    scalar = np.ndim(m) == 0
    k = side.k
    # z on side <=> k*z ~ N(k*m, 1) truncated to (0, inf).
    t = _sample_std_lower_truncated(rng, -k * np.atleast_1d(m))
    z = np.atleast_1d(m) + k * t
    return float(z[0]) if scalar else z


def sample_trunc_norm_sides(rng: np.random.Generator, m, y) -> np.ndarray:
    """Vectorized draw with per-entry sides given by binary outcomes y."""
    m = _require_finite(m, "m")
    k = np.where(np.asarray(y) == 1, 1.0, -1.0)
    t = _sample_std_lower_truncated(rng, -k * m)
    return m + k * t


def logit(p):
    """log(p / (1 - p)); requires p strictly inside (0, 1)."""
    p = np.asarray(p, dtype=float)
    if not np.all((p > 0.0) & (p < 1.0)):
        raise DomainError("logit requires p in the open interval (0, 1)")
    return special.logit(p)


def expit(x):
    """Standard logistic function, saturating gracefully at the tails."""
    x = _require_finite(x, "x")
    return special.expit(x)
