"""Closed-form predictions for the simulated regimes.

Adaptive-only markets, the strong-bias price map, and the dispersion and
stop-time laws for weak bias. Everything here is pure.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class QGammaFit:
    """Affine fit of the dispersion decay exponent against the revision fraction."""

    a: float = 0.61
    b: float = -0.13
    a_err: float = 0.02
    b_err: float = 0.01

    def __call__(self, gamma: float) -> float:
        return self.a * gamma + self.b

    def envelope(self, gamma: float) -> tuple[float, float]:
        """Range of the exponent over the fit's stated uncertainties."""
        lo = (self.a - self.a_err) * gamma + (self.b - self.b_err)
        hi = (self.a + self.a_err) * gamma + (self.b + self.b_err)
        return lo, hi


Q_FIT = QGammaFit()


# ------------------------------------------------------- adaptive expectations


def adaptive_beta0(p0: float, gamma: float) -> float:
    """Initial excess-demand fraction when revisers jump to the opening price."""
    if p0 <= 0.5:
        raise ValueError("adaptive_beta0 requires p0 > 1/2")
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma ∈ [0,1]")
    return (2.0 * p0 - 1.0) * (1.0 - gamma)


def adaptive_prediction(p0: float, cost: float, gamma: float) -> tuple[float, float]:
    """First-period price and the bound on the long-run drift from ``p0``."""
    beta0 = adaptive_beta0(p0, gamma)
    return p0 - beta0 * cost, cost * (1.0 - gamma)


def adaptive_convergence_time(n_agents: int, gamma: float) -> float:
    """Periods until every one of ``n_agents`` has revised at least once (worst case)."""
    if not 0.0 < gamma < 1.0:
        raise ValueError("adaptive_convergence_time requires gamma ∈ (0,1)")
    if n_agents < 1:
        raise ValueError("n_agents must be positive")
    return -math.log(n_agents) / math.log(1.0 - gamma)


# --------------------------------------------------------------- strong bias


def map_f(p: float) -> float:
    """One-period price map when nobody ever averages and everyone revises."""
    d = (2.0 * p - 1.0) ** 2 / 2.0
    return p - d if p >= 0.5 else p + d


def iterate_f(p0: float, steps: int) -> list[float]:
    out = [p0]
    for _ in range(steps):
        out.append(map_f(out[-1]))
    return out


# ----------------------------------------------------------------- weak bias


def map_g(x: float) -> float:
    """Rescaled price deviation map for full revision; odd in ``x``."""
    return SQRT2 * x - 2.0 * SQRT2 * abs(x) * x


def g_fixed_points() -> tuple[float, float, float]:
    r = (2.0 - SQRT2) / 4.0
    return (-r, 0.0, r)


def map_g_derivative(x: float) -> float:
    return SQRT2 - 4.0 * SQRT2 * abs(x)


def price_from_scaled(x: float, t: float, exponent: float = 0.5) -> float:
    """Undo the dispersion scaling: price = 1/2 + x / 2^(exponent * t)."""
    return 0.5 + x / 2.0 ** (exponent * t)


def scaled_from_price(p: float, t: float, exponent: float = 0.5) -> float:
    return (p - 0.5) * 2.0 ** (exponent * t)


def price_step_weak_bias(p: float, t: float, exponent: float = 0.5) -> float:
    """Price recursion while the expectation width is 2^(-exponent * t).

    The excess fraction is |1 - 2p| divided by that width and the clearing
    price stays at 1/2. Rescaling with :func:`scaled_from_price` turns this
    into :func:`map_g` (exponent 1/2) or :func:`map_y` (exponent q_gamma).
    """
    d = 1.0 - 2.0 * p
    return p + 2.0 ** (exponent * t - 1.0) * abs(d) * d


def q_gamma(gamma: float, fit: QGammaFit = Q_FIT) -> float:
    q = fit(gamma)
    if q <= 0.0:
        warnings.warn(f"q_gamma({gamma}) = {q:.4g} <= 0: no contraction predicted", RuntimeWarning, stacklevel=2)
    return q


def _exponent(gamma: float) -> float:
    return 0.5 if gamma == 1.0 else q_gamma(gamma)


def dispersion_prediction(t: float, gamma: float) -> float:
    """Predicted width of the expectation distribution, starting from 1."""
    if t < 0:
        raise ValueError("t must be non-negative")
    return 2.0 ** (-_exponent(gamma) * t)


def stop_time(cost: float, gamma: float) -> float:
    """Period at which the predicted width falls to the 2 * cost no-trade band."""
    if not 0.0 < cost < 1.0:
        raise ValueError("cost ∈ (0,1)")
    if gamma == 1.0:
        return -2.0 * (1.0 + math.log2(cost))
    q = q_gamma(gamma)
    if q <= 0.0:
        raise ValueError("stop_time undefined for q_gamma <= 0")
    return -(1.0 + math.log2(cost)) / q


def _positive_q(gamma: float) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        q = q_gamma(gamma)
    if q <= 0.0:
        raise ValueError(f"q_gamma({gamma}) = {q:.4g} <= 0")
    return q


def map_y(y: float, gamma: float) -> float:
    """Partial-revision analogue of :func:`map_g`."""
    q = _positive_q(gamma)
    return 2.0**q * y - 2.0 ** (q + 1.0) * abs(y) * y


def y_fixed_points(gamma: float) -> tuple[float, float, float]:
    q = _positive_q(gamma)
    r = (2.0**q - 1.0) / 2.0 ** (q + 1.0)
    return (-r, 0.0, r)


def predictions(params) -> dict[str, float | None]:
    """Every closed-form prediction that applies to ``params``, by name."""
    out: dict[str, float | None] = {}
    p0, gamma, cost, n = params.p0, params.gamma, params.cost, params.n_agents
    if p0 > 0.5:
        out["adaptive_beta0"] = adaptive_beta0(p0, gamma)
        p1, bound = adaptive_prediction(p0, cost, gamma)
        out["adaptive_p1"] = p1
        out["adaptive_longrun_bound"] = bound
    else:
        out["adaptive_beta0"] = out["adaptive_p1"] = out["adaptive_longrun_bound"] = None
    out["adaptive_convergence_time"] = adaptive_convergence_time(n, gamma) if 0.0 < gamma < 1.0 else None
    out["map_f_p0"] = map_f(p0)
    out["g_fixed_point"] = g_fixed_points()[2]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        q = Q_FIT(gamma)
    out["q_gamma"] = q
    out["dispersion_exponent"] = 0.5 if gamma == 1.0 else q
    out["dispersion_t10"] = 2.0 ** (-out["dispersion_exponent"] * 10) if out["dispersion_exponent"] > 0 else None
    out["stop_time"] = stop_time(cost, gamma) if (gamma == 1.0 or q > 0.0) else None
    out["y_fixed_point"] = y_fixed_points(gamma)[2] if q > 0.0 else None
    return out
