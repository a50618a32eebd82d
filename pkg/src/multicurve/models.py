"""Gaussian affine model families with closed-form curves and bond prices.

Families (state coordinates in order):

``vasicek``
    ``X = (t, int xi, xi)``; single curve, no scheduled jumps.
``vasicek_jump``
    ``X = (clock, int xi, xi, 1{t>=s} xi_s, 1{t>=s} eps)`` with one scheduled date
    ``s`` (default 1).  The numeraire jumps by ``exp(a xi_s + eps)`` at ``s`` and
    ``eps ~ N(0, b^2)``.
``multicurve_vasicek``
    ``X = (t, int xi1, xi1, int xi2, xi2)``; OIS short rate ``xi1``, spread
    exponent ``int (xi1 - xi2)``.
``multicurve_jump``
    ``X = (clock, int xi1, xi1, int xi2, xi2, int J, J)`` where the spike factor
    ``J`` decays at rate ``kappa3`` and jumps by a standard normal at each date.
    The numeraire jumps by ``exp(c eps_n)``; the spread exponent is
    ``int xi2 + a J``.

Each clock coordinate counts ``t`` plus the number of calendar dates up to ``t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .affine import (AffineCharacteristics, AffineModel, CurveLoadings, GaussianDynamics, OUFactor,
                     vasicek_transform)
from .curve import DiscontinuityCalendar, TenorSet, decay_integral
from .errors import ConfigError

FAMILIES = ("vasicek", "vasicek_jump", "multicurve_vasicek", "multicurve_jump")


@dataclass(frozen=True)
class VasicekParams:
    """Parameters of the Gaussian families.  Per-factor tuples hold one entry per OU factor."""

    kappa: tuple = (0.5,)
    theta: tuple = (0.03,)
    sigma: tuple = (0.01,)
    xi0: tuple = (0.02,)
    rho: float = 0.0
    a: float = 0.0
    b: float = 0.0
    c: float = 0.0
    kappa3: float = 0.0
    spread0: float = 1.0

    def __post_init__(self):
        for name in ("kappa", "theta", "sigma", "xi0"):
            value = getattr(self, name)
            value = (value,) if isinstance(value, (int, float)) else tuple(value)
            object.__setattr__(self, name, tuple(float(v) for v in value))
        sizes = {len(self.kappa), len(self.theta), len(self.sigma), len(self.xi0)}
        if len(sizes) != 1:
            raise ConfigError("kappa, theta, sigma and xi0 need one entry per factor")
        if any(not k > 0 for k in self.kappa):
            raise ConfigError(f"mean-reversion speeds must be positive: {self.kappa}")
        if any(not s >= 0 for s in self.sigma):
            raise ConfigError(f"volatilities must be non-negative: {self.sigma}")
        if not -1.0 <= self.rho <= 1.0:
            raise ConfigError(f"correlation must lie in [-1, 1]: {self.rho}")
        if not self.kappa3 >= 0:
            raise ConfigError(f"spike decay kappa3 must be non-negative: {self.kappa3}")
        if not self.b >= 0:
            raise ConfigError(f"jump standard deviation b must be non-negative: {self.b}")
        if not self.spread0 > 0:
            raise ConfigError(f"initial spread must be positive: {self.spread0}")
        values = (self.rho, self.a, self.b, self.c, self.kappa3, self.spread0) + self.kappa + self.theta + self.sigma + self.xi0
        if not all(math.isfinite(v) for v in values):
            raise ConfigError("parameters must be finite")

    @property
    def factors(self) -> int:
        return len(self.kappa)

    def factor(self, i: int) -> tuple[float, float, float, float]:
        return self.kappa[i], self.theta[i], self.sigma[i], self.xi0[i]


# ---------------------------------------------------------------------------
# Single-factor Vasicek building blocks


def vasicek_loading(kappa: float, theta: float, sigma: float, tau: float) -> tuple[float, float, float]:
    """Loadings on ``(clock, int xi, xi)`` of the Vasicek forward rate at time to maturity ``tau``."""
    decay = math.exp(-kappa * tau)
    return (sigma * sigma * decay_integral(kappa, tau) * decay - kappa * theta * decay, kappa * decay, decay)


def vasicek_forward(kappa: float, theta: float, sigma: float, tau: float, xi: float) -> float:
    decay = math.exp(-kappa * tau)
    b = decay_integral(kappa, tau)
    return xi * decay - theta * math.expm1(-kappa * tau) - 0.5 * sigma * sigma * b * b


def vasicek_bond(kappa: float, theta: float, sigma: float, tau: float, xi: float) -> float:
    a, b = vasicek_transform(kappa, theta, sigma, tau, 0.0)
    return np.exp(-a - b * xi)


def _unit(d: int, *indices: int, values: Sequence[float] | None = None) -> np.ndarray:
    out = np.zeros(d)
    for k, i in enumerate(indices):
        out[i] = 1.0 if values is None else values[k]
    return out


def _require_factors(params: VasicekParams, count: int, family: str):
    if params.factors != count:
        raise ConfigError(f"{family} needs {count} factor(s), got {params.factors}")


def _require_ois(tenor: float, tenors: Sequence[float]):
    if float(tenor) not in tenors:
        raise ConfigError(f"tenor {tenor} is not modelled (tenors {tuple(tenors)})")


# ---------------------------------------------------------------------------
# Single-curve Vasicek


def build_vasicek_single(params: VasicekParams, horizon: float = 5.0) -> AffineModel:
    _require_factors(params, 1, "vasicek")
    kappa, theta, sigma, xi0 = params.factor(0)
    d = 3
    drift = np.zeros((d + 1, d))
    drift[0] = (1.0, 0.0, kappa * theta)
    drift[3] = (0.0, 1.0, -kappa)
    diffusion = np.zeros((d + 1, d, d))
    diffusion[0, 2, 2] = sigma ** 2

    def phi(t, T):
        return np.array(vasicek_loading(kappa, theta, sigma, T - t))

    def forward_rate(t, T, tenor, x, pre=False):
        _require_ois(tenor, (0.0,))
        return vasicek_forward(kappa, theta, sigma, T - t, x[..., 2])

    def bond(t, T, tenor, x, pre=False):
        _require_ois(tenor, (0.0,))
        return vasicek_bond(kappa, theta, sigma, T - t, x[..., 2])

    loadings = CurveLoadings({0.0: phi}, {}, {}, _unit(d, 2), _unit(d, 1))
    dynamics = GaussianDynamics((OUFactor(kappa, theta, sigma, level=2, integral=1),), np.eye(1), clock=0)
    return AffineModel("vasicek", AffineCharacteristics(drift, diffusion), loadings,
                       DiscontinuityCalendar((), horizon), TenorSet(()), np.array([0.0, 0.0, xi0]),
                       forward_rate, {}, bond, dynamics, params)


# ---------------------------------------------------------------------------
# Vasicek with one scheduled numeraire jump


def build_vasicek_jump(params: VasicekParams, jump_date: float = 1.0,
                       calendar: Optional[DiscontinuityCalendar] = None, horizon: float = 5.0) -> AffineModel:
    """Single-curve Vasicek whose numeraire jumps by ``exp(a xi_s + eps)`` at ``s = jump_date``.

    The forward curve carries an atom at ``s`` so that bond prices stay consistent.
    Before ``s`` that atom is ``a e^{-kappa(s-t)} xi_t + A(s-t,-a) - A(s-t,0) - b^2/2``,
    which tends to ``a xi_s - b^2/2`` as ``t -> s``.
    """
    _require_factors(params, 1, "vasicek_jump")
    kappa, theta, sigma, xi0 = params.factor(0)
    a, b = params.a, params.b
    s = float(jump_date)
    if calendar is not None and tuple(calendar.dates) != (s,):
        raise ConfigError(f"vasicek_jump has exactly one calendar date {s}; got {calendar.dates}")
    if not 0 < s <= horizon:
        raise ConfigError(f"jump date {s} must lie in (0, {horizon}]")
    calendar = DiscontinuityCalendar((s,), horizon)
    d = 5
    drift = np.zeros((d + 1, d))
    drift[0] = (1.0, 0.0, kappa * theta, 0.0, 0.0)
    drift[3] = (0.0, 1.0, -kappa, 0.0, 0.0)
    diffusion = np.zeros((d + 1, d, d))
    diffusion[0, 2, 2] = sigma ** 2

    def gamma(date, u):
        g = np.zeros(d)
        g[2] = u[3]
        return u[0] + 0.5 * (u[4] * b) ** 2, g

    def phi(t, T):
        out = np.zeros(d)
        if t == s:
            if T == s:
                out[0], out[3] = 0.5 * b * b, 1.0 - a
            return out
        if t < s and T == s:
            lead = a * math.exp(-kappa * (s - t))
            out[0] = 0.5 * sigma ** 2 * (2 * decay_integral(kappa, s - t) * lead + lead * lead) - kappa * theta * lead
            out[1], out[2] = kappa * lead, lead
            return out
        decay = math.exp(-kappa * (T - t))
        if t < s < T:
            bbar = decay_integral(kappa, T - t) + a * math.exp(-kappa * (s - t))
            out[0] = sigma ** 2 * bbar * decay - kappa * theta * decay
        else:
            out[0] = vasicek_loading(kappa, theta, sigma, T - t)[0]
        out[1], out[2] = kappa * decay, decay
        return out

    def transform(tau, u):
        return vasicek_transform(kappa, theta, sigma, tau, u)

    def before_jump(t, pre):
        return t < s or (t == s and pre)

    def forward_rate(t, T, tenor, x, pre=False):
        _require_ois(tenor, (0.0,))
        xi = x[..., 2]
        if T == s and before_jump(t, pre):
            lag = s - t
            return (a * math.exp(-kappa * lag) * xi + transform(lag, -a)[0] - transform(lag, 0.0)[0] - 0.5 * b * b)
        if T == s == t:
            return xi
        if before_jump(t, pre) and T > s:
            lag, tail = s - t, T - s
            tail_b = decay_integral(kappa, tail)
            u = -tail_b - a
            e1, e2 = decay_integral(kappa, lag), decay_integral(2 * kappa, lag)
            du_a = -kappa * theta * e1 + sigma ** 2 * ((e1 - e2) / kappa - u * e2)
            du_b = -math.exp(-kappa * lag)
            tail_rate = kappa * theta * tail_b - 0.5 * sigma ** 2 * tail_b ** 2
            return tail_rate - (du_a + du_b * xi) * math.exp(-kappa * tail)
        return vasicek_forward(kappa, theta, sigma, T - t, xi)

    def bond(t, T, tenor, x, pre=False):
        _require_ois(tenor, (0.0,))
        xi = x[..., 2]
        if before_jump(t, pre) and T >= s:
            tail_a, tail_b = transform(T - s, 0.0)
            head_a, head_b = transform(s - t, -tail_b - a)
            return np.exp(-tail_a - head_a - head_b * xi + 0.5 * b * b)
        return vasicek_bond(kappa, theta, sigma, T - t, xi)

    def jump(date):
        loading = np.zeros((d, 1))
        loading[4, 0] = b
        matrix = np.zeros((d, d))
        matrix[3, 2] = 1.0
        return _unit(d, 0), matrix, loading

    loadings = CurveLoadings({0.0: phi}, {}, {s: _unit(d, 3, 4, values=(a, 1.0))}, _unit(d, 2), _unit(d, 1))
    chars = AffineCharacteristics(drift, diffusion, jump_transform=gamma, transform_dates=(s,))
    dynamics = GaussianDynamics((OUFactor(kappa, theta, sigma, level=2, integral=1),), np.eye(1), clock=0,
                                jump=jump)
    return AffineModel("vasicek_jump", chars, loadings, calendar, TenorSet(()),
                       np.array([0.0, 0.0, xi0, 0.0, 0.0]), forward_rate, {}, bond, dynamics, params)


# ---------------------------------------------------------------------------
# Two-factor multi-curve Vasicek


def _two_factor_diffusion(d, params, level1, level2):
    (k1, t1, s1, _), (k2, t2, s2, _) = params.factor(0), params.factor(1)
    diffusion = np.zeros((d + 1, d, d))
    diffusion[0, level1, level1] = s1 ** 2
    diffusion[0, level2, level2] = s2 ** 2
    diffusion[0, level1, level2] = diffusion[0, level2, level1] = params.rho * s1 * s2
    return diffusion


def build_multicurve_vasicek(params: VasicekParams, tenor: float = 0.5, horizon: float = 5.0) -> AffineModel:
    """OIS short rate ``xi1``; the tenor curve has short end ``xi2`` and Vasicek shape in factor 2."""
    _require_factors(params, 2, "multicurve_vasicek")
    (k1, th1, s1, x1), (k2, th2, s2, x2) = params.factor(0), params.factor(1)
    tenor = float(tenor)
    d = 5
    drift = np.zeros((d + 1, d))
    drift[0] = (1.0, 0.0, k1 * th1, 0.0, k2 * th2)
    drift[3] = (0.0, 1.0, -k1, 0.0, 0.0)
    drift[5] = (0.0, 0.0, 0.0, 1.0, -k2)
    diffusion = _two_factor_diffusion(d, params, 2, 4)

    def phi_ois(t, T):
        p1, p2, p3 = vasicek_loading(k1, th1, s1, T - t)
        return np.array([p1, p2, p3, 0.0, 0.0])

    def phi_tenor(t, T):
        p1, p2, p3 = vasicek_loading(k2, th2, s2, T - t)
        return np.array([p1, 0.0, 0.0, p2, p3])

    def forward_rate(t, T, delta, x, pre=False):
        _require_ois(delta, (0.0, tenor))
        if delta == 0:
            return vasicek_forward(k1, th1, s1, T - t, x[..., 2])
        return vasicek_forward(k2, th2, s2, T - t, x[..., 4])

    def bond(t, T, delta, x, pre=False):
        _require_ois(delta, (0.0, tenor))
        if delta == 0:
            return vasicek_bond(k1, th1, s1, T - t, x[..., 2])
        return vasicek_bond(k2, th2, s2, T - t, x[..., 4])

    loadings = CurveLoadings({0.0: phi_ois, tenor: phi_tenor}, {tenor: _unit(d, 1, 3, values=(1.0, -1.0))}, {},
                             _unit(d, 2), _unit(d, 1))
    corr = np.array([[1.0, params.rho], [params.rho, 1.0]])
    dynamics = GaussianDynamics((OUFactor(k1, th1, s1, level=2, integral=1),
                                 OUFactor(k2, th2, s2, level=4, integral=3)), corr, clock=0)
    return AffineModel("multicurve_vasicek", AffineCharacteristics(drift, diffusion), loadings,
                       DiscontinuityCalendar((), horizon), TenorSet((tenor,)), np.array([0.0, 0.0, x1, 0.0, x2]),
                       forward_rate, {tenor: params.spread0}, bond, dynamics, params)


# ---------------------------------------------------------------------------
# Multi-curve Vasicek with scheduled spikes


def build_multicurve_jump(params: VasicekParams, calendar: DiscontinuityCalendar, tenor: float = 0.5) -> AffineModel:
    """Two Vasicek factors plus a spike factor ``J`` that jumps by ``eps_n ~ N(0,1)`` at every date.

    ``r = xi1 + J``; the spread exponent is ``int xi2 + a J``; the numeraire
    jumps by ``exp(c eps_n)``.  ``kappa3 = 0`` gives persistent level shifts and a
    large ``kappa3`` gives short-lived spikes.
    """
    _require_factors(params, 2, "multicurve_jump")
    (k1, th1, s1, x1), (k2, th2, s2, x2) = params.factor(0), params.factor(1)
    a, c, k3, rho = params.a, params.c, params.kappa3, params.rho
    lift = 1.0 + a * k3
    tenor = float(tenor)
    dates = tuple(calendar.dates)
    date_set = set(dates)
    if any(x <= 0 for x in dates):
        raise ConfigError("multicurve_jump calendar dates must be positive")
    d = 7
    drift = np.zeros((d + 1, d))
    drift[0] = (1.0, 0.0, k1 * th1, 0.0, k2 * th2, 0.0, 0.0)
    drift[3] = (0.0, 1.0, -k1, 0.0, 0.0, 0.0, 0.0)
    drift[5] = (0.0, 0.0, 0.0, 1.0, -k2, 0.0, 0.0)
    drift[7] = (0.0, 0.0, 0.0, 0.0, 0.0, 1.0, -k3)
    diffusion = _two_factor_diffusion(d, params, 2, 4)

    def gamma(date, u):
        return u[0] + 0.5 * u[6] ** 2, np.zeros(d)

    def spike(tau):
        return math.exp(-k3 * tau), decay_integral(k3, tau)

    def phi_ois(t, T):
        out = np.zeros(d)
        t_in, T_in = t in date_set, T in date_set
        q, q_int = spike(T - t)
        if not t_in and not T_in:
            out[0] = vasicek_loading(k1, th1, s1, T - t)[0]
            e1 = math.exp(-k1 * (T - t))
            out[1], out[2], out[5] = k1 * e1, e1, k3 * q
        elif t_in and not T_in:
            out[0] = c * q + q * q_int
        elif t_in and t == T:
            out[0] = 0.5 * c * c
        if not T_in:
            out[6] = q
        return out

    def phi_tenor(t, T):
        out = np.zeros(d)
        t_in, T_in = t in date_set, T in date_set
        q, q_int = spike(T - t)
        if not t_in and not T_in:
            tau = T - t
            e1, e2 = math.exp(-k1 * tau), math.exp(-k2 * tau)
            out[0] = (-th1 * k1 * e1 - s1 ** 2 / k1 * (e1 * e1 - e1) + th2 * k2 * e2 - s2 ** 2 / k2 * (e2 * e2 - e2)
                      + rho * s1 * s2 / (k1 * k2) * (-k1 * e1 - k2 * e2 + (k1 + k2) * e1 * e2))
            out[1], out[2] = k1 * e1, e1
            out[3], out[4] = -k2 * e2, -e2
            out[5] = k3 * lift * q
        elif t_in and not T_in:
            out[0] = lift * (q * q_int + c * q - a * q * q)
        elif t_in and t == T:
            out[0] = 0.5 * (a - c) ** 2
        if not T_in:
            out[6] = lift * q
        return out

    def window(t, T, pre):
        return [m for m in dates if (t <= m if pre else t < m) and m <= T]

    def integrated_moments(t, T, x):
        """Mean and variance of ``int_t^T (xi1 - xi2) ds`` given the state."""
        tau = T - t
        b1, b2 = decay_integral(k1, tau), decay_integral(k2, tau)
        mean = th1 * tau + (x[..., 2] - th1) * b1 - th2 * tau - (x[..., 4] - th2) * b2
        var = (s1 ** 2 / k1 ** 2 * (tau - 2 * b1 + decay_integral(2 * k1, tau))
               + s2 ** 2 / k2 ** 2 * (tau - 2 * b2 + decay_integral(2 * k2, tau))
               - 2 * rho * s1 * s2 / (k1 * k2) * (tau - b1 - b2 + decay_integral(k1 + k2, tau)))
        return mean, var

    def forward_rate(t, T, delta, x, pre=False):
        _require_ois(delta, (0.0, tenor))
        if T in date_set:
            if T > t or pre:
                return -0.5 * c * c if delta == 0 else -0.5 * (a - c) ** 2
            return 0.0
        tau = T - t
        q, _ = spike(tau)
        past = [(math.exp(-k3 * (T - m)), decay_integral(k3, T - m)) for m in window(t, T, pre)]
        if delta == 0:
            return (vasicek_forward(k1, th1, s1, tau, x[..., 2]) + q * x[..., 6]
                    - sum((c + m_int) * m_q for m_q, m_int in past))
        b1, b2 = decay_integral(k1, tau), decay_integral(k2, tau)
        e1, e2 = math.exp(-k1 * tau), math.exp(-k2 * tau)
        mean_rate = th1 + (x[..., 2] - th1) * e1 - th2 - (x[..., 4] - th2) * e2
        var_rate = s1 ** 2 * b1 ** 2 + s2 ** 2 * b2 ** 2 - 2 * rho * s1 * s2 * b1 * b2
        return (mean_rate - 0.5 * var_rate + lift * q * x[..., 6]
                + lift * sum((a - c - lift * m_int) * m_q for m_q, m_int in past))

    def bond(t, T, delta, x, pre=False):
        _require_ois(delta, (0.0, tenor))
        tau = T - t
        q_int = decay_integral(k3, tau)
        tail = [decay_integral(k3, T - m) for m in window(t, T, pre)]
        if delta == 0:
            head_a, head_b = vasicek_transform(k1, th1, s1, tau, 0.0)
            return np.exp(-head_a - head_b * x[..., 2] - q_int * x[..., 6] + 0.5 * sum((c + v) ** 2 for v in tail))
        mean, var = integrated_moments(t, T, x)
        return np.exp(-mean + 0.5 * var - lift * q_int * x[..., 6] + 0.5 * sum((a - c - lift * v) ** 2 for v in tail))

    def jump(date):
        loading = np.zeros((d, 1))
        loading[6, 0] = 1.0
        return _unit(d, 0), np.zeros((d, d)), loading

    numeraire_jump = {m: _unit(d, 6, values=(c,)) for m in dates}
    loadings = CurveLoadings({0.0: phi_ois, tenor: phi_tenor}, {tenor: _unit(d, 3, 6, values=(1.0, a))},
                             numeraire_jump, _unit(d, 2, 6), _unit(d, 1, 5))
    chars = AffineCharacteristics(drift, diffusion, jump_transform=gamma, transform_dates=dates)
    corr = np.eye(3)
    corr[0, 1] = corr[1, 0] = rho
    dynamics = GaussianDynamics((OUFactor(k1, th1, s1, level=2, integral=1),
                                 OUFactor(k2, th2, s2, level=4, integral=3),
                                 OUFactor(k3, 0.0, 0.0, level=6, integral=5)), corr, clock=0, jump=jump)
    return AffineModel("multicurve_jump", chars, loadings, calendar, TenorSet((tenor,)),
                       np.array([0.0, 0.0, x1, 0.0, x2, 0.0, 0.0]), forward_rate, {tenor: params.spread0}, bond,
                       dynamics, params)


def build_model(family: str, params: VasicekParams, tenor: float = 0.5, calendar=None, horizon: float = 5.0,
                jump_date: float = 1.0) -> AffineModel:
    if family == "vasicek":
        return build_vasicek_single(params, horizon)
    if family == "vasicek_jump":
        return build_vasicek_jump(params, jump_date, calendar, horizon)
    if family == "multicurve_vasicek":
        return build_multicurve_vasicek(params, tenor, horizon)
    if family == "multicurve_jump":
        if calendar is None:
            calendar = DiscontinuityCalendar((1.0, 2.0, 3.0, 4.0), horizon)
        return build_multicurve_jump(params, calendar, tenor)
    raise ConfigError(f"unknown model family {family!r}; valid families: {', '.join(FAMILIES)}")


# ---------------------------------------------------------------------------
# Deliberate violations, used to show the checks have power


def inject_drift(model: AffineModel, factor: int, rate: float) -> AffineModel:
    """Add ``rate`` per year to the drift of OU factor ``factor`` while keeping every
    curve loading and pricing formula of the original model."""
    if model.dynamics is None:
        raise ConfigError("drift injection needs a model with OU dynamics")
    ou = model.dynamics.factors[factor]
    drift = model.characteristics.drift.copy()
    drift[0, ou.level] += rate
    factors = list(model.dynamics.factors)
    factors[factor] = replace(ou, theta=ou.theta + rate / ou.kappa)
    return replace(model, family=model.family + "+drift",
                   characteristics=replace(model.characteristics, drift=drift),
                   dynamics=replace(model.dynamics, factors=tuple(factors)))


def perturb_theta(model: AffineModel, factor: int, shift: float) -> AffineModel:
    """Shift the mean-reversion level of one factor in the dynamics only."""
    return inject_drift(model, factor, shift * model.dynamics.factors[factor].kappa)


def shift_numeraire_jump(model: AffineModel, shift) -> AffineModel:
    """Add ``shift`` to the numeraire jump loading at every calendar date."""
    shift = np.asarray(shift, dtype=float)
    jumps = {k: np.asarray(v) + shift for k, v in model.loadings.numeraire_jump.items()}
    return replace(model, family=model.family + "+jump", loadings=replace(model.loadings, numeraire_jump=jumps))
