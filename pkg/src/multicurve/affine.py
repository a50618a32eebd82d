"""Affine factor models: characteristics, curve loadings and consistency checks.

An affine multiple-curve model drives every forward curve by one state process
``X``: ``df(t,T,delta) = phi(t,T,delta)^T dX_t``, the spread is
``S_t = S_0 exp(psi^delta^T (X_t - X_0))`` and the numeraire jumps by
``exp(psi_{T_n}^T Delta X_{T_n})`` at calendar dates.  The functions here evaluate
the three no-arbitrage conditions on the characteristics of ``X``:

* short-end condition ``r - f(t,t,delta)`` against the spread-exponent drift,
* drift condition per state coordinate on the integrated loadings ``phi_bar``,
* scheduled-jump condition at each calendar date via the jump transform ``gamma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

from .curve import (DiscontinuityCalendar, ForwardCurve, ForwardCurveField, TenorSet, decay_integral,
                    eta_integrate)
from .errors import ConfigError, DomainError, IntegrabilityError, NumericalError

GAUSS_HERMITE_NODES = 64
CALENDAR_SHIFT = 1e-9


@lru_cache(maxsize=8)
def gauss_hermite(n: int = GAUSS_HERMITE_NODES) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and probability weights for expectations under a standard normal."""
    nodes, weights = np.polynomial.hermite_e.hermegauss(n)
    return nodes, weights / weights.sum()


def gaussian_cubature(mean: np.ndarray, cov: np.ndarray, n: int = GAUSS_HERMITE_NODES):
    """Tensor Gauss-Hermite points and weights for ``N(mean, cov)`` in at most two dimensions.

    A symmetric square root of ``cov`` is used so singular covariances are allowed.
    """
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    k = mean.size
    if k > 2:
        raise NotImplementedError("Gaussian cubature is tensorised for at most two projections")
    nodes, weights = gauss_hermite(n)
    if k == 1:
        grid = nodes[:, None]
        w = weights
    else:
        grid = np.stack(np.meshgrid(nodes, nodes, indexing="ij"), axis=-1).reshape(-1, 2)
        w = np.outer(weights, weights).ravel()
    vals, vecs = np.linalg.eigh(0.5 * (cov + cov.T))
    root = vecs @ np.diag(np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T
    return mean + grid @ root.T, w


@dataclass(frozen=True, eq=False)
class DiscreteJumpLaw:
    """Compound-Poisson jump measure with a finitely supported jump-size law.

    Also the Monte Carlo fallback: pass an i.i.d. sample of jump sizes with equal
    weights via :meth:`from_samples`.
    """

    intensity: float
    marks: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        marks = np.atleast_2d(np.asarray(self.marks, dtype=float))
        weights = np.asarray(self.weights, dtype=float)
        if weights.shape != (marks.shape[0],) or np.any(weights < 0) or not self.intensity >= 0:
            raise ConfigError("jump law needs non-negative intensity and one weight per mark")
        object.__setattr__(self, "marks", marks)
        object.__setattr__(self, "weights", weights / weights.sum())

    @classmethod
    def from_samples(cls, intensity: float, samples) -> "DiscreteJumpLaw":
        samples = np.atleast_2d(np.asarray(samples, dtype=float))
        return cls(intensity, samples, np.full(samples.shape[0], 1.0 / samples.shape[0]))

    def integrate(self, h: Callable[[np.ndarray], np.ndarray], directions: np.ndarray) -> float:
        """``int h(V x) mu(dx)`` for a k x d projection matrix ``V``."""
        projected = self.marks @ np.atleast_2d(directions).T
        return self.intensity * float(np.sum(self.weights * h(projected)))


@dataclass(frozen=True, eq=False)
class GaussianJumpLaw:
    """Compound-Poisson jump measure with Gaussian jump sizes ``N(mean, cov)``."""

    intensity: float
    mean: np.ndarray
    cov: np.ndarray
    nodes: int = GAUSS_HERMITE_NODES

    def __post_init__(self):
        object.__setattr__(self, "mean", np.atleast_1d(np.asarray(self.mean, dtype=float)))
        object.__setattr__(self, "cov", np.atleast_2d(np.asarray(self.cov, dtype=float)))
        if not self.intensity >= 0:
            raise ConfigError("jump intensity must be non-negative")

    def integrate(self, h: Callable[[np.ndarray], np.ndarray], directions: np.ndarray) -> float:
        directions = np.atleast_2d(directions)
        points, weights = gaussian_cubature(directions @ self.mean,
                                            directions @ self.cov @ directions.T, self.nodes)
        return self.intensity * float(np.sum(weights * h(points)))


JumpLaw = Any  # DiscreteJumpLaw | GaussianJumpLaw


@dataclass(frozen=True)
class OUFactor:
    """Ornstein-Uhlenbeck factor ``d xi = kappa (theta - xi) dt + sigma dW``.

    ``level`` and ``integral`` are the state coordinates holding ``xi`` and
    ``int xi ds``.
    """

    kappa: float
    theta: float
    sigma: float
    level: int
    integral: Optional[int] = None


@dataclass(frozen=True, eq=False)
class GaussianDynamics:
    """Exactly simulable description of the state: correlated OU factors, a clock
    coordinate, and scheduled jumps ``Delta X = shift + matrix @ X_- + loading @ eps``
    with ``eps`` standard normal.
    """

    factors: tuple[OUFactor, ...]
    correlation: np.ndarray
    clock: Optional[int] = None
    jump: Optional[Callable[[float], tuple[np.ndarray, np.ndarray, np.ndarray]]] = None

    def __post_init__(self):
        corr = np.atleast_2d(np.asarray(self.correlation, dtype=float))
        m = len(self.factors)
        if corr.shape != (m, m) or not np.allclose(corr, corr.T) or np.any(np.abs(np.diag(corr) - 1) > 0):
            raise ConfigError("factor correlation must be a symmetric matrix with unit diagonal")
        if np.linalg.eigvalsh(corr).min() < -1e-12:
            raise ConfigError("factor correlation matrix is not positive semidefinite")
        object.__setattr__(self, "correlation", corr)

    def jump_transform(self, date: float, u: np.ndarray, state: Optional[np.ndarray] = None):
        """``(gamma_0, gamma)`` with ``log E[exp(u^T Delta X)] = gamma_0 + X_-^T gamma``."""
        shift, matrix, loading = self.jump(date)
        lu = loading.T @ u
        return float(u @ shift + 0.5 * lu @ lu), matrix.T @ u


@dataclass(frozen=True, eq=False)
class AffineCharacteristics:
    """Differential characteristics of an affine state process.

    ``drift`` is ``(d+1) x d`` holding ``beta_0, ..., beta_d``; ``diffusion`` is
    ``(d+1) x d x d`` holding ``alpha_0, ..., alpha_d``; ``jumps`` has ``d+1``
    entries, each a jump law or ``None``.  ``jump_transform(T_n, u)`` returns
    ``(gamma_0, gamma_vec)`` and is defined only on ``transform_dates``.
    """

    drift: np.ndarray
    diffusion: np.ndarray
    jumps: tuple = ()
    jump_transform: Optional[Callable[[float, np.ndarray], tuple[float, np.ndarray]]] = None
    transform_dates: tuple[float, ...] = ()

    def __post_init__(self):
        drift = np.asarray(self.drift, dtype=float)
        diffusion = np.asarray(self.diffusion, dtype=float)
        d = drift.shape[1]
        if drift.shape != (d + 1, d) or diffusion.shape != (d + 1, d, d):
            raise ConfigError("characteristics need (d+1) x d drift and (d+1) x d x d diffusion arrays")
        for i, a in enumerate(diffusion):
            if not np.allclose(a, a.T, atol=0, rtol=0):
                raise ConfigError(f"diffusion loading alpha_{i} is not symmetric")
            if np.linalg.eigvalsh(a).min() < -1e-14 * max(1.0, np.abs(a).max()):
                raise ConfigError(f"diffusion loading alpha_{i} is not positive semidefinite")
        jumps = tuple(self.jumps) if self.jumps else (None,) * (d + 1)
        if len(jumps) != d + 1:
            raise ConfigError("need one jump law (or None) per drift loading")
        object.__setattr__(self, "drift", drift)
        object.__setattr__(self, "diffusion", diffusion)
        object.__setattr__(self, "jumps", jumps)
        object.__setattr__(self, "transform_dates", tuple(float(x) for x in self.transform_dates))
        for date in self.transform_dates:
            g0, g = self.gamma(date, np.zeros(d))
            if g0 != 0 or np.any(np.asarray(g) != 0):
                raise ConfigError(f"jump transform at {date} does not vanish at u = 0")

    @property
    def dim(self) -> int:
        return self.drift.shape[1]

    def gamma(self, date: float, u: np.ndarray) -> tuple[float, np.ndarray]:
        if self.jump_transform is None or float(date) not in self.transform_dates:
            raise ConfigError(f"no scheduled-jump transform defined at {date}")
        g0, g = self.jump_transform(float(date), np.asarray(u, dtype=float))
        return float(g0), np.asarray(g, dtype=float)


@dataclass(frozen=True, eq=False)
class CurveLoadings:
    """Loadings of curves, spreads and numeraire on the state.

    ``forward[delta](t, T)`` is ``phi(t,T,delta)``; ``spread[delta]`` is
    ``psi^delta`` (the OIS entry is zero and omitted); ``numeraire_jump[T_n]`` is
    ``psi_{T_n}``.  The short rate is ``short_rate @ X`` and its time integral
    increments by ``rate_integral @ dX`` between calendar dates.
    """

    forward: Mapping[float, Callable[[float, float], np.ndarray]]
    spread: Mapping[float, np.ndarray]
    numeraire_jump: Mapping[float, np.ndarray]
    short_rate: np.ndarray
    rate_integral: np.ndarray

    def spread_loading(self, tenor: float, dim: int) -> np.ndarray:
        if tenor == 0:
            return np.zeros(dim)
        return np.asarray(self.spread[float(tenor)], dtype=float)

    def jump_loading(self, date: float, dim: int) -> np.ndarray:
        return np.asarray(self.numeraire_jump.get(float(date), np.zeros(dim)), dtype=float)

    def integrated(self, t: float, T: float, tenor: float, calendar: DiscontinuityCalendar) -> np.ndarray:
        """``phi_bar(t,T,delta) = int_[t,T] phi(t,u,delta) eta(du)``."""
        phi = self.forward[float(tenor)]
        value = eta_integrate(lambda u: phi(t, u), t, T, calendar, closed_left=True)
        return np.zeros(self.short_rate.shape) + value


@dataclass(frozen=True, eq=False)
class AffineModel:
    """Affine multiple-curve model with closed-form curve and bond functions.

    ``forward_rate(t, T, delta, X, pre)`` is the model forward rate: the atom value
    when ``T`` is a calendar date and the density otherwise.  With ``pre`` true at a
    calendar date ``t`` it returns ``f(t-, T, delta)`` from the left-limit state.
    ``bond(t, T, delta, X, pre)`` is the matching closed-form bond price, if any.
    """

    family: str
    characteristics: AffineCharacteristics
    loadings: CurveLoadings
    calendar: DiscontinuityCalendar
    tenors: TenorSet
    initial_state: np.ndarray
    forward_rate: Callable[..., float]
    initial_spreads: Mapping[float, float] = field(default_factory=dict)
    bond: Optional[Callable[..., float]] = None
    dynamics: Optional[GaussianDynamics] = None
    params: Any = None

    def __post_init__(self):
        d = self.characteristics.dim
        x0 = np.asarray(self.initial_state, dtype=float)
        if x0.shape != (d,):
            raise ConfigError(f"initial state has shape {x0.shape}, expected ({d},)")
        object.__setattr__(self, "initial_state", x0)
        for tenor in self.tenors.with_ois:
            if tenor not in self.loadings.forward:
                raise ConfigError(f"no forward loading for tenor {tenor}")
        for tenor in self.tenors:
            if tenor not in self.loadings.spread or tenor not in self.initial_spreads:
                raise ConfigError(f"tenor {tenor} needs a spread loading and an initial spread")
            if not self.initial_spreads[tenor] > 0:
                raise ConfigError(f"initial spread for tenor {tenor} must be positive")

    @property
    def dim(self) -> int:
        return self.characteristics.dim

    def short_rate(self, state) -> float:
        return float(self.loadings.short_rate @ np.asarray(state, dtype=float))

    def forward_curve(self, t: float, state, maturities: Sequence[float], pre: bool = False) -> ForwardCurveField:
        """Snapshot of the model-implied curves, with the density sampled on ``maturities``.

        The density may jump at calendar dates, so every date inside the grid range is
        added and sampled on both sides.
        """
        grid = set(float(u) for u in maturities if u >= t)
        if grid:
            grid |= {d for d in self.calendar.dates if t < d < max(grid)}
        grid = sorted(grid)
        curves = {}
        for tenor in self.tenors.with_ois:
            knots, values = [], []
            for u in grid:
                if u in self.calendar and u > t:
                    for side in (u - 1e-12, u + 1e-12):
                        knots.append(u)
                        values.append(self.forward_rate(t, side, tenor, state, pre))
                else:
                    knots.append(u)
                    values.append(self.forward_rate(t, u, tenor, state, pre))
            atoms = {d: self.forward_rate(t, d, tenor, state, pre) for d in self.calendar.dates if d > t}
            curves[tenor] = ForwardCurve(np.array(knots), np.array(values), atoms)
        return ForwardCurveField(t, self.calendar, curves)


# ---------------------------------------------------------------------------
# Condition reports


@dataclass
class ResidualReport:
    """Residuals of one condition over a grid of evaluation points."""

    condition: str
    points: list = field(default_factory=list)

    def add(self, residual: float, lhs: float = math.nan, rhs: float = math.nan, **where):
        if not math.isfinite(residual):
            raise IntegrabilityError(f"{self.condition}: non-finite residual at {where}")
        self.points.append(dict(where, residual=float(residual), lhs=float(lhs), rhs=float(rhs)))

    @property
    def max_abs(self) -> float:
        return max((abs(p["residual"]) for p in self.points), default=0.0)

    def failures(self, tolerance: float) -> list:
        return [p for p in self.points if abs(p["residual"]) > tolerance]

    def summary(self, tolerance: float) -> dict:
        worst = max(self.points, key=lambda p: abs(p["residual"]), default=None)
        return {"condition": self.condition, "points": len(self.points), "max_abs_residual": self.max_abs,
                "passed": self.max_abs <= tolerance, "worst_point": worst,
                "failing_points": self.failures(tolerance)[:20]}


DriftResidualReport = ResidualReport


def _mixed_jump_integral(chars: AffineCharacteristics, state, h, directions) -> float:
    """``int h(V x) (mu_0 + sum_i X^i mu_i)(dx)``."""
    total = 0.0
    for i, law in enumerate(chars.jumps):
        if law is None:
            continue
        weight = 1.0 if i == 0 else float(state[i - 1])
        if weight != 0.0:
            total += weight * law.integrate(h, directions)
    if not math.isfinite(total):
        raise IntegrabilityError("jump integral is not finite")
    return total


def _exp_minus_linear(p):
    p = p[..., 0]
    return np.expm1(p) - p


def check_short_rate_condition(model: AffineModel, state, t: float) -> dict[float, float]:
    """Residual of ``r - f(t,t,delta)`` against the spread-exponent drift, per tenor."""
    if t in model.calendar:
        raise DomainError(f"the short-end condition holds for a.e. t; {t} is a calendar date")
    chars = model.characteristics
    x = np.asarray(state, dtype=float)
    mixed_drift = chars.drift[0] + x @ chars.drift[1:]
    mixed_diffusion = chars.diffusion[0] + np.tensordot(x, chars.diffusion[1:], axes=1)
    out = {}
    for tenor in model.tenors.with_ois:
        psi = model.loadings.spread_loading(tenor, model.dim)
        lhs = model.short_rate(x) - model.forward_rate(t, t, tenor, x, False)
        rhs = psi @ mixed_drift + 0.5 * psi @ mixed_diffusion @ psi
        if np.any(psi != 0):
            rhs += _mixed_jump_integral(chars, x, _exp_minus_linear, psi[None, :])
        out[tenor] = float(lhs - rhs)
    return out


def drift_residuals(model: AffineModel, t: float, T: float, tenor: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-coordinate residuals of the drift condition and the integrated loading ``phi_bar``."""
    chars = model.characteristics
    phi_bar = model.loadings.integrated(t, T, tenor, model.calendar)
    psi = model.loadings.spread_loading(tenor, model.dim)
    residuals = np.empty(model.dim + 1)

    def h(points):
        p, q = points[:, 0], points[:, 1]
        with np.errstate(over="ignore", invalid="ignore"):
            return np.exp(p) * np.expm1(-q) + q

    directions = np.stack([psi, phi_bar])
    for i in range(model.dim + 1):
        value = phi_bar @ chars.drift[i] - phi_bar @ chars.diffusion[i] @ (0.5 * phi_bar - psi)
        law = chars.jumps[i]
        if law is not None:
            jump = law.integrate(h, directions)
            if not math.isfinite(jump):
                raise IntegrabilityError(f"jump integral of the drift condition is not finite (i={i})")
            value -= jump
        residuals[i] = value
    return residuals, phi_bar


def check_drift_condition(model: AffineModel, grid: Iterable[tuple[float, float, float]]) -> ResidualReport:
    """Drift-condition residuals for every ``(t, T, delta)`` and coordinate ``i = 0..d``."""
    report = ResidualReport("drift")
    beta = model.characteristics.drift
    for t, T, tenor in grid:
        if t in model.calendar:
            raise DomainError(f"the drift condition holds for a.e. t; {t} is a calendar date")
        residuals, phi_bar = drift_residuals(model, t, T, tenor)
        for i, r in enumerate(residuals):
            lhs = phi_bar @ beta[i]
            report.add(r, lhs=lhs, rhs=lhs - r, t=t, T=T, tenor=tenor, index=i)
    return report


def scheduled_jump_exponent(model: AffineModel, n: int, T: float, tenor: float = 0.0) -> np.ndarray:
    """``w = psi^delta_{T_n} - psi_{T_n} - int_(T_n,T] phi(T_n,u,delta) eta(du)``."""
    if not 1 <= n <= len(model.calendar.dates):
        raise DomainError(f"calendar index {n} out of range")
    date = model.calendar.dates[n - 1]
    if T < date:
        raise DomainError(f"maturity {T} precedes the calendar date {date}")
    phi = model.loadings.forward[float(tenor)]
    tail = np.asarray(eta_integrate(lambda u: phi(date, u), date, T, model.calendar)) if T > date else 0.0
    return model.loadings.spread_loading(tenor, model.dim) - model.loadings.jump_loading(date, model.dim) - tail


def _scheduled_residual(model: AffineModel, date: float, w: np.ndarray, tenor: float, x: np.ndarray) -> float:
    g0, g = model.characteristics.gamma(date, w)
    return float(model.forward_rate(date, date, tenor, x, True) + g0 + x @ g)


def check_scheduled_jump_condition(model: AffineModel, n: int, T: float, state, tenor: float = 0.0) -> float:
    """Residual ``f(T_n-,T_n,delta) + gamma_0(w) + X_-^T gamma(w)`` at the n-th date (1-based).

    ``state`` is the left-limit state ``X_{T_n-}``.
    """
    w = scheduled_jump_exponent(model, n, T, tenor)
    return _scheduled_residual(model, model.calendar.dates[n - 1], w, tenor, np.asarray(state, dtype=float))


# ---------------------------------------------------------------------------
# Riccati transforms for a Vasicek factor


_SERIES_TERMS = 12
_SERIES_SWITCH = 1e-2


def _series_coefficients():
    n = np.arange(1, _SERIES_TERMS + 1)
    c = (-1.0) ** (n - 1) / np.array([math.factorial(int(k)) for k in n])
    plain = c / (n + 1)
    square = np.zeros(2 * _SERIES_TERMS - 1)
    cross = np.zeros(2 * _SERIES_TERMS)
    for i, ni in enumerate(n):
        for j, nj in enumerate(n):
            square[i + j] += c[i] * c[j] / (ni + nj + 1)
        for k in range(_SERIES_TERMS + 1):
            if i + k < cross.size:
                cross[i + k] += c[i] * (-1.0) ** k / math.factorial(k) / (ni + k + 1)
    return plain, square, cross


_PLAIN, _SQUARE, _CROSS = _series_coefficients()


def _decay_moments(kappa, tau):
    """``int E``, ``int E^2`` and ``int E e^{-kappa s}`` over ``[0, tau]`` with ``E(s) = (1-e^{-kappa s})/kappa``.

    The closed forms cancel badly when ``kappa tau`` is small, where a power
    series in ``kappa tau`` is used instead.
    """
    kappa, tau = np.broadcast_arrays(np.asarray(kappa, dtype=float), np.asarray(tau, dtype=float))
    x = kappa * tau
    small = np.abs(x) < _SERIES_SWITCH
    safe = np.where(small, 1.0, kappa)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        e1 = decay_integral(safe, tau)
        e2 = decay_integral(2 * safe, tau)
        closed = ((tau - e1) / safe, (tau - 2 * e1 + e2) / safe ** 2, (e1 - e2) / safe)
    poly = np.polynomial.polynomial.polyval
    series = (tau ** 2 * poly(x, _PLAIN), tau ** 3 * poly(x, _SQUARE), tau ** 2 * poly(x, _CROSS))
    return tuple(np.where(small, s, c) for s, c in zip(series, closed))


def vasicek_transform(kappa, theta, sigma, tau, u):
    """Closed form ``(A, B)`` with ``E[exp(-int_0^tau xi ds + u xi_tau)] = exp(-A - B xi_0)``.

    Solves ``dB/dtau = 1 - kappa B``, ``B(0) = -u`` and
    ``dA/dtau = kappa theta B - sigma^2 B^2 / 2``, ``A(0) = 0``.
    """
    scalar = all(isinstance(v, (int, float)) for v in (kappa, theta, sigma, tau, u))
    exp = math.exp if scalar else np.exp
    e1 = decay_integral(kappa, tau)
    e2 = decay_integral(2 * kappa, tau)
    b = e1 - u * exp(-kappa * tau)
    plain, square, cross = _decay_moments(kappa, tau)
    int_b = plain - u * e1
    int_b2 = square - 2 * u * cross + u * u * e2
    a = kappa * theta * int_b - 0.5 * sigma ** 2 * int_b2
    if scalar:
        return float(a), float(b)
    return a, b


def riccati_rk4(kappa, theta, sigma, taus, u, step: float = 1e-4):
    """Integrate the Vasicek Riccati system with classical RK4 at a fixed step.

    Parameters broadcast against each other (vectorised lanes); ``taus`` is a sorted
    sequence of horizons and the result has a leading axis over it.  The last step
    before each horizon is shortened so it lands on the horizon exactly.
    """
    kappa, theta, sigma, u = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (kappa, theta, sigma, u)))
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    if np.any(np.diff(taus) < 0) or np.any(taus < 0):
        raise DomainError("Riccati horizons must be non-negative and sorted")
    kt = kappa * theta
    half_var = 0.5 * sigma ** 2

    def rhs(b):
        return kt * b - half_var * b * b, 1.0 - kappa * b

    a = np.zeros_like(u)
    b = -u.copy()
    now = 0.0
    out_a, out_b = [], []

    def advance(a, b, h):
        k1a, k1b = rhs(b)
        k2a, k2b = rhs(b + 0.5 * h * k1b)
        k3a, k3b = rhs(b + 0.5 * h * k2b)
        k4a, k4b = rhs(b + h * k3b)
        return (a + h / 6.0 * (k1a + 2 * k2a + 2 * k3a + k4a),
                b + h / 6.0 * (k1b + 2 * k2b + 2 * k3b + k4b))

    for target in taus:
        full = int(math.floor((target - now) / step + 1e-9))
        for _ in range(full):
            a, b = advance(a, b, step)
        now += full * step
        rest = target - now
        if rest > 0:
            a, b = advance(a, b, rest)
        now = target
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise NumericalError(f"Riccati integration diverged before tau = {target} (step {step})")
        out_a.append(a.copy())
        out_b.append(b.copy())
    return np.array(out_a), np.array(out_b)


@dataclass(frozen=True)
class RiccatiResult:
    A: float
    B: float
    ode_A: float
    ode_B: float

    @property
    def discrepancy(self) -> float:
        return abs(self.A - self.ode_A) + abs(self.B - self.ode_B)


def riccati_transform(kappa: float, theta: float, sigma: float, tau: float, u: float,
                      step: float = 1e-4, tolerance: float = 1e-6) -> RiccatiResult:
    """``(A, B)`` by closed form, confirmed by the RK4 integrator within ``tolerance``."""
    if not kappa > 0 or sigma < 0 or tau < 0:
        raise DomainError("need kappa > 0, sigma >= 0 and tau >= 0")
    a, b = vasicek_transform(float(kappa), float(theta), float(sigma), float(tau), float(u))
    ode_a, ode_b = riccati_rk4(kappa, theta, sigma, [tau], u, step)
    result = RiccatiResult(float(a), float(b), float(ode_a[0]), float(ode_b[0]))
    if not result.discrepancy <= tolerance:
        raise NumericalError(f"closed form ({a}, {b}) and RK4 ({result.ode_A}, {result.ode_B}) disagree "
                             f"by {result.discrepancy:.3e} at kappa={kappa}, sigma={sigma}, tau={tau}, u={u}")
    return result


def affine_bond_price(model: AffineModel, t: float, T: float, tenor: float, state, pre: bool = False) -> float:
    """Closed-form bond price ``P(t,T,delta)`` of a model family that provides one."""
    if T < t:
        raise DomainError(f"maturity {T} precedes evaluation time {t}")
    if model.bond is None:
        raise NotImplementedError(f"no closed-form bond price for model family {model.family!r}")
    if T == t:
        return 1.0
    return float(model.bond(t, T, tenor, np.asarray(state, dtype=float), pre))


# ---------------------------------------------------------------------------
# Full suite


def default_grid(horizon: float, calendar: DiscontinuityCalendar, size: int = 21):
    """``(t, T)`` pairs on a square lattice; evaluation times on calendar dates are
    moved right by ``CALENDAR_SHIFT`` and calendar dates are added as maturities."""
    lattice = np.linspace(0.0, horizon, size)
    maturities = sorted(set(float(x) for x in lattice) | set(d for d in calendar.dates if d <= horizon))
    pairs = []
    for t in lattice:
        t = float(t)
        if t in calendar:
            t += CALENDAR_SHIFT
        pairs.extend((t, T) for T in maturities if T >= t)
    return pairs, maturities


def random_states(model: AffineModel, count: int, seed: int = 0, scale: float = 0.05) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return model.initial_state + scale * rng.standard_normal((count, model.dim))


@dataclass
class ConditionSuite:
    short_rate: ResidualReport
    drift: ResidualReport
    scheduled: ResidualReport

    @property
    def reports(self) -> tuple[ResidualReport, ...]:
        return self.short_rate, self.drift, self.scheduled

    @property
    def max_abs(self) -> float:
        return max(r.max_abs for r in self.reports)

    def passed(self, tolerance: float) -> bool:
        return self.max_abs <= tolerance

    def failing(self, tolerance: float) -> list[str]:
        return [r.condition for r in self.reports if r.max_abs > tolerance]


def run_condition_suite(model: AffineModel, horizon: Optional[float] = None, size: int = 21,
                        n_states: int = 10, seed: int = 0) -> ConditionSuite:
    """Evaluate all three conditions on the default lattice, every tenor and random states."""
    if horizon is None:
        horizon = model.calendar.horizon if math.isfinite(model.calendar.horizon) else 5.0
    pairs, maturities = default_grid(horizon, model.calendar, size)
    states = random_states(model, n_states, seed)
    short = ResidualReport("short_rate")
    times = sorted(set(t for t, _ in pairs))
    for t in times:
        for k, x in enumerate(states):
            for tenor, r in check_short_rate_condition(model, x, t).items():
                short.add(r, t=t, tenor=tenor, state=k)
    drift = check_drift_condition(model, [(t, T, tenor) for tenor in model.tenors.with_ois for t, T in pairs])
    scheduled = ResidualReport("scheduled_jump")
    for n, date in enumerate(model.calendar.dates, start=1):
        if date > horizon:
            break
        for tenor in model.tenors.with_ois:
            for T in [m for m in maturities if m >= date]:
                w = scheduled_jump_exponent(model, n, T, tenor)
                for k, x in enumerate(states):
                    scheduled.add(_scheduled_residual(model, date, w, tenor, x), n=n, T=T, tenor=tenor, state=k)
    return ConditionSuite(short, drift, scheduled)
