"""Pointwise no-arbitrage checks for general HJM-type and market models.

Every coefficient is a state-feedback callable: it receives the evaluation time
(and maturity, tenor, jump marks where relevant) together with an opaque
``state`` object and returns a number or an array.  The checks evaluate the
drift restrictions on user-supplied ``(t, T)`` grids and states only, so a
passing report says nothing about points between grid nodes.

Jump measures are finite-activity laws with finitely many marks
(:class:`MarkLaw`); Gaussian marks are represented by Gauss-Hermite nodes.
Scheduled jumps at calendar dates draw one mark from a probability
:class:`MarkLaw`; the state passed for a calendar date is the pre-jump state.

Conventions for the maturity measure: forward rates are integrated against
Lebesgue measure plus unit atoms at the calendar dates.  With a purely atomic
calendar (``continuous=False``) the short-end terms ``f(t,t,delta)`` do not
enter the short-end conditions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

from .affine import GAUSS_HERMITE_NODES, AffineModel, GaussianJumpLaw, ResidualReport, gauss_hermite
from .curve import DiscontinuityCalendar, eta_integrate
from .errors import ConfigError, DomainError, IntegrabilityError, UnsupportedLawError

MEAN_ZERO_TOLERANCE = 1e-12
SUPPORTED_LAWS = "point masses, finite discrete mixtures and Gaussian marks of rank <= 2"


# ---------------------------------------------------------------------------
# Jump-mark laws


@dataclass(frozen=True, eq=False)
class MarkLaw:
    """Finitely supported mark law ``intensity * sum_k w_k delta_{marks_k}``.

    As a jump measure ``lambda_t(dx)`` the intensity is the total jump rate; as
    the law of a scheduled jump it must be 1.
    """

    intensity: float
    marks: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        marks = np.asarray(self.marks, dtype=float)
        marks = marks.reshape(-1, 1) if marks.ndim < 2 else marks
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if weights.shape != (marks.shape[0],) or np.any(weights < 0) or not weights.sum() > 0:
            raise ConfigError("mark law needs one non-negative weight per mark and positive total weight")
        if not (math.isfinite(self.intensity) and self.intensity >= 0):
            raise ConfigError(f"mark-law intensity must be finite and non-negative, got {self.intensity}")
        if not np.all(np.isfinite(marks)):
            raise ConfigError("mark-law support must be finite")
        object.__setattr__(self, "marks", marks)
        object.__setattr__(self, "weights", weights / weights.sum())

    @classmethod
    def point(cls, mark, intensity: float = 1.0) -> "MarkLaw":
        return cls(intensity, np.atleast_2d(np.asarray(mark, dtype=float)), np.ones(1))

    @classmethod
    def discrete(cls, marks, weights, intensity: float = 1.0) -> "MarkLaw":
        return cls(intensity, marks, weights)

    @classmethod
    def from_samples(cls, samples, intensity: float = 1.0) -> "MarkLaw":
        samples = np.asarray(samples, dtype=float)
        samples = samples.reshape(-1, 1) if samples.ndim < 2 else samples
        return cls(intensity, samples, np.ones(samples.shape[0]))

    @classmethod
    def gaussian(cls, mean, cov, intensity: float = 1.0, nodes: int = GAUSS_HERMITE_NODES) -> "MarkLaw":
        """Gauss-Hermite representation of ``N(mean, cov)`` supported on at most two directions."""
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise ConfigError("Gaussian mark covariance does not match the mean")
        vals, vecs = np.linalg.eigh(0.5 * (cov + cov.T))
        if vals.min(initial=0.0) < -1e-12 * max(1.0, np.abs(vals).max(initial=0.0)):
            raise ConfigError("Gaussian mark covariance is not positive semidefinite")
        keep = vals > 1e-14 * max(vals.max(initial=0.0), 1e-300)
        rank = int(keep.sum())
        if rank == 0:
            return cls.point(mean, intensity)
        if rank > 2:
            raise UnsupportedLawError(f"Gaussian marks of rank {rank}; supported laws: {SUPPORTED_LAWS}")
        root = vecs[:, keep] * np.sqrt(vals[keep])
        z, w = gauss_hermite(nodes)
        if rank == 1:
            grid, weights = z[:, None], w
        else:
            grid = np.stack(np.meshgrid(z, z, indexing="ij"), axis=-1).reshape(-1, 2)
            weights = np.outer(w, w).ravel()
        return cls(intensity, mean + grid @ root.T, weights)

    @classmethod
    def mixture(cls, parts: Sequence[tuple[float, "MarkLaw"]]) -> Optional["MarkLaw"]:
        """``sum_j c_j law_j`` for non-negative scale factors ``c_j``; ``None`` if the total rate is 0."""
        marks, weights = [], []
        for scale, law in parts:
            if scale < 0:
                raise DomainError(f"negative jump intensity scale {scale}")
            rate = scale * law.intensity
            if rate > 0:
                marks.append(law.marks)
                weights.append(rate * law.weights)
        if not marks:
            return None
        weights = np.concatenate(weights)
        total = float(weights.sum())
        return cls(total, np.concatenate(marks), weights)

    @property
    def size(self) -> int:
        return self.marks.shape[0]

    def integral(self, values) -> float:
        """``int h lambda(dx)`` given ``h`` evaluated on the marks."""
        return self.intensity * float(np.sum(self.weights * np.asarray(values, dtype=float)))

    def mean(self, values) -> float:
        return float(np.sum(self.weights * np.asarray(values, dtype=float)))


def _scheduled_law(spec: "HJMModelSpec", n: int, state) -> MarkLaw:
    if spec.scheduled_law is None:
        return MarkLaw.point([0.0])
    law = spec.scheduled_law(n, state)
    if not isinstance(law, MarkLaw):
        raise UnsupportedLawError(f"scheduled jump law at date {n} is {type(law).__name__}; "
                                  f"conditional expectations are evaluable only for {SUPPORTED_LAWS}")
    if abs(law.intensity - 1.0) > 1e-12:
        raise ConfigError(f"scheduled jump law at date {n} must be a probability law")
    return law


def _jump_law(spec: "HJMModelSpec", t: float, state) -> Optional[MarkLaw]:
    if spec.jump_law is None:
        return None
    law = spec.jump_law(t, state)
    if law is None or law.intensity == 0:
        return None
    if not isinstance(law, MarkLaw):
        raise UnsupportedLawError(f"jump measure at t={t} is {type(law).__name__}; supported: {SUPPORTED_LAWS}")
    return law


# ---------------------------------------------------------------------------
# Model specification


def _zero(*_args):
    return 0.0


@dataclass(frozen=True, eq=False)
class HJMModelSpec:
    """Numeraire, spreads and forward-rate dynamics of a multiple-curve HJM model.

    Signatures (``marks`` is an ``(m, k)`` array of jump marks, ``n`` is the
    1-based calendar index, ``tenor`` 0 is the OIS curve):

    * ``forward(t, T, tenor, state)``: ``f(t,T,tenor)``; at a calendar date with a
      pre-jump state it is ``f(t-,T,tenor)``.
    * ``drift(t, T, tenor, state)``, ``volatility(t, T, tenor, state)`` (length
      ``dim``), ``jump_size(t, marks, T, tenor, state)``: ``a``, ``b`` and ``g``.
    * numeraire: ``short_rate(t, state)``, ``numeraire_vol(t, state)``,
      ``numeraire_jump(t, marks, state)`` and ``numeraire_scheduled(n, marks, state)``
      give ``r``, ``H``, ``L`` and ``Delta B``.
    * spreads: ``spread_drift(t, tenor, state)``, ``spread_vol(t, tenor, state)``,
      ``spread_jump(t, marks, tenor, state)``, ``spread_scheduled(n, marks, tenor, state)``
      give ``alpha``, ``H^delta``, ``L^delta`` and ``Delta A^delta``.
    * ``forward_shift(n, marks, T, tenor, state)``: ``Delta V(T_n, T, tenor)``.
    * ``jump_law(t, state)``: jump measure ``lambda_t`` as a :class:`MarkLaw`;
      ``scheduled_law(n, state)``: law of the scheduled mark.

    Omitted coefficients are zero.
    """

    calendar: DiscontinuityCalendar
    dim: int
    forward: Callable
    drift: Callable
    volatility: Callable
    short_rate: Callable
    tenors: tuple[float, ...] = ()
    numeraire_vol: Optional[Callable] = None
    numeraire_jump: Optional[Callable] = None
    numeraire_scheduled: Optional[Callable] = None
    spread_drift: Optional[Callable] = None
    spread_vol: Optional[Callable] = None
    spread_jump: Optional[Callable] = None
    spread_scheduled: Optional[Callable] = None
    jump_size: Optional[Callable] = None
    forward_shift: Optional[Callable] = None
    jump_law: Optional[Callable] = None
    scheduled_law: Optional[Callable] = None
    initial_curves: Mapping[float, Mapping[float, float]] = field(default_factory=dict)
    initial_spreads: Mapping[float, float] = field(default_factory=dict)
    initial_state: Any = None
    description: str = ""

    def __post_init__(self):
        tenors = tuple(sorted(float(d) for d in self.tenors))
        if any(d <= 0 for d in tenors):
            raise ConfigError("tenors must be positive; the OIS curve is always included")
        object.__setattr__(self, "tenors", tenors)
        if int(self.dim) < 0:
            raise ConfigError("Brownian dimension must be non-negative")

    @property
    def with_ois(self) -> tuple[float, ...]:
        return (0.0,) + self.tenors

    # -- coefficient access with zero defaults and shape normalisation ----------

    def vector(self, fn, *args) -> np.ndarray:
        if fn is None:
            return np.zeros(self.dim)
        return np.asarray(fn(*args), dtype=float).reshape(self.dim)

    def on_marks(self, fn, marks: np.ndarray, *args, head=(), positive_shift: Optional[str] = None) -> np.ndarray:
        """Evaluate a mark-dependent coefficient as an ``(m,)`` array."""
        m = marks.shape[0]
        if fn is None:
            return np.zeros(m)
        values = np.broadcast_to(np.asarray(fn(*head, marks, *args), dtype=float), (m,)).copy()
        if positive_shift and np.any(values <= -1):
            raise DomainError(f"{positive_shift} must exceed -1 on the mark support")
        return values

    def numeraire_terms(self, t: float, state, law: Optional[MarkLaw]):
        h = self.vector(self.numeraire_vol, t, state)
        jump = (self.on_marks(self.numeraire_jump, law.marks, state, head=(t,), positive_shift="L")
                if law is not None else np.zeros(0))
        return h, jump

    def spread_terms(self, t: float, tenor: float, state, law: Optional[MarkLaw]):
        if tenor == 0:
            return 0.0, np.zeros(self.dim), np.zeros(law.size if law is not None else 0)
        alpha = float(self.spread_drift(t, tenor, state)) if self.spread_drift else 0.0
        h = self.vector(self.spread_vol, t, tenor, state)
        jump = (self.on_marks(self.spread_jump, law.marks, tenor, state, head=(t,), positive_shift="L^delta")
                if law is not None else np.zeros(0))
        return alpha, h, jump

    def short_end(self, t: float, tenor: float, state) -> float:
        """``f(t,t,tenor)`` where it enters the short-end conditions (continuous calendars only)."""
        return float(self.forward(t, t, tenor, state)) if self.calendar.continuous else 0.0


@dataclass(frozen=True)
class _Integrated:
    a_bar: float
    b_bar: np.ndarray
    g_bar: np.ndarray


def integrated_coefficients(spec: HJMModelSpec, t: float, T: float, tenor: float, state,
                            law: Optional[MarkLaw]) -> _Integrated:
    """``a_bar``, ``b_bar`` and ``g_bar`` (per mark) over ``[t, T]`` against the maturity measure."""
    d = spec.dim
    m = law.size if law is not None and spec.jump_size is not None else 0
    if T <= t:
        return _Integrated(0.0, np.zeros(d), np.zeros(law.size if law is not None else 0))

    def integrand(u):
        parts = [np.atleast_1d(np.asarray(spec.drift(t, u, tenor, state), dtype=float)),
                 spec.vector(spec.volatility, t, u, tenor, state)]
        if m:
            parts.append(spec.on_marks(spec.jump_size, law.marks, u, tenor, state, head=(t,)))
        return np.concatenate(parts)

    total = np.atleast_1d(eta_integrate(integrand, t, T, spec.calendar, closed_left=True))
    g_bar = total[1 + d:] if m else np.zeros(law.size if law is not None else 0)
    return _Integrated(float(total[0]), total[1:1 + d], g_bar)


def integrated_shift(spec: HJMModelSpec, n: int, T: float, tenor: float, marks: np.ndarray, state) -> np.ndarray:
    """``int_(T_n, T] Delta V(T_n, u, tenor) eta(du)`` per mark."""
    date = spec.calendar.dates[n - 1]
    if spec.forward_shift is None or T <= date:
        return np.zeros(marks.shape[0])
    value = eta_integrate(lambda u: spec.on_marks(spec.forward_shift, marks, u, tenor, state, head=(n,)),
                          date, T, spec.calendar)
    return np.broadcast_to(np.asarray(value, dtype=float), (marks.shape[0],))


# ---------------------------------------------------------------------------
# Reports


@dataclass
class CheckReport:
    """Residual reports per condition plus integrability diagnostics."""

    conditions: dict = field(default_factory=dict)
    integrability: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def report(self, name: str) -> ResidualReport:
        if name not in self.conditions:
            self.conditions[name] = ResidualReport(name)
        return self.conditions[name]

    def record_integral(self, name: str, value: float):
        previous = self.integrability.get(name, 0.0)
        self.integrability[name] = value if not math.isfinite(value) else max(previous, abs(value))

    def merge(self, other: "CheckReport", prefix: str = ""):
        for name, rep in other.conditions.items():
            self.conditions[prefix + name] = rep
        for name, value in other.integrability.items():
            self.integrability[prefix + name] = value
        self.notes.extend(other.notes)

    @property
    def max_abs(self) -> float:
        return max((r.max_abs for r in self.conditions.values()), default=0.0)

    def failing(self, tolerance: float) -> list[str]:
        bad = [name for name, r in self.conditions.items() if r.max_abs > tolerance]
        bad += [f"integrability:{name}" for name, v in self.integrability.items() if not math.isfinite(v)]
        return bad

    def passed(self, tolerance: float) -> bool:
        return not self.failing(tolerance)

    def as_dict(self, tolerance: float) -> dict:
        return {"passed": self.passed(tolerance), "tolerance": tolerance, "max_abs_residual": self.max_abs,
                "failing": self.failing(tolerance),
                "conditions": {name: r.summary(tolerance) for name, r in self.conditions.items()},
                "integrability": {k: (v if math.isfinite(v) else "inf") for k, v in self.integrability.items()},
                "notes": list(self.notes)}


def _times_and_maturities(spec: HJMModelSpec, grid):
    pairs = sorted({(float(t), float(T)) for t, T in grid})
    if any(T < t for t, T in pairs):
        raise DomainError("grid pairs need t <= T")
    for t, _ in pairs:
        if t in spec.calendar:
            raise DomainError(f"drift conditions hold for a.e. t; {t} is a calendar date")
    return pairs, sorted({t for t, _ in pairs}), sorted({T for _, T in pairs})


# ---------------------------------------------------------------------------
# General HJM conditions


def short_end_residuals(spec: HJMModelSpec, t: float, state) -> dict:
    """Short-end condition per tenor, directly and via the rate/spread split.

    Returns ``{"direct": {tenor: r}, "rate": r_rate, "spread": {tenor: r_spread}}``;
    the direct residual equals ``rate - spread`` for every tenor.
    """
    law = _jump_law(spec, t, state)
    h, jump = spec.numeraire_terms(t, state, law)
    r = float(spec.short_rate(t, state))
    f0 = spec.short_end(t, 0.0, state)
    compensator = (lambda v: law.integral(v)) if law is not None else (lambda v: 0.0)
    rate = r - (f0 + h @ h + compensator(jump ** 2 / (1 + jump)))
    direct, spread = {0.0: rate}, {}
    for tenor in spec.tenors:
        alpha, h_d, jump_d = spec.spread_terms(t, tenor, state, law)
        f_d = spec.short_end(t, tenor, state)
        direct[tenor] = r - alpha - (f_d - h @ h_d + h @ h + compensator(jump / (1 + jump) * (jump - jump_d)))
        spread[tenor] = alpha - (f0 - f_d + h @ h_d + compensator(jump_d * jump / (1 + jump)))
    return {"direct": direct, "rate": rate, "spread": spread}


def drift_terms(spec: HJMModelSpec, t: float, T: float, tenor: float, state) -> dict:
    """Drift-condition residual, the drift of the discounted price and ``int |Lambda| lambda``."""
    law = _jump_law(spec, t, state)
    h, jump = spec.numeraire_terms(t, state, law)
    alpha, h_d, jump_d = spec.spread_terms(t, tenor, state, law)
    bars = integrated_coefficients(spec, t, T, tenor, state, law)
    b, g = bars.b_bar, bars.g_bar
    rhs = 0.5 * b @ b + b @ (h - h_d)
    lam_sum, lam_abs = 0.0, 0.0
    if law is not None:
        ratio = (1 + jump_d) / (1 + jump)
        with np.errstate(over="ignore"):  # an overflow surfaces as a non-finite residual
            rhs += law.integral(ratio * np.expm1(-g) + g)
            big_lambda = ratio * np.exp(-g) + jump - jump_d + g - 1
        lam_sum, lam_abs = law.integral(big_lambda), law.integral(np.abs(big_lambda))
    r = float(spec.short_rate(t, state))
    price_drift = (alpha - r - bars.a_bar + 0.5 * b @ b + spec.short_end(t, tenor, state) + b @ (h - h_d)
                   - h @ h_d + h @ h + lam_sum)
    return {"residual": bars.a_bar - rhs, "a_bar": bars.a_bar, "rhs": rhs, "price_drift": price_drift,
            "jump_integral": lam_abs}


def scheduled_terms(spec: HJMModelSpec, n: int, maturities: Sequence[float], tenor: float, state) -> dict:
    """Scheduled-jump residuals at the n-th date for a pre-jump state."""
    date = spec.calendar.dates[n - 1]
    law = _scheduled_law(spec, n, state)
    jump_b = spec.on_marks(spec.numeraire_scheduled, law.marks, state, head=(n,), positive_shift="Delta B")
    jump_a = (spec.on_marks(spec.spread_scheduled, law.marks, tenor, state, head=(n,), positive_shift="Delta A")
              if tenor else np.zeros(law.size))
    ratio = (1 + jump_a) / (1 + jump_b)
    target = math.exp(-float(spec.forward(date, date, tenor, state)))
    level = law.mean(ratio) - target
    shifts, scale = {}, 0.0
    for T in maturities:
        if T <= date:
            continue
        weight = np.exp(-integrated_shift(spec, n, T, tenor, law.marks, state))
        shifts[T] = law.mean(ratio * (weight - 1))
        scale = max(scale, law.mean(np.abs(ratio * weight)))
    return {"level": level, "target": target, "shift": shifts, "integrable": law.mean(np.abs(ratio)) + scale}


def check_hjm_conditions(spec: HJMModelSpec, grid: Iterable[tuple[float, float]], states: Sequence) -> CheckReport:
    """Evaluate the short-end, drift and scheduled-jump conditions on a grid of ``(t, T)`` pairs.

    Short-end conditions are checked at every grid time, the drift condition at
    every pair, and the scheduled-jump conditions at every calendar date up to the
    largest maturity, for the grid maturities beyond it.  ``states`` are used as
    the current state at grid times and as pre-jump states at calendar dates.
    """
    pairs, times, maturities = _times_and_maturities(spec, grid)
    report = CheckReport()
    for k, state in enumerate(states):
        for t in times:
            split = short_end_residuals(spec, t, state)
            for tenor, value in split["direct"].items():
                report.report("short_end").add(value, t=t, tenor=tenor, state=k)
                split_value = split["rate"] - split["spread"].get(tenor, 0.0)
                report.report("short_end_split_gap").add(value - split_value, t=t, tenor=tenor, state=k)
            report.report("short_end_rate").add(split["rate"], t=t, state=k)
            for tenor, value in split["spread"].items():
                report.report("short_end_spread").add(value, t=t, tenor=tenor, state=k)
        for t, T in pairs:
            for tenor in spec.with_ois:
                terms = drift_terms(spec, t, T, tenor, state)
                report.report("drift").add(terms["residual"], lhs=terms["a_bar"], rhs=terms["rhs"], t=t, T=T,
                                           tenor=tenor, state=k)
                report.report("price_drift").add(terms["price_drift"], t=t, T=T, tenor=tenor, state=k)
                report.record_integral("jump_lambda", terms["jump_integral"])
        last = max(maturities, default=-math.inf)
        for n, date in enumerate(spec.calendar.dates, start=1):
            if date > last:
                break
            for tenor in spec.with_ois:
                terms = scheduled_terms(spec, n, [T for T in maturities if T > date], tenor, state)
                report.report("scheduled_level").add(terms["level"], lhs=terms["level"] + terms["target"],
                                                     rhs=terms["target"], n=n, tenor=tenor, state=k)
                for T, value in terms["shift"].items():
                    report.report("scheduled_shift").add(value, n=n, T=T, tenor=tenor, state=k)
                report.record_integral("scheduled_ratio", terms["integrable"])
    report.notes.append("conditions are sampled on the supplied grid and states; no completeness claim")
    return report


# ---------------------------------------------------------------------------
# Equivalent measure changes with the OIS bank account as numeraire


@dataclass(frozen=True, eq=False)
class MeasureChangeSpec:
    """Density ``E(-theta.W - psi*(mu - nu) - sum_n Y_n 1_{[T_n, inf)})``.

    ``theta(t, state)``; ``psi(t, marks, state) < 1`` on the jump marks;
    ``density_jump(n, marks, state) < 1`` on the scheduled marks with conditional
    mean zero (checked on the declared law).
    """

    theta: Optional[Callable] = None
    psi: Optional[Callable] = None
    density_jump: Optional[Callable] = None


def _bank_account_only(spec: HJMModelSpec):
    if any(fn is not None for fn in (spec.numeraire_vol, spec.numeraire_jump, spec.numeraire_scheduled)):
        raise ConfigError("measure-change checks take the OIS bank account as numeraire: "
                          "H, L and Delta B must be omitted")


def _psi_on(spec, change, t, law, state) -> np.ndarray:
    if law is None:
        return np.zeros(0)
    psi = spec.on_marks(change.psi, law.marks, state, head=(t,))
    if np.any(psi >= 1):
        raise ConfigError(f"psi must be < 1 on the jump-law support; max {psi.max()} at t={t}")
    return psi


def _density_jump_on(spec, change, n, law, state) -> np.ndarray:
    y = spec.on_marks(change.density_jump, law.marks, state, head=(n,))
    if np.any(y >= 1):
        raise ConfigError(f"scheduled density factor Y_{n} must be < 1 on its support")
    mean = law.mean(y)
    if abs(mean) > MEAN_ZERO_TOLERANCE:
        raise ConfigError(f"scheduled density factor Y_{n} has conditional mean {mean:.3e}, not 0")
    return y


def check_elmm_conditions(spec: HJMModelSpec, change: MeasureChangeSpec, grid: Iterable[tuple[float, float]],
                          states: Sequence) -> CheckReport:
    """Conditions for the changed measure to be an equivalent local martingale measure
    for the OIS bank account ``exp(int r dt)``, where ``r`` is ``spec.short_rate``."""
    _bank_account_only(spec)
    pairs, times, maturities = _times_and_maturities(spec, grid)
    report = CheckReport()
    for k, state in enumerate(states):
        for t in times:
            law = _jump_law(spec, t, state)
            theta = spec.vector(change.theta, t, state)
            psi = _psi_on(spec, change, t, law, state)
            f0 = spec.short_end(t, 0.0, state)
            report.report("short_rate").add(float(spec.short_rate(t, state)) - f0, t=t, state=k)
            if law is not None:
                inside = (psi >= 0) & (psi <= 1)
                report.record_integral("psi_square", law.integral(np.where(inside, psi ** 2 / (1 - psi), 0.0)))
            for tenor in spec.tenors:
                alpha, h_d, jump_d = spec.spread_terms(t, tenor, state, law)
                premium = theta @ h_d + (law.integral(psi * jump_d) if law is not None else 0.0)
                value = alpha - (f0 - spec.short_end(t, tenor, state) + premium)
                report.report("spread_drift").add(value, t=t, tenor=tenor, state=k)
        for t, T in pairs:
            law = _jump_law(spec, t, state)
            theta = spec.vector(change.theta, t, state)
            psi = _psi_on(spec, change, t, law, state)
            for tenor in spec.with_ois:
                _, h_d, jump_d = spec.spread_terms(t, tenor, state, law)
                bars = integrated_coefficients(spec, t, T, tenor, state, law)
                b, g = bars.b_bar, bars.g_bar
                rhs = 0.5 * b @ b + b @ (theta - h_d)
                if law is not None:
                    rhs += law.integral((1 - psi) * (1 + jump_d) * np.expm1(-g) + g)
                    star = (1 - psi) * ((1 + jump_d) * np.exp(-g) - 1) - jump_d + g
                    report.record_integral("jump_lambda_star", law.integral(np.abs(star)))
                report.report("drift").add(bars.a_bar - rhs, lhs=bars.a_bar, rhs=rhs, t=t, T=T, tenor=tenor,
                                           state=k)
        last = max(maturities, default=-math.inf)
        for n, date in enumerate(spec.calendar.dates, start=1):
            if date > last:
                break
            law = _scheduled_law(spec, n, state)
            weight = 1 - _density_jump_on(spec, change, n, law, state)
            for tenor in spec.with_ois:
                jump_a = (spec.on_marks(spec.spread_scheduled, law.marks, tenor, state, head=(n,),
                                        positive_shift="Delta A") if tenor else np.zeros(law.size))
                target = math.expm1(-float(spec.forward(date, date, tenor, state)))
                report.report("scheduled_level").add(law.mean(weight * jump_a) - target, n=n, tenor=tenor, state=k)
                for T in [m for m in maturities if m > date]:
                    shift = np.exp(-integrated_shift(spec, n, T, tenor, law.marks, state))
                    report.report("scheduled_shift").add(law.mean(weight * (1 + jump_a) * (shift - 1)), n=n, T=T,
                                                         tenor=tenor, state=k)
    return report


def numeraire_from_measure_change(spec: HJMModelSpec, change: MeasureChangeSpec) -> HJMModelSpec:
    """The numeraire ``exp(int r dt) / Z'`` expressed in HJM form.

    ``r' = r + |theta|^2 + int psi^2/(1-psi) lambda``, ``H = theta``,
    ``L = psi/(1-psi)`` and ``Delta B = Y/(1-Y)``, so that the general conditions
    for this numeraire are the measure-change conditions for the bank account.
    """
    _bank_account_only(spec)

    def short_rate(t, state):
        theta = spec.vector(change.theta, t, state)
        law = _jump_law(spec, t, state)
        extra = 0.0
        if law is not None:
            psi = _psi_on(spec, change, t, law, state)
            extra = law.integral(psi ** 2 / (1 - psi))
        return float(spec.short_rate(t, state)) + theta @ theta + extra

    def numeraire_jump(t, marks, state):
        psi = np.asarray(change.psi(t, marks, state), dtype=float) if change.psi else np.zeros(marks.shape[0])
        return psi / (1 - psi)

    def numeraire_scheduled(n, marks, state):
        y = (np.asarray(change.density_jump(n, marks, state), dtype=float) if change.density_jump
             else np.zeros(marks.shape[0]))
        return y / (1 - y)

    return replace(spec, short_rate=short_rate,
                   numeraire_vol=(lambda t, state: spec.vector(change.theta, t, state)),
                   numeraire_jump=numeraire_jump, numeraire_scheduled=numeraire_scheduled,
                   description=(spec.description + " under the measure-change numeraire").strip())


# ---------------------------------------------------------------------------
# Terminal-bond numeraire


def terminal_bond_numeraire(spec: HJMModelSpec, maturity: float) -> HJMModelSpec:
    """Replace the numeraire by ``P(., T*) / P(0, T*)`` with ``T* = maturity``.

    ``H = -b_bar(t,T*,0)``, ``L = exp(-g_bar(t,x,T*,0)) - 1``,
    ``Delta B = exp(-int_(T_n,T*] Delta V(T_n,u,0) eta(du) + f(T_n-,T_n,0)) - 1`` and
    ``r = f(t,t,0) - a_bar + |b_bar|^2/2 + int (e^{-g_bar} - 1 + g_bar) lambda``.
    """
    maturity = float(maturity)

    def bars(t, state):
        return integrated_coefficients(spec, t, maturity, 0.0, state, _jump_law(spec, t, state))

    def short_rate(t, state):
        law = _jump_law(spec, t, state)
        b = integrated_coefficients(spec, t, maturity, 0.0, state, law)
        value = spec.short_end(t, 0.0, state) - b.a_bar + 0.5 * b.b_bar @ b.b_bar
        if law is not None:
            value += law.integral(np.expm1(-b.g_bar) + b.g_bar)
        return value

    def numeraire_jump(t, marks, state):
        law = MarkLaw(1.0, marks, np.ones(marks.shape[0]))
        return np.expm1(-integrated_coefficients(spec, t, maturity, 0.0, state, law).g_bar)

    def numeraire_scheduled(n, marks, state):
        date = spec.calendar.dates[n - 1]
        if date > maturity:
            return np.zeros(marks.shape[0])
        shift = integrated_shift(spec, n, maturity, 0.0, marks, state)
        return np.expm1(-shift + float(spec.forward(date, date, 0.0, state)))

    return replace(spec, short_rate=short_rate, numeraire_vol=(lambda t, state: -bars(t, state).b_bar),
                   numeraire_jump=numeraire_jump, numeraire_scheduled=numeraire_scheduled,
                   description=(spec.description + f" with terminal bond numeraire T*={maturity:g}").strip())


# ---------------------------------------------------------------------------
# Market models


@dataclass(frozen=True, eq=False)
class MarketModelSpec:
    """Forward Ibor rates ``L(t,T,delta)`` on an equidistant settlement grid over an OIS block.

    ``settlement`` holds ``T_1 < ... < T_N`` with spacing ``tenor``;
    ``initial_rates`` maps each settlement date (and optionally 0 for the spot
    rate) to ``L(0,T,delta)``.  Coefficients: ``rate(t, T, state)``,
    ``rate_drift(t, T, state)``, ``rate_vol(t, T, state)``,
    ``rate_jump(t, marks, T, state)`` and ``rate_shift(n, marks, T, state)`` for
    ``L``, ``a^L``, ``b^L``, ``g^L`` and ``Delta L``.  ``ois`` is an HJM spec for the
    OIS curve and the numeraire, sharing the state.
    """

    tenor: float
    settlement: tuple[float, ...]
    ois: HJMModelSpec
    initial_rates: Mapping[float, float]
    rate: Callable
    rate_drift: Callable
    rate_vol: Callable
    rate_jump: Optional[Callable] = None
    rate_shift: Optional[Callable] = None
    initial_state: Any = None

    def __post_init__(self):
        tenor = float(self.tenor)
        settlement = tuple(float(T) for T in self.settlement)
        if not tenor > 0 or not settlement:
            raise ConfigError("market model needs a positive tenor and at least one settlement date")
        gaps = np.diff((settlement[0] - tenor,) + settlement)
        if np.any(np.abs(gaps - tenor) > 1e-12 * max(1.0, settlement[-1])):
            raise ConfigError(f"settlement dates {settlement} are not equidistant with spacing {tenor}")
        object.__setattr__(self, "tenor", tenor)
        object.__setattr__(self, "settlement", settlement)

    @property
    def maturities(self) -> tuple[float, ...]:
        """OIS maturities ``T_1, ..., T_N, T_N + delta``."""
        return self.settlement + (self.settlement[-1] + self.tenor,)


def _rate_drift_terms(spec: MarketModelSpec, t: float, T: float, state) -> tuple[float, float, float]:
    """``a^L`` and the compensator ``b^L.(H + b_bar) - int g^L (e^{-g_bar}/(1+L) - 1) lambda``."""
    ois = spec.ois
    law = _jump_law(ois, t, state)
    h, jump = ois.numeraire_terms(t, state, law)
    bars = integrated_coefficients(ois, t, T + spec.tenor, 0.0, state, law)
    b_l = ois.vector(spec.rate_vol, t, T, state)
    compensator = b_l @ (h + bars.b_bar)
    lam_abs = 0.0
    if law is not None:
        g_l = ois.on_marks(spec.rate_jump, law.marks, T, state, head=(t,))
        integrand = g_l * (np.exp(-bars.g_bar) / (1 + jump) - 1)
        compensator -= law.integral(integrand)
        lam_abs = law.integral(np.abs(integrand))
    return float(spec.rate_drift(t, T, state)), compensator, lam_abs


def _rate_jump_terms(spec: MarketModelSpec, n: int, T: float, state) -> tuple[np.ndarray, np.ndarray, MarkLaw]:
    """``Delta L`` and the forward-measure weight ``e^{-int Delta V}/(1 + Delta B)`` per mark."""
    ois = spec.ois
    law = _scheduled_law(ois, n, state)
    jump_l = ois.on_marks(spec.rate_shift, law.marks, T, state, head=(n,))
    jump_b = ois.on_marks(ois.numeraire_scheduled, law.marks, state, head=(n,), positive_shift="Delta B")
    weight = np.exp(-integrated_shift(ois, n, T + spec.tenor, 0.0, law.marks, state)) / (1 + jump_b)
    return jump_l, weight, law


def _market_grid(spec: MarketModelSpec, times: Iterable[float]):
    times = sorted({float(t) for t in times})
    for t in times:
        if t in spec.ois.calendar:
            raise DomainError(f"drift conditions hold for a.e. t; {t} is a calendar date")
    return times


def check_market_model_conditions(spec: MarketModelSpec, times: Iterable[float], states: Sequence) -> CheckReport:
    """OIS-block conditions for the OIS maturities plus the Ibor-rate drift and jump conditions."""
    times = _market_grid(spec, times)
    report = CheckReport()
    ois_pairs = [(t, T) for t in times for T in spec.maturities if T >= t]
    report.merge(check_hjm_conditions(spec.ois, ois_pairs, states), prefix="ois_")
    for k, state in enumerate(states):
        for t in times:
            for T in [T for T in spec.settlement if T >= t]:
                drift, compensator, lam_abs = _rate_drift_terms(spec, t, T, state)
                report.report("rate_drift").add(drift - compensator, lhs=drift, rhs=compensator, t=t, T=T, state=k)
                report.record_integral("rate_jump_lambda", lam_abs)
        for n, date in enumerate(spec.ois.calendar.dates, start=1):
            for T in [T for T in spec.settlement if T >= date]:
                jump_l, weight, law = _rate_jump_terms(spec, n, T, state)
                report.report("rate_jump").add(law.mean(jump_l * weight), n=n, T=T, state=k)
                report.record_integral("rate_jump_ratio", law.mean(np.abs(jump_l * weight)))
    return report


def check_forward_measure_criterion(spec: MarketModelSpec, times: Iterable[float], states: Sequence,
                                    maturity: Optional[float] = None,
                                    martingale_asserted: bool = False) -> CheckReport:
    """Local-martingale property of ``L(., T, delta)`` under the ``(T+delta)``-forward measure.

    Requires the caller to assert that ``P(., T+delta)/X^0`` is a true martingale,
    which the forward measure needs and which pointwise checks cannot establish.
    The jump part is ``E^{T+delta}[Delta L] = E[Delta L w] / E[w]`` with
    ``w = e^{-int Delta V}/(1 + Delta B)``.
    """
    if not martingale_asserted:
        raise ConfigError("the forward-measure criterion needs P(., T+delta)/X^0 to be a true martingale; "
                          "pass martingale_asserted=True to assert it")
    times = _market_grid(spec, times)
    targets = spec.settlement if maturity is None else (float(maturity),)
    if any(T not in spec.settlement for T in targets):
        raise ConfigError(f"maturity {maturity} is not a settlement date")
    report = CheckReport(notes=["caller asserted that P(., T+delta)/X^0 is a true martingale"])
    for k, state in enumerate(states):
        for t in times:
            for T in [T for T in targets if T >= t]:
                drift, compensator, _ = _rate_drift_terms(spec, t, T, state)
                report.report("forward_drift").add(drift - compensator, t=t, T=T, state=k)
        for n, date in enumerate(spec.ois.calendar.dates, start=1):
            for T in [T for T in targets if T >= date]:
                jump_l, weight, law = _rate_jump_terms(spec, n, T, state)
                report.report("forward_jump").add(law.mean(jump_l * weight) / law.mean(weight), n=n, T=T, state=k)
    return report


# ---------------------------------------------------------------------------
# Affine models in HJM form


def affine_to_hjm(model: AffineModel) -> HJMModelSpec:
    """Express an affine model's coefficients pointwise in HJM form.

    With ``Sigma Sigma^T = alpha(X)`` and the state as Brownian dimension:
    ``a = phi^T beta(X)``, ``b = Sigma phi``, ``g(x) = phi^T x``.  Between dates the
    numeraire is the bank account (``H = 0``, ``L = 0``); spreads ``exp(psi^T X)`` have
    ``H^delta = Sigma psi`` and ``L^delta = e^{psi^T x} - 1``.  Scheduled jumps ``Delta X = shift + M X + L eps``
    give ``Delta V = phi(T_n,T)^T Delta X`` and ``Delta B = e^{psi_{T_n}^T Delta X} - 1``.
    """
    chars, loadings, d = model.characteristics, model.loadings, model.dim
    roots: dict[bytes, np.ndarray] = {}

    def beta(x):
        return chars.drift[0] + np.asarray(x) @ chars.drift[1:]

    def alpha(x):
        return chars.diffusion[0] + np.tensordot(np.asarray(x), chars.diffusion[1:], axes=1)

    def sigma(x):
        key = np.asarray(x, dtype=float).tobytes()
        if key not in roots:
            vals, vecs = np.linalg.eigh(alpha(x))
            roots[key] = vecs @ np.diag(np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T
        return roots[key]

    laws: list[Optional[MarkLaw]] = []
    for law in chars.jumps:
        if law is None:
            laws.append(None)
        elif isinstance(law, GaussianJumpLaw):
            laws.append(MarkLaw.gaussian(law.mean, law.cov, law.intensity, law.nodes))
        else:
            laws.append(MarkLaw(law.intensity, law.marks, law.weights))

    def jump_law(t, x):
        parts = [(1.0 if i == 0 else float(x[i - 1]), law) for i, law in enumerate(laws) if law is not None]
        return MarkLaw.mixture(parts) if parts else None

    def exponent_drift(loading, t, x):
        value = loading @ beta(x) + 0.5 * loading @ alpha(x) @ loading
        law = jump_law(t, x)
        if law is not None:
            p = law.marks @ loading
            value += law.integral(np.expm1(p) - p)
        return float(value)

    def phi(tenor):
        return loadings.forward[float(tenor)]

    def forward(t, T, tenor, x):
        return float(model.forward_rate(t, T, tenor, np.asarray(x, dtype=float), t in model.calendar))

    def scheduled_law(n, x):
        if model.dynamics is None or model.dynamics.jump is None:
            raise UnsupportedLawError("affine model without explicit scheduled-jump dynamics")
        shift, matrix, loading = model.dynamics.jump(model.calendar.dates[n - 1])
        return MarkLaw.gaussian(shift + matrix @ np.asarray(x, dtype=float), loading @ loading.T)

    def spread(tenor):
        return loadings.spread_loading(tenor, d)

    return HJMModelSpec(
        calendar=model.calendar, dim=d, tenors=tuple(model.tenors.tenors),
        forward=forward,
        drift=lambda t, u, tenor, x: float(phi(tenor)(t, u) @ beta(x)),
        volatility=lambda t, u, tenor, x: sigma(x) @ phi(tenor)(t, u),
        jump_size=lambda t, marks, u, tenor, x: marks @ phi(tenor)(t, u),
        short_rate=lambda t, x: float(model.short_rate(np.asarray(x, dtype=float))),
        numeraire_scheduled=(lambda n, marks, x: np.expm1(
            marks @ loadings.jump_loading(model.calendar.dates[n - 1], d))) if loadings.numeraire_jump else None,
        spread_drift=lambda t, tenor, x: exponent_drift(spread(tenor), t, x),
        spread_vol=lambda t, tenor, x: sigma(x) @ spread(tenor),
        spread_jump=lambda t, marks, tenor, x: np.expm1(marks @ spread(tenor)),
        spread_scheduled=lambda n, marks, tenor, x: np.expm1(marks @ spread(tenor)),
        forward_shift=lambda n, marks, u, tenor, x: marks @ phi(tenor)(model.calendar.dates[n - 1], u),
        jump_law=jump_law if any(law is not None for law in laws) else None,
        scheduled_law=scheduled_law if model.calendar.dates else None,
        initial_spreads=dict(model.initial_spreads), initial_state=model.initial_state,
        description=f"{model.family} in HJM form")


# ---------------------------------------------------------------------------
# Embedding a market model into an HJM model


@dataclass(frozen=True, eq=False)
class EmbeddedState:
    """State of an embedded model: the market-model state, the spread ``S^delta`` and,
    optionally, tenor forward rates ``{T_i: f(t,T_i,delta)}`` carried along a path.

    Without carried forwards, ``f(t,T_i,delta)`` is derived from the Ibor rates,
    the OIS forwards and the spread.
    """

    market: Any
    spread: Any
    forwards: Optional[Mapping[float, Any]] = None


def spread_jump_from_fixings(tenor: float, fixing: float, previous_fixing: float, bond: float,
                             previous_bond: float) -> float:
    """``Delta A`` at ``T_n`` from consecutive fixings ``L(T_k,T_k,delta)`` and one-period
    OIS bonds ``P(T_k, T_{k+1})`` for ``k = n`` and ``k = n-1``."""
    return (1 + tenor * fixing) / (1 + tenor * previous_fixing) * bond / previous_bond - 1


def embed_market_model(spec: MarketModelSpec) -> HJMModelSpec:
    """Single-tenor HJM model with purely atomic maturity measure reproducing the Ibor rates.

    The settlement grid must be ``T_i = i delta`` (``L(0,0,delta)`` is the spot
    rate) and the OIS calendar purely atomic at ``T_1, ..., T_{N+1}``.  The spread
    has ``alpha = 0``, ``H^delta = 0`` and ``L^delta = 0`` (the canonical choice;
    the tenor volatility at the first live maturity and ``H^delta`` may be traded
    against each other).  After the last settlement date the spread jumps with the
    numeraire, and the tenor forward at ``T_{N+1}`` is identically 0.
    """
    ois, delta = spec.ois, spec.tenor
    settlement = spec.settlement
    n_rates = len(settlement)
    dates = spec.maturities
    if abs(settlement[0] - delta) > 1e-12:
        raise ConfigError(f"embedding needs settlement dates i*delta starting at {delta}, got {settlement[0]}")
    if ois.calendar.continuous or tuple(ois.calendar.dates) != dates:
        raise ConfigError(f"embedding needs a purely atomic OIS calendar at {dates}")
    if 0.0 not in spec.initial_rates or any(T not in spec.initial_rates for T in settlement):
        raise ConfigError("initial rates needed for the spot (key 0) and every settlement date")
    for T, value in spec.initial_rates.items():
        if not 1 + delta * float(value) > 0:
            raise DomainError(f"embedding domain violated: L(0,{T},delta) = {value} <= -1/delta")
    index = {T: i for i, T in enumerate(dates, start=1)}
    d = ois.dim

    def first_live(t):
        """Smallest index ``i`` with ``T_i > t`` (the live period after ``t``)."""
        return next((i for i, T in enumerate(dates, start=1) if T > t), len(dates) + 1)

    def first_open(t):
        """Smallest index ``i`` with ``T_i >= t`` (the period seen from a left limit)."""
        return next((i for i, T in enumerate(dates, start=1) if T >= t), len(dates) + 1)

    def one_plus(t, i, market):
        value = 1 + delta * np.asarray(spec.rate(t, dates[i - 1], market), dtype=float)
        if np.any(value <= 0):
            raise DomainError(f"embedding domain violated: 1 + delta L(t,{dates[i - 1]},delta) <= 0 at t={t}")
        return value

    def scaled_vol(t, i, market):
        return (delta * np.asarray(spec.rate_vol(t, dates[i - 1], market), dtype=float)
                / one_plus(t, i, market)[..., None])

    def scaled_jump(t, marks, i, market):
        if spec.rate_jump is None:
            return np.zeros(marks.shape[0])
        value = 1 + delta * np.asarray(spec.rate_jump(t, marks, dates[i - 1], market), dtype=float) / one_plus(
            t, i, market)
        if np.any(value <= 0):
            raise DomainError("embedding domain violated by an Ibor-rate jump")
        return value

    def ois_vol(t, i, market):
        return np.asarray(ois.volatility(t, dates[i - 1], 0.0, market), dtype=float)

    def ois_jump(t, marks, i, market):
        if ois.jump_size is None:
            return np.zeros(marks.shape[0])
        return np.asarray(ois.jump_size(t, marks, dates[i - 1], 0.0, market), dtype=float)

    def tenor_vol(t, i, market):
        first = first_live(t)
        if i < first or i > n_rates:
            return np.zeros(np.shape(ois_vol(t, min(i, len(dates)), market)))
        if i == first:
            return ois_vol(t, i, market) + ois_vol(t, i + 1, market) - scaled_vol(t, i, market)
        return ois_vol(t, i + 1, market) - (scaled_vol(t, i, market) - scaled_vol(t, i - 1, market))

    def tenor_jump(t, marks, i, market):
        first = first_live(t)
        if i < first or i > n_rates:
            return np.zeros(marks.shape[0])
        if i == first:
            return ois_jump(t, marks, i + 1, market) + ois_jump(t, marks, i, market) - np.log(
                scaled_jump(t, marks, i, market))
        return ois_jump(t, marks, i + 1, market) - np.log(
            scaled_jump(t, marks, i, market) / scaled_jump(t, marks, i - 1, market))

    def drift_rhs(t, i, market):
        """Right side of the drift condition for the tenor curve at ``T_i`` (0 before the live period)."""
        first = first_live(t)
        if i < first:
            return 0.0
        b_bar = sum(tenor_vol(t, k, market) for k in range(first, i + 1))
        h = np.asarray(ois.numeraire_vol(t, market), dtype=float) if ois.numeraire_vol else 0.0
        value = 0.5 * np.sum(b_bar * b_bar, axis=-1) + np.sum(b_bar * h, axis=-1)
        law = _jump_law(ois, t, market)
        if law is not None:
            g_bar = sum(tenor_jump(t, law.marks, k, market) for k in range(first, i + 1))
            jump = ois.on_marks(ois.numeraire_jump, law.marks, market, head=(t,), positive_shift="L")
            value = value + law.integral(np.expm1(-g_bar) / (1 + jump) + g_bar)
        return value

    def rate_ratio(n, marks, i, market):
        """``(1 + delta L(T_n,T_i)) / (1 + delta L(T_n-,T_i))`` per mark."""
        date = dates[n - 1]
        level = one_plus(date, i, market)
        jump = (np.asarray(spec.rate_shift(n, marks, dates[i - 1], market), dtype=float)
                if spec.rate_shift is not None else 0.0)
        ratio = (level + delta * jump) / level
        if np.any(ratio <= 0):
            raise DomainError("embedding domain violated by a scheduled Ibor-rate jump")
        return np.broadcast_to(ratio, np.broadcast_shapes(np.shape(ratio), (marks.shape[0],)))

    def ois_shift(n, marks, i, market):
        if ois.forward_shift is None:
            return np.zeros(marks.shape[0])
        return np.asarray(ois.forward_shift(n, marks, dates[i - 1], 0.0, market), dtype=float)

    # -- HJM coefficients ----------------------------------------------------

    def forward(t, T, tenor, state):
        if tenor == 0:
            return ois.forward(t, T, 0.0, state.market)
        i = index[T]
        if i > n_rates:
            return 0.0
        if state.forwards is not None:
            return state.forwards[T]
        market = state.market
        f_next = np.asarray(ois.forward(t, dates[i], 0.0, market), dtype=float)
        if i == first_open(t):
            f_now = np.asarray(ois.forward(t, T, 0.0, market), dtype=float)
            return np.log(state.spread) + f_now + f_next - np.log(one_plus(t, i, market))
        return f_next - np.log(one_plus(t, i, market) / one_plus(t, i - 1, market))

    def drift(t, u, tenor, state):
        if tenor == 0:
            return ois.drift(t, u, 0.0, state.market)
        i = index.get(u)
        if i is None or u <= t or i > n_rates:
            return 0.0
        return drift_rhs(t, i, state.market) - drift_rhs(t, i - 1, state.market)

    def volatility(t, u, tenor, state):
        if tenor == 0:
            return ois.volatility(t, u, 0.0, state.market)
        i = index.get(u)
        if i is None or u <= t:
            return np.zeros(d)
        return tenor_vol(t, i, state.market)

    def jump_size(t, marks, u, tenor, state):
        if tenor == 0:
            return ois.jump_size(t, marks, u, 0.0, state.market) if ois.jump_size else np.zeros(marks.shape[0])
        i = index.get(u)
        if i is None or u <= t:
            return np.zeros(marks.shape[0])
        return tenor_jump(t, marks, i, state.market)

    def forward_shift(n, marks, u, tenor, state):
        if tenor == 0:
            return ois_shift(n, marks, index[u], state.market) if u in index else np.zeros(marks.shape[0])
        i = index.get(u)
        if i is None or i <= n or i > n_rates:
            return np.zeros(marks.shape[0])
        market = state.market
        return ois_shift(n, marks, i + 1, market) - np.log(
            rate_ratio(n, marks, i, market) / rate_ratio(n, marks, i - 1, market))

    def numeraire_scheduled(n, marks, state):
        if ois.numeraire_scheduled is None:
            return np.zeros(marks.shape[0])
        return ois.numeraire_scheduled(n, marks, state.market)

    def spread_scheduled(n, marks, tenor, state):
        if n > n_rates:
            return numeraire_scheduled(n, marks, state)
        date = dates[n - 1]
        market = state.market
        exponent = (np.asarray(ois.forward(date, date, 0.0, market), dtype=float)
                    - np.asarray(forward(date, date, tenor, state), dtype=float) - ois_shift(n, marks, n + 1, market))
        return rate_ratio(n, marks, n, market) * np.exp(exponent) - 1

    # -- initial values --------------------------------------------------------

    market0 = spec.initial_state
    ois_initial = {T: float(ois.forward(0.0, T, 0.0, market0)) for T in dates}
    level = {T: 1 + delta * float(L) for T, L in spec.initial_rates.items()}
    previous = (0.0,) + settlement[:-1]
    tenor_initial = {T: ois_initial[dates[i + 1]] - math.log(level[T] / level[previous[i]])
                     for i, T in enumerate(settlement)}
    tenor_initial[dates[-1]] = 0.0
    spread0 = level[0.0] * math.exp(-ois_initial[dates[0]])

    wrap = lambda fn: (lambda *args: fn(*args[:-1], args[-1].market)) if fn is not None else None
    return HJMModelSpec(
        calendar=ois.calendar, dim=d, tenors=(delta,), forward=forward, drift=drift, volatility=volatility,
        short_rate=wrap(ois.short_rate), numeraire_vol=wrap(ois.numeraire_vol),
        numeraire_jump=wrap(ois.numeraire_jump), numeraire_scheduled=numeraire_scheduled,
        spread_drift=_zero, spread_vol=lambda t, tenor, state: np.zeros(d),
        spread_jump=lambda t, marks, tenor, state: np.zeros(marks.shape[0]),
        spread_scheduled=spread_scheduled, jump_size=jump_size, forward_shift=forward_shift,
        jump_law=wrap(ois.jump_law), scheduled_law=wrap(ois.scheduled_law),
        initial_curves={0.0: ois_initial, delta: tenor_initial}, initial_spreads={delta: spread0},
        initial_state=EmbeddedState(market0, spread0),
        description=f"embedded market model (tenor {delta:g}, {n_rates} settlement dates)")
