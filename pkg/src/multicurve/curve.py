"""Atomic-measure calculus, forward-curve snapshots and the basic pricing kernel.

The maturity measure is ``eta(du) = du + sum_n delta_{T_n}(du)``: Lebesgue measure
plus a unit atom at every date of a discontinuity calendar.  A forward curve is a
density in maturity plus an atom value at each calendar date, and bond prices are
``exp(-int_(t,T] f(t,u,delta) eta(du))``.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.integrate import quad_vec

from .errors import ConfigError, DomainError

# Absolute and relative tolerances for the Lebesgue part of eta-integrals.
QUAD_EPSABS = 1e-14
QUAD_EPSREL = 1e-13


def _as_time(value) -> float:
    return float(Fraction(str(value).strip())) if isinstance(value, str) else float(value)


@dataclass(frozen=True)
class DiscontinuityCalendar:
    """Scheduled discontinuity dates ``T_1 < T_2 < ...`` up to a horizon.

    ``continuous=False`` drops the Lebesgue part of the maturity measure, leaving
    a purely atomic measure.  That variant is used by the market-model embedding.
    """

    dates: tuple[float, ...] = ()
    horizon: float = math.inf
    continuous: bool = True

    def __post_init__(self):
        dates = tuple(float(d) for d in self.dates)
        object.__setattr__(self, "dates", dates)
        if any(not math.isfinite(d) or d < 0 for d in dates):
            raise ConfigError(f"calendar dates must be finite and non-negative: {dates}")
        if any(b <= a for a, b in zip(dates, dates[1:])):
            raise ConfigError(f"calendar dates must be strictly increasing: {dates}")
        if dates and dates[-1] > self.horizon:
            raise ConfigError(f"calendar date {dates[-1]} lies beyond the horizon {self.horizon}")

    def __contains__(self, t) -> bool:
        return float(t) in self.dates

    def index(self, t: float) -> int:
        """1-based index n of the calendar date equal to ``t``."""
        try:
            return self.dates.index(float(t)) + 1
        except ValueError:
            raise DomainError(f"{t} is not a calendar date") from None

    def atoms_in(self, a: float, b: float, closed_left: bool = False) -> tuple[float, ...]:
        """Calendar dates in ``(a, b]``, or in ``[a, b]`` when ``closed_left``."""
        if closed_left:
            return tuple(d for d in self.dates if a <= d <= b)
        return tuple(d for d in self.dates if a < d <= b)

    def measure(self, a: float, b: float) -> float:
        """``eta((a, b])``."""
        if b < a:
            raise DomainError(f"empty interval ({a}, {b}] has b < a")
        return (b - a if self.continuous else 0.0) + len(self.atoms_in(a, b))

    @classmethod
    def from_csv(cls, path, reference_date: dt.date | str | None = None,
                 horizon: float = math.inf, continuous: bool = True) -> "DiscontinuityCalendar":
        """Read one ISO-8601 date or decimal year fraction per line.

        ISO dates are converted to ACT/365F year fractions from ``reference_date``,
        which is therefore required when any line is a date.
        """
        if isinstance(reference_date, str):
            reference_date = dt.date.fromisoformat(reference_date)
        dates = []
        with open(path, newline="") as handle:
            for row in csv.reader(handle):
                if not row or not row[0].strip() or row[0].lstrip().startswith("#"):
                    continue
                text = row[0].strip()
                if re.fullmatch(r"\d{4}-\d{2}-\d{2}", text):
                    if reference_date is None:
                        raise ConfigError(f"ISO date {text!r} in {path} needs a reference date")
                    try:
                        day = dt.date.fromisoformat(text)
                    except ValueError as exc:
                        raise ConfigError(f"bad calendar line {text!r} in {path}") from exc
                    dates.append((day - reference_date).days / 365.0)
                else:
                    try:
                        dates.append(_as_time(text))
                    except (ValueError, ZeroDivisionError) as exc:
                        raise ConfigError(f"bad calendar line {text!r} in {path}") from exc
        return cls(tuple(dates), horizon=horizon, continuous=continuous)


@dataclass(frozen=True)
class TenorSet:
    """Positive tenors ``delta_1 < ... < delta_m``.  The OIS sentinel 0 is implicit."""

    tenors: tuple[float, ...] = ()

    def __post_init__(self):
        tenors = tuple(float(d) for d in self.tenors)
        object.__setattr__(self, "tenors", tenors)
        if any(not d > 0 for d in tenors):
            raise ConfigError(f"tenors must be strictly positive: {tenors}")
        if any(b <= a for a, b in zip(tenors, tenors[1:])):
            raise ConfigError(f"tenors must be strictly increasing: {tenors}")

    @property
    def with_ois(self) -> tuple[float, ...]:
        return (0.0,) + self.tenors

    def __iter__(self):
        return iter(self.tenors)

    def __len__(self):
        return len(self.tenors)


def eta_integrate(g: Callable, a: float, b: float, calendar: DiscontinuityCalendar,
                  closed_left: bool = False):
    """``int_(a,b] g d eta``: Lebesgue integral plus ``g`` evaluated at calendar dates.

    ``g`` may return a scalar or a 1-D array.  With ``closed_left`` the interval is
    ``[a, b]``, so an atom at ``a`` is included.  The Lebesgue part is integrated
    adaptively on the sub-intervals between calendar dates, so ``g`` may jump at a date
    without costing accuracy.  Quadrature nodes are interior, so ``g`` is evaluated
    at a calendar date only for its atom.
    """
    if b < a:
        raise DomainError(f"interval ({a}, {b}] has b < a")
    atoms = calendar.atoms_in(a, b, closed_left=closed_left)
    total = 0.0
    if calendar.continuous and b > a:
        cuts = [a] + [d for d in atoms if a < d < b] + [b]
        for lo, hi in zip(cuts, cuts[1:]):
            if hi > lo:
                value, _ = quad_vec(g, lo, hi, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=2000)
                total = total + value
    for d in atoms:
        total = total + np.asarray(g(d), dtype=float)
    total = np.asarray(total, dtype=float)
    if not np.all(np.isfinite(total)):
        raise DomainError(f"non-finite integrand on ({a}, {b}]")
    return float(total) if total.ndim == 0 else total


def decay_integral(rate, tau):
    """``int_0^tau exp(-rate*v) dv``, equal to ``tau`` when ``rate`` is 0."""
    if isinstance(rate, (int, float)) and isinstance(tau, (int, float)):
        return float(tau) if rate == 0 else -math.expm1(-rate * tau) / rate
    rate = np.asarray(rate, dtype=float)
    tau = np.asarray(tau, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(rate == 0.0, tau, -np.expm1(-rate * tau) / np.where(rate == 0.0, 1.0, rate))
    return float(out) if out.ndim == 0 else out


def _linear_primitive(grid: np.ndarray, values: np.ndarray, cumulative: np.ndarray, u: float) -> float:
    """Primitive from ``grid[0]`` of the piecewise-linear interpolant, flat beyond the ends."""
    if u <= grid[0]:
        return (u - grid[0]) * values[0]
    if u >= grid[-1]:
        return cumulative[-1] + (u - grid[-1]) * values[-1]
    k = int(np.searchsorted(grid, u, side="right")) - 1
    width = grid[k + 1] - grid[k]
    h = u - grid[k]
    slope = (values[k + 1] - values[k]) / width if width > 0 else 0.0
    return cumulative[k] + h * (values[k] + 0.5 * slope * h)


@dataclass(frozen=True, eq=False)
class ForwardCurve:
    """One tenor's forward curve at a fixed evaluation time.

    The density is linear between grid maturities and flat beyond both ends.  A
    maturity may appear twice in the grid to encode a jump of the density there.
    """

    maturities: np.ndarray
    densities: np.ndarray
    atoms: Mapping[float, float] = field(default_factory=dict)

    def __post_init__(self):
        grid = np.asarray(self.maturities, dtype=float)
        values = np.asarray(self.densities, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape or grid.size == 0:
            raise ConfigError("forward curve needs matching non-empty maturity and density arrays")
        if np.any(np.diff(grid) < 0):
            raise ConfigError("forward curve maturities must be non-decreasing")
        if not (np.all(np.isfinite(grid)) and np.all(np.isfinite(values))):
            raise DomainError("forward curve contains non-finite values")
        atoms = {float(k): float(v) for k, v in dict(self.atoms).items()}
        if not all(math.isfinite(v) for v in atoms.values()):
            raise DomainError("forward curve atom values must be finite")
        object.__setattr__(self, "maturities", grid)
        object.__setattr__(self, "densities", values)
        object.__setattr__(self, "atoms", atoms)
        widths = np.diff(grid)
        segments = 0.5 * widths * (values[1:] + values[:-1])
        object.__setattr__(self, "_cumulative", np.concatenate(([0.0], np.cumsum(segments))))

    def density(self, u):
        return np.interp(u, self.maturities, self.densities)

    def __call__(self, u: float) -> float:
        """Maturity-indexed value: the atom value at a calendar date, else the density."""
        u = float(u)
        if u in self.atoms:
            return self.atoms[u]
        return float(self.density(u))

    def density_integral(self, a: float, b: float) -> float:
        """``int_a^b`` of the density, exact for the piecewise-linear interpolant."""
        return (_linear_primitive(self.maturities, self.densities, self._cumulative, b)
                - _linear_primitive(self.maturities, self.densities, self._cumulative, a))


@dataclass(frozen=True, eq=False)
class ForwardCurveField:
    """Forward curves ``u -> f(t, u, delta)`` for every tenor in ``{0} U D`` at time ``t``."""

    time: float
    calendar: DiscontinuityCalendar
    curves: Mapping[float, ForwardCurve]

    def __post_init__(self):
        curves = {float(k): v for k, v in dict(self.curves).items()}
        object.__setattr__(self, "curves", curves)
        if 0.0 not in curves:
            raise ConfigError("a forward curve field needs the OIS curve (tenor 0)")
        dates = set(self.calendar.dates)
        for tenor, curve in curves.items():
            stray = set(curve.atoms) - dates
            if stray:
                raise ConfigError(f"tenor {tenor}: atom values off the calendar at {sorted(stray)}")

    @property
    def tenors(self) -> tuple[float, ...]:
        return tuple(sorted(self.curves))

    def curve(self, tenor: float) -> ForwardCurve:
        try:
            return self.curves[float(tenor)]
        except KeyError:
            raise DomainError(f"no forward curve for tenor {tenor}") from None

    def log_discount(self, t: float, T: float, tenor: float) -> float:
        """``int_(t,T] f(t,u,delta) eta(du)`` computed in closed form."""
        if T < t:
            raise DomainError(f"maturity {T} precedes evaluation time {t}")
        if T > self.calendar.horizon:
            raise DomainError(f"maturity {T} lies beyond the horizon {self.calendar.horizon}")
        curve = self.curve(tenor)
        total = curve.density_integral(t, T) if self.calendar.continuous else 0.0
        for d in self.calendar.atoms_in(t, T):
            if d not in curve.atoms:
                raise ConfigError(f"tenor {tenor}: missing atom value at calendar date {d}")
            total += curve.atoms[d]
        return total

    @classmethod
    def flat(cls, rate: float, calendar: DiscontinuityCalendar, tenors: Sequence[float] = (0.0,),
             time: float = 0.0, atoms: Mapping[float, float] | None = None) -> "ForwardCurveField":
        atoms = dict(atoms or {})
        for d in calendar.dates:
            atoms.setdefault(d, 0.0)
        curve = ForwardCurve(np.array([time]), np.array([rate]), atoms)
        return cls(time, calendar, {float(tn): curve for tn in set((0.0,) + tuple(tenors))})


@dataclass(frozen=True)
class SpreadState:
    """Multiplicative spreads ``S_t^delta > 0`` per positive tenor."""

    values: Mapping[float, float] = field(default_factory=dict)

    def __post_init__(self):
        values = {float(k): float(v) for k, v in dict(self.values).items()}
        if any(not (v > 0 and math.isfinite(v)) for v in values.values()):
            raise DomainError(f"spreads must be finite and strictly positive: {values}")
        object.__setattr__(self, "values", values)

    def __getitem__(self, tenor: float) -> float:
        return self.values[float(tenor)]


def bond_price(curve: ForwardCurveField, t: float, T: float, tenor: float) -> float:
    """``P(t,T,delta) = exp(-int_(t,T] f(t,u,delta) eta(du))``; exactly 1 when ``T == t``."""
    if T < t:
        raise DomainError(f"maturity {T} precedes evaluation time {t}")
    if T == t:
        return 1.0
    return math.exp(-curve.log_discount(t, T, tenor))


def fra_price(spread: float, tenor_bond: float, ois_bond: float, tenor: float, strike: float) -> float:
    """Value at t of the FRA paying ``delta*(L(T,T,delta) - K)`` at ``T + delta``."""
    return spread * tenor_bond - (1.0 + tenor * strike) * ois_bond


def forward_ibor_rate(spread: float, tenor_bond: float, ois_bond: float, tenor: float) -> float:
    """Strike making the FRA worth zero: ``(S * P(t,T,delta) / P(t,T+delta) - 1) / delta``."""
    if tenor == 0:
        raise DomainError("no Ibor rate on the OIS curve (tenor 0)")
    if not np.all(np.asarray(ois_bond) > 0):
        raise DomainError(f"OIS bond price must be positive, got {ois_bond}")
    return (spread * tenor_bond / ois_bond - 1.0) / tenor


def spread_from_curves(curve: ForwardCurveField, spot_rate: float, tenor: float, t: float) -> float:
    """``S_t^delta = P(t, t+delta) * (1 + delta * L(t,t,delta))``."""
    if not tenor > 0:
        raise DomainError("spreads exist for positive tenors only")
    growth = 1.0 + tenor * spot_rate
    if growth <= 0:
        raise DomainError(f"1 + delta*L = {growth} is not positive, so the spread would not be")
    return bond_price(curve, t, t + tenor, 0.0) * growth


def format_curve_csv(field_: ForwardCurveField) -> str:
    """``(tenor, maturity, density_value, atom_value)`` rows as CSV text.

    The atom column is blank except at calendar dates.
    """
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["tenor", "maturity", "density_value", "atom_value"])
    for tenor in field_.tenors:
        curve = field_.curves[tenor]
        for u, v in zip(curve.maturities, curve.densities):
            atom = curve.atoms.get(float(u))
            writer.writerow([format(tenor, ".17g"), format(u, ".17g"), format(v, ".17g"),
                             "" if atom is None else format(atom, ".17g")])
    return buffer.getvalue()


def write_curve_csv(path, field_: ForwardCurveField) -> None:
    """Write the curve snapshot rows of :func:`format_curve_csv` to ``path``."""
    Path(path).write_text(format_curve_csv(field_))


def read_curve_csv(path, calendar: DiscontinuityCalendar, time: float = 0.0) -> ForwardCurveField:
    rows: dict[float, list[tuple[float, float]]] = {}
    atoms: dict[float, dict[float, float]] = {}
    with open(Path(path), newline="") as handle:
        for record in csv.DictReader(handle):
            try:
                tenor = float(record["tenor"])
                maturity = float(record["maturity"])
                rows.setdefault(tenor, []).append((maturity, float(record["density_value"])))
                if record.get("atom_value", "").strip():
                    atoms.setdefault(tenor, {})[maturity] = float(record["atom_value"])
            except (KeyError, ValueError) as exc:
                raise ConfigError(f"malformed curve row {record} in {path}") from exc
    curves = {}
    for tenor, pairs in rows.items():
        grid, values = zip(*pairs)
        curves[tenor] = ForwardCurve(np.array(grid), np.array(values), atoms.get(tenor, {}))
    return ForwardCurveField(time, calendar, curves)
