"""A Gaussian forward Ibor market model over a discretely compounded OIS curve.

Settlement dates are ``T_i = i delta`` for ``i = 1..N`` and the OIS curve has unit
atoms at ``T_1, ..., T_{N+1}`` only.  The OIS forwards ``f(t,T_j,0)`` have
constant volatilities ``sigma_j`` and jump at ``T_n`` by
``gamma_j eps + (Gamma_j^2 - Gamma_{j-1}^2)/2`` with ``Gamma_j = sum_{n<k<=j} gamma_k``
and a standard normal ``eps``.  The numeraire is the discrete bank account
``prod (1 + Delta B)`` with ``1 + Delta B_{T_n} = exp(f(T_n-,T_n,0))``.

The log rates ``l_i = log(1 + delta L(t,T_i,delta))`` have constant volatility
``v_i``, drift ``v_i . b_bar(t,T_{i+1},0) - |v_i|^2/2`` and, for ``i >= n``, jump at
``T_n`` by ``s_i eps + s_i Gamma_{i+1} - s_i^2/2``.  These choices satisfy the
market-model drift and jump conditions, and the OIS dynamics satisfy the HJM
conditions for the discrete bank account.

Between dates all coefficients are constant, so the log-Euler scheme used by
:func:`simulate_market` is exact in distribution.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .checker import EmbeddedState, HJMModelSpec, MarketModelSpec, MarkLaw
from .curve import DiscontinuityCalendar
from .errors import ConfigError, DomainError
from .sim import path_normals


@dataclass(frozen=True, eq=False)
class MarketState:
    """OIS forwards ``f(t,T_j,0)`` for ``j = 1..N+1`` and log rates ``l_i`` for ``i = 0..N``.

    Arrays may carry leading path axes.
    """

    forwards: np.ndarray
    log_rates: np.ndarray


def _matrix(value, rows: int, dim: int, name: str) -> np.ndarray:
    array = np.asarray(value, dtype=float)
    if array.ndim == 0:
        array = np.full((rows, dim), float(array))
    elif array.ndim == 1 and array.size == dim:
        array = np.tile(array, (rows, 1))
    if array.shape != (rows, dim):
        raise ConfigError(f"{name} needs shape ({rows}, {dim}) or a broadcastable scalar/row")
    return array


def _vector(value, rows: int, name: str) -> np.ndarray:
    array = np.asarray(value, dtype=float)
    array = np.full(rows, float(array)) if array.ndim == 0 else array
    if array.shape != (rows,):
        raise ConfigError(f"{name} needs {rows} entries or a scalar")
    return array


@dataclass(frozen=True, eq=False)
class GaussianMarketModel:
    """Parameters of the Gaussian market model (index ``j = 1..N+1`` is stored at ``j-1``).

    ``initial_rates[i]`` is ``L(0,T_i,delta)`` for ``i = 0..N`` with ``T_0 = 0`` (the
    spot rate).  ``rate_vols`` and ``rate_jumps`` are indexed ``i = 0..N``; entry 0 is
    unused because the spot rate is already fixed.
    """

    tenor: float
    periods: int
    dim: int
    initial_forwards: np.ndarray
    initial_rates: np.ndarray
    ois_vols: np.ndarray
    rate_vols: np.ndarray
    ois_jumps: np.ndarray
    rate_jumps: np.ndarray

    def __post_init__(self):
        if not self.tenor > 0 or int(self.periods) < 1 or int(self.dim) < 1:
            raise ConfigError("market model needs tenor > 0, at least one period and one factor")
        n = int(self.periods)
        object.__setattr__(self, "periods", n)
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "initial_forwards", _vector(self.initial_forwards, n + 1, "initial_forwards"))
        object.__setattr__(self, "initial_rates", _vector(self.initial_rates, n + 1, "initial_rates"))
        object.__setattr__(self, "ois_vols", _matrix(self.ois_vols, n + 1, self.dim, "ois_vols"))
        object.__setattr__(self, "rate_vols", _matrix(self.rate_vols, n + 1, self.dim, "rate_vols"))
        object.__setattr__(self, "ois_jumps", _vector(self.ois_jumps, n + 1, "ois_jumps"))
        object.__setattr__(self, "rate_jumps", _vector(self.rate_jumps, n + 1, "rate_jumps"))

    @classmethod
    def from_config(cls, config: Mapping) -> "GaussianMarketModel":
        known = {"tenor", "periods", "dim", "forward", "rate", "ois_vol", "rate_vol", "ois_jump", "rate_jump"}
        unknown = set(config) - known
        if unknown:
            raise ConfigError(f"unknown market-model keys {sorted(unknown)}; valid keys: {sorted(known)}")
        return cls(tenor=float(config.get("tenor", 0.5)), periods=int(config.get("periods", 4)),
                   dim=int(config.get("dim", 1)), initial_forwards=config.get("forward", 0.02),
                   initial_rates=config.get("rate", 0.025), ois_vols=config.get("ois_vol", 0.0),
                   rate_vols=config.get("rate_vol", 0.0), ois_jumps=config.get("ois_jump", 0.0),
                   rate_jumps=config.get("rate_jump", 0.0))

    @property
    def dates(self) -> tuple[float, ...]:
        """OIS atoms ``T_1, ..., T_{N+1}``."""
        return tuple(self.tenor * j for j in range(1, self.periods + 2))

    @property
    def settlement(self) -> tuple[float, ...]:
        return self.dates[:-1]

    @property
    def calendar(self) -> DiscontinuityCalendar:
        return DiscontinuityCalendar(self.dates, self.dates[-1], continuous=False)

    @property
    def initial_state(self) -> MarketState:
        with np.errstate(invalid="ignore", divide="ignore"):
            log_rates = np.log1p(self.tenor * self.initial_rates)
        return MarketState(self.initial_forwards.copy(), log_rates)

    # -- helpers --------------------------------------------------------------

    def index(self, T: float) -> int:
        """1-based index ``j`` with ``T_j = T``."""
        j = int(round(T / self.tenor))
        if j < 1 or j > self.periods + 1 or abs(j * self.tenor - T) > 1e-12 * max(1.0, T):
            raise DomainError(f"{T} is not an OIS atom of the market model")
        return j

    def live(self, t: float) -> np.ndarray:
        """Mask over ``j = 1..N+1`` of atoms strictly after ``t``."""
        return np.asarray(self.dates) > t

    def cumulative_vols(self, t: float) -> np.ndarray:
        """``b_bar(t,T_j,0)`` for ``j = 1..N+1`` (rows)."""
        return np.cumsum(self.ois_vols * self.live(t)[:, None], axis=0)

    def cumulative_jumps(self, n: int) -> np.ndarray:
        """``Gamma_j`` after the n-th date for ``j = 0..N+1`` (entry 0 is 0)."""
        gamma = np.where(np.arange(1, self.periods + 2) > n, self.ois_jumps, 0.0)
        return np.concatenate([[0.0], np.cumsum(gamma)])

    def log_rate_drift(self, t: float) -> np.ndarray:
        """Drift of ``l_i`` for ``i = 0..N`` (entry 0 unused)."""
        b_bar = self.cumulative_vols(t)
        v = self.rate_vols
        drift = np.zeros(self.periods + 1)
        drift[1:] = np.einsum("ij,ij->i", v[1:], b_bar[1:]) - 0.5 * np.einsum("ij,ij->i", v[1:], v[1:])
        return drift

    def log_rate_jump(self, n: int, eps) -> np.ndarray:
        """Jump of ``l_i`` at ``T_n`` for ``i = 0..N`` (last axis), given marks ``eps``."""
        cum = self.cumulative_jumps(n)
        s = self.rate_jumps
        i = np.arange(self.periods + 1)
        base = np.where(i >= n, s * cum[np.minimum(i + 1, self.periods + 1)] - 0.5 * s * s, 0.0)
        return np.where(i >= n, s, 0.0) * np.asarray(eps)[..., None] + base

    def forward_jump(self, n: int, eps) -> np.ndarray:
        """``Delta V(T_n,T_j,0)`` for ``j = 1..N+1`` (last axis), given marks ``eps``."""
        cum = self.cumulative_jumps(n)
        j = np.arange(1, self.periods + 2)
        base = np.where(j > n, 0.5 * (cum[1:] ** 2 - cum[:-1] ** 2), 0.0)
        return np.where(j > n, self.ois_jumps, 0.0) * np.asarray(eps)[..., None] + base

    # -- model specifications --------------------------------------------------

    def ois_spec(self) -> HJMModelSpec:
        """OIS block with the discrete bank account as numeraire."""
        d = self.dim

        def volatility(t, u, tenor, state):
            j = self.index(u)
            return self.ois_vols[j - 1] if u > t else np.zeros(d)

        def drift(t, u, tenor, state):
            if u <= t:
                return 0.0
            j = self.index(u)
            b_bar = self.cumulative_vols(t)
            previous = b_bar[j - 2] if j > 1 else np.zeros(d)
            return 0.5 * (b_bar[j - 1] @ b_bar[j - 1] - previous @ previous)

        def forward(t, u, tenor, state):
            return state.forwards[..., self.index(u) - 1]

        def numeraire_scheduled(n, marks, state):
            return np.expm1(state.forwards[..., n - 1]) * np.ones(marks.shape[0])

        def forward_shift(n, marks, u, tenor, state):
            return self.forward_jump(n, marks[:, 0])[..., self.index(u) - 1]

        return HJMModelSpec(
            calendar=self.calendar, dim=d, forward=forward, drift=drift, volatility=volatility,
            short_rate=lambda t, state: 0.0, numeraire_scheduled=numeraire_scheduled, forward_shift=forward_shift,
            scheduled_law=lambda n, state: MarkLaw.gaussian([0.0], [[1.0]]),
            initial_state=self.initial_state, description="Gaussian OIS block")

    def spec(self) -> MarketModelSpec:
        delta = self.tenor

        def rate(t, T, state):
            return np.expm1(state.log_rates[..., self.index(T)]) / delta

        def rate_vol(t, T, state):
            i = self.index(T)
            return np.exp(state.log_rates[..., i])[..., None] * self.rate_vols[i] / delta

        def rate_drift(t, T, state):
            i = self.index(T)
            v = self.rate_vols[i]
            return np.exp(state.log_rates[..., i]) / delta * (self.log_rate_drift(t)[i] + 0.5 * v @ v)

        def rate_shift(n, marks, T, state):
            i = self.index(T)
            jump = self.log_rate_jump(n, marks[:, 0])[..., i]
            return np.exp(state.log_rates[..., i]) / delta * np.expm1(jump)

        rates = {0.0: float(self.initial_rates[0])}
        rates.update({T: float(self.initial_rates[i]) for i, T in enumerate(self.settlement, start=1)})
        return MarketModelSpec(tenor=delta, settlement=self.settlement, ois=self.ois_spec(), initial_rates=rates,
                               rate=rate, rate_drift=rate_drift, rate_vol=rate_vol, rate_shift=rate_shift,
                               initial_state=self.initial_state)


# ---------------------------------------------------------------------------
# Simulation


@dataclass
class MarketPaths:
    """Simulated market-model paths on ``times`` (post-jump values at dates).

    ``left_*`` hold the pre-jump values at each date reached, keyed by the
    1-based date index; ``increments`` are the Brownian increments per step and
    ``marks`` the scheduled standard normals per date.
    """

    times: np.ndarray
    forwards: np.ndarray
    log_rates: np.ndarray
    log_numeraire: np.ndarray
    increments: np.ndarray
    marks: np.ndarray
    left_forwards: dict
    left_log_rates: dict

    def state(self, k: int) -> MarketState:
        return MarketState(self.forwards[:, k], self.log_rates[:, k])

    def left_state(self, n: int) -> MarketState:
        return MarketState(self.left_forwards[n], self.left_log_rates[n])


def _validate_times(model: GaussianMarketModel, times) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 2 or times[0] != 0.0 or np.any(np.diff(times) <= 0):
        raise ConfigError("time grid must start at 0 and increase strictly")
    missing = [T for T in model.dates if T <= times[-1] and not np.any(np.isclose(times, T, rtol=0, atol=1e-12))]
    if missing:
        raise ConfigError(f"time grid must contain the calendar dates {missing}")
    return times


def simulate_market(model: GaussianMarketModel, times: Sequence[float], n_paths: int, seed: int = 0,
                    first_path: int = 0) -> MarketPaths:
    """Simulate OIS forwards, log Ibor rates and the discrete bank account.

    Path ``p`` uses the counter-based stream of path id ``first_path + p``, so results
    do not depend on how paths are batched.
    """
    times = _validate_times(model, times)
    steps, d, width = times.size - 1, model.dim, model.periods + 1
    date_index = {k: model.index(times[k]) for k in range(1, times.size)
                  if any(abs(times[k] - T) <= 1e-12 for T in model.dates)}
    normals = path_normals(seed, np.arange(first_path, first_path + n_paths), 0, steps * d + len(date_index))
    increments = normals[:, :steps * d].reshape(n_paths, steps, d) * np.sqrt(np.diff(times))[None, :, None]
    marks = normals[:, steps * d:]

    start = model.initial_state
    forwards = np.empty((n_paths, times.size, width))
    log_rates = np.empty((n_paths, times.size, width))
    log_numeraire = np.zeros((n_paths, times.size))
    forwards[:, 0], log_rates[:, 0] = start.forwards, start.log_rates
    left_forwards, left_log_rates = {}, {}
    for k in range(1, times.size):
        t, dt, dw = times[k - 1], times[k] - times[k - 1], increments[:, k - 1]
        live = model.live(t)
        b_bar = model.cumulative_vols(t)
        previous = np.vstack([np.zeros(d), b_bar[:-1]])
        ois_drift = 0.5 * (np.einsum("ij,ij->i", b_bar, b_bar) - np.einsum("ij,ij->i", previous, previous))
        f = forwards[:, k - 1] + live * (ois_drift * dt + dw @ model.ois_vols.T)
        rate_live = np.concatenate([[False], live[:-1]])
        ell = log_rates[:, k - 1] + rate_live * (model.log_rate_drift(t) * dt + dw @ model.rate_vols.T)
        log_numeraire[:, k] = log_numeraire[:, k - 1]
        if k in date_index:
            n = date_index[k]
            eps = marks[:, len(left_forwards)]
            left_forwards[n], left_log_rates[n] = f.copy(), ell.copy()
            log_numeraire[:, k] += f[:, n - 1]
            f = f + model.forward_jump(n, eps)
            ell = ell + model.log_rate_jump(n, eps)
        forwards[:, k], log_rates[:, k] = f, ell
    mark_table = np.full((n_paths, model.periods + 1), np.nan)
    for column, n in enumerate(sorted(left_forwards)):
        mark_table[:, n - 1] = marks[:, column]
    return MarketPaths(times, forwards, log_rates, log_numeraire, increments, mark_table, left_forwards,
                       left_log_rates)


@dataclass
class EmbeddedPaths:
    """Tenor forwards ``f(t,T_i,delta)`` for ``i = 1..N+1`` and the log spread along market paths."""

    tenor_forwards: np.ndarray
    log_spread: np.ndarray


def simulate_embedded(embedded: HJMModelSpec, model: GaussianMarketModel, paths: MarketPaths) -> EmbeddedPaths:
    """Integrate the embedded tenor curve and spread along simulated market paths.

    Uses only the embedded model's coefficients and initial values: forwards move
    by ``a dt + b dW`` between dates and by ``Delta V`` at dates, the spread jumps
    by ``Delta A`` (which reads the carried tenor forward at the date).
    """
    delta = model.tenor
    dates = model.dates
    count, steps = paths.forwards.shape[0], paths.times.size - 1
    tenor0 = embedded.initial_curves[delta]
    tenor = np.empty((count, paths.times.size, len(dates)))
    tenor[:, 0] = [tenor0[T] for T in dates]
    log_spread = np.empty((count, paths.times.size))
    log_spread[:, 0] = np.log(embedded.initial_spreads[delta])
    for k in range(1, steps + 1):
        t, dt, dw = paths.times[k - 1], paths.times[k] - paths.times[k - 1], paths.increments[:, k - 1]
        state = EmbeddedState(paths.state(k - 1), np.exp(log_spread[:, k - 1]))
        current = tenor[:, k - 1].copy()
        for j, T in enumerate(dates):
            if T > t:
                a = np.asarray(embedded.drift(t, T, delta, state), dtype=float)
                b = np.broadcast_to(np.asarray(embedded.volatility(t, T, delta, state), dtype=float), dw.shape)
                current[:, j] += a * dt + np.einsum("pj,pj->p", b, dw)
        spread = log_spread[:, k - 1].copy()
        n = next((j for j, T in enumerate(dates, start=1) if abs(paths.times[k] - T) <= 1e-12), None)
        if n is not None:
            marks = paths.marks[:, n - 1][:, None]
            pre = EmbeddedState(paths.left_state(n), np.exp(spread), dict(zip(dates, current.T)))
            jump_a = np.asarray(embedded.spread_scheduled(n, marks, delta, pre), dtype=float)
            shifts = np.stack([np.broadcast_to(np.asarray(embedded.forward_shift(n, marks, T, delta, pre),
                                                          dtype=float), (count,)) for T in dates], axis=1)
            current = current + shifts
            spread = spread + np.log1p(jump_a)
        tenor[:, k], log_spread[:, k] = current, spread
    return EmbeddedPaths(tenor, log_spread)


def reconstructed_rates(model: GaussianMarketModel, paths: MarketPaths, embedded: EmbeddedPaths,
                        k: int) -> dict[float, np.ndarray]:
    """``L(t_k,T_i,delta)`` recovered from the embedded spread, tenor curve and OIS curve
    for the settlement dates ``T_i >= t_k``."""
    from .curve import forward_ibor_rate

    t = paths.times[k]
    dates = np.asarray(model.dates)
    live = dates > t + 1e-12
    out = {}
    for i, T in enumerate(model.settlement, start=1):
        if T < t - 1e-12:
            continue
        upto = live & (dates <= T + 1e-12)
        tenor_bond = np.exp(-embedded.tenor_forwards[:, k] @ upto)
        ois_bond = np.exp(-paths.forwards[:, k] @ (live & (dates <= dates[i] + 1e-12)))
        out[T] = forward_ibor_rate(np.exp(embedded.log_spread[:, k]), tenor_bond, ois_bond, model.tenor)
    return out


def simulated_rates(model: GaussianMarketModel, paths: MarketPaths, k: int) -> dict[float, np.ndarray]:
    """``L(t_k,T_i,delta)`` straight from the simulated log rates."""
    t = paths.times[k]
    return {T: np.expm1(paths.log_rates[:, k, i]) / model.tenor
            for i, T in enumerate(model.settlement, start=1) if T >= t - 1e-12}


def terminal_numeraire_path(spec: HJMModelSpec, paths: MarketPaths, calendar_dates: Sequence[float],
                            path: int) -> np.ndarray:
    """Log numeraire of ``spec`` along one simulated path, from ``r``, ``H`` and ``Delta B``.

    Between dates ``d log X = (r - |H|^2/2) dt + H dW`` (coefficients frozen at the
    left end of each step); at a date ``log X`` gains ``log(1 + Delta B)`` for the
    drawn mark.
    """
    out = np.zeros(paths.times.size)
    for k in range(1, paths.times.size):
        t, dt = paths.times[k - 1], paths.times[k] - paths.times[k - 1]
        state = MarketState(paths.forwards[path, k - 1], paths.log_rates[path, k - 1])
        h = spec.vector(spec.numeraire_vol, t, state)
        out[k] = out[k - 1] + (float(spec.short_rate(t, state)) - 0.5 * h @ h) * dt + h @ paths.increments[path, k - 1]
        n = next((j for j, T in enumerate(calendar_dates, start=1) if abs(paths.times[k] - T) <= 1e-12), None)
        if n is not None:
            left = MarketState(paths.left_forwards[n][path], paths.left_log_rates[n][path])
            mark = np.array([[paths.marks[path, n - 1]]])
            out[k] += float(np.log1p(spec.on_marks(spec.numeraire_scheduled, mark, left, head=(n,))[0]))
    return out
