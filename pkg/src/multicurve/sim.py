"""Exact Monte Carlo simulation of the Gaussian families and martingale tests.

Random numbers come from counter-based Philox4x64-10 streams: the normals of path
``p`` depend only on ``(seed, p)``, so an ensemble is identical whatever the
batching or number of threads.  Each step consumes a block-aligned slice of the
path's stream, and uniforms are mapped to normals by the inverse normal CDF.
"""

from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtri

from .affine import AffineModel, GaussianDynamics
from .curve import DiscontinuityCalendar, fra_price
from .errors import ConfigError, DomainError

STREAM_RULE = "philox4x64-10; key=(seed, 0); counter=(block, path, 0, 0); normal=ndtri(((x>>11)+0.5)*2^-53)"

_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)
_MULTIPLIERS = (np.uint64(0xD2E7470EE14C6C93), np.uint64(0xCA5A826395121157))
_WEYL = (np.uint64(0x9E3779B97F4A7C15), np.uint64(0xBB67AE8584CAA73B))


def _mulhilo(multiplier: np.uint64, value: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """High and low 64-bit words of the 128-bit product, via 32-bit limbs."""
    m_lo, m_hi = multiplier & _MASK32, multiplier >> _SHIFT32
    v_lo, v_hi = value & _MASK32, value >> _SHIFT32
    lo_lo = m_lo * v_lo
    lo_hi = m_lo * v_hi
    hi_lo = m_hi * v_lo
    middle = (lo_lo >> _SHIFT32) + (lo_hi & _MASK32) + (hi_lo & _MASK32)
    high = m_hi * v_hi + (lo_hi >> _SHIFT32) + (hi_lo >> _SHIFT32) + (middle >> _SHIFT32)
    return high, multiplier * value


def philox4x64(counter: Sequence[np.ndarray], key: tuple[int, int], rounds: int = 10) -> list[np.ndarray]:
    """Philox4x64 block function applied element-wise to arrays of counter words."""
    with np.errstate(over="ignore"):
        c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) for c in counter)
        k0, k1 = np.uint64(key[0]), np.uint64(key[1])
        for r in range(rounds):
            if r:
                k0, k1 = k0 + _WEYL[0], k1 + _WEYL[1]
            hi0, lo0 = _mulhilo(_MULTIPLIERS[0], c0)
            hi1, lo1 = _mulhilo(_MULTIPLIERS[1], c2)
            c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return [c0, c1, c2, c3]


def path_normals(seed: int, paths: np.ndarray, first_block: int, count: int) -> np.ndarray:
    """Standard normals ``count`` per path from blocks ``first_block, first_block+1, ...``."""
    blocks = -(-count // 4)
    paths = np.asarray(paths, dtype=np.uint64)
    block_index = np.arange(first_block, first_block + blocks, dtype=np.uint64)
    c0 = np.broadcast_to(block_index[None, :], (paths.size, blocks))
    c1 = np.broadcast_to(paths[:, None], (paths.size, blocks))
    zero = np.zeros((paths.size, blocks), dtype=np.uint64)
    words = philox4x64((c0, c1, zero, zero), (int(seed), 0))
    raw = np.stack(words, axis=-1).reshape(paths.size, blocks * 4)[:, :count]
    uniform = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53
    return ndtri(uniform)


@dataclass(frozen=True)
class SimulationPlan:
    """Time grid (first entry is the start), path count, master seed and path offset.

    The grid must contain every calendar date after the start.  ``start_state``
    defaults to the model's initial state; the numeraire is normalised to 1 and
    the spreads start at the model's initial spreads.
    """

    times: tuple[float, ...]
    n_paths: int
    seed: int = 0
    first_path: int = 0
    start_state: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        object.__setattr__(self, "times", times)
        if not times or any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigError(f"simulation times must be non-empty and strictly increasing: {times}")
        if not isinstance(self.n_paths, (int, np.integer)) or self.n_paths < 1:
            raise ConfigError(f"n_paths must be a positive integer, got {self.n_paths}")
        if not 0 <= int(self.seed) < 2 ** 64 or self.first_path < 0:
            raise ConfigError("seed must be in [0, 2^64) and first_path non-negative")

    def validate(self, calendar: DiscontinuityCalendar):
        missing = [d for d in calendar.dates if self.times[0] < d <= self.times[-1] and d not in self.times]
        if missing:
            raise ConfigError(f"simulation grid is missing calendar dates {missing}")


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    """Simulated states, log numeraire and log spreads on the plan grid.

    ``left_*`` arrays hold left limits at the calendar dates listed in
    ``jump_times``; everywhere else the left limit equals the value.
    """

    times: np.ndarray
    states: np.ndarray
    log_numeraire: np.ndarray
    log_spreads: np.ndarray
    tenors: tuple[float, ...]
    jump_times: tuple[float, ...]
    left_states: np.ndarray
    left_log_numeraire: np.ndarray
    left_log_spreads: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def n_paths(self) -> int:
        return self.states.shape[0]

    def time_index(self, t: float) -> int:
        hits = np.flatnonzero(self.times == float(t))
        if hits.size == 0:
            raise DomainError(f"time {t} is not on the simulation grid")
        return int(hits[0])

    def snapshot(self, t: float, left: bool = False):
        """``(states, log_numeraire, {tenor: log_spread})`` at ``t`` or its left limit."""
        if left and float(t) in self.jump_times:
            j = self.jump_times.index(float(t))
            return (self.left_states[:, j], self.left_log_numeraire[:, j],
                    {d: self.left_log_spreads[:, j, k] for k, d in enumerate(self.tenors)})
        i = self.time_index(t)
        return (self.states[:, i], self.log_numeraire[:, i],
                {d: self.log_spreads[:, i, k] for k, d in enumerate(self.tenors)})


def _gauss_legendre(n: int = 16):
    return np.polynomial.legendre.leggauss(n)


def step_covariance(dynamics: GaussianDynamics, dt: float) -> np.ndarray:
    """Covariance of the noise in ``(xi_1, int xi_1, xi_2, int xi_2, ...)`` over one step.

    Entries are ``rho_ij sigma_i sigma_j int_0^dt g_a(v) g_b(v) dv`` with
    ``g = exp(-kappa v)`` for levels and ``(1 - exp(-kappa v)) / kappa`` for
    integrals, evaluated by composite 16-point Gauss-Legendre quadrature.
    """
    factors = dynamics.factors
    kappas = np.array([f.kappa for f in factors])
    sigmas = np.array([f.sigma for f in factors])
    panels = max(1, int(math.ceil(2 * kappas.max(initial=0.0) * dt)))
    nodes, weights = _gauss_legendre()
    edges = np.linspace(0.0, dt, panels + 1)
    v = (0.5 * (edges[1:, None] - edges[:-1, None]) * nodes[None, :] + 0.5 * (edges[1:, None] + edges[:-1, None])).ravel()
    w = (0.5 * (edges[1:, None] - edges[:-1, None]) * weights[None, :]).ravel()
    level = np.exp(-np.outer(kappas, v))
    with np.errstate(divide="ignore", invalid="ignore"):
        integral = np.where(kappas[:, None] > 0, -np.expm1(-np.outer(kappas, v)) / np.where(kappas > 0, kappas, 1.0)[:, None],
                            v[None, :])
    loads = np.empty((2 * len(factors), v.size))
    loads[0::2] = sigmas[:, None] * level
    loads[1::2] = sigmas[:, None] * integral
    corr = np.kron(dynamics.correlation, np.ones((2, 2)))
    return corr * ((loads * w) @ loads.T)


def _symmetric_root(cov: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(0.5 * (cov + cov.T))
    return vecs @ np.diag(np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def _normals(seed, paths, first_block, count, threads):
    if threads <= 1 or paths.size < 2 * threads:
        return path_normals(seed, paths, first_block, count)
    chunks = np.array_split(paths, threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda chunk: path_normals(seed, chunk, first_block, count), chunks))
    return np.concatenate(parts, axis=0)


def simulate(model: AffineModel, plan: SimulationPlan, threads: int = 1) -> PathEnsemble:
    """Simulate ``plan.n_paths`` paths of the state, numeraire and spreads.

    Models carrying Gaussian dynamics are stepped with the exact joint law of the
    OU levels and their integrals.  Other models fall back to an Euler scheme
    (flagged in the metadata), which supports constant diffusion only.
    """
    plan.validate(model.calendar)
    d = model.dim
    n = plan.n_paths
    times = np.array(plan.times)
    paths = np.arange(plan.first_path, plan.first_path + n, dtype=np.uint64)
    x = np.tile(np.asarray(plan.start_state if plan.start_state is not None else model.initial_state, dtype=float),
                (n, 1))
    if x.shape[1] != d:
        raise ConfigError(f"start state has dimension {x.shape[1]}, model has {d}")
    tenors = model.tenors.tenors
    spread_load = np.array([model.loadings.spread_loading(t, d) for t in tenors]).reshape(len(tenors), d)
    rate_integral = np.asarray(model.loadings.rate_integral, dtype=float)
    log_n = np.zeros(n)
    log_s = np.tile(np.log([model.initial_spreads[t] for t in tenors]), (n, 1)).reshape(n, len(tenors))

    jump_times = tuple(float(t) for t in times[1:] if t in model.calendar)
    states = np.empty((n, times.size, d))
    log_numeraire = np.empty((n, times.size))
    log_spreads = np.empty((n, times.size, len(tenors)))
    left_states = np.empty((n, len(jump_times), d))
    left_log_n = np.empty((n, len(jump_times)))
    left_log_s = np.empty((n, len(jump_times), len(tenors)))
    states[:, 0], log_numeraire[:, 0], log_spreads[:, 0] = x, log_n, log_s

    dyn = model.dynamics
    exact = dyn is not None
    if not exact:
        chars = model.characteristics
        if np.any(chars.diffusion[1:]) or any(j is not None for j in chars.jumps) or model.calendar.dates:
            raise NotImplementedError("Euler fallback supports constant diffusion without jumps only")
        euler_root = _symmetric_root(chars.diffusion[0])
    block = 0
    for k in range(1, times.size):
        dt = times[k] - times[k - 1]
        before = x.copy()
        if exact:
            m = len(dyn.factors)
            z = _normals(plan.seed, paths, block, 2 * m, threads)
            block += -(-2 * m // 4)
            noise = z @ _symmetric_root(step_covariance(dyn, dt)).T
            for i, f in enumerate(dyn.factors):
                decay = math.exp(-f.kappa * dt)
                b = -math.expm1(-f.kappa * dt) / f.kappa if f.kappa > 0 else dt
                gap = x[:, f.level] - f.theta
                if f.integral is not None:
                    x[:, f.integral] += f.theta * dt + gap * b + noise[:, 2 * i + 1]
                x[:, f.level] = f.theta + gap * decay + noise[:, 2 * i]
            if dyn.clock is not None:
                x[:, dyn.clock] += dt
        else:
            z = _normals(plan.seed, paths, block, d, threads)
            block += -(-d // 4)
            chars = model.characteristics
            x = x + (chars.drift[0] + x @ chars.drift[1:]) * dt + math.sqrt(dt) * z @ euler_root.T
        move = x - before
        log_n = log_n + move @ rate_integral
        log_s = log_s + move @ spread_load.T
        t = float(times[k])
        if t in model.calendar:
            j = jump_times.index(t)
            left_states[:, j], left_log_n[:, j], left_log_s[:, j] = x, log_n, log_s
            shift, matrix, loading = dyn.jump(t)
            eps = _normals(plan.seed, paths, block, loading.shape[1], threads)
            block += -(-loading.shape[1] // 4)
            jump = shift + x @ matrix.T + eps @ loading.T
            x = x + jump
            log_n = log_n + jump @ model.loadings.jump_loading(t, d)
            log_s = log_s + jump @ spread_load.T
        states[:, k], log_numeraire[:, k], log_spreads[:, k] = x, log_n, log_s

    metadata = {"family": model.family, "seed": int(plan.seed), "first_path": int(plan.first_path),
                "n_paths": n, "stream": STREAM_RULE, "transition": "exact" if exact else "euler"}
    return PathEnsemble(times, states, log_numeraire, log_spreads, tenors, jump_times, left_states, left_log_n,
                        left_log_s, metadata)


# ---------------------------------------------------------------------------
# Assets and martingale tests


@dataclass(frozen=True)
class Asset:
    """A traded asset valued by the model's closed-form bonds.

    ``ois_bond``: ``P(t,T)``.  ``fra_leg``: ``S_t P(t,T,delta)``.  ``fra``: the FRA
    with strike ``K``.  On a single-curve model the spread is 1 and the tenor bond
    is the OIS bond.
    """

    kind: str
    maturity: float
    tenor: float = 0.0
    strike: float = 0.0

    def __post_init__(self):
        if self.kind not in ("ois_bond", "fra_leg", "fra"):
            raise ConfigError(f"unknown asset kind {self.kind!r}")
        if self.kind != "ois_bond" and not self.tenor > 0:
            raise ConfigError("FRA assets need a positive tenor")

    @property
    def label(self) -> str:
        if self.kind == "ois_bond":
            return f"ois_bond(T={self.maturity:g})"
        if self.kind == "fra_leg":
            return f"fra_leg(T={self.maturity:g},delta={self.tenor:g})"
        return f"fra(T={self.maturity:g},delta={self.tenor:g},K={self.strike:g})"

    def value(self, model: AffineModel, t: float, states: np.ndarray, log_spreads: dict, pre: bool = False):
        if t > self.maturity:
            raise DomainError(f"{self.label} is not alive at t = {t}")
        if self.kind == "ois_bond":
            return _bond(model, t, self.maturity, 0.0, states, pre)
        multi = self.tenor in model.tenors.tenors
        spread = np.exp(log_spreads[self.tenor]) if multi else np.ones(states.shape[0])
        tenor_bond = _bond(model, t, self.maturity, self.tenor if multi else 0.0, states, pre)
        if self.kind == "fra_leg":
            return spread * tenor_bond
        ois = _bond(model, t, self.maturity + self.tenor, 0.0, states, pre)
        return fra_price(spread, tenor_bond, ois, self.tenor, self.strike)


def ois_bond(maturity: float) -> Asset:
    return Asset("ois_bond", maturity)


def fra_leg(maturity: float, tenor: float) -> Asset:
    return Asset("fra_leg", maturity, tenor)


def fra(maturity: float, tenor: float, strike: float) -> Asset:
    return Asset("fra", maturity, tenor, strike)


def _bond(model: AffineModel, t, T, tenor, states, pre):
    if model.bond is None:
        raise NotImplementedError(f"model family {model.family!r} has no closed-form bond prices")
    if T == t:
        return np.ones(states.shape[0])
    return np.asarray(model.bond(t, T, tenor, states, pre), dtype=float) * np.ones(states.shape[0])


def sample_mean_and_error(values: np.ndarray) -> tuple[float, float]:
    """Mean and standard error with fixed-order pairwise summation."""
    values = np.ascontiguousarray(values, dtype=float)
    n = values.size
    mean = float(np.sum(values) / n)
    if n < 2:
        return mean, math.nan
    var = float(np.sum((values - mean) ** 2) / (n - 1))
    return mean, math.sqrt(var / n)


def z_score(mean: float, target: float, error: float) -> float:
    """Standardised gap; an error at rounding level (identical samples) counts as zero."""
    gap = mean - target
    if error > 64 * np.finfo(float).eps * max(1.0, abs(mean)):
        return gap / error
    return 0.0 if abs(gap) <= 1e-12 * max(1.0, abs(target)) else math.copysign(math.inf, gap)


@dataclass
class MartingaleReport:
    asset: str
    initial_value: float
    rows: list
    n_paths: int
    warning: Optional[str] = None

    @property
    def max_abs_z(self) -> float:
        return max((abs(r["z"]) for r in self.rows), default=0.0)

    def as_dict(self) -> dict:
        return {"asset": self.asset, "initial_value": self.initial_value, "n_paths": self.n_paths,
                "max_abs_z": self.max_abs_z, "warning": self.warning, "rows": self.rows}


def _discounted(model, ensemble, asset, t, left=False):
    states, log_n, log_s = ensemble.snapshot(t, left)
    return asset.value(model, t, states, log_s, pre=left) * np.exp(-log_n)


def martingale_test(model: AffineModel, ensemble: PathEnsemble, asset: Asset,
                    check_times: Optional[Sequence[float]] = None) -> MartingaleReport:
    """Compare the mean numeraire-discounted asset value with its start value at each check time."""
    t0 = float(ensemble.times[0])
    start = np.asarray(ensemble.states[:1, 0])
    start_spreads = {d: ensemble.log_spreads[:1, 0, k] for k, d in enumerate(ensemble.tenors)}
    initial = float(asset.value(model, t0, start, start_spreads)[0])
    if check_times is None:
        check_times = [float(t) for t in ensemble.times[1:] if t <= asset.maturity]
    rows = []
    for t in check_times:
        mean, error = sample_mean_and_error(_discounted(model, ensemble, asset, t))
        rows.append({"t": float(t), "mean": mean, "se": error, "initial": initial,
                     "z": z_score(mean, initial, error)})
    warning = None
    if ensemble.n_paths < 100:
        warning = f"degenerate ensemble: only {ensemble.n_paths} paths"
        warnings.warn(warning)
    return MartingaleReport(asset.label, initial, rows, ensemble.n_paths, warning)


@dataclass
class JumpTestReport:
    asset: str
    date: float
    mean: float
    se: float
    z: float
    bins: list
    suppressed: int

    @property
    def max_abs_z(self) -> float:
        return max([abs(self.z)] + [abs(b["z"]) for b in self.bins])

    def as_dict(self) -> dict:
        return {"asset": self.asset, "date": self.date, "mean": self.mean, "se": self.se, "z": self.z,
                "bins": self.bins, "suppressed_bins": self.suppressed}


def scheduled_jump_test(model: AffineModel, ensemble: PathEnsemble, asset: Asset, n: int, bins: int = 5,
                        coordinate: Optional[int] = None, min_bin: int = 10) -> JumpTestReport:
    """Mean jump of the discounted asset at the n-th calendar date (1-based), overall and
    within quantile bins of one pre-jump state coordinate."""
    date = model.calendar.dates[n - 1]
    if date not in ensemble.jump_times:
        raise ConfigError(f"calendar date {date} is not on the simulated grid")
    jump = _discounted(model, ensemble, asset, date) - _discounted(model, ensemble, asset, date, left=True)
    mean, error = sample_mean_and_error(jump)
    if coordinate is None:
        coordinate = model.dynamics.factors[0].level if model.dynamics else 0
    driver = ensemble.snapshot(date, left=True)[0][:, coordinate]
    edges = np.quantile(driver, np.linspace(0, 1, bins + 1)[1:-1])
    label = np.searchsorted(edges, driver, side="right")
    rows, suppressed = [], 0
    for b in range(bins):
        members = jump[label == b]
        if members.size < min_bin:
            suppressed += 1
            continue
        m, e = sample_mean_and_error(members)
        rows.append({"bin": b, "count": int(members.size), "mean": m, "se": e, "z": z_score(m, 0.0, e)})
    return JumpTestReport(asset.label, date, mean, error, z_score(mean, 0.0, error), rows, suppressed)


def write_ensemble_csv(path, ensemble: PathEnsemble) -> None:
    """Columnar export: one row per path and time, with an extra left-limit row at jump dates."""
    d = ensemble.states.shape[2]
    header = (["path", "time", "limit"] + [f"x{i}" for i in range(d)] + ["numeraire"]
              + [f"spread_{t:g}" for t in ensemble.tenors])
    fmt = lambda v: format(float(v), ".17g")
    first = ensemble.metadata.get("first_path", 0)
    with open(Path(path), "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for p in range(ensemble.n_paths):
            for i, t in enumerate(ensemble.times):
                if float(t) in ensemble.jump_times:
                    j = ensemble.jump_times.index(float(t))
                    writer.writerow([first + p, fmt(t), "left"] + [fmt(v) for v in ensemble.left_states[p, j]]
                                    + [fmt(math.exp(ensemble.left_log_numeraire[p, j]))]
                                    + [fmt(math.exp(v)) for v in ensemble.left_log_spreads[p, j]])
                writer.writerow([first + p, fmt(t), "value"] + [fmt(v) for v in ensemble.states[p, i]]
                                + [fmt(math.exp(ensemble.log_numeraire[p, i]))]
                                + [fmt(math.exp(v)) for v in ensemble.log_spreads[p, i]])
