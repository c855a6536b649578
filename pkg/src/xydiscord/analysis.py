"""Derivatives, scaling collapses and fits of discord data.

The collapse score used throughout is a leave-one-slice-out residual: each
slice is compared with a monotone piecewise-cubic (PCHIP) master curve
built from all other slices, on the part of its rescaled abscissa covered
by them. Squared deviations are summed and divided by the summed squared
ordinates, so the score does not depend on the overall scale of the data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import minimize_scalar

from .errors import InsufficientRange, NoPeak, ReferenceMissing, SamplerFailure, ValidationError
from .fermion_core import ModelParams, correlators, finite_factorizing_field
from .pipeline import triples_from_correlators

BOOTSTRAP_SAMPLES = 100
BOOTSTRAP_SEED = 2012


# ----------------------------------------------------------- derivatives


@dataclass(frozen=True)
class Derivative:
    value: float
    error: float

    def smooth(self, rtol: float = 1e-3, atol: float = 1e-6) -> bool:
        return self.error <= atol + rtol * abs(self.value)


def d_dh(sampler: Callable[[float], float], h: float, step: float = 1e-3) -> Derivative:
    """First derivative by central differences with one Richardson level.

    The error estimate is the difference between the Richardson value and
    the finer central difference, plus ``step`` times the change of the
    second difference between the two levels. The second term stays small
    for smooth samplers and is of order one at a kink.
    """
    if not step > 0:
        raise ValidationError("step must be positive")

    def f(x):
        try:
            return float(sampler(x))
        except Exception as exc:  # noqa: BLE001 - any sampler failure is reported the same way
            raise SamplerFailure(f"sampler failed at h={x!r}: {exc}") from exc

    f0 = f(h)
    fp, fm = f(h + step), f(h - step)
    fp2, fm2 = f(h + step / 2), f(h - step / 2)
    coarse = (fp - fm) / (2 * step)
    fine = (fp2 - fm2) / step
    value = (4 * fine - coarse) / 3
    curv_coarse = (fp - 2 * f0 + fm) / step**2
    curv_fine = (fp2 - 2 * f0 + fm2) / (step / 2) ** 2
    error = abs(value - fine) + step * abs(curv_fine - curv_coarse)
    return Derivative(value, error)


class MemoSampler:
    """Wraps a sampler and reuses values at repeated fields.

    Fields are keyed after rounding to 12 decimals, which merges the shared
    stencil points of neighbouring derivatives on a regular grid.
    """

    def __init__(self, sampler):
        self.sampler = sampler
        self.cache: dict[float, float] = {}

    def __call__(self, h):
        key = round(float(h), 12)
        if key not in self.cache:
            self.cache[key] = float(self.sampler(key))
        return self.cache[key]


# ------------------------------------------------------------- fit helpers


@dataclass
class LinearFit:
    slope: float
    intercept: float
    r2: float
    slope_halfwidth: float = float("nan")
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _lstsq(x, y):
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return coef


def r_squared(y, fitted) -> float:
    y = np.asarray(y, dtype=float)
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else 0.0
    return 1.0 - ss_res / ss_tot


def bootstrap_halfwidth(x, y, estimator, n: int = BOOTSTRAP_SAMPLES, seed: int = BOOTSTRAP_SEED) -> float:
    """Half-width of the central 95% bootstrap interval of ``estimator(x, y)``."""
    x = np.asarray(x)
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    vals = []
    for _ in range(n):
        idx = rng.integers(0, len(x), len(x))
        if np.unique(x[idx]).size < 2:
            continue
        vals.append(estimator(x[idx], y[idx]))
    if len(vals) < 2:
        return float("nan")
    lo, hi = np.percentile(vals, [2.5, 97.5])
    return float(0.5 * (hi - lo))


def linear_fit(x, y, bootstrap: bool = True) -> LinearFit:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2 or np.unique(x).size < 2:
        raise InsufficientRange("a linear fit needs two distinct abscissae")
    slope, intercept = _lstsq(x, y)
    fitted = slope * x + intercept
    hw = bootstrap_halfwidth(x, y, lambda a, b: _lstsq(a, b)[0]) if bootstrap else float("nan")
    return LinearFit(float(slope), float(intercept), r_squared(y, fitted), hw, y - fitted)


# -------------------------------------------------------------- datasets


@dataclass(frozen=True)
class ScalingDataset:
    """Slices of an observable on field grids, one slice per size or temperature.

    ``sizes[i]`` labels slice ``i`` (an integer L or a temperature T) and
    ``h[i]``, ``values[i]`` are its strictly increasing field grid and the
    observable there. ``reference`` optionally holds ``(h, values)`` of a
    converged thermodynamic-limit slice.
    """

    sizes: tuple
    h: tuple
    values: tuple
    observable: str = "dQ1_dh"
    kind: str = "L"
    params: dict = field(default_factory=dict)
    reference: tuple | None = None

    def __post_init__(self):
        if not (len(self.sizes) == len(self.h) == len(self.values)):
            raise ValidationError("sizes, h and values must have equal length")
        object.__setattr__(self, "h", tuple(np.asarray(a, dtype=float) for a in self.h))
        object.__setattr__(self, "values", tuple(np.asarray(a, dtype=float) for a in self.values))
        for s, hh, vv in zip(self.sizes, self.h, self.values):
            if hh.shape != vv.shape or hh.ndim != 1:
                raise ValidationError(f"slice {s}: h and values must be 1-D of equal length")
            if hh.size > 1 and np.any(np.diff(hh) <= 0):
                raise ValidationError(f"slice {s}: field grid must be strictly increasing")
        if self.reference is not None:
            rh, rv = (np.asarray(a, dtype=float) for a in self.reference)
            object.__setattr__(self, "reference", (rh, rv))

    def __len__(self):
        return len(self.sizes)

    def records(self):
        """Flat ``(size, h, value, observable)`` tuples in slice order."""
        return [
            (s, float(x), float(v), self.observable)
            for s, hh, vv in zip(self.sizes, self.h, self.values)
            for x, v in zip(hh, vv)
        ]

    @classmethod
    def from_records(cls, records, **kw):
        by = {}
        for s, x, v, obs in records:
            by.setdefault(s, []).append((x, v))
            kw.setdefault("observable", obs)
        sizes = tuple(by)
        h = tuple(np.array([p[0] for p in sorted(by[s])]) for s in sizes)
        values = tuple(np.array([p[1] for p in sorted(by[s])]) for s in sizes)
        return cls(sizes, h, values, **kw)


@dataclass
class CollapseResult:
    exponents: dict
    shifts: dict
    residual: float
    diagnostics: dict = field(default_factory=dict)


# -------------------------------------------------------------- collapse


def _merge(x, y):
    order = np.argsort(x, kind="stable")
    x, y = x[order], y[order]
    ux, inv = np.unique(x, return_inverse=True)
    uy = np.bincount(inv, weights=y) / np.bincount(inv)
    return ux, uy


def collapse_residual(xs: Sequence[np.ndarray], ys: Sequence[np.ndarray]) -> float:
    """Normalized leave-one-slice-out residual of rescaled slices.

    Returns ``inf`` when no slice overlaps the range of the others.
    """
    num = 0.0
    den = 0.0
    count = 0
    for i in range(len(xs)):
        ox = np.concatenate([xs[j] for j in range(len(xs)) if j != i])
        oy = np.concatenate([ys[j] for j in range(len(ys)) if j != i])
        ox, oy = _merge(ox, oy)
        if ox.size < 2:
            continue
        master = PchipInterpolator(ox, oy, extrapolate=False)
        inside = (xs[i] >= ox[0]) & (xs[i] <= ox[-1])
        if not np.any(inside):
            continue
        dev = master(xs[i][inside]) - ys[i][inside]
        num += float(np.sum(dev**2))
        den += float(np.sum(ys[i][inside] ** 2))
        count += int(inside.sum())
    if count == 0:
        return math.inf
    if den == 0.0:
        return 0.0 if num == 0.0 else math.inf
    return num / den


def locate_peak(h: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Interior maximum of sampled data, refined by a parabola through three points."""
    i = int(np.argmax(y))
    if i == 0 or i == len(y) - 1:
        raise NoPeak("maximum sits on the edge of the field grid")
    x0, x1, x2 = h[i - 1 : i + 2]
    y0, y1, y2 = y[i - 1 : i + 2]
    # vertex of the interpolating parabola (non-uniform spacing allowed)
    d0 = (y1 - y0) / (x1 - x0)
    d1 = (y2 - y1) / (x2 - x1)
    a = (d1 - d0) / (x2 - x0)
    if a >= 0:
        return float(x1), float(y1)
    b = d0 - a * (x0 + x1)
    xm = -b / (2 * a)
    ym = y0 + d0 * (xm - x0) + a * (xm - x0) * (xm - x1)
    return float(xm), float(ym)


def fss_collapse(ds: ScalingDataset, omega: float, nu: float = 1.0, h_c: float = 1.0) -> CollapseResult:
    """Score ``y = L^-omega dQ/dh`` against ``x = L^(1/nu) (h - h_m(L))``.

    ``h_m(L)`` is the parabola-refined slice maximum. The drift
    ``h_c - h_m`` is fitted to a power law in ``L``; its exponent is
    reported as ``drift``.
    """
    if len(ds) < 3:
        raise InsufficientRange("finite-size collapse needs at least three sizes")
    shifts = {}
    xs, ys = [], []
    for L, hh, vv in zip(ds.sizes, ds.h, ds.values):
        if hh.size < 7:
            raise InsufficientRange(f"slice L={L} has fewer than 7 fields")
        hm, _ = locate_peak(hh, vv)
        shifts[L] = hm
        xs.append(L ** (1.0 / nu) * (hh - hm))
        ys.append(L ** (-omega) * vv)
    residual = collapse_residual(xs, ys)
    sizes = np.array(ds.sizes, dtype=float)
    drift = np.array([h_c - shifts[L] for L in ds.sizes])
    diag = {"drift_values": dict(zip(ds.sizes, drift))}
    exps = {"omega": omega, "nu": nu, "drift": float("nan")}
    if np.all(drift > 0):
        fit = linear_fit(np.log(sizes), np.log(drift))
        exps["drift"] = -fit.slope
        diag.update(drift_r2=fit.r2, drift_halfwidth=fit.slope_halfwidth, drift_prefactor=math.exp(fit.intercept))
    else:
        diag["drift_note"] = "h_m(L) not below h_c for every size; no power-law fit"
    return CollapseResult(exps, shifts, residual, diag)


def _reference_values(ds: ScalingDataset, hh: np.ndarray) -> np.ndarray:
    rh, rv = ds.reference
    out = np.empty_like(hh)
    for k, x in enumerate(hh):
        j = np.flatnonzero(np.isclose(rh, x, rtol=0.0, atol=1e-12))
        if j.size:
            out[k] = rv[j[0]]
        elif rh[0] <= x <= rh[-1]:
            out[k] = PchipInterpolator(rh, rv)(x)
        else:
            raise ReferenceMissing(f"reference slice does not cover h={x}")
    return out


def factorization_residual(ds: ScalingDataset, alpha: float, hf_of_L: dict) -> float:
    xs, ys = [], []
    for L, hh, vv in zip(ds.sizes, ds.h, ds.values):
        xs.append(math.exp(-alpha * L) * (hh - hf_of_L[L]))
        ys.append(vv - _reference_values(ds, hh))
    return collapse_residual(xs, ys)


def factorization_scaling(
    ds: ScalingDataset,
    alpha: float | None = None,
    alpha_range: tuple[float, float] = (0.05, 4.0),
    hf_of_L: dict | None = None,
) -> CollapseResult:
    """Collapse of ``Q_1(L) - Q_1(bulk)`` against ``exp(-alpha L) (h - h_f(L))``.

    ``ds.values`` hold Q_1 per size and ``ds.reference`` the converged
    thermodynamic-limit Q_1. The finite-size factorizing field comes from
    the parity crossing unless ``hf_of_L`` supplies it. With ``alpha`` None
    the residual is scanned on a coarse grid and minimized by golden-section
    search around the best grid point.
    """
    if ds.reference is None:
        raise ReferenceMissing("factorization scaling needs a converged reference slice")
    if hf_of_L is None:
        gamma = ds.params["gamma"]
        hf_of_L = {L: finite_factorizing_field(gamma, int(L)) for L in ds.sizes}

    def score(a):
        return factorization_residual(ds, a, hf_of_L)

    diag = {}
    if alpha is None:
        grid = np.linspace(*alpha_range, 80)
        vals = np.array([score(a) for a in grid])
        diag["scan"] = (grid, vals)
        j = int(np.argmin(vals))
        lo, hi = grid[max(j - 1, 0)], grid[min(j + 1, len(grid) - 1)]
        if lo < grid[j] < hi:
            res = minimize_scalar(score, bracket=(lo, grid[j], hi), method="golden", tol=1e-6)
            alpha, residual = float(res.x), float(res.fun)
        else:
            alpha, residual = float(grid[j]), float(vals[j])
            diag["note"] = "best alpha on the edge of the scan range"
    else:
        residual = score(alpha)
    return CollapseResult({"alpha": alpha}, dict(hf_of_L), residual, diag)


# ------------------------------------------------- near-factorization law


@dataclass
class NearFactorizationFit:
    power: float
    ratio: float
    r2: float
    power_halfwidth: float
    ratio_spread: float


def near_factorization_fit(h, r, q, h_f: float) -> NearFactorizationFit:
    """Fit ``Q_r = c |h - h_f|^p rho^r``.

    ``p`` comes from a joint log-log least-squares fit with one intercept
    per distance; ``rho`` is the ratio ``Q_{r+1}/Q_r`` averaged over all
    fields and consecutive distances.
    """
    h = np.asarray(h, dtype=float)
    r = np.asarray(r, dtype=int)
    q = np.asarray(q, dtype=float)
    delta = h - h_f
    radii = np.unique(r)
    if radii.size < 2:
        raise InsufficientRange("need at least two distances")
    if not (np.unique(delta[delta > 0]).size >= 2 and np.unique(delta[delta < 0]).size >= 2):
        raise InsufficientRange("need at least two fields on each side of h_f")
    if np.any(q <= 0) or np.any(delta == 0):
        raise InsufficientRange("log-log fit needs Q_r > 0 away from h_f")
    ld = np.log(np.abs(delta))
    lq = np.log(q)

    def joint_slope(ld_, lq_, r_):
        cols = [ld_] + [(r_ == k).astype(float) for k in radii]
        A = np.column_stack(cols)
        coef, *_ = np.linalg.lstsq(A, lq_, rcond=None)
        return coef, A

    coef, A = joint_slope(ld, lq, r)
    fitted = A @ coef
    ss_res = float(np.sum((lq - fitted) ** 2))
    ss_tot = float(sum(np.sum((lq[r == k] - lq[r == k].mean()) ** 2) for k in radii))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0

    ratios = []
    for x in np.unique(h):
        at = h == x
        qr = dict(zip(r[at], q[at]))
        ratios += [qr[k + 1] / qr[k] for k in radii if k + 1 in qr]
    ratios = np.array(ratios)

    rng = np.random.default_rng(BOOTSTRAP_SEED)
    boots = []
    idx_all = np.arange(len(h))
    for _ in range(BOOTSTRAP_SAMPLES):
        idx = rng.choice(idx_all, len(idx_all))
        if np.unique(ld[idx]).size < 2 or any(not np.any(r[idx] == k) for k in radii):
            continue
        boots.append(joint_slope(ld[idx], lq[idx], r[idx])[0][0])
    hw = float(0.5 * np.subtract(*np.percentile(boots, [97.5, 2.5]))) if len(boots) > 1 else float("nan")
    return NearFactorizationFit(float(coef[0]), float(ratios.mean()), r2, hw, float(ratios.std()))


# ---------------------------------------------------------- thermal scaling


def bulk_q(gamma: float, h: float, T: float, rs=(1,), tol: float = 1e-11):
    """Symmetric bulk (Q_r, C_r) at temperature ``T``."""
    cs = correlators(ModelParams(gamma, h, T), max(rs), tol=tol)
    trip = triples_from_correlators(cs, rs)
    return np.array([t.discord for t in trip]), np.array([t.classical for t in trip])


def critical_slope(gamma: float, T_grid, r: int = 1, h_c: float = 1.0, rel_step: float = 0.02):
    """∂_h Q_r at ``h_c`` for each temperature and its fit against ln T.

    Returns ``(derivatives, linear_fit, power_fit)``: ``linear_fit`` is
    ∂_h Q = x ln T + k and ``power_fit`` is ln|∂_h Q| = x' ln T + c.
    """
    T_grid = np.asarray(T_grid, dtype=float)
    ders = np.array(
        [d_dh(lambda h, T=T: bulk_q(gamma, h, T, (r,))[0][0], h_c, rel_step * T).value for T in T_grid]
    )
    lin = linear_fit(np.log(T_grid), ders)
    pw = linear_fit(np.log(T_grid), np.log(np.abs(ders))) if np.all(ders != 0) else None
    return ders, lin, pw


def thermal_collapse(ds: ScalingDataset, x: float, h_c: float = 1.0) -> float:
    """Residual of ``T^-x dQ/dh`` against ``(h - h_c)/T``.

    The signed inverse of the crossover variable T/|h - h_c| keeps both
    sides of the critical field on one continuous axis.
    """
    xs, ys = [], []
    for T, hh, vv in zip(ds.sizes, ds.h, ds.values):
        xs.append((hh - h_c) / T)
        ys.append(T ** (-x) * vv)
    return collapse_residual(xs, ys)


def thermal_dataset(gamma: float, T_grid, u_grid, r: int = 1, h_c: float = 1.0, rel_step: float = 0.02):
    """∂_h Q_r on fields ``h = h_c + u T`` for every temperature."""
    sizes, hs, vals = [], [], []
    for T in T_grid:
        hh = h_c + np.asarray(u_grid, dtype=float) * T
        sampler = MemoSampler(lambda h, T=T: bulk_q(gamma, h, T, (r,))[0][0])
        step = rel_step * T
        vals.append(np.array([d_dh(sampler, x, step).value for x in hh]))
        sizes.append(float(T))
        hs.append(hh)
    return ScalingDataset(tuple(sizes), tuple(hs), tuple(vals), f"dQ{r}_dh", "T", {"gamma": gamma})


def thermal_scaling(
    gamma: float,
    r: int = 1,
    T_grid=None,
    u_grid=None,
    h_c: float = 1.0,
    x_compare: float = 0.2,
) -> CollapseResult:
    """Slope ``x`` of ∂_h Q_r at h_c versus ln T and the T^x collapse.

    Both the logarithmic form and the power form of the critical-line fit
    are reported, together with the collapse residual at the fitted slope
    and at ``x_compare``.
    """
    T_grid = np.logspace(-3, -1, 9) if T_grid is None else np.asarray(T_grid, dtype=float)
    if T_grid.min() <= 0 or math.log10(T_grid.max() / T_grid.min()) < 2 - 1e-9:
        raise InsufficientRange("temperature grid must be positive and span two decades")
    u_grid = np.linspace(-2.0, 2.0, 9) if u_grid is None else np.asarray(u_grid, dtype=float)
    ders, lin, pw = critical_slope(gamma, T_grid, r, h_c)
    ds = thermal_dataset(gamma, T_grid, u_grid, r, h_c)
    res_fit = thermal_collapse(ds, lin.slope, h_c)
    res_cmp = thermal_collapse(ds, x_compare, h_c)
    diag = {
        "T": T_grid,
        "critical_derivative": ders,
        "log_fit": lin,
        "power_fit": pw,
        "residual_compare": res_cmp,
        "x_compare": x_compare,
        "dataset": ds,
    }
    if pw is not None:
        diag["residual_power_form"] = thermal_collapse(ds, pw.slope, h_c)
    return CollapseResult({"x": lin.slope}, {}, res_fit, diag)


# ---------------------------------------------------- displacement, Q/C map


def displacement_values(q_rows) -> np.ndarray:
    """Average pairwise spread 2 Σ_{i<j} |Q_i - Q_j| / (m (m - 1)) per row."""
    q = np.atleast_2d(np.asarray(q_rows, dtype=float))
    m = q.shape[1]
    if m < 2:
        raise ValidationError("need at least two radii")
    i, j = np.triu_indices(m, 1)
    return 2.0 * np.abs(q[:, i] - q[:, j]).sum(axis=1) / (m * (m - 1))


def displacement(gamma: float, h: float, T_grid, radii=(1, 2, 3, 4, 5)):
    """Δ̄Q_r(T) of the symmetric bulk state; returns ``(T, curve, Q table)``."""
    T_grid = np.asarray(T_grid, dtype=float)
    table = np.array([bulk_q(gamma, h, T, tuple(radii))[0] for T in T_grid])
    return T_grid, displacement_values(table), table


@dataclass
class QCMap:
    h: np.ndarray
    T: np.ndarray
    ratio: np.ndarray
    d_ratio_dT: np.ndarray
    critical_max: float

    def crossover_argmax(self, h_index: int) -> float:
        """Temperature of the largest |∂_T(Q/C)| at one field."""
        return float(self.T[int(np.argmax(np.abs(self.d_ratio_dT[h_index])))])


def qc_ratio_map(gamma: float, h_grid, T_grid, r: int = 1, window=(0.05, 0.5)) -> QCMap:
    """Q_r/C_r on an (h, T) grid and its temperature derivative.

    ``critical_max`` is max |∂_T(Q/C)| along h = 1 inside ``window``
    (NaN if the field grid misses h = 1).
    """
    h_grid = np.asarray(h_grid, dtype=float)
    T_grid = np.asarray(T_grid, dtype=float)
    if np.any(T_grid <= 0) or np.any(np.diff(T_grid) <= 0):
        raise ValidationError("temperatures must be positive and increasing")
    ratio = np.empty((h_grid.size, T_grid.size))
    for a, h in enumerate(h_grid):
        for b, T in enumerate(T_grid):
            q, c = bulk_q(gamma, h, T, (r,))
            ratio[a, b] = q[0] / c[0] if c[0] > 0 else np.nan
    d = np.gradient(ratio, T_grid, axis=1)
    crit = np.flatnonzero(np.isclose(h_grid, 1.0, atol=1e-12))
    cmax = float("nan")
    if crit.size:
        sel = (T_grid >= window[0]) & (T_grid <= window[1])
        cmax = float(np.max(np.abs(d[crit[0], sel])))
    return QCMap(h_grid, T_grid, ratio, d, cmax)


# --------------------------------------------------- ED dataset builders


def ed_fss_dataset(gamma: float, sizes, h_grid, boundary: str = "periodic", step: float = 0.01):
    """∂_h Q_1 of the ED symmetry-broken state for several chain lengths."""
    from .pipeline import EdSweep

    h_grid = np.asarray(h_grid, dtype=float)
    vals = []
    for L in sizes:
        sampler = MemoSampler(lambda h, s=EdSweep(L, gamma, (1,), boundary): s(h)[0])
        vals.append(np.array([d_dh(sampler, h, step).value for h in h_grid]))
    return ScalingDataset(
        tuple(sizes), tuple(h_grid for _ in sizes), tuple(vals), "dQ1_dh", "L",
        {"gamma": gamma, "boundary": boundary, "state": "ED broken"},
    )


def ed_factorization_dataset(gamma: float, sizes, h_grid, boundary: str = "periodic"):
    """Q_1 of the ED symmetry-broken state with the bulk broken Q_1 as reference."""
    from .pipeline import EdSweep, q_broken

    h_grid = np.asarray(h_grid, dtype=float)
    vals = []
    for L in sizes:
        sweep = EdSweep(L, gamma, (1,), boundary)
        vals.append(np.array([sweep(h)[0] for h in h_grid]))
    ref = np.array([q_broken(gamma, h, (1,))[0] for h in h_grid])
    return ScalingDataset(
        tuple(sizes), tuple(h_grid for _ in sizes), tuple(vals), "Q1", "L",
        {"gamma": gamma, "boundary": boundary, "state": "ED broken"}, reference=(h_grid, ref),
    )
