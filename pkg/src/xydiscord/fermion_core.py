"""Free-fermion solution of the transverse-field XY chain.

After the Jordan-Wigner mapping every two-point spin function of a
Z2-symmetric state is a determinant built from one fermionic function

    G(n) = (1/pi) int_0^pi [cos(kn) a_k + sin(kn) b_k] tanh(beta lambda_k) / lambda_k dk,

with a_k = h - cos k, b_k = gamma sin k and lambda_k = sqrt(a_k^2 + b_k^2).
On a periodic ring of L sites the integral becomes a sum over the momenta of
a fermion-parity sector: antiperiodic momenta 2 pi (n + 1/2) / L for even
parity, periodic momenta 2 pi n / L for odd parity. The unpaired periodic
modes k = 0 and k = pi carry the signed energy 2 a_k.

Sign conventions (checked against exact diagonalization):

    g_z       = G(0)
    g_xx(r)   = det[-G(i - j - 1)]_{i,j<r}
    g_yy(r)   = det[-G(i - j + 1)]_{i,j<r}
    g_zz(r)   = G(0)^2 - G(r) G(-r)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NumericalError, QuadratureNoConvergence, SectorMismatch, ValidationError
from .quadrature import integrate

R_MAX = 64
QUAD_TOL = 1e-10
QUAD_DEPTH = 40
DEGENERACY_TOL = 1e-10


@dataclass(frozen=True)
class ModelParams:
    """Point in parameter space. ``L=None`` means the thermodynamic limit."""

    gamma: float
    h: float
    T: float = 0.0
    L: int | None = None

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValidationError(f"gamma must lie in (0, 1], got {self.gamma}")
        if not self.T >= 0.0:
            raise ValidationError(f"temperature must be >= 0, got {self.T}")
        if self.L is not None and (self.L < 4 or self.L % 2):
            raise ValidationError(f"L must be an even integer >= 4, got {self.L}")

    @property
    def beta(self) -> float:
        return math.inf if self.T == 0 else 1.0 / self.T

    @property
    def bulk(self) -> bool:
        return self.L is None

    def with_h(self, h: float) -> "ModelParams":
        return replace(self, h=h)


@dataclass(frozen=True)
class ModeData:
    k: np.ndarray | float
    a: np.ndarray | float
    b: np.ndarray | float
    lam: np.ndarray | float
    theta: np.ndarray | float


def mode_data(params: ModelParams, k) -> ModeData:
    """Dispersion and Bogoliubov angle at momentum ``k`` (scalar or array).

    ``theta`` solves tan(theta) = b/a on the branch that is continuous in
    ``k`` and starts in (-pi/2, pi/2) at k = pi, where a_k = h + 1 > 0.
    """
    k_arr = np.asarray(k, dtype=float)
    a = params.h - np.cos(k_arr)
    b = params.gamma * np.sin(k_arr)
    lam = np.hypot(a, b)
    # b >= 0 on [0, pi], so atan2 is already the continuous branch there
    theta = np.arctan2(b, a)
    if np.ndim(k) == 0:
        return ModeData(float(k_arr), float(a), float(b), float(lam), float(theta))
    return ModeData(k_arr, a, b, lam, theta)


def _thermal_factor(lam, beta):
    if math.isinf(beta):
        return np.ones_like(lam)
    return np.tanh(beta * lam)


def _bulk_integrand(params: ModelParams, ns: np.ndarray):
    beta = params.beta

    def f(k):
        a = params.h - np.cos(k)
        b = params.gamma * np.sin(k)
        lam = np.hypot(a, b)
        w = _thermal_factor(lam, beta) / lam
        kn = np.outer(k, ns)
        return (np.cos(kn) * a[:, None] + np.sin(kn) * b[:, None]) * w[:, None]

    return f


def bulk_g(params: ModelParams, ns, tol: float = QUAD_TOL) -> np.ndarray:
    """G(n) in the thermodynamic limit for every ``n`` in ``ns``."""
    ns = np.atleast_1d(np.asarray(ns, dtype=float))
    if abs(params.h - 1.0) < 1e-2:
        bp = [0.0, 1e-3, math.pi]
    else:
        bp = [0.0, math.pi]
    val, _ = integrate(_bulk_integrand(params, ns), bp, tol=tol, max_depth=QUAD_DEPTH)
    return val / math.pi


# ---------------------------------------------------------------- finite L


@dataclass(frozen=True)
class SectorModes:
    """Momenta and mode energies of one parity sector on a ring."""

    parity: int
    k: np.ndarray
    lam: np.ndarray  # positive for paired modes, signed a_k for unpaired ones
    paired: np.ndarray
    coeff: np.ndarray  # (modes, 2R+1) contribution of each mode to G(n) at t = 1
    ns: np.ndarray


def sector_modes(params: ModelParams, parity: int, R: int) -> SectorModes:
    L = params.L
    m = np.arange(L)
    if parity > 0:
        k = 2.0 * np.pi * (m + 0.5) / L
    else:
        k = 2.0 * np.pi * m / L
    k = np.where(k > np.pi + 1e-12, k - 2.0 * np.pi, k)
    a = params.h - np.cos(k)
    b = params.gamma * np.sin(k)
    unpaired = np.isclose(np.sin(k), 0.0, atol=1e-12)
    lam = np.where(unpaired, a, np.hypot(a, b))
    ns = np.arange(-R, R + 1)
    kn = np.outer(k, ns)
    with np.errstate(divide="ignore", invalid="ignore"):
        coeff = (np.cos(kn) * a[:, None] + np.sin(kn) * b[:, None]) / lam[:, None]
    coeff[unpaired] = np.cos(kn[unpaired])
    return SectorModes(parity, k, lam, ~unpaired, coeff / L, ns)


def _ground_occupation(modes: SectorModes) -> np.ndarray:
    """Values of 1 - 2 m_k in the lowest state with the sector's parity."""
    t = np.ones_like(modes.lam)
    up = ~modes.paired
    if not up.any():
        return t
    t[up] = np.where(modes.lam[up] < 0, -1.0, 1.0)
    # reference state (all m_k = 0) is even; odd sector needs an odd number of flips
    flips = np.sum(t < 0)
    if (flips % 2 == 0) == (modes.parity < 0):
        # cheapest fix: flip the mode with the smallest |energy|
        energies = np.abs(modes.lam)
        j = int(np.argmin(energies))
        t[j] = -t[j]
    return t


def sector_energy(modes: SectorModes) -> float:
    t = _ground_occupation(modes)
    return float(-np.sum(modes.lam * t))


@dataclass(frozen=True)
class SectorReport:
    E_even: float
    E_odd: float
    occupied: int
    gap: float
    degenerate: bool


def ground_sector(params: ModelParams) -> SectorReport:
    """Lowest energies of both fermion-parity sectors on a ring."""
    if params.L is None:
        raise ValidationError("ground_sector needs a finite L")
    e_even = sector_energy(sector_modes(params, +1, 0))
    e_odd = sector_energy(sector_modes(params, -1, 0))
    occupied = -1 if e_odd < e_even - DEGENERACY_TOL else +1
    gap = abs(e_even - e_odd)
    return SectorReport(e_even, e_odd, occupied, gap, gap < DEGENERACY_TOL)


def finite_factorizing_field(gamma: float, L: int, bracket=None, tol: float = 1e-14) -> float:
    """Finite-size factorizing field: the parity crossing closest below h_f.

    Found by bisection of E_even - E_odd inside ``bracket`` (default: a
    window around sqrt(1 - gamma^2)).
    """
    hf = math.sqrt(1.0 - gamma**2)

    def diff(h):
        rep = ground_sector(ModelParams(gamma, h, 0.0, L))
        return rep.E_even - rep.E_odd

    if bracket is None:
        lo, hi = hf - 0.1 * max(hf, 1e-3), min(hf + 0.05, 0.999)
        # walk down from above h_f to the first sign change
        hs = np.linspace(hi, lo, 401)
        vals = [diff(h) for h in hs]
        for j in range(len(hs) - 1):
            if vals[j] == 0.0:
                return float(hs[j])
            if np.sign(vals[j]) != np.sign(vals[j + 1]):
                lo, hi = hs[j + 1], hs[j]
                break
        else:
            raise ValidationError("no parity crossing found near the factorizing field")
    else:
        lo, hi = bracket
    f_lo = diff(lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        f_mid = diff(mid)
        if f_mid == 0.0:
            return mid
        if np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ------------------------------------------------------- correlator algebra


def _toeplitz(Gfun, r: int, shift: int) -> np.ndarray:
    i = np.arange(r)
    return -Gfun(i[:, None] - i[None, :] + shift)


def _observables(Gfun, r_max: int) -> np.ndarray:
    """[g_z, g_xx(1..r), g_yy(1..r), g_zz(1..r)] from a G lookup.

    Every entry is a determinant of a matrix that is affine in G; this is
    what lets the twisted-trace terms below be recombined exactly.
    """
    out = np.empty(1 + 3 * r_max)
    g0 = Gfun(np.array(0))
    out[0] = g0
    for r in range(1, r_max + 1):
        out[r] = np.linalg.det(_toeplitz(Gfun, r, -1))
        out[r_max + r] = np.linalg.det(_toeplitz(Gfun, r, +1))
        out[2 * r_max + r] = g0 * g0 - Gfun(np.array(r)) * Gfun(np.array(-r))
    return out


def _lookup(G: np.ndarray, R: int):
    return lambda n: G[np.asarray(n) + R]


def _sector_component(modes: SectorModes, t: np.ndarray, r_max: int, twisted_weight: bool):
    """Observables of one (possibly twisted) Gaussian trace.

    For the untwisted trace returns the normalized expectations. For the
    twisted trace ``Tr[P exp(-beta H) O] / Tr[exp(-beta H)]`` is returned,
    written so that a vanishing unpaired energy stays finite.
    """
    R = (len(modes.ns) - 1) // 2
    if not twisted_weight:
        G = t @ modes.coeff
        return _observables(_lookup(G, R), r_max)
    # t holds tanh(beta lam); twisted occupations are coth = 1/t
    paired = modes.paired
    G_paired = (1.0 / t[paired]) @ modes.coeff[paired]
    prefactor = float(np.prod(t[paired]))
    up = np.flatnonzero(~paired)
    if up.size == 0:
        return prefactor * _observables(_lookup(G_paired, R), r_max)
    # det(A + sum_u x_u N_u) is multilinear in the rank-one directions N_u;
    # tanh_u * coth-weighted terms become the x_u = 1 - tanh-free corners
    total = 0.0
    for corner in range(1 << up.size):
        sel = [(corner >> q) & 1 for q in range(up.size)]
        G = G_paired + sum(s * modes.coeff[u] for s, u in zip(sel, up))
        f = _observables(_lookup(G, R), r_max)
        # Moebius inversion: coefficient of prod_{q in S} x_q is
        # sum over T subset S of (-1)^{|S|-|T|} f(T); weight of S is
        # prod_{q in S} 1 * prod_{q notin S} tanh_q
        for sup in range(1 << up.size):
            if sup & corner != corner:
                continue
            w = 1.0
            for q in range(up.size):
                if (sup >> q) & 1:
                    if not (corner >> q) & 1:
                        w *= -1.0
                else:
                    w *= t[up[q]]
            total = total + w * f
    return prefactor * total


def _finite_observables(params: ModelParams, r_max: int) -> tuple[np.ndarray, np.ndarray]:
    R = r_max
    even = sector_modes(params, +1, R)
    odd = sector_modes(params, -1, R)
    if params.T == 0:
        rep = ground_sector(params)
        modes = even if rep.occupied > 0 else odd
        G = _ground_occupation(modes) @ modes.coeff
        return _observables(_lookup(G, R), r_max), G
    beta = params.beta
    parts = []
    for modes, sign in ((even, +1.0), (odd, -1.0)):
        x = beta * modes.lam
        log_z = float(np.sum(np.logaddexp(x, -x)))  # log prod 2 cosh
        t = np.tanh(x)
        plain = _sector_component(modes, t, r_max, False)
        twisted = _sector_component(modes, t, r_max, True)
        ratio = float(np.prod(t))
        # sector weight Z_s (1 + sign * Z_s^P / Z_s) / 2, observables alike
        parts.append((log_z, 0.5 * (1.0 + sign * ratio), 0.5 * (plain + sign * twisted)))
    ref = max(p[0] for p in parts)
    Z = sum(math.exp(lz - ref) * w for lz, w, _ in parts)
    num = sum(math.exp(lz - ref) * o for lz, _, o in parts)
    obs = num / Z
    # G(n) reported for the dominant sector's grand-canonical ensemble
    modes = even if parts[0][0] >= parts[1][0] else odd
    G = np.tanh(beta * modes.lam) @ modes.coeff
    return obs, G


# --------------------------------------------------------------- public API


@dataclass
class CorrelatorSet:
    """One- and two-point spin functions at a parameter point.

    Arrays are indexed by distance ``r - 1``. ``G`` holds G(n) for
    n = -r_max..r_max when the set comes from the fermionic path.
    """

    g_z: float
    g_x: float
    g_xx: np.ndarray
    g_yy: np.ndarray
    g_zz: np.ndarray
    g_xz: np.ndarray
    g_zx: np.ndarray
    G: np.ndarray | None
    provenance: str
    params: ModelParams | None = None
    extra: dict = field(default_factory=dict)

    @property
    def r_max(self) -> int:
        return len(self.g_xx)

    @property
    def symmetric(self) -> bool:
        return self.g_x == 0 and not np.any(self.g_xz) and not np.any(self.g_zx)

    def G_at(self, n: int) -> float:
        R = (len(self.G) - 1) // 2
        return float(self.G[n + R])

    def as_array(self) -> np.ndarray:
        return np.concatenate(
            [[self.g_z, self.g_x], self.g_xx, self.g_yy, self.g_zz, self.g_xz, self.g_zx]
        )


def g_function(params: ModelParams, n: int) -> float:
    """Fermionic correlator G(n) (bulk quadrature or ring sum)."""
    return float(g_values(params, [n])[0])


def g_values(params: ModelParams, ns) -> np.ndarray:
    ns = np.atleast_1d(np.asarray(ns, dtype=int))
    if params.bulk:
        return bulk_g(params, ns)
    R = int(np.max(np.abs(ns)))
    _, G = _finite_observables(params, max(R, 1))
    return G[ns + max(R, 1)]


def correlators(params: ModelParams, r_max: int, tol: float = QUAD_TOL) -> CorrelatorSet:
    """Symmetric-sector correlator set at ``params``."""
    if not 1 <= r_max <= R_MAX:
        raise ValidationError(f"r_max must be in [1, {R_MAX}]")
    if params.bulk:
        G = bulk_g(params, np.arange(-r_max, r_max + 1), tol=tol)
        obs = _observables(_lookup(G, r_max), r_max)
        prov = "bulk-quadrature"
    else:
        if r_max > params.L // 2:
            raise ValidationError("r_max must not exceed L/2 on a ring")
        obs, G = _finite_observables(params, r_max)
        prov = "finite-L-sum"
    if params.bulk or params.T == 0:
        # Gaussian state: Wick factorization of g_zz must hold to rounding
        r = np.arange(1, r_max + 1)
        wick = obs[0] ** 2 - G[r_max + r] * G[r_max - r]
        if np.max(np.abs(obs[2 * r_max + 1 :] - wick)) > 1e-12:
            raise NumericalError("g_zz violates Wick factorization on the Gaussian path")
    zeros = np.zeros(r_max)
    return CorrelatorSet(
        g_z=float(obs[0]),
        g_x=0.0,
        g_xx=obs[1 : r_max + 1].copy(),
        g_yy=obs[r_max + 1 : 2 * r_max + 1].copy(),
        g_zz=obs[2 * r_max + 1 :].copy(),
        g_xz=zeros.copy(),
        g_zx=zeros.copy(),
        G=G,
        provenance=prov,
        params=params,
    )


# ------------------------------------------------- broken-symmetry bulk path


def _string_with_hole(Gfun, R: int, hole: int) -> float:
    """<sx_0 sz_hole sx_R> in the symmetric state (0 < hole < R)."""
    rows = np.array([b for b in range(R) if b != hole])
    cols = np.array([a for a in range(1, R + 1) if a != hole])
    # <B_b A_a> = -G(b - a)
    return float(np.linalg.det(-Gfun(rows[:, None] - cols[None, :])))


def broken_correlators(
    params: ModelParams, r_max: int, R_far: int | None = None, tol: float = 1e-9
) -> CorrelatorSet:
    """Bulk correlators of the symmetry-broken state (``<sx> >= 0``).

    Parity-even functions equal the symmetric ones. The order parameter and
    the mixed x-z functions follow from clustering of the symmetric state:
    g_x^2 = lim g_xx(R) and g_x g_xz(r) = lim <sx_0 sz_r sx_R>. The limit is
    taken by doubling ``R`` until successive values agree within ``tol``.
    """
    if not params.bulk or params.T > 0:
        raise ValidationError("broken-symmetry correlators need a bulk T = 0 point")
    sym = correlators(params, r_max)
    if params.h >= 1.0:
        sym.provenance = "bulk-broken"
        return sym
    R = R_far or max(24, 2 * r_max + 8)
    prev = None
    while True:
        G = bulk_g(params, np.arange(-R - 1, R + 2))
        Gf = _lookup(G, R + 1)
        gxx = float(np.linalg.det(_toeplitz(Gf, R, -1)))
        gx = math.sqrt(max(gxx, 0.0))
        mixed = np.array([_string_with_hole(Gf, R, r) for r in range(1, r_max + 1)])
        cur = np.concatenate([[gx], mixed])
        if prev is not None and np.max(np.abs(cur - prev)) < tol:
            break
        if R > 400:
            raise QuadratureNoConvergence("cluster limit of the broken-symmetry functions not reached")
        prev = cur
        R *= 2
    gxz = mixed / gx if gx > 0 else np.zeros(r_max)
    sym.g_x = gx
    sym.g_xz = gxz
    sym.g_zx = gxz.copy()
    sym.provenance = "bulk-broken"
    sym.extra["R_far"] = R
    return sym


def spontaneous_magnetization(gamma: float, h: float) -> float:
    """Closed-form order parameter of the ordered phase (0 for h >= 1)."""
    if abs(h) >= 1.0:
        return 0.0
    return (2.0 * math.sqrt(gamma) / (1.0 + gamma)) ** 0.5 * (1.0 - h * h) ** 0.125


# ---------------------------------------------------------------- fidelity


def _sector_state(params: ModelParams, sector: int):
    modes = sector_modes(params, sector, 0)
    occ = _ground_occupation(modes)
    return modes, occ


def fidelity(params: ModelParams, dh: float, sector: int | None = None) -> float:
    """Ground-state overlap |<gs(h)|gs(h + dh)>| on a ring of L sites.

    The overlap is the product over paired momenta 0 < k < pi of
    cos[(theta_k(h) - theta_k(h+dh)) / 2]. ``sector`` pins the parity
    sector (+1 even, -1 odd); by default the occupied sector at ``h`` is
    used and a different occupied sector at ``h + dh`` raises
    :class:`SectorMismatch`.
    """
    if params.L is None:
        raise ValidationError("fidelity needs a finite L")
    other = params.with_h(params.h + dh)
    if sector is None:
        s1 = ground_sector(params).occupied
        s2 = ground_sector(other).occupied
        if s1 != s2:
            raise SectorMismatch(f"fields {params.h} and {other.h} sit in different parity sectors")
        sector = s1
    m1, o1 = _sector_state(params, sector)
    m2, o2 = _sector_state(other, sector)
    if np.any(o1[~m1.paired] != o2[~m2.paired]):
        return 0.0
    sel = m1.paired & (m1.k > 0)
    th1 = mode_data(params, m1.k[sel]).theta
    th2 = mode_data(other, m2.k[sel]).theta
    return float(np.abs(np.prod(np.cos(0.5 * (th1 - th2)))))
