"""Functionals tracked along a run: moments, entropies, entropy productions and norms.

Pair sums ``(1/2) sum_{v, v*} K(v - v*) Xi[f](v, v*) w w*`` are evaluated by
expanding the quadratic form. With ``F = f (1 - eps f)``, ``G = grad f`` (grid
gradient) and ``grad h := G / F``, the pair density is
``F F* |Pi(z) (grad h - grad h*)|^2`` and, for ``A(z) = K(z) Pi(z)``,

    (1/2) sum K Xi = sum_v w [G^T (A * F) G / F - G^T (A * G)](v).

Both terms are grid convolutions, so the cost is a few FFTs instead of
``N^6`` pair visits. Nodes where ``f`` is below the floor (or within the floor
of ``1/eps``) are removed from both sides of every pair.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .convolution import convolve, convolve_matvec
from .distribution import Distribution
from .errors import (DegenerateDistribution, EpsilonMismatch, ParameterOutOfRange, Saturated,
                     WeightOverflow, WindowNotCovered)
from .grid import VelocityGrid, gradient, integrate, weight_field

__all__ = [
    "FLOOR",
    "floor_level",
    "active_mask",
    "moments",
    "dissipation_D",
    "entropy_S",
    "boltzmann_H",
    "relative_entropy",
    "entropy_production",
    "gamma_functional",
    "weighted_fisher",
    "level_set_part",
    "level_set_energy",
    "LevelSetEnergyReport",
    "exp_moments",
    "theorem51_constants",
    "Theorem51Constants",
    "poincare_fit",
    "PoincareFit",
    "singular_convolution",
    "kappa0",
    "lp_norms",
    "z_p",
    "DiagnosticsRecord",
    "DiagnosticsConfig",
    "record",
    "EXP_LIMIT",
]

FLOOR = 1e-12
# largest exponent accepted by the exponential weights
EXP_LIMIT = 700.0
SYM_INDEX = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))


def floor_level(f: Distribution) -> float:
    """``1e-12 / eps``, or ``1e-12 max f`` when ``eps = 0``."""
    if f.epsilon > 0:
        return FLOOR / f.epsilon
    return FLOOR * float(max(f.values.max(), 0.0))


def active_mask(f: Distribution, upper: bool = True) -> np.ndarray:
    """Nodes where ``log f`` (and, with ``upper``, ``log(1 - eps f)``) is evaluated."""
    delta = floor_level(f)
    mask = f.values >= delta if delta > 0 else f.values > 0
    if upper and f.epsilon > 0:
        mask &= f.values <= 1.0 / f.epsilon - delta
    return mask


def _japanese(grid: VelocityGrid) -> np.ndarray:
    return np.sqrt(1.0 + grid.speed_sq)


def kappa0(f: Distribution) -> float:
    """``1 - eps max f``."""
    return f.kappa0()


def moments(f: Distribution, s: float):
    """``(m_s, M_s, E_s)`` with ``m_s = int f <v>^s``, ``M_s = int f^2 <v>^s`` and ``E_s = m_s + M_s / 2``."""
    w = weight_field(f.grid, s)
    m = integrate(f.grid, f.values * w)
    M = integrate(f.grid, f.values * f.values * w)
    return m, M, m + 0.5 * M


def dissipation_D(f: Distribution, s: float) -> float:
    """``int |grad(<v>^{s/2} f)|^2``."""
    g = gradient(f.grid, weight_field(f.grid, 0.5 * s) * f.values)
    return integrate(f.grid, np.sum(g * g, axis=0))


def _xlogx(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = x[pos] * np.log(x[pos])
    return out


def entropy_S(f: Distribution) -> float:
    """Fermi-Dirac entropy; minus the Boltzmann functional when ``eps = 0``."""
    x = np.clip(f.values, 0.0, None)
    eps = f.epsilon
    if eps == 0:
        return -integrate(f.grid, _xlogx(x))
    x = np.minimum(x, 1.0 / eps)
    y = eps * x
    return -integrate(f.grid, _xlogx(y) + _xlogx(1.0 - y)) / eps


def boltzmann_H(f: Distribution) -> float:
    """``int f log f``."""
    return integrate(f.grid, _xlogx(np.clip(f.values, 0.0, None)))


def relative_entropy(f: Distribution, g: Distribution) -> float:
    """``S_eps(g) - S_eps(f)``."""
    if f.epsilon != g.epsilon:
        raise EpsilonMismatch(f"epsilon differs: {f.epsilon} vs {g.epsilon}")
    if f.grid != g.grid:
        raise ValueError("distributions live on different grids")
    return entropy_S(g) - entropy_S(f)


# ---------------------------------------------------------------------------
# pair functionals


def _projector_tabulator(radial, zero_value: float = 0.0):
    """Tabulator of ``radial(r) Pi(z)`` in upper-triangle storage (0 at z = 0)."""
    def tabulate(z):
        r2 = np.sum(z * z, axis=0)
        safe = np.where(r2 > 0, r2, 1.0)
        phi = np.where(r2 > 0, radial(np.sqrt(safe)), zero_value)
        comps = []
        for i, j in SYM_INDEX:
            proj = (1.0 if i == j else 0.0) - z[i] * z[j] / safe
            comps.append(phi * proj)
        return np.stack(comps)
    return tabulate


def _unpack(comps: np.ndarray) -> np.ndarray:
    out = np.empty((3, 3) + comps.shape[1:])
    for c, (i, j) in enumerate(SYM_INDEX):
        out[i, j] = comps[c]
        out[j, i] = comps[c]
    return out


def _pair_inputs(f: Distribution):
    mask = active_mask(f)
    F = np.where(mask, f.F(), 0.0)
    G = gradient(f.grid, f.values) * mask
    return F, G, mask


def _pair_form(f: Distribution, key, tabulate, backend: str) -> float:
    """``sum_v w [G^T (A*F) G / F - G^T (A*G)]`` for the matrix kernel ``A``."""
    grid = f.grid
    F, G, mask = _pair_inputs(f)
    if not mask.any():
        return 0.0
    AF = _unpack(convolve(grid, key, tabulate, F, backend))
    AG = convolve_matvec(grid, key, tabulate, G, backend)
    safe = np.where(mask, F, 1.0)
    quad = np.einsum("i...,ij...,j...->...", G, AF, G) / safe
    cross = np.sum(G * AG, axis=0)
    value = float(np.sum(grid.weights * (quad - cross)))
    # the form is nonnegative; a negative value is cancellation round-off
    return max(value, 0.0)


def entropy_production(f: Distribution, eta: float, backend: str = "fft") -> float:
    """``D^(eta)``: half the pair sum of ``|v - v*|^(eta+2) Xi[f]``.

    Parameters
    ----------
    eta
        Kernel exponent, ``eta >= -2``.
    backend
        ``"fft"`` or ``"direct"`` convolution backend.
    """
    if eta < -2:
        raise ParameterOutOfRange(f"eta must be >= -2, got {eta}")
    p = float(eta) + 2.0
    tab = _projector_tabulator(lambda r: r ** p)
    return _pair_form(f, ("pair-power", p), tab, backend)


def _check_exp_params(a: float, q: float) -> None:
    if not (a > 0):
        raise ParameterOutOfRange(f"a must be positive, got {a}")
    if not (0 < q < 1):
        raise ParameterOutOfRange(f"q must lie in (0, 1), got {q}")


def _max_offset(grid: VelocityGrid) -> float:
    return 2.0 * math.sqrt(3.0) * grid.extent


def gamma_functional(f: Distribution, a: float, q: float, backend: str = "fft") -> float:
    """Full pair sum (no factor 1/2) of ``|v - v*|^2 exp(a |v - v*|^q) Xi[f]``."""
    _check_exp_params(a, q)
    if a * _max_offset(f.grid) ** q > EXP_LIMIT:
        raise WeightOverflow(f"a |z|^q reaches {a * _max_offset(f.grid) ** q:.1f} on the grid")
    tab = _projector_tabulator(lambda r: r * r * np.exp(a * r ** q))
    return 2.0 * _pair_form(f, ("pair-exp", float(a), float(q)), tab, backend)


def weighted_fisher(f: Distribution, weight_s: float, exp_weight: tuple[float, float] | None = None) -> float:
    """``int <v>^s mu |grad sqrt f|^2`` with ``|grad sqrt f|^2 = |grad f|^2 / (4 f)``.

    ``exp_weight = (b, q)`` multiplies the weight by ``exp(b <v>^q)``; nodes
    below the floor contribute 0.
    """
    grid = f.grid
    mask = active_mask(f, upper=False)
    if not mask.any():
        return 0.0
    G = gradient(grid, f.values)
    safe = np.where(mask, f.values, 1.0)
    dens = np.where(mask, np.sum(G * G, axis=0) / (4.0 * safe), 0.0)
    w = weight_field(grid, weight_s)
    if exp_weight is not None:
        b, q = exp_weight
        expo = b * _japanese(grid) ** q
        if float(expo.max()) > EXP_LIMIT:
            raise WeightOverflow(f"exponential weight exponent reaches {float(expo.max()):.1f}")
        w = w * np.exp(expo)
    return integrate(grid, w * dens)


# ---------------------------------------------------------------------------
# level sets


def level_set_part(f: Distribution, level: float) -> np.ndarray:
    """``(f - level)_+``."""
    if level < 0:
        raise ParameterOutOfRange(f"level must be nonnegative, got {level}")
    return np.maximum(f.values - level, 0.0)


@dataclass(frozen=True)
class LevelSetEnergyReport:
    level: float
    t1: float
    t2: float
    value: float
    c0: float


def _level_set_terms(f: Distribution, level: float, gamma: float):
    part = level_set_part(f, level)
    half_l2 = 0.5 * integrate(f.grid, part * part)
    g = gradient(f.grid, weight_field(f.grid, 0.5 * gamma) * part)
    return half_l2, integrate(f.grid, np.sum(g * g, axis=0))


def level_set_energy(snapshots, level: float, t1: float, t2: float, gamma: float,
                     c0: float = 1.0) -> LevelSetEnergyReport:
    """``sup_{t in [t1, t2)} (||f_l^+(t)||^2 / 2 + c0 int_{t1}^t ||grad(<v>^{gamma/2} f_l^+)||^2)``.

    Parameters
    ----------
    snapshots
        Sequence of ``(t, Distribution)`` with increasing times, or an object
        with a ``snapshots`` attribute holding one.
    gamma
        Exponent of the weight ``<v>^{gamma/2}``.

    The supremum runs over stored times in ``[t1, t2)``; the time integral is
    the trapezoid rule on the stored times, with the integrand linearly
    interpolated at ``t1``.

    Raises
    ------
    WindowNotCovered
        If the stored times do not span ``[t1, t2]``.
    """
    snaps = list(getattr(snapshots, "snapshots", snapshots))
    if not (t1 < t2):
        raise ParameterOutOfRange(f"empty window [{t1}, {t2})")
    times = np.array([t for t, _ in snaps], dtype=float)
    if len(snaps) == 0 or times[0] > t1 or times[-1] < t2:
        span = (times[0], times[-1]) if len(snaps) else (None, None)
        raise WindowNotCovered(f"window [{t1}, {t2}] not covered by stored times {span}")
    terms = [_level_set_terms(f, level, gamma) for _, f in snaps]
    halves = np.array([a for a, _ in terms])
    rates = np.array([b for _, b in terms])
    start = int(np.searchsorted(times, t1, side="left"))
    if times[start] == t1:
        t_prev, r_prev = t1, rates[start]
    else:
        lam = (t1 - times[start - 1]) / (times[start] - times[start - 1])
        t_prev, r_prev = t1, (1 - lam) * rates[start - 1] + lam * rates[start]
    best = -np.inf
    acc = 0.0
    for k in range(start, len(snaps)):
        if times[k] >= t2:
            break
        acc += 0.5 * (times[k] - t_prev) * (rates[k] + r_prev)
        t_prev, r_prev = times[k], rates[k]
        best = max(best, halves[k] + c0 * acc)
    if not np.isfinite(best):
        raise WindowNotCovered(f"no stored time in [{t1}, {t2})")
    return LevelSetEnergyReport(float(level), float(t1), float(t2), float(best), float(c0))


# ---------------------------------------------------------------------------
# exponential moments, norms


def exp_moments(f: Distribution, a: float, q: float):
    """``(Upsilon, vartheta, Pi)``: ``int f^2 mu``, ``int f mu`` and ``Upsilon/2 + vartheta``, ``mu = exp(a <v>^q)``."""
    _check_exp_params(a, q)
    expo = a * _japanese(f.grid) ** q
    if float(expo.max()) > EXP_LIMIT:
        raise WeightOverflow(f"a <v>^q reaches {float(expo.max()):.1f} on the grid")
    mu = np.exp(expo)
    ups = integrate(f.grid, f.values * f.values * mu)
    theta = integrate(f.grid, f.values * mu)
    return ups, theta, 0.5 * ups + theta


def lp_norms(f: Distribution, ps) -> dict:
    """``{p: ||f||_{L^p}}``; ``p = inf`` gives the max norm."""
    out = {}
    x = np.abs(f.values)
    for p in ps:
        p = float(p)
        if math.isinf(p):
            out[p] = float(x.max())
        elif p >= 1:
            out[p] = integrate(f.grid, x ** p) ** (1.0 / p)
        else:
            raise ParameterOutOfRange(f"p must be >= 1, got {p}")
    return out


def z_p(p: float, gamma: float) -> float:
    """Moment order needed for the ``L^p`` a priori estimate."""
    if p < 1:
        raise ParameterOutOfRange(f"p must be >= 1, got {p}")
    if gamma <= -1:
        return (3 * p - 2) * abs(gamma) / p
    return (3 * p - 1 + gamma) / p


# ---------------------------------------------------------------------------
# constants of the entropy production lower bound


def singular_convolution(grid: VelocityGrid, values: np.ndarray, lam: float,
                         backend: str = "fft") -> np.ndarray:
    """``sum_w |v - w|^lam values(w) h^3-weights`` with the self-node dropped when ``lam < 0``."""
    lam = float(lam)
    zero = 1.0 if lam == 0 else 0.0

    def tabulate(z):
        r2 = np.sum(z * z, axis=0)
        safe = np.where(r2 > 0, r2, 1.0)
        return np.where(r2 > 0, safe ** (0.5 * lam), zero)[None]

    return convolve(grid, ("power", lam), tabulate, values, backend)[0]


@dataclass(frozen=True)
class Theorem51Constants:
    lambda_eta: float
    B_g: float
    e_g: float
    I_eta: float
    kappa0: float
    m_2_eta: float


def theorem51_constants(g: Distribution, eta: float, backend: str = "fft") -> Theorem51Constants:
    """``lambda_eta`` with ``1/lambda = 510 e^3 / kappa0^2 max(1, B) max(1, m_{2+eta}) I_eta``.

    ``1/B`` is the smallest eigenvalue over axis pairs ``i != j`` of the 2x2
    matrix of moments of ``(v_i, v_j) / <v>``; ``1/e = min_i int g v_i^2 / 3``;
    ``I_eta`` is the grid maximum of ``<v>^eta int g(w) |w - v|^-eta <w>^2``.

    Raises
    ------
    DegenerateDistribution
        If ``1/e`` or ``1/B`` is not positive.
    Saturated
        If ``kappa0 <= 0``.
    """
    if eta < 0:
        raise ParameterOutOfRange(f"eta must be >= 0, got {eta}")
    grid = g.grid
    k0 = g.kappa0()
    if k0 <= 0:
        raise Saturated(f"kappa0 = {k0:.3e}")
    v = grid.coords()
    jap2 = 1.0 + grid.speed_sq
    second = [integrate(grid, g.values * v[i] ** 2) / 3.0 for i in range(3)]
    inv_e = min(second)
    if inv_e <= 0:
        raise DegenerateDistribution(f"min_i int g v_i^2 / 3 = {inv_e:.3e}")
    inv_b = np.inf
    for i in range(3):
        for j in range(i + 1, 3):
            sxx = integrate(grid, g.values * v[i] ** 2 / jap2)
            syy = integrate(grid, g.values * v[j] ** 2 / jap2)
            sxy = integrate(grid, g.values * v[i] * v[j] / jap2)
            inv_b = min(inv_b, float(np.linalg.eigvalsh(np.array([[sxx, -sxy], [-sxy, syy]]))[0]))
    if inv_b <= 0:
        raise DegenerateDistribution(f"angular moment matrix is singular (min eigenvalue {inv_b:.3e})")
    e_g, B_g = 1.0 / inv_e, 1.0 / inv_b
    m = integrate(grid, g.values * weight_field(grid, 2.0 + eta))
    conv = singular_convolution(grid, g.values * jap2, -float(eta), backend)
    I = float(np.max(weight_field(grid, eta) * conv))
    inv_lam = 510.0 * e_g ** 3 / k0 ** 2 * max(1.0, B_g) * max(1.0, m) * I
    return Theorem51Constants(1.0 / inv_lam, B_g, e_g, I, k0, m)


@dataclass(frozen=True)
class PoincareFit:
    """Empirical constants of the weighted delta-Poincare bound.

    ``required[k]`` is the smallest ``K`` with ``L <= delta_k G + K W`` for
    every test function, where ``L = -int phi^2 c_gamma[g]``,
    ``G = int |grad(<v>^(gamma/2) phi)|^2`` and ``W = int phi^2 <v>^gamma``.
    ``C0`` is the largest ``required / (1 + delta^e)`` with
    ``e = gamma / (2 + gamma)``; ``exponent`` is the log-log slope of
    ``required`` between the two smallest deltas, to be compared with ``e``.
    """
    deltas: tuple
    required: tuple
    C0: float
    exponent: float
    expected_exponent: float


def poincare_fit(g: Distribution, phis, gamma: float, deltas, backend: str = "fft") -> PoincareFit:
    """Fit the delta-Poincare constant over finitely many test functions.

    Exploratory only: on a finite grid and a finite family of ``phis`` the
    fitted values are lower estimates, so nothing here is asserted.
    """
    if not -2.0 < gamma < 0.0:
        raise ParameterOutOfRange(f"gamma must lie in (-2, 0), got {gamma}")
    deltas = tuple(sorted(float(d) for d in deltas))
    if not deltas or deltas[0] <= 0:
        raise ParameterOutOfRange("deltas must be positive")
    grid = g.grid
    c = -2.0 * (gamma + 3.0) * singular_convolution(grid, g.values, gamma, backend)
    weight = weight_field(grid, gamma)
    half = weight_field(grid, 0.5 * gamma)
    terms = []
    for phi in phis:
        phi = np.asarray(phi, dtype=float)
        W = integrate(grid, phi * phi * weight)
        if W <= 0:
            continue
        grad = gradient(grid, half * phi)
        terms.append((-integrate(grid, phi * phi * c), integrate(grid, np.sum(grad * grad, axis=0)), W))
    if not terms:
        raise DegenerateDistribution("no test function with positive weighted norm")
    required = tuple(max(0.0, max((L - d * G) / W for L, G, W in terms)) for d in deltas)
    e = gamma / (2.0 + gamma)
    C0 = max(k / (1.0 + d ** e) for k, d in zip(required, deltas))
    slope = math.nan
    if len(deltas) > 1 and required[0] > 0 and required[1] > 0:
        slope = math.log(required[1] / required[0]) / math.log(deltas[1] / deltas[0])
    return PoincareFit(deltas, required, C0, slope, e)


# ---------------------------------------------------------------------------
# records


@dataclass(frozen=True)
class DiagnosticsConfig:
    """Which functionals a :class:`DiagnosticsRecord` carries."""

    s_list: tuple = (0.0, 2.0, 3.0, 4.0)
    eta_list: tuple = (0.0, 1.0, 2.0)
    p_list: tuple = (2.0,)
    exp_moment: tuple | None = None
    gamma: float = -1.0
    productions: bool = True
    max_pair_n: int = 33


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _tag(x: float) -> str:
    return format(float(x), "g")


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    m: dict
    M: dict
    E: dict
    D: dict
    S_eps: float
    H_boltzmann: float
    H_rel: float
    D_eta: dict
    fisher_gamma: float
    kappa0: float
    lp: dict
    exp: tuple | None = None
    extra: dict = field(default_factory=dict, compare=False)

    @staticmethod
    def header(config: DiagnosticsConfig) -> list[str]:
        cols = ["t"]
        for s in config.s_list:
            cols += [f"m_{_tag(s)}", f"M_{_tag(s)}", f"E_{_tag(s)}", f"D_{_tag(s)}"]
        cols += ["S_eps", "H_boltzmann", "H_rel"]
        cols += [f"D_eps_eta_{_tag(e)}" for e in config.eta_list]
        cols += ["fisher_gamma", "kappa0"]
        cols += [f"Lp_{_tag(p)}" for p in config.p_list]
        if config.exp_moment is not None:
            cols += ["Upsilon", "vartheta", "Pi"]
        return cols

    def row(self, config: DiagnosticsConfig) -> list[str]:
        vals = [self.t]
        for s in config.s_list:
            s = float(s)
            vals += [self.m[s], self.M[s], self.E[s], self.D[s]]
        vals += [self.S_eps, self.H_boltzmann, self.H_rel]
        vals += [self.D_eta.get(float(e), math.nan) for e in config.eta_list]
        vals += [self.fisher_gamma, self.kappa0]
        vals += [self.lp[float(p)] for p in config.p_list]
        if config.exp_moment is not None:
            vals += list(self.exp)
        return [_fmt(x) for x in vals]


def record(t: float, f: Distribution, reference: Distribution, config: DiagnosticsConfig,
           with_productions: bool | None = None, backend: str = "fft") -> DiagnosticsRecord:
    """Evaluate every configured functional of ``f`` at time ``t``.

    ``reference`` is the equilibrium used for the relative entropy. Pair
    functionals are skipped (NaN) when ``with_productions`` is false or the
    grid exceeds ``config.max_pair_n``.
    """
    productions = config.productions if with_productions is None else with_productions
    productions = productions and f.grid.n <= config.max_pair_n
    m, M, E, D = {}, {}, {}, {}
    for s in config.s_list:
        s = float(s)
        m[s], M[s], E[s] = moments(f, s)
        D[s] = dissipation_D(f, s)
    d_eta = {}
    for e in config.eta_list:
        d_eta[float(e)] = entropy_production(f, float(e), backend) if productions else math.nan
    exp = exp_moments(f, *config.exp_moment) if config.exp_moment is not None else None
    return DiagnosticsRecord(
        t=float(t), m=m, M=M, E=E, D=D,
        S_eps=entropy_S(f), H_boltzmann=boltzmann_H(f), H_rel=relative_entropy(f, reference),
        D_eta=d_eta, fisher_gamma=weighted_fisher(f, config.gamma), kappa0=f.kappa0(),
        lp=lp_norms(f, config.p_list), exp=exp,
        extra={"mass": f.mass()},
    )
