"""Random-matrix-theory machinery for spectrum correction.

Stieltjes transforms of discrete spectral distributions, the generalized
Marchenko-Pastur fixed point (Silverstein form), forward prediction of the
sample spectrum from a population spectrum, nonlinear-shrinkage eigenvalue
corrections, simplex-constrained inversion of the MP law (El Karoui), and
population-spectrum estimation by multi-start local search.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy import optimize

from .core import DataMatrix, NumericalError, SymmetricMatrix, eigendecompose
from .estimators import CovarianceEstimate, isotonic_correct, rebuild, sample_covariance

__all__ = [
    "SpectralDistribution",
    "Concentration",
    "RmtConfig",
    "MpSolution",
    "stieltjes_discrete",
    "mp_fixed_point",
    "predict_sample_spectrum",
    "nls_correct",
    "nls_precision_correct",
    "elkaroui_invert",
    "estimate_population_spectrum",
    "nls_estimator",
]


@dataclass(frozen=True)
class SpectralDistribution:
    """Discrete measure: positive locations with non-negative weights summing to 1."""

    locations: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.locations, dtype=np.float64)
        w = np.asarray(self.weights, dtype=np.float64)
        if t.ndim != 1 or t.shape != w.shape or t.size < 1:
            raise ValueError("locations and weights must be equal-length vectors")
        if np.any(t <= 0):
            raise ValueError("locations must be positive")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-10:
            raise ValueError("weights must be non-negative and sum to 1")
        object.__setattr__(self, "locations", t.copy())
        object.__setattr__(self, "weights", w.copy())

    @classmethod
    def from_eigenvalues(cls, eigenvalues: np.ndarray) -> "SpectralDistribution":
        ev = np.asarray(eigenvalues, dtype=np.float64)
        return cls(ev, np.full(ev.size, 1.0 / ev.size))

    def mean(self) -> float:
        return float(np.dot(self.locations, self.weights))

    def quantiles(self, probs: np.ndarray) -> np.ndarray:
        order = np.argsort(self.locations)
        t, w = self.locations[order], self.weights[order]
        cdf = np.cumsum(w)
        idx = np.searchsorted(cdf, np.asarray(probs), side="left")
        return t[np.minimum(idx, t.size - 1)]


@dataclass(frozen=True)
class Concentration:
    """c = n / p."""

    c: float

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("concentration must be positive")


@dataclass(frozen=True)
class RmtConfig:
    imag_offset: float = 1e-6
    fp_max_iter: int = 10_000
    fp_tol: float = 1e-10
    grid_size: int = 512
    probe_count: int = 20
    starts: int = 3
    elk_grid_size: int = 50
    opt_knots: int = 10
    opt_maxfev: int = 150


DEFAULT_CONFIG = RmtConfig()


@dataclass(frozen=True)
class MpSolution:
    """Stieltjes transforms of the sample spectral law F and of the kernel
    (companion) law G at one argument, plus fixed-point diagnostics."""

    z: complex
    m_f: complex
    m_g: complex
    residual: float
    iterations: int


def stieltjes_discrete(dist: SpectralDistribution, z: complex) -> complex:
    """m(z) = sum_k w_k / (t_k - z)."""
    diff = dist.locations - z
    if np.imag(z) == 0 and np.any(np.abs(diff) == 0):
        raise ValueError("z coincides with a spectral location on the real line")
    return complex(np.sum(dist.weights / diff))


def _silverstein_rhs(locations, weights, c, z, m):
    """RHS of the fixed-point equation for m_F; vectorized over z/m arrays."""
    z = np.asarray(z)
    m = np.asarray(m)
    denom = locations[None, :] * (1.0 - 1.0 / c - (z * m)[..., None] / c) - z[..., None]
    return np.sum(weights[None, :] / denom, axis=-1)


def _companion_rhs(locations, weights, c, z, m_g):
    """RHS of the companion fixed point m_G = -1 / (z - c^-1 sum w t/(1+t m_G)).

    This map is a composition of upper-half-plane-preserving functions, so
    plain iteration converges for Im z > 0 where the m_F form can stall."""
    s = np.sum(
        weights[None, :] * locations[None, :]
        / (1.0 + m_g[..., None] * locations[None, :]),
        axis=-1,
    )
    return -1.0 / (z - s / c)


def _mf_from_companion(locations, weights, z, m_g):
    """m_F recovered from the companion transform:
    m_F(z) = -z^-1 sum_k w_k / (1 + t_k m_G(z))."""
    s = np.sum(weights[None, :] / (1.0 + m_g[..., None] * locations[None, :]), axis=-1)
    return -s / z


def _solve_fixed_point(
    locations: np.ndarray,
    weights: np.ndarray,
    c: float,
    z: np.ndarray,
    config: RmtConfig = DEFAULT_CONFIG,
    m0: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """Damped fixed-point solve of the Silverstein equation, vectorized over z.

    Iterates the companion transform m_G (globally convergent on the upper
    half plane), recovers m_F from it, and reports the residual of the m_F
    equation. Damping halves on oscillation (per-point) and relaxes back
    toward 1 on steady progress.
    """
    z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
    if m0 is None and np.all(np.imag(z) > 0) and np.min(np.imag(z)) < 1e-2:
        # cold starts near the real axis contract too slowly; warm-start from
        # the solution at a lifted offset where the map contracts quickly
        lifted = np.real(z) + 1j * np.maximum(np.imag(z), 5e-2)
        _, m0, _, _ = _solve_fixed_point(locations, weights, c, lifted, config)
    m = np.array(m0, dtype=np.complex128) if m0 is not None else -1.0 / z
    step = np.ones(z.shape, dtype=np.float64)
    last_delta = np.full(z.shape, np.inf)
    active = np.ones(z.shape, dtype=bool)
    pos = np.imag(z) > 0
    iterations = 0
    fp_budget = min(config.fp_max_iter, 80)
    for iterations in range(1, config.fp_max_iter + 1):
        m_new = _companion_rhs(locations, weights, c, z, m)
        delta = np.abs(m_new - m)
        osc = delta > last_delta
        step = np.where(osc, np.maximum(step * 0.5, 0.05), np.minimum(step * 1.05, 1.0))
        m_next = m + step * (m_new - m)
        # keep iterates in the upper half plane for Im z > 0; reflect rather
        # than flatten so the trajectory cannot get pinned to the real axis
        m_next = np.where(pos & (np.imag(m_next) < 0), np.conj(m_next), m_next)
        converged = delta < config.fp_tol
        m = np.where(active, m_next, m)
        last_delta = np.where(active, delta, last_delta)
        active = active & ~converged
        if not active.any():
            break
        if iterations % fp_budget == 0:
            # near the real axis the fixed-point contraction degenerates;
            # polish the stragglers with Newton steps on f(m) = m - rhs(m),
            # keeping the Newton result only where it reduces the residual
            polished = _newton_polish(locations, weights, c, z, m, active, pos, config)
            res_old = np.abs(_companion_rhs(locations, weights, c, z, m) - m)
            res_new = np.abs(_companion_rhs(locations, weights, c, z, polished) - polished)
            m = np.where(active & (res_new < res_old), polished, m)
            delta_now = np.minimum(res_new, res_old)
            active = active & (delta_now >= config.fp_tol)
            last_delta = np.where(active, np.inf, last_delta)
            if not active.any():
                break
    m_f = _mf_from_companion(locations, weights, z, m)
    # residual of the companion equation: scale-stable even where m_F blows
    # up (near the real axis, or at the mass at zero when n < p)
    resid = np.abs(_companion_rhs(locations, weights, c, z, m) - m)
    return m_f, m, resid, iterations


def _newton_polish(locations, weights, c, z, m, active, pos, config: RmtConfig):
    """Newton iterations on f(m) = m - rhs(m) of the companion equation for
    the entries still active; steps that would leave the upper half plane
    (Im z > 0) are halved."""
    m = m.copy()
    idx = np.flatnonzero(active)
    zi, mi = z[idx], m[idx]
    for _ in range(200):
        one_tm = 1.0 + mi[:, None] * locations[None, :]
        s = np.sum(weights[None, :] * locations[None, :] / one_tm, axis=1)
        ds = -np.sum(weights[None, :] * locations[None, :] ** 2 / one_tm**2, axis=1)
        g = zi - s / c
        f = mi + 1.0 / g
        fp = 1.0 + ds / (c * g**2)
        fp = np.where(np.abs(fp) < 1e-30, 1e-30, fp)
        delta = f / fp
        # halve any step that would flip the Herglotz sign
        for _ in range(40):
            cand = mi - delta
            bad = pos[idx] & (np.imag(cand) < 0)
            if not bad.any():
                break
            delta = np.where(bad, delta / 2.0, delta)
        mi = mi - delta
        if np.abs(delta).max() < config.fp_tol * 0.1:
            break
    m[idx] = mi
    return m


def mp_fixed_point(
    h: SpectralDistribution,
    c: Concentration,
    z: complex,
    config: RmtConfig = DEFAULT_CONFIG,
) -> MpSolution:
    """Solve the Silverstein fixed point for m_F(z), Im z > 0; the companion
    transform m_G follows from m_G = m_F / c - (1 - 1/c) / z."""
    if np.imag(z) <= 0:
        raise ValueError("mp_fixed_point requires Im(z) > 0")
    m, m_g, resid, iters = _solve_fixed_point(
        h.locations, h.weights, c.c, np.array([z]), config
    )
    if resid[0] > 1e-9:
        raise NumericalError(
            "Marchenko-Pastur fixed point did not converge",
            z=complex(z),
            last_iterate=complex(m[0]),
            residual=float(resid[0]),
            iterations=iters,
        )
    return MpSolution(z=complex(z), m_f=complex(m[0]), m_g=complex(m_g[0]),
                      residual=float(resid[0]), iterations=iters)


def _support_grid(h: SpectralDistribution, c: float, size: int) -> np.ndarray:
    """Real grid covering the support of the limiting sample spectrum.

    A uniform base grid is refined around each population atom so that
    narrow spectral bulks (large c) are still resolved: each atom t spreads
    over an interval of width O(t sqrt(1/c)), which a uniform grid misses
    once c is large.
    """
    y = 1.0 / c  # p/n
    sq = np.sqrt(y)
    lo = h.locations.min() * max(1.0 - sq, 0.0) ** 2 * 0.8
    hi = h.locations.max() * (1.0 + sq) ** 2 * 1.2
    lo = max(lo, 1e-10 * hi)
    pieces = [np.linspace(lo, hi, size)]
    spacing = (hi - lo) / (size - 1)
    local = max(32, size // (4 * len(h.locations)))
    margin = min(0.1, sq)
    for t in h.locations:
        # refine only where the local bulk (width ~ 4 t sqrt(1/c)) is too
        # narrow for the base grid; moderate c never triggers this
        if 4.0 * sq * t >= 20.0 * spacing:
            continue
        a = max(t * max(1.0 - sq, 0.0) ** 2 * (1.0 - margin), lo)
        b = min(t * (1.0 + sq) ** 2 * (1.0 + margin), hi)
        pieces.append(np.linspace(a, b, local))
    return np.unique(np.concatenate(pieces))


def _sample_density(
    h: SpectralDistribution,
    c: float,
    grid: np.ndarray,
    config: RmtConfig = DEFAULT_CONFIG,
) -> np.ndarray:
    """Density of the limiting sample law on a real grid via the imaginary
    part of m_F just above the real axis."""
    z = grid + 1j * config.imag_offset
    m, m_g, resid, _ = _solve_fixed_point(h.locations, h.weights, c, z, config)
    bad = resid > 1e-7
    if bad.any():
        # re-solve stragglers with a neighbor warm start, sweeping left to right
        g0 = m_g.copy()
        for i in np.flatnonzero(bad):
            g0[i] = g0[i - 1] if i > 0 else -1.0 / z[i]
        m2, _, resid2, _ = _solve_fixed_point(h.locations, h.weights, c, z, config, m0=g0)
        m = np.where(resid2 < resid, m2, m)
        resid = np.minimum(resid, resid2)
        if (resid > 1e-6).any():
            j = int(np.argmax(resid))
            raise NumericalError(
                "density inversion failed to converge on the grid",
                z=complex(z[j]),
                last_iterate=complex(m[j]),
                residual=float(resid[j]),
            )
    return np.maximum(np.imag(m) / np.pi, 0.0)


def predict_sample_spectrum(
    h: SpectralDistribution,
    c: Concentration,
    p: int,
    config: RmtConfig = DEFAULT_CONFIG,
) -> np.ndarray:
    """Predicted sample eigenvalues: the (i - 1/2)/p quantiles of the limiting
    sample spectral law, descending."""
    if p < 1:
        raise ValueError("p must be >= 1")
    grid = _support_grid(h, c.c, config.grid_size)
    dens = _sample_density(h, c.c, grid, config)
    dx = np.diff(grid)
    cdf = np.concatenate(([0.0], np.cumsum((dens[1:] + dens[:-1]) * (dx / 2.0))))
    total = cdf[-1]
    if total <= 0:
        raise NumericalError("predicted spectral density has zero mass", c=c.c)
    cdf = cdf / total
    probs = (np.arange(1, p + 1) - 0.5) / p
    # make the cdf strictly increasing for interpolation
    cdf = np.maximum.accumulate(cdf)
    keep = np.concatenate(([True], np.diff(cdf) > 0))
    q = np.interp(probs, cdf[keep], grid[keep])
    return q[::-1].copy()


def _make_m_hat(
    h: SpectralDistribution, c: Concentration, config: RmtConfig = DEFAULT_CONFIG
):
    """m_F evaluated in the real-line limit (imaginary offset per config).

    Accepts a scalar or a vector of real arguments; vector calls share one
    vectorized fixed-point solve.
    """

    def m_hat(x):
        xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
        z = xs + 1j * config.imag_offset
        m, m_g, resid, _ = _solve_fixed_point(h.locations, h.weights, c.c, z, config)
        bad = resid > 1e-7
        if bad.any() and xs.size > 1:
            # retry stragglers warm-started from the nearest converged point
            order = np.argsort(xs)
            good = np.flatnonzero(~bad[order])
            if good.size:
                g0 = m_g.copy()
                for pos_i in np.flatnonzero(bad[order]):
                    nearest = good[np.argmin(np.abs(good - pos_i))]
                    g0[order[pos_i]] = m_g[order[nearest]]
                m2, _, resid2, _ = _solve_fixed_point(
                    h.locations, h.weights, c.c, z, config, m0=g0
                )
                m = np.where(resid2 < resid, m2, m)
                resid = np.minimum(resid, resid2)
        if resid.max() > 1e-6:
            j = int(np.argmax(resid))
            raise NumericalError(
                "Stieltjes evaluation failed to converge",
                z=complex(z[j]),
                residual=float(resid[j]),
            )
        return m if np.ndim(x) else complex(m[0])

    return m_hat


def _evaluate_m(m_hat, gam: np.ndarray) -> np.ndarray:
    """Evaluate m_hat on a vector, falling back to scalar calls for plain
    scalar-only callables."""
    try:
        m = np.asarray(m_hat(gam), dtype=np.complex128)
        if m.shape == gam.shape:
            return m
    except (TypeError, ValueError):
        pass
    return np.array([complex(m_hat(float(g))) for g in gam])


def nls_correct(
    sample_spectrum: np.ndarray,
    c: Concentration,
    m_hat: Callable[[float], complex],
) -> np.ndarray:
    """Nonlinear-shrinkage correction: gamma |1 - 1/c - gamma m(gamma)/c|^-2,
    floored and projected onto non-increasing sequences."""
    gam = np.asarray(sample_spectrum, dtype=np.float64)
    cc = c.c
    m = _evaluate_m(m_hat, gam)
    out = gam / np.abs(1.0 - 1.0 / cc - gam * m / cc) ** 2
    out = np.maximum(out, 1e-12 * gam.max())
    return isotonic_correct(out)


def nls_precision_correct(
    sample_spectrum: np.ndarray,
    c: Concentration,
    m_hat: Callable[[float], complex],
) -> np.ndarray:
    """Precision-targeted correction: gamma (1 - 1/c - 2 gamma Re m(gamma)/c)^-1,
    denominators floored at 1e-8; a non-positive denominator is an error."""
    gam = np.asarray(sample_spectrum, dtype=np.float64)
    cc = c.c
    m = _evaluate_m(m_hat, gam)
    denom = 1.0 - 1.0 / cc - 2.0 * gam * m.real / cc
    if np.any(denom <= 0):
        i = int(np.argmin(denom))
        raise NumericalError(
            f"precision correction denominator underflow at eigenvalue index {i}",
            index=i,
            eigenvalue=float(gam[i]),
            denominator=float(denom[i]),
        )
    out = gam / np.maximum(denom, 1e-8)
    out = np.maximum(out, 1e-12 * gam.max())
    return isotonic_correct(out)


def _kernel_stieltjes(sample_spectrum: np.ndarray, c: float, z: np.ndarray) -> np.ndarray:
    """Empirical Stieltjes transform of the n-point kernel spectrum: the p
    sample eigenvalues padded with n - p zeros (n > p)."""
    gam = np.asarray(sample_spectrum, dtype=np.float64)
    z = np.asarray(z, dtype=np.complex128)
    p = gam.size
    n = c * p
    m = np.sum(1.0 / (gam[None, :] - z[:, None]), axis=1)
    m = m + max(n - p, 0.0) / (0.0 - z)
    return m / n


def default_probes(sample_spectrum: np.ndarray, config: RmtConfig = DEFAULT_CONFIG) -> np.ndarray:
    gam = np.asarray(sample_spectrum, dtype=np.float64)
    # keep the probes a macroscopic distance above the real axis even when
    # the sample spectrum is nearly degenerate
    span = max(gam.max() - gam.min(), 0.1 * gam.max(), 1e-12)
    x = np.linspace(gam.min(), gam.max(), config.probe_count)
    return x + 1j * 0.1 * span


def default_grid(
    sample_spectrum: np.ndarray, c: Concentration, config: RmtConfig = DEFAULT_CONFIG
) -> np.ndarray:
    gam = np.asarray(sample_spectrum, dtype=np.float64)
    sq = np.sqrt(1.0 / c.c)
    lo = 0.5 * gam.min() * max(0.0, 1.0 - sq) ** 2
    lo = max(lo, 1e-6 * gam.max())
    hi = 1.5 * gam.max()
    return np.geomspace(lo, hi, config.elk_grid_size)


def elkaroui_invert(
    sample_spectrum: np.ndarray,
    c: Concentration,
    grid: Optional[np.ndarray] = None,
    probes: Optional[np.ndarray] = None,
    config: RmtConfig = DEFAULT_CONFIG,
) -> SpectralDistribution:
    """Estimate the population spectral distribution as simplex weights on a
    location grid, by least squares on the MP-law residuals at complex probes.

    The residual at probe z_j is e_j = 1/m_G(z_j) + z_j
    + (p/n) sum_k w_k t_k / (1 + m_G(z_j) t_k), linear in w, so the problem is
    a convex simplex-constrained least squares.
    """
    gam = np.asarray(sample_spectrum, dtype=np.float64)
    if grid is None:
        grid = default_grid(gam, c, config)
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise ValueError("location grid is empty")
    if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be positive and strictly ascending")
    if probes is None:
        probes = default_probes(gam, config)
    probes = np.asarray(probes, dtype=np.complex128)
    if np.any(np.imag(probes) <= 0):
        raise ValueError("probes must have positive imaginary part")

    m_g = _kernel_stieltjes(gam, c.c, probes)
    b = 1.0 / m_g + probes
    # Silverstein relation: 1/m_G + z - (p/n) sum_k w_k t_k / (1 + m_G t_k) = 0
    a = -(1.0 / c.c) * grid[None, :] / (1.0 + m_g[:, None] * grid[None, :])
    # stack real and imaginary parts: minimize ||M w + v||^2 on the simplex
    mat = np.vstack([a.real, a.imag])
    vec = np.concatenate([b.real, b.imag])

    k = grid.size
    gram = mat.T @ mat
    lin = mat.T @ vec

    def objective(w):
        r = mat @ w + vec
        return float(r @ r)

    def gradient(w):
        return 2.0 * (gram @ w + lin)

    w0 = np.full(k, 1.0 / k)
    res = optimize.minimize(
        objective,
        w0,
        jac=gradient,
        method="SLSQP",
        bounds=[(0.0, 1.0)] * k,
        constraints=[{"type": "eq", "fun": lambda w: w.sum() - 1.0,
                      "jac": lambda w: np.ones_like(w)}],
        options={"maxiter": 500, "ftol": 1e-14},
    )
    w = np.maximum(res.x, 0.0)
    w = w / w.sum()
    return SpectralDistribution(grid, w)


def _project_spectrum(gamma: np.ndarray, floor: float) -> np.ndarray:
    """Project onto the feasible cone: positive, descending."""
    g = np.maximum(np.asarray(gamma, dtype=np.float64), floor)
    return np.sort(g)[::-1]


def _knot_positions(p: int, n_knots: int) -> np.ndarray:
    return np.unique(np.round(np.linspace(0, p - 1, min(n_knots, p))).astype(int))


def _spectrum_from_knots(log_knots: np.ndarray, knot_idx: np.ndarray, p: int) -> np.ndarray:
    full = np.interp(np.arange(p), knot_idx, log_knots)
    return _project_spectrum(np.exp(full), 1e-12)


def _merge_atoms(dist: SpectralDistribution, min_weight: float = 0.01,
                 merge_ratio: float = 1.25) -> tuple[np.ndarray, np.ndarray]:
    """Dominant atoms of a discrete distribution, with near-duplicate
    locations pooled by weighted mean."""
    keep = dist.weights > min_weight
    order = np.argsort(dist.locations[keep])
    locs = dist.locations[keep][order]
    ws = dist.weights[keep][order]
    if locs.size == 0:
        raise ValueError("no atoms above the weight threshold")
    out_l, out_w = [locs[0]], [ws[0]]
    for t, w in zip(locs[1:], ws[1:]):
        if t / out_l[-1] < merge_ratio:
            out_l[-1] = (out_l[-1] * out_w[-1] + t * w) / (out_w[-1] + w)
            out_w[-1] += w
        else:
            out_l.append(t)
            out_w.append(w)
    weights = np.array(out_w)
    return np.array(out_l), weights / weights.sum()


def _polish_atoms(
    dist: SpectralDistribution,
    gam: np.ndarray,
    c: Concentration,
    p: int,
    config: RmtConfig,
) -> np.ndarray:
    """Refine atom locations and weights of a discrete population-spectrum
    candidate against the forward-predicted sample spectrum."""
    locs, ws = _merge_atoms(dist)
    k = locs.size
    probs = (np.arange(1, p + 1) - 0.5) / p

    def unpack(v):
        t = np.exp(v[:k])
        raw = np.concatenate([[0.0], v[k:]])
        w = np.exp(raw - raw.max())
        return t, w / w.sum()

    def objective(v):
        t, w = unpack(v)
        try:
            pred = predict_sample_spectrum(SpectralDistribution(t, w), c, p, config)
            return float(np.sum((pred - gam) ** 2))
        except (NumericalError, ValueError):
            return 1e30

    x0 = np.concatenate([np.log(locs), np.log(ws[1:] / ws[0])]) if k > 1 else np.log(locs)
    res = optimize.minimize(
        objective, x0, method="Powell",
        options={"maxfev": config.opt_maxfev, "xtol": 1e-4, "ftol": 1e-8},
    )
    t, w = unpack(res.x)
    return np.sort(SpectralDistribution(t, w).quantiles(probs))[::-1]


@dataclass(frozen=True)
class PopulationSpectrumResult:
    spectrum: np.ndarray
    objective: float
    initial_objective: float
    improved: bool


def estimate_population_spectrum(
    sample_spectrum: np.ndarray,
    c: Concentration,
    config: RmtConfig = DEFAULT_CONFIG,
    full_result: bool = False,
):
    """Population eigenvalues minimizing the distance between the forward-
    predicted sample spectrum and the observed one.

    Multi-start local search; the search space is a monotone log-linear
    interpolation through a small set of knots, which keeps the problem
    low-dimensional while still returning a full positive descending
    p-vector. Starts: the sample spectrum itself, an isotonic half-shrunk
    spectrum, and the quantiles of the El Karoui inversion.
    """
    gam = np.asarray(sample_spectrum, dtype=np.float64)
    if np.any(gam <= 0) or np.any(np.diff(gam) > 0):
        raise ValueError("sample spectrum must be positive and descending")
    p = gam.size
    floor = 1e-8 * gam.max()
    # Powell iterates on a cheap surrogate (coarse grid, larger imaginary
    # offset); candidate ranking and the descent contract use the exact
    # objective below.
    search_cfg = replace(config, grid_size=128, imag_offset=max(config.imag_offset, 1e-3))

    def objective(spectrum: np.ndarray, cfg: RmtConfig = config) -> float:
        h = SpectralDistribution.from_eigenvalues(spectrum)
        pred = predict_sample_spectrum(h, c, p, cfg)
        return float(np.sum((pred - gam) ** 2))

    probs = (np.arange(1, p + 1) - 0.5) / p
    starts = [gam]
    half_shrunk = isotonic_correct(0.5 * gam + 0.5 * gam.mean())
    starts.append(half_shrunk)
    elk = None
    try:
        elk = elkaroui_invert(gam, c, config=config)
        starts.append(np.sort(elk.quantiles(probs))[::-1])
    except Exception:
        pass  # El Karoui start is optional; the other starts remain
    starts = starts[: max(config.starts, 1)]

    knot_idx = _knot_positions(p, config.opt_knots)
    candidates: list[tuple[float, np.ndarray]] = []
    initial_obj = np.inf

    for start_index, start in enumerate(starts):
        s = _project_spectrum(start, floor)
        try:
            f0 = objective(s)
        except NumericalError:
            continue
        if start_index == 0:
            initial_obj = f0  # the sample-spectrum initialization
        candidates.append((f0, s))
        x0 = np.log(np.maximum(s[knot_idx], floor))

        def knot_objective(x):
            try:
                return objective(_spectrum_from_knots(x, knot_idx, p), search_cfg)
            except NumericalError:
                return 1e30

        res = optimize.minimize(
            knot_objective,
            x0,
            method="Powell",
            options={"maxfev": config.opt_maxfev, "xtol": 1e-3, "ftol": 1e-6},
        )
        spec = _spectrum_from_knots(res.x, knot_idx, p)
        try:
            candidates.append((objective(spec), spec))
        except NumericalError:
            pass

    if elk is not None:
        # atom-space polish: step-like population spectra are a few delta
        # peaks, which the knot interpolation can only smear; refining the
        # dominant atom locations and weights directly often cuts the
        # objective further
        try:
            polished = _polish_atoms(elk, gam, c, p, config)
            candidates.append((objective(polished), polished))
        except (NumericalError, ValueError):
            pass

    if not candidates:
        raise NumericalError("all population-spectrum starts failed", p=p, c=c.c)
    best_obj, best_spec = min(candidates, key=lambda t: t[0])
    result = PopulationSpectrumResult(
        spectrum=best_spec,
        objective=best_obj,
        initial_objective=initial_obj,
        improved=best_obj < initial_obj,
    )
    return result if full_result else result.spectrum


def nls_estimator(
    x: DataMatrix,
    precision: bool = False,
    config: RmtConfig = DEFAULT_CONFIG,
) -> CovarianceEstimate:
    """Nonlinear shrinkage: estimate the population spectrum, solve the MP
    fixed point for m_F, and correct each sample eigenvalue."""
    if x.n <= x.p:
        raise ValueError("nls requires n > p")
    c = Concentration(x.n / x.p)
    basis = eigendecompose(sample_covariance(x))
    sample_spec = np.maximum(basis.eigenvalues, 1e-12 * basis.eigenvalues.max())
    pop = estimate_population_spectrum(sample_spec, c, config)
    h = SpectralDistribution.from_eigenvalues(pop)
    m_hat = _make_m_hat(h, c, config)
    if precision:
        corrected = nls_precision_correct(sample_spec, c, m_hat)
    else:
        corrected = nls_correct(sample_spec, c, m_hat)
    return CovarianceEstimate(
        matrix=rebuild(basis, corrected),
        corrected_spectrum=corrected,
        basis=basis,
        method="nls-precision" if precision else "nls",
        params={"c": c.c},
    )
