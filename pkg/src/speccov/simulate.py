"""Simulation studies: the SEPRIAL estimator comparison, the leave-one-out
instability diagnostic, the alpha/beta LDA accuracy grid, the oracle
comparison, and wall-clock benchmarks.

Every run is reproducible from (config, seed): each cell and repetition
derives its own seed deterministically, so parallel and serial schedules
produce identical tables.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Optional, Sequence

import numpy as np

from .core import (
    DataMatrix,
    MeanMode,
    SpectrumModel,
    SymmetricMatrix,
    eigendecompose,
    random_rotation,
)
from .estimators import (
    cvc_spectra,
    estimate,
    isotonic_correct,
    kfold_partition,
    lw_shrinkage,
    precision_oracle,
    rebuild,
    sample_covariance,
    spectrum_oracle,
)
from .lda import LabeledData, accuracy, bayes_accuracy, fit_lda
from .metrics import SeprialResult, seprial_from_losses

__all__ = [
    "LdaGridConfig",
    "SeprialGridConfig",
    "make_lda_population",
    "spiked_spectrum",
    "run_lda_grid",
    "run_seprial_grid",
    "run_loo_instability",
    "run_oracle_comparison",
    "run_runtime_bench",
    "write_csv",
]

_STD_NORMAL = NormalDist()


@dataclass(frozen=True)
class LdaGridConfig:
    p: int = 100
    n: int = 200  # total; classes are balanced, n/2 observations each
    alpha: float = 1.0
    beta: float = 0.0
    target_bayes: float = 0.9
    reps: int = 100
    seed: int = 0
    test_size: int = 10_000

    def __post_init__(self):
        if self.p < 2:
            raise ValueError("p must be >= 2")
        if self.n % 2 != 0 or self.n < 4:
            raise ValueError("n must be even (balanced classes) and >= 4")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if not 0.5 < self.target_bayes < 1.0:
            raise ValueError("target Bayes accuracy must lie in (0.5, 1)")


@dataclass(frozen=True)
class SeprialGridConfig:
    p_values: tuple[int, ...] = (90,)
    ratio: float = 1.0 / 3.0  # p / n
    fractions: tuple[float, ...] = (0.2, 0.4, 0.4)
    levels: tuple[float, ...] = (1.0, 3.0, 10.0)
    reps: int = 50
    seed: int = 0
    rotate: bool = True

    def __post_init__(self):
        if abs(sum(self.fractions) - 1.0) > 1e-12:
            raise ValueError("spectrum fractions must sum to 1")
        if len(self.fractions) != len(self.levels):
            raise ValueError("fractions and levels must have equal length")
        if not 0 < self.ratio <= 1:
            raise ValueError("ratio p/n must lie in (0, 1]")


def spiked_spectrum(p: int, fractions: Sequence[float], levels: Sequence[float]) -> np.ndarray:
    """Population eigenvalues with fixed fractions at fixed levels, descending."""
    counts = [int(round(f * p)) for f in fractions]
    counts[-1] = p - sum(counts[:-1])
    if any(cnt < 0 for cnt in counts):
        raise ValueError("fractions do not fit the requested dimension")
    eig = np.concatenate([np.full(cnt, lv) for cnt, lv in zip(counts, levels)])
    return np.sort(eig)[::-1]


def make_lda_population(cfg: LdaGridConfig) -> tuple[SpectrumModel, np.ndarray, np.ndarray]:
    """Population spectrum and class means of the alpha/beta design.

    Eigenvalues are log-spaced descending from 10^alpha to 10^-alpha. The
    second mean is mu_i = scale * sqrt(gamma_i) * s_i with s_i log-spaced from
    10^-beta to 10^beta, the scale calibrated so the Bayes accuracy hits the
    target exactly. Positive beta therefore puts the signal-to-noise ratio
    into the low-variance directions, beta = 0 spreads it evenly.
    """
    gamma = np.logspace(cfg.alpha, -cfg.alpha, cfg.p)
    s = np.logspace(-cfg.beta, cfg.beta, cfg.p)
    scale = 2.0 * _STD_NORMAL.inv_cdf(cfg.target_bayes) / np.sqrt(np.sum(s**2))
    mean_b = scale * np.sqrt(gamma) * s
    return SpectrumModel(gamma), np.zeros(cfg.p), mean_b


def _cell_seed(master: int, *indices: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master)] + [int(i) for i in indices])


# ---------------------------------------------------------------------------
# LDA grid


@dataclass
class LdaGridResult:
    alphas: tuple[float, ...]
    betas: tuple[float, ...]
    estimators: tuple[str, ...]
    reps: int
    bayes: float
    # raw[(a_idx, b_idx)] has shape (len(estimators), reps)
    raw: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)

    def cell_mean(self, a_idx: int, b_idx: int, estimator: str) -> float:
        return float(self.raw[(a_idx, b_idx)][self.estimators.index(estimator)].mean())

    def cell_paired_diff(self, a_idx: int, b_idx: int, est1: str, est2: str) -> tuple[float, float]:
        """Mean accuracy difference est1 - est2 and its paired standard error."""
        acc = self.raw[(a_idx, b_idx)]
        d = acc[self.estimators.index(est1)] - acc[self.estimators.index(est2)]
        se = float(d.std(ddof=1) / np.sqrt(d.size)) if d.size > 1 else float("nan")
        return float(d.mean()), se

    def rows(self) -> list[dict]:
        out = []
        for (ai, bi), acc in sorted(self.raw.items()):
            for ei, est in enumerate(self.estimators):
                a = acc[ei]
                out.append(
                    {
                        "alpha": self.alphas[ai],
                        "beta": self.betas[bi],
                        "estimator": est,
                        "accuracy": float(a.mean()),
                        "se": float(a.std(ddof=1) / np.sqrt(a.size)) if a.size > 1 else float("nan"),
                        "reps": int(a.size),
                    }
                )
        return out


def _run_lda_cell(
    cfg: LdaGridConfig, estimators: Sequence[str], a_idx: int, b_idx: int
) -> np.ndarray:
    model, mean_a, mean_b = make_lda_population(cfg)
    population = model.covariance()
    half = cfg.n // 2
    test_half = cfg.test_size // 2
    sqrt_gamma = np.sqrt(model.eigenvalues)
    acc = np.zeros((len(estimators), cfg.reps))
    for rep in range(cfg.reps):
        rng = np.random.default_rng(_cell_seed(cfg.seed, a_idx, b_idx, rep))
        xa = rng.standard_normal((half, cfg.p)) * sqrt_gamma + mean_a
        xb = rng.standard_normal((half, cfg.p)) * sqrt_gamma + mean_b
        train = LabeledData(
            DataMatrix(np.vstack([xa, xb]), MeanMode.CENTERED),
            np.concatenate([np.zeros(half, dtype=int), np.ones(half, dtype=int)]),
        )
        ta = rng.standard_normal((test_half, cfg.p)) * sqrt_gamma + mean_a
        tb = rng.standard_normal((test_half, cfg.p)) * sqrt_gamma + mean_b
        test = LabeledData(
            DataMatrix(np.vstack([ta, tb]), MeanMode.CENTERED),
            np.concatenate([np.zeros(test_half, dtype=int), np.ones(test_half, dtype=int)]),
        )
        fold_seed = int(rng.integers(2**31 - 1))
        for ei, est in enumerate(estimators):
            lda_model = fit_lda(train, est, population=population, seed=fold_seed)
            acc[ei, rep] = accuracy(lda_model, test)
    return acc


def run_lda_grid(
    alphas: Sequence[float],
    betas: Sequence[float],
    estimators: Sequence[str],
    base: LdaGridConfig = LdaGridConfig(),
    threads: int = 1,
) -> LdaGridResult:
    """Mean test accuracy per (alpha, beta, estimator); failures are recorded
    per cell without aborting the grid."""
    result = LdaGridResult(
        alphas=tuple(alphas),
        betas=tuple(betas),
        estimators=tuple(estimators),
        reps=base.reps,
        bayes=base.target_bayes,
    )
    cells = [(ai, bi) for ai in range(len(alphas)) for bi in range(len(betas))]

    def work(cell):
        ai, bi = cell
        cfg = LdaGridConfig(
            p=base.p, n=base.n, alpha=alphas[ai], beta=betas[bi],
            target_bayes=base.target_bayes, reps=base.reps, seed=base.seed,
            test_size=base.test_size,
        )
        try:
            return _run_lda_cell(cfg, estimators, ai, bi)
        except Exception as exc:  # recorded per cell, not fatal to the grid
            return exc

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outputs = list(pool.map(work, cells))
    else:
        outputs = [work(cell) for cell in cells]
    for cell, out in zip(cells, outputs):
        if isinstance(out, Exception):
            result.errors[cell] = repr(out)
        else:
            result.raw[cell] = out
    return result


# ---------------------------------------------------------------------------
# SEPRIAL grid


@dataclass
class SeprialGridResult:
    config: SeprialGridConfig
    estimators: tuple[str, ...]
    # losses[(p, basis, estimator)] -> per-repetition squared losses vs S*
    losses: dict = field(default_factory=dict)
    # sample_losses[(p, basis)] -> per-repetition ||S - S*||^2
    sample_losses: dict = field(default_factory=dict)

    def seprial(self, p: int, estimator: str, basis: str = "aligned") -> SeprialResult:
        return seprial_from_losses(self.losses[(p, basis, estimator)],
                                   self.sample_losses[(p, basis)])

    def rows(self) -> list[dict]:
        out = []
        for (p, basis, est) in sorted(self.losses):
            r = self.seprial(p, est, basis)
            out.append(
                {
                    "p": p,
                    "n": int(round(p / self.config.ratio)),
                    "basis": basis,
                    "estimator": est,
                    "seprial": r.value,
                    "se": r.se_hat,
                    "reps": r.num_repetitions,
                }
            )
        return out


def _estimator_losses(
    x: DataMatrix,
    population: SymmetricMatrix,
    estimators: Sequence[str],
    fold_seed: int,
) -> tuple[dict, float]:
    """Per-estimator squared losses against the spectrum-oracle target S*.

    Shares eigendecompositions between base CVC estimators and their isotonic
    variants, and between loo and its transpose-bug variant.
    """
    basis = eigendecompose(sample_covariance(x))
    s_star = rebuild(basis, np.maximum(spectrum_oracle(basis, population), 0.0))
    sample_loss = float(np.sum((rebuild(basis, np.maximum(basis.eigenvalues, 0)).values
                                - s_star.values) ** 2))

    spectra: dict[str, np.ndarray] = {}
    need = set(estimators)
    if need & {"loo-cvc", "iso-loo-cvc", "buggy-loo-cvc"}:
        loo = cvc_spectra(x, [np.array([t]) for t in range(x.n)])
        spectra["loo-cvc"] = loo["proper"]
        spectra["buggy-loo-cvc"] = loo["buggy"]
        spectra["iso-loo-cvc"] = isotonic_correct(loo["proper"])
    if need & {"10f-cvc", "iso-10f-cvc"}:
        tenf = cvc_spectra(x, kfold_partition(x.n, 10, fold_seed))["proper"]
        spectra["10f-cvc"] = tenf
        spectra["iso-10f-cvc"] = isotonic_correct(tenf)
    if "sample" in need:
        spectra["sample"] = np.maximum(basis.eigenvalues, 0.0)
    if "lw" in need:
        spectra["lw"] = lw_shrinkage(x)[0].corrected_spectrum
    if "oracle" in need:
        spectra["oracle"] = np.maximum(spectrum_oracle(basis, population), 0.0)
    if "precision-oracle" in need:
        spectra["precision-oracle"] = np.maximum(precision_oracle(basis, population), 0.0)

    losses = {}
    for est in estimators:
        if est in spectra:
            mat = rebuild(basis, np.maximum(spectra[est], 0.0))
        else:  # nls / nls-precision and anything else run the full path
            mat = estimate(x, est, seed=fold_seed, population=population).matrix
        losses[est] = float(np.sum((mat.values - s_star.values) ** 2))
    return losses, sample_loss


def run_seprial_grid(
    cfg: SeprialGridConfig,
    estimators: Sequence[str],
    threads: int = 1,
) -> SeprialGridResult:
    """SEPRIAL per (p, estimator) on the fixed-fractions spectrum, with an
    optional rotated-basis replication to expose basis-dependent estimators."""
    result = SeprialGridResult(config=cfg, estimators=tuple(estimators))
    bases = ("aligned", "rotated") if cfg.rotate else ("aligned",)

    def work(args):
        p_idx, rep = args
        p = cfg.p_values[p_idx]
        n = int(round(p / cfg.ratio))
        gamma = spiked_spectrum(p, cfg.fractions, cfg.levels)
        rng = np.random.default_rng(_cell_seed(cfg.seed, p_idx, rep))
        x_aligned = rng.standard_normal((n, p)) * np.sqrt(gamma)
        fold_seed = int(rng.integers(2**31 - 1))
        rot_seed = int(rng.integers(2**31 - 1))
        out = {}
        for basis_name in bases:
            if basis_name == "aligned":
                x = DataMatrix(x_aligned, MeanMode.ZERO_MEAN)
                population = SymmetricMatrix(np.diag(gamma))
            else:
                q = random_rotation(p, rot_seed)
                x = DataMatrix(x_aligned @ q.T, MeanMode.ZERO_MEAN)
                c = (q * gamma) @ q.T
                population = SymmetricMatrix((c + c.T) / 2.0)
            out[basis_name] = _estimator_losses(x, population, estimators, fold_seed)
        return out

    jobs = [(pi, rep) for pi in range(len(cfg.p_values)) for rep in range(cfg.reps)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outputs = list(pool.map(work, jobs))
    else:
        outputs = [work(j) for j in jobs]

    for (p_idx, rep), out in zip(jobs, outputs):
        p = cfg.p_values[p_idx]
        for basis_name, (losses, sample_loss) in out.items():
            result.sample_losses.setdefault((p, basis_name), np.zeros(cfg.reps))[rep] = sample_loss
            for est, loss in losses.items():
                result.losses.setdefault((p, basis_name, est), np.zeros(cfg.reps))[rep] = loss
    return result


# ---------------------------------------------------------------------------
# loo instability diagnostic


@dataclass
class LooInstabilityResult:
    p: int
    n: int
    reps: int
    sample_eigs: np.ndarray  # (reps, p)
    loo_estimates: np.ndarray  # (reps, p)
    rp_estimates: np.ndarray  # (reps, p) random-projection estimates
    stability: np.ndarray  # (reps, p) mean |v_i' v_i^loo(t)| over t

    def rows(self) -> list[dict]:
        out = []
        for i in range(self.p):
            out.append(
                {
                    "index": i,
                    "sample_eig": float(self.sample_eigs[:, i].mean()),
                    "loo_estimate": float(self.loo_estimates[:, i].mean()),
                    "rp_estimate": float(self.rp_estimates[:, i].mean()),
                    "loo_variance": float(self.loo_estimates[:, i].var(ddof=1)),
                    "rp_variance": float(self.rp_estimates[:, i].var(ddof=1)),
                    "stability": float(self.stability[:, i].mean()),
                }
            )
        return out


def run_loo_instability(
    p: int = 50,
    n: int = 1000,
    reps: int = 100,
    seed: int = 0,
    spectrum: Optional[np.ndarray] = None,
) -> LooInstabilityResult:
    """Leave-one-out variance diagnostic on an identity (or given) population:
    loo-CVC estimates vs estimates from data-independent random projections,
    plus eigenvector stability across leave-one-out folds."""
    gamma = np.ones(p) if spectrum is None else np.sort(np.asarray(spectrum, float))[::-1]
    sample_eigs = np.zeros((reps, p))
    loo_est = np.zeros((reps, p))
    rp_est = np.zeros((reps, p))
    stability = np.zeros((reps, p))
    for rep in range(reps):
        rng = np.random.default_rng(_cell_seed(seed, rep))
        x = rng.standard_normal((n, p)) * np.sqrt(gamma)
        gram = x.T @ x
        w, v = np.linalg.eigh(gram / n)
        order = np.argsort(w)[::-1]
        sample_eigs[rep] = w[order]
        v_full = v[:, order]
        # fixed Haar basis, independent of the data
        q = random_rotation(p, int(rng.integers(2**31 - 1)))
        rp_est[rep] = np.mean((x @ q) ** 2, axis=0)
        proj2 = np.zeros(p)
        stab = np.zeros(p)
        for t in range(n):
            s_loo = (gram - np.outer(x[t], x[t])) / (n - 1)
            w_t, v_t = np.linalg.eigh(s_loo)
            v_t = v_t[:, ::-1]
            proj2 += (x[t] @ v_t) ** 2
            stab += np.abs(np.einsum("ji,ji->i", v_full, v_t))
        loo_est[rep] = proj2 / n
        stability[rep] = stab / n
    return LooInstabilityResult(
        p=p, n=n, reps=reps,
        sample_eigs=sample_eigs, loo_estimates=loo_est,
        rp_estimates=rp_est, stability=stability,
    )


# ---------------------------------------------------------------------------
# oracle comparison


def run_oracle_comparison(cfg: LdaGridConfig) -> list[dict]:
    """Per sample-eigenvalue rank: mean spectrum-oracle value, mean
    precision-oracle value and their ratio, over repetitions."""
    model, _, _ = make_lda_population(cfg)
    population = model.covariance()
    spec_sum = np.zeros(cfg.p)
    prec_sum = np.zeros(cfg.p)
    sqrt_gamma = np.sqrt(model.eigenvalues)
    for rep in range(cfg.reps):
        rng = np.random.default_rng(_cell_seed(cfg.seed, rep))
        x = DataMatrix(rng.standard_normal((cfg.n, cfg.p)) * sqrt_gamma, MeanMode.ZERO_MEAN)
        basis = eigendecompose(sample_covariance(x))
        spec_sum += spectrum_oracle(basis, population)
        prec_sum += precision_oracle(basis, population)
    spec_mean = spec_sum / cfg.reps
    prec_mean = prec_sum / cfg.reps
    return [
        {
            "rank": i,
            "spectrum_oracle": float(spec_mean[i]),
            "precision_oracle": float(prec_mean[i]),
            "ratio": float(prec_mean[i] / spec_mean[i]),
        }
        for i in range(cfg.p)
    ]


# ---------------------------------------------------------------------------
# runtime benchmark


def run_runtime_bench(
    p_values: Sequence[int],
    estimators: Sequence[str],
    ratio: float = 1.0 / 3.0,
    reps: int = 3,
    seed: int = 0,
) -> list[dict]:
    """Median wall-clock seconds per estimator per dimension (n = p / ratio)."""
    rows = []
    for p in p_values:
        n = int(round(p / ratio))
        gamma = spiked_spectrum(p, (0.2, 0.4, 0.4), (1.0, 3.0, 10.0))
        for est in estimators:
            times = []
            for rep in range(reps):
                rng = np.random.default_rng(_cell_seed(seed, p, rep))
                x = DataMatrix(rng.standard_normal((n, p)) * np.sqrt(gamma), MeanMode.ZERO_MEAN)
                t0 = time.perf_counter()
                estimate(x, est, seed=rep, population=SymmetricMatrix(np.diag(gamma)))
                times.append(time.perf_counter() - t0)
            rows.append(
                {"p": p, "n": n, "estimator": est,
                 "median_seconds": float(np.median(times)), "reps": reps}
            )
    return rows


# ---------------------------------------------------------------------------
# CSV output with stable formatting (byte-identical across reruns)


def _format_value(v) -> str:
    if isinstance(v, float):
        return format(v, ".10g")
    return str(v)


def write_csv(path, rows: list[dict]) -> list[str]:
    """Write rows with a fixed column order (keys of the first row)."""
    if not rows:
        raise ValueError("no rows to write")
    columns = list(rows[0].keys())
    with open(path, "w", encoding="ascii", newline="\n") as f:
        f.write(",".join(columns) + "\n")
        for row in rows:
            f.write(",".join(_format_value(row[c]) for c in columns) + "\n")
    return columns
