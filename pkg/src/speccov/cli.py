"""Command-line entry point: estimate covariances from data files, run the
simulation studies from a declarative config, run the fast self-test, and
benchmark estimator runtimes.

Exit codes: 0 ok, 2 usage/config error, 3 runtime/estimator failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .core import (
    DataMatrix,
    MeanMode,
    SymmetricMatrix,
    eigendecompose,
    matrix_from_binary,
    matrix_from_csv,
    matrix_to_binary,
    matrix_to_csv,
    random_rotation,
)
from .estimators import (
    ESTIMATOR_IDS,
    estimate,
    isotonic_correct,
    loo_cvc,
    precision_oracle,
    rebuild,
    sample_covariance,
    spectrum_oracle,
)
from .metrics import seprial_from_losses
from .rmt import Concentration, SpectralDistribution, mp_fixed_point
from .simulate import (
    LdaGridConfig,
    SeprialGridConfig,
    run_lda_grid,
    run_loo_instability,
    run_oracle_comparison,
    run_runtime_bench,
    run_seprial_grid,
    write_csv,
)

USAGE_ERROR = 2
RUNTIME_ERROR = 3


def _default_threads(args) -> int:
    if args.threads is not None:
        return args.threads
    return int(os.environ.get("SPECCOV_THREADS", "1"))


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat()


def _write_manifest(out_dir: Path, command: str, config_bytes: bytes, seed, started: str,
                    outputs: list[str]) -> Path:
    manifest = {
        "command": command,
        "config_hash": hashlib.sha256(config_bytes).hexdigest(),
        "seed": seed,
        "started": started,
        "finished": _utcnow(),
        "version": __version__,
        "outputs": outputs,
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="ascii")
    return path


def _load_data(path: str, centered: bool) -> DataMatrix:
    values = matrix_from_binary(path) if path.endswith(".bin") else matrix_from_csv(path)
    return DataMatrix(values, MeanMode.CENTERED if centered else MeanMode.ZERO_MEAN)


def cmd_estimate(args) -> int:
    if args.method not in ESTIMATOR_IDS:
        print(
            f"unknown method '{args.method}'; valid identifiers: {', '.join(ESTIMATOR_IDS)}",
            file=sys.stderr,
        )
        return USAGE_ERROR
    try:
        data = _load_data(args.input, args.centered)
        population = None
        if args.population:
            population = SymmetricMatrix(matrix_from_csv(args.population))
    except Exception as exc:
        print(f"input parse failure: {exc}", file=sys.stderr)
        return USAGE_ERROR
    started = _utcnow()
    try:
        est = estimate(data, args.method, seed=args.seed, population=population)
    except Exception as exc:
        print(f"estimator failure: {exc}", file=sys.stderr)
        return RUNTIME_ERROR
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.format == "bin":
        cov_path = out_dir / "covariance.bin"
        matrix_to_binary(est.matrix.values, cov_path)
    else:
        cov_path = out_dir / "covariance.csv"
        matrix_to_csv(est.matrix.values, cov_path)
    spec_path = out_dir / "spectrum.csv"
    matrix_to_csv(est.corrected_spectrum[None, :], spec_path)
    config_bytes = json.dumps(
        {"input": args.input, "method": args.method, "seed": args.seed}, sort_keys=True
    ).encode()
    _write_manifest(out_dir, "estimate", config_bytes, args.seed, started,
                    [cov_path.name, spec_path.name])
    if args.stdout:
        sys.stdout.write(Path(cov_path).read_text() if args.format == "csv" else "")
    return 0


_EXPERIMENTS = ("seprial", "lda-grid", "loo-instability", "oracle-comparison", "runtime-bench")


def _run_experiment(config: dict, threads: int) -> list[dict]:
    kind = config.get("experiment")
    estimators = config.get("estimators", ["sample", "lw", "iso-10f-cvc"])
    seed = int(config.get("seed", 0))
    reps = int(config.get("reps", 10))
    if kind == "seprial":
        cfg = SeprialGridConfig(
            p_values=tuple(config.get("p_values", [90])),
            ratio=float(config.get("ratio", 1.0 / 3.0)),
            reps=reps,
            seed=seed,
            rotate=bool(config.get("rotate", True)),
        )
        return run_seprial_grid(cfg, estimators, threads=threads).rows()
    if kind == "lda-grid":
        base = LdaGridConfig(
            p=int(config.get("p", 100)),
            n=int(config.get("n", 200)),
            target_bayes=float(config.get("target_bayes", 0.9)),
            reps=reps,
            seed=seed,
            test_size=int(config.get("test_size", 10_000)),
        )
        alphas = config.get("alphas", [0.0, 0.5, 1.0, 1.5, 2.0])
        betas = config.get("betas", [-1.0, -0.5, 0.0, 0.5, 1.0])
        return run_lda_grid(alphas, betas, estimators, base, threads=threads).rows()
    if kind == "loo-instability":
        return run_loo_instability(
            p=int(config.get("p", 50)),
            n=int(config.get("n", 1000)),
            reps=reps,
            seed=seed,
        ).rows()
    if kind == "oracle-comparison":
        cfg = LdaGridConfig(
            p=int(config.get("p", 100)),
            n=int(config.get("n", 200)),
            alpha=float(config.get("alpha", 2.0)),
            beta=float(config.get("beta", 0.0)),
            reps=reps,
            seed=seed,
        )
        return run_oracle_comparison(cfg)
    if kind == "runtime-bench":
        return run_runtime_bench(
            p_values=[int(p) for p in config.get("p_values", [50, 100])],
            estimators=estimators,
            ratio=float(config.get("ratio", 1.0 / 3.0)),
            reps=reps,
            seed=seed,
        )
    raise ValueError(f"experiment must be one of {', '.join(_EXPERIMENTS)}, got {kind!r}")


def cmd_simulate(args) -> int:
    try:
        config_bytes = Path(args.config).read_bytes()
        config = json.loads(config_bytes)
    except Exception as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    if config.get("experiment") not in _EXPERIMENTS:
        print(
            f"config error: field 'experiment' must be one of {', '.join(_EXPERIMENTS)}",
            file=sys.stderr,
        )
        return USAGE_ERROR
    started = _utcnow()
    threads = _default_threads(args)
    try:
        rows = _run_experiment(config, threads)
    except (ValueError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except Exception as exc:
        print(f"simulation failure: {exc}", file=sys.stderr)
        return RUNTIME_ERROR
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{config['experiment']}.csv"
    write_csv(csv_path, rows)
    _write_manifest(out_dir, "simulate", config_bytes, config.get("seed", 0), started,
                    [csv_path.name])
    if args.stdout:
        sys.stdout.write(csv_path.read_text())
    return 0


def _selftest_checks() -> list[tuple[str, bool, str]]:
    rng = np.random.default_rng(12345)
    checks: list[tuple[str, bool, str]] = []

    def record(name, ok, detail=""):
        checks.append((name, bool(ok), detail))

    # eigendecomposition round trip
    a = rng.standard_normal((8, 8))
    m = SymmetricMatrix((a + a.T) / 2.0)
    dec = eigendecompose(m)
    recon = (dec.eigenvectors * dec.eigenvalues) @ dec.eigenvectors.T
    rel = np.linalg.norm(recon - m.values) / np.linalg.norm(m.values)
    record("eigen.round_trip", rel < 1e-8, f"relative error {rel:.2e}")

    # isotonic regression: projection value and sum preservation
    proj = isotonic_correct(np.array([1.0, 3.0, 2.0]))
    record("isotonic.projection", np.allclose(proj, [2.0, 2.0, 2.0]), str(proj))
    y = rng.standard_normal(200)
    record(
        "isotonic.sum_preserved",
        abs(isotonic_correct(y).sum() - y.sum()) < 1e-10 * max(abs(y.sum()), 1.0),
        "",
    )

    # SEPRIAL identities
    losses_sample = rng.uniform(1.0, 2.0, 16)
    r0 = seprial_from_losses(losses_sample, losses_sample)
    r100 = seprial_from_losses(np.zeros(16), losses_sample)
    record("seprial.identities", abs(r0.value) < 1e-9 and abs(r100.value - 100) < 1e-9,
           f"sample={r0.value:.2e} oracle={r100.value:.4f}")

    # oracle ordering: precision oracle below spectrum oracle
    gamma = np.linspace(5.0, 1.0, 6)
    x = DataMatrix(rng.standard_normal((30, 6)) * np.sqrt(gamma), MeanMode.ZERO_MEAN)
    basis = eigendecompose(sample_covariance(x))
    pop = SymmetricMatrix(np.diag(gamma))
    record(
        "oracle.harmonic_ordering",
        np.all(precision_oracle(basis, pop) <= spectrum_oracle(basis, pop) + 1e-12),
        "",
    )

    # rotation invariance of loo-cvc
    gamma = np.array([4.0, 2.0, 1.0, 0.5])
    x = rng.standard_normal((24, 4)) * np.sqrt(gamma)
    q = random_rotation(4, 7)
    s1 = loo_cvc(DataMatrix(x, MeanMode.ZERO_MEAN)).corrected_spectrum
    s2 = loo_cvc(DataMatrix(x @ q.T, MeanMode.ZERO_MEAN)).corrected_spectrum
    record("loo_cvc.rotation_invariance", np.abs(s1 - s2).max() < 1e-8,
           f"max deviation {np.abs(s1 - s2).max():.2e}")

    # Marchenko-Pastur closed form for an identity population
    h = SpectralDistribution(np.array([1.0]), np.array([1.0]))
    c = Concentration(3.0)
    ok = True
    worst = 0.0
    for zr in np.linspace(0.2, 3.5, 10):
        z = complex(zr, 0.05)
        m = mp_fixed_point(h, c, z).m_f
        y = 1.0 / c.c
        disc = np.sqrt(complex((1 - y - z) ** 2 - 4 * y * z))
        roots = [((1 - y - z) + s * disc) / (2 * y * z) for s in (1, -1)]
        m_ref = max(roots, key=lambda r: r.imag)
        worst = max(worst, abs(m - m_ref))
        ok = ok and abs(m - m_ref) < 1e-8
    record("mp.closed_form", ok, f"max |m - m_ref| = {worst:.2e}")

    return checks


def cmd_selftest(args) -> int:
    checks = _selftest_checks()
    if args.json:
        report = [{"name": n, "pass": ok, "detail": d} for n, ok, d in checks]
        print(json.dumps({"checks": report, "ok": all(ok for _, ok, _ in checks)}, indent=2))
    else:
        for name, ok, detail in checks:
            status = "PASS" if ok else "FAIL"
            line = f"{status}  {name}"
            if detail:
                line += f"  ({detail})"
            print(line)
    return 0 if all(ok for _, ok, _ in checks) else RUNTIME_ERROR


def cmd_bench(args) -> int:
    rows = run_runtime_bench(
        p_values=args.p_values,
        estimators=args.estimators,
        ratio=args.ratio,
        reps=args.reps,
        seed=args.seed,
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "runtime-bench.csv"
    write_csv(csv_path, rows)
    if args.stdout:
        sys.stdout.write(csv_path.read_text())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="speccov",
                                     description="spectrum-correction covariance estimation")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_est = sub.add_parser("estimate", help="estimate a covariance matrix from a data file")
    p_est.add_argument("input", help="data matrix (CSV with '# rows=.. cols=..' header, or .bin)")
    p_est.add_argument("--method", required=True)
    p_est.add_argument("--seed", type=int, default=0)
    p_est.add_argument("--centered", action="store_true",
                       help="treat the data as not zero-mean")
    p_est.add_argument("--population", default=None,
                       help="population covariance CSV (oracle methods)")
    p_est.add_argument("--format", choices=("csv", "bin"), default="csv")
    p_est.add_argument("--out", default=".")
    p_est.add_argument("--stdout", action="store_true")
    p_est.set_defaults(func=cmd_estimate)

    p_sim = sub.add_parser("simulate", help="run a simulation experiment from a config file")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--out", default=".")
    p_sim.add_argument("--threads", type=int, default=None)
    p_sim.add_argument("--stdout", action="store_true")
    p_sim.set_defaults(func=cmd_simulate)

    p_self = sub.add_parser("selftest", help="run the fast acceptance subset")
    p_self.add_argument("--json", action="store_true")
    p_self.set_defaults(func=cmd_selftest)

    p_bench = sub.add_parser("bench", help="benchmark estimator runtimes")
    p_bench.add_argument("--p-values", type=int, nargs="+", default=[50, 100])
    p_bench.add_argument("--estimators", nargs="+", default=["iso-10f-cvc", "iso-loo-cvc"])
    p_bench.add_argument("--ratio", type=float, default=1.0 / 3.0)
    p_bench.add_argument("--reps", type=int, default=3)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--out", default=".")
    p_bench.add_argument("--stdout", action="store_true")
    p_bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
