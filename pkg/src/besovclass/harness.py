"""Batch experiment runner: data generation, chain execution over
(truth, prior, n, replication) cells, incremental persistence, table
aggregation, and the bundled validation oracles.

Every cell derives its RNG streams from the master seed and its indices,
so results are bit-reproducible under any worker schedule.  Rows are
appended to a partial file as they complete (crash-resumable) and the
final results file is written sorted and atomically.
"""
from __future__ import annotations

import csv
import os
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field, replace

import numpy as np

from .model import (
    GroundTruth,
    generate_data,
    l1_error,
    stream,
    write_dataset_csv,
)
from .priors import GaussianComparatorSpec, NumericalError
from .samplers import (
    ChainDivergedError,
    GaussianChainSpec,
    LaplaceChainSpec,
    SamplerConfig,
    run_chain,
)
from .wavelets import WaveletBasis, write_grid_csv

__all__ = [
    "ExperimentConfig",
    "RESULT_COLUMNS",
    "run_experiment",
    "aggregate",
    "validate",
    "parse_config_file",
]

TRUTH_IDS = {"sigmoid1d": 1, "step1d": 2, "skewnormal2d": 3, "block2d": 4}
PRIOR_IDS = {"laplace": 1, "gaussian": 2}

RESULT_COLUMNS = (
    "truth,prior,n,rep,abs_l1,rel_l1,wall_s,acc_alpha,acc_field,seed,status"
)


@dataclass(frozen=True)
class ExperimentConfig:
    truth: str
    priors: tuple[str, ...] = ("laplace", "gaussian")
    n_list: tuple[int, ...] = (50, 200, 1000, 5000)
    replications: int = 10
    iterations: int = 25000
    burn_in: int = 10000
    thinning: int = 1
    adapt: bool = True
    delta1: float = 0.1
    delta2: float = 0.01
    laplace_scale: float = 2.0
    wavelet_level_1d: int = 10
    wavelet_level_2d: int = 5
    gp_level_1d: int = 8
    gp_level_2d: int = 5
    out_dir: str = "results"
    master_seed: int = 20240801
    workers: int = 4

    def __post_init__(self):
        if self.truth not in TRUTH_IDS:
            raise ValueError(f"unknown truth {self.truth!r}")
        for p in self.priors:
            if p not in PRIOR_IDS:
                raise ValueError(f"unknown prior {p!r}")
        if list(self.n_list) != sorted(set(self.n_list)):
            raise ValueError("n_list must be strictly increasing")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        d = 1 if self.truth in ("sigmoid1d", "step1d") else 2
        for n in self.n_list:
            if np.log(n) <= d:
                raise ValueError(
                    f"n={n} leaves the smoothness hyper-prior support empty for d={d}"
                )

    @property
    def dimension(self) -> int:
        return 1 if self.truth in ("sigmoid1d", "step1d") else 2

    def fingerprint(self) -> str:
        fields = (
            self.truth, self.priors, self.n_list, self.replications,
            self.iterations, self.burn_in, self.thinning, self.adapt,
            self.delta1, self.delta2, self.laplace_scale,
            self.wavelet_level_1d, self.wavelet_level_2d,
            self.gp_level_1d, self.gp_level_2d, self.master_seed,
        )
        return repr(fields)


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and np.isnan(x)):
        return "nan"
    return repr(float(x))


def run_cell(cfg: ExperimentConfig, prior: str, n: int, rep: int) -> dict:
    """Run one (prior, n, replication) chain; returns the result row and,
    for the first replication, persists plotting artifacts."""
    truth = GroundTruth(cfg.truth)
    d = cfg.dimension
    data = generate_data(
        truth, n, stream(cfg.master_seed, 0, TRUTH_IDS[cfg.truth], n, rep)
    )
    chain_ss = np.random.SeedSequence(
        cfg.master_seed,
        spawn_key=(1, TRUTH_IDS[cfg.truth], PRIOR_IDS[prior], n, rep),
    )
    seed64 = int(chain_ss.generate_state(1, dtype=np.uint64)[0])
    scfg = SamplerConfig(
        delta1=cfg.delta1,
        delta2=cfg.delta2,
        iterations=cfg.iterations,
        burn_in=cfg.burn_in,
        thinning=cfg.thinning,
        adapt=cfg.adapt,
        seed=chain_ss,
    )
    if prior == "laplace":
        level = cfg.wavelet_level_1d if d == 1 else cfg.wavelet_level_2d
        spec = LaplaceChainSpec(
            basis=WaveletBasis(dimension=d, max_level=level),
            prior_n=n,
            laplace_scale=cfg.laplace_scale,
        )
    else:
        level = cfg.gp_level_1d if d == 1 else cfg.gp_level_2d
        spec = GaussianChainSpec(gp=GaussianComparatorSpec(dimension=d, max_level=level))

    row = {
        "truth": cfg.truth, "prior": prior, "n": n, "rep": rep,
        "seed": seed64, "status": "ok",
        "abs_l1": float("nan"), "rel_l1": float("nan"),
        "wall_s": float("nan"),
        "acc_alpha": float("nan"), "acc_field": float("nan"),
    }
    t0 = time.perf_counter()
    try:
        summary = run_chain(prior, data, scfg, spec)
    except (ChainDivergedError, NumericalError) as exc:
        row["status"] = f"failed:{type(exc).__name__}"
        row["wall_s"] = time.perf_counter() - t0
        return row
    row["wall_s"] = time.perf_counter() - t0
    abs_l1, rel_l1 = l1_error(summary.mean_p, truth)
    row["abs_l1"] = abs_l1
    row["rel_l1"] = float("nan") if rel_l1 is None else rel_l1
    row["acc_alpha"] = summary.accept_hyper
    row["acc_field"] = summary.accept_field

    if rep == 0:
        base = os.path.join(cfg.out_dir, f"{cfg.truth}_{prior}_n{n}")
        _atomic_grid(summary.mean_p, base + "_mean.csv")
        _atomic_grid(summary.band_low, base + "_band_low.csv")
        _atomic_grid(summary.band_high, base + "_band_high.csv")
        dpath = os.path.join(cfg.out_dir, f"{cfg.truth}_n{n}_data.csv")
        tmp = dpath + f".tmp.{prior}"
        write_dataset_csv(data, tmp)
        os.replace(tmp, dpath)
    return row


def _atomic_grid(gf, path: str) -> None:
    write_grid_csv(gf, path + ".tmp")
    os.replace(path + ".tmp", path)


def _row_line(row: dict) -> str:
    return ",".join(
        [
            row["truth"], row["prior"], str(row["n"]), str(row["rep"]),
            _fmt(row["abs_l1"]), _fmt(row["rel_l1"]),
            f"{row['wall_s']:.3f}",
            _fmt(row["acc_alpha"]), _fmt(row["acc_field"]),
            str(row["seed"]), row["status"],
        ]
    )


def run_experiment(cfg: ExperimentConfig) -> str:
    """Run all cells, append rows incrementally, and write the sorted
    results file atomically.  Returns the results file path."""
    os.makedirs(cfg.out_dir, exist_ok=True)
    results_path = os.path.join(cfg.out_dir, "results.csv")
    partial_path = os.path.join(cfg.out_dir, "results.partial.csv")
    header = f"# config={cfg.fingerprint()}"

    done: dict[tuple, str] = {}
    if os.path.exists(partial_path):
        with open(partial_path) as fh:
            first = fh.readline().rstrip("\n")
            if first == header:
                fh.readline()  # column names
                for line in fh:
                    line = line.rstrip("\n")
                    if line:
                        t, p, n, r = line.split(",")[:4]
                        done[(t, p, int(n), int(r))] = line
            # stale partials from another config are discarded

    tasks = [
        (prior, n, rep)
        for prior in cfg.priors
        for n in cfg.n_list
        for rep in range(cfg.replications)
        if (cfg.truth, prior, n, rep) not in done
    ]

    mode = "a" if done else "w"
    with open(partial_path, mode) as partial:
        if not done:
            partial.write(header + "\n")
            partial.write(RESULT_COLUMNS + "\n")
        if tasks:
            if cfg.workers > 1:
                with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                    futs = {
                        pool.submit(run_cell, cfg, prior, n, rep): (prior, n, rep)
                        for prior, n, rep in tasks
                    }
                    for fut in as_completed(futs):
                        row = fut.result()
                        key = (row["truth"], row["prior"], row["n"], row["rep"])
                        done[key] = _row_line(row)
                        partial.write(done[key] + "\n")
                        partial.flush()
            else:
                for prior, n, rep in tasks:
                    row = run_cell(cfg, prior, n, rep)
                    key = (row["truth"], row["prior"], row["n"], row["rep"])
                    done[key] = _row_line(row)
                    partial.write(done[key] + "\n")
                    partial.flush()

    order = {p: i for i, p in enumerate(cfg.priors)}
    keys = sorted(done, key=lambda k: (k[0], order.get(k[1], 99), k[2], k[3]))
    tmp = results_path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(RESULT_COLUMNS + "\n")
        for k in keys:
            fh.write(done[k] + "\n")
    os.replace(tmp, results_path)
    os.remove(partial_path)
    return results_path


def aggregate(results_path: str, out_path: str) -> str:
    """Per-(truth, prior, n) means and sample standard deviations of the
    L1 errors, mirroring the paper-style tables."""
    cells: dict[tuple, list[tuple[float, float]]] = {}
    with open(results_path) as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            if row["status"] != "ok":
                continue
            key = (row["truth"], row["prior"], int(row["n"]))
            cells.setdefault(key, []).append(
                (float(row["abs_l1"]), float(row["rel_l1"]))
            )
    lines = ["truth,prior,n,reps,mean_abs_l1,sd_abs_l1,mean_rel_l1,sd_rel_l1"]
    for key in sorted(cells):
        vals = np.array(cells[key])
        m_abs, m_rel = vals.mean(axis=0)
        if vals.shape[0] > 1:
            sd_abs, sd_rel = vals.std(axis=0, ddof=1)
        else:
            sd_abs = sd_rel = 0.0
        lines.append(
            f"{key[0]},{key[1]},{key[2]},{vals.shape[0]},"
            f"{m_abs!r},{sd_abs!r},{m_rel!r},{sd_rel!r}"
        )
    tmp = out_path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, out_path)
    return out_path


# -- bundled validation oracles -------------------------------------------------

def validate(mode: str, verbose: bool = True) -> bool:
    """Run one of the derived-oracle suites; prints measured statistics
    against thresholds and returns overall pass/fail."""
    checks = {
        "roundtrip": _validate_roundtrip,
        "whitening": _validate_whitening,
        "prior-recovery": _validate_prior_recovery,
        "oracle": _validate_oracle,
    }
    if mode not in checks:
        raise ValueError(f"unknown validation mode {mode!r}")
    results = checks[mode]()
    ok = True
    for name, value, threshold in results:
        passed = value < threshold
        ok &= passed
        if verbose:
            print(f"[{'PASS' if passed else 'FAIL'}] {name}: {value:.3e} < {threshold:.0e}")
    return ok


def _validate_roundtrip():
    from .wavelets import Boundary, CoefficientVector, Family, analyze, synthesize

    rng = np.random.default_rng(0)
    out = []
    for fam in Family:
        for d, J in ((1, 10), (2, 5)):
            basis = WaveletBasis(family=fam, dimension=d, max_level=J)
            c = rng.standard_normal((250, basis.truncation))
            worst = worst_p = 0.0
            for row in c:
                cv = CoefficientVector(row, basis)
                f = synthesize(cv)
                back = analyze(f, basis)
                worst = max(worst, float(np.max(np.abs(back.values - row))))
                worst_p = max(
                    worst_p,
                    abs(np.sqrt(np.mean(f.values ** 2)) - np.linalg.norm(row)),
                )
            out.append((f"roundtrip {fam.value} d={d}", worst, 1e-10))
            out.append((f"parseval {fam.value} d={d}", worst_p, 1e-8))
    return out


def _validate_whitening():
    import scipy.stats as st

    from .priors import whitening_core

    rng = np.random.default_rng(1)
    ks = st.kstest(
        whitening_core(rng.standard_normal(100_000)), st.laplace(scale=1.0).cdf
    ).statistic
    return [("whitening KS vs Laplace", float(ks), 0.01)]


def _validate_prior_recovery():
    import scipy.stats as st

    from .model import Dataset
    from .priors import SmoothnessHyperPrior
    from .samplers import ChainState, hyper_step, wpcn_step
    from .wavelets import Family

    n_prior, d = 1000, 1
    basis = WaveletBasis(family=Family.HAAR, dimension=1, max_level=6)
    strat = LaplaceChainSpec(basis=basis, prior_n=n_prior).build()
    loglik = lambda w: 0.0
    rng = np.random.Generator(np.random.Philox(5))
    xi = rng.standard_normal(64)
    w, om = strat.field(2.0, xi)
    state = ChainState(2.0, xi, om, w, 0.0)
    thin, keep, burn = 20, 10_000, 2000
    alphas = np.empty(keep)
    omega1 = np.empty(keep)
    kept = 0
    for s in range(1, burn + keep * thin + 1):
        state, _ = hyper_step(state, strat, loglik, 1.5, rng)
        state, _ = wpcn_step(state, strat, loglik, 0.45, rng)
        if s > burn and (s - burn - 1) % thin == 0:
            alphas[kept] = state.hyper
            omega1[kept] = state.omega[0]
            kept += 1
    hp = SmoothnessHyperPrior(n_prior, d)
    lo, hi = hp.support
    grid = np.linspace(lo, hi, 20001)[1:]
    dens = np.exp([hp.logdensity(a) for a in grid])
    cdf = np.concatenate(
        [[0.0], np.cumsum((dens[1:] + dens[:-1]) / 2.0 * np.diff(grid))]
    )
    cdf /= cdf[-1]
    ks_a = st.kstest(alphas, lambda x: np.interp(x, grid, cdf)).statistic
    nodes, wts = np.polynomial.legendre.leggauss(400)
    a_nodes = 0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)
    a_w = 0.5 * (hi - lo) * wts * np.exp([hp.logdensity(a) for a in a_nodes])
    a_w /= a_w.sum()
    scales = float(n_prior) ** (-1.0 / (2.0 * a_nodes + 1.0))

    def omega_cdf(t):
        return st.laplace.cdf(np.atleast_1d(t)[:, None] / scales[None, :]) @ a_w

    ks_w = st.kstest(omega1, omega_cdf).statistic
    return [
        ("prior recovery alpha KS", float(ks_a), 0.02),
        ("prior recovery omega1 KS", float(ks_w), 0.03),
    ]


def _validate_oracle():
    gap = small_instance_oracle_gap()
    return [("L=2 quadrature vs MCMC gap", gap, 0.02)]


def small_instance_oracle_gap(seed: int = 7) -> float:
    """Max per-coordinate gap between the MCMC posterior mean of the two
    whitened-Laplace coefficients and a 400x400 quadrature oracle."""
    from scipy.special import logsumexp

    from .model import generate_data
    from .samplers import run_chain
    from .wavelets import Family

    truth = GroundTruth("step1d")
    data = generate_data(truth, 10, 123)
    basis = WaveletBasis(family=Family.HAAR, dimension=1, max_level=1)
    spec = LaplaceChainSpec(basis=basis, prior_n=10, laplace_scale=1.0, alpha_fixed=2.0)
    cfg = SamplerConfig(
        iterations=110_000, burn_in=10_000, seed=seed, delta2=0.05, adapt=False
    )
    summary = run_chain("laplace", data, cfg, spec)
    mw = summary.mean_w.values
    mcmc = np.array([(mw[0] + mw[1]) / 2.0, (mw[0] - mw[1]) / 2.0])

    s1 = 10.0 ** (-0.2)
    s2 = s1 * 2.0 ** (-1.5)
    g = np.linspace(-4.0, 4.0, 400)
    w1, w2 = np.meshgrid(g, g, indexing="ij")
    sgn = np.where(data.X[:, 0] < 0.5, 1.0, -1.0)
    wpts = w1[..., None] + w2[..., None] * sgn[None, None, :]
    y = data.Y[None, None, :]
    ll = -(y * np.logaddexp(0, -wpts) + (1 - y) * np.logaddexp(0, wpts)).sum(axis=-1)
    logpost = ll - np.abs(w1) / s1 - np.abs(w2) / s2
    post = np.exp(logpost - logsumexp(logpost))
    quad = np.array([(post * w1).sum(), (post * w2).sum()])
    return float(np.max(np.abs(mcmc - quad)))


# -- flat key=value config files --------------------------------------------------

def parse_config_file(path: str) -> dict[str, str]:
    """One `key = value` per line; blank lines and #-comments ignored."""
    out: dict[str, str] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out
