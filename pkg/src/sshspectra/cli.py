"""Experiment harness: ``sshspectra <experiment> --config FILE``.

Config files are flat ``section.key = value`` lines (``#`` starts a comment).  Per-task
seeds come from numpy's SeedSequence applied to (master_seed, task_index), so results do
not depend on the worker count.  Exit codes: 0 success, 2 config error, 3 invariant
violation or non-finite output during the run.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .disorder import DisorderSpec, ModelError, ScalarDistribution, kappa_moments
from .phase_dynamics import EpsMaxError, cached_constants, merge_accumulators, run_birkhoff
from .ds_processes import (collect_excursions, collect_passage_times, mean_passage_time,
                           optional_stopping_diagnostics, sandwich_check)
from .spectra_oracle import idos_oracle
from .theory import classify_scaling, solve_nu, solve_rho_tilde, spike_coefficient

EXPERIMENTS = ("lyapunov", "idos-sweep", "nu-solve", "nu-fit", "spike-check", "oracle-compare",
               "passage-stats", "comparison-verify", "classify")
MIN_STEPS = 1000
ORACLE_SLACK = 10
STOPPING_TILT = 0.75

KNOWN_KEYS = {
    "model.L", "model.t_dist", "model.m_dist", "model.m", "model.lambda", "model.mu",
    "model.omega_dist", "model.omega_prime_dist",
    "run.experiment", "run.n_steps", "run.seeds", "run.eps", "run.eps_lo", "run.eps_hi",
    "run.eps_count", "run.burn_in", "run.samples", "run.lambda", "run.N", "run.master_seed",
    "run.workers", "run.output", "fit.eps_lo", "fit.eps_hi",
}


class ConfigError(ValueError):
    pass


class InvariantViolation(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    spec: DisorderSpec
    eps: list
    n_steps: list
    seeds: int = 1
    burn_in: int = 1000
    samples: int = 10000
    lam: float | None = None
    N: int = 100000
    master_seed: int = 0
    workers: int = 1
    output: str | None = None
    fit_window: tuple = (0.0, math.inf)
    raw: dict = field(default_factory=dict)

    def digest(self):
        """sha256 over the parsed key/value pairs that affect numbers."""
        skip = {"run.workers", "run.output"}
        text = "\n".join(f"{k}={v}" for k, v in sorted(self.raw.items()) if k not in skip)
        text += f"\nexperiment={self.experiment}\nmaster_seed={self.master_seed}"
        return hashlib.sha256(text.encode()).hexdigest()


def read_config(text: str) -> dict:
    """Parse key = value lines into {key: (value, line_number)}."""
    out = {}
    for i, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"line {i}: expected 'section.key = value', got {line!r}")
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {i}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {i}: duplicate key {key!r} (first on line {out[key][1]})")
        out[key] = (value.strip(), i)
    return out


def _get(kv, key, conv, default=None):
    if key not in kv:
        return default
    value, line = kv[key]
    try:
        return conv(value)
    except (ValueError, ModelError) as exc:
        raise ConfigError(f"line {line}: {key}: {exc}") from None


def _floats(s):
    return [float(x) for x in s.split(",") if x.strip()]


def _ints(s):
    return [int(float(x)) for x in s.split(",") if x.strip()]


def _lam(s):
    return None if s.lower() == "default" else float(s)


def build_spec(kv) -> DisorderSpec:
    dist = ScalarDistribution.parse
    L = _get(kv, "model.L", int, 1)
    try:
        if "model.t_dist" in kv or "model.m_dist" in kv:
            if L != 1:
                raise ConfigError("model.t_dist / model.m_dist need model.L = 1")
            return DisorderSpec.random_hopping(_get(kv, "model.t_dist", dist, ScalarDistribution.point(1.0)),
                                               _get(kv, "model.m_dist", dist, ScalarDistribution.point(1.0)))
        return DisorderSpec(
            L=L, m=_get(kv, "model.m", float, 1.0),
            lambda_coupling=_get(kv, "model.lambda", float, 0.0),
            mu_coupling=_get(kv, "model.mu", float, 0.0),
            omega_dist=_get(kv, "model.omega_dist", dist, ScalarDistribution.point(0.0)),
            omega_prime_dist=_get(kv, "model.omega_prime_dist", dist, ScalarDistribution.point(0.0)))
    except ModelError as exc:
        raise ConfigError(f"model: {exc}") from None


def parse_config(text: str, experiment: str | None = None) -> ExperimentConfig:
    kv = read_config(text)
    exp = _get(kv, "run.experiment", str, None)
    if experiment is not None:
        if exp is not None and exp != experiment:
            raise ConfigError(f"line {kv['run.experiment'][1]}: config is for {exp!r}, not {experiment!r}")
        exp = experiment
    if exp not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {exp!r}")
    spec = build_spec(kv)
    if "run.eps" in kv:
        eps = _get(kv, "run.eps", _floats)
    elif "run.eps_lo" in kv:
        lo, hi = _get(kv, "run.eps_lo", float), _get(kv, "run.eps_hi", float)
        count = _get(kv, "run.eps_count", int, 10)
        if lo is None or hi is None or not 0 < lo <= hi or count < 1:
            raise ConfigError("run.eps_lo/eps_hi/eps_count must give 0 < lo <= hi and count >= 1")
        eps = list(np.geomspace(lo, hi, count)) if count > 1 else [lo]
    else:
        eps = [0.0] if exp in ("lyapunov", "nu-solve") else None
    if eps is None:
        raise ConfigError("missing energy grid: give run.eps or run.eps_lo/run.eps_hi/run.eps_count")
    n_steps = _get(kv, "run.n_steps", _ints, [10 ** 6])
    if len(n_steps) == 1:
        n_steps = n_steps * len(eps)
    if len(n_steps) != len(eps):
        raise ConfigError(f"line {kv['run.n_steps'][1]}: run.n_steps has {len(n_steps)} entries for {len(eps)} energies")
    if min(n_steps) < MIN_STEPS:
        raise ConfigError(f"run.n_steps must be >= {MIN_STEPS}")
    cfg = ExperimentConfig(
        experiment=exp, spec=spec, eps=[float(e) for e in eps], n_steps=n_steps,
        seeds=_get(kv, "run.seeds", int, 1), burn_in=_get(kv, "run.burn_in", int, 1000),
        samples=_get(kv, "run.samples", int, 10000), lam=_get(kv, "run.lambda", _lam, None),
        N=_get(kv, "run.N", int, 100000), master_seed=_get(kv, "run.master_seed", int, 0),
        workers=_get(kv, "run.workers", int, 1), output=_get(kv, "run.output", str, None),
        fit_window=(_get(kv, "fit.eps_lo", float, 0.0), _get(kv, "fit.eps_hi", float, math.inf)),
        raw={k: v for k, (v, _) in kv.items()})
    if cfg.seeds < 1 or cfg.samples < 2 or cfg.N < 2 or cfg.workers < 1 or cfg.burn_in < 0:
        raise ConfigError("run.seeds, run.samples, run.N, run.workers must be positive")
    if not 0 <= cfg.master_seed < 2 ** 64:
        raise ConfigError("run.master_seed must be an unsigned 64-bit integer")
    _validate_grid(cfg)
    return cfg


def _validate_grid(cfg):
    if cfg.experiment in ("nu-solve",):
        return
    allow_zero = cfg.experiment == "lyapunov"
    if cfg.experiment == "classify":
        bad = [e for e in cfg.eps if not 0 < e < 1]
        if bad:
            raise ConfigError(f"run.eps: classify needs 0 < eps < 1, got {bad[0]!r}")
        return
    try:
        eps_max = cached_constants(cfg.spec).eps_max
    except ModelError as exc:
        raise ConfigError(f"model: {exc}") from None
    for e in cfg.eps:
        if not (0 < e or (allow_zero and e == 0)) or e > eps_max:
            raise ConfigError(f"run.eps: {e!r} outside ({'[' if allow_zero else '('}0, eps_max = {eps_max!r}]")


def task_seed(master_seed: int, task_index: int) -> int:
    """64-bit seed for one task: SeedSequence entropy mixing of (master_seed, task_index)."""
    ss = np.random.SeedSequence([int(master_seed), int(task_index)])
    return int(ss.generate_state(1, np.uint64)[0])


# task bodies (top level so they pickle)

def _birkhoff_task(args):
    spec, eps, n, seed, burn = args
    return run_birkhoff(spec, eps, n, seed, burn_in=burn)


def _oracle_task(args):
    spec, eps, N, seed = args
    o = idos_oracle(spec, N, eps, seed)
    r = run_birkhoff(spec, eps, N, seed, burn_in=0)
    return o, 0.5 + r.idos_delta


def _sandwich_task(args):
    spec, eps, seed, lam = args
    return sandwich_check(spec, eps, seed, lam=lam)


def _run_tasks(fn, tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, tasks))


def _birkhoff_grid(cfg):
    tasks, keys = [], []
    for i, (e, n) in enumerate(zip(cfg.eps, cfg.n_steps)):
        for s in range(cfg.seeds):
            seed = task_seed(cfg.master_seed, i * cfg.seeds + s)
            tasks.append((cfg.spec, e, n, seed, cfg.burn_in))
            keys.append((e, n, seed))
    return keys, _run_tasks(_birkhoff_task, tasks, cfg.workers)


def pooled(results, L):
    """Pool several runs at one energy: merged Birkhoff sums, stderr from the batch spread."""
    acc = results[0].accumulator
    for r in results[1:]:
        acc = merge_accumulators(acc, r.accumulator)
    n = acc.n_steps
    idos = acc.sum_phase_shift / (math.pi * 2 * L * n)
    lyap = acc.sum_log_norm / n
    w = np.array([r.n_steps for r in results], float)
    w /= w.sum()
    se_i = math.sqrt(float(np.sum((w * [r.idos_stderr for r in results]) ** 2)))
    se_l = math.sqrt(float(np.sum((w * [r.lyapunov_stderr for r in results]) ** 2)))
    return n, idos, se_i, lyap, se_l


# experiments: each returns (columns, rows, summary lines)

def exp_lyapunov(cfg):
    keys, res = _birkhoff_grid(cfg)
    cols = ["eps", "seed", "n_steps", "lyapunov", "lyapunov_stderr", "idos_delta", "idos_stderr"]
    rows = [[e, seed, n, r.lyapunov, r.lyapunov_stderr, r.idos_delta, r.idos_stderr]
            for (e, n, seed), r in zip(keys, res)]
    summary = []
    for e in cfg.eps:
        group = [r for (k, _, _), r in zip(keys, res) if k == e]
        n, idos, se_i, lyap, se_l = pooled(group, cfg.spec.L)
        rows.append([e, -1, n, lyap, se_l, idos, se_i])
        summary.append(f"eps={e:.6g}: pooled lyapunov {lyap:.6f} +- {se_l:.2g} over {len(group)} seeds")
    return cols, rows, summary


def exp_idos_sweep(cfg):
    keys, res = _birkhoff_grid(cfg)
    cols = ["eps", "seed", "n_steps", "idos_delta", "idos_stderr", "lyapunov", "lyapunov_stderr"]
    rows = [[e, seed, n, r.idos_delta, r.idos_stderr, r.lyapunov, r.lyapunov_stderr]
            for (e, n, seed), r in zip(keys, res)]
    return cols, rows, [f"{len(rows)} runs over {len(cfg.eps)} energies"]


def _pooled_by_eps(cfg):
    keys, res = _birkhoff_grid(cfg)
    out = []
    for e in cfg.eps:
        out.append((e,) + pooled([r for (k, _, _), r in zip(keys, res) if k == e], cfg.spec.L))
    return out


def ols(x, y):
    """Ordinary least squares y = slope*x + intercept, with R^2."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    A = np.stack([x, np.ones_like(x)], axis=1)
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1 - np.sum(resid ** 2) / ss if ss > 0 else 1.0
    return float(slope), float(intercept), float(r2)


def exp_nu_solve(cfg):
    root = solve_nu(cfg.spec)
    ks = kappa_moments(cfg.spec)
    cols = ["nu", "residual", "bracket_lo", "bracket_hi", "convex", "mean_log_kappa"]
    rows = [[root.nu, root.residual, root.bracket[0], root.bracket[1], int(root.convex), ks.mean_log_kappa]]
    return cols, rows, [f"nu = {root.nu:.10f} (residual {root.residual:.2g})"]


def exp_nu_fit(cfg):
    pts = _pooled_by_eps(cfg)
    lo, hi = cfg.fit_window
    use = [p for p in pts if lo <= p[0] <= hi and p[2] > 0]
    if len(use) < 2:
        raise ModelError("nu-fit needs at least two energies with positive idos_delta in the fit window")
    slope, intercept, r2 = ols([math.log(p[0]) for p in use], [math.log(p[2]) for p in use])
    try:
        nu = solve_nu(cfg.spec).nu
    except ModelError:
        nu = math.nan
    cols = ["eps", "n_steps", "seeds", "idos_delta", "idos_stderr", "in_fit", "slope", "intercept",
            "r_squared", "nu_theory"]
    rows = [[e, n, cfg.seeds, idos, se, int(lo <= e <= hi and idos > 0), slope, intercept, r2, nu]
            for e, n, idos, se, _, _ in pts]
    return cols, rows, [f"slope {slope:.4f} (R^2 {r2:.4f}) against nu = {nu:.6f}"]


def exp_spike_check(cfg):
    pred = spike_coefficient(cfg.spec).coefficient
    pts = _pooled_by_eps(cfg)
    cols = ["eps", "n_steps", "seeds", "idos_delta", "idos_stderr", "scaled", "scaled_stderr",
            "prediction", "rel_deviation"]
    rows, summary = [], []
    for e, n, idos, se, _, _ in pts:
        l2 = math.log(e) ** 2
        rows.append([e, n, cfg.seeds, idos, se, idos * l2, se * l2, pred, idos * l2 / pred - 1])
        summary.append(f"eps={e:.3g}: idos*log^2 = {idos * l2:.5f} vs {pred:.5f}")
    return cols, rows, summary


def exp_oracle_compare(cfg):
    tasks, keys = [], []
    for i, e in enumerate(cfg.eps):
        for s in range(cfg.seeds):
            seed = task_seed(cfg.master_seed, i * cfg.seeds + s)
            tasks.append((cfg.spec, e, cfg.N, seed))
            keys.append((e, seed))
    res = _run_tasks(_oracle_task, tasks, cfg.workers)
    cols = ["eps", "seed", "N", "idos_oracle", "idos_birkhoff", "diff_times_N", "within_slack"]
    rows = [[e, seed, cfg.N, o, b, (o - b) * cfg.N, int(abs(o - b) * cfg.N <= ORACLE_SLACK)]
            for (e, seed), (o, b) in zip(keys, res)]
    worst = max(abs(r[5]) for r in rows)
    return cols, rows, [f"max N*|oracle - birkhoff| = {worst:.3f} (slack {ORACLE_SLACK})"]


def passage_estimates(spec, eps, samples, seed, lam):
    """(mean T, stderr, estimator, exponent, scaled rate, predicted inverse time) per process."""
    ks = kappa_moments(spec)
    out = {}
    if ks.balanced:
        for j, kind in enumerate(("slower", "faster")):
            T = collect_passage_times(spec, eps, samples, seed + j, kind=kind, lam=lam)
            m, se = float(T.mean()), float(T.std(ddof=1) / math.sqrt(len(T)))
            scaled = math.log(eps) ** 2 / ks.mean_log_kappa_sq / m
            out[kind] = (m, se, "direct", 0.0, scaled)
        return out
    nu = solve_nu(spec).nu
    rates = {"slower": nu}
    rates["faster"] = solve_rho_tilde(spec, lam if lam is not None else 1 / math.log(eps) ** 2)[0]
    for j, kind in enumerate(("slower", "faster")):
        tilt = rates[kind] if ks.exact else None
        st = collect_excursions(spec, eps, samples, seed + j, kind=kind, lam=lam, tilt=tilt)
        m, se = mean_passage_time(st)
        out[kind] = (m, se, "renewal-tilted" if tilt else "renewal", rates[kind], 1 / m / eps ** rates[kind])
    return out


def exp_passage_stats(cfg):
    cols = ["eps", "seed", "kind", "lambda", "n_samples", "estimator", "mean_T", "mean_T_stderr",
            "inverse_mean_T", "rate_exponent", "scaled_rate"]
    rows, summary = [], []
    for i, e in enumerate(cfg.eps):
        seed = task_seed(cfg.master_seed, i)
        lam = cfg.lam if cfg.lam is not None else 1 / math.log(e) ** 2
        est = passage_estimates(cfg.spec, e, cfg.samples, seed, cfg.lam)
        for kind, (m, se, how, rate, scaled) in est.items():
            rows.append([e, seed, kind, lam, cfg.samples, how, m, se, 1 / m, rate, scaled])
            summary.append(f"eps={e:.3g} {kind}: E T = {m:.6g} +- {se:.2g}, scaled rate {scaled:.4g}")
    return cols, rows, summary


def stopping_checks(spec, eps, samples, seed):
    """Optional-stopping residuals: r1, r2 from plain excursions, the exponential martingale
    from excursions drawn under the tilt STOPPING_TILT*nu (plain samples almost never see an
    up-exit, so their exponential mean is dominated by events that are not sampled)."""
    ks = kappa_moments(spec)
    plain = optional_stopping_diagnostics(collect_excursions(spec, eps, samples, seed), ks)
    if ks.balanced or not ks.exact:
        return plain, None, ks.balanced
    nu = solve_nu(spec).nu
    st = collect_excursions(spec, eps, samples, seed + 1, tilt=STOPPING_TILT * nu)
    return plain, optional_stopping_diagnostics(st, ks, nu=nu), False


def exp_comparison_verify(cfg):
    cols = ["eps", "seeds", "violations", "skipped", "r1", "r1_sigma", "r2", "r2_sigma",
            "exp_residual", "exp_sigma", "exp_up_exits", "stopping_passed"]
    rows, summary, bad = [], [], []
    for i, e in enumerate(cfg.eps):
        base = i * (cfg.seeds + 1)
        tasks = [(cfg.spec, e, task_seed(cfg.master_seed, base + s), cfg.lam) for s in range(cfg.seeds)]
        reps = _run_tasks(_sandwich_task, tasks, cfg.workers)
        nviol = sum(not r.ok for r in reps)
        bad += [r for r in reps if not r.ok]
        plain, tilted, balanced = stopping_checks(cfg.spec, e, cfg.samples,
                                                  task_seed(cfg.master_seed, base + cfg.seeds))
        ok = plain.passed(balanced=balanced) and (tilted is None or tilted.passed())
        # empty cells: the exponential martingale only applies to unbalanced discrete laws
        ex = (tilted.exp_residual, tilted.exp_sigma, tilted.n_up) if tilted else ("", "", "")
        rows.append([e, cfg.seeds, nviol, sum(r.skipped for r in reps), plain.r1, plain.r1_sigma,
                     plain.r2, plain.r2_sigma, *ex, int(ok)])
        summary.append(f"eps={e:.3g}: {nviol} sandwich violations over {cfg.seeds} seeds, "
                       f"stopping diagnostics {'passed' if ok else 'FAILED'}")
    if bad:
        r = bad[0]
        raise InvariantViolation(
            f"sandwich violated at eps={r.eps} seed={r.seed}: N1={r.N1} N2={r.N2} "
            f"T_slower={r.T_slower} T_faster={r.T_faster} points={r.pointwise_violations}",
            (cols, rows, summary))
    return cols, rows, summary


def exp_classify(cfg):
    m = kappa_moments(cfg.spec).mean_log_kappa
    cols = ["eps", "mean_log_kappa", "criterion", "label"]
    rows = []
    for e in cfg.eps:
        r = classify_scaling(e, m)
        rows.append([e, m, r.criterion, r.label])
    return cols, rows, [f"eps={r[0]:.3g}: {r[3]} ({r[2]:.4g})" for r in rows]


RUNNERS = {
    "lyapunov": exp_lyapunov, "idos-sweep": exp_idos_sweep, "nu-solve": exp_nu_solve,
    "nu-fit": exp_nu_fit, "spike-check": exp_spike_check, "oracle-compare": exp_oracle_compare,
    "passage-stats": exp_passage_stats, "comparison-verify": exp_comparison_verify,
    "classify": exp_classify,
}

UNITS = ("eps and energies in units of the bare hopping; idos_delta per orbital per cell; "
         "lyapunov per cell; times in steps")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        if not math.isfinite(v):
            raise InvariantViolation(f"non-finite value {v!r} in output")
        return format(float(v), ".17g")
    return str(v)


def render_csv(cfg, cols, rows, timestamps=True, failure=None):
    buf = io.StringIO()
    buf.write(f"# experiment={cfg.experiment} config_sha256={cfg.digest()} master_seed={cfg.master_seed}\n")
    buf.write(f"# units: {UNITS}\n")
    w = csv.writer(buf, lineterminator="\n")
    header = ["experiment"] + cols + (["timestamp"] if timestamps else [])
    w.writerow(header)
    for r in rows:
        cells = [cfg.experiment] + [_fmt(v) for v in r]
        if timestamps:
            cells.append(datetime.now(timezone.utc).isoformat(timespec="seconds"))
        w.writerow(cells)
    if failure is not None:
        w.writerow(["FAILED", failure])
    return buf.getvalue()


def run_experiment(cfg: ExperimentConfig, timestamps=True):
    """Run one experiment; returns (csv_text, summary_lines, exit_code)."""
    runner = RUNNERS[cfg.experiment]
    try:
        cols, rows, summary = runner(cfg)
        return render_csv(cfg, cols, rows, timestamps), summary, 0
    except InvariantViolation as exc:
        msg = str(exc.args[0])
        partial = exc.args[1] if len(exc.args) > 1 else None
        if partial is None:
            return render_csv(cfg, [], [], timestamps, failure=msg), [msg], 3
        cols, rows, summary = partial
        try:
            text = render_csv(cfg, cols, rows, timestamps, failure=msg)
        except InvariantViolation:
            text = render_csv(cfg, [], [], timestamps, failure=msg)
        return text, summary + [msg], 3
    except ConfigError as exc:
        return render_csv(cfg, [], [], timestamps, failure=str(exc)), [f"config error: {exc}"], 2
    except (EpsMaxError, ModelError, FloatingPointError) as exc:
        msg = f"{type(exc).__name__}: {exc}"
        return render_csv(cfg, [], [], timestamps, failure=msg), [msg], 3


def main(argv=None):
    p = argparse.ArgumentParser(prog="sshspectra", description="Disordered SSH chain spectral experiments")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", required=True, help="flat section.key = value file")
    p.add_argument("--output", help="CSV path (default: <experiment>.csv)")
    p.add_argument("--workers", type=int, help="worker processes")
    p.add_argument("--master-seed", type=int, help="unsigned 64-bit master seed")
    p.add_argument("--no-timestamps", action="store_true", help="omit the timestamp column")
    a = p.parse_args(argv)
    try:
        with open(a.config, encoding="utf-8") as f:
            cfg = parse_config(f.read(), a.experiment)
        if a.workers is not None:
            if a.workers < 1:
                raise ConfigError("--workers must be positive")
            cfg.workers = a.workers
        if a.master_seed is not None:
            if not 0 <= a.master_seed < 2 ** 64:
                raise ConfigError("--master-seed must be an unsigned 64-bit integer")
            cfg.master_seed = a.master_seed
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    text, summary, code = run_experiment(cfg, timestamps=not a.no_timestamps)
    out = a.output or cfg.output or f"{cfg.experiment}.csv"
    with open(out, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    for line in summary:
        print(line)
    print(f"wrote {out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
