"""End-to-end experiments: simulate both systems, persist, analyse, report.

Replications are independent tasks. Each one draws from streams keyed by
``(seed, role, replication_id)`` and results are merged by replication id, so
the data files do not depend on the worker count. Worker processes are
forked after the model and the (prepared) law cloud are in place, which lets
them share both without pickling.
"""

from __future__ import annotations

import dataclasses
import datetime
import logging
import math
import multiprocessing
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

from .. import __version__
from ..extremes import (
    ANALYTIC_GAUSSIAN,
    NormingConstants,
    RegionSet,
    build_point_pattern,
    count_in_region,
    empirical_norming,
    gaussian_norming,
    order_statistics,
    top_values,
)
from ..girsanov import effective_sample_size, girsanov_weight, reweighted_expectation
from ..limits import TailParams, gev_cdf, poisson_intensity
from ..model import (
    GaussianMeanFieldParams,
    ModelSpec,
    RankBasedParams,
    linear_profile,
    make_gaussian_model,
    make_rankbased_model,
    normal_sampler,
)
from ..sde import Law, Role, SimConfig, build_law_cloud, simulate_iid_copies, simulate_interacting
from . import io
from .checks import intermediate_trend_from_kth, sqrt_rank, topk_comparison
from .config import ExperimentConfig, load_config
from .report import CheckRecord, Report
from .stats import binomial_se, count_distribution_test, ks_one_sample, ks_two_sample, ks_two_sample_threshold

__all__ = [
    "ReplicationError",
    "SimulationResult",
    "analyze",
    "load_result",
    "make_model",
    "resolve_law",
    "resolve_norming",
    "run_experiment",
    "simulate_experiment",
    "simulate_intermediate",
]

log = logging.getLogger(__name__)

# Filled in by the parent before forking; workers only read it.
_CONTEXT: dict = {}


class ReplicationError(RuntimeError):
    pass


@dataclass
class SimulationResult:
    config: ExperimentConfig
    norming: NormingConstants
    interacting: np.ndarray
    iid: np.ndarray
    weights: Optional[dict] = None
    intermediate: dict = field(default_factory=dict)
    intermediate_ranks: dict = field(default_factory=dict)
    law_info: dict = field(default_factory=dict)
    elapsed_seconds: float = 0.0


def make_model(config: ExperimentConfig) -> ModelSpec:
    if config.model == "gaussian":
        return make_gaussian_model(GaussianMeanFieldParams(config.kappa, config.sigma, config.m0, config.sigma0))
    profile = linear_profile(config.profile_slope, config.profile_intercept)
    return make_rankbased_model(
        RankBasedParams(
            drift_profile=profile,
            initial_law=normal_sampler(config.init_mean, config.init_sd),
            profile_dr_bound=abs(config.profile_slope),
            profile_dr2_bound=0.0,
        )
    )


def resolve_law(config: ExperimentConfig, model: ModelSpec) -> tuple[Law, dict]:
    """Closed form when the model has one, otherwise a Picard law cloud."""
    if model.closed_form_law is not None:
        return model.closed_form_law, {"kind": "closed-form"}
    cloud_cfg = SimConfig(config.cloud_size, config.horizon, config.steps, config.seed, 0)
    cloud = build_law_cloud(cloud_cfg, model, config.picard_iters)
    cloud.prepare(model)
    return cloud, {"kind": "cloud", "size": cloud.size, "generation": cloud.generation}


def calibration_size(n: int) -> int:
    return math.ceil(10 * n * max(1.0, math.log(n)))


def resolve_norming(config: ExperimentConfig, model: ModelSpec, law: Law, n: Optional[int] = None) -> NormingConstants:
    n = n or config.n_particles
    source = config.norming
    if source == "auto":
        source = "analytic" if model.closed_form_law is not None else "empirical"
    if source == "analytic":
        if model.closed_form_law is None:
            raise ValueError(f"model {model.name!r} has no closed-form law for analytic norming")
        mean = model.closed_form_law.mean(config.horizon)
        sd = math.sqrt(model.closed_form_law.variance(config.horizon))
        return gaussian_norming(n, mean, sd, method=config.gaussian_method)
    cal = SimConfig(calibration_size(n), config.horizon, config.steps, config.seed, 0)
    batch = simulate_iid_copies(cal, model, law, role=Role.CALIBRATION)
    return empirical_norming(batch.endpoints, n)


def _chunks(n_items: int, workers: int) -> list[range]:
    size = max(1, math.ceil(n_items / (4 * workers)))
    return [range(s, min(s + size, n_items)) for s in range(0, n_items, size)]


def _map_replications(task: Callable, n_items: int, workers: int, context: dict) -> dict:
    global _CONTEXT
    _CONTEXT = context
    chunks = _chunks(n_items, workers)
    merged = {}
    try:
        if workers == 1:
            parts = [task(c) for c in chunks]
        else:
            ctx = multiprocessing.get_context("fork")
            with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
                parts = list(pool.map(task, chunks))
    finally:
        _CONTEXT = {}
    for part in parts:
        for key, value in part:
            merged[key] = value
    return merged


def _replication_task(reps: range):
    cfg: ExperimentConfig = _CONTEXT["config"]
    model, law = _CONTEXT["model"], _CONTEXT["law"]
    out = []
    for r in reps:
        sim = SimConfig(cfg.n_particles, cfg.horizon, cfg.steps, cfg.seed, r)
        try:
            inter = simulate_interacting(sim, model).endpoints.copy()
            batch = simulate_iid_copies(dataclasses.replace(sim, record_increments=cfg.girsanov), model, law)
            weight = None
            if cfg.girsanov:
                w = girsanov_weight(batch, law, model)
                weight = (w.log_weight, w.martingale, w.quad_variation)
        except Exception as exc:
            raise ReplicationError(f"replication {r}: {exc}") from exc
        out.append((r, (inter, batch.endpoints.copy(), weight)))
    return out


def _intermediate_seed(seed: int, n: int) -> int:
    return int(np.random.SeedSequence([seed, n]).generate_state(1, np.uint64)[0])


def _intermediate_task(reps: range):
    cfg: ExperimentConfig = _CONTEXT["config"]
    model, n, k, norming = _CONTEXT["model"], _CONTEXT["n"], _CONTEXT["k"], _CONTEXT["norming"]
    seed = _intermediate_seed(cfg.seed, n)
    out = []
    for r in reps:
        try:
            batch = simulate_interacting(SimConfig(n, cfg.horizon, cfg.steps, seed, r), model)
        except Exception as exc:
            raise ReplicationError(f"intermediate N={n}, replication {r}: {exc}") from exc
        out.append((r, float(norming.normalize(order_statistics(batch.endpoints, k)[-1]))))
    return out


def simulate_intermediate(
    config: ExperimentConfig, model: Optional[ModelSpec] = None, law: Optional[Law] = None
) -> tuple[dict, dict]:
    """Normalised ``ceil(sqrt(N))``-th order statistics of the interacting system for each N in the grid.

    Returns ``(kth, ranks)``: ``kth[N]`` has one value per replication. Each N
    gets its own norming constants and its own seed, derived from
    ``(config.seed, N)``.
    """
    if model is None:
        model = make_model(config)
    if law is None and config.intermediate_grid:
        law, _ = resolve_law(config, model)
    kth_by_n, ranks = {}, {}
    for n in config.intermediate_grid:
        k = sqrt_rank(n)
        nm = resolve_norming(config, model, law, n)
        context = {"config": config, "model": model, "n": n, "k": k, "norming": nm}
        kth = _map_replications(_intermediate_task, config.replications, config.workers, context)
        kth_by_n[n] = np.array([kth[r] for r in range(config.replications)])
        ranks[n] = k
    return kth_by_n, ranks


def simulate_experiment(config: ExperimentConfig, output_dir: Optional[Union[str, Path]] = None) -> SimulationResult:
    """Run every replication (and the intermediate-rank grid, if configured)."""
    start = time.perf_counter()
    model = make_model(config)
    law, law_info = resolve_law(config, model)
    norming = resolve_norming(config, model, law)
    log.info("norming a=%.6g b=%.6g (%s)", norming.a, norming.b, norming.source)

    merged = _map_replications(
        _replication_task, config.replications, config.workers, {"config": config, "model": model, "law": law}
    )
    reps = range(config.replications)
    interacting = np.vstack([merged[r][0] for r in reps])
    iid = np.vstack([merged[r][1] for r in reps])
    weights = None
    if config.girsanov:
        arr = np.array([merged[r][2] for r in reps], dtype=float)
        weights = {"log_weight": arr[:, 0], "martingale": arr[:, 1], "quad_variation": arr[:, 2]}

    intermediate, ranks = simulate_intermediate(config, model, law)

    result = SimulationResult(
        config=config,
        norming=norming,
        interacting=interacting,
        iid=iid,
        weights=weights,
        intermediate=intermediate,
        intermediate_ranks=ranks,
        law_info=law_info,
        elapsed_seconds=time.perf_counter() - start,
    )
    if output_dir is not None:
        persist_result(result, output_dir)
    return result


def _runtime_free_ini(config: ExperimentConfig) -> str:
    lines = config.to_ini().splitlines()
    return "\n".join(l for l in lines if not l.startswith(("workers", "output_dir"))) + "\n"


def persist_result(result: SimulationResult, output_dir: Union[str, Path]) -> Path:
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(_runtime_free_ini(result.config))
    io.write_norming_csv(out / "norming.csv", result.norming)
    io.write_endpoints_csv(out / "endpoints_interacting.csv", result.interacting)
    io.write_endpoints_csv(out / "endpoints_iid.csv", result.iid)
    if result.config.save_patterns:
        io.write_patterns_csv(out / "patterns_interacting.csv", result.norming.normalize(result.interacting))
        io.write_patterns_csv(out / "patterns_iid.csv", result.norming.normalize(result.iid))
    if result.weights is not None:
        io.write_weights_csv(out / "weights.csv", **result.weights)
    if result.intermediate:
        io.write_intermediate_csv(out / "intermediate.csv", result.intermediate)
    return out


def load_result(directory: Union[str, Path], config: Optional[ExperimentConfig] = None) -> SimulationResult:
    """Rebuild a :class:`SimulationResult` from the files written by :func:`persist_result`."""
    d = Path(directory)
    config = config or load_config(d / "config.ini")
    weights = io.read_weights_csv(d / "weights.csv") if (d / "weights.csv").exists() else None
    intermediate = io.read_intermediate_csv(d / "intermediate.csv") if (d / "intermediate.csv").exists() else {}
    return SimulationResult(
        config=config,
        norming=io.read_norming_csv(d / "norming.csv"),
        interacting=io.read_endpoints_csv(d / "endpoints_interacting.csv"),
        iid=io.read_endpoints_csv(d / "endpoints_iid.csv"),
        weights=weights,
        intermediate=intermediate,
        intermediate_ranks={n: sqrt_rank(n) for n in intermediate},
    )


def _count_checks(label, counts, nu, cfg, mandatory) -> list[CheckRecord]:
    sizes = {label: len(counts)}
    if len(counts) < 100:
        return [CheckRecord(f"{label}_counts", math.nan, math.nan, False, sizes, False, "skipped", {"reason": "fewer than 100 replications"})]
    ct = count_distribution_test(counts, nu)
    detail = {"mean": ct.mean, "variance": ct.variance, "target_mean": nu}
    low, high = cfg.dispersion_low, cfg.dispersion_high
    return [
        CheckRecord(f"{label}_count_mean_z", abs(ct.mean_z), cfg.z_threshold, abs(ct.mean_z) < cfg.z_threshold, sizes, mandatory, "<", detail),
        CheckRecord(
            f"{label}_count_dispersion",
            ct.dispersion,
            high,
            bool(low <= ct.dispersion <= high),
            sizes,
            mandatory,
            f"in [{low}, {high}]",
            detail,
        ),
    ]


def analyze(result: SimulationResult) -> Report:
    cfg = result.config
    tail = TailParams(cfg.gamma)
    norming = result.norming
    analytic = norming.source == ANALYTIC_GAUSSIAN
    vi = norming.normalize(result.interacting)
    vd = norming.normalize(result.iid)
    r_i, r_d = vi.shape[0], vd.shape[0]
    max_i, max_d = vi.max(axis=1), vd.max(axis=1)
    checks: list[CheckRecord] = []

    d = ks_two_sample(max_i, max_d)
    thr = ks_two_sample_threshold(r_i, r_d, cfg.ks_coefficient)
    checks.append(CheckRecord("ks_max_interacting_vs_iid", d, thr, d < thr, {"interacting": r_i, "iid": r_d}))
    for label, maxima in (("iid", max_d), ("interacting", max_i)):
        d1 = ks_one_sample(maxima, lambda x: gev_cdf(x, tail))
        checks.append(
            CheckRecord(
                f"ks_max_{label}_vs_gev",
                d1,
                cfg.gev_ks_tolerance,
                d1 < cfg.gev_ks_tolerance,
                {label: len(maxima)},
                analytic and label == "iid",
            )
        )

    for j, rect in enumerate(cfg.regions):
        region = RegionSet([rect])
        nu = poisson_intensity(region, tail)
        for label, values in (("interacting", result.interacting), ("iid", result.iid)):
            counts = [count_in_region(build_point_pattern(row, norming), region) for row in values]
            for rec in _count_checks(f"{label}_region{j}", counts, nu, cfg, analytic):
                checks.append(rec)

    k = cfg.topk
    if k <= cfg.n_particles:
        checks.extend(
            topk_comparison(
                top_values(vi, k),
                top_values(vd, k),
                cfg.thresholds,
                tail,
                z=cfg.z_threshold,
                limit_slack=cfg.topk_limit_slack,
                truncation=cfg.truncation,
            )
        )

    summary = {
        "norming": dataclasses.asdict(norming),
        "law": result.law_info,
        "n_particles": cfg.n_particles,
        "replications": cfg.replications,
        "model": cfg.model,
    }
    if norming.source != ANALYTIC_GAUSSIAN:
        summary["norming_note"] = "empirical mean-excess scale assumes a Gumbel-type tail; limit checks are informational"

    if result.weights is not None:
        checks.extend(_girsanov_checks(result.weights, max_i, max_d, cfg, summary))

    if result.intermediate:
        trend = intermediate_trend_from_kth(result.intermediate, result.intermediate_ranks, cfg.intermediate_x)
        f = trend.frequencies
        detail = {"ns": list(trend.ns), "ranks": list(trend.ranks), "frequencies": list(f), "std_errors": list(trend.std_errors)}
        sizes = {"replications_per_n": cfg.replications}
        worst_rise = max(f[j + 1] - f[j] for j in range(len(f) - 1))
        checks.append(CheckRecord("intermediate_strictly_decreasing", worst_rise, 0.0, trend.strictly_decreasing, sizes, True, "<", detail))
        checks.append(CheckRecord("intermediate_halved", f[-1], 0.5 * f[0], trend.halved, sizes, True, "<", detail))
        checks.append(
            CheckRecord("intermediate_nonincreasing_2se", worst_rise, 0.0, trend.nonincreasing_within_noise, sizes, False, "<= 2se", detail)
        )

    provenance = {
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "code_version": __version__,
        "created_at": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
    }
    return Report(name=cfg.name, checks=checks, summary=summary, provenance=provenance)


def _girsanov_checks(weights: dict, max_i, max_d, cfg: ExperimentConfig, summary: dict) -> list[CheckRecord]:
    z = np.exp(weights["log_weight"])
    r = z.size
    mean_w, se_w = reweighted_expectation(np.ones(r), z)
    summary["effective_sample_size"] = effective_sample_size(z)
    summary["mean_weight"] = mean_w
    sizes = {"iid": r}
    zstat = abs(mean_w - 1.0) / se_w
    checks = [CheckRecord("girsanov_mean_weight_z", zstat, cfg.z_threshold, zstat < cfg.z_threshold, sizes, True, "<", {"mean": mean_w, "se": se_w})]
    for q in (50, 90, 99):
        x = float(np.percentile(max_i, q))
        direct = float(np.mean(max_i <= x))
        se_direct = binomial_se(direct, max_i.size)
        est, se = reweighted_expectation((max_d <= x).astype(float), z)
        gap = abs(est - direct)
        tol = cfg.z_threshold * math.hypot(se, se_direct)
        checks.append(
            CheckRecord(
                f"girsanov_reweighted_max_cdf_p{q}",
                gap,
                tol,
                gap <= tol,
                {"interacting": max_i.size, "iid": r},
                True,
                "<=",
                {"x": x, "direct": direct, "reweighted": est, "se_direct": se_direct, "se_reweighted": se},
            )
        )
    return checks


def run_experiment(config: ExperimentConfig, output_dir: Optional[Union[str, Path]] = None) -> Report:
    """Simulate, persist, analyse and write ``report.json``; returns the report."""
    out = Path(output_dir) if output_dir is not None else Path(config.output_dir) / config.name
    result = simulate_experiment(config, out)
    report = analyze(result)
    report.provenance["elapsed_seconds"] = round(result.elapsed_seconds, 3)
    report.save(out / "report.json")
    return report
