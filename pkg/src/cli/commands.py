import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import Callable, Optional, Sequence

import numpy as np
import pandas as pd

from src.deepc.controller import DeepcController
from src.deepc.forecast import sigma2_for_snr
from src.deepc.hankel import (
    assemble_hankel_set,
    excitation_check,
    load_collected_data,
    save_collected_data,
)
from src.network.graph import generate_grid_network, load_network, save_network
from src.network.regions import regional_marginals, save_partition
from src.policies.collection import collect_data_run
from src.policies.policy import PolicyContext, PolicyKind, build_policy
from src.simulator.fleet_sim import FleetSimulator
from src.simulator.requests import load_trace, save_trace
from src.simulator.views import MetricsReport
from src.simulator.world import World, build_world
from src.cli.views import RunConfig, SweepSpec
from src.utils.errors import ConfigurationError, DataError, MissingCollectedDataError
from src.utils.logging_config import RESULT_LEVEL
from src.utils.run_state import RunState
from src.utils.utils import ensure_dir, write_csv_atomic, write_text_atomic

logger = logging.getLogger(__name__)

METRIC_COLUMNS = ["answer_rate", "avg_wait_s", "rebalance_km", "vur", "command_cost"]
BAND_PERCENTILES = [25, 50, 75, 90]


def max_workers() -> int:
    try:
        return max(1, int(os.getenv("AMOD_MAX_WORKERS", "1")))
    except ValueError:
        raise ConfigurationError(f"AMOD_MAX_WORKERS must be an integer, got {os.getenv('AMOD_MAX_WORKERS')!r}")


def _map_points(fn: Callable, items: Sequence[tuple], workers: Optional[int] = None) -> list:
    """Apply ``fn(*item)`` to every item; results come back in input order.

    Each result is ``(value, None)`` or ``(None, error message)``.
    """
    workers = max_workers() if workers is None else workers
    state = RunState()
    results: list = []
    if workers <= 1:
        for item in items:
            if state.is_stop_requested():
                logger.info("🛑 Stop requested, skipping remaining points")
                results.append((None, "stopped"))
                continue
            results.append(_guarded(fn, item))
        return results

    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_guarded, fn, item) for item in items]
        for future in futures:
            if state.is_stop_requested():
                future.cancel()
            if future.cancelled():
                results.append((None, "stopped"))
                continue
            results.append(future.result())
    return results


def _guarded(fn: Callable, item: tuple):
    try:
        return fn(*item), None
    except Exception as e:
        logger.error(f"❌ Point {item[1:]} failed: {type(e).__name__}: {e}")
        return None, f"{type(e).__name__}: {e}"


# ---- building blocks ------------------------------------------------------


def build_graph(config: RunConfig):
    source = config.network
    if source.kind == "files":
        return load_network(source.nodes_path, source.links_path, max_nodes=source.max_nodes)
    return generate_grid_network(source.rows, source.cols, source.spacing_km)


def build_world_from_config(config: RunConfig) -> World:
    return build_world(
        build_graph(config),
        config.scenario,
        partition_seed=config.partition_seed,
        lengths=config.rebalance_lengths,
    )


def resolve_deepc_params(config: RunConfig, world: World):
    """Fill the output weights (origin marginals) and input weights (rebalancing lengths) when unset."""
    update = {}
    if config.deepc.Q is None:
        update["Q"] = list(config.scenario.phi_o)
    if config.deepc.Rw is None:
        update["Rw"] = [float(v) for v in world.rebalance_weights]
    return config.deepc.model_copy(update=update)


def build_controller(config: RunConfig, world: World) -> DeepcController:
    path = config.collected_data_path
    if not os.path.exists(path):
        raise MissingCollectedDataError(path)
    data = load_collected_data(path)
    params = resolve_deepc_params(config, world)
    if data.u.shape[1] != world.R * world.R or data.y.shape[1] != world.R:
        raise DataError(f"{path} was collected for {data.y.shape[1]} regions, the configuration has {world.R}")
    n_assumed = params.n_assumed if params.n_assumed is not None else 2 * world.R
    hankels = assemble_hankel_set(data.u, data.w, data.y, params.T_ini, params.N, n_assumed=n_assumed)
    return DeepcController(hankels, params, data.u, data.w, data.y)


def build_run_policy(config: RunConfig, world: World, kind: Optional[PolicyKind] = None, sigma2: Optional[float] = None):
    kind = kind or config.policy
    controller = build_controller(config, world) if kind.uses_upper else None
    context = PolicyContext(
        kind=kind,
        controller=controller,
        coverage=config.coverage,
        lp_period=config.lp_period,
        forecast_sigma2=config.deepc.sigma2 if sigma2 is None else sigma2,
    )
    return build_policy(context)


def _require_data(config: RunConfig) -> None:
    if config.policy.uses_upper and not os.path.exists(config.collected_data_path):
        raise MissingCollectedDataError(config.collected_data_path)


# ---- net-gen --------------------------------------------------------------


def net_gen(config: RunConfig, out_dir: Optional[str] = None) -> dict[str, str]:
    out_dir = ensure_dir(out_dir or config.output_dir)
    world = build_world_from_config(config)
    paths = {
        "nodes": os.path.join(out_dir, "nodes.csv"),
        "links": os.path.join(out_dir, "links.csv"),
        "partition": os.path.join(out_dir, "partition.csv"),
    }
    save_network(world.graph, paths["nodes"], paths["links"])
    save_partition(world.partition, paths["partition"])
    marginals = regional_marginals(world.density, world.partition)
    logger.log(
        RESULT_LEVEL,
        f"📄 Network: {world.num_nodes} nodes, {world.graph.num_links} links, R = {world.R}, "
        f"region sizes {world.partition.sizes().tolist()}, marginals {np.round(marginals, 4).tolist()}",
    )
    return paths


# ---- collect --------------------------------------------------------------


def collect(config: RunConfig, out_path: Optional[str] = None) -> str:
    world = build_world_from_config(config)
    params = config.deepc
    data = collect_data_run(config.scenario, world, config.coverage, params.T_d, params.collection_seed)
    path = out_path or config.collected_data_path

    n_assumed = params.n_assumed if params.n_assumed is not None else 2 * world.R
    check = excitation_check(data.u, data.w, params.T_ini + params.N + n_assumed)
    if check["rank"] is None:
        logger.log(
            RESULT_LEVEL,
            f"📄 Excitation: {data.T_d} windows cannot reach rank {check['required_rank']} at order {check['order']}",
        )
    else:
        verdict = "persistently exciting" if check["persistently_exciting"] else "NOT persistently exciting"
        logger.log(
            RESULT_LEVEL,
            f"📄 Excitation: rank {check['rank']} of {check['required_rank']} at order {check['order']} -> {verdict}",
        )
    save_collected_data(replace(data, metadata={**data.metadata, "excitation": check}), path)
    logger.log(RESULT_LEVEL, f"📄 Collected {data.T_d} windows -> {path}")
    return path


# ---- run ------------------------------------------------------------------


def simulate_seed(
    config: RunConfig,
    seed: int,
    world: Optional[World] = None,
    fleet_size_override: Optional[int] = None,
    label: Optional[str] = None,
    trace: Optional[str] = None,
    snr_db: Optional[float] = None,
) -> tuple[MetricsReport, FleetSimulator]:
    """One seeded simulation of the configured policy."""
    world = world or build_world_from_config(config)
    update = {"seed": seed}
    if fleet_size_override is not None:
        update["fleet_size"] = int(fleet_size_override)
    scenario = config.scenario.model_copy(update=update)
    trace = trace or config.trace_path
    requests = load_trace(trace, world) if trace else None

    sim = FleetSimulator(
        scenario,
        world,
        requests=requests,
        lookahead_windows=config.deepc.N,
        label=label or "",
    )
    sigma2 = None
    if snr_db is not None:
        sigma2 = sigma2_for_snr(sim.demand[: sim.num_windows], snr_db)
        logger.info(f"📍 SNR {snr_db} dB -> forecast noise variance {sigma2:.4g}")
    sim.policy = build_run_policy(config, world, sigma2=sigma2)
    return sim.run(), sim


def _write_seed_outputs(out_dir: str, report: MetricsReport, sim: FleetSimulator, dump_partitions: bool) -> None:
    seed = report.seed
    write_csv_atomic(
        pd.DataFrame(report.empty_series, columns=["t_s", "region", "empty_vehicles"]),
        os.path.join(out_dir, f"timeseries_seed{seed}.csv"),
    )
    R = report.command_totals.shape[0]
    write_csv_atomic(
        pd.DataFrame(
            [(i, j, int(report.command_totals[i, j])) for i in range(R) for j in range(R)],
            columns=["from_region", "to_region", "vehicles"],
        ),
        os.path.join(out_dir, f"commands_seed{seed}.csv"),
    )
    write_csv_atomic(
        pd.DataFrame(
            {
                "region": np.arange(len(report.region_issued)),
                "issued": report.region_issued,
                "answered": report.region_answered,
                "cancelled": report.region_cancelled,
                "answer_rate": report.region_answer_rate,
            }
        ),
        os.path.join(out_dir, f"regions_seed{seed}.csv"),
    )
    if dump_partitions:
        write_csv_atomic(
            pd.DataFrame(
                sim.partition_rows,
                columns=["step", "vehicle_id", "node_id", "cell_size", "centroid_node", "objective"],
            ),
            os.path.join(out_dir, f"partitions_seed{seed}.csv"),
        )
    save_trace(sim.requests, os.path.join(out_dir, f"trace_seed{seed}.csv"))


def _run_point(config_json: str, seed: int, fleet_size_override, label, trace) -> MetricsReport:
    config = RunConfig.model_validate_json(config_json)
    report, sim = simulate_seed(config, seed, fleet_size_override=fleet_size_override, label=label, trace=trace)
    _write_seed_outputs(config.output_dir, report, sim, config.coverage.dump_partitions)
    return report


def format_summary(config: RunConfig, reports: list[MetricsReport]) -> str:
    df = pd.DataFrame([r.as_row() for r in reports])
    lines = [
        f"Policy: {config.policy.display_name} ({config.policy.value})",
        f"Fleet size: {reports[0].fleet_size}",
        f"Seeds: {', '.join(str(r.seed) for r in reports)}",
        "",
        df.drop(columns=["label"]).to_string(index=False, float_format=lambda v: f"{v:.4f}"),
        "",
        f"Mean answer rate:  {df['answer_rate'].mean() * 100:.2f} %",
        f"Mean waiting time: {df['avg_wait_s'].mean():.1f} s",
        f"Mean rebalancing:  {df['rebalance_km'].mean():.1f} km",
        f"Mean VUR:          {df['vur'].mean() * 100:.2f} %",
    ]
    return "\n".join(lines) + "\n"


def run(
    config: RunConfig,
    fleet_size_override: Optional[int] = None,
    label: Optional[str] = None,
    trace: Optional[str] = None,
) -> list[MetricsReport]:
    """Simulate the configured policy once per seed and write the run directory."""
    _require_data(config)
    if trace is not None and not os.path.exists(trace):
        raise ConfigurationError(f"Request trace '{trace}' not found")
    out_dir = ensure_dir(config.output_dir)
    config_json = config.model_dump_json()
    items = [(config_json, seed, fleet_size_override, label, trace) for seed in config.seeds]
    results = _map_points(_run_point, items)

    failures = [(item[1], error) for item, (_, error) in zip(items, results) if error is not None]
    if failures:
        raise RuntimeError(f"{len(failures)} of {len(items)} seeds failed: {failures[0][1]}")
    reports = [report for report, _ in results]

    write_csv_atomic(pd.DataFrame([r.as_row() for r in reports]), os.path.join(out_dir, "metrics.csv"))
    summary = format_summary(config, reports)
    write_text_atomic(summary, os.path.join(out_dir, "summary.txt"))
    logger.log(RESULT_LEVEL, f"📄 {config.policy.display_name}\n{summary}")
    return reports


# ---- sweep ----------------------------------------------------------------


def config_for_value(base: RunConfig, parameter: str, value: float) -> tuple[RunConfig, dict]:
    """Config for one sweep value plus the keyword overrides ``simulate_seed`` needs."""
    if parameter in ("alpha", "sigma2", "lambda_g", "lambda_y"):
        deepc = base.deepc.model_copy(update={parameter: float(value)})
        return base.model_copy(update={"deepc": deepc}), {}
    if parameter == "fleet_size":
        return base, {"fleet_size_override": int(value)}
    if parameter == "snr_db":
        return base, {"snr_db": float(value)}
    raise ConfigurationError(f"Unknown sweep parameter: {parameter}")


def _sweep_point(spec_json: str, value: float, seed: int) -> dict:
    spec = SweepSpec.model_validate_json(spec_json)
    config, overrides = config_for_value(spec.base, spec.parameter, value)
    report, _ = simulate_seed(config, seed, **overrides)
    row = {"param_value": value, "seed": seed}
    row.update({k: v for k, v in report.as_row().items() if k in METRIC_COLUMNS})
    return row


def aggregate_sweep(points: pd.DataFrame) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Per-value mean rows and percentile bands; independent of point order."""
    points = points.sort_values(["param_value", "seed"], kind="stable").reset_index(drop=True)
    grouped = points.groupby("param_value", sort=True)[METRIC_COLUMNS]
    means = grouped.mean().reset_index()
    means.insert(1, "seed", "mean")
    table = pd.concat([points.astype({"seed": object}), means], ignore_index=True)

    bands = []
    for value, group in grouped:
        row = {"param_value": value, "n": len(group)}
        for metric in METRIC_COLUMNS:
            for pct in BAND_PERCENTILES:
                row[f"{metric}_p{pct}"] = float(np.percentile(group[metric].to_numpy(), pct))
        bands.append(row)
    return table, pd.DataFrame(bands)


def sweep(spec: SweepSpec) -> tuple[pd.DataFrame, list[tuple[float, int, str]]]:
    """Run every (value, seed) pair; failed points are logged and returned, the rest aggregated."""
    base = spec.base
    _require_data(base)
    out_dir = ensure_dir(base.output_dir)
    spec_json = spec.model_dump_json()
    items = [(spec_json, float(value), seed) for value in spec.values for seed in base.seeds]
    logger.info(f"📍 Sweeping {spec.parameter} over {spec.values} x {len(base.seeds)} seeds ({len(items)} runs)")
    results = _map_points(_sweep_point, items)

    failures = [(item[1], item[2], error) for item, (_, error) in zip(items, results) if error is not None]
    rows = [row for row, error in results if error is None]
    if not rows:
        raise RuntimeError(f"All {len(items)} sweep points failed")
    table, bands = aggregate_sweep(pd.DataFrame(rows))
    write_csv_atomic(table, os.path.join(out_dir, f"sweep_{spec.parameter}.csv"))
    write_csv_atomic(bands, os.path.join(out_dir, f"sweep_{spec.parameter}_bands.csv"))

    means = table[table["seed"] == "mean"]
    logger.log(
        RESULT_LEVEL,
        f"📄 Sweep {spec.parameter}\n"
        + means.drop(columns=["seed"]).to_string(index=False, float_format=lambda v: f"{v:.4f}"),
    )
    if failures:
        logger.warning(f"⚠️ {len(failures)} of {len(items)} sweep points failed")
    return table, failures


# ---- report ---------------------------------------------------------------


def _metrics_files(paths: Sequence[str]) -> list[str]:
    files = []
    for path in paths:
        if os.path.isdir(path):
            for root, _, names in sorted(os.walk(path)):
                files.extend(os.path.join(root, n) for n in sorted(names) if n == "metrics.csv")
        elif os.path.exists(path):
            files.append(path)
        else:
            raise ConfigurationError(f"Metrics file '{path}' not found")
    return files


def _policy_order(policy: str) -> int:
    names = [kind.value for kind in PolicyKind]
    return names.index(policy) if policy in names else len(names)


def _display_name(policy: str) -> str:
    try:
        return PolicyKind(policy).display_name
    except ValueError:
        return policy


def build_report(frames: list[pd.DataFrame]) -> pd.DataFrame:
    data = pd.concat(frames, ignore_index=True)
    grouped = data.groupby(["policy", "fleet_size"], sort=False)
    table = grouped.agg(
        answer_rate=("answer_rate", "mean"),
        avg_wait_s=("avg_wait_s", "mean"),
        rebalance_km=("rebalance_km", "mean"),
        vur=("vur", "mean"),
        seeds=("seed", "nunique"),
    ).reset_index()
    table["order"] = table["policy"].map(_policy_order)
    table = table.sort_values(["order", "fleet_size"], kind="stable").drop(columns=["order"])

    mixed = table["fleet_size"].nunique() > 1
    return pd.DataFrame(
        {
            "policy": [_display_name(p) for p in table["policy"]],
            "answer_rate_pct": table["answer_rate"] * 100.0,
            "waiting_time_s": table["avg_wait_s"],
            "rebalancing_km": table["rebalance_km"],
            "vur_pct": table["vur"] * 100.0,
            "seeds": table["seeds"],
            "note": [f"fleet size {n}" if mixed else "" for n in table["fleet_size"]],
        }
    ).reset_index(drop=True)


def report(paths: Sequence[str], out_dir: Optional[str] = None) -> pd.DataFrame:
    """Seed-averaged comparison table, one row per (policy, fleet size)."""
    files = _metrics_files(paths)
    if not files:
        raise ConfigurationError("No metrics files to report on")
    table = build_report([pd.read_csv(f, encoding="utf-8") for f in files])
    text = table.to_string(index=False, float_format=lambda v: f"{v:.2f}") + "\n"
    if out_dir:
        ensure_dir(out_dir)
        write_csv_atomic(table, os.path.join(out_dir, "report.csv"))
        write_text_atomic(text, os.path.join(out_dir, "report.txt"))
    logger.log(RESULT_LEVEL, f"📄 Comparison of {len(files)} runs\n{text}")
    return table
