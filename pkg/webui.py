import logging

from dotenv import load_dotenv

load_dotenv()
import argparse
import json

import gradio as gr
from gradio.themes import Base, Citrus, Default, Glass, Monochrome, Ocean, Origin, Soft

from src.cli import commands
from src.policies.policy import PolicyKind
from src.utils.default_config_settings import (
    build_sweep_spec,
    config_to_json,
    default_config,
    load_config_from_file,
    parse_config,
    save_current_config,
)
from src.utils.errors import ConfigurationError
from src.utils.logging_config import setup_logging
from src.utils.run_state import RunState
from src.utils.utils import get_latest_files, list_output_files

logger = logging.getLogger(__name__)

_global_run_state = RunState()

theme_map = {
    "Default": Default(),
    "Soft": Soft(),
    "Monochrome": Monochrome(),
    "Glass": Glass(),
    "Origin": Origin(),
    "Citrus": Citrus(),
    "Ocean": Ocean(),
    "Base": Base(),
}

RUN_POLICIES = [k.value for k in PolicyKind if k != PolicyKind.RANDOM_COLLECT]


def stop_run():
    """Request a stop between sweep points and update the buttons"""
    _global_run_state.request_stop()
    message = "Stop requested - the sweep will halt after the current point"
    logger.info(f"🛑 {message}")
    return message, gr.update(value="Stopping...", interactive=False)


def config_from_ui(
    config_json,
    policy,
    fleet_size,
    request_rate,
    sim_hours,
    seeds_text,
    coverage_r,
    alpha,
    lambda_g,
    lambda_y,
    T_ini,
    N,
    T_d,
    sigma2,
    output_dir,
):
    """Overlay the form fields on the JSON document and validate the result."""
    try:
        document = json.loads(config_json) if config_json and config_json.strip() else json.loads(config_to_json(default_config()))
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Advanced configuration is not valid JSON: {e}")
    try:
        seeds = [int(s) for s in str(seeds_text).replace(",", " ").split()]
    except ValueError:
        raise ConfigurationError(f"Seeds must be integers, got '{seeds_text}'")

    document["policy"] = policy
    document["seeds"] = seeds
    document["output_dir"] = output_dir
    document.setdefault("scenario", {}).update(
        {"fleet_size": int(fleet_size), "request_rate": float(request_rate), "sim_duration": float(sim_hours) * 3600.0}
    )
    document.setdefault("coverage", {})["r"] = float(coverage_r)
    document.setdefault("deepc", {}).update(
        {
            "alpha": float(alpha),
            "lambda_g": float(lambda_g),
            "lambda_y": float(lambda_y),
            "T_ini": int(T_ini),
            "N": int(N),
            "T_d": int(T_d),
            "sigma2": float(sigma2),
        }
    )
    return parse_config(json.dumps(document), source="web UI")


def _files(config):
    return list_output_files(config.output_dir, ".csv") + list_output_files(config.output_dir, ".txt")


def run_collection(*ui_values):
    try:
        config = config_from_ui(*ui_values)
        path = commands.collect(config)
        return f"Collected data written to {path}", [path]
    except Exception as e:
        logger.error(f"❌ Collection failed: {e}")
        return f"Error: {e}", None


def run_simulation(*ui_values):
    try:
        config = config_from_ui(*ui_values)
        reports = commands.run(config)
        return commands.format_summary(config, reports), _files(config)
    except Exception as e:
        logger.error(f"❌ Run failed: {e}")
        return f"Error: {e}", None


def run_sweep(param, values_text, *ui_values):
    _global_run_state.clear_stop()
    try:
        config = config_from_ui(*ui_values)
        values = [float(v) for v in str(values_text).replace(",", " ").split()]
        table, failures = commands.sweep(build_sweep_spec(param, values, config))
        message = f"{len(failures)} points failed" if failures else "Sweep finished"
        return message, table, _files(config), gr.update(value="Stop", interactive=True)
    except Exception as e:
        logger.error(f"❌ Sweep failed: {e}")
        return f"Error: {e}", None, None, gr.update(value="Stop", interactive=True)


def build_comparison(run_dirs_text, uploaded):
    paths = [p for p in str(run_dirs_text or "").split() if p]
    paths += [getattr(f, "name", f) for f in uploaded or []]
    try:
        table = commands.report(paths)
        return table, ""
    except Exception as e:
        return None, f"Error: {e}"


def update_ui_from_config(config_file):
    fields = 15
    if config_file is None:
        return tuple(gr.update() for _ in range(fields)) + ("No file selected.",)
    try:
        config = load_config_from_file(getattr(config_file, "name", config_file))
    except ConfigurationError as e:
        return tuple(gr.update() for _ in range(fields)) + (f"Error: {e}",)
    return (
        gr.update(value=config_to_json(config)),
        gr.update(value=config.policy.value),
        gr.update(value=config.scenario.fleet_size),
        gr.update(value=config.scenario.request_rate),
        gr.update(value=config.scenario.sim_duration / 3600.0),
        gr.update(value=" ".join(str(s) for s in config.seeds)),
        gr.update(value=config.coverage.r),
        gr.update(value=config.deepc.alpha),
        gr.update(value=config.deepc.lambda_g),
        gr.update(value=config.deepc.lambda_y),
        gr.update(value=config.deepc.T_ini),
        gr.update(value=config.deepc.N),
        gr.update(value=config.deepc.T_d),
        gr.update(value=config.deepc.sigma2),
        gr.update(value=config.output_dir),
        "Configuration loaded successfully.",
    )


def save_ui_config(*ui_values):
    try:
        return save_current_config(config_to_json(config_from_ui(*ui_values)))
    except ConfigurationError as e:
        return f"Error saving configuration: {e}"


def create_ui(config, theme_name="Ocean", dark_mode=False):
    css = """
    .gradio-container {
        max-width: 1200px !important;
        margin: auto !important;
        padding-top: 20px !important;
    }
    .header-text {
        text-align: center;
        margin-bottom: 30px;
    }
    """

    js = """
    function refresh() {
        const url = new URL(window.location);
        if (url.searchParams.get('__theme') !== 'dark') {
            url.searchParams.set('__theme', 'dark');
            window.location.href = url.href;
        }
    }
    """

    with gr.Blocks(title="Fleet Rebalancing WebUI", theme=theme_map[theme_name], css=css, js=js if dark_mode else None) as demo:
        with gr.Row():
            gr.Markdown(
                """
                # 🚕 Fleet Rebalancing WebUI
                ### Data-driven transfers between regions, coverage positioning inside them
                """,
                elem_classes=["header-text"],
            )

        with gr.Tabs():
            with gr.TabItem("⚙️ Scenario Settings", id=1):
                with gr.Group():
                    policy = gr.Dropdown(RUN_POLICIES, label="Policy", value=config.policy.value)
                    with gr.Row():
                        fleet_size = gr.Number(label="Fleet Size", value=config.scenario.fleet_size, precision=0)
                        request_rate = gr.Number(label="Requests per Second", value=config.scenario.request_rate)
                        sim_hours = gr.Number(label="Simulated Hours", value=config.scenario.sim_duration / 3600.0)
                    with gr.Row():
                        seeds = gr.Textbox(label="Seeds", value=" ".join(str(s) for s in config.seeds))
                        coverage_r = gr.Number(label="Coverage Radius r (km)", value=config.coverage.r)
                        output_dir = gr.Textbox(label="Output Directory", value=config.output_dir)

            with gr.TabItem("🧠 DeePC Settings", id=2):
                with gr.Group():
                    with gr.Row():
                        alpha = gr.Number(label="Answer/Cost Trade-off α", value=config.deepc.alpha)
                        lambda_g = gr.Number(label="λ_g", value=config.deepc.lambda_g)
                        lambda_y = gr.Number(label="λ_y", value=config.deepc.lambda_y)
                        sigma2 = gr.Number(label="Forecast Noise σ²", value=config.deepc.sigma2)
                    with gr.Row():
                        T_ini = gr.Number(label="T_ini", value=config.deepc.T_ini, precision=0)
                        N = gr.Number(label="Horizon N", value=config.deepc.N, precision=0)
                        T_d = gr.Number(label="Data Length T_d", value=config.deepc.T_d, precision=0)
                    collect_button = gr.Button("📥 Collect Data", variant="secondary")
                    collect_output = gr.Textbox(label="Collection", lines=2)

            with gr.TabItem("🚗 Run", id=3):
                run_button = gr.Button("▶️ Run", variant="primary", scale=2)
                summary_output = gr.Textbox(label="Summary", lines=14, show_label=True)
                run_files = gr.File(label="Output Files", file_count="multiple")

            with gr.TabItem("📈 Sweep", id=4):
                with gr.Row():
                    sweep_param = gr.Dropdown(
                        ["alpha", "sigma2", "lambda_g", "lambda_y", "snr_db", "fleet_size"], label="Parameter", value="alpha"
                    )
                    sweep_values = gr.Textbox(label="Values", value="0 50 150 300")
                with gr.Row():
                    sweep_button = gr.Button("▶️ Run Sweep", variant="primary", scale=2)
                    stop_button = gr.Button("⏹️ Stop", variant="stop", scale=1)
                sweep_status = gr.Textbox(label="Status", lines=2)
                sweep_table = gr.Dataframe(label="Sweep Results")
                sweep_files = gr.File(label="Output Files", file_count="multiple")

            with gr.TabItem("📊 Report", id=5):
                report_dirs = gr.Textbox(label="Run Directories", placeholder="./tmp/runs/hierarchical ./tmp/runs/no_control")
                report_upload = gr.File(label="Metrics Files", file_count="multiple", file_types=[".csv"])
                report_button = gr.Button("📊 Compare", variant="primary")
                report_table = gr.Dataframe(label="Comparison")
                report_errors = gr.Textbox(label="Errors", lines=2)

            with gr.TabItem("📁 Configuration", id=6):
                with gr.Group():
                    config_json = gr.Code(label="Advanced Configuration (JSON)", language="json", value=config_to_json(config))
                    config_file_input = gr.File(label="Load Config File", file_types=[".json"], interactive=True)
                    load_config_button = gr.Button("Load Existing Config From File", variant="primary")
                    save_config_button = gr.Button("Save Current Config", variant="primary")
                    config_status = gr.Textbox(label="Status", lines=2, interactive=False)

        ui_values = [
            config_json,
            policy,
            fleet_size,
            request_rate,
            sim_hours,
            seeds,
            coverage_r,
            alpha,
            lambda_g,
            lambda_y,
            T_ini,
            N,
            T_d,
            sigma2,
            output_dir,
        ]

        collect_button.click(fn=run_collection, inputs=ui_values, outputs=[collect_output, run_files])
        run_button.click(fn=run_simulation, inputs=ui_values, outputs=[summary_output, run_files])
        sweep_button.click(
            fn=run_sweep,
            inputs=[sweep_param, sweep_values] + ui_values,
            outputs=[sweep_status, sweep_table, sweep_files, stop_button],
        )
        stop_button.click(fn=stop_run, inputs=[], outputs=[sweep_status, stop_button])
        report_button.click(fn=build_comparison, inputs=[report_dirs, report_upload], outputs=[report_table, report_errors])
        load_config_button.click(fn=update_ui_from_config, inputs=[config_file_input], outputs=ui_values + [config_status])
        save_config_button.click(fn=save_ui_config, inputs=ui_values, outputs=[config_status])

        def latest_summary(directory):
            latest = get_latest_files(directory, file_types=[".txt"])[".txt"]
            return open(latest, encoding="utf-8").read() if latest else ""

        output_dir.submit(fn=latest_summary, inputs=[output_dir], outputs=[summary_output])

    return demo


def main():
    parser = argparse.ArgumentParser(description="Gradio UI for fleet rebalancing experiments")
    parser.add_argument("--ip", type=str, default="127.0.0.1", help="IP address to bind to")
    parser.add_argument("--port", type=int, default=7788, help="Port to listen on")
    parser.add_argument("--theme", type=str, default="Ocean", choices=theme_map.keys(), help="Theme to use for the UI")
    parser.add_argument("--dark-mode", action="store_true", help="Enable dark mode")
    parser.add_argument("--config", type=str, default=None, help="Initial JSON configuration")
    args = parser.parse_args()

    setup_logging()
    config = load_config_from_file(args.config) if args.config else default_config()

    demo = create_ui(config, theme_name=args.theme, dark_mode=args.dark_mode)
    demo.launch(server_name=args.ip, server_port=args.port)


if __name__ == "__main__":
    main()
