import json
import os
import uuid
from typing import Optional

from pydantic import ValidationError

from src.cli.views import RunConfig, SweepSpec
from src.utils.errors import ConfigurationError
from src.utils.utils import write_text_atomic


def default_config() -> RunConfig:
    """Prepare the default configuration"""
    return RunConfig()


def _describe(error: ValidationError) -> str:
    return "; ".join(f"{'.'.join(str(p) for p in item['loc']) or 'config'}: {item['msg']}" for item in error.errors())


def parse_config(text: str, source: str = "config") -> RunConfig:
    try:
        return RunConfig.model_validate_json(text)
    except ValidationError as e:
        raise ConfigurationError(f"{source}: {_describe(e)}") from e


def load_config_from_file(config_file: str) -> RunConfig:
    """Load a run configuration from a JSON file."""
    if not os.path.exists(config_file):
        raise ConfigurationError(f"Configuration file '{config_file}' not found")
    with open(config_file, "r", encoding="utf-8") as f:
        return parse_config(f.read(), source=config_file)


def build_sweep_spec(parameter: str, values: list[float], base: RunConfig) -> SweepSpec:
    try:
        return SweepSpec(parameter=parameter, values=values, base=base)
    except ValidationError as e:
        raise ConfigurationError(f"sweep: {_describe(e)}") from e


def config_to_json(config: RunConfig) -> str:
    return config.model_dump_json(indent=2) + "\n"


def save_config_to_file(config: RunConfig, save_dir: Optional[str] = None) -> str:
    """Save the settings to a UUID-named JSON file; returns its path."""
    save_dir = save_dir or os.getenv("AMOD_SETTINGS_DIR", "./tmp/webui_settings")
    config_file = os.path.join(save_dir, f"{uuid.uuid4()}.json")
    return write_text_atomic(config_to_json(config), config_file)


def save_current_config(config_json: str, save_dir: Optional[str] = None) -> str:
    """Validate the JSON edited in the web UI and store it."""
    try:
        json.loads(config_json)
    except json.JSONDecodeError as e:
        return f"Error saving configuration: {e}"
    try:
        config = parse_config(config_json, source="web UI")
    except ConfigurationError as e:
        return f"Error saving configuration: {e}"
    return f"Configuration saved to {save_config_to_file(config, save_dir)}"
