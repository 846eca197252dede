import os
import tempfile
import time
from pathlib import Path
from typing import Dict, Optional

import pandas as pd

CSV_FLOAT_FORMAT = "%.10g"


def ensure_dir(directory: str) -> str:
    os.makedirs(directory, exist_ok=True)
    return directory


def write_text_atomic(text: str, path: str) -> str:
    """Write through a temporary sibling file and rename it into place."""
    directory = os.path.dirname(os.path.abspath(path))
    ensure_dir(directory)
    fd, tmp_path = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise
    return path


def write_csv_atomic(df: pd.DataFrame, path: str) -> str:
    return write_text_atomic(df.to_csv(index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n"), path)


def get_latest_files(directory: str, file_types: list = ['.csv', '.txt']) -> Dict[str, Optional[str]]:
    """Get the latest output file of each type below a run directory"""
    latest_files: Dict[str, Optional[str]] = {ext: None for ext in file_types}

    if not os.path.exists(directory):
        os.makedirs(directory, exist_ok=True)
        return latest_files

    for file_type in file_types:
        try:
            matches = [p for p in Path(directory).rglob(f"*{file_type}") if not p.name.startswith(".tmp-")]
            if matches:
                latest = max(matches, key=lambda p: p.stat().st_mtime)
                # Only return files that are complete (not being written)
                if time.time() - latest.stat().st_mtime > 1.0:
                    latest_files[file_type] = str(latest)
        except Exception as e:
            print(f"Error getting latest {file_type} file: {e}")

    return latest_files


def list_output_files(directory: str, suffix: str = ".csv") -> list[str]:
    if not os.path.exists(directory):
        return []
    return sorted(str(p) for p in Path(directory).rglob(f"*{suffix}") if not p.name.startswith(".tmp-"))
