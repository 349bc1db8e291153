"""
Output writers
CSV/JSON tables with an embedded run manifest, long-format plot tables and read-back
"""
import json
import math
import sys
from pathlib import Path
from typing import Any, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from dsdkit.models.results import RunManifest

FORMATS = ("csv", "json")


def format_value(value: Any, digits: int = 6) -> str:
    """Fixed significant-digit rendering; missing values become empty cells"""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if math.isnan(value):
            return ""
        return f"{float(value):.{digits}g}"
    return str(value)


def json_value(value: Any, digits: int = 6) -> Any:
    if value is None:
        return None
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        if math.isnan(value):
            return None
        return float(f"{float(value):.{digits}g}")
    return str(value)


def render_csv(frame: pd.DataFrame, manifest: RunManifest, digits: int = 6) -> str:
    header = "\n".join(manifest.to_comment_lines()) + "\n"
    body = frame.map(lambda value: format_value(value, digits)).to_csv(index=False, lineterminator="\n")
    return header + body


def render_json(frame: pd.DataFrame, manifest: RunManifest, name: str, digits: int = 6) -> str:
    columns = [str(column) for column in frame.columns]
    payload = {
        "manifest": manifest.model_dump(mode="json"),
        "table": name,
        "columns": columns,
        "rows": [
            {column: json_value(value, digits) for column, value in zip(columns, row)}
            for row in frame.itertuples(index=False, name=None)
        ],
    }
    return json.dumps(payload, indent=2) + "\n"


def render_table(
    frame: pd.DataFrame,
    manifest: RunManifest,
    name: str,
    output_format: str = "csv",
    digits: int = 6
) -> str:
    if output_format == "json":
        return render_json(frame, manifest, name, digits)
    return render_csv(frame, manifest, digits)


def write_table(
    frame: pd.DataFrame,
    name: str,
    manifest: RunManifest,
    output_format: str = "csv",
    out_dir: Union[str, Path, None] = None,
    digits: int = 6
) -> Optional[Path]:
    """
    Write one table to <out_dir>/<name>.<format>, or to stdout when no directory is given

    Returns:
        Path written, or None for stdout
    """
    text = render_table(frame, manifest, name, output_format, digits)
    if out_dir is None:
        sys.stdout.write(text)
        return None
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{name}.{output_format}"
    path.write_text(text, encoding="utf-8")
    return path


def write_document(payload: dict, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_table(path: Union[str, Path]) -> pd.DataFrame:
    """Read a CSV or JSON table written by write_table (manifest skipped)"""
    path = Path(path)
    if path.suffix == ".json":
        payload = json.loads(path.read_text(encoding="utf-8"))
        return pd.DataFrame(payload["rows"], columns=payload["columns"])
    return pd.read_csv(path, comment="#")


def read_manifest(path: Union[str, Path]) -> dict:
    """Manifest embedded in a CSV or JSON table"""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        return json.loads(text)["manifest"]
    manifest = {}
    for line in text.splitlines():
        if not line.startswith("# "):
            break
        key, _, value = line[2:].partition(": ")
        manifest[key] = json.loads(value)
    return manifest


def long_format(frame: pd.DataFrame, id_column: str, value_columns: Optional[Sequence[str]] = None) -> pd.DataFrame:
    """(id, series, value) table for plotting"""
    value_columns: List[str] = list(value_columns or [c for c in frame.columns if c != id_column])
    return frame.melt(id_vars=[id_column], value_vars=value_columns, var_name="series", value_name="value")
