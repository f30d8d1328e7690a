"""Reporting helpers (CSV tables, snapshots and text reports)."""

from __future__ import annotations

import math
from dataclasses import asdict, is_dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional

import numpy as np
import pandas as pd
from loguru import logger

from fem import DGFunction, sample_points


def _format_error(value: Optional[float]) -> str:
    if value is None or not math.isfinite(value):
        return "inf"
    return f"{value:.2E}"


def _as_dict(row: Any) -> Dict[str, Any]:
    if is_dataclass(row):
        return asdict(row)
    return dict(row)


def format_convergence_table(rows: Iterable[Any]) -> pd.DataFrame:
    """Errors to 3 significant digits; orders recomputed from the stored errors, blank first."""
    records = [_as_dict(row) for row in rows]
    table = pd.DataFrame(records, columns=["N", "h", "dt", "l2_error"])
    errors = [_format_error(value) for value in table["l2_error"]]
    orders = [""]
    for previous, current in zip(errors[:-1], errors[1:]):
        if "inf" in (previous, current) or float(previous) == 0.0 or float(current) == 0.0:
            orders.append("")
        else:
            orders.append(f"{math.log2(float(previous) / float(current)):.2f}")
    table["l2_error"] = errors
    table["order"] = orders[: len(errors)]
    table["h"] = [f"{value:.6g}" for value in table["h"]]
    table["dt"] = [f"{value:.6g}" for value in table["dt"]]
    return table


def write_convergence_table(out_dir: Path, rows: Iterable[Any]) -> Path:
    """Write table.csv with columns N,h,dt,l2_error,order."""
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "table.csv"
    format_convergence_table(rows).to_csv(path, index=False)
    logger.info(f"Convergence table written to {path}")
    return path


def snapshot_frame(u: DGFunction, samples_per_cell: int = 3, name: str = "u") -> pd.DataFrame:
    x, values = sample_points(u, samples_per_cell)
    return pd.DataFrame({"x": x, name: values})


def write_snapshot(
    out_dir: Path, u: DGFunction, t: float, samples_per_cell: int = 3, name: str = "u"
) -> Path:
    """`x,<name>` at uniform points of every cell."""
    out_dir.mkdir(parents=True, exist_ok=True)
    prefix = "snapshot" if name == "u" else f"snapshot_{name}"
    path = out_dir / f"{prefix}_t{t:g}.csv"
    snapshot_frame(u, samples_per_cell, name).to_csv(path, index=False, float_format="%.12g")
    logger.debug(f"Snapshot at t={t:g} written to {path}")
    return path


def write_energy_trace(out_dir: Path, frame: pd.DataFrame, filename: str = "energy.csv") -> Path:
    """step,t,u_norm_sq,q_term,functional per step."""
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / filename
    frame.to_csv(path, index=False, float_format="%.16e")
    return path


def write_stability_report(out_dir: Path, rows: Iterable[Any]) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "stability.csv"
    pd.DataFrame([_as_dict(row) for row in rows]).to_csv(path, index=False)
    logger.info(f"Stability report written to {path}")
    return path


def write_run_log(out_dir: Path, records: List[Mapping[str, Any]], filename: str = "pme_log.csv") -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / filename
    pd.DataFrame(list(records)).to_csv(path, index=False, float_format="%.12g")
    return path


def write_report(out_dir: Path, values: Mapping[str, Any], filename: str = "report.txt") -> Path:
    """One `key: value` line per entry."""
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / filename
    lines = []
    for key, value in values.items():
        if isinstance(value, (float, np.floating)):
            value = f"{value:.6g}"
        lines.append(f"{key}: {value}")
    path.write_text("\n".join(lines) + "\n")
    logger.info(f"Report written to {path}")
    return path
