"""
File formats for panels, surfaces and quantile tables.

Panels:
    <stem>.csv     header ell,m,t,value (t is 1-based), rows in any order
    <stem>.json    sidecar {lmax, n_times, seed, scenario}
    <stem>.bpanel  binary format, see docs/binary-panel-format.md

Surfaces:
    <stem>.csv     matrix, row j is r = j/grid_r, column k is s = k/grid_s
    <stem>.json    {N, L, lmin, grid_r, grid_s, sup}

JSON payloads are written with sorted keys and a trailing newline so equal
inputs give byte-identical files.
"""

from __future__ import annotations

import json
import logging
import struct
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from spherical_cusum.cusum import StatisticSurface, sup_statistic
from spherical_cusum.errors import SchemaError
from spherical_cusum.harmonics import CoefficientPanel, n_coefficients
from spherical_cusum.pillowcase import QuantileTable

logger = logging.getLogger(__name__)

PANEL_COLUMNS = ["ell", "m", "t", "value"]
BINARY_MAGIC = b"SCPANEL\x00"
BINARY_VERSION = 1
# magic, version, lmax, n_times, reserved
BINARY_HEADER = struct.Struct("<8sIIII")


def write_json(payload: Any, path: str | Path) -> None:
    """Deterministic JSON: sorted keys, two-space indent, trailing newline."""
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_json(path: str | Path) -> Any:
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: "
                          f"{exc.msg}") from exc


def sidecar_path(path: str | Path) -> Path:
    return Path(path).with_suffix(".json")


# ---------------------------------------------------------------------------
# Panels
# ---------------------------------------------------------------------------

def _ell_m_rows(lmax: int) -> tuple[np.ndarray, np.ndarray]:
    ells = np.repeat(np.arange(lmax + 1), 2 * np.arange(lmax + 1) + 1)
    ms = np.concatenate([np.arange(-ell, ell + 1) for ell in range(lmax + 1)])
    return ells, ms


def write_panel_csv(panel: CoefficientPanel, path: str | Path) -> Path:
    """Write the panel CSV and its JSON sidecar; returns the sidecar path."""
    ells, ms = _ell_m_rows(panel.lmax)
    n_rows = n_coefficients(panel.lmax)
    frame = pd.DataFrame({
        "ell": np.repeat(ells, panel.n_times),
        "m": np.repeat(ms, panel.n_times),
        "t": np.tile(np.arange(1, panel.n_times + 1), n_rows),
        "value": panel.values.ravel(),
    })
    frame.to_csv(path, index=False)
    meta = sidecar_path(path)
    write_json({"lmax": panel.lmax, "n_times": panel.n_times,
                "seed": panel.seed, "scenario": panel.scenario}, meta)
    return meta


def read_panel_csv(path: str | Path) -> CoefficientPanel:
    """
    Read a panel CSV; dimensions come from the sidecar when present.

    Raises:
        SchemaError: On an unreadable file, a wrong header, duplicate or
            missing cells, or a sidecar that disagrees with the rows.
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, encoding="utf-8", float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise SchemaError(f"{path}: unreadable CSV: {exc}") from exc
    if list(frame.columns) != PANEL_COLUMNS:
        raise SchemaError(f"{path}: header must be {','.join(PANEL_COLUMNS)}, "
                          f"got {','.join(map(str, frame.columns))}")
    for column in ("ell", "m", "t"):
        if not pd.api.types.is_integer_dtype(frame[column]):
            raise SchemaError(f"{path}: column {column!r} must hold integers")

    meta: dict[str, Any] = {}
    if sidecar_path(path).exists():
        meta = read_json(sidecar_path(path))
    lmax = int(meta.get("lmax", frame["ell"].max()))
    n_times = int(meta.get("n_times", frame["t"].max()))

    ell, m, t = (frame[c].to_numpy() for c in ("ell", "m", "t"))
    if np.any(ell < 0) or np.any(ell > lmax) or np.any(np.abs(m) > ell):
        raise SchemaError(f"{path}: (ell, m) outside 0 <= |m| <= ell <= {lmax}")
    if np.any(t < 1) or np.any(t > n_times):
        raise SchemaError(f"{path}: t outside 1..{n_times}")
    if frame.duplicated(subset=["ell", "m", "t"]).any():
        raise SchemaError(f"{path}: duplicate (ell, m, t) rows")
    expected = n_coefficients(lmax) * n_times
    if len(frame) != expected:
        raise SchemaError(f"{path}: expected {expected} rows for lmax={lmax}, "
                          f"N={n_times}, got {len(frame)}")

    values = np.empty((n_coefficients(lmax), n_times))
    try:
        values[ell * ell + ell + m, t - 1] = frame["value"].to_numpy(dtype=float)
    except ValueError as exc:
        raise SchemaError(f"{path}: column 'value' must hold numbers") from exc
    return CoefficientPanel(lmax, n_times, values, seed=meta.get("seed"),
                            scenario=meta.get("scenario"))


def write_panel_binary(panel: CoefficientPanel, path: str | Path) -> None:
    header = BINARY_HEADER.pack(BINARY_MAGIC, BINARY_VERSION, panel.lmax, panel.n_times, 0)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(panel.values, dtype="<f8").tobytes())


def read_panel_binary(path: str | Path) -> CoefficientPanel:
    """
    Raises:
        SchemaError: On a bad magic, unknown version or truncated payload.
    """
    data = Path(path).read_bytes()
    if len(data) < BINARY_HEADER.size:
        raise SchemaError(f"{path}: file shorter than the binary panel header")
    magic, version, lmax, n_times, _ = BINARY_HEADER.unpack_from(data)
    if magic != BINARY_MAGIC:
        raise SchemaError(f"{path}: not a binary panel (bad magic bytes)")
    if version != BINARY_VERSION:
        raise SchemaError(f"{path}: unsupported binary panel version {version}")
    count = n_coefficients(lmax) * n_times
    payload = data[BINARY_HEADER.size:]
    if len(payload) != 8 * count:
        raise SchemaError(f"{path}: expected {8 * count} payload bytes, got {len(payload)}")
    values = np.frombuffer(payload, dtype="<f8").reshape(n_coefficients(lmax), n_times)
    return CoefficientPanel(lmax, n_times, values.astype(float))


def write_panel(panel: CoefficientPanel, path: str | Path) -> list[Path]:
    """Write by extension (.bpanel binary, anything else CSV); returns written paths."""
    path = Path(path)
    if path.suffix == ".bpanel":
        write_panel_binary(panel, path)
        return [path]
    return [path, write_panel_csv(panel, path)]


def read_panel(path: str | Path) -> CoefficientPanel:
    path = Path(path)
    if path.suffix == ".bpanel":
        return read_panel_binary(path)
    return read_panel_csv(path)


def write_zonal_csv(series: dict[int, np.ndarray], path: str | Path) -> None:
    """Columns t, ell_<l> for each requested multipole."""
    n_times = len(next(iter(series.values())))
    frame = pd.DataFrame({"t": np.arange(1, n_times + 1)})
    for ell, values in series.items():
        frame[f"ell_{ell}"] = values
    frame.to_csv(path, index=False)


# ---------------------------------------------------------------------------
# Surfaces, tables and sups
# ---------------------------------------------------------------------------

def write_surface(surface: StatisticSurface, path: str | Path) -> Path:
    """Write the surface matrix CSV and metadata sidecar; returns the sidecar path."""
    frame = pd.DataFrame(surface.values,
                         columns=[f"s{k}" for k in range(surface.grid_s + 1)])
    frame.insert(0, "j", np.arange(surface.grid_r + 1))
    frame.to_csv(path, index=False)
    meta = sidecar_path(path)
    write_json({**surface.meta, "sup": sup_statistic(surface)}, meta)
    return meta


def write_quantile_table(table: QuantileTable, path: str | Path) -> None:
    write_json(table.to_dict(), path)


def write_sups_csv(sups: np.ndarray, path: str | Path) -> None:
    pd.DataFrame({"replicate": np.arange(len(sups)), "sup": sups}).to_csv(path, index=False)

