"""Persistence for grids, tables, reports and solver logs.

GridField binary container (little-endian):

    magic b"S2GF" | uint16 version | uint16 n | uint64 shape[n]
    | float64 origin[n] | float64 spacing[n] | float64 values (node-major)

Masked nodes are stored as nan and read back as a mask.
"""
import csv
import struct
from pathlib import Path
from typing import Any, Iterable, List, Mapping, Union

import numpy as np
from pydantic import BaseModel

from errors import DomainError
from models import GridField
from schemas import Report, SolveLog, SolveLogEntry

GRID_MAGIC = b"S2GF"
GRID_VERSION = 1
HEADER = struct.Struct("<4sHH")

PathLike = Union[str, Path]


def grid_to_bytes(grid: GridField) -> bytes:
    n = grid.n
    values = np.where(grid.defined(), grid.values, np.nan).astype("<f8")
    return b"".join(
        [
            HEADER.pack(GRID_MAGIC, GRID_VERSION, n),
            struct.pack(f"<{n}Q", *grid.shape),
            struct.pack(f"<{n}d", *grid.origin),
            struct.pack(f"<{n}d", *grid.spacing),
            values.tobytes(order="C"),
        ]
    )


def grid_from_bytes(data: bytes) -> GridField:
    if len(data) < HEADER.size:
        raise DomainError("truncated grid container")
    magic, version, n = HEADER.unpack_from(data, 0)
    if magic != GRID_MAGIC:
        raise DomainError("not a grid container (bad magic)")
    if version != GRID_VERSION:
        raise DomainError(f"unsupported grid container version {version}")
    offset = HEADER.size
    shape = struct.unpack_from(f"<{n}Q", data, offset)
    offset += 8 * n
    origin = struct.unpack_from(f"<{n}d", data, offset)
    offset += 8 * n
    spacing = struct.unpack_from(f"<{n}d", data, offset)
    offset += 8 * n
    count = int(np.prod(shape))
    if len(data) - offset != 8 * count:
        raise DomainError(f"grid container holds {(len(data) - offset) // 8} values, header says {count}")
    values = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape).astype(float)
    finite = np.isfinite(values)
    mask = None if finite.all() else finite
    return GridField(origin=origin, spacing=spacing, values=values, mask=mask)


def write_grid(path: PathLike, grid: GridField) -> None:
    Path(path).write_bytes(grid_to_bytes(grid))


def read_grid(path: PathLike) -> GridField:
    return grid_from_bytes(Path(path).read_bytes())


def write_grid_csv(path: PathLike, grid: GridField) -> None:
    """One row per node: coordinates then value, nan for masked nodes."""
    points = grid.points().reshape(-1, grid.n)
    values = np.where(grid.defined(), grid.values, np.nan).reshape(-1, 1)
    header = ",".join([f"x{i + 1}" for i in range(grid.n)] + ["value"])
    np.savetxt(path, np.hstack([points, values]), delimiter=",", header=header, comments="", fmt="%.17g")


def read_grid_csv(path: PathLike) -> GridField:
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    n = table.shape[1] - 1
    axes = [np.unique(table[:, a]) for a in range(n)]
    shape = tuple(len(x) for x in axes)
    if int(np.prod(shape)) != table.shape[0]:
        raise DomainError("CSV rows do not form a full tensor grid")
    order = np.lexsort(tuple(table[:, a] for a in reversed(range(n))))
    values = table[order, n].reshape(shape)
    finite = np.isfinite(values)
    return GridField(
        origin=tuple(float(x[0]) for x in axes),
        spacing=tuple(float(x[1] - x[0]) for x in axes),
        values=values,
        mask=None if finite.all() else finite,
    )


def _row(item: Union[BaseModel, Mapping[str, Any]]) -> Mapping[str, Any]:
    return item.model_dump(mode="json") if isinstance(item, BaseModel) else item


def write_table(path: PathLike, rows: Iterable[Union[BaseModel, Mapping[str, Any]]]) -> int:
    """Write flat records as CSV; returns the number of rows."""
    records = [_row(r) for r in rows]
    if not records:
        Path(path).write_text("")
        return 0
    with open(path, "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(records[0]))
        writer.writeheader()
        writer.writerows(records)
    return len(records)


def read_table(path: PathLike) -> List[dict]:
    with open(path, newline="") as handle:
        return list(csv.DictReader(handle))


def write_report(path: PathLike, report: Report) -> None:
    Path(path).write_text(report.model_dump_json(indent=2))


def read_report(path: PathLike) -> Report:
    return Report.model_validate_json(Path(path).read_text())


def write_solve_log(path: PathLike, log: SolveLog) -> None:
    """JSON lines, one Newton iteration per line."""
    with open(path, "w") as handle:
        for entry in log.entries:
            handle.write(entry.model_dump_json() + "\n")


def read_solve_log(path: PathLike) -> List[SolveLogEntry]:
    with open(path) as handle:
        return [SolveLogEntry.model_validate_json(line) for line in handle if line.strip()]
