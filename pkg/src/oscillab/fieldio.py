"""Serialization: flat binary fields with a small header, CSV reports.

Binary layout (little endian): magic 'OSLB', version u32, kind u8 (0 macro,
1 kinetic chi, 2 kinetic indicator), n_x u8, n_y u8, has_xi u8, per-axis cell
counts u32, x extents f64, xi_max f64, support_bound f64, epsilon f64 (nan if
unset), time f64, then the float64 data in C order.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .grids import Grid, KineticField, MacroField

MAGIC = b"OSLB"
VERSION = 1
_KINDS = {"macro": 0, "chi": 1, "indicator": 2}
_KIND_NAMES = {v: k for k, v in _KINDS.items()}


def write_field(path, field) -> None:
    grid = field.grid
    kind = "macro" if isinstance(field, MacroField) else field.form
    has_xi = 0 if isinstance(field, MacroField) else 1
    ny = len(grid.y_cells) if field.values.ndim > len(grid.x_cells) + has_xi else 0
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IBBB", VERSION, _KINDS[kind], len(grid.x_cells), ny))
        fh.write(struct.pack("<B", has_xi))
        for n in grid.x_cells:
            fh.write(struct.pack("<I", n))
        for d in range(ny):
            fh.write(struct.pack("<I", grid.y_cells[d]))
        if has_xi:
            fh.write(struct.pack("<I", grid.xi_cells))
        for ln in grid.x_length:
            fh.write(struct.pack("<d", ln))
        eps = grid.epsilon if grid.epsilon is not None else float("nan")
        fh.write(struct.pack("<ddd", grid.xi_max, grid.support_bound, eps))
        fh.write(struct.pack("<d", field.time))
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def read_field(path):
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise ValueError(f"{path}: not a field file")
        version, kind, nx, ny = struct.unpack("<IBBB", fh.read(7))
        if version != VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        (has_xi,) = struct.unpack("<B", fh.read(1))
        x_cells = tuple(struct.unpack("<I", fh.read(4))[0] for _ in range(nx))
        y_cells = tuple(struct.unpack("<I", fh.read(4))[0] for _ in range(ny))
        xi_cells = struct.unpack("<I", fh.read(4))[0] if has_xi else 0
        x_length = tuple(struct.unpack("<d", fh.read(8))[0] for _ in range(nx))
        xi_max, support, eps = struct.unpack("<ddd", fh.read(24))
        (time,) = struct.unpack("<d", fh.read(8))
        grid = Grid(x_cells=x_cells, x_length=x_length, y_cells=y_cells,
                    xi_cells=xi_cells, xi_max=xi_max, support_bound=support,
                    epsilon=None if np.isnan(eps) else eps)
        shape = x_cells + y_cells + ((xi_cells,) if has_xi else ())
        data = np.frombuffer(fh.read(), dtype="<f8").reshape(shape).copy()
    if _KIND_NAMES[kind] == "macro":
        return MacroField(data, grid, time)
    return KineticField(data, grid, time, _KIND_NAMES[kind])


def field_to_csv(path, field) -> None:
    """Flattened field with coordinate columns (plotting-friendly)."""
    grid = field.grid
    axes = []
    for d in range(len(grid.x_cells)):
        axes.append((f"x{d + 1}", grid.x_centers(d)))
    extra = field.values.ndim - len(grid.x_cells)
    for d in range(extra):
        if d < len(grid.y_cells) and field.values.shape[len(grid.x_cells) + d] == grid.y_cells[d]:
            axes.append((f"y{d + 1}", grid.y_centers(d)))
        else:
            axes.append(("xi", grid.xi_centers()))
    mesh = np.meshgrid(*[a for _, a in axes], indexing="ij")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([n for n, _ in axes] + ["value"])
        flat = [m.ravel() for m in mesh] + [field.values.ravel()]
        for row in zip(*flat):
            w.writerow([format(v, ".17g") for v in row])


def write_rows_csv(path, rows, fieldnames=None) -> None:
    rows = list(rows)
    if not rows:
        Path(path).write_text("")
        return
    names = fieldnames or list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=names)
        w.writeheader()
        for r in rows:
            w.writerow({k: (format(v, ".17g") if isinstance(v, float) else v)
                        for k, v in r.items()})


def read_rows_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_manifest(path, manifest: dict) -> None:
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
