"""Reading and writing grid cases, regions, point lists and heatmaps.

Grid files are JSON in SI units (see ``docs/grid_schema.md``); regions are
JSON with axes, an ordered vertex ring and the equivalent half-spaces.
Tabular outputs are plain CSV with a single header row.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import DegenerateRegion, HostcapError, ParseError
from .geometry import PROVENANCES, HalfSpace, Region, halfspaces_from_ring
from .grid import Axis, Bus, GridCase, Line, validate_grid


class IOFailure(HostcapError, OSError):
    exit_code = 5


def _read_text(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc.strerror or exc}") from exc


def _write_text(path, text: str) -> None:
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc.strerror or exc}") from exc


def _load_json(path) -> dict:
    text = _read_text(path)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def _num(obj: dict, key: str, where: str, default=None, *, required=False) -> float:
    if key not in obj or obj[key] is None:
        if required:
            raise ParseError(f"{where}: missing field {key!r}")
        return default
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ParseError(f"{where}.{key}: expected a number, got {val!r}")
    return float(val)


# ---------------------------------------------------------------- grids


def grid_from_dict(data: dict, source: str = "grid") -> GridCase:
    """Convert the SI-unit JSON document into a validated per-unit case."""
    if not isinstance(data, dict):
        raise ParseError(f"{source}: top level must be an object")
    s_base = _num(data, "s_base_mva", source, required=True)
    v_base = _num(data, "v_base_kv", source, required=True)
    if not (s_base > 0 and v_base > 0):
        raise ParseError(f"{source}: s_base_mva and v_base_kv must be positive")
    z_base = v_base**2 / s_base
    i_base = s_base * 1e3 / (math.sqrt(3) * v_base)  # A

    def vmag(obj, stem, where, default):
        kv = _num(obj, f"{stem}_kv", where)
        if kv is not None:
            return kv / v_base
        return _num(obj, f"{stem}_pu", where, default)

    buses = []
    raw_buses = data.get("buses")
    if not isinstance(raw_buses, list) or not raw_buses:
        raise ParseError(f"{source}: 'buses' must be a non-empty list")
    for k, b in enumerate(raw_buses):
        where = f"{source}: buses[{k}]"
        if not isinstance(b, dict) or "id" not in b:
            raise ParseError(f"{where}: missing field 'id'")
        lo = vmag(b, "v_min", where, 0.9)
        hi = vmag(b, "v_max", where, 1.1)
        buses.append(
            Bus(
                id=str(b["id"]),
                p_min=_num(b, "p_min_mw", where, -math.inf),
                p_max=_num(b, "p_max_mw", where, math.inf),
                q_min=_num(b, "q_min_mvar", where, -math.inf),
                q_max=_num(b, "q_max_mvar", where, math.inf),
                v_min=lo * lo,
                v_max=hi * hi,
                base_load_p=_num(b, "load_p_mw", where, 0.0),
                base_load_q=_num(b, "load_q_mvar", where, 0.0),
                is_slack=bool(b.get("slack", False)),
                is_poc=bool(b.get("poc", False)),
            )
        )

    lines = []
    raw_lines = data.get("lines")
    if not isinstance(raw_lines, list):
        raise ParseError(f"{source}: 'lines' must be a list")
    for k, ln in enumerate(raw_lines):
        where = f"{source}: lines[{k}]"
        if not isinstance(ln, dict) or "from" not in ln or "to" not in ln:
            raise ParseError(f"{where}: needs 'from' and 'to'")
        if "r_pu" in ln:
            r = _num(ln, "r_pu", where, required=True)
            x = _num(ln, "x_pu", where, required=True)
            l_max = _num(ln, "l_max_pu2", where, math.inf)
        else:
            length = _num(ln, "length_km", where, required=True)
            r = _num(ln, "r_ohm_per_km", where, required=True) * length / z_base
            x = _num(ln, "x_ohm_per_km", where, required=True) * length / z_base
            i_max = _num(ln, "i_max_a", where, math.inf)
            l_max = (i_max / i_base) ** 2
        lines.append(Line(str(ln["from"]), str(ln["to"]), r, x, l_max))

    v_slack_mag = vmag(data, "v_slack", source, 1.0)
    grid = GridCase(tuple(buses), tuple(lines), s_base, v_base, v_slack_mag**2, str(data.get("name", "")))
    return validate_grid(grid)


def ingest_grid(path) -> GridCase:
    return grid_from_dict(_load_json(path), str(path))


def grid_to_dict(grid: GridCase) -> dict:
    """Per-unit JSON form that :func:`grid_from_dict` reads back exactly."""

    def finite(x):
        return None if math.isinf(x) else x

    return {
        "name": grid.name,
        "s_base_mva": grid.s_base,
        "v_base_kv": grid.v_base,
        "v_slack_pu": math.sqrt(grid.v_slack),
        "buses": [
            {
                "id": b.id,
                "slack": b.is_slack,
                "poc": b.is_poc,
                "v_min_pu": math.sqrt(b.v_min),
                "v_max_pu": math.sqrt(b.v_max),
                "p_min_mw": finite(b.p_min),
                "p_max_mw": finite(b.p_max),
                "q_min_mvar": finite(b.q_min),
                "q_max_mvar": finite(b.q_max),
                "load_p_mw": b.base_load_p,
                "load_q_mvar": b.base_load_q,
            }
            for b in grid.buses
        ],
        "lines": [
            {"from": ln.from_bus, "to": ln.to_bus, "r_pu": ln.r, "x_pu": ln.x, "l_max_pu2": finite(ln.l_max)}
            for ln in grid.lines
        ],
    }


def emit_grid(grid: GridCase, path) -> None:
    _write_text(path, json.dumps(grid_to_dict(grid), indent=2) + "\n")


# ---------------------------------------------------------------- regions


def region_to_dict(region: Region) -> dict:
    return {
        "axes": [str(a) for a in region.axes],
        "units": ["MW" if a.component == "P" else "MVAr" for a in region.axes],
        "provenance": region.provenance,
        "vertices": [[float(x), float(y)] for x, y in region.vertices],
        "halfspaces": [{"normal": list(h.normal), "offset": h.offset} for h in region.halfspaces],
    }


def region_from_dict(data: dict, source: str = "region") -> Region:
    try:
        axes = tuple(Axis.parse(a) for a in data["axes"])
        verts = np.array(data["vertices"], dtype=float).reshape(-1, 2)
        prov = data.get("provenance", "exact")
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{source}: malformed region ({exc})") from exc
    if len(axes) != 2:
        raise ParseError(f"{source}: a region needs exactly two axes")
    if prov not in PROVENANCES:
        raise ParseError(f"{source}: unknown provenance {prov!r}")
    if len(verts) < 3:
        raise DegenerateRegion(f"{source}: fewer than three vertices")
    if "halfspaces" in data:
        try:
            hs = tuple(HalfSpace(tuple(h["normal"]), h["offset"]) for h in data["halfspaces"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{source}: malformed half-space ({exc})") from exc
    else:
        hs = halfspaces_from_ring(verts)
    return Region(verts, hs, axes, prov)


def emit_region(region: Region, path) -> None:
    _write_text(path, json.dumps(region_to_dict(region), indent=2) + "\n")


def ingest_region(path) -> Region:
    return region_from_dict(_load_json(path), str(path))


# ---------------------------------------------------------------- CSV


def _write_rows(path, header, rows) -> None:
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc.strerror or exc}") from exc


def _fmt(x: float) -> str:
    return repr(float(x))


def emit_csv(path, header, rows) -> None:
    """Generic numeric CSV; floats are written with round-trip precision."""
    _write_rows(path, header, [[_fmt(c) if isinstance(c, (float, np.floating)) else c for c in row] for row in rows])


def emit_vertices_csv(region: Region, path) -> None:
    """Header ``vertex,<axis 1>,<axis 2>``; one row per ring vertex, CCW."""
    emit_csv(path, ["vertex", *map(str, region.axes)], [[i, float(x), float(y)] for i, (x, y) in enumerate(region.vertices)])


def read_csv(path) -> tuple[list, list]:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc.strerror or exc}") from exc
    if not rows:
        raise ParseError(f"{path}: empty CSV")
    return rows[0], rows[1:]


def emit_heatmap(path, x: np.ndarray, y: np.ndarray, values: np.ndarray, axes=("x", "y")) -> None:
    """Matrix CSV.  Header: ``<axis y>\\<axis x>`` then the x coordinates;
    each row starts with its y coordinate.  ``values[i, j]`` belongs to
    ``x[j]``, ``y[i]``."""
    header = [f"{axes[1]}\\{axes[0]}", *(_fmt(v) for v in x)]
    rows = [[_fmt(y[i]), *(_fmt(v) for v in values[i])] for i in range(len(y))]
    _write_rows(path, header, rows)


def ingest_heatmap(path) -> tuple[np.ndarray, np.ndarray, np.ndarray, tuple]:
    header, rows = read_csv(path)
    try:
        ax_y, _, ax_x = header[0].partition("\\")
        x = np.array([float(v) for v in header[1:]])
        y = np.array([float(r[0]) for r in rows])
        vals = np.array([[float(v) for v in r[1:]] for r in rows]).reshape(len(y), len(x))
    except (ValueError, IndexError) as exc:
        raise ParseError(f"{path}: malformed heatmap ({exc})") from exc
    return x, y, vals, (ax_x, ax_y)
