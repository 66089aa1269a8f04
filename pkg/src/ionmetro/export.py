"""CSV/JSON writers with provenance headers, and matching readers.

Outputs are byte-deterministic: numbers are written with 12 significant
digits, JSON keys are sorted and no timestamps are recorded.
"""

import csv
import hashlib
import json
import os

import numpy as np

from . import __version__
from .errors import ConfigError
from .interferometer import FringeDataset

TOOL = "ionmetro"


def config_hash(config):
    """sha256 of the canonical JSON form of a configuration mapping."""
    text = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def provenance(config):
    return {"tool": TOOL, "version": __version__, "config_sha256": config_hash(config)}


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".12g")
    if value is None:
        return ""
    return str(value)


def write_csv(path, columns, rows, config):
    prov = provenance(config)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for key in ("tool", "version", "config_sha256"):
            fh.write(f"# {key}={prov[key]}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def plain(obj):
    """JSON-ready copy with numpy types converted and floats rounded to 12 digits."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return float(format(v, ".12g")) if np.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, payload, config):
    data = {"provenance": provenance(config), "result": plain(payload)}
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def read_csv(path):
    """Columns of a CSV written by :func:`write_csv` (or any plain CSV with a
    header row); comment lines starting with '#' are returned as metadata."""
    meta = {}
    lines = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                meta[key.strip()] = val.strip()
            elif line.strip():
                lines.append(line)
    reader = csv.reader(lines)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ConfigError(f"{path}: no header row") from None
    cols = {h: [] for h in header}
    for row in reader:
        if len(row) != len(header):
            raise ConfigError(f"{path}: row has {len(row)} fields, expected {len(header)}")
        for h, v in zip(header, row):
            cols[h].append(v.strip())
    return cols, meta


def _floats(cols, name, path):
    if name not in cols:
        raise ConfigError(f"{path}: missing column {name!r}")
    try:
        return np.array([float(v) for v in cols[name]])
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric value in column {name!r}") from exc


def _shots(cols, path):
    if "shots" not in cols:
        return None
    vals = {v for v in cols["shots"] if v not in ("", "exact")}
    if not vals:
        return None
    if len(vals) > 1:
        raise ConfigError(f"{path}: mixed shot counts are not supported")
    return int(float(vals.pop()))


def write_fringe_csv(path, dataset, config):
    shots = "exact" if dataset.shots is None else dataset.shots
    rows = [(ph, p, shots) for ph, p in zip(dataset.phi, dataset.p_down)]
    return write_csv(path, ["phi_rad", "p_down", "shots"], rows, config)


def read_fringe_csv(path):
    cols, _ = read_csv(path)
    return FringeDataset(_floats(cols, "phi_rad", path), _floats(cols, "p_down", path),
                         _shots(cols, path))


def write_curve_csv(path, xs, ys, model_name, config, x_name="t_seconds"):
    if x_name not in ("t_seconds", "phi_rad"):
        raise ValueError("x column must be t_seconds or phi_rad")
    rows = [(x, y, model_name) for x, y in zip(xs, ys)]
    return write_csv(path, [x_name, "p_down", "model_name"], rows, config)


def read_rabi_csv(path):
    """(times, p_down, shots) from a sideband Rabi dataset."""
    cols, _ = read_csv(path)
    return _floats(cols, "t_seconds", path), _floats(cols, "p_down", path), _shots(cols, path)


def write_sensitivity_csv(path, reports, config):
    rows = [(r.kind, r.mean_n, r.delta_phi, r.cr_bound, r.db_vs_sql) for r in reports]
    return write_csv(path, ["kind", "mean_n", "delta_phi", "cr_bound", "db_vs_sql"], rows, config)
