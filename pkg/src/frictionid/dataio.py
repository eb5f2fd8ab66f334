"""CSV schemas and run manifests.

Time series rows are ``t, y1, y2, yd1, yd2, ydd1, ydd2, u1, u2``;
closed-loop logs use
``t, y1, y2, y1_des, y2_des, uff1, uff2, umpc1, umpc2, e1, e2``.
Floats are written with 17 significant digits so repeated runs with the
same seed produce byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import time

import numpy as np

from .dynamics import TimeSeries
from .mpc import ClosedLoopLog

TIMESERIES_HEADER = "t,y1,y2,yd1,yd2,ydd1,ydd2,u1,u2"
CLOSEDLOOP_HEADER = "t,y1,y2,y1_des,y2_des,uff1,uff2,umpc1,umpc2,e1,e2"


class DataFormatError(ValueError):
    """Input file does not match the documented schema."""


def _write_rows(path, header, rows):
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(f"{value:.17g}" for value in row) + "\n")


def write_timeseries_csv(path, ts: TimeSeries) -> None:
    rows = np.column_stack([ts.t, ts.y, ts.ydot, ts.yddot, ts.u])
    _write_rows(path, TIMESERIES_HEADER, rows)


def read_timeseries_csv(path) -> TimeSeries:
    with open(path) as fh:
        header = fh.readline().strip()
    if header != TIMESERIES_HEADER:
        raise DataFormatError(
            f"{path}: expected header {TIMESERIES_HEADER!r}, found {header!r}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 9:
        raise DataFormatError(f"{path}: expected 9 columns, found {data.shape[1]}")
    if data.shape[0] < 2:
        raise DataFormatError(f"{path}: need at least 2 samples")
    if not np.isfinite(data).all():
        raise DataFormatError(f"{path}: non-finite entries")
    return TimeSeries(data[:, 0], data[:, 1:3], data[:, 3:5], data[:, 5:7],
                      data[:, 7:9])


def write_closedloop_csv(path, log: ClosedLoopLog) -> None:
    rows = np.column_stack([log.t, log.y, log.y_des, log.u_ff, log.u_mpc,
                            log.tracking_error])
    _write_rows(path, CLOSEDLOOP_HEADER, rows)


def write_comparison_csv(path, grid, curves: dict) -> None:
    """Per-model torque curves over a shared velocity grid."""
    names = list(curves)
    header = "v," + ",".join(names)
    rows = np.column_stack([grid] + [curves[name] for name in names])
    _write_rows(path, header, rows)


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(path, command: str, config_path, seed, inputs, outputs,
                   elapsed_s: float, extra: dict | None = None) -> None:
    """Sidecar record tying every output file to the run that made it."""
    from . import __version__

    manifest = {
        "tool": {"name": "frictionid", "version": __version__},
        "command": command,
        "config": {"path": str(config_path) if config_path else None,
                   "sha256": file_sha256(config_path) if config_path else None},
        "seed": seed,
        "inputs": {str(p): file_sha256(p) for p in inputs},
        "outputs": {str(p): file_sha256(p) for p in outputs},
        "wall_clock_s": elapsed_s,
        "written_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    if extra:
        manifest.update(extra)
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
