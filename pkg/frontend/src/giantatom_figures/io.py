"""Loading and validation of the CSV/JSON artifacts consumed by renderers."""

from __future__ import annotations

import csv
import json
from pathlib import Path


class FigureSpecError(Exception):
    """Invalid figure specification or inconsistent/missing inputs."""


def read_csv(path) -> dict:
    """Read a headered numeric CSV into a dict of float column arrays."""
    path = Path(path)
    if not path.exists():
        raise FigureSpecError(f"input CSV does not exist: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FigureSpecError(f"input CSV is empty: {path}") from None
        cols = {name: [] for name in header}
        for row in reader:
            for name, val in zip(header, row):
                cols[name].append(float(val))
    if not cols or not next(iter(cols.values())):
        raise FigureSpecError(f"input CSV has no data rows: {path}")
    return cols


def read_meta(csv_path) -> dict:
    """Load the JSON sidecar next to a CSV, or an empty dict if absent."""
    side = Path(csv_path).with_suffix("").with_suffix(".meta.json") \
        if str(csv_path).endswith(".csv") else Path(csv_path)
    side = Path(str(csv_path)[:-4] + ".meta.json")
    if not side.exists():
        return {}
    with open(side) as fh:
        return json.load(fh)


def check_consistent_modes(paths):
    """All sidecars that declare a mode must declare the same one."""
    modes = {}
    for p in paths:
        mode = read_meta(p).get("mode")
        if mode is not None:
            modes[str(p)] = mode
    if len(set(modes.values())) > 1:
        raise FigureSpecError(
            f"panel inputs mix computation modes: {modes}")
