"""
Serialized outputs: IMC interchange files, result tables, partition plots,
refinement summaries and simulated trajectories.

Every file is written atomically through a temporary file in the target
directory. CSV floats carry 17 significant digits; JSON floats use the
shortest round-trip repr.
"""

import csv
import io
import json
import logging
import os
import tempfile
from collections.abc import Sequence
from pathlib import Path

import numpy as np
from django.template.loader import render_to_string

from .chains import IMC
from .exceptions import ConfigError, ModelError
from .geometry import Partition, Rect
from .models import StateClass

logger = logging.getLogger(__name__)

IMC_FORMAT = "imc-triplets"
IMC_VERSION = 1

CLASS_COLORS = {
    StateClass.YES: "#28a745",
    StateClass.NO: "#dc3545",
    StateClass.UNDECIDED: "#ffc107",
}
SVG_SIZE = 600.0


def atomic_write(path: str | Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def format_float(value: float) -> str:
    return format(float(value), ".17g")


def _csv_text(header: Sequence[str], rows) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


# ── IMC interchange ─────────────────────────────────────────────────────────


def imc_to_json(imc: IMC) -> str:
    rows, cols, lo, hi = imc.triplets()
    doc = {
        "format": IMC_FORMAT,
        "version": IMC_VERSION,
        "n_states": imc.n_states,
        "props": [sorted(p) for p in imc.props],
        "cells": (
            [{"lower": list(c.lower), "upper": list(c.upper)} for c in imc.cells]
            if imc.cells is not None
            else None
        ),
        "transitions": [
            [int(r), int(c), float(a), float(b)]
            for r, c, a, b in zip(
                rows.tolist(), cols.tolist(), lo.tolist(), hi.tolist()
            )
        ],
    }
    return json.dumps(doc, indent=1) + "\n"


def imc_from_json(text: str) -> IMC:
    """
    Decode an IMC interchange document.

    Row feasibility is checked on construction; raises ModelError for
    infeasible rows and ConfigError for malformed documents.
    """
    try:
        doc = json.loads(text)
        if doc.get("format") != IMC_FORMAT:
            raise ConfigError(f"unsupported IMC format {doc.get('format')!r}")
        n = int(doc["n_states"])
        props = [frozenset(p) for p in doc["props"]]
        cells = doc.get("cells")
        transitions = doc["transitions"]
    except (
        json.JSONDecodeError,
        KeyError,
        TypeError,
        ValueError,
        AttributeError,
    ) as exc:
        raise ConfigError(f"malformed IMC file: {exc}") from exc
    if transitions:
        rows, cols, lo, hi = (np.array(col) for col in zip(*transitions))
    else:
        rows = cols = np.zeros(0, dtype=np.int64)
        lo = hi = np.zeros(0)
    if np.any(rows < 0) or np.any(rows >= n) or np.any(cols < 0) or np.any(cols >= n):
        raise ModelError(f"transition indices outside 0..{n - 1}")
    rects = (
        [Rect(tuple(c["lower"]), tuple(c["upper"])) for c in cells]
        if cells is not None
        else None
    )
    return IMC.from_triplets(
        n, rows.astype(np.int64), cols.astype(np.int64), lo, hi, props, rects
    )


def write_imc(path: str | Path, imc: IMC) -> Path:
    return atomic_write(path, imc_to_json(imc))


def read_imc(path: str | Path) -> IMC:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"IMC file not found: {path}")
    imc = imc_from_json(path.read_text(encoding="utf-8"))
    logger.info("Loaded IMC %s with %d states", path.name, imc.n_states)
    return imc


# ── Results ─────────────────────────────────────────────────────────────────


def results_csv(cells: Sequence[Rect] | None, p_min, p_max, classes) -> str:
    dim = cells[0].dim if cells else 0
    header = ["cell_id"]
    for i in range(dim):
        header += [f"lo_{i}", f"hi_{i}"]
    header += ["p_min", "p_max", "class"]
    rows = []
    for j, (lo, hi, cls) in enumerate(zip(p_min, p_max, classes)):
        row = [j]
        if cells:
            for a, b in zip(cells[j].lower, cells[j].upper):
                row += [format_float(a), format_float(b)]
        row += [format_float(lo), format_float(hi), StateClass(cls).value]
        rows.append(row)
    return _csv_text(header, rows)


def write_results(path: str | Path, cells, result) -> Path:
    text = results_csv(cells, result.p_min, result.p_max, result.classes)
    return atomic_write(path, text)


def partition_svg(domain: Rect, cells: Sequence[Rect], classes, title: str = "") -> str:
    """Cells painted by class, projected onto the first two dimensions."""
    x0, x1 = domain.lower[0], domain.upper[0]
    if domain.dim > 1:
        y0, y1 = domain.lower[1], domain.upper[1]
    else:
        y0, y1 = 0.0, 1.0
    sx = SVG_SIZE / (x1 - x0)
    sy = SVG_SIZE / (y1 - y0)
    rects = []
    for j, (cell, cls) in enumerate(zip(cells, classes)):
        lo_y, hi_y = (cell.lower[1], cell.upper[1]) if cell.dim > 1 else (y0, y1)
        rects.append(
            {
                "id": j,
                "x": f"{(cell.lower[0] - x0) * sx:.3f}",
                "y": f"{(y1 - hi_y) * sy:.3f}",
                "width": f"{(cell.upper[0] - cell.lower[0]) * sx:.3f}",
                "height": f"{(hi_y - lo_y) * sy:.3f}",
                "color": CLASS_COLORS[StateClass(cls)],
                "label": StateClass(cls).label,
            }
        )
    return render_to_string(
        "verification/partition.svg",
        {
            "title": title,
            "size": f"{SVG_SIZE:g}",
            "rects": rects,
            "domain": str(domain),
        },
    )


def write_partition_svg(
    path: str | Path, partition: Partition, classes, title=""
) -> Path:
    text = partition_svg(partition.domain, partition.cells, classes, title)
    return atomic_write(path, text)


# ── Refinement ──────────────────────────────────────────────────────────────


def rounds_csv(history) -> str:
    rows = []
    for record in history:
        counts = record.counts
        rows.append(
            [
                record.index,
                record.n_cells,
                format_float(record.uncertain_volume),
                counts[StateClass.YES.value],
                counts[StateClass.NO.value],
                counts[StateClass.UNDECIDED.value],
            ]
        )
    return _csv_text(
        ["round", "cells", "uncertain_volume", "yes", "no", "undecided"], rows
    )


def summary_json(outcome, seed: int) -> str:
    doc = {
        "status": outcome.status.value,
        "rounds": len(outcome.history),
        "cells": outcome.final.n_cells,
        "uncertain_volume": outcome.final.uncertain_volume,
        "soundness_violations": outcome.soundness_violations,
        "seed": seed,
        "history": [
            {
                "round": r.index,
                "cells": r.n_cells,
                "uncertain_volume": r.uncertain_volume,
                "elapsed": r.elapsed,
            }
            for r in outcome.history
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


# ── Simulation ──────────────────────────────────────────────────────────────


def trajectories_csv(states: np.ndarray) -> str:
    n_traj, steps, dim = states.shape
    header = ["traj", "step"] + [f"x_{i}" for i in range(dim)]
    rows = (
        [t, k] + [format_float(v) for v in states[t, k].tolist()]
        for t in range(n_traj)
        for k in range(steps)
    )
    return _csv_text(header, rows)
