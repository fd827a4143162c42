"""
Files of a run directory.

Every write goes to a temporary file in the target directory which is then
renamed over the target, so readers never see a partial file.
"""
import csv
import io
import logging
import os
import tempfile
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import ArgumentError
from .lattice import Field
from .models import BoundReport, DropletSnapshot, LatticeWindow

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

ENERGY_FLUX_HEADER = ("t", "R", "E", "D_cum", "F_cum", "residual")
BOUNDS_HEADER = ("kind", "N", "R", "T", "beta", "e0", "eps", "bound", "observed", "satisfied")
DROPLETS_HEADER = ("t", "count", "mean_size", "max_size", "phase_fraction")
FLIPS_HEADER = ("site", "flip_count")
RECURRENCE_HEADER = ("r", "g_s", "bound_ricatti1_or_all", "bound_ricatti2", "satisfied")
SNAPSHOT_INDEX_HEADER = ("sample", "t")

SNAPSHOT_DIR = "snapshots"
CONFIG_ECHO = "config.echo"


def atomic_write(path: PathLike, text: str) -> Path:
    """
    Replace ``path`` with ``text`` in one rename.

    Args:
        path (str | Path): Target file; missing parent directories are created.
        text (str): Full file contents.

    Returns:
        Path: The written path.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, temp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(temp, path)
    except BaseException:
        if os.path.exists(temp):
            os.unlink(temp)
        raise
    logger.debug("wrote %s", path)
    return path


def format_value(value) -> str:
    """CSV cell text: full-precision floats, lowercase booleans, empty for None."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(cell) for cell in row])
    return buffer.getvalue()


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    return atomic_write(path, csv_text(header, rows))


def read_csv(path: PathLike) -> List[dict]:
    with Path(path).open(encoding="utf-8", newline="") as handle:
        return list(csv.DictReader(handle))


def write_energy_flux(path: PathLike, rows: Iterable[Tuple]) -> Path:
    return write_csv(path, ENERGY_FLUX_HEADER, rows)


def write_bounds(path: PathLike, reports: Iterable[BoundReport]) -> Path:
    rows = (
        (r.kind, r.N, r.R, r.T, r.beta, r.e0, r.eps, r.bound, r.observed, r.satisfied)
        for r in reports
    )
    return write_csv(path, BOUNDS_HEADER, rows)


def write_droplets(path: PathLike, snapshots: Iterable[DropletSnapshot]) -> Path:
    rows = ((s.t, s.count, s.mean_size, s.max_size, s.phase_fraction) for s in snapshots)
    return write_csv(path, DROPLETS_HEADER, rows)


def write_flips(path: PathLike, window: LatticeWindow, flips: np.ndarray) -> Path:
    """One row per site in lexicographic order; the site column holds space separated coordinates."""
    rows = (
        (" ".join(str(a) for a in window.site(index)), int(flips[index]))
        for index in np.ndindex(window.shape)
    )
    return write_csv(path, FLIPS_HEADER, rows)


def write_recurrence(path: PathLike, rows: Iterable[Tuple]) -> Path:
    return write_csv(path, RECURRENCE_HEADER, rows)


def snapshot_text(field: Field) -> str:
    """
    The snapshot format: a header ``N M W boundary``, then one line per site
    ``alpha_1 .. alpha_N value_1 .. value_M`` in lexicographic order.
    """
    window = field.window
    if np.iscomplexobj(field.values):
        raise ArgumentError("complex fields cannot be written as snapshots")
    lines = [f"{window.dim} {field.width} {window.radius} {window.boundary}"]
    flat = field.values.reshape(-1, field.width)
    coordinates = window.coordinates().reshape(-1, window.dim)
    for site, values in zip(coordinates, flat):
        lines.append(" ".join([*(str(int(a)) for a in site), *(repr(float(x)) for x in values)]))
    return "\n".join(lines) + "\n"


def write_snapshot(path: PathLike, field: Field) -> Path:
    return atomic_write(path, snapshot_text(field))


def parse_snapshot(text: str) -> Field:
    """
    Inverse of :func:`snapshot_text`.

    Raises:
        ArgumentError: On a malformed header, a wrong row count or rows out of order.
    """
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise ArgumentError("empty snapshot")
    header = lines[0].split()
    try:
        dim, width, radius = int(header[0]), int(header[1]), int(header[2])
        boundary = header[3]
    except (IndexError, ValueError):
        raise ArgumentError(f"malformed snapshot header {lines[0]!r}")
    window = LatticeWindow(dim=dim, radius=radius, boundary=boundary)
    rows = lines[1:]
    if len(rows) != window.volume:
        raise ArgumentError(f"snapshot has {len(rows)} rows, expected {window.volume}")
    table = np.array([row.split() for row in rows], dtype=float)
    if table.shape[1] != dim + width:
        raise ArgumentError(f"snapshot rows need {dim + width} columns, got {table.shape[1]}")
    expected = window.coordinates().reshape(-1, dim)
    if not np.array_equal(table[:, :dim], expected):
        raise ArgumentError("snapshot sites are not in lexicographic window order")
    return Field(window, table[:, dim:].reshape(window.shape + (width,)))


def read_snapshot(path: PathLike) -> Field:
    return parse_snapshot(Path(path).read_text(encoding="utf-8"))


class SnapshotStore:
    """
    Numbered position (and velocity) snapshots under ``<run>/snapshots``.

    ``index.csv`` lists the sample number and time of every stored pair;
    ``anchor_u.txt``/``anchor_v.txt`` hold the frozen-window anchors.
    """

    def __init__(self, root: PathLike):
        self.directory = Path(root) / SNAPSHOT_DIR
        self._index: List[Tuple[int, float]] = []

    def _path(self, kind: str, sample: int) -> Path:
        return self.directory / f"{kind}_{sample:06d}.txt"

    def add(self, sample: int, t: float, state: Field, velocity: Optional[Field] = None) -> None:
        if self._index and self._index[-1][0] == sample:
            return
        if not self._index:
            self._write_anchors(state, velocity)
        write_snapshot(self._path("u", sample), state)
        if velocity is not None:
            write_snapshot(self._path("v", sample), velocity)
        self._index.append((sample, t))

    def flush(self) -> None:
        """Write the index; snapshots are only visible to :meth:`load` after a flush."""
        write_csv(self.directory / "index.csv", SNAPSHOT_INDEX_HEADER, self._index)

    def _write_anchors(self, state: Field, velocity: Optional[Field]) -> None:
        for name, field in (("anchor_u", state), ("anchor_v", velocity)):
            if field is not None and field.anchor is not None:
                write_snapshot(self.directory / f"{name}.txt", field.with_values(field.anchor))

    def load(self) -> Tuple[List[float], List[Field], List[Optional[Field]]]:
        """
        Times, positions and velocities of every stored sample, anchors re-attached.

        Raises:
            ArgumentError: If the directory has no snapshot index.
        """
        index_path = self.directory / "index.csv"
        if not index_path.exists():
            raise ArgumentError(f"no snapshots found in {self.directory}")
        anchors = {
            name: read_snapshot(self.directory / f"{name}.txt").values
            for name in ("anchor_u", "anchor_v")
            if (self.directory / f"{name}.txt").exists()
        }
        times, states, velocities = [], [], []
        for row in read_csv(index_path):
            sample = int(row["sample"])
            times.append(float(row["t"]))
            u = read_snapshot(self._path("u", sample))
            states.append(u.anchored(anchors["anchor_u"]) if "anchor_u" in anchors else u)
            v_path = self._path("v", sample)
            if v_path.exists():
                v = read_snapshot(v_path)
                velocities.append(v.anchored(anchors["anchor_v"]) if "anchor_v" in anchors else v)
            else:
                velocities.append(None)
        return times, states, velocities
