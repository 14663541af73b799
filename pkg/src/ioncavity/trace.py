"""Scan traces: the common currency between simulation, fitting and I/O."""

from dataclasses import dataclass, field
import csv
import io

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class ScanTrace:
    """Ordered samples of a scan.

    ``x`` is a detuning (rad/s) or a delay (s); ``y`` is either detected
    counts (``kind="counts"``) or a normalized quantity
    (``kind="normalized"``: reflectivity, cooperativity). ``yerr`` is the
    one-sigma uncertainty of each sample when known.
    """

    x: np.ndarray
    y: np.ndarray
    kind: str = "normalized"
    seed: int | None = None
    provenance: str = ""
    yerr: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape:
            raise DataError("x and y must be 1-D arrays of equal length")
        if x.size > 1:
            d = np.diff(x)
            if not (np.all(d > 0) or np.all(d < 0)):
                raise DataError("x must be strictly monotone")
        if self.kind not in ("counts", "normalized"):
            raise DataError(f"unknown trace kind {self.kind!r}")
        if self.kind == "counts" and np.any(y < 0):
            raise DataError("counts must be nonnegative")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if self.yerr is not None:
            e = np.asarray(self.yerr, dtype=float)
            if e.shape != y.shape:
                raise DataError("yerr must match y")
            object.__setattr__(self, "yerr", e)

    def __len__(self):
        return self.x.size

    def weights(self):
        """Least-squares weights: 1/yerr**2, else Poisson for counts, else 1."""
        if self.yerr is not None:
            return 1.0 / np.maximum(self.yerr, 1e-300) ** 2
        if self.kind == "counts":
            return 1.0 / np.maximum(self.y, 1.0)
        return np.ones_like(self.y)

    def to_csv(self, x_name="x", y_name="y", x_scale=1.0, y_scale=1.0):
        """Render as CSV text with a header row (``x_scale`` divides x)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = [x_name, y_name] + ([f"{y_name}_err"] if self.yerr is not None else [])
        w.writerow(cols)
        for i in range(len(self)):
            row = [_fmt(self.x[i] / x_scale), _fmt(self.y[i] / y_scale)]
            if self.yerr is not None:
                row.append(_fmt(self.yerr[i] / y_scale))
            w.writerow(row)
        return buf.getvalue()


def _fmt(v):
    return f"{v:.10g}"


def read_csv_columns(text, required, source="<csv>"):
    """Parse CSV text with a header row into ``{column: ndarray}``.

    Raises :class:`DataError` naming the offending line and column.
    """
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise DataError(f"{source}: empty file")
    header = [h.strip() for h in rows[0]]
    missing = [c for c in required if c not in header]
    if missing:
        raise DataError(f"{source}:1: missing column(s) {', '.join(missing)}; found {header}")
    out = {h: [] for h in header}
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataError(f"{source}:{lineno}: expected {len(header)} fields, got {len(row)}")
        for col, (h, cell) in enumerate(zip(header, row), start=1):
            try:
                out[h].append(float(cell))
            except ValueError:
                raise DataError(
                    f"{source}:{lineno}:{col}: column {h!r} is not a number: {cell!r}"
                ) from None
    return {h: np.asarray(v) for h, v in out.items()}
