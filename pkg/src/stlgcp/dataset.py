"""Panel assembly: landslide counting, period aggregation, covariate standardization."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .graph import SlopeUnitGraph

__all__ = [
    "DatasetError",
    "OverlapRecord",
    "PanelDataset",
    "count_landslides",
    "aggregate_periods",
    "standardize",
    "load_covariates",
    "load_overlaps",
    "load_slice_map",
    "load_counts",
    "assemble_panel",
]

COUNT_THRESHOLD = 0.02  # overlap fraction above which a landslide counts in a unit


class DatasetError(ValueError):
    """Raised on malformed or inconsistent panel inputs."""


@dataclass(frozen=True)
class OverlapRecord:
    landslide_id: str
    su_id: str
    overlap_fraction: float
    slice_id: str


@dataclass(frozen=True)
class PanelDataset:
    """Model-ready counts panel over a slope-unit graph.

    counts is (n, T) nonnegative integers; covariates is (n, p) with each
    column standardized (mean 0, variance 1 under `sd_convention`);
    offsets[i] = ln(area_m2[i]). Immutable after construction.
    """

    graph: SlopeUnitGraph
    counts: np.ndarray
    covariates: np.ndarray
    covariate_names: tuple[str, ...]
    period_labels: tuple[str, ...]
    sd_convention: str = "sample"
    offsets: np.ndarray = field(init=False)

    def __post_init__(self):
        n = self.graph.n_units
        counts = np.asarray(self.counts)
        if counts.ndim != 2 or counts.shape[0] != n:
            raise DatasetError(f"counts must be (n, T) with n={n}, got {counts.shape}")
        if np.any(counts < 0) or not np.issubdtype(counts.dtype, np.integer):
            if not np.all(counts == np.floor(counts)) or np.any(counts < 0):
                raise DatasetError("counts must be nonnegative integers")
            counts = counts.astype(np.int64)
        Z = np.asarray(self.covariates, dtype=float)
        if Z.ndim != 2 or Z.shape[0] != n:
            raise DatasetError(f"covariates must be (n, p) with n={n}, got {Z.shape}")
        p = Z.shape[1]
        if len(self.covariate_names) != p:
            raise DatasetError("covariate_names length mismatch")
        if len(self.period_labels) != counts.shape[1]:
            raise DatasetError("period_labels length mismatch")
        ddof = 1 if self.sd_convention == "sample" else 0
        for k in range(p):
            col = Z[:, k]
            if abs(col.mean()) > 1e-9 or abs(col.var(ddof=ddof) - 1.0) > 1e-9:
                raise DatasetError(
                    f"covariate {self.covariate_names[k]!r} is not standardized "
                    f"(mean {col.mean():.3g}, var {col.var(ddof=ddof):.6g})"
                )
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "covariates", Z)
        object.__setattr__(self, "covariate_names", tuple(self.covariate_names))
        object.__setattr__(self, "period_labels", tuple(self.period_labels))
        object.__setattr__(self, "offsets", np.log(self.graph.areas))

    @property
    def n_units(self) -> int:
        return self.graph.n_units

    @property
    def n_periods(self) -> int:
        return self.counts.shape[1]

    @property
    def n_covariates(self) -> int:
        return self.covariates.shape[1]


def count_landslides(overlaps, valid_units, valid_slices, threshold: float = COUNT_THRESHOLD):
    """Per-(unit, slice) landslide counts under the overlap-fraction rule.

    A (landslide, unit) pair counts iff overlap_fraction is strictly
    greater than `threshold`; a landslide spanning k qualifying units
    contributes k counts. Returns a dict {(su_id, slice_id): count}.
    """
    unit_set = set(valid_units)
    slice_set = set(valid_slices)
    counts: dict[tuple[str, str], int] = {}
    for row_no, rec in enumerate(overlaps, start=1):
        if not isinstance(rec, OverlapRecord):
            rec = OverlapRecord(*rec)
        if rec.su_id not in unit_set:
            raise DatasetError(f"overlap row {row_no}: unknown su_id {rec.su_id!r}")
        if rec.slice_id not in slice_set:
            raise DatasetError(f"overlap row {row_no}: unknown slice_id {rec.slice_id!r}")
        if not 0.0 <= rec.overlap_fraction <= 1.0:
            raise DatasetError(f"overlap row {row_no}: overlap_fraction {rec.overlap_fraction} outside [0, 1]")
        if rec.overlap_fraction > threshold:
            key = (rec.su_id, rec.slice_id)
            counts[key] = counts.get(key, 0) + 1
    return counts


def aggregate_periods(slice_counts, slice_to_period, unit_ids, n_periods: int) -> np.ndarray:
    """Sum per-slice counts into an (n, T) per-period matrix.

    Every slice appearing in slice_counts must map to exactly one of the
    T period indices; total counts are conserved.
    """
    index = {u: i for i, u in enumerate(unit_ids)}
    out = np.zeros((len(unit_ids), n_periods), dtype=np.int64)
    for (su_id, slice_id), c in slice_counts.items():
        if slice_id not in slice_to_period:
            raise DatasetError(f"slice {slice_id!r} has no period mapping")
        j = slice_to_period[slice_id]
        if not 0 <= j < n_periods:
            raise DatasetError(f"slice {slice_id!r} maps to period {j} outside 0..{n_periods - 1}")
        out[index[su_id], j] += c
    return out


def standardize(raw: np.ndarray, names=None, sd_convention: str = "sample"):
    """Column-wise (x - mean) / sd; returns (standardized, means, sds).

    sd_convention 'sample' uses divisor n-1, 'population' uses n. The
    stored means/sds invert the transform. Constant columns and missing
    values are rejected.
    """
    X = np.asarray(raw, dtype=float)
    if X.ndim != 2:
        raise DatasetError("covariate matrix must be 2-d")
    if names is None:
        names = [f"x{k}" for k in range(X.shape[1])]
    bad = np.argwhere(~np.isfinite(X))
    if bad.size:
        i, k = bad[0]
        raise DatasetError(f"missing value in covariate {names[k]!r} at row {i}")
    ddof = {"sample": 1, "population": 0}[sd_convention]
    means = X.mean(axis=0)
    sds = X.std(axis=0, ddof=ddof)
    for k, sd in enumerate(sds):
        if sd == 0.0:
            raise DatasetError(f"constant covariate {names[k]!r}")
    return (X - means) / sds, means, sds


# ---------------------------------------------------------------------------
# CSV readers (UTF-8, comma separated)
# ---------------------------------------------------------------------------

def _read_rows(path, required):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        got = reader.fieldnames or []
        for col in required:
            if col not in got:
                raise DatasetError(f"{path}: missing column {col!r} (header {got})")
        yield from enumerate(reader, start=2)


def load_covariates(path, unit_ids):
    """Covariates CSV: header `id,<name1>,...,<namep>`, one row per unit."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "id" or len(header) < 2:
            raise DatasetError(f"{path}: expected header 'id,<name1>,...'")
        names = header[1:]
        by_id = {}
        for row_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DatasetError(f"{path} row {row_no}: expected {len(header)} fields")
            try:
                by_id[row[0]] = [float(v) for v in row[1:]]
            except ValueError:
                raise DatasetError(f"{path} row {row_no}: non-numeric covariate value") from None
    missing = [u for u in unit_ids if u not in by_id]
    if missing:
        raise DatasetError(f"{path}: no covariate row for unit {missing[0]!r}")
    return np.array([by_id[u] for u in unit_ids], dtype=float), names


def load_overlaps(path):
    """Overlaps CSV: header `landslide_id,su_id,overlap_fraction,slice_id`."""
    out = []
    for row_no, row in _read_rows(path, ("landslide_id", "su_id", "overlap_fraction", "slice_id")):
        try:
            frac = float(row["overlap_fraction"])
        except ValueError:
            raise DatasetError(f"{path} row {row_no}: bad overlap_fraction") from None
        out.append(OverlapRecord(row["landslide_id"], row["su_id"], frac, row["slice_id"]))
    return out


def load_slice_map(path):
    """Slice map CSV: header `slice_id,period_index,period_label`.

    Returns (slice_to_period, period_labels) with labels ordered by index.
    """
    mapping: dict[str, int] = {}
    labels: dict[int, str] = {}
    for row_no, row in _read_rows(path, ("slice_id", "period_index", "period_label")):
        try:
            j = int(row["period_index"])
        except ValueError:
            raise DatasetError(f"{path} row {row_no}: bad period_index") from None
        if row["slice_id"] in mapping:
            raise DatasetError(f"{path} row {row_no}: duplicate slice {row['slice_id']!r}")
        mapping[row["slice_id"]] = j
        if j in labels and labels[j] != row["period_label"]:
            raise DatasetError(f"{path} row {row_no}: conflicting label for period {j}")
        labels[j] = row["period_label"]
    if not mapping:
        raise DatasetError(f"{path}: empty slice map")
    n_periods = max(labels) + 1
    if sorted(labels) != list(range(n_periods)):
        raise DatasetError(f"{path}: period indices must cover 0..{n_periods - 1}")
    return mapping, tuple(labels[j] for j in range(n_periods))


def load_counts(path, unit_ids):
    """Counts CSV: header `id,<label_1>,...,<label_T>`, one row per unit."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "id" or len(header) < 2:
            raise DatasetError(f"{path}: expected header 'id,<period labels...>'")
        labels = tuple(header[1:])
        by_id = {}
        for row_no, row in enumerate(reader, start=2):
            try:
                by_id[row[0]] = [int(v) for v in row[1:]]
            except ValueError:
                raise DatasetError(f"{path} row {row_no}: non-integer count") from None
    missing = [u for u in unit_ids if u not in by_id]
    if missing:
        raise DatasetError(f"{path}: no counts row for unit {missing[0]!r}")
    return np.array([by_id[u] for u in unit_ids], dtype=np.int64), labels


def assemble_panel(graph: SlopeUnitGraph, covariates_path, counts_path=None,
                   overlaps_path=None, slices_path=None,
                   sd_convention: str = "sample") -> PanelDataset:
    """Build a PanelDataset from CSV inputs.

    Either a pre-aggregated counts CSV, or an overlaps CSV plus slice map
    (2%-rule counting followed by period aggregation).
    """
    raw, names = load_covariates(covariates_path, graph.unit_ids)
    Z, _, _ = standardize(raw, names, sd_convention=sd_convention)
    if counts_path is not None:
        counts, labels = load_counts(counts_path, graph.unit_ids)
    elif overlaps_path is not None and slices_path is not None:
        mapping, labels = load_slice_map(slices_path)
        overlaps = load_overlaps(overlaps_path)
        slice_counts = count_landslides(overlaps, graph.unit_ids, mapping.keys())
        counts = aggregate_periods(slice_counts, mapping, graph.unit_ids, len(labels))
    else:
        raise DatasetError("need either counts_path or overlaps_path + slices_path")
    return PanelDataset(graph, counts, Z, tuple(names), labels, sd_convention=sd_convention)
