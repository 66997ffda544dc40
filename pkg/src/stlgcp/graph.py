"""Areal-unit adjacency graph and the intrinsic (Besag) precision matrix."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

__all__ = [
    "SlopeUnitGraph",
    "GraphError",
    "load_graph",
    "build_graph",
    "lattice_graph",
    "besag_precision",
    "connected_components",
]


class GraphError(ValueError):
    """Raised when unit/edge inputs violate the graph contract."""


@dataclass(frozen=True)
class SlopeUnitGraph:
    """Undirected areal-unit graph with per-unit surface areas.

    Edges are stored as a set of index pairs (a, b) with a < b; the
    adjacency is therefore symmetric and free of self-loops by
    construction. Immutable after construction, safe to share across
    threads.
    """

    unit_ids: tuple[str, ...]
    areas: np.ndarray          # (n,) m^2, > 0
    edges: frozenset[tuple[int, int]]
    degrees: np.ndarray = field(init=False)
    components: np.ndarray = field(init=False)

    def __post_init__(self):
        n = len(self.unit_ids)
        areas = np.asarray(self.areas, dtype=float)
        if areas.shape != (n,):
            raise GraphError(f"areas has shape {areas.shape}, expected ({n},)")
        if np.any(areas <= 0) or not np.all(np.isfinite(areas)):
            bad = self.unit_ids[int(np.argmin(areas))]
            raise GraphError(f"nonpositive area for unit {bad!r}")
        if len(set(self.unit_ids)) != n:
            raise GraphError("duplicate unit ids")
        deg = np.zeros(n, dtype=np.int64)
        for a, b in self.edges:
            if not (0 <= a < b < n):
                raise GraphError(f"edge ({a}, {b}) out of range or self-loop")
            deg[a] += 1
            deg[b] += 1
        object.__setattr__(self, "areas", areas)
        object.__setattr__(self, "degrees", deg)
        object.__setattr__(self, "components", _label_components(n, self.edges))

    @property
    def n_units(self) -> int:
        return len(self.unit_ids)

    @property
    def n_components(self) -> int:
        return int(self.components.max()) + 1 if self.n_units else 0

    def index_of(self, unit_id: str) -> int:
        return self._id_index()[unit_id]

    def _id_index(self) -> dict[str, int]:
        # tiny cache; frozen dataclass so stash on the instance dict via object.__setattr__
        idx = self.__dict__.get("_idx")
        if idx is None:
            idx = {u: i for i, u in enumerate(self.unit_ids)}
            object.__setattr__(self, "_idx", idx)
        return idx

    def adjacency(self) -> sp.csr_matrix:
        """0/1 symmetric adjacency matrix."""
        n = self.n_units
        if not self.edges:
            return sp.csr_matrix((n, n))
        rows, cols = [], []
        for a, b in self.edges:
            rows += [a, b]
            cols += [b, a]
        data = np.ones(len(rows))
        return sp.csr_matrix((data, (rows, cols)), shape=(n, n))

    def neighbors(self, i: int) -> list[int]:
        out = []
        for a, b in self.edges:
            if a == i:
                out.append(b)
            elif b == i:
                out.append(a)
        return sorted(out)


def _label_components(n: int, edges) -> np.ndarray:
    """Union-find connected components, labelled 0..k-1 in first-seen order."""
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    labels = np.empty(n, dtype=np.int64)
    seen: dict[int, int] = {}
    for i in range(n):
        r = find(i)
        if r not in seen:
            seen[r] = len(seen)
        labels[i] = seen[r]
    return labels


def build_graph(unit_ids, areas, edge_pairs) -> SlopeUnitGraph:
    """Construct a validated graph from id/area sequences and id-pair edges.

    Duplicate edges are deduplicated and orientation is normalized;
    self-loops and unknown ids are rejected.
    """
    unit_ids = tuple(str(u) for u in unit_ids)
    index = {u: i for i, u in enumerate(unit_ids)}
    edges = set()
    for row_no, (ida, idb) in enumerate(edge_pairs, start=1):
        ida, idb = str(ida), str(idb)
        if ida not in index:
            raise GraphError(f"edge row {row_no}: unknown id {ida!r}")
        if idb not in index:
            raise GraphError(f"edge row {row_no}: unknown id {idb!r}")
        a, b = index[ida], index[idb]
        if a == b:
            raise GraphError(f"edge row {row_no}: self-loop on {ida!r}")
        edges.add((min(a, b), max(a, b)))
    return SlopeUnitGraph(unit_ids, np.asarray(areas, dtype=float), frozenset(edges))


def load_graph(units_file, edges_file) -> SlopeUnitGraph:
    """Load a graph from a units CSV (id,area_m2) and an edges CSV (id_a,id_b)."""
    unit_ids, areas = [], []
    with open(units_file, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "id" not in reader.fieldnames or "area_m2" not in reader.fieldnames:
            raise GraphError(f"{units_file}: expected header 'id,area_m2'")
        for row_no, row in enumerate(reader, start=2):
            unit_ids.append(row["id"])
            try:
                area = float(row["area_m2"])
            except (TypeError, ValueError):
                raise GraphError(f"{units_file} row {row_no}: bad area {row['area_m2']!r}") from None
            if not area > 0:
                raise GraphError(f"{units_file} row {row_no}: nonpositive area for unit {row['id']!r}")
            areas.append(area)
    pairs = []
    with open(edges_file, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "id_a" not in reader.fieldnames or "id_b" not in reader.fieldnames:
            raise GraphError(f"{edges_file}: expected header 'id_a,id_b'")
        for row in reader:
            pairs.append((row["id_a"], row["id_b"]))
    return build_graph(unit_ids, areas, pairs)


def lattice_graph(width: int, height: int, area: float = 1.0) -> SlopeUnitGraph:
    """Rook-adjacency rectangular lattice, handy for tests and simulations."""
    if width < 1 or height < 1:
        raise GraphError("lattice dimensions must be >= 1")
    ids = [f"u{r * width + c:04d}" for r in range(height) for c in range(width)]
    pairs = []
    for r in range(height):
        for c in range(width):
            i = ids[r * width + c]
            if c + 1 < width:
                pairs.append((i, ids[r * width + c + 1]))
            if r + 1 < height:
                pairs.append((i, ids[(r + 1) * width + c]))
    return build_graph(ids, np.full(width * height, float(area)), pairs)


def besag_precision(g: SlopeUnitGraph, tau: float) -> sp.csr_matrix:
    """Intrinsic CAR precision: tau * (diag(degrees) - adjacency).

    Every row sums to zero; the rank deficiency equals the number of
    connected components. Isolated units yield an all-zero row, which
    model assembly must treat explicitly.
    """
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    n = g.n_units
    Q = sp.diags(g.degrees.astype(float), format="csr") - g.adjacency()
    return (tau * Q).tocsr() if n else sp.csr_matrix((0, 0))


def connected_components(g: SlopeUnitGraph) -> np.ndarray:
    """Component label per unit; two units share a label iff connected."""
    return g.components.copy()
