"""Observational tables, variable metadata and synthetic SCM data."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Literal, Mapping, Sequence

import numpy as np

from .errors import (
    EmptyColumn,
    EmptyTable,
    HeaderMismatch,
    InvalidSpec,
    ParseError,
    SchemaError,
)
from .graph import Dag, topological_order

Kind = Literal["continuous", "discrete"]
KINDS = ("continuous", "discrete")
MISSING_TOKENS = frozenset({"", "NA", "N/A", "NaN", "nan", "null", "NULL"})


@dataclass(frozen=True)
class VariableMeta:
    id: str
    name: str = ""
    description: str = ""
    unit: str = ""
    declared_kind: Kind | None = None

    def __post_init__(self):
        if not self.id:
            raise SchemaError("variable id must be nonempty")
        if self.declared_kind is not None and self.declared_kind not in KINDS:
            raise SchemaError(f"bad kind {self.declared_kind!r} for {self.id!r}")

    def to_json(self) -> dict:
        out = {"id": self.id, "name": self.name, "description": self.description, "unit": self.unit}
        if self.declared_kind is not None:
            out["kind"] = self.declared_kind
        return out

    @classmethod
    def from_json(cls, obj: Mapping) -> VariableMeta:
        if not isinstance(obj, Mapping) or not isinstance(obj.get("id"), str):
            raise SchemaError(f"metadata entry needs a string 'id': {obj!r}")
        return cls(
            id=obj["id"],
            name=str(obj.get("name", "") or ""),
            description=str(obj.get("description", "") or ""),
            unit=str(obj.get("unit", "") or ""),
            declared_kind=obj.get("kind"),
        )


def read_metadata(path: str | Path) -> list[VariableMeta]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from exc
    if isinstance(doc, Mapping) and "variables" in doc:
        doc = doc["variables"]
    if not isinstance(doc, list):
        raise SchemaError(f"{path}: expected a list of variable objects")
    metas = [VariableMeta.from_json(o) for o in doc]
    ids = [m.id for m in metas]
    if len(set(ids)) != len(ids):
        raise SchemaError(f"{path}: duplicate variable ids")
    return metas


def write_metadata(metadata: Sequence[VariableMeta], path: str | Path) -> None:
    Path(path).write_text(json.dumps([m.to_json() for m in metadata], indent=2) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class Dataset:
    columns: dict[str, np.ndarray]
    kinds: dict[str, Kind]
    metadata: tuple[VariableMeta, ...]
    dropped_rows: int = 0

    def __post_init__(self):
        ids = [m.id for m in self.metadata]
        if set(ids) != set(self.columns) or set(ids) != set(self.kinds) or len(set(ids)) != len(ids):
            raise SchemaError("columns, kinds and metadata must cover the same ids")
        lengths = {len(c) for c in self.columns.values()}
        if len(lengths) > 1:
            raise SchemaError(f"columns have differing lengths {sorted(lengths)}")

    @property
    def ids(self) -> list[str]:
        return [m.id for m in self.metadata]

    @property
    def sample_count(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0

    def __getitem__(self, var: str) -> np.ndarray:
        return self.columns[var]

    def codes(self, var: str) -> tuple[np.ndarray, int]:
        """Integer level codes and level count for a discrete column."""
        _, inverse = np.unique(self.columns[var], return_inverse=True)
        inverse = inverse.ravel()
        return inverse, int(inverse.max()) + 1 if len(inverse) else 0

    def renamed(self, mapping: Mapping[str, str], metadata: Sequence[VariableMeta]) -> Dataset:
        """Same data under new ids; ``metadata`` must already carry the new ids."""
        return Dataset(
            columns={mapping[k]: v for k, v in self.columns.items()},
            kinds={mapping[k]: v for k, v in self.kinds.items()},
            metadata=tuple(metadata),
            dropped_rows=self.dropped_rows,
        )


def _as_float(cell: str) -> float | None:
    try:
        value = float(cell)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def infer_kind(column: Sequence) -> Kind:
    """Strings are discrete; numbers are discrete when few distinct integer values."""
    values = np.asarray(column)
    if values.size == 0:
        raise EmptyColumn("cannot infer the kind of an empty column")
    if values.dtype.kind not in "biuf":
        floats = [_as_float(str(v)) for v in values.ravel()]
        if any(f is None for f in floats):
            return "discrete"
        values = np.asarray(floats, dtype=float)
    if values.dtype.kind == "b":
        return "discrete"
    n = values.size
    distinct = np.unique(values).size
    integer_valued = bool(np.all(np.mod(values, 1) == 0))
    if integer_valued and distinct <= max(10, 0.05 * n):
        return "discrete"
    return "continuous"


def _typed_column(cells: list[str], kind: Kind, var: str) -> np.ndarray:
    floats = [_as_float(c) for c in cells]
    numeric = all(f is not None for f in floats)
    if kind == "continuous":
        if not numeric:
            bad = next(c for c, f in zip(cells, floats) if f is None)
            raise ParseError(f"non-numeric cell {bad!r} in continuous column {var!r}")
        return np.asarray(floats, dtype=float)
    if numeric:
        arr = np.asarray(floats, dtype=float)
        if np.all(np.mod(arr, 1) == 0):
            return arr.astype(np.int64)
        return arr
    return np.asarray(cells, dtype=str)


def load_table(path: str | Path, metadata: Sequence[VariableMeta]) -> Dataset:
    """Read an RFC-4180 CSV with a header row.

    Rows containing any missing cell are dropped; the count is kept in
    ``Dataset.dropped_rows``.
    """
    metadata = tuple(metadata)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise EmptyTable(f"{path}: no header row")
    header = [h.strip() for h in rows[0]]
    meta_ids = [m.id for m in metadata]
    if len(set(header)) != len(header) or set(header) != set(meta_ids):
        raise HeaderMismatch(f"header {sorted(header)} != metadata ids {sorted(meta_ids)}")

    complete: list[list[str]] = []
    dropped = 0
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
        cells = [c.strip() for c in row]
        if any(c in MISSING_TOKENS for c in cells):
            dropped += 1
            continue
        complete.append(cells)
    if not complete:
        raise EmptyTable(f"{path}: no complete rows")

    raw = {h: [r[j] for r in complete] for j, h in enumerate(header)}
    columns: dict[str, np.ndarray] = {}
    kinds: dict[str, Kind] = {}
    for meta in metadata:
        kind = meta.declared_kind or infer_kind(_infer_view(raw[meta.id]))
        columns[meta.id] = _typed_column(raw[meta.id], kind, meta.id)
        kinds[meta.id] = kind
    return Dataset(columns=columns, kinds=kinds, metadata=metadata, dropped_rows=dropped)


def _infer_view(cells: list[str]) -> np.ndarray:
    floats = [_as_float(c) for c in cells]
    if all(f is not None for f in floats):
        return np.asarray(floats, dtype=float)
    return np.asarray(cells, dtype=str)


def _format_cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_table(ds: Dataset, path: str | Path) -> None:
    """CSV emitter; ``load_table`` on the output reproduces ``ds`` given its metadata."""
    ids = ds.ids
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ids)
        for i in range(ds.sample_count):
            writer.writerow([_format_cell(ds.columns[v][i]) for v in ids])


def dataset_from_arrays(
    columns: Mapping[str, Sequence],
    kinds: Mapping[str, Kind] | None = None,
    metadata: Sequence[VariableMeta] | None = None,
) -> Dataset:
    """In-memory constructor; kinds default to :func:`infer_kind`."""
    cols = {k: np.asarray(v) for k, v in columns.items()}
    kinds = dict(kinds or {})
    if metadata is None:
        metadata = [VariableMeta(id=k, name=k, declared_kind=kinds.get(k)) for k in cols]
    for meta in metadata:
        kinds.setdefault(meta.id, meta.declared_kind or infer_kind(cols[meta.id]))
    return Dataset(columns=cols, kinds=kinds, metadata=tuple(metadata))


# --- synthetic structural causal models ----------------------------------


@dataclass(frozen=True)
class Cpt:
    """Conditional probability table for a discrete node.

    ``table`` has shape ``(*parent_levels, levels)``; parent axes follow the
    node's parent order in the DAG.
    """

    table: np.ndarray

    @property
    def levels(self) -> int:
        return self.table.shape[-1]


@dataclass(frozen=True)
class ScmSpec:
    dag: Dag
    coefficients: dict[tuple[str, str], float] = field(default_factory=dict)
    noise_scales: dict[str, float] = field(default_factory=dict)
    cpts: dict[str, Cpt] = field(default_factory=dict)
    seed: int = 0

    def validate(self) -> None:
        dag = self.dag
        for node in dag.nodes:
            if node in self.cpts:
                table = np.asarray(self.cpts[node].table, dtype=float)
                parents = dag.parents(node)
                if table.ndim != len(parents) + 1:
                    raise InvalidSpec(f"CPT for {node!r} needs {len(parents) + 1} axes")
                for axis, parent in enumerate(parents):
                    if parent not in self.cpts:
                        raise InvalidSpec(f"discrete node {node!r} has continuous parent {parent!r}")
                    if table.shape[axis] != self.cpts[parent].levels:
                        raise InvalidSpec(f"CPT axis for {parent!r} has wrong size")
                if np.any(table < 0) or not np.allclose(table.sum(axis=-1), 1.0, atol=1e-9, rtol=0):
                    raise InvalidSpec(f"CPT rows for {node!r} must be distributions")
            else:
                scale = self.noise_scales.get(node, 1.0)
                if not (math.isfinite(scale) and scale > 0):
                    raise InvalidSpec(f"noise scale for {node!r} must be positive")
        for edge in dag.edges:
            if edge[1] in self.cpts:
                continue
            coef = self.coefficients.get(edge)
            if coef is None or not math.isfinite(coef):
                raise InvalidSpec(f"edge {edge} needs a finite coefficient")
        for edge in self.coefficients:
            if not dag.has_edge(*edge):
                raise InvalidSpec(f"coefficient for non-edge {edge}")


def synthesize_scm(spec: ScmSpec, n_samples: int) -> tuple[Dataset, Dag]:
    """Sample ``n_samples`` rows in topological order.

    Continuous nodes are linear in their parents plus scaled Gaussian noise
    (discrete parents enter through their integer codes); discrete nodes
    are drawn from their CPT.
    """
    if n_samples < 1:
        raise InvalidSpec("n_samples must be >= 1")
    spec.validate()
    dag = spec.dag
    rng = np.random.default_rng(spec.seed)
    columns: dict[str, np.ndarray] = {}
    for node in topological_order(dag):
        parents = dag.parents(node)
        if node in spec.cpts:
            table = np.asarray(spec.cpts[node].table, dtype=float)
            probs = table[tuple(columns[p] for p in parents)] if parents else np.broadcast_to(table, (n_samples, table.shape[-1]))
            u = rng.random(n_samples)
            cdf = np.cumsum(probs, axis=-1)
            draws = (u[:, None] > cdf).sum(axis=1)
            columns[node] = np.minimum(draws, table.shape[-1] - 1).astype(np.int64)
        else:
            value = spec.noise_scales.get(node, 1.0) * rng.standard_normal(n_samples)
            for p in parents:
                value = value + spec.coefficients[(p, node)] * columns[p]
            columns[node] = value
    kinds: dict[str, Kind] = {n: ("discrete" if n in spec.cpts else "continuous") for n in dag.nodes}
    metadata = tuple(VariableMeta(id=n, name=n, declared_kind=kinds[n]) for n in dag.nodes)
    return Dataset(columns={n: columns[n] for n in dag.nodes}, kinds=kinds, metadata=metadata), dag


def random_dag(n_nodes: int, edge_prob: float, rng: np.random.Generator, prefix: str = "V") -> Dag:
    """Erdos-Renyi DAG under a random causal order; ids ``V1..Vn``."""
    names = [f"{prefix}{i + 1}" for i in range(n_nodes)]
    order = rng.permutation(n_nodes)
    edges = []
    for i in range(n_nodes):
        for j in range(i + 1, n_nodes):
            if rng.random() < edge_prob:
                edges.append((names[order[i]], names[order[j]]))
    return Dag(names, edges)


def random_linear_scm(
    dag: Dag,
    rng: np.random.Generator,
    coef_range: tuple[float, float] = (0.5, 1.5),
    seed: int = 0,
) -> ScmSpec:
    """Linear-Gaussian spec with coefficient magnitudes drawn from ``coef_range``, random signs."""
    lo, hi = coef_range
    coefs = {e: float(rng.choice([-1.0, 1.0]) * rng.uniform(lo, hi)) for e in dag.edges}
    return ScmSpec(dag=dag, coefficients=coefs, noise_scales={n: 1.0 for n in dag.nodes}, seed=seed)


# --- metadata neutralization ---------------------------------------------


def neutralize_metadata(
    metadata: Sequence[VariableMeta],
    mode: Literal["strip_descriptions", "full_neutralize"],
    rephrasings: Mapping[str, str] | None = None,
) -> tuple[list[VariableMeta], dict[str, str]]:
    """Remove semantic cues from metadata.

    Returns the new metadata and an old-id -> new-id mapping.
    ``strip_descriptions`` blanks names, descriptions and units but keeps
    ids. ``full_neutralize`` renames ids and names to X1..Xn by position and
    replaces descriptions with ``rephrasings[old_id]`` when given, else "".
    """
    if mode == "strip_descriptions":
        out = [replace(m, name="", description="", unit="") for m in metadata]
        return out, {m.id: m.id for m in metadata}
    if mode != "full_neutralize":
        raise ValueError(f"unknown neutralization mode {mode!r}")
    rephrasings = rephrasings or {}
    out, mapping = [], {}
    for i, meta in enumerate(metadata, start=1):
        new_id = f"X{i}"
        mapping[meta.id] = new_id
        out.append(
            VariableMeta(
                id=new_id,
                name=new_id,
                description=rephrasings.get(meta.id, ""),
                unit="",
                declared_kind=meta.declared_kind,
            )
        )
    return out, mapping
