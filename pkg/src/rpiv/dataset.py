"""Dataset container, CSV ingestion, controls augmentation, sample splitting.

A :class:`Dataset` holds the response, the endogenous regressors, the
instruments, and optionally exogenous controls and cluster labels.  Before
testing, :func:`augment` appends the controls and an intercept column to
both the regressor and instrument blocks; :func:`make_split` divides the
rows into an auxiliary sample (used to learn the weight function) and a
main sample (used to compute the test statistic).
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from .exceptions import DataError
from .streams import generator

# Philox stream id reserved for make_split.
_SPLIT_STREAM = 0x5B11


def _as_readonly(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    out.setflags(write=False)
    return out


def _check_finite(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise DataError(f"non-finite value in {what}")


def _as_matrix(arr, what: str) -> np.ndarray:
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    if a.ndim != 2:
        raise DataError(f"{what} must be a vector or a matrix")
    return a


@dataclass(frozen=True)
class ColumnRoles:
    """Maps CSV column names to model roles."""

    response: str
    endogenous: tuple[str, ...]
    instruments: tuple[str, ...]
    controls: tuple[str, ...] = ()
    cluster: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "endogenous", tuple(self.endogenous))
        object.__setattr__(self, "instruments", tuple(self.instruments))
        object.__setattr__(self, "controls", tuple(self.controls))
        names = [self.response, *self.endogenous, *self.instruments, *self.controls]
        if self.cluster is not None:
            names.append(self.cluster)
        seen = set()
        for name in names:
            if name in seen:
                raise DataError(f"duplicate role assignment for column '{name}'")
            seen.add(name)
        if not self.endogenous or not self.instruments:
            raise DataError("at least one endogenous and one instrument column required")


@dataclass(frozen=True)
class Dataset:
    """Immutable sample of (y, x, z) with optional controls and clusters.

    Attributes
    ----------
    y : (n,) response vector.
    x : (n, p) endogenous regressors.
    z : (n, d) instruments.
    controls : (n, q) exogenous controls, or None.
    cluster_ids : (n,) integer cluster labels, or None.
    column_names : optional :class:`ColumnRoles` label metadata.
    """

    y: np.ndarray
    x: np.ndarray
    z: np.ndarray
    controls: np.ndarray | None = None
    cluster_ids: np.ndarray | None = None
    column_names: ColumnRoles | None = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        x = _as_matrix(self.x, "x")
        z = _as_matrix(self.z, "z")
        n = y.shape[0]
        if n < 1:
            raise DataError("empty dataset")
        if x.shape[0] != n or z.shape[0] != n:
            raise DataError("y, x and z must have the same number of rows")
        _check_finite(y, "response")
        _check_finite(x, "endogenous regressors")
        _check_finite(z, "instruments")
        object.__setattr__(self, "y", _as_readonly(y))
        object.__setattr__(self, "x", _as_readonly(x))
        object.__setattr__(self, "z", _as_readonly(z))
        if self.controls is not None:
            controls = _as_matrix(self.controls, "controls")
            if controls.shape[0] != n:
                raise DataError("controls must have one row per observation")
            _check_finite(controls, "controls")
            object.__setattr__(self, "controls", _as_readonly(controls))
        if self.cluster_ids is not None:
            ids = np.asarray(self.cluster_ids)
            if ids.shape != (n,):
                raise DataError("every observation needs exactly one cluster label")
            if not np.issubdtype(ids.dtype, np.integer):
                raise DataError("cluster ids must be integers (load_csv maps tokens)")
            object.__setattr__(self, "cluster_ids", _as_readonly(ids.astype(np.int64)))

    @property
    def n(self) -> int:
        return self.y.shape[0]

    def take(self, indices: np.ndarray) -> "Dataset":
        """Row subset, preserving type and metadata."""
        idx = np.asarray(indices, dtype=np.int64)
        return replace(
            self,
            y=self.y[idx],
            x=self.x[idx],
            z=self.z[idx],
            controls=None if self.controls is None else self.controls[idx],
            cluster_ids=None if self.cluster_ids is None else self.cluster_ids[idx],
        )


@dataclass(frozen=True)
class AugmentedDataset(Dataset):
    """Dataset whose controls and an intercept were appended to x and z.

    ``n_base_x`` / ``n_base_z`` record how many leading columns of x / z are
    the original endogenous regressors / instruments.
    """

    n_base_x: int = 0
    n_base_z: int = 0


def augment(ds: Dataset) -> AugmentedDataset:
    """Append controls and an all-ones intercept column to both x and z.

    The intercept is always appended, even without controls.  Constant
    control columns are rejected because they would duplicate the intercept.
    """
    if isinstance(ds, AugmentedDataset):
        raise DataError("dataset is already augmented")
    blocks = [ds.x]
    zblocks = [ds.z]
    if ds.controls is not None:
        names = None
        if ds.column_names is not None and len(ds.column_names.controls) == ds.controls.shape[1]:
            names = ds.column_names.controls
        for j in range(ds.controls.shape[1]):
            col = ds.controls[:, j]
            if np.ptp(col) == 0.0:
                label = names[j] if names else f"#{j}"
                raise DataError(
                    f"control column {label} is constant (collinear with intercept)"
                )
        blocks.append(ds.controls)
        zblocks.append(ds.controls)
    ones = np.ones((ds.n, 1))
    blocks.append(ones)
    zblocks.append(ones)
    return AugmentedDataset(
        y=ds.y,
        x=np.hstack(blocks),
        z=np.hstack(zblocks),
        controls=None,
        cluster_ids=ds.cluster_ids,
        column_names=ds.column_names,
        n_base_x=ds.x.shape[1],
        n_base_z=ds.z.shape[1],
    )


@dataclass(frozen=True)
class SplitPlan:
    """Disjoint auxiliary/main row partition produced by :func:`make_split`."""

    aux_indices: np.ndarray
    main_indices: np.ndarray
    seed: int

    def __post_init__(self):
        object.__setattr__(
            self, "aux_indices", _as_readonly(np.asarray(self.aux_indices, dtype=np.int64))
        )
        object.__setattr__(
            self, "main_indices", _as_readonly(np.asarray(self.main_indices, dtype=np.int64))
        )


def auxiliary_size(n: int) -> int:
    """Target auxiliary-sample size: round(min(n/2, e*n/log n)).

    Rounding is round-half-to-even on the real-valued formula.
    """
    if n < 2:
        raise DataError("need at least two observations to split")
    return round(min(n / 2.0, math.e * n / math.log(n)))


def make_split(ds: Dataset, seed: int) -> SplitPlan:
    """Randomly split rows into auxiliary and main samples.

    Indices are drawn without replacement from a generator keyed by
    ``seed``.  With cluster labels present, whole clusters are shuffled and
    assigned to the auxiliary sample until its size first reaches the
    target, so no cluster straddles the split.
    """
    n = ds.n
    p_cols = ds.x.shape[1]
    min_side = p_cols + 1
    if n < 2 * min_side:
        raise DataError("sample too small to split")
    target = auxiliary_size(n)

    gen = generator(seed, _SPLIT_STREAM)
    if ds.cluster_ids is None:
        perm = gen.permutation(n)
        aux = np.sort(perm[:target])
    else:
        unique_ids = np.unique(ds.cluster_ids)
        order = gen.permutation(unique_ids.shape[0])
        members = {int(c): np.flatnonzero(ds.cluster_ids == c) for c in unique_ids}
        chosen: list[np.ndarray] = []
        size = 0
        for k in order:
            if size >= target:
                break
            rows = members[int(unique_ids[k])]
            chosen.append(rows)
            size += rows.shape[0]
        aux = np.sort(np.concatenate(chosen))

    mask = np.ones(n, dtype=bool)
    mask[aux] = False
    main = np.flatnonzero(mask)
    if aux.shape[0] < min_side or main.shape[0] < min_side:
        raise DataError("sample too small to split")
    return SplitPlan(aux_indices=aux, main_indices=main, seed=int(seed))


def _parse_cell(raw: str, row: int, name: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise DataError(f"non-numeric cell at row {row}, column '{name}'") from None


def load_csv(path: str | os.PathLike, roles: ColumnRoles) -> Dataset:
    """Load a dataset from a headered CSV file.

    UTF-8, comma-separated, decimal point '.'.  All role columns must be
    numeric except the cluster column, whose tokens are mapped to dense
    integers in order of first appearance.  Row order is preserved.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"empty file: {path}") from None
        header = [h.strip() for h in header]
        col_index: dict[str, int] = {}
        duplicates = set()
        for i, name in enumerate(header):
            if name in col_index:
                duplicates.add(name)
            col_index.setdefault(name, i)

        numeric_names = [roles.response, *roles.endogenous, *roles.instruments, *roles.controls]
        role_names = numeric_names if roles.cluster is None else [*numeric_names, roles.cluster]
        for name in role_names:
            if name not in col_index:
                raise DataError(f"missing column '{name}' in {path}")
            if name in duplicates:
                raise DataError(f"column '{name}' appears more than once in {path}")

        rows: list[list[float]] = []
        tokens: list[str] = []
        for r, record in enumerate(reader, start=1):
            if not record or all(cell.strip() == "" for cell in record):
                continue
            if len(record) < len(header):
                raise DataError(f"row {r} has fewer cells than the header")
            rows.append([_parse_cell(record[col_index[name]].strip(), r, name) for name in numeric_names])
            if roles.cluster is not None:
                tokens.append(record[col_index[roles.cluster]].strip())

    if not rows:
        raise DataError(f"empty file: {path}")
    data = np.asarray(rows, dtype=np.float64)
    k = 1
    p = len(roles.endogenous)
    d = len(roles.instruments)
    q = len(roles.controls)
    y = data[:, 0]
    x = data[:, k : k + p]
    z = data[:, k + p : k + p + d]
    controls = data[:, k + p + d : k + p + d + q] if q else None

    cluster_ids = None
    if roles.cluster is not None:
        mapping: dict[str, int] = {}
        cluster_ids = np.empty(len(tokens), dtype=np.int64)
        for i, tok in enumerate(tokens):
            cluster_ids[i] = mapping.setdefault(tok, len(mapping))

    return Dataset(y=y, x=x, z=z, controls=controls, cluster_ids=cluster_ids, column_names=roles)


def save_csv(ds: Dataset, path: str | os.PathLike) -> None:
    """Write a dataset to CSV with 17-significant-digit decimal floats.

    That precision round-trips float64 exactly, so load_csv(save_csv(ds))
    reproduces the matrices bit for bit.
    """
    cn = ds.column_names
    if cn is not None:
        q = 0 if ds.controls is None else ds.controls.shape[1]
        shape_matches = (
            len(cn.endogenous) == ds.x.shape[1]
            and len(cn.instruments) == ds.z.shape[1]
            and len(cn.controls) == q
        )
        if not shape_matches:  # augmented matrices outgrew the raw role labels
            cn = None
    if cn is None:
        cn = ColumnRoles(
            response="Y",
            endogenous=tuple(f"X{i + 1}" for i in range(ds.x.shape[1])),
            instruments=tuple(f"Z{i + 1}" for i in range(ds.z.shape[1])),
            controls=tuple(
                f"C{i + 1}" for i in range(0 if ds.controls is None else ds.controls.shape[1])
            ),
            cluster="cluster" if ds.cluster_ids is not None else None,
        )
    header = [cn.response, *cn.endogenous, *cn.instruments, *cn.controls]
    if ds.cluster_ids is not None:
        header.append(cn.cluster if cn.cluster is not None else "cluster")

    def fmt(v: float) -> str:
        return format(v, ".17g")

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(ds.n):
            row = [fmt(ds.y[i])]
            row += [fmt(v) for v in ds.x[i]]
            row += [fmt(v) for v in ds.z[i]]
            if ds.controls is not None:
                row += [fmt(v) for v in ds.controls[i]]
            if ds.cluster_ids is not None:
                row.append(str(int(ds.cluster_ids[i])))
            writer.writerow(row)
