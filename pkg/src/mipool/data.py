"""Dataset, missingness mask and imputation-stack containers.

Missing cells hold ``PLACEHOLDER`` behind a boolean mask (True = observed).
Consumers must branch on the mask; the placeholder value carries no meaning.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

PLACEHOLDER = 0.0
NA_TOKEN = "NA"


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class IncompleteDataset:
    values: np.ndarray
    mask: np.ndarray
    column_names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        mask = np.asarray(self.mask, dtype=bool)
        if values.ndim != 2:
            raise ValueError(f"values must be 2-D, got shape {values.shape}")
        if mask.shape != values.shape:
            raise ValueError(
                f"mask shape {mask.shape} does not match values shape {values.shape}"
            )
        n_rows, n_cols = values.shape
        if n_rows < 1 or n_cols < 1:
            raise ValueError("dataset needs at least one row and one column")
        names = tuple(self.column_names) or tuple(f"V{j + 1}" for j in range(n_cols))
        if len(names) != n_cols:
            raise ValueError(f"{len(names)} column names for {n_cols} columns")
        values = np.where(mask, values, PLACEHOLDER)
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "mask", _frozen(mask))
        object.__setattr__(self, "column_names", names)

    @classmethod
    def complete(cls, values, column_names: Sequence[str] = ()) -> IncompleteDataset:
        values = np.asarray(values, dtype=float)
        return cls(values, np.ones(values.shape, dtype=bool), tuple(column_names))

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def column_index(self, col: int | str) -> int:
        if isinstance(col, str):
            try:
                return self.column_names.index(col)
            except ValueError:
                raise KeyError(f"no column named {col!r}") from None
        if not 0 <= col < self.n_cols:
            raise IndexError(f"column index {col} out of range for {self.n_cols} columns")
        return int(col)

    def incomplete_columns(self) -> list[int]:
        return [j for j in range(self.n_cols) if not self.mask[:, j].all()]

    def with_mask(self, mask: np.ndarray) -> IncompleteDataset:
        """Return a copy whose mask is ``self.mask & mask``."""
        return IncompleteDataset(self.values, self.mask & np.asarray(mask, dtype=bool),
                                 self.column_names)


def column_observed_values(ds: IncompleteDataset, col: int | str) -> np.ndarray:
    j = ds.column_index(col)
    return ds.values[ds.mask[:, j], j].copy()


@dataclass(frozen=True)
class ImputationStack:
    """m completed copies of one dataset; observed cells are shared exactly."""

    completions: np.ndarray  # (m, n_rows, n_cols)
    source_mask: np.ndarray
    column_names: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        comps = np.asarray(self.completions, dtype=float)
        mask = np.asarray(self.source_mask, dtype=bool)
        if comps.ndim != 3 or comps.shape[1:] != mask.shape:
            raise ValueError(
                f"completions shape {comps.shape} incompatible with mask {mask.shape}"
            )
        if comps.shape[0] < 2:
            raise ValueError(f"need m >= 2 completions, got {comps.shape[0]}")
        observed = comps[:, mask]
        if not (observed == observed[0]).all():
            raise ValueError("completions disagree on observed cells")
        object.__setattr__(self, "completions", _frozen(comps))
        object.__setattr__(self, "source_mask", _frozen(mask))
        object.__setattr__(self, "column_names", tuple(self.column_names))

    @property
    def m(self) -> int:
        return self.completions.shape[0]

    def __len__(self) -> int:
        return self.m

    def __getitem__(self, i: int) -> np.ndarray:
        return self.completions[i]


@dataclass(frozen=True)
class RepeatedEstimates:
    """Per-imputation estimates and their variances.

    Scalar case: ``q_hats`` and ``u_bars`` have shape (m,). Vector case:
    ``q_hats`` is (m, k) and ``u_bars`` is (m, k, k).
    """

    q_hats: np.ndarray
    u_bars: np.ndarray

    def __post_init__(self) -> None:
        q = np.asarray(self.q_hats, dtype=float)
        u = np.asarray(self.u_bars, dtype=float)
        if q.ndim not in (1, 2):
            raise ValueError(f"q_hats must be 1-D or 2-D, got shape {q.shape}")
        if u.shape[:1] != q.shape[:1]:
            raise ValueError(
                f"{q.shape[0]} estimates but {u.shape[0] if u.ndim else 0} variances"
            )
        if q.ndim == 1:
            if u.ndim != 1:
                raise ValueError("scalar estimates need scalar variances")
            if (u < 0).any():
                raise ValueError("variances must be non-negative")
        else:
            k = q.shape[1]
            if u.shape != (q.shape[0], k, k):
                raise ValueError(f"u_bars shape {u.shape} does not match k={k}")
            if not np.allclose(u, np.swapaxes(u, 1, 2)):
                raise ValueError("variance matrices must be symmetric")
            if (np.linalg.eigvalsh(u) < -1e-12 * np.abs(u).max(initial=1.0)).any():
                raise ValueError("variance matrices must be positive semi-definite")
        object.__setattr__(self, "q_hats", _frozen(q))
        object.__setattr__(self, "u_bars", _frozen(u))

    @property
    def m(self) -> int:
        return self.q_hats.shape[0]

    @property
    def is_vector(self) -> bool:
        return self.q_hats.ndim == 2


class AnalysisError(RuntimeError):
    def __init__(self, index: int, cause: BaseException):
        super().__init__(f"analysis of completion {index} failed: {cause}")
        self.index = index


Analyzer = Callable[[np.ndarray], "tuple[object, object]"]


def stack_estimates(stack: ImputationStack, analyzer: Analyzer) -> RepeatedEstimates:
    """Run ``analyzer`` on each completion and collect (Q-hat, U) pairs.

    Each call receives a private writable copy, so analyzers may mutate it.
    """
    q_hats, u_bars = [], []
    for i in range(stack.m):
        try:
            q, u = analyzer(np.array(stack.completions[i]))
        except Exception as exc:
            raise AnalysisError(i, exc) from exc
        q_hats.append(q)
        u_bars.append(u)
    return RepeatedEstimates(np.asarray(q_hats, dtype=float), np.asarray(u_bars, dtype=float))


def mean_analyzer(col: int) -> Analyzer:
    """Mean of one column with variance s^2/n (unbiased s^2)."""

    def analyze(data: np.ndarray) -> tuple[float, float]:
        y = data[:, col]
        return float(y.mean()), float(y.var(ddof=1) / y.size)

    return analyze


def read_csv(path: str | Path) -> IncompleteDataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]
    values = np.full((len(rows), len(header)), PLACEHOLDER)
    mask = np.ones(values.shape, dtype=bool)
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise ValueError(f"row {i + 1} has {len(row)} fields, expected {len(header)}")
        for j, cell in enumerate(row):
            if cell.strip() == NA_TOKEN:
                mask[i, j] = False
            else:
                values[i, j] = float(cell)
    return IncompleteDataset(values, mask, tuple(header))


def write_csv(ds: IncompleteDataset, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ds.column_names)
        for vals, obs in zip(ds.values, ds.mask):
            writer.writerow([repr(float(v)) if o else NA_TOKEN for v, o in zip(vals, obs)])
