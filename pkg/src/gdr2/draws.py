"""Posterior draw container and its CSV format."""
from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

__all__ = ["DrawMatrix", "STAT_NAMES", "write_draws", "read_draws", "gdr2_columns"]

STAT_NAMES = ("divergent", "tree_depth", "n_leapfrog", "accept_stat", "energy")
_INDEX_NAMES = ("chain", "iteration")
_VECTOR_RE = re.compile(r"^(\w+)\[(\d+)\]$")


def gdr2_columns(K: int) -> list[str]:
    """Column names of a GDR2 draw matrix with K coefficients."""
    return (
        ["b0"]
        + [f"b[{k + 1}]" for k in range(K)]
        + ["sigma", "r2", "omega2"]
        + [f"phi[{k + 1}]" for k in range(K)]
    )


@dataclass
class DrawMatrix:
    """S draws of named parameters plus per-draw sampler statistics.

    Rows are ordered by chain, then iteration.
    """

    columns: list[str]
    values: np.ndarray
    chain: np.ndarray
    iteration: np.ndarray
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(-1, len(self.columns))
        S = self.values.shape[0]
        self.chain = np.asarray(self.chain, dtype=int).reshape(S)
        self.iteration = np.asarray(self.iteration, dtype=int).reshape(S)
        stats = {}
        for name in STAT_NAMES:
            arr = self.stats.get(name)
            stats[name] = np.zeros(S) if arr is None else np.asarray(arr, dtype=float).reshape(S)
        self.stats = stats
        self._index = {name: i for i, name in enumerate(self.columns)}

    def __len__(self):
        return self.values.shape[0]

    @property
    def n_chains(self) -> int:
        return int(np.unique(self.chain).size)

    def column(self, name: str) -> np.ndarray:
        try:
            return self.values[:, self._index[name]]
        except KeyError:
            raise KeyError(f"no column {name!r}") from None

    def block(self, name: str) -> np.ndarray:
        """All ``name[k]`` columns stacked into an (S, K) array."""
        idx = [i for i, col in enumerate(self.columns) if (m := _VECTOR_RE.match(col)) and m.group(1) == name]
        if not idx:
            raise KeyError(f"no vector block {name!r}")
        return self.values[:, idx]

    def by_chain(self, name: str) -> np.ndarray:
        """Column ``name`` reshaped to (n_chains, draws per chain)."""
        col = self.column(name)
        chains = np.unique(self.chain)
        return np.stack([col[self.chain == c] for c in chains])

    @property
    def n_divergent(self) -> int:
        return int(np.sum(self.stats["divergent"] > 0))

    def select(self, mask) -> "DrawMatrix":
        mask = np.asarray(mask, dtype=bool)
        return DrawMatrix(
            list(self.columns),
            self.values[mask],
            self.chain[mask],
            self.iteration[mask],
            {k: v[mask] for k, v in self.stats.items()},
        )


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_draws(draws: DrawMatrix, path):
    """Write one row per draw: indices, parameter columns, then sampler stats."""
    header = [*_INDEX_NAMES, *draws.columns, *STAT_NAMES]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for s in range(len(draws)):
            row = [str(int(draws.chain[s])), str(int(draws.iteration[s]))]
            row.extend(_fmt(v) for v in draws.values[s])
            row.extend(_fmt(draws.stats[name][s]) for name in STAT_NAMES)
            writer.writerow(row)


def read_draws(path) -> DrawMatrix:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}:1: missing header") from None
        if tuple(header[:2]) != _INDEX_NAMES or tuple(header[-len(STAT_NAMES) :]) != STAT_NAMES:
            raise DataError(f"{path}:1: header does not follow the draws schema")
        columns = header[2 : len(header) - len(STAT_NAMES)]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    arr = np.asarray(rows, dtype=float).reshape(-1, len(header))
    n_par = len(columns)
    return DrawMatrix(
        columns,
        arr[:, 2 : 2 + n_par],
        arr[:, 0].astype(int),
        arr[:, 1].astype(int),
        {name: arr[:, 2 + n_par + i] for i, name in enumerate(STAT_NAMES)},
    )
