"""Regression datasets, ground truth records and their file formats.

Datasets are stored as CSV with a header row, the response in column ``y``
and covariates ``x1..xK``; ground truth is stored as JSON.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

__all__ = ["Dataset", "GroundTruth", "read_dataset_csv", "write_dataset_csv"]


@dataclass
class GroundTruth:
    b0: float
    b: np.ndarray
    sigma: float
    sigma_x: np.ndarray
    r2_0: float

    @property
    def nonzero(self) -> np.ndarray:
        return np.flatnonzero(self.b != 0.0)

    @property
    def zero(self) -> np.ndarray:
        return np.flatnonzero(self.b == 0.0)

    def to_json(self, path=None):
        doc = {
            "b0": float(self.b0),
            "b": np.asarray(self.b, dtype=float).tolist(),
            "sigma": float(self.sigma),
            "sigma_x": np.asarray(self.sigma_x, dtype=float).tolist(),
            "r2_0": float(self.r2_0),
        }
        text = json.dumps(doc)
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_json(cls, source):
        text = Path(source).read_text() if not str(source).lstrip().startswith("{") else source
        doc = json.loads(text)
        return cls(
            b0=float(doc["b0"]),
            b=np.asarray(doc["b"], dtype=float),
            sigma=float(doc["sigma"]),
            sigma_x=np.asarray(doc["sigma_x"], dtype=float),
            r2_0=float(doc["r2_0"]),
        )


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    truth: GroundTruth | None = None
    feature_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        if self.X.shape[0] != self.y.shape[0]:
            raise DataError(f"X has {self.X.shape[0]} rows but y has {self.y.shape[0]}")
        if not self.feature_names:
            self.feature_names = [f"x{k + 1}" for k in range(self.X.shape[1])]
        if len(self.feature_names) != self.X.shape[1]:
            raise DataError("feature_names length does not match the number of columns")

    @property
    def N(self) -> int:
        return self.X.shape[0]

    @property
    def K(self) -> int:
        return self.X.shape[1]


def write_dataset_csv(data: Dataset, path, response: str = "y"):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([response, *data.feature_names])
        for yi, xi in zip(data.y, data.X):
            writer.writerow([repr(float(yi)), *(repr(float(v)) for v in xi)])


def read_dataset_csv(path, response: str = "y") -> Dataset:
    """Read a numeric CSV; every column other than ``response`` is a covariate."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if response not in header:
            raise DataError(f"{path}: response column {response!r} not found")
        y_idx = header.index(response)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    arr = np.asarray(rows, dtype=float).reshape(-1, len(header))
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{path}: non-finite values")
    names = [h for i, h in enumerate(header) if i != y_idx]
    return Dataset(np.delete(arr, y_idx, axis=1), arr[:, y_idx], feature_names=names)
