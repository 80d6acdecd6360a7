"""Synthetic quality data and the least-squares fit of the quality regression."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from . import rng
from .errors import DomainError, SingularFitError
from .io import write_csv_atomic
from .model import LEVELS, QualityModel

CSV_HEADER = ("T", "HU", "packaging", "environment", "quality")
FEATURES = ("T", "HU", "packaging", "environment")

# Default ground truth for generated data: quality spans roughly
# [58.5, 105.5] over T in [-5, 5], HU in [60, 90].
BASELINE_MODEL = QualityModel(x1=-2.0, x2=-0.5, x3=3.0, x4=3.0, intercept=107.5)
# Coefficients as printed in the source table; infeasible for any quality target above -1848.15.
PAPER_TABLE4_MODEL = QualityModel(x1=-12.88, x2=-33.56, x3=2.86, x4=4.28, intercept=79.63)


@dataclass(frozen=True)
class GeneratorSpec:
    true_model: QualityModel = BASELINE_MODEL
    noise_std: float = 2.0
    temp_range: tuple[float, float] = (-5.0, 5.0)
    hum_range: tuple[float, float] = (60.0, 90.0)
    levels: tuple[int, ...] = LEVELS
    seed: int = 42

    def __post_init__(self):
        if not (math.isfinite(self.noise_std) and self.noise_std >= 0):
            raise DomainError(f"noise_std must be finite and >= 0, got {self.noise_std}")
        for name in ("temp_range", "hum_range"):
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise DomainError(f"{name} must be a finite interval with lower < upper")
        if not self.levels or any(level not in LEVELS for level in self.levels):
            raise DomainError(f"levels must be a non-empty subset of {LEVELS}")


@dataclass(frozen=True, eq=False)
class QualityDataset:
    T: np.ndarray
    HU: np.ndarray
    packaging: np.ndarray
    environment: np.ndarray
    quality: np.ndarray

    def __post_init__(self):
        n = len(self.T)
        for name in CSV_HEADER:
            col = getattr(self, name)
            if len(col) != n:
                raise DomainError("dataset columns must have equal length")
            if not np.all(np.isfinite(col)):
                raise DomainError(f"column {name} contains non-finite values")
        for name in ("packaging", "environment"):
            if not np.all(np.isin(getattr(self, name), LEVELS)):
                raise DomainError(f"column {name} must only contain levels {LEVELS}")

    def __len__(self):
        return len(self.T)

    def __eq__(self, other):
        if not isinstance(other, QualityDataset):
            return NotImplemented
        return all(np.array_equal(getattr(self, c), getattr(other, c)) for c in CSV_HEADER)

    def design_matrix(self) -> np.ndarray:
        return np.column_stack(
            [self.T, self.HU, self.packaging, self.environment, np.ones(len(self))]
        ).astype(float)


@dataclass(frozen=True)
class FitReport:
    model: QualityModel
    r_squared: float
    residual_std: float
    n_rows: int
    residuals: np.ndarray = field(repr=False, compare=False, default=None)


def generate_dataset(spec: GeneratorSpec, n: int) -> QualityDataset:
    """Draw ``n`` rows from the generator; each column has its own random stream."""
    if n < 0:
        raise DomainError(f"row count must be >= 0, got {n}")
    levels = np.asarray(spec.levels, dtype=np.int64)
    T = rng.stream(spec.seed, "temperature").uniform(*spec.temp_range, size=n)
    HU = rng.stream(spec.seed, "humidity").uniform(*spec.hum_range, size=n)
    pkg = levels[rng.stream(spec.seed, "packaging").integers(0, len(levels), size=n)]
    env = levels[rng.stream(spec.seed, "environment").integers(0, len(levels), size=n)]
    noise = rng.stream(spec.seed, "noise").normal(0.0, 1.0, size=n) * spec.noise_std
    m = spec.true_model
    quality = m.x1 * T + m.x2 * HU + m.x3 * pkg + m.x4 * env + m.intercept + noise
    return QualityDataset(T=T, HU=HU, packaging=pkg, environment=env, quality=quality)


def fit_ols(dataset: QualityDataset) -> FitReport:
    """Ordinary least squares for quality ~ T + HU + packaging + environment + 1.

    Features are centred and scaled before the normal equations are formed,
    which keeps the Gram matrix well conditioned; the system is then solved
    by LU with partial pivoting and mapped back to raw coefficients. Rank is
    checked up front with a column-pivoted QR so a degenerate column can be
    named in the error.
    """
    n = len(dataset)
    if n < 5:
        raise DomainError(f"need at least 5 rows to fit 5 coefficients, got {n}")
    X = np.column_stack([dataset.T, dataset.HU, dataset.packaging, dataset.environment]).astype(float)
    y = np.asarray(dataset.quality, dtype=float)

    center = X.mean(axis=0)
    scale = X.std(axis=0)
    for j, name in enumerate(FEATURES):
        if scale[j] <= 1e-12 * max(1.0, abs(center[j])):
            raise SingularFitError(name, f"column {name!r} is constant; design matrix is rank deficient")
    Z = (X - center) / scale

    _, r, piv = scipy.linalg.qr(Z, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag[-1] <= 1e-10 * diag[0] * math.sqrt(n):
        raise SingularFitError(FEATURES[piv[-1]])

    y_mean = y.mean()
    gram = Z.T @ Z
    rhs = Z.T @ (y - y_mean)
    beta_z = scipy.linalg.lu_solve(scipy.linalg.lu_factor(gram), rhs)
    beta = beta_z / scale
    intercept = y_mean - float(center @ beta)

    model = QualityModel(*(float(b) for b in beta), intercept=float(intercept))
    residuals = y - (X @ beta + intercept)
    ssr = float(residuals @ residuals)
    sst = float(((y - y_mean) ** 2).sum())
    if sst > 0:
        r_squared = 1.0 - ssr / sst
    else:
        r_squared = 1.0
    residual_std = math.sqrt(ssr / max(n - 5, 1))
    return FitReport(model=model, r_squared=r_squared, residual_std=residual_std, n_rows=n, residuals=residuals)


def dataset_to_rows(dataset: QualityDataset) -> list[list]:
    return [
        [float(t), float(hu), int(p), int(e), float(q)]
        for t, hu, p, e, q in zip(dataset.T, dataset.HU, dataset.packaging, dataset.environment, dataset.quality)
    ]


def read_dataset_csv(path) -> QualityDataset:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DomainError(f"{path}: empty file, expected header {','.join(CSV_HEADER)}") from None
        if tuple(h.strip() for h in header) != CSV_HEADER:
            raise DomainError(f"{path}: header must be {','.join(CSV_HEADER)}, got {','.join(header)}")
        cols = [[] for _ in CSV_HEADER]
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise DomainError(f"{path}:{lineno}: expected {len(CSV_HEADER)} fields, got {len(row)}")
            try:
                cols[0].append(float(row[0]))
                cols[1].append(float(row[1]))
                cols[2].append(int(row[2]))
                cols[3].append(int(row[3]))
                cols[4].append(float(row[4]))
            except ValueError as exc:
                raise DomainError(f"{path}:{lineno}: {exc}") from None
    return QualityDataset(
        T=np.array(cols[0], dtype=float),
        HU=np.array(cols[1], dtype=float),
        packaging=np.array(cols[2], dtype=np.int64),
        environment=np.array(cols[3], dtype=np.int64),
        quality=np.array(cols[4], dtype=float),
    )


def write_dataset_csv(dataset: QualityDataset, path) -> None:
    write_csv_atomic(Path(path), CSV_HEADER, dataset_to_rows(dataset))
