"""Polynomial ridge regression on a standardized Vandermonde basis."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FORMAT = "fracrom.polyridge/1"


class RankDeficientError(ValueError):
    pass


@dataclass(frozen=True)
class PolyRidgeModel:
    degree: int
    lam: float
    coefficients: np.ndarray  # in the standardized basis, intercept first
    x_mean: float
    x_std: float
    y_mean: float
    y_std: float

    def __post_init__(self):
        if len(self.coefficients) != self.degree + 1:
            raise ValueError("coefficient vector must have degree + 1 entries")
        if self.lam < 0:
            raise ValueError("ridge strength must be non-negative")

    def predict(self, x) -> np.ndarray:
        z = (np.asarray(x, dtype=float) - self.x_mean) / self.x_std
        return self.y_mean + self.y_std * np.polynomial.polynomial.polyval(z, self.coefficients)

    def __call__(self, x):
        return self.predict(x)

    def to_dict(self) -> dict:
        return {"format": FORMAT, "degree": self.degree, "lam": self.lam,
                "coefficients": [float(c) for c in self.coefficients],
                "x_mean": self.x_mean, "x_std": self.x_std,
                "y_mean": self.y_mean, "y_std": self.y_std}

    @classmethod
    def from_dict(cls, d: dict) -> "PolyRidgeModel":
        if d.get("format") != FORMAT:
            raise ValueError(f"unexpected model format {d.get('format')!r}")
        return cls(int(d["degree"]), float(d["lam"]), np.asarray(d["coefficients"], float),
                   float(d["x_mean"]), float(d["x_std"]), float(d["y_mean"]), float(d["y_std"]))


def _scale(v: np.ndarray) -> tuple[float, float]:
    std = float(v.std())
    return float(v.mean()), (std if std > 0 else 1.0)


def fit_poly_ridge(x, y, degree: int, lam: float = 0.0) -> PolyRidgeModel:
    """Minimize ||y - p(x)||^2 + lam * ||c[1:]||^2 in closed form.

    The intercept is left unpenalized. Inputs and targets are standardized
    before building the Vandermonde matrix.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValueError("x and y must have the same length")
    if len(x) < degree + 1:
        raise ValueError(f"need at least {degree + 1} samples for degree {degree}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("samples must be finite")
    if lam < 0:
        raise ValueError("ridge strength must be non-negative")

    x_mean, x_std = _scale(x)
    y_mean, y_std = _scale(y)
    z = (x - x_mean) / x_std
    t = (y - y_mean) / y_std
    V = np.vander(z, degree + 1, increasing=True)
    A = V.T @ V
    penalty = np.full(degree + 1, lam)
    penalty[0] = 0.0
    A = A + np.diag(penalty)
    if np.linalg.matrix_rank(A) < degree + 1:
        raise RankDeficientError("rank deficient")
    coef = np.linalg.solve(A, V.T @ t)
    return PolyRidgeModel(degree, float(lam), coef, x_mean, x_std, y_mean, y_std)
