"""Bounded derivative-free minimization (Nelder-Mead simplex)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize


@dataclass
class LsqFitResult:
    x: np.ndarray
    fun: float
    nit: int
    nfev: int
    converged: bool
    history: list[float] = field(default_factory=list)  # best-so-far per iteration


def _initial_simplex(x0: np.ndarray, bounds, rel_step: float) -> np.ndarray:
    simplex = [x0.copy()]
    for i in range(len(x0)):
        lo, hi = bounds[i] if bounds is not None else (None, None)
        if lo is not None and hi is not None and math.isfinite(lo) and math.isfinite(hi):
            step = rel_step * (hi - lo)
        else:
            step = 0.05 * abs(x0[i]) if x0[i] != 0 else 0.00025
        vertex = x0.copy()
        vertex[i] += step
        if hi is not None and vertex[i] > hi:
            vertex[i] = x0[i] - step
        simplex.append(vertex)
    return np.array(simplex)


def lsq_minimize(objective: Callable[[np.ndarray], float], initial: Sequence[float],
                 bounds: Sequence[tuple[float, float]] | None = None,
                 budget: int = 2000, rel_step: float = 0.2,
                 xatol: float = 1e-8, fatol: float = 1e-10) -> LsqFitResult:
    """Minimize ``objective`` inside ``bounds`` with at most ``budget`` evaluations.

    Returns the best point ever evaluated, so the reported objective never
    exceeds the objective at ``initial``.
    """
    x0 = np.asarray(initial, dtype=float)
    if bounds is not None:
        lo = np.array([b[0] for b in bounds], float)
        hi = np.array([b[1] for b in bounds], float)
        x0 = np.clip(x0, lo, hi)
    f0 = float(objective(x0))
    if not math.isfinite(f0):
        raise ValueError("objective is not finite at the initial point")

    best = {"x": x0.copy(), "f": f0}
    history = [f0]
    count = {"n": 1}

    def wrapped(p):
        count["n"] += 1
        value = float(objective(p))
        if not math.isfinite(value):
            value = math.inf
        if value < best["f"]:
            best["x"], best["f"] = np.array(p, float), value
        return value

    res = minimize(
        wrapped, x0, method="Nelder-Mead", bounds=bounds,
        options={"maxfev": max(budget - 1, 1), "xatol": xatol, "fatol": fatol,
                 "initial_simplex": _initial_simplex(x0, bounds, rel_step)},
        callback=lambda _xk: history.append(best["f"]),
    )
    return LsqFitResult(best["x"], best["f"], int(res.nit), count["n"],
                        bool(res.success), history)
