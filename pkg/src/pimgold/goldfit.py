"""Fit reduction latency to the three-term scaling model and grade it.

The model is

    cycles(P) ~= a * N * log2(P) + b * P + c,      a, b, c >= 0

where P is the partial-sum count and N the data width. `a` prices each
level of a log-depth addition tree, `b` prices per-partial data movement,
`c` is the P-independent floor (block-level work, pipeline fill). An ideal
bit-serial design lands at 1/N <= a <= 2, 0 <= b <= 1, c >= 0.

Fitting is plain unweighted nonnegative least squares via the
Lawson-Hanson active-set algorithm, which terminates at the exact
constrained minimizer; the stated 1e-9 relative-objective tolerance is a
ceiling, not an iteration knob. Nonnegativity matters: designs whose true
intercept is negative (movement charged per interior boundary only) clamp
to c = 0 rather than reporting a nonphysical negative floor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDesign, InsufficientData

_COND_LIMIT = 1e12


def _design_matrix(p_values: np.ndarray, n_bits: int) -> np.ndarray:
    logs = np.log2(p_values.astype(float))
    return np.column_stack([n_bits * logs, p_values.astype(float),
                            np.ones_like(logs)])


def _nnls(a_mat: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Lawson-Hanson active-set NNLS: argmin ||Ax - y||^2 s.t. x >= 0."""
    m, n = a_mat.shape
    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    scale = float(np.abs(a_mat).sum(axis=0).max() * max(np.abs(y).max(), 1.0))
    tol = 10 * np.finfo(float).eps * max(scale, 1.0)
    for _ in range(3 * n + 10):
        w = a_mat.T @ (y - a_mat @ x)
        w = np.where(passive, -np.inf, w)
        j = int(np.argmax(w))          # ties break to the lowest index
        if w[j] <= tol:
            break
        passive[j] = True
        while True:
            cols = np.flatnonzero(passive)
            sol = np.linalg.lstsq(a_mat[:, cols], y, rcond=None)[0]
            z = np.zeros(n)
            z[cols] = sol
            if sol.min() > 0.0:
                x = z
                break
            # Back off along x -> z to the first passive variable to hit 0,
            # then retire every variable pinned at the bound.
            neg = cols[z[cols] <= 0.0]
            alpha = float(np.min(x[neg] / np.maximum(x[neg] - z[neg], 1e-300)))
            x = x + alpha * (z - x)
            pinned = passive & (z <= 0.0) & (x <= 1e-12 * max(1.0, float(np.abs(x).max())))
            x[pinned] = 0.0
            passive &= ~pinned
    return np.maximum(x, 0.0)


@dataclass(frozen=True)
class GoldFit:
    """Fitted scaling parameters for one design at one data width."""

    a: float
    b: float
    c: float
    residual_rms: float
    n_bits: int


def fit(points, n_bits: int) -> GoldFit:
    """Fit (P, cycles) samples. Needs >= 4 points with distinct P >= 2."""
    pts = list(points)
    if len(pts) < 4:
        raise InsufficientData(f"need at least 4 points, got {len(pts)}")
    p_values = np.array([p for p, _ in pts], dtype=float)
    y = np.array([c for _, c in pts], dtype=float)
    if len(set(p_values.tolist())) != len(pts):
        raise InsufficientData("P values must be distinct")
    if p_values.min() < 2:
        raise InsufficientData("every P must be >= 2")
    if n_bits < 1:
        raise InsufficientData(f"n_bits must be >= 1, got {n_bits}")
    a_mat = _design_matrix(p_values, n_bits)
    _check_basis(a_mat)
    x = _nnls(a_mat, y)
    resid = a_mat @ x - y
    rms = float(math.sqrt(np.mean(resid * resid)))
    return GoldFit(a=float(x[0]), b=float(x[1]), c=float(x[2]),
                   residual_rms=rms, n_bits=n_bits)


def _check_basis(a_mat: np.ndarray) -> None:
    if np.linalg.matrix_rank(a_mat) < a_mat.shape[1]:
        raise DegenerateDesign("fit basis is rank deficient on these points")
    if np.linalg.cond(a_mat) > _COND_LIMIT:
        raise DegenerateDesign("fit basis is numerically degenerate "
                               f"(condition number > {_COND_LIMIT:g})")


# Ideal parameter ranges; `a` additionally depends on the data width.
IDEAL_B = (0.0, 1.0)


def ideal_a_range(n_bits: int) -> tuple[float, float]:
    return (1.0 / n_bits, 2.0)


def range_check(result: GoldFit) -> dict[str, str]:
    """Per-parameter status against the ideal design ranges."""
    a_lo, a_hi = ideal_a_range(result.n_bits)
    status = {
        "a": "ideal" if a_lo <= result.a <= a_hi else "out-of-range",
        "b": "ideal" if IDEAL_B[0] <= result.b <= IDEAL_B[1] else "out-of-range",
        "c": "ideal" if result.c >= 0 else "out-of-range",
    }
    return status


@dataclass(frozen=True)
class SpeedLabels:
    addition: str
    movement: str


def classify(result: GoldFit) -> SpeedLabels:
    """Grade tree addition (a) and data movement (b) against the width.

    a < 1/N beats one serial add per tree level ("Fast", usually an
    element-parallel adder); a <= 2 is the bit-serial band ("Standard");
    beyond that additions dominate ("Very Slow"). Movement: b <= 0.1 is
    near-free, b <= 1 standard, above that every partial pays a wide toll.
    A design whose additions hide inside its movement term can grade
    "Fast" on a while being slow in absolute terms; read both labels.
    """
    if result.a < 1.0 / result.n_bits:
        addition = "Fast"
    elif result.a <= 2.0:
        addition = "Standard"
    else:
        addition = "Very Slow"
    if result.b <= 0.1:
        movement = "Fast"
    elif result.b <= 1.0:
        movement = "Standard"
    else:
        movement = "Very Slow"
    return SpeedLabels(addition=addition, movement=movement)


def fit_report(design: str, result: GoldFit) -> dict:
    """JSON-shaped record of one fit: parameters plus speed labels."""
    labels = classify(result)
    return {
        "design": design,
        "N": result.n_bits,
        "a": round(result.a, 6),
        "b": round(result.b, 6),
        "c": round(result.c, 6),
        "residual_rms": round(result.residual_rms, 6),
        "addition_label": labels.addition,
        "movement_label": labels.movement,
    }
