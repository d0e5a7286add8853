"""Couplings of discrete measures and solver run reports."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .measures import DiscreteMeasure

__all__ = ["Coupling", "SolveReport"]


class Coupling:
    """Nonnegative I x J matrix with prescribed marginals.

    Row i of `matrix` carries the mass leaving atom i of row_measure;
    column sums match col_measure's weights. Entries are joint mass
    (they sum to 1), not conditional probabilities.
    """

    __slots__ = ("row_measure", "col_measure", "matrix")

    def __init__(self, row_measure: DiscreteMeasure, col_measure: DiscreteMeasure, matrix):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.shape != (row_measure.n, col_measure.n):
            raise ValueError("coupling matrix shape does not match the marginals")
        if np.any(matrix < -1e-12):
            raise ValueError("coupling entries must be nonnegative")
        self.row_measure = row_measure
        self.col_measure = col_measure
        self.matrix = matrix

    def marginal_residuals(self):
        """(max row-sum error, max column-sum error)."""
        r = np.max(np.abs(self.matrix.sum(axis=1) - self.row_measure.weights))
        c = np.max(np.abs(self.matrix.sum(axis=0) - self.col_measure.weights))
        return float(r), float(c)

    def objective(self, cost) -> float:
        return float(np.sum(self.matrix * cost))

    def barycenters(self):
        """Conditional means m_i = (sum_j pi_ij y_j) / p_i."""
        return (self.matrix @ self.col_measure.atoms) / self.row_measure.weights[:, None]

    def martingale_residual(self) -> float:
        """max_i |sum_j pi_ij (y_j - x_i)| (infinity norm over coordinates)."""
        x = self.row_measure.atoms
        moment = self.matrix @ self.col_measure.atoms
        res = moment - self.row_measure.weights[:, None] * x
        return float(np.max(np.abs(res)))


@dataclass
class SolveReport:
    """Iteration diagnostics common to the QP and entropic solvers."""

    iterations: int
    objective: float
    gap: float
    marginal_residuals: tuple[float, float]
    wall_time: float
    certified: bool = True
    notes: dict = field(default_factory=dict)
