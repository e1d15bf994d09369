"""Sparse symmetric solves backing the value update.

The linear systems here are weakly diagonally dominant graph Laplacians
restricted to unlabeled nodes; they are solved with MINRES, which is valid
for any symmetric (semi)definite system.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .graph import InvalidParameterError

DEFAULT_TOL = 1e-10


class DisconnectedGraphError(RuntimeError):
    """Raised when unlabeled nodes are not connected to any labeled node."""


@dataclass
class SolveReport:
    iterations: int
    relative_residual: float
    converged: bool


def solve_symmetric(A, b, tol: float = DEFAULT_TOL, max_iter: int = None):
    """Solve A x = b for symmetric A. Returns (x, SolveReport).

    Non-convergence is reported, not raised; the caller decides.
    """
    if not tol > 0:
        raise InvalidParameterError("tol must be positive")
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if max_iter is None:
        max_iter = 10 * n
    b_norm = np.linalg.norm(b)
    if b_norm == 0.0:
        return np.zeros(n), SolveReport(0, 0.0, True)

    count = [0]

    def cb(_xk):
        count[0] += 1

    x, info = spla.minres(A, b, rtol=tol, maxiter=max_iter, callback=cb)
    res = np.linalg.norm(A @ x - b) / b_norm
    converged = bool(res <= tol)
    return x, SolveReport(count[0], float(res), converged)


def check_label_connectivity(weights: sp.spmatrix, labeled_idx: np.ndarray):
    """Every connected component of the (symmetrized) support must contain
    a labeled node, otherwise the restricted system is singular."""
    n = weights.shape[0]
    pattern = (weights != 0)
    pattern = (pattern + pattern.T).tocsr()
    n_comp, labels = sp.csgraph.connected_components(pattern, directed=False)
    has_label = np.zeros(n_comp, dtype=bool)
    has_label[np.unique(labels[labeled_idx])] = True
    if not has_label.all():
        orphan = int(np.nonzero(~has_label)[0][0])
        members = np.nonzero(labels == orphan)[0]
        raise DisconnectedGraphError(
            f"component with nodes {members[:10].tolist()}"
            f"{'...' if members.size > 10 else ''} contains no labeled node")
