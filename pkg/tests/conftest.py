import numpy as np
import scipy.sparse as sp

from ilgraph.graph import WeightGraph
from ilgraph.solver import LabelAssignment


def random_connected_graph(n, rng, density=0.15):
    """Random symmetric weighted graph, guaranteed connected by a cycle."""
    mat = sp.random(n, n, density=density, random_state=rng)
    mat = abs(mat + mat.T).tolil()
    idx = np.arange(n)
    mat[idx, (idx + 1) % n] = rng.uniform(0.1, 1.0, size=n)
    mat[(idx + 1) % n, idx] = mat[idx, (idx + 1) % n]
    mat.setdiag(0.0)
    return WeightGraph(mat.tocsr())


def random_labels(n, rng, n_labels=3):
    idx = rng.choice(n, size=n_labels, replace=False)
    return LabelAssignment(idx, rng.uniform(-1.0, 1.0, size=n_labels))
