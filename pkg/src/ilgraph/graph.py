"""Point clouds, kernels and sparse kNN weight graphs.

Weight graphs are kept directed after truncation: row i holds the weights
from x_i to its k nearest neighbors, which need not coincide with the
reverse edges. Solvers consume w_ij and w_ji separately, so no
symmetrization is applied by default.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree


class InvalidParameterError(ValueError):
    """Raised when an operation receives out-of-contract parameters."""


class DegenerateBandwidthError(ValueError):
    """Raised when a per-point bandwidth collapses to zero (duplicate points)."""


@dataclass(frozen=True)
class PointCloud:
    """An n x d array of coordinates."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise InvalidParameterError("points must be a nonempty n x d array")
        if not np.all(np.isfinite(pts)):
            raise InvalidParameterError("point coordinates must be finite")
        object.__setattr__(self, "points", pts)

    @property
    def count(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @classmethod
    def from_csv(cls, path) -> "PointCloud":
        return cls(np.loadtxt(path, delimiter=",", ndmin=2))

    def to_csv(self, path):
        np.savetxt(path, self.points, delimiter=",")

    def to_cache(self, path):
        np.savez_compressed(path, points=self.points)

    @classmethod
    def from_cache(cls, path) -> "PointCloud":
        with np.load(path) as data:
            return cls(data["points"])


@dataclass(frozen=True)
class KernelSpec:
    """A radial kernel profile eta with a bandwidth.

    ``profile`` is the unscaled shape: continuous, nonincreasing, supported
    in [0, support_radius] with profile(0) > 0. Pairwise weights are
    evaluated as profile(distance / bandwidth).
    """

    family: str
    bandwidth: float
    support_radius: float
    profile: Callable[[np.ndarray], np.ndarray] = field(compare=False)

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise InvalidParameterError("bandwidth must be positive")
        if not self.support_radius > 0:
            raise InvalidParameterError("support radius must be positive")

    @property
    def compactly_supported(self) -> bool:
        return math.isfinite(self.support_radius)

    def evaluate(self, dist) -> np.ndarray:
        """Weight for a pairwise distance: eta(dist / bandwidth)."""
        t = np.asarray(dist, dtype=float) / self.bandwidth
        return np.asarray(self.profile(t), dtype=float)

    @classmethod
    def gaussian(cls, sigma: float) -> "KernelSpec":
        # Unbounded support: fine for kNN-truncated weights, rejected by
        # the quadrature in the convergence-study module.
        return cls("gaussian", sigma, math.inf, lambda t: np.exp(-(t ** 2)))

    @classmethod
    def tent(cls, bandwidth: float = 1.0) -> "KernelSpec":
        return cls("tent", bandwidth, bandwidth,
                   lambda t: np.maximum(0.0, 1.0 - t))

    @classmethod
    def tabulated(cls, radii: np.ndarray, values: np.ndarray,
                  bandwidth: float = 1.0) -> "KernelSpec":
        radii = np.asarray(radii, dtype=float)
        values = np.asarray(values, dtype=float)
        if np.any(np.diff(values) > 0) or np.any(values < 0):
            raise InvalidParameterError("tabulated kernel must be nonincreasing and nonnegative")
        r_max = float(radii[-1])

        def profile(t):
            return np.interp(t, radii, values, right=0.0)

        return cls("tabulated", bandwidth, bandwidth * r_max, profile)


@dataclass(frozen=True)
class WeightGraph:
    """Sparse directed nonnegative weight matrix with zero diagonal."""

    weights: sp.csr_matrix

    def __post_init__(self):
        w = sp.csr_matrix(self.weights)
        if w.shape[0] != w.shape[1]:
            raise InvalidParameterError("weight matrix must be square")
        if w.diagonal().any():
            w = w.tolil()
            w.setdiag(0.0)
            w = w.tocsr()
        w.eliminate_zeros()
        w.sort_indices()
        if w.nnz and w.data.min() < 0:
            raise InvalidParameterError("weights must be nonnegative")
        object.__setattr__(self, "weights", w)

    @property
    def n_nodes(self) -> int:
        return self.weights.shape[0]

    def edge_arrays(self):
        """(rows, cols, w, sqrt_w) aligned flat views of the nonzeros,
        computed once and cached (the graph is immutable)."""
        cached = getattr(self, "_edge_cache", None)
        if cached is None:
            coo = self.weights.tocoo()
            cached = (coo.row, coo.col, coo.data, np.sqrt(coo.data))
            object.__setattr__(self, "_edge_cache", cached)
        return cached

    def symmetrized(self) -> "WeightGraph":
        """Optional max-symmetrization; off by default everywhere."""
        w = self.weights
        return WeightGraph(w.maximum(w.T).tocsr())

    def to_csv(self, path):
        coo = self.weights.tocoo()
        arr = np.column_stack([coo.row, coo.col, coo.data])
        np.savetxt(path, arr, delimiter=",", fmt=["%d", "%d", "%.17g"])

    @classmethod
    def from_csv(cls, path, n_nodes: Optional[int] = None) -> "WeightGraph":
        arr = np.loadtxt(path, delimiter=",", ndmin=2)
        if arr.size == 0:
            raise InvalidParameterError("empty graph file")
        rows = arr[:, 0].astype(int)
        cols = arr[:, 1].astype(int)
        vals = arr[:, 2]
        n = n_nodes if n_nodes is not None else int(max(rows.max(), cols.max())) + 1
        return cls(sp.csr_matrix((vals, (rows, cols)), shape=(n, n)))


def exact_knn(points: np.ndarray, k: int):
    """Exact k nearest neighbors of every point, self excluded.

    Ties on distance are broken by the smaller point index. Returns
    (dist, idx), both of shape (n, k), each row sorted by (distance, index).
    """
    points = np.asarray(points, dtype=float)
    n, d = points.shape
    if k >= n:
        raise InvalidParameterError(f"k={k} must be smaller than the number of points n={n}")
    if d <= 15 and n > 1500:
        return _knn_kdtree(points, k)
    return _knn_brute(points, k)


def _knn_kdtree(points, k):
    n = points.shape[0]
    tree = cKDTree(points)
    m = min(n, k + 2)
    dist, idx = tree.query(points, k=m)
    out_d = np.empty((n, k))
    out_i = np.empty((n, k), dtype=np.int64)
    for i in range(n):
        di, ii = dist[i], idx[i]
        keep = ii != i
        di, ii = di[keep], ii[keep]
        order = np.lexsort((ii, di))
        di, ii = di[order], ii[order]
        # If the k-th kept distance reaches the last candidate's distance the
        # truncated query may have dropped tied points: requery the full ball.
        if di[k - 1] >= di[-1] and m < n:
            # tiny inflation: the tree's internal distance arithmetic may
            # exclude boundary points at exactly r
            r = di[k - 1] * (1.0 + 1e-9) + 1e-300
            while True:
                ball = tree.query_ball_point(points[i], r=r, p=2.0)
                ball = np.asarray([j for j in ball if j != i], dtype=np.int64)
                if ball.size >= k or ball.size >= n - 1:
                    break
                r *= 1.01
            db = np.linalg.norm(points[ball] - points[i], axis=1)
            order = np.lexsort((ball, db))
            ii = ball[order]
            di = db[order]
        out_d[i] = di[:k]
        out_i[i] = ii[:k]
    return out_d, out_i


def _knn_brute(points, k, chunk=256):
    n, d = points.shape
    out_d = np.empty((n, k))
    out_i = np.empty((n, k), dtype=np.int64)
    use_matmul = d > 4 or n > 4000
    if use_matmul:
        sq = np.einsum("ij,ij->i", points, points)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        block = points[start:stop]
        if use_matmul:
            d2 = sq[start:stop, None] + sq[None, :] - 2.0 * (block @ points.T)
            np.maximum(d2, 0.0, out=d2)
        else:
            diff = block[:, None, :] - points[None, :, :]
            d2 = np.einsum("ijk,ijk->ij", diff, diff)
        d2[np.arange(start, stop) - start, np.arange(start, stop)] = np.inf
        # stable sort breaks distance ties by the smaller column index
        order = np.argsort(d2, axis=1, kind="stable")[:, :k]
        out_i[start:stop] = order
        out_d[start:stop] = np.sqrt(np.take_along_axis(d2, order, axis=1))
    return out_d, out_i


def knn_graph(cloud: PointCloud, k: int, kernel: KernelSpec,
              symmetrize: bool = False) -> WeightGraph:
    """Directed kNN weight graph: row i holds kernel weights to the k
    nearest neighbors of x_i (self excluded, exact search)."""
    if k < 1:
        raise InvalidParameterError("k must be a positive integer")
    dist, idx = exact_knn(cloud.points, k)
    w = kernel.evaluate(dist)
    return _assemble(cloud.count, idx, w, symmetrize)


def self_tuning_weights(cloud: PointCloud, k: int, k_sigma: int,
                        symmetrize: bool = False) -> WeightGraph:
    """Quartic self-tuning weights w = exp(-2 d^4 / sigma(x)^4) with
    sigma(x) the distance from x to its k_sigma-th nearest neighbor."""
    if not (1 <= k_sigma <= k):
        raise InvalidParameterError("need 1 <= k_sigma <= k")
    dist, idx = exact_knn(cloud.points, k)
    sigma = dist[:, k_sigma - 1]
    bad = np.nonzero(sigma == 0.0)[0]
    if bad.size:
        raise DegenerateBandwidthError(
            f"zero bandwidth at row(s) {bad.tolist()}: at least "
            f"{k_sigma} duplicates of the point")
    ratio = dist / sigma[:, None]
    w = np.exp(-2.0 * ratio ** 4)
    return _assemble(cloud.count, idx, w, symmetrize)


def _assemble(n, idx, w, symmetrize):
    rows = np.repeat(np.arange(n), idx.shape[1])
    mat = sp.csr_matrix((w.ravel(), (rows, idx.ravel())), shape=(n, n))
    graph = WeightGraph(mat)
    if symmetrize:
        graph = graph.symmetrized()
    return graph
