"""Empirical discrete-to-continuum convergence harness.

At bandwidth s the discrete energy of values u on a sample of N points is

    E(u) = (1/s) * max_x ( (1/N) * sum_y eta_s(|x-y|) |u(x)-u(y)|^p )^(1/p)

with eta_s(t) = s^-d eta(t/s). As the sample grows and s shrinks slowly
enough, minimizers of E subject to the label constraint approach the
Lipschitz-minimal extension, and E itself approaches
sigma * vol^(-1/p) * (minimal Lipschitz constant), where sigma is the
kernel moment constant computed by sigma_eta below.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.integrate import quad
from scipy.special import gammaln

from .graph import InvalidParameterError, KernelSpec, WeightGraph
from .solver import LabelAssignment, SolverConfig, il_solve


def sigma_eta(kernel: KernelSpec, p: float, dim: int) -> float:
    """Kernel moment constant (integral of eta(|z|) |z . e1|^p over the
    support ball)^(1/p), via radial quadrature times the closed-form
    angular moment of the sphere."""
    if not kernel.compactly_supported:
        raise InvalidParameterError(
            "kernel must be compactly supported (use the tent kernel)")
    if not p > 1:
        raise InvalidParameterError("p must exceed 1")
    if dim < 1:
        raise InvalidParameterError("dimension must be a positive integer")
    r = kernel.support_radius / kernel.bandwidth  # support of the profile
    radial, _ = quad(lambda t: kernel.profile(t) * t ** (p + dim - 1), 0.0, r,
                     epsabs=0.0, epsrel=1e-10)
    if dim == 1:
        angular = 2.0
        # the radial power above already includes t^{p+d-1} = t^p for d=1
    else:
        # integral of |omega_1|^p over the unit sphere S^{d-1}
        angular = 2.0 * math.pi ** ((dim - 1) / 2.0) * math.exp(
            gammaln((p + 1) / 2.0) - gammaln((p + dim) / 2.0))
    return float((radial * angular) ** (1.0 / p))


def discrete_energy(u, points, kernel: KernelSpec, s: float, p: float,
                    label_indices=None, label_values=None,
                    dim: Optional[int] = None) -> float:
    """Exact evaluation of the scaled discrete energy over all pairs within
    the support radius. Returns +inf if the label constraint is violated."""
    u = np.asarray(u, dtype=float)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] != u.shape[0]:
        points = points.T
    n, d = points.shape
    if dim is not None:
        d = dim  # intrinsic dimension for manifold samples
    if label_indices is not None:
        if not np.array_equal(u[np.asarray(label_indices)],
                              np.asarray(label_values, dtype=float)):
            return math.inf
    r_eta = kernel.support_radius / kernel.bandwidth
    from scipy.spatial import cKDTree
    tree = cKDTree(points)
    pairs = tree.query_pairs(r=s * r_eta, output_type="ndarray")
    row_sums = np.zeros(n)
    if pairs.size:
        i, j = pairs[:, 0], pairs[:, 1]
        dist = np.linalg.norm(points[i] - points[j], axis=1)
        w = kernel.profile(dist / s) / s ** d
        contrib = w * np.abs(u[i] - u[j]) ** p
        np.add.at(row_sums, i, contrib)
        np.add.at(row_sums, j, contrib)
    return float((row_sums.max() / n) ** (1.0 / p) / s)


@dataclass(frozen=True)
class ContinuumProblem:
    """A continuum benchmark with a known closed-form minimizer.

    domain: 'interval' ([0,1]) or 'circle' (unit circle in R^2,
    parameterized by arc length). label_param holds the label locations in
    the domain parameterization; minimizer maps parameters to the optimal
    labeling values; min_energy is its Lipschitz constant.
    """

    domain: str
    g: Callable[[np.ndarray], np.ndarray]
    label_param: np.ndarray
    minimizer: Callable[[np.ndarray], np.ndarray]
    min_energy: float
    volume: float
    intrinsic_dim: int = 1

    def sample(self, n: int, rng: np.random.Generator):
        """n i.i.d. uniform parameters plus the label points appended."""
        if self.domain == "interval":
            params = rng.uniform(0.0, 1.0, size=n)
        elif self.domain == "circle":
            params = rng.uniform(0.0, 2.0 * math.pi, size=n)
        else:
            raise InvalidParameterError(f"unknown domain {self.domain!r}")
        params = np.concatenate([params, np.asarray(self.label_param, dtype=float)])
        return params, self.embed(params)

    def embed(self, params):
        if self.domain == "interval":
            return np.asarray(params, dtype=float)[:, None]
        return np.column_stack([np.cos(params), np.sin(params)])


def interval_benchmark(g0: float = 0.0, g1: float = 1.0) -> ContinuumProblem:
    """Unit interval with endpoint labels; the minimizer is affine."""
    lip = abs(g1 - g0)

    def g(t):
        return g0 + (g1 - g0) * np.asarray(t, dtype=float)

    return ContinuumProblem("interval", g, np.array([0.0, 1.0]), g, lip, 1.0, 1)


def circle_benchmark(v0: float = 0.0, v1: float = 1.0) -> ContinuumProblem:
    """Unit circle with two antipodal labels; the minimizer is linear in
    arc length on both geodesic arcs."""
    lip = abs(v1 - v0) / math.pi

    def minimizer(theta):
        theta = np.mod(np.asarray(theta, dtype=float), 2.0 * math.pi)
        frac = np.minimum(theta, 2.0 * math.pi - theta) / math.pi
        return v0 + (v1 - v0) * frac

    return ContinuumProblem("circle", minimizer, np.array([0.0, math.pi]),
                            minimizer, lip, 2.0 * math.pi, 1)


@dataclass
class BandwidthSchedule:
    """Sample sizes and the bandwidth rule s(n)."""

    n_values: Sequence[int]
    r_adjust: float = 1.0
    dim: int = 1
    s_fn: Optional[Callable[[int], float]] = None

    def s(self, n: int) -> float:
        # exponent 1/(d+1) keeps delta_n / s_n vanishing in every dimension
        # (1/d would decay as fast as the d=1 transportation rate itself)
        if self.s_fn is not None:
            return float(self.s_fn(n))
        return 2.0 * (math.log(n) / n) ** (1.0 / (self.dim + 1)) * self.r_adjust

    @staticmethod
    def delta(n: int, dim: int) -> float:
        """Reference transportation rates per dimension."""
        if dim == 1:
            return math.sqrt(math.log(math.log(n)) / n)
        if dim == 2:
            return math.log(n) ** 0.75 / math.sqrt(n)
        return (math.log(n) / n) ** (1.0 / dim)

    def validate(self):
        """s(n) must vanish while dominating the transportation rate."""
        probes = [int(v) for v in np.geomspace(max(16, min(self.n_values)),
                                               100 * max(self.n_values), 12)]
        s_vals = np.array([self.s(n) for n in probes])
        ratios = np.array([self.delta(n, self.dim) / self.s(n) for n in probes])
        if not (s_vals[-1] < s_vals[0] and s_vals[-1] < 0.5 * s_vals[0]):
            raise InvalidParameterError("bandwidth rule does not vanish")
        # the d=1 ratio decays only like sqrt(lnln/ln): test the trend, not speed
        if not np.all(np.diff(ratios) < 0):
            raise InvalidParameterError(
                "transportation rate does not vanish relative to the bandwidth")


@dataclass
class StudyRow:
    n: int
    trial: int
    s_n: float
    energy: float
    target: float
    rel_error: float
    sup_dist: float
    flagged: bool


def build_full_kernel_graph(points, kernel: KernelSpec, s: float,
                            dim: Optional[int] = None) -> WeightGraph:
    """All pairs within the scaled support radius, w_ij = eta_s(|x_i-x_j|)."""
    from scipy.spatial import cKDTree
    points = np.atleast_2d(points)
    n, d = points.shape
    if dim is not None:
        d = dim
    r_eta = kernel.support_radius / kernel.bandwidth
    tree = cKDTree(points)
    pairs = tree.query_pairs(r=s * r_eta, output_type="ndarray")
    if pairs.size == 0:
        return WeightGraph(sp.csr_matrix((n, n)))
    i, j = pairs[:, 0], pairs[:, 1]
    dist = np.linalg.norm(points[i] - points[j], axis=1)
    w = kernel.profile(dist / s) / s ** d
    rows = np.concatenate([i, j])
    cols = np.concatenate([j, i])
    data = np.concatenate([w, w])
    return WeightGraph(sp.csr_matrix((data, (rows, cols)), shape=(n, n)))


def convergence_study(problem: ContinuumProblem, schedule: BandwidthSchedule,
                      trials: int, seed: int = 0,
                      kernel: Optional[KernelSpec] = None,
                      p: float = 2.0,
                      solver_cfg: Optional[SolverConfig] = None):
    """Sample, solve the discrete problem, and record the energy of its
    minimizer against the predicted limit. One row per (n, trial)."""
    if trials < 1:
        raise InvalidParameterError("trials must be a positive integer")
    if p != 2.0:
        raise InvalidParameterError("the discrete solver covers p = 2 only")
    kernel = kernel or KernelSpec.tent()
    schedule.validate()
    sigma = sigma_eta(kernel, p, problem.intrinsic_dim)
    target = sigma * problem.volume ** (-1.0 / p) * problem.min_energy
    rows = []
    for n in schedule.n_values:
        s = schedule.s(n)
        for trial in range(trials):
            rng = np.random.default_rng(seed + 1000 * trial + n)
            params, pts = problem.sample(n, rng)
            total = params.size
            label_idx = np.arange(total - problem.label_param.size, total)
            label_val = problem.g(problem.label_param)
            graph = build_full_kernel_graph(pts, kernel, s, dim=problem.intrinsic_dim)
            labels = LabelAssignment(label_idx, label_val)
            try:
                cfg = solver_cfg or SolverConfig(alpha=0.0)
                u, _ = il_solve(graph, labels, cfg)
            except Exception:
                rows.append(StudyRow(n, trial, s, math.nan, target, math.nan,
                                     math.nan, True))
                continue
            energy = discrete_energy(u, pts, kernel, s, p,
                                     label_indices=label_idx,
                                     label_values=label_val,
                                     dim=problem.intrinsic_dim)
            rel = abs(energy - target) / target if target else math.nan
            sup = float(np.max(np.abs(u - problem.minimizer(params))))
            rows.append(StudyRow(n, trial, s, energy, target, rel, sup, False))
    return rows


def rows_to_csv(rows, path):
    header = "n,trial,s_n,energy,target,rel_error,sup_dist,flagged"
    arr = [(r.n, r.trial, r.s_n, r.energy, r.target, r.rel_error, r.sup_dist,
            int(r.flagged)) for r in rows]
    np.savetxt(path, arr, delimiter=",", header=header, comments="",
               fmt=["%d", "%d", "%.10g", "%.10g", "%.10g", "%.10g", "%.10g", "%d"])
