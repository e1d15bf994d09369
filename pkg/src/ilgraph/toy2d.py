"""The two-dimensional interpolation benchmark: three labeled points over
a regular grid on [0,1]^2, label values generated by sin(x)cos(y)."""

import math
from dataclasses import dataclass

import numpy as np

from .graph import KernelSpec, PointCloud, WeightGraph, knn_graph
from .solver import (LabelAssignment, SolverConfig, gl_solve, il_solve,
                     nonlocal_inf_metric, wnll_solve)

LABEL_POINTS = np.array([
    [math.sqrt(2) / 2, 1 - math.sqrt(3) / 10],
    [math.sqrt(2) / 10, math.sqrt(5) / 20],
    [math.sqrt(3) / 3, math.sqrt(11) / 4],
])


def generating_function(points):
    points = np.atleast_2d(points)
    return np.sin(points[:, 0]) * np.cos(points[:, 1])


@dataclass
class ToyProblem:
    graph: WeightGraph
    labels: LabelAssignment
    points: np.ndarray


def build_toy2d(grid: int = 101, sigma: float = 0.02, k: int = 10) -> ToyProblem:
    """Grid of (grid x grid) unlabeled points plus the three labeled points
    appended at the end; gaussian weights truncated to k nearest neighbors."""
    axis = np.linspace(0.0, 1.0, grid)
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    pts = np.vstack([pts, LABEL_POINTS])
    labeled = np.arange(pts.shape[0] - LABEL_POINTS.shape[0], pts.shape[0])
    labels = LabelAssignment(labeled, generating_function(LABEL_POINTS))
    graph = knn_graph(PointCloud(pts), k, KernelSpec.gaussian(sigma))
    return ToyProblem(graph, labels, pts)


def run_toy2d(problem: ToyProblem, methods=("gl", "wnll", "il"),
              cfg: SolverConfig = None):
    """Solve with the requested methods; returns per-method metric values
    plus the metric of the generating function, and IL diagnostics."""
    cfg = cfg or SolverConfig(alpha=0.0)
    metrics = {"generating": nonlocal_inf_metric(
        generating_function(problem.points), problem.graph)}
    solutions = {}
    diagnostics = None
    for method in methods:
        if method == "gl":
            u = gl_solve(problem.graph, problem.labels, cfg)
        elif method == "wnll":
            u = wnll_solve(problem.graph, problem.labels, cfg)
        elif method == "il":
            u, diagnostics = il_solve(problem.graph, problem.labels, cfg)
        else:
            raise ValueError(f"unknown method {method!r}")
        solutions[method] = u
        metrics[method] = nonlocal_inf_metric(u, problem.graph)
    return metrics, solutions, diagnostics
