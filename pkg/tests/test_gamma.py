import math

import numpy as np
import pytest

from ilgraph.gamma import (BandwidthSchedule, ContinuumProblem,
                           build_full_kernel_graph, circle_benchmark,
                           convergence_study, discrete_energy,
                           interval_benchmark, rows_to_csv, sigma_eta)
from ilgraph.graph import InvalidParameterError, KernelSpec
from ilgraph.solver import SolverConfig


class TestSigmaEta:
    def test_tent_1d_p2_closed_form(self):
        # integral of (1-|t|) t^2 over [-1,1] is 1/6
        val = sigma_eta(KernelSpec.tent(), p=2.0, dim=1)
        assert np.isclose(val, math.sqrt(1.0 / 6.0), rtol=1e-8)

    def test_tent_2d_p2_closed_form(self):
        # 2-D: radial integral of (1-r) r^3 = 1/20, angular moment = pi
        val = sigma_eta(KernelSpec.tent(), p=2.0, dim=2)
        assert np.isclose(val, math.sqrt(math.pi / 20.0), rtol=1e-8)

    def test_rejects_noncompact_kernel(self):
        with pytest.raises(InvalidParameterError):
            sigma_eta(KernelSpec.gaussian(1.0), p=2.0, dim=1)

    def test_rejects_p_not_above_one(self):
        with pytest.raises(InvalidParameterError):
            sigma_eta(KernelSpec.tent(), p=1.0, dim=1)


class TestDiscreteEnergy:
    def test_hand_three_points(self):
        # three points on a line, s = 1, tent kernel, p = 2
        pts = np.array([0.0, 0.4, 1.2])
        u = np.array([0.0, 1.0, 3.0])
        ker = KernelSpec.tent()
        # pairs within s: (0,1) dist .4 w .6, (1,2) dist .8 w .2
        # row sums: x0: .6*1; x1: .6*1 + .2*4 = 1.4; x2: .2*4 = .8
        expect = math.sqrt(1.4 / 3.0)
        assert np.isclose(discrete_energy(u, pts, ker, 1.0, 2.0), expect)

    def test_constraint_violation_is_inf(self):
        pts = np.array([0.0, 1.0])
        val = discrete_energy([0.0, 0.0], pts, KernelSpec.tent(), 1.0, 2.0,
                              label_indices=[1], label_values=[5.0])
        assert val == math.inf

    def test_scaling_in_s(self):
        # doubling u doubles the energy (p-homogeneity of degree 1)
        rng = np.random.default_rng(0)
        pts = rng.uniform(size=12)
        u = rng.standard_normal(12)
        ker = KernelSpec.tent()
        e1 = discrete_energy(u, pts, ker, 0.5, 2.0)
        e2 = discrete_energy(2 * u, pts, ker, 0.5, 2.0)
        assert np.isclose(e2, 2 * e1)


class TestBenchmarks:
    def test_interval_minimizer_is_identity(self):
        prob = interval_benchmark()
        t = np.linspace(0, 1, 5)
        assert np.allclose(prob.minimizer(t), t)
        assert prob.min_energy == 1.0 and prob.volume == 1.0

    def test_circle_minimizer_arc_linear(self):
        prob = circle_benchmark()
        assert np.isclose(prob.minimizer(math.pi / 2), 0.5)
        assert np.isclose(prob.minimizer(3 * math.pi / 2), 0.5)
        assert np.isclose(prob.min_energy, 1.0 / math.pi)

    def test_sample_appends_labels(self):
        prob = interval_benchmark()
        params, pts = prob.sample(10, np.random.default_rng(0))
        assert params.size == 12
        assert np.allclose(params[-2:], [0.0, 1.0])
        assert pts.shape == (12, 1)


class TestBandwidthSchedule:
    def test_default_rule_validates(self):
        BandwidthSchedule([125, 250, 500], dim=1).validate()
        BandwidthSchedule([500, 1000], dim=2).validate()

    def test_constant_rule_rejected(self):
        sched = BandwidthSchedule([100, 200], s_fn=lambda n: 0.3)
        with pytest.raises(InvalidParameterError):
            sched.validate()

    def test_s_decreases(self):
        sched = BandwidthSchedule([0], dim=1)
        assert sched.s(2000) < sched.s(125)


class TestStudy:
    def test_small_study_runs(self, tmp_path):
        prob = interval_benchmark()
        sched = BandwidthSchedule([60, 120], dim=1)
        rows = convergence_study(prob, sched, trials=1, seed=0,
                                 solver_cfg=SolverConfig(alpha=0.0,
                                                         max_outer_iter=200))
        assert len(rows) == 2
        for r in rows:
            assert not r.flagged
            assert math.isfinite(r.rel_error)
            assert np.isclose(r.target, math.sqrt(1 / 6), rtol=1e-8)
        rows_to_csv(rows, tmp_path / "study.csv")
        data = np.loadtxt(tmp_path / "study.csv", delimiter=",", skiprows=1)
        assert data.shape == (2, 8)

    def test_rejects_p_not_two(self):
        with pytest.raises(InvalidParameterError):
            convergence_study(interval_benchmark(),
                              BandwidthSchedule([60], dim=1), trials=1, p=3.0)

    def test_rejects_zero_trials(self):
        with pytest.raises(InvalidParameterError):
            convergence_study(interval_benchmark(),
                              BandwidthSchedule([60], dim=1), trials=0)

    def test_full_kernel_graph_symmetric(self):
        pts = np.random.default_rng(1).uniform(size=(40, 1))
        g = build_full_kernel_graph(pts, KernelSpec.tent(), 0.2, dim=1)
        w = g.weights
        assert (abs(w - w.T) > 1e-12).nnz == 0
