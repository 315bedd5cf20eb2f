import numpy as np
import pytest

from chemostokes import cutoff


class TestProfile:
    def test_plateau_one(self):
        assert cutoff.phi(0.5) == 1.0
        assert cutoff.phi(-1.0) == 1.0
        assert cutoff.phi(1.0) == 1.0

    def test_plateau_zero(self):
        assert cutoff.phi(-3.0) == 0.0
        assert cutoff.phi(2.0) == 0.0
        assert cutoff.phi(17.0) == 0.0

    def test_transition_and_evenness(self):
        v = cutoff.phi(1.5)
        assert 0.0 < v < 1.0
        assert cutoff.phi(-1.5) == v
        # symmetric blend: psi(0.5)/(psi(0.5)+psi(0.5)) at the midpoint
        assert v == pytest.approx(0.5)

    def test_monotone_nonincreasing(self):
        xs = np.linspace(0.0, 2.5, 500)
        vals = cutoff.phi(xs)
        assert np.all(np.diff(vals) <= 1e-15)
        assert np.all((vals >= 0.0) & (vals <= 1.0))

    def test_continuously_differentiable_at_junctions(self):
        # difference quotients shrink towards the plateau edges
        h = np.array([1e-2, 1e-3, 1e-4])
        assert np.all(np.abs(cutoff.phi(1.0 + h) - 1.0) / h < 1e-1)
        assert np.all(np.abs(cutoff.phi(2.0 - h)) / h < 1e-1)

    def test_lipschitz_constant_frozen(self):
        xs = np.linspace(1.0, 2.0, 5001)
        slopes = np.abs(np.diff(cutoff.phi(xs)) / np.diff(xs))
        assert slopes.max() <= cutoff.PROFILE_LIPSCHITZ * (1 + 1e-6)


class TestTracker:
    def test_running_sup(self):
        tr = cutoff.RunningSup()
        for t, v in zip([0.0, 0.1, 0.2], [1.0, 3.0, 2.0]):
            cutoff.update(tr, t, v)
        assert tr.current_sup == 3.0

    def test_empty_then_zero(self):
        tr = cutoff.RunningSup()
        cutoff.update(tr, 0.0, 0.0)
        assert tr.current_sup == 0.0

    def test_matches_prefix_max(self, rng):
        vals = rng.uniform(0.0, 5.0, 50)
        tr = cutoff.RunningSup()
        for i, v in enumerate(vals):
            cutoff.update(tr, 0.01 * i, v)
            assert tr.current_sup == vals[:i + 1].max()

    def test_time_regression_rejected(self):
        tr = cutoff.RunningSup()
        tr.update(1.0, 0.5)
        with pytest.raises(cutoff.TimeRegressionError):
            tr.update(0.5, 0.1)


class TestTheta:
    def test_values(self):
        mk = lambda s: cutoff.RunningSup().update(0.0, s)
        assert cutoff.theta(mk(3.0), 4.0) == 1.0
        assert cutoff.theta(mk(9.0), 4.0) == 0.0
        assert 0.0 < cutoff.theta(mk(6.0), 4.0) < 1.0

    def test_kappa_scaled_lipschitz(self, rng):
        kappa = 3.0
        L = cutoff.PROFILE_LIPSCHITZ
        for _ in range(200):
            h1, h2 = rng.uniform(0.0, 3 * kappa, 2)
            t1 = cutoff.theta(cutoff.RunningSup().update(0.0, h1), kappa)
            t2 = cutoff.theta(cutoff.RunningSup().update(0.0, h2), kappa)
            assert abs(t1 - t2) <= (L / kappa) * abs(h1 - h2) + 1e-12

    def test_invalid_kappa(self):
        with pytest.raises(ValueError):
            cutoff.theta(cutoff.RunningSup(), 0.0)


class TestCheckStop:
    def test_first_crossing(self):
        tr = cutoff.RunningSup()
        for t, v in zip([0.1, 0.2, 0.3], [1.0, 2.0, 5.0]):
            tr.update(t, v)
        assert cutoff.check_stop(tr, 4.0) == 0.3

    def test_none_below_threshold(self):
        tr = cutoff.RunningSup()
        for t, v in zip([0.1, 0.2], [1.0, 2.0]):
            tr.update(t, v)
        assert cutoff.check_stop(tr, 4.0) is None

    def test_closed_threshold(self):
        tr = cutoff.RunningSup()
        tr.update(0.5, 4.0)
        assert cutoff.check_stop(tr, 4.0) == 0.5

    def test_monotone_in_kappa(self, rng):
        tr = cutoff.RunningSup()
        for i, v in enumerate(rng.uniform(0.0, 10.0, 100)):
            tr.update(0.01 * i, v)
        stops = [cutoff.check_stop(tr, k) for k in (1.0, 2.0, 4.0, 8.0)]
        previous = -np.inf
        for s in stops:
            t = np.inf if s is None else s
            assert t >= previous
            previous = t


def test_cutoff_product_fold():
    assert cutoff.cutoff_product([1.0, 0.5, 0.5]) == 0.25
    assert cutoff.cutoff_product([]) == 1.0
