"""Label grid, discretized-Gaussian targets and the cross-entropy loss."""

import numpy as np
import pytest

from hremit import GridDist, LabelGrid, cross_entropy, entropy, gaussian_target
from hremit.errors import ConfigError

GRID = LabelGrid()


class TestLabelGrid:
    def test_geometry(self):
        assert GRID.bins == 64
        assert GRID.width == pytest.approx(2.8125)
        assert GRID.centers[0] == pytest.approx(30.0 + 2.8125 / 2)
        assert GRID.centers[-1] == pytest.approx(210.0 - 2.8125 / 2)

    def test_contains(self):
        assert GRID.contains(30.0)
        assert GRID.contains(209.999)
        assert not GRID.contains(210.0)
        assert not GRID.contains(29.9)

    def test_invalid(self):
        with pytest.raises(ConfigError):
            LabelGrid(bins=1)
        with pytest.raises(ConfigError):
            LabelGrid(y_min=100.0, y_max=100.0)


class TestGridDist:
    def test_validation(self):
        with pytest.raises(ConfigError):
            GridDist(GRID, np.ones(64))  # sums to 64
        with pytest.raises(ConfigError):
            GridDist(GRID, np.ones(10) / 10)
        neg = np.full(64, 1.0 / 64)
        neg[0] = -neg[0]
        with pytest.raises(ConfigError):
            GridDist(GRID, neg)

    def test_immutable(self):
        d = GridDist(GRID, np.full(64, 1.0 / 64))
        with pytest.raises(ValueError):
            d.probs[0] = 1.0


class TestGaussianTarget:
    def test_mean_close_to_label(self):
        for y in (45.0, 90.0, 120.0, 180.0):
            t = gaussian_target(GRID, y, 1.5)
            assert abs(float(GRID.centers @ t.probs) - y) <= 0.06

    def test_narrow_sigma_is_one_hot(self):
        t = gaussian_target(GRID, 90.0, 1e-9)
        assert t.probs.max() == pytest.approx(1.0)
        assert GRID.centers[t.probs.argmax()] == pytest.approx(90.46875)

    def test_wider_sigma_spreads(self):
        narrow = gaussian_target(GRID, 120.0, 1.0)
        wide = gaussian_target(GRID, 120.0, 5.0)
        assert entropy(wide) > entropy(narrow)

    def test_errors(self):
        with pytest.raises(ConfigError):
            gaussian_target(GRID, 120.0, 0.0)
        with pytest.raises(ConfigError):
            gaussian_target(GRID, 500.0, 1.5)


def one_hot(i: int) -> GridDist:
    p = np.zeros(64)
    p[i] = 1.0
    return GridDist(GRID, p)


UNIFORM = GridDist(GRID, np.full(64, 1.0 / 64))


class TestEntropy:
    def test_uniform(self):
        assert entropy(UNIFORM) == pytest.approx(np.log(64), abs=1e-12)

    def test_one_hot(self):
        assert entropy(one_hot(13)) == 0.0


class TestCrossEntropy:
    def test_self_equals_entropy(self):
        targets = [
            UNIFORM,
            one_hot(0),
            gaussian_target(GRID, 120.0, 1.5),
            gaussian_target(GRID, 42.0, 3.0),
        ]
        for t in targets:
            assert abs(cross_entropy(t, t) - entropy(t)) <= 1e-9

    def test_one_hot_vs_uniform(self):
        assert cross_entropy(one_hot(20), UNIFORM) == pytest.approx(np.log(64), abs=1e-12)

    def test_matches_direct_summation(self):
        t = gaussian_target(GRID, 120.0, 1.5)
        q = gaussian_target(GRID, 123.0, 1.5)
        direct = -sum(
            p * np.log(max(v, 1e-12)) for p, v in zip(t.probs, q.probs)
        )
        assert cross_entropy(t, q) == pytest.approx(direct, abs=1e-12)

    def test_gibbs_inequality(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            p = rng.dirichlet(np.full(64, 0.5))
            q = rng.dirichlet(np.full(64, 0.5))
            t, pred = GridDist(GRID, p), GridDist(GRID, q)
            assert cross_entropy(t, pred) >= entropy(t) - 1e-12

    def test_floor_caps_surprise(self):
        # predicted assigns (floored) zero where the target has mass
        loss = cross_entropy(one_hot(5), one_hot(6))
        assert loss == pytest.approx(-np.log(1e-12))

    def test_grid_mismatch(self):
        other = LabelGrid(bins=32)
        with pytest.raises(ConfigError):
            cross_entropy(UNIFORM, GridDist(other, np.full(32, 1.0 / 32)))
