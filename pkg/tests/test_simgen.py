"""Tests for the benchmark truths and simulated datasets."""

import numpy as np
import pytest

from monoproj.simgen import (CURVE_TRUTHS, SURFACE_TRUTHS, curve_truth, equidistant_design,
                             lattice_design, simulate, surface_truth)


class TestTruths:
    @pytest.mark.parametrize("name", sorted(CURVE_TRUTHS))
    def test_curves_non_decreasing(self, name):
        v = curve_truth(name, np.linspace(0.01, 10, 2000))
        assert np.all(np.diff(v) >= 0)

    def test_known_values(self):
        assert curve_truth("flat", 5.0) == 3.0
        assert curve_truth("step", 8.0) == 3.0 and curve_truth("step", 8.01) == 6.0
        assert curve_truth("linear", 10.0) == pytest.approx(3.0)
        assert curve_truth("logistic", 5.0) == pytest.approx(1.5)
        assert curve_truth("sinusoidal", np.pi) == pytest.approx(0.32 * np.pi)
        assert curve_truth("exponential", 5.0) == pytest.approx(0.15)

    @pytest.mark.parametrize("name", sorted(SURFACE_TRUTHS))
    def test_surfaces_bimonotone(self, name):
        g = np.linspace(0, 1, 50)
        S, T = np.meshgrid(g, g, indexing="ij")
        v = surface_truth(name, S, T)
        assert np.all(np.diff(v, axis=0) >= 0) and np.all(np.diff(v, axis=1) >= 0)

    def test_domain_checks(self):
        with pytest.raises(ValueError):
            curve_truth("flat", 0.0)
        with pytest.raises(ValueError):
            surface_truth("additive", 1.5, 0.5)
        with pytest.raises(KeyError):
            curve_truth("nope", 1.0)


class TestDesigns:
    def test_equidistant(self):
        np.testing.assert_allclose(equidistant_design(4), [2.5, 5, 7.5, 10])

    def test_lattice(self):
        X = lattice_design(2, 3)
        assert X.shape == (6, 2)
        np.testing.assert_allclose(X[:3, 0], 0.25)
        np.testing.assert_allclose(X[:3, 1], [1 / 6, 0.5, 5 / 6])


class TestSimulate:
    def test_deterministic(self):
        a = simulate("flat", 100, seed=7)
        b = simulate("flat", 100, seed=7)
        np.testing.assert_array_equal(a.y, b.y)
        assert len(a) == 100

    def test_noise_level(self):
        ds = simulate("linear", 20000, sigma=0.5, seed=1)
        assert np.std(ds.y - ds.f0) == pytest.approx(0.5, rel=0.03)

    def test_surface(self):
        ds = simulate("product", 1024, sigma=0.1, dim=2)
        assert ds.X.shape == (1024, 2)

    def test_uniform_design_in_domain(self):
        ds = simulate("step", 500, design="uniform", seed=3)
        assert ds.X.min() > 0 and ds.X.max() <= 10

    def test_binary(self):
        ds = simulate(lambda s, t: 2 * (s + t) - 2, 400, dim=2, binary=True)
        assert set(np.unique(ds.y)) <= {0.0, 1.0}
        assert np.all(ds.trials == 1)

    def test_bad_lattice(self):
        with pytest.raises(ValueError):
            simulate("additive", 10, dim=2, shape=(3, 3))

    def test_bad_design(self):
        with pytest.raises(ValueError):
            simulate("flat", 10, design="grid")
