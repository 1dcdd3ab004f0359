import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import sparse

from ergolab.errors import InvalidParameter, Unsupported, WeightSumViolation, ZeroMassWindow
from ergolab.phase import (AtomicMeasure, CirclePoint, EmpiricalMeasure, IntervalPartition, Observable,
                           PlanePoint, ProductGrid, TorusPoint, density_ratio, measure_push_grid,
                           observable_mean)


# --- points -------------------------------------------------------------------


def test_circle_point_reduces_and_rounds_down():
    p = CirclePoint.from_real(1.25, 64)
    assert p.exact == Fraction(1, 4)
    assert CirclePoint.from_real(Fraction(1, 3), 60).numer == (1 << 60) // 3
    assert CirclePoint.from_real(-0.25, 60).value == 0.75


def test_circle_point_requires_53_bits():
    with pytest.raises(InvalidParameter):
        CirclePoint(0, 52)


def test_circle_point_arithmetic_is_mod_one():
    a = CirclePoint.from_real(0.75, 80)
    b = CirclePoint.from_real(0.5, 80)
    assert (a + b).exact == Fraction(1, 4)
    assert (b - a).exact == Fraction(3, 4)
    assert a.times(3).exact == Fraction(1, 4)
    assert a.distance(CirclePoint.from_real(0.125, 80)) == Fraction(3, 8)


def test_circle_point_random_uses_full_precision():
    rng = np.random.default_rng(3)
    p = CirclePoint.random(rng, 1024)
    assert p.precision_bits == 1024
    assert 0 <= p.numer < 1 << 1024
    assert p.numer.bit_length() > 1000


def test_torus_and_plane_points():
    assert TorusPoint((1.25, -0.5)).coords == (0.25, 0.5)
    with pytest.raises(InvalidParameter):
        PlanePoint(float("nan"), 0.0)
    assert np.allclose(np.asarray(PlanePoint(1.0, 2.0)), [1.0, 2.0])


# --- partitions -------------------------------------------------------------------


def test_partition_validation_and_locate():
    with pytest.raises(InvalidParameter):
        IntervalPartition(np.array([0.0, 0.5, 0.5, 1.0]))
    g = IntervalPartition.dyadic(3)
    assert g.n_cells == 8
    assert list(g.locate(np.array([0.0, 0.124, 0.125, 0.999]))) == [0, 0, 1, 7]
    assert g.locate(np.array([1.0]))[0] == -1


def test_product_grid_locate_is_row_major():
    g = ProductGrid.dyadic(2)
    idx = g.locate(np.array([[0.1, 0.1], [0.1, 0.3], [0.3, 0.1], [0.9, 0.9]]))
    assert list(idx) == [0, 1, 4, 15]


# --- observables -------------------------------------------------------------------


def test_observable_mean_examples():
    assert observable_mean(Observable.cos_mode(1)) == 0.0
    assert observable_mean(Observable.constant(1.0)) == 1.0
    obs = Observable.trig(cos=(3.0, 1.0), sin=(0.0, 0.0, 0.5))
    assert observable_mean(obs) == 3.0


def test_observable_mean_rejects_grid_functions():
    g = IntervalPartition.dyadic(2)
    with pytest.raises(Unsupported):
        observable_mean(Observable.from_function(lambda x: x, g))


def test_trig_evaluation_matches_formula():
    obs = Observable.trig(cos=(3.0, 1.0), sin=(0.0, 0.0, 0.5))
    x = np.linspace(0, 1, 17)
    ref = 3 + np.cos(2 * np.pi * x) + 0.5 * np.sin(4 * np.pi * x)
    assert np.allclose(obs(x), ref, atol=1e-14)


@given(st.floats(min_value=-50, max_value=50, allow_nan=False))
def test_trig_evaluation_is_periodic(x):
    obs = Observable.trig(cos=(0.2, 1.0, -0.3), sin=(0.0, 0.7, 0.0, 1.1))
    assert abs(float(obs(x)) - float(obs(x + 1.0))) <= 1e-15 * max(1.0, abs(x)) * 10 + 1e-15


def test_observable_json_round_trip():
    g = IntervalPartition.dyadic(3)
    for obs in (Observable.trig(cos=(1.0, 2.0), sin=(0.0, 3.0), axis=1),
                Observable.coordinate(1),
                Observable.from_function(np.sin, g)):
        back = Observable.from_json(obs.to_json())
        pts = np.random.default_rng(0).random((5, 2))
        assert np.allclose(back(pts, dim=2) if obs.kind != "grid_function" else back(pts[:, 0]),
                           obs(pts, dim=2) if obs.kind != "grid_function" else obs(pts[:, 0]))


# --- measures -------------------------------------------------------------------


def test_density_ratio_examples():
    g = IntervalPartition.dyadic(6)
    mu = EmpiricalMeasure.uniform(g)
    B = (0.25, 0.75)
    assert density_ratio(B, B, mu) == pytest.approx(1.0)
    assert density_ratio((0.0, 0.2), B, mu) == 0.0
    # left half of B under uniform mass: exact cell count oracle
    assert abs(density_ratio((0.25, 0.5), B, mu) - 0.5) <= 1 / g.n_cells


def test_density_ratio_zero_mass_window():
    g = IntervalPartition.dyadic(3)
    mu = EmpiricalMeasure(g, np.array([1.0, 0, 0, 0, 0, 0, 0, 0]))
    with pytest.raises(ZeroMassWindow):
        density_ratio((0.0, 0.5), (0.5, 1.0), mu)


def test_density_ratio_refinement_consistency():
    rng = np.random.default_rng(1)
    fine = IntervalPartition.dyadic(6)
    mass = rng.random(64)
    mu = EmpiricalMeasure(fine, mass / mass.sum())
    coarse = IntervalPartition.dyadic(3)
    mu_c = EmpiricalMeasure(coarse, mu.mass.reshape(8, 8).sum(1))
    for a, b in [(0.0, 0.5), (0.125, 0.875), (0.25, 0.375)]:
        assert density_ratio((0.0, 0.25), (a, b), mu) == pytest.approx(
            density_ratio((0.0, 0.25), (a, b), mu_c), abs=1e-12)


def test_normalization_is_idempotent():
    g = ProductGrid.dyadic(2)
    mu = EmpiricalMeasure(g, np.arange(16.0))
    n1 = mu.normalized()
    assert n1.total == pytest.approx(1.0, abs=1e-12)
    assert np.array_equal(n1.normalized().mass, n1.mass)


def test_measure_push_identity_and_shift():
    g = IntervalPartition.dyadic(4)
    rng = np.random.default_rng(2)
    mu = EmpiricalMeasure(g, rng.random(16)).normalized()
    same = measure_push_grid(mu, sparse.identity(16, format="csr"))
    assert np.array_equal(same.mass, mu.mass)
    shift = {i: [((i + 1) % 16, 1.0)] for i in range(16)}
    moved = measure_push_grid(mu, shift)
    assert moved.total == pytest.approx(1.0, abs=1e-9)
    assert np.allclose(moved.mass, np.roll(mu.mass, 1))


def test_doubling_cell_map_preserves_uniform():
    # cell i of a 2^k grid lands in cells 2i mod 2^k and 2i+1 mod 2^k with weight 1/2 each
    k = 6
    m = 1 << k
    cell_map = {i: [((2 * i) % m, 0.5), ((2 * i + 1) % m, 0.5)] for i in range(m)}
    mu = EmpiricalMeasure.uniform(IntervalPartition.dyadic(k))
    out = measure_push_grid(mu, cell_map)
    assert np.allclose(out.mass, 1.0 / m, atol=1e-15)


def test_measure_push_rejects_bad_rows():
    g = IntervalPartition.dyadic(2)
    mu = EmpiricalMeasure.uniform(g)
    with pytest.raises(WeightSumViolation):
        measure_push_grid(mu, {0: [(1, 0.5)], 1: [(1, 1.0)], 2: [(2, 1.0)], 3: [(3, 1.0)]})


def test_empirical_measure_csv_round_trip():
    g = IntervalPartition.dyadic(3)
    mu = EmpiricalMeasure.from_samples(np.random.default_rng(4).random(100), g)
    text = mu.to_csv()
    assert text.splitlines()[0] == "cell_index,left_endpoint,mass"
    back = EmpiricalMeasure.from_csv(text, g)
    assert np.array_equal(back.mass, mu.mass)


@settings(max_examples=30)
@given(st.lists(st.floats(0, 0.999999), min_size=1, max_size=50))
def test_from_samples_is_normalized(xs):
    mu = EmpiricalMeasure.from_samples(np.array(xs), IntervalPartition.dyadic(4))
    assert mu.total == pytest.approx(1.0, abs=1e-12)
    assert np.all(mu.mass >= 0)


def test_atomic_measure_weights():
    m = AtomicMeasure([[0.0, 0.0], [0.5, 0.0]], [1.0, 3.0])
    assert np.allclose(m.weights, [0.25, 0.75])
    assert math.isclose(m.weights.sum(), 1.0)
