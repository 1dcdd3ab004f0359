import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ergolab.errors import DegenerateTangent, InvalidParameter
from ergolab.hyperbolicity import (ConeField, ExponentEstimate, LogProduct, classify_measure,
                                   cone_invariance_check, henon_top_exponents, lyapunov_spectrum, lyapunov_top)
from ergolab.maps import PrecisionPolicy, make_system
from ergolab.phase import CirclePoint

CAT = [[2, 1], [1, 1]]
LAM_CAT = math.log((3 + math.sqrt(5)) / 2)
UNSTABLE = (1.0, (math.sqrt(5) - 1) / 2)
STABLE = (1.0, -(math.sqrt(5) + 1) / 2)


def _cat():
    return make_system("toral_automorphism", matrix=CAT)


def test_cat_eigenvalue_oracle():
    # characteristic polynomial x^2 - 3x + 1
    roots = np.roots([1, -3, 1])
    assert math.log(roots.max()) == pytest.approx(LAM_CAT, rel=1e-15)
    assert np.allclose(np.array(CAT) @ UNSTABLE, roots.max() * np.array(UNSTABLE))


def test_log_product_is_exact_for_powers_of_two():
    acc = LogProduct()
    for _ in range(10 ** 5):
        acc.mul(2.0)
    assert acc.mean_log(10 ** 5) == math.log(2.0)


def test_doubling_exponent_is_log2_exactly():
    sys = make_system("doubling")
    assert lyapunov_top(sys, 0.3, 1.0, 1000) == math.log(2)
    rng = np.random.default_rng(0)
    p = CirclePoint.random(rng, 1024)
    assert lyapunov_top(sys, p, 1.0, 900, PrecisionPolicy.exact(1024)) == math.log(2)


def test_rotation_exponent_is_zero_exactly():
    assert lyapunov_top(make_system("rotation", alpha=0.3), 0.1, 2.0, 1000) == 0.0
    est = lyapunov_spectrum(make_system("rotation", alpha=(0.3, 0.1)), (0.2, 0.5), 1000)
    assert est.values == (0.0, 0.0)


def test_zero_vector_rejected():
    with pytest.raises(InvalidParameter):
        lyapunov_top(_cat(), (0.1, 0.2), (0.0, 0.0), 10)


def test_logistic_critical_orbit_is_degenerate():
    with pytest.raises(DegenerateTangent):
        lyapunov_top(make_system("logistic", t=4.0), 0.5, 1.0, 10, transient=0)


def test_cat_top_exponent():
    assert lyapunov_top(_cat(), (0.1234, 0.5678), (0.3, 0.7), 1000) == pytest.approx(LAM_CAT, abs=1e-8)


def test_cat_spectrum_and_sum():
    est = lyapunov_spectrum(_cat(), (0.1234, 0.5678), 1000)
    assert est.values[0] == pytest.approx(LAM_CAT, abs=1e-8)
    assert est.values[1] == pytest.approx(-LAM_CAT, abs=1e-8)
    assert abs(sum(est.values)) <= 1e-10
    assert est.values[0] >= est.values[1]


@pytest.mark.parametrize("a,b", [(1.4, 0.3), (1.2, -0.2), (0.3, 0.5)])
def test_henon_sum_identity(a, b):
    est = lyapunov_spectrum(make_system("henon", a=a, b=b), (0.1, 0.1), 20_000)
    assert sum(est.values) == pytest.approx(math.log(abs(b)), abs=1e-8)


def test_henon_top_matches_vectorized_estimator():
    sys = make_system("henon", a=1.4, b=0.3)
    est = lyapunov_spectrum(sys, (0.0, 0.0), 50_000)
    lam, esc = henon_top_exponents(np.array([1.4]), 0.3, 0.0, 0.0, 50_000)
    assert not esc[0]
    assert lam[0] == pytest.approx(est.values[0], abs=1e-9)
    assert 0.3 < est.values[0] < 0.5


def test_top_exponent_is_generic_in_v0():
    sys = make_system("henon", a=1.4, b=0.3)
    vals = [lyapunov_top(sys, (0.0, 0.0), v, 100_000) for v in [(1, 0), (0, 1), (1, 1), (-0.3, 2.0)]]
    assert max(vals) - min(vals) <= 2e-3
    cat = [lyapunov_top(_cat(), (0.3, 0.1), v, 1000) for v in [(1, 0), (0, 1), (1, 1), (-0.3, 2.0)]]
    assert max(cat) - min(cat) <= 2e-3


@pytest.mark.parametrize("k,matrix", [(2, [[5, 3], [3, 2]]), (3, [[13, 8], [8, 5]])])
def test_iterate_exponent_scales(k, matrix):
    assert (np.linalg.matrix_power(np.array(CAT), k) == matrix).all()
    fk = make_system("toral_automorphism", matrix=matrix)
    lam_k = lyapunov_top(fk, (0.2, 0.3), (1.0, 0.0), 1000)
    lam_1 = lyapunov_top(_cat(), (0.2, 0.3), (1.0, 0.0), 1000)
    assert lam_k == pytest.approx(k * lam_1, abs=1e-8)


def test_exponent_estimate_json():
    est = lyapunov_spectrum(_cat(), (0.1, 0.2), 100)
    d = json.loads(est.to_json())
    assert set(d) >= {"values", "n", "policy"}
    assert d["n"] == 100


# --- cones -------------------------------------------------------------------


def test_cone_half_angle_validation():
    for bad in (0.0, math.pi / 2, -0.1, 2.0):
        with pytest.raises(InvalidParameter):
            ConeField((1.0, 0.0), bad)


def _brute_min_stretch(J, center, beta, m=20001):
    c = np.asarray(center) / np.linalg.norm(center)
    phi = np.linspace(-beta, beta, m)
    base = math.atan2(c[1], c[0])
    v = np.stack([np.cos(base + phi), np.sin(base + phi)])
    return np.linalg.norm(J @ v, axis=0).min()


def _brute_contains(J, center, beta, center_img, m=2001):
    c = np.asarray(center) / np.linalg.norm(center)
    ci = np.asarray(center_img) / np.linalg.norm(center_img)
    base = math.atan2(c[1], c[0])
    phi = np.linspace(-beta, beta, m)
    w = J @ np.stack([np.cos(base + phi), np.sin(base + phi)])
    w /= np.linalg.norm(w, axis=0)
    return bool(np.all(np.abs(ci @ w) >= math.cos(beta) - 1e-12))


def test_cat_cone_around_unstable_direction():
    sample = np.random.default_rng(1).random((50, 2))
    rep = cone_invariance_check(_cat(), ConeField(UNSTABLE, math.radians(30)), sample)
    assert rep["invariant"] and rep["strict"]
    J = np.array(CAT, dtype=float)
    assert rep["min_expansion"] > 1
    assert rep["min_expansion"] == pytest.approx(_brute_min_stretch(J, UNSTABLE, math.radians(30)), rel=1e-6)
    assert _brute_contains(J, UNSTABLE, math.radians(30), UNSTABLE)


def test_cat_cone_around_stable_direction_fails():
    rep = cone_invariance_check(_cat(), ConeField(STABLE, math.radians(30)), [(0.2, 0.3)])
    assert not rep["invariant"]
    assert not _brute_contains(np.array(CAT, float), STABLE, math.radians(30), STABLE)


def test_translation_cones_are_invariant_not_strict():
    sys = make_system("rotation", alpha=(0.3, 0.6))
    rep = cone_invariance_check(sys, ConeField((1.0, 2.0), 0.4), [(0.1, 0.1), (0.5, 0.7)], n=3)
    assert rep["invariant"] and not rep["strict"]
    assert rep["min_expansion"] == pytest.approx(1.0, abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 1.5), st.floats(0, math.pi))
def test_cone_check_agrees_with_brute_force(beta, theta):
    center = (math.cos(theta), math.sin(theta))
    rep = cone_invariance_check(_cat(), ConeField(center, beta), [(0.2, 0.4)])
    brute = _brute_contains(np.array(CAT, float), center, beta, center, m=4001)
    assert rep["invariant"] == brute


def test_cone_bound_on_exponent():
    cone = ConeField(UNSTABLE, math.radians(30))
    rep = cone_invariance_check(_cat(), cone, [(0.3, 0.4)])
    base = math.atan2(UNSTABLE[1], UNSTABLE[0])
    for phi in (-0.5, 0.0, 0.3):
        v = (math.cos(base + phi), math.sin(base + phi))
        lam = lyapunov_top(_cat(), (0.3, 0.4), v, 200, transient=0)
        assert lam >= math.log(rep["min_expansion"])


def test_henon_cone_report_lists_failures():
    sys = make_system("henon", a=1.4, b=0.3)
    rep = cone_invariance_check(sys, ConeField((1.0, 0.0), 0.3), [(0.0, 0.0), (0.5, 0.1)])
    # at x = 0 the derivative kills the horizontal direction
    assert not rep["invariant"]
    assert rep["failures"]


# --- classification -------------------------------------------------------------------


def test_classification_examples():
    assert classify_measure(lyapunov_spectrum(_cat(), (0.1, 0.2), 1000)) == "hyperbolic"
    assert classify_measure(lyapunov_spectrum(make_system("rotation", alpha=0.3), 0.1, 1000)) == "has_zero_exponent"
    assert classify_measure(lyapunov_spectrum(make_system("doubling"), 0.1, 1000)) == "hyperbolic"


def test_classification_default_tolerance():
    est = ExponentEstimate((0.1, -0.1), 10_000, 10_000)
    assert classify_measure(est) == "hyperbolic"  # 5/sqrt(n) = 0.05
    assert classify_measure(est, tol=0.2) == "has_zero_exponent"
