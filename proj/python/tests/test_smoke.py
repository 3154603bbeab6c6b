"""Smoke tests over the python bindings: closed forms, a sampling run, and
table persistence. The extension module is built by CMake; its directory is
put on PYTHONPATH by the test runner."""

import math
import statistics

import pytest

recfg = pytest.importorskip("_recfg", reason="extension module not on PYTHONPATH (build it first)")


def test_limit_coefficient_special_values():
    assert recfg.phi_limit(1.0) == pytest.approx(1.0, abs=1e-12)
    assert recfg.phi_limit(3.0) == pytest.approx(2.0, abs=1e-12)
    assert recfg.phi_limit(5.0) == pytest.approx(7.0 / 3.0, abs=1e-12)
    assert recfg.phi_closed_odd(1) == pytest.approx(2.0, abs=1e-12)
    assert abs(recfg.phi_recurrence_residual(1.75)) < 1e-10
    assert recfg.phi_bounds_check(4.0)


def test_guided_law_closed_forms():
    law = recfg.cfg_toy_distribution(2.0, 99.0)
    assert law["mean_coeff"] == pytest.approx(recfg.phi_finite(2.0, 99.0), abs=1e-15)
    assert law["variance"] == pytest.approx(0.505, abs=1e-12)
    assert recfg.recfg_variance(2.0, 0.0, 99.0) == pytest.approx(0.01, abs=1e-15)


def test_sampler_matches_the_closed_form_law():
    xs = recfg.ddim_sample(gamma=2.0, nfe=64, batch=4000, seed=7)
    assert len(xs) == 4000
    mean = statistics.fmean(xs)
    var = statistics.variance(xs)
    law = recfg.cfg_toy_distribution(2.0, 99.0)
    # 64 steps leave a small discretization gap; the bands cover it plus
    # four standard errors of this batch size.
    assert abs(mean - law["mean_coeff"]) < 0.06
    assert abs(var - law["variance"]) < 0.08


def test_sampler_determinism_and_unguided_mean():
    a = recfg.ddim_sample(gamma=1.0, nfe=32, batch=2000, seed=11)
    b = recfg.ddim_sample(gamma=1.0, nfe=32, batch=2000, seed=11, workers=4)
    assert a == b  # worker count never changes results
    assert abs(statistics.fmean(a) - 1.0) < 0.07


def test_table_build_query_roundtrip():
    blob = recfg.build_table_json(T=3.0, nfe=8, n_per_condition=20000, seed=5)
    assert recfg.table_roundtrip_ok(blob)
    g0 = recfg.gamma0_at(blob, 2.0, "1", 0, "strict")
    assert g0 <= 0.0  # strict clamping keeps the complementary weight feasible
    assert abs(g0) < 0.2
    raw = recfg.gamma0_at(blob, 2.0, "1", 0, "off")
    assert abs(raw) < 0.2
