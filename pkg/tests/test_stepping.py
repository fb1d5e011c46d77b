import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mbpcn.mobility import constant_mobility, degenerate_mobility
from mbpcn.oracle import assemble_dh
from mbpcn.scheme import SchemeParams
from mbpcn.stepping import (
    COLUMNS,
    AdaptiveParams,
    MBPViolation,
    TimeGrid,
    discrete_energy,
    perturbed_mesh,
    run,
    run_adaptive,
)


@pytest.mark.parametrize("value,expected", [(1.0, 0.0), (-1.0, 0.0), (0.0, 0.25)])
def test_energy_of_constant_states(value, expected):
    assert discrete_energy(np.full((8, 8), value), 1 / 8, 0.05) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("m", [2, 5, 8])
def test_energy_matches_kronecker_form(m):
    rng = np.random.default_rng(m)
    phi = rng.uniform(-1, 1, (m, m))
    h, eps = 1 / m, 0.07
    v = phi.ravel()
    ref = -0.5 * h * h * eps**2 * v @ assemble_dh(m, h) @ v + h * h * np.sum(0.25 * (1 - v**2) ** 2)
    assert discrete_energy(phi, h, eps) == pytest.approx(ref, rel=1e-12)


def test_time_grid_basics():
    g = TimeGrid([0.5, 0.25, 0.25])
    assert g.horizon == 1.0 and g.max_step == 0.5 and len(g) == 3
    np.testing.assert_array_equal(g.times, [0, 0.5, 0.75, 1.0])
    np.testing.assert_array_equal(g.ratios, [0.5, 1.0])
    with pytest.raises(ValueError):
        TimeGrid([0.1, 0.0])
    with pytest.raises(ValueError):
        TimeGrid([])


def test_perturbed_mesh_zero_amplitude_is_uniform():
    np.testing.assert_array_equal(perturbed_mesh(8, 0.0).step_sizes, np.full(8, 1 / 8))


def test_perturbed_mesh_deterministic():
    np.testing.assert_array_equal(perturbed_mesh(10, 0.4, 3).step_sizes, perturbed_mesh(10, 0.4, 3).step_sizes)
    assert not np.array_equal(perturbed_mesh(10, 0.4, 3).step_sizes, perturbed_mesh(10, 0.4, 4).step_sizes)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 300), st.floats(0.0, 0.9), st.integers(0, 2**63), st.floats(0.01, 1e4))
def test_perturbed_mesh_properties(n, amp, seed, horizon):
    g = perturbed_mesh(n, amp, seed, horizon)
    assert len(g) == n and np.all(g.step_sizes > 0)
    assert abs(g.horizon - horizon) <= 1e-12 * horizon
    lo, hi = (1 - amp) / (1 + amp), (1 + amp) / (1 - amp)
    assert np.all((g.ratios >= lo * (1 - 1e-12)) & (g.ratios <= hi * (1 + 1e-12)))


def test_adaptive_formula():
    ap = AdaptiveParams(1e-5, 0.1, 1e5)
    assert ap.next_step(0.0) == 0.1
    assert ap.next_step(0.01) == pytest.approx(0.1 / math.sqrt(11), rel=1e-14)
    assert ap.next_step(1e9) == 1e-5


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-8, 1.0), st.floats(1.0, 100.0), st.floats(1e-3, 1e8), st.floats(-1e6, 1e6))
def test_adaptive_step_stays_in_range(tau_min, factor, alpha, rate):
    ap = AdaptiveParams(tau_min, tau_min * factor, alpha)
    tau = ap.next_step(rate)
    assert ap.tau_min <= tau <= ap.tau_max


@pytest.mark.parametrize("args", [(0.0, 1.0, 1.0), (0.2, 0.1, 1.0), (0.1, 0.2, 0.0)])
def test_adaptive_params_validation(args):
    with pytest.raises(ValueError):
        AdaptiveParams(*args)


def test_zero_state_run():
    rec = run(np.zeros((6, 6)), perturbed_mesh(5, 0.4, 1), 1 / 6, SchemeParams(0.1, 2.0), constant_mobility())
    assert rec.status == "completed" and len(rec.rows) == 6
    assert all(r.energy == pytest.approx(0.25) and r.sup_norm == 0 for r in rec.rows)
    assert rec.rows[0] == (0, 0.0, 0.0, 0.0, rec.rows[0].energy, 0, 0, 1.0)
    assert rec.column("step").tolist() == list(range(6))


def test_record_columns_and_monitors():
    assert COLUMNS == ("step", "t", "tau", "sup_norm", "energy", "pred_iters", "corr_iters", "mbp_margin")
    rng = np.random.default_rng(0)
    rec = run(rng.uniform(-0.5, 0.5, (8, 8)), TimeGrid.uniform(4, 1.0), 1 / 8, SchemeParams(0.1, 2.0, 1.0), constant_mobility())
    np.testing.assert_allclose(rec.column("t"), [0, 0.25, 0.5, 0.75, 1.0])
    np.testing.assert_allclose(rec.column("mbp_margin"), 1 - rec.column("sup_norm"))
    assert np.all(rec.column("corr_iters")[1:] > 0)
    np.testing.assert_array_equal(rec.final_state.shape, (8, 8))


def test_explosive_configuration_reports_blowup():
    # no stabilization and enormous steps: explicit cubic growth overflows
    rec = run(np.full((4, 4), 0.5), TimeGrid.uniform(10, 1000.0), 0.25, SchemeParams(0.1, 0.0, 0.0), constant_mobility())
    assert rec.blew_up and rec.blowup_step is not None
    assert all(math.isfinite(r.energy) for r in rec.rows)


def test_strict_mbp_raises():
    phi = np.full((4, 4), 0.5)
    with pytest.raises(MBPViolation) as info:
        run(phi, TimeGrid.uniform(3, 300.0), 0.25, SchemeParams(0.1, 0.0, 0.0), constant_mobility(), strict_mbp=True)
    assert info.value.record.rows[-1].sup_norm > 1


def test_adaptive_run_lands_on_horizon():
    rng = np.random.default_rng(2)
    ap = AdaptiveParams(1e-3, 0.05, 1e3)
    rec = run_adaptive(rng.uniform(-0.1, 0.1, (8, 8)), 0.5, ap, 1 / 8, SchemeParams(0.05, 0.8, 0.5), degenerate_mobility())
    assert rec.status == "completed"
    assert rec.rows[-1].t == 0.5
    taus = rec.column("tau")[1:]
    assert taus[0] == ap.tau_min
    assert np.all(taus >= ap.tau_min * (1 - 1e-12)) and np.all(taus <= ap.tau_max * (1 + 1e-12))
    assert np.all(np.diff(rec.column("t")) > 0)


def test_adaptive_stop_predicate():
    ap = AdaptiveParams(0.01, 0.01, 1.0)
    rec = run_adaptive(np.zeros((4, 4)), 1.0, ap, 0.25, SchemeParams(0.1, 2.0), constant_mobility(), stop=lambda t, phi: t >= 0.05)
    assert rec.status == "stopped" and rec.rows[-1].t == pytest.approx(0.05)
