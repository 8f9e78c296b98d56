import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.linalg import expm

from models import cosine, reference_spec, skew_system
from phdelay import (IMPEDANCE, SCATTERING, DiracNodeMatrices, PHSystem, Signal, TimeCoefficient, apply_f,
                     apply_phi, apply_psi, audit_power, build_evolution_family, cayley_equivalence,
                     check_composition_laws, discretize, estimate_wp_constant, initial_state, mild_solution,
                     random_dirac_node, refinement_study, simulate, step_midpoint)
from phdelay.errors import AuditFailure, CoercivityError
from phdelay.operator_model import Term


def scalar_system(a=-1.0):
    z = np.zeros((1, 1))
    return PHSystem(DiracNodeMatrices(np.array([[a]]), z, z, z))


def random_tv_system(rng, n=3, m=2):
    """Random Dirac node with P(t) = I + 0.2 sin(t) S, S symmetric with |S| = 1."""
    nd = random_dirac_node(rng, n, m)
    S = rng.standard_normal((n, n))
    S = S + S.T
    S /= np.linalg.norm(S, 2)
    return PHSystem(nd, TimeCoefficient(np.eye(n), (Term(0.2 * S, "sine", 1.0),)))


# ------------------------------------------------------------------ step_midpoint


def test_step_trivial():
    z = np.zeros((2, 2))
    sys = PHSystem(DiracNodeMatrices(z, np.zeros((2, 1)), np.zeros((1, 2)), np.zeros((1, 1))))
    x = np.array([1.0, -2.0])
    assert_allclose(step_midpoint(sys, 0.0, 0.1, x, [3.0]), x)


def test_step_scalar_decay():
    x1 = step_midpoint(scalar_system(), 0.0, 0.1, np.array([1.0]), [0.0])
    assert x1[0] == pytest.approx(0.95 / 1.05)
    assert x1[0] == pytest.approx(0.904762, abs=1e-6)


def test_scalar_decay_is_second_order():
    errs = []
    for dt in (0.1, 0.05, 0.025):
        traj, _ = simulate(scalar_system(), IMPEDANCE, [1.0], None, 1.0, dt)
        errs.append(abs(traj.states[-1, 0] - math.exp(-1.0)))
    for a, b in zip(errs, errs[1:]):
        assert 3.8 < a / b < 4.2


def test_step_rejects_non_positive_dt():
    with pytest.raises(ValueError):
        step_midpoint(scalar_system(), 0.0, 0.0, np.array([1.0]), [0.0])


# ------------------------------------------------------------------ simulate


def test_zero_run_is_zero():
    sys = discretize(reference_spec(cells=8))
    traj, ledger = simulate(sys, IMPEDANCE, np.zeros(sys.n), None, 0.5, 0.01)
    assert not np.any(traj.states) and not np.any(traj.outputs)
    for arr in (ledger.hamiltonian, ledger.supplied_power, ledger.p_drift, ledger.residual):
        assert not np.any(arr)


def test_trajectory_shapes():
    sys = discretize(reference_spec(cells=8))
    traj, ledger = simulate(sys, IMPEDANCE, np.ones(sys.n), cosine(), 0.5, 0.01)
    N = 50
    assert traj.states.shape == (N + 1, sys.n)
    assert traj.inputs.shape == traj.outputs.shape == (N + 1, 1)
    assert traj.mid_inputs.shape == (N, 1)
    assert ledger.hamiltonian.shape == (N + 1,) and ledger.residual.shape == (N,)
    assert np.all(np.isfinite(traj.states))
    assert traj.dt == pytest.approx(0.01)


def test_scattering_passive_energy_bound(rng):
    nd = random_dirac_node(rng, 4, 2)
    sys = PHSystem(nd)
    x0 = rng.standard_normal(4)
    u = rng.standard_normal((1000, 2))
    traj, ledger = simulate(sys, SCATTERING, x0, u, 1.0, 1e-3)
    lhs = np.linalg.norm(traj.states[-1]) ** 2 + 1e-3 * np.sum(np.abs(traj.mid_outputs) ** 2)
    rhs = np.linalg.norm(x0) ** 2 + 1e-3 * np.sum(u ** 2)
    assert lhs <= rhs * (1 + 1e-10)
    assert audit_power(traj, ledger).passed


def test_reference_power_inequality():
    spec = reference_spec(cells=16)
    sys = discretize(spec)
    x0 = initial_state(sys, Signal.analytic([1.0], [([0.5], "sine", 1.0)]))
    traj, ledger = simulate(sys, IMPEDANCE, x0, cosine(), 5.0, 1e-3)
    audit = audit_power(traj, ledger)
    assert audit.passed
    # R = 100 dissipates strictly for nonzero states
    assert audit.max_residual < 0


def test_skew_equality_second_order():
    sys = skew_system()
    maxres = []
    for dt in (1e-2, 5e-3):
        traj, ledger = simulate(sys, IMPEDANCE, [1.0, 0.5], cosine(), 5.0, dt)
        assert audit_power(traj, ledger, conservative=True).passed
        maxres.append(np.max(np.abs(ledger.residual)))
    assert 3.5 <= maxres[0] / maxres[1] <= 4.5


def test_time_invariant_skew_conserves_energy_exactly():
    sys = skew_system(varying=False)
    traj, ledger = simulate(sys, IMPEDANCE, [1.0, 0.5], None, 5.0, 0.05)
    assert_allclose(ledger.hamiltonian, ledger.hamiltonian[0], rtol=1e-13)


def test_audit_failure_names_step():
    # an energy-producing node violates the power inequality
    z = np.zeros((1, 1))
    sys = PHSystem(DiracNodeMatrices(np.array([[1.0]]), z, z, z))
    traj, ledger = simulate(sys, IMPEDANCE, [1.0], None, 0.1, 0.01)
    with pytest.raises(AuditFailure) as info:
        audit_power(traj, ledger)
    assert info.value.step == 0
    assert not audit_power(traj, ledger, raise_on_failure=False).passed


def test_non_coercive_p_is_rejected():
    sys = PHSystem(scalar_system().node, TimeCoefficient(np.eye(1), (Term(-2 * np.eye(1), "sine", 1.0),)))
    with pytest.raises(CoercivityError):
        simulate(sys, IMPEDANCE, [1.0], None, 3.0, 0.01)


def test_input_array_shape_checked():
    with pytest.raises(ValueError):
        simulate(scalar_system(), IMPEDANCE, [1.0], np.zeros((5, 1)), 1.0, 0.1)


def test_sampled_input_matches_analytic_piecewise_linear():
    sys = skew_system(varying=False)
    ts = np.linspace(0.0, 1.0, 11)
    sampled = Signal.sampled(ts, np.cos(ts)[:, None])
    traj, _ = simulate(sys, IMPEDANCE, [0.0, 0.0], sampled, 1.0, 0.01)
    assert_allclose(traj.mid_inputs[:, 0], np.interp(traj.mid_times, ts, np.cos(ts)))


# ------------------------------------------------------------------ evolution family


def test_family_identity_and_composition(rng):
    fam = build_evolution_family(random_tv_system(rng), 1.0, 0.01)
    assert_allclose(fam.T(0.3, 0.3), np.eye(3))
    assert_allclose(fam.T(0.9, 0.1), fam.T(0.9, 0.4) @ fam.T(0.4, 0.1), atol=1e-14)


def test_family_rejects_bad_times(rng):
    fam = build_evolution_family(random_tv_system(rng), 1.0, 0.01)
    with pytest.raises(ValueError):
        fam.T(0.1, 0.2)
    with pytest.raises(ValueError):
        fam.T(0.105, 0.0)


def test_family_matches_matrix_exponential(rng):
    A = rng.standard_normal((3, 3)) - 2 * np.eye(3)
    z = np.zeros((3, 1))
    sys = PHSystem(DiracNodeMatrices(A, z, z.T, np.zeros((1, 1))))
    errs = []
    for dt in (0.02, 0.01):
        fam = build_evolution_family(sys, 1.0, dt)
        errs.append(np.linalg.norm(fam.T(1.0, 0.0) - expm(A)))
    assert errs[1] < 1e-3
    assert 3.5 < errs[0] / errs[1] < 4.5


def test_operator_families_vanish(rng):
    fam = build_evolution_family(random_tv_system(rng), 0.5, 0.01)
    u0 = np.zeros((50, 2))
    assert not np.any(apply_phi(fam, 0.4, 0.1, u0))
    assert not np.any(apply_f(fam, 0.4, 0.1, u0))
    assert not np.any(apply_psi(fam, 0.4, 0.1, np.zeros(3)))


def test_composition_laws_and_causality(rng):
    fam = build_evolution_family(random_tv_system(rng), 1.0, 0.01)
    for t, s, r in [(0.9, 0.5, 0.2), (0.6, 0.6, 0.1), (0.7, 0.3, 0.3), (1.0, 0.0, 0.0)]:
        rep = check_composition_laws(fam, t, s, r, rng=rng)
        assert rep.max_residual < 1e-10


def test_late_input_does_not_reach_earlier_state(rng):
    fam = build_evolution_family(random_tv_system(rng), 1.0, 0.01)
    u = np.zeros((100, 2))
    u[60:] = rng.standard_normal((40, 2))
    assert not np.any(apply_phi(fam, 0.6, 0.0, u))


def test_mild_solution_matches_simulation(rng):
    sys = random_tv_system(rng)
    x0 = rng.standard_normal(3)
    u = rng.standard_normal((100, 2))
    traj, _ = simulate(sys, IMPEDANCE, x0, u, 1.0, 0.01)
    fam = build_evolution_family(sys, 1.0, 0.01)
    for k in (0, 37, 100):
        x, y = mild_solution(fam, x0, u, k * 0.01)
        assert_allclose(x, traj.states[k], atol=1e-10)
        assert_allclose(y[:k], traj.mid_outputs[:k], atol=1e-10)


def test_scattering_family_composition(rng):
    fam = build_evolution_family(random_tv_system(rng), 0.5, 0.01, SCATTERING, beta=2.0)
    assert check_composition_laws(fam, 0.5, 0.2, 0.1, rng=rng).max_residual < 1e-10


# ------------------------------------------------------------------ well-posedness and Cayley


def test_wp_constant_zero_node(rng):
    z = np.zeros((2, 2))
    sys = PHSystem(DiracNodeMatrices(z, np.zeros((2, 1)), np.zeros((1, 2)), np.zeros((1, 1))))
    K = estimate_wp_constant(sys, 0.1, 0.01, 1, IMPEDANCE, rng=rng)
    assert K == pytest.approx(1.0, abs=1e-15)


def test_wp_constant_reference_example(rng):
    sys = discretize(reference_spec(cells=16, varying=False))
    K = estimate_wp_constant(sys, 1.0, 1e-3, 20, SCATTERING, rng=rng)
    assert K <= 1.01


def test_wp_ratio_impedance_lossless_can_exceed_one(rng):
    # report only: the impedance direction is not norm-bounded by one
    sys = skew_system(varying=False)
    K = estimate_wp_constant(sys, 1.0, 1e-2, 10, IMPEDANCE, rng=rng)
    assert np.isfinite(K) and K > 1.0


def test_cayley_equivalence_reference_example():
    sys = discretize(reference_spec(cells=16))
    x0 = initial_state(sys, Signal.analytic([1.0], [([0.5], "sine", 1.0)]))
    err, imp, scat = cayley_equivalence(sys, x0, cosine(), 5.0, 1e-3)
    assert err < 1e-6
    assert imp.representation == IMPEDANCE and scat.representation == SCATTERING


def test_cayley_equivalence_complex_beta(rng):
    sys = random_tv_system(rng)
    err, _, _ = cayley_equivalence(sys, rng.standard_normal(3), rng.standard_normal((100, 2)), 1.0, 0.01,
                                   beta=1.5 + 0.5j)
    assert err < 1e-10


def test_refinement_slope():
    sys = discretize(reference_spec(cells=8))
    x0 = initial_state(sys, Signal.analytic([1.0], [([0.5], "sine", 1.0)]))
    diffs, slope = refinement_study(sys, IMPEDANCE, x0, cosine(), 1.0, [4e-3, 2e-3, 1e-3, 5e-4])
    assert len(diffs) == 3
    assert 1.8 <= slope <= 2.2
