import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from models import reference_spec, scalar
from phdelay import (DelaySpec, Signal, build_certificates, certify, check_dirac_node, check_scattering_passive,
                     delay_fidelity, discretize, initial_state, simulate, solve_resolvent)
from phdelay.errors import InvalidNodeError, ResolventFailure, StructuralError


def spec_1d(H0=1.0, A1=0.0, J=0.0, R=0.0, E=0.0, cells=4, tau=1.0, H=None):
    return DelaySpec(tau, scalar(H0), scalar(A1), scalar(J), scalar(R), scalar(E), H, cells)


# ------------------------------------------------------------------ spec validation


def test_spec_validation():
    with pytest.raises(InvalidNodeError):
        spec_1d(H0=-1.0)
    with pytest.raises(InvalidNodeError):
        spec_1d(R=-0.1)
    with pytest.raises(InvalidNodeError):
        DelaySpec(1.0, np.eye(2), np.zeros((2, 2)), np.eye(2), np.zeros((2, 2)), np.zeros((2, 1)))
    with pytest.raises(InvalidNodeError):
        spec_1d(tau=0.0)
    with pytest.raises(StructuralError):
        spec_1d(cells=1)
    with pytest.raises(StructuralError):
        DelaySpec(1.0, np.eye(2), np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((3, 1)))


# ------------------------------------------------------------------ certificates


def test_reference_certificates():
    cm = build_certificates(reference_spec())
    assert_allclose(cm.M, [[1, 10], [10, 199]])
    assert_allclose(cm.N, [[1, 10, 0], [10, 198, -1], [0, -1, 1]])
    rep = certify(reference_spec())
    assert rep.impedance_ok and rep.scattering_ok
    # closed form for a symmetric 2x2: (tr - sqrt((a - d)^2 + 4 b^2)) / 2
    assert rep.min_eig_M == pytest.approx((200 - math.sqrt(198 ** 2 + 400)) / 2, abs=1e-9)
    assert rep.min_eig_N > 0
    # cofactor expansion along the last row: 1 * det([[1, 10], [10, 198]]) - 1 * 1 = 98 - 1
    assert np.linalg.det(cm.N) == pytest.approx(97.0, abs=1e-9)


def test_identity_certificate():
    spec = DelaySpec(1.0, np.eye(2), np.zeros((2, 2)), np.zeros((2, 2)), np.eye(2), np.zeros((2, 1)))
    assert_allclose(build_certificates(spec).M, np.eye(4))


def test_necessity_remark():
    rep = certify(spec_1d(H0=3.0, R=1.0))
    assert build_certificates(spec_1d(H0=3.0, R=1.0)).M[1, 1] == -1.0
    assert not rep.impedance_ok


def test_insufficient_damping():
    cm = build_certificates(spec_1d(H0=1.0, R=0.4))
    assert_allclose(cm.M, np.diag([1.0, -0.2]), atol=1e-15)
    assert not certify(spec_1d(H0=1.0, R=0.4)).impedance_ok


def test_certificates_are_hermitian_for_complex_data(rng):
    k = 2
    A1 = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
    E = rng.standard_normal((k, 1)) + 1j * rng.standard_normal((k, 1))
    spec = DelaySpec(1.0, np.eye(k), A1, np.zeros((k, k)), 50 * np.eye(k), E)
    cm = build_certificates(spec)
    assert_allclose(cm.M, cm.M.conj().T)
    assert_allclose(cm.N, cm.N.conj().T)


# ------------------------------------------------------------------ discretization


def test_two_cell_stencil():
    sys = discretize(spec_1d(cells=2))
    assert_allclose(sys.node.A[:2, :3], [[-2, 2, 0], [0, -2, 2]])
    assert_allclose(sys.grid, [-1.0, -0.5])
    assert sys.dxi == 0.5


def test_discrete_structure():
    spec = reference_spec(cells=8)
    sys = discretize(spec)
    n = sys.n
    assert n == 9
    assert_array_equal(sys.node.B[:8], 0)
    assert sys.node.B[8, 0] == 1.0
    assert_allclose(sys.node.C, sys.node.B.T)
    assert sys.node.A[8, 0] == -10.0
    assert sys.node.A[8, 8] == -100.0
    assert_allclose(np.diag(sys.gram), [1 / 8] * 8 + [1.0])
    assert_allclose(sys.P.eval(1.0)[8, 8], 1 + 0.3 * math.sin(1.0))
    assert_allclose(sys.P.eval(1.0)[:8, :8], np.eye(8))


@pytest.mark.parametrize("cells", [2, 4, 16, 64])
def test_reference_discretization_is_dirac_and_scattering_passive(cells):
    sys = discretize(reference_spec(cells=cells))
    d = check_dirac_node(sys.node)
    s = check_scattering_passive(sys.node)
    assert d.is_dirac and d.dissipativity_margin >= -1e-9
    assert s.is_scattering_passive and s.margin >= -1e-9


def test_pure_transport_flushes_profile():
    spec = spec_1d(cells=100)
    sys = discretize(spec)
    history = Signal.analytic([0.0], [([1.0], "polynomial", 1)])  # w0(xi) = xi, so z0 = 0
    x0 = initial_state(sys, history)
    assert x0[-1] == 0.0
    assert_allclose(sys.line(x0)[:, 0], sys.grid)
    traj, _ = simulate(sys, "impedance", x0, None, 1.5, 1e-3)
    k = int(round(1.2 / 1e-3))
    # characteristics oracle: after t = tau the line holds past boundary values, here 0
    assert np.max(np.abs(sys.line(traj.states[k]))) < 5 * sys.dxi


def test_initial_state_compatibility():
    spec = reference_spec(cells=4)
    sys = discretize(spec)
    history = Signal.analytic([2.0], [([1.0], "cosine", 3.0)])
    x0 = initial_state(sys, history)
    assert x0[-1] * spec.H.eval(0.0)[0, 0] == pytest.approx(history(0.0)[0])
    assert_allclose(sys.line(x0)[:, 0], history(sys.grid)[:, 0])


# ------------------------------------------------------------------ resolvent


def test_resolvent_homogeneous_is_zero():
    spec = reference_spec(cells=32)
    sol = solve_resolvent(spec, 10.0, np.zeros((33, 1)), np.zeros(1), np.zeros(1))
    assert not np.any(sol.w) and not np.any(sol.z) and not np.any(sol.e)
    assert sol.residual == 0.0


def test_resolvent_closed_form_without_coupling():
    J = np.array([[0.0, 2.0], [-2.0, 0.0]])
    R = np.diag([1.0, 0.5])
    spec = DelaySpec(1.0, np.eye(2), np.zeros((2, 2)), J, R, np.zeros((2, 1)), cells=32)
    lam = 3.0
    x = np.array([1.0, -2.0])
    sol = solve_resolvent(spec, lam, lambda xi: np.zeros(2), x, np.zeros(1))
    w0 = np.linalg.solve(lam * np.eye(2) - J + R, x)
    assert_allclose(sol.z, w0)
    xi = np.append(discretize(spec).grid, 0.0)[:-1]
    assert_allclose(sol.w, np.exp(lam * xi)[:, None] * w0[None, :])
    assert_allclose(sol.e, 0.0)


def test_resolvent_refinement_on_reference_example():
    residuals = []
    for cells in (100, 200, 400):
        sol = solve_resolvent(reference_spec(cells=cells), 10.0, np.zeros((cells + 1, 1)), np.ones(1), np.zeros(1))
        residuals.append(sol.residual)
    assert residuals[1] < 1e-3
    for a, b in zip(residuals, residuals[1:]):
        assert a / b >= 1.7


def test_resolvent_with_line_forcing_converges():
    v = Signal.analytic([0.5], [([1.0], "sine", 2.0)])
    res = [solve_resolvent(reference_spec(cells=c), 10.0, v, np.ones(1), np.array([0.3])).residual
           for c in (50, 100, 200)]
    assert res[0] > res[1] > res[2]


def test_resolvent_rejects_bad_lambda():
    with pytest.raises(ValueError):
        solve_resolvent(reference_spec(), -1.0, np.zeros((17, 1)), np.zeros(1), np.zeros(1))
    # A1 = diag(-e, 0) makes the boundary matrix diag(0, 1) at lambda = tau = 1
    Z = np.zeros((2, 2))
    spec = DelaySpec(1.0, np.eye(2), np.diag([-math.e, 0.0]), Z, Z, np.zeros((2, 1)), cells=4)
    with pytest.raises(ResolventFailure):
        solve_resolvent(spec, 1.0, np.zeros((5, 2)), np.ones(2), np.zeros(1))


# ------------------------------------------------------------------ delay fidelity


def _fidelity(cells):
    spec = DelaySpec(1.0, scalar(1.0), scalar(0.0), scalar(0.0), scalar(0.0), scalar(1.0),
                     reference_spec().H, cells)
    sys = discretize(spec)
    # (1 + 0.3 sin xi)(1 + sin xi) so that the history is H(xi) z(xi) with z = 1 + sin
    history = Signal.analytic([1.15], [([1.3], "sine", 1.0), ([-0.15], "cosine", 2.0)])
    x0 = initial_state(sys, history)
    e = Signal.analytic([0.0], [([1.0], "cosine", 1.0)])
    traj, _ = simulate(sys, "impedance", x0, e, 2.0, 1e-3)
    return delay_fidelity(sys, traj.times, traj.states)[0]


def test_delay_fidelity_first_order():
    e100, e200 = _fidelity(100), _fidelity(200)
    assert 1.7 <= e100 / e200 <= 2.3
