"""Reference delay parameters and small models shared by the tests."""

import numpy as np

from phdelay import DelaySpec, DiracNodeMatrices, PHSystem, Signal, TimeCoefficient
from phdelay.operator_model import Term


def scalar(v):
    return np.array([[v]], dtype=float)


def reference_spec(cells=16, varying=True, tau=1.0, R=100.0, A1=10.0):
    """H0 = E = 1, A1 = 10, R = 100 with H(t) = 1 + 0.3 sin t (or H = 1)."""
    H = TimeCoefficient(scalar(1.0), (Term(scalar(0.3), "sine", 1.0),)) if varying else None
    return DelaySpec(tau, scalar(1.0), scalar(A1), scalar(0.0), scalar(R), scalar(1.0), H, cells)


def skew_system(varying=True):
    """Lossless two-state model: J = [[0, 1], [-1, 0]], B = C^T = [[1], [0]], D = 0."""
    J = np.array([[0.0, 1.0], [-1.0, 0.0]])
    B = np.array([[1.0], [0.0]])
    node = DiracNodeMatrices(J, B, B.T.copy(), np.zeros((1, 1)))
    P = TimeCoefficient(np.eye(2), (Term(0.3 * np.eye(2), "sine", 1.0),)) if varying else None
    return PHSystem(node, P)


def cosine(freq=2.0, amp=1.0):
    return Signal.analytic([0.0], [([amp], "cosine", freq)])


def _rand(rng, *shape, complex_data=False):
    X = rng.standard_normal(shape)
    return X + 1j * rng.standard_normal(shape) if complex_data else X


def random_spec(rng, k=None, p=None, cells=8, kind="any", complex_data=False):
    """Random delay parameters.

    ``kind`` is ``"any"`` (unconstrained, R drawn around the certificate boundary),
    ``"M"`` (M >= 0 by a Schur complement construction) or ``"N"`` (N >= 0 likewise).
    Eliminating the identity block of N leaves ``2R - H0 - 2EE* - A1 H0^-1 A1* >= 0``.
    """
    k = int(rng.integers(1, 4)) if k is None else k
    p = int(rng.integers(1, 3)) if p is None else p
    L = _rand(rng, k, k, complex_data=complex_data)
    H0 = L @ L.conj().T + 0.1 * np.eye(k)
    A1 = _rand(rng, k, k, complex_data=complex_data) * rng.uniform(0, 3)
    E = _rand(rng, k, p, complex_data=complex_data) * rng.uniform(0, 2)
    S = _rand(rng, k, k, complex_data=complex_data)
    J = S - S.conj().T
    # rank-deficient slack so that some draws sit on the PSD boundary
    V = _rand(rng, k, int(rng.integers(0, k + 1)), complex_data=complex_data)
    slack = V @ V.conj().T
    schur = A1 @ np.linalg.solve(H0, A1.conj().T)
    if kind == "M":
        twoR = H0 + schur + slack
    elif kind == "N":
        twoR = H0 + 2 * E @ E.conj().T + schur + slack
    else:
        twoR = rng.uniform(0.0, 1.5) * (H0 + 2 * E @ E.conj().T + schur) + slack
    R = 0.25 * (twoR + twoR.conj().T)
    # R must stay PSD for a valid spec
    lam = np.linalg.eigvalsh(R)[0]
    if lam < 0:
        R = R - lam * np.eye(k)
    return DelaySpec(1.0, H0, A1, J, R, E, None, cells)
