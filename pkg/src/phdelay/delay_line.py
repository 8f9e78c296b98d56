"""Delay system with a transport-line state, its certificates and its discretization.

The delay ``-A1 H(t - tau) z(t - tau)`` is realised by a line ``w(t, xi)`` on
``(-tau, 0)`` that transports ``H(t) z(t)`` from ``xi = 0`` towards ``xi = -tau``.
The line is discretized by first-order upwinding on the nodes
``xi_i = -tau + i * dxi`` (``i = 0..m-1``); the inflow node ``xi = 0`` is the
``z``-slot of the node argument ``P(t) x``, so ``w(t, 0) = H(t) z(t)`` holds
exactly and ``w(t, -tau)`` is read from node 0 without extrapolation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidNodeError, ResolventFailure, StructuralError
from .operator_model import (DiracNodeMatrices, PHSystem, TimeCoefficient, as_matrix,
                             block_diag, check_coercivity, hermitian_part)
from .signals import Signal

PSD_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class DelaySpec:
    """Physical parameters of the delay system plus the line resolution ``cells``."""

    tau: float
    H0: np.ndarray
    A1: np.ndarray
    J: np.ndarray
    R: np.ndarray
    E: np.ndarray
    H: TimeCoefficient | None = None
    cells: int = 32

    def __post_init__(self):
        if not self.tau > 0:
            raise InvalidNodeError(f"tau must be positive, got {self.tau}")
        H0 = as_matrix(self.H0, "H0")
        k = H0.shape[0]
        mats = {"H0": H0}
        for name in ("A1", "J", "R"):
            mats[name] = as_matrix(getattr(self, name), name, (k, k))
        E = as_matrix(self.E, "E")
        if E.shape[0] != k:
            raise StructuralError(f"E must have {k} rows, got {E.shape[0]}")
        H = TimeCoefficient(np.eye(k)) if self.H is None else self.H
        if H.shape != (k, k):
            raise StructuralError(f"H(t) must be {k}x{k}")
        J, R = mats["J"], mats["R"]
        scale = max(1.0, np.linalg.norm(J), np.linalg.norm(R), np.linalg.norm(H0))
        if np.linalg.norm(J + J.conj().T) > 1e-12 * scale:
            raise InvalidNodeError("J must be skew-adjoint")
        if np.linalg.norm(R - R.conj().T) > 1e-12 * scale:
            raise InvalidNodeError("R must be self-adjoint")
        if np.linalg.eigvalsh(hermitian_part(R))[0] < -PSD_RTOL * scale:
            raise InvalidNodeError("R must be positive semidefinite")
        if np.linalg.norm(H0 - H0.conj().T) > 1e-12 * scale or np.linalg.eigvalsh(hermitian_part(H0))[0] <= 0:
            raise InvalidNodeError("H0 must be self-adjoint positive definite")
        if int(self.cells) < 2:
            raise StructuralError(f"need at least 2 cells, got {self.cells}")
        for name, value in mats.items():
            object.__setattr__(self, name, value)
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "tau", float(self.tau))
        object.__setattr__(self, "cells", int(self.cells))

    @property
    def z_dim(self) -> int:
        return self.H0.shape[0]

    @property
    def port_dim(self) -> int:
        return self.E.shape[1]

    def with_cells(self, cells: int) -> "DelaySpec":
        return DelaySpec(self.tau, self.H0, self.A1, self.J, self.R, self.E, self.H, cells)

    def check_horizon(self, horizon: float, samples: int = 257):
        return check_coercivity(self.H, horizon, samples)


@dataclass(frozen=True, eq=False)
class DiscreteSystem(PHSystem):
    """Upwind discretization: state ``(w_0, ..., w_{m-1}, z)``."""

    grid: np.ndarray | None = None
    spec: DelaySpec | None = None

    @property
    def cells(self) -> int:
        return len(self.grid)

    @property
    def dxi(self) -> float:
        return self.spec.tau / self.cells

    def line(self, x: np.ndarray) -> np.ndarray:
        """Line values, shape ``(..., cells, z_dim)``."""
        k = self.spec.z_dim
        return x[..., : self.cells * k].reshape(*x.shape[:-1], self.cells, k)

    def z(self, x: np.ndarray) -> np.ndarray:
        return x[..., self.cells * self.spec.z_dim:]


@dataclass(frozen=True, eq=False)
class CertificateMatrices:
    M: np.ndarray
    N: np.ndarray


@dataclass(frozen=True)
class CertificationReport:
    impedance_ok: bool
    scattering_ok: bool
    min_eig_M: float
    min_eig_N: float


def build_certificates(spec: DelaySpec) -> CertificateMatrices:
    H0, A1, R, E = spec.H0, spec.A1, spec.R, spec.E
    k, p = spec.z_dim, spec.port_dim
    A1h = A1.conj().T
    M = np.block([[H0, A1h], [A1, 2 * R - H0]])
    N = np.block([
        [H0, A1h, np.zeros((k, p))],
        [A1, 2 * R - H0 - E @ E.conj().T, -E],
        [np.zeros((p, k)), -E.conj().T, np.eye(p)],
    ])
    return CertificateMatrices(hermitian_part(M), hermitian_part(N))


def _psd(X: np.ndarray) -> tuple[bool, float]:
    eig = np.linalg.eigvalsh(X)
    return bool(eig[0] >= -PSD_RTOL * max(np.max(np.abs(eig)), 1e-300)), float(eig[0])


def certify(spec: DelaySpec) -> CertificationReport:
    """``M >= 0`` decides the impedance (Dirac) property, ``N >= 0`` scattering passivity."""
    cm = build_certificates(spec)
    m_ok, m_min = _psd(cm.M)
    n_ok, n_min = _psd(cm.N)
    return CertificationReport(m_ok, n_ok, m_min, n_min)


def discretize(spec: DelaySpec) -> DiscreteSystem:
    m, k = spec.cells, spec.z_dim
    dxi = spec.tau / m
    grid = -spec.tau + dxi * np.arange(m)
    n = m * k + k
    dtype = np.result_type(spec.A1, spec.J, spec.R, spec.E, spec.H0)
    A = np.zeros((n, n), dtype=dtype)
    I = np.eye(k)
    for i in range(m):
        rows = slice(i * k, (i + 1) * k)
        A[rows, rows] = -I / dxi
        A[rows, (i + 1) * k:(i + 2) * k] = I / dxi  # for i = m-1 this is the z-slot
    zrows = slice(m * k, n)
    A[zrows, 0:k] = -spec.A1
    A[zrows, zrows] = spec.J - spec.R
    B = np.zeros((n, spec.port_dim), dtype=spec.E.dtype)
    B[zrows] = spec.E
    C = B.conj().T.copy()
    D = np.zeros((spec.port_dim, spec.port_dim))
    gram = block_diag(*([dxi * spec.H0] * m), np.eye(k))
    node = DiracNodeMatrices(A, B, C, D, weight=hermitian_part(gram))
    P = TimeCoefficient.block_diag(TimeCoefficient(np.eye(m * k)), spec.H)
    return DiscreteSystem(node, P, None, grid=grid, spec=spec)


def initial_state(sys: DiscreteSystem, history: Signal | Callable) -> np.ndarray:
    """State from an initial line profile ``w0`` on ``[-tau, 0]``.

    ``z0 = H(0)^-1 w0(0)`` so that ``w(0, 0) = H(0) z(0)`` holds at ``t = 0``.
    """
    spec = sys.spec
    w = np.array([np.atleast_1d(history(xi)) for xi in sys.grid]).reshape(sys.cells, spec.z_dim)
    z0 = np.linalg.solve(spec.H.eval(0.0), np.atleast_1d(history(0.0)))
    return np.concatenate([w.ravel(), z0])


@dataclass(frozen=True, eq=False)
class ResolventSolution:
    w: np.ndarray  # line values on the nodes, shape (cells, z_dim)
    z: np.ndarray
    e: np.ndarray
    residual: float


def solve_resolvent(sys: DiscreteSystem | DelaySpec, lam: complex, v, x, f) -> ResolventSolution:
    """Solve ``(lam I - [[A&B], [-C&D]]) (w, z, e) = (v, x, f)`` by the closed-form line solution.

    ``v`` is a callable/Signal on ``[-tau, 0]`` or an array of ``cells + 1``
    samples on the nodes including ``xi = 0``. Integrals use the trapezoid rule on
    the node grid. The returned residual is measured through the discretized
    operator in the weighted norm.
    """
    if isinstance(sys, DelaySpec):
        sys = discretize(sys)
    spec = sys.spec
    k, m, dxi = spec.z_dim, sys.cells, sys.dxi
    lam = complex(lam)
    if lam.real <= 0:
        raise ValueError("lambda must have positive real part")
    nodes = np.append(sys.grid, 0.0)
    if callable(v):
        vs = np.array([np.atleast_1d(v(xi)) for xi in nodes]).reshape(m + 1, k)
    else:
        vs = np.asarray(v).reshape(m + 1, k)
    x, f = np.atleast_1d(np.asarray(x)), np.atleast_1d(np.asarray(f))

    # particular line solution p with p(0) = 0: p(xi_i) = decay*p(xi_{i+1}) + trapezoid
    decay = np.exp(-lam * dxi)
    p = np.zeros((m + 1, k), dtype=complex)
    for i in range(m - 1, -1, -1):
        p[i] = decay * p[i + 1] + 0.5 * dxi * (vs[i] + decay * vs[i + 1])

    I = np.eye(k)
    EEh = spec.E @ spec.E.conj().T
    S = spec.A1 * np.exp(-lam * spec.tau) + lam * I - spec.J + spec.R + EEh / lam
    if np.linalg.cond(S) > 1e12:
        raise ResolventFailure(f"boundary equation singular at lambda={lam}; increase lambda")
    w0 = np.linalg.solve(S, x + spec.E @ f / lam - spec.A1 @ p[0])
    w = np.exp(lam * nodes)[:, None] * w0[None, :] + p
    e = (f - spec.E.conj().T @ w0) / lam

    node = sys.node
    sol = np.concatenate([w[:m].ravel(), w0, e])
    rhs = np.concatenate([vs[:m].ravel(), x, f])
    r = lam * sol - node.impedance_composite() @ sol - rhs
    Wd = node.extended_weight()
    residual = float(np.sqrt(max(np.real(np.vdot(r, Wd @ r)), 0.0)))
    return ResolventSolution(w[:m], w0, e, residual)


def delay_fidelity(sys: DiscreteSystem, times: np.ndarray, states: np.ndarray) -> tuple[float, np.ndarray]:
    """Max error of ``w(t, -tau)`` against ``H(t - tau) z(t - tau)`` over ``t >= tau``.

    ``z(t - tau)`` is linearly interpolated from the simulated trajectory.
    """
    spec = sys.spec
    line = sys.line(states)[:, 0, :]
    z = sys.z(states)
    mask = times >= spec.tau - 1e-12
    errs = []
    for t, w_out in zip(times[mask], line[mask]):
        s = t - spec.tau
        z_past = np.array([np.interp(s, times, z[:, j].real) + 1j * np.interp(s, times, z[:, j].imag)
                           for j in range(spec.z_dim)])
        errs.append(np.linalg.norm(w_out - spec.H.eval(s) @ z_past))
    errs = np.asarray(errs)
    return (float(errs.max()) if errs.size else 0.0), errs
