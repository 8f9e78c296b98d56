"""Finite-dimensional node data, time-varying coefficients and passivity certificates.

Every operator is a dense numpy array. Real data stays real; complex data
stays complex, so downstream solvers pick the cheaper arithmetic when they can.

Certificates are eigenvalue tests on assembled Hermitian forms. In finite
dimensions a dissipative matrix is automatically maximal dissipative (its
range condition ``range(lambda*I - K) = whole space`` holds for every
``lambda > 0`` because ``lambda*I - K`` is injective), so no range test is run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidNodeError, NoBetaError, StructuralError

BASES = ("sine", "cosine", "polynomial", "exponential")

UNITARY_TOL = 1e-10
COND_LIMIT = 1e12


def as_matrix(value, name="matrix", shape=None) -> np.ndarray:
    """Convert ``value`` to a 2-D float or complex array and check it is finite."""
    arr = np.atleast_2d(np.asarray(value))
    if arr.ndim != 2:
        raise StructuralError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if np.iscomplexobj(arr):
        arr = arr.astype(np.complex128)
    else:
        arr = arr.astype(np.float64)
    if not np.all(np.isfinite(arr)):
        raise InvalidNodeError(f"{name} has non-finite entries")
    if shape is not None and arr.shape != tuple(shape):
        raise StructuralError(f"{name} has shape {arr.shape}, expected {tuple(shape)}")
    arr.setflags(write=False)
    return arr


def hermitian_part(X: np.ndarray) -> np.ndarray:
    return 0.5 * (X + X.conj().T)


def block_diag(*blocks: np.ndarray) -> np.ndarray:
    dtype = np.result_type(*blocks)
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    out = np.zeros((rows, cols), dtype=dtype)
    r = c = 0
    for b in blocks:
        out[r:r + b.shape[0], c:c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out


def basis_value(basis: str, parameter: float, t, order: int = 0):
    """``order``-th time derivative of a scalar basis function, vectorised over ``t``.

    sine ``sin(p t)``, cosine ``cos(p t)``, polynomial ``t**p`` (``p`` a
    non-negative integer) and exponential ``exp(p t)``.
    """
    t = np.asarray(t, dtype=float)
    p = parameter
    if basis == "sine":
        return p**order * np.sin(p * t + order * math.pi / 2)
    if basis == "cosine":
        return p**order * np.cos(p * t + order * math.pi / 2)
    if basis == "exponential":
        return p**order * np.exp(p * t)
    if basis == "polynomial":
        k = int(p)
        if order > k:
            return np.zeros_like(t)
        coeff = math.factorial(k) // math.factorial(k - order)
        return coeff * t ** (k - order)
    raise ValueError(f"unknown basis {basis!r}; expected one of {BASES}")


def basis_bound(basis: str, parameter: float, t: float, order: int) -> float:
    """Upper bound of ``|d^order/dt^order basis|`` at ``t`` (cheap, used for slack estimates)."""
    p = parameter
    if basis in ("sine", "cosine"):
        return abs(p) ** order
    return float(abs(basis_value(basis, p, t, order)))


@dataclass(frozen=True, eq=False)
class Term:
    amplitude: np.ndarray
    basis: str
    parameter: float

    def __post_init__(self):
        if self.basis not in BASES:
            raise ValueError(f"unknown basis {self.basis!r}; expected one of {BASES}")
        if self.basis == "polynomial" and (self.parameter < 0 or int(self.parameter) != self.parameter):
            raise ValueError("polynomial terms need a non-negative integer power")
        object.__setattr__(self, "amplitude", as_matrix(self.amplitude, "term amplitude"))
        object.__setattr__(self, "parameter", float(self.parameter))


@dataclass(frozen=True, eq=False)
class TimeCoefficient:
    """Matrix family ``base + sum_k amplitude_k * basis_k(t)`` with exact derivatives."""

    base: np.ndarray
    terms: tuple[Term, ...] = ()

    def __post_init__(self):
        base = as_matrix(self.base, "coefficient base")
        terms = tuple(t if isinstance(t, Term) else Term(*t) for t in self.terms)
        for term in terms:
            if term.amplitude.shape != base.shape:
                raise StructuralError(
                    f"term amplitude shape {term.amplitude.shape} differs from base {base.shape}")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "_amp_norms",
                           tuple(float(np.linalg.norm(t.amplitude, 2)) for t in terms))
        object.__setattr__(self, "_base_norm", float(np.linalg.norm(base, 2)) if base.size else 0.0)

    @classmethod
    def constant(cls, matrix) -> "TimeCoefficient":
        return cls(matrix)

    @classmethod
    def zeros(cls, n: int, m: int | None = None) -> "TimeCoefficient":
        return cls(np.zeros((n, n if m is None else m)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.base.shape

    @property
    def is_constant(self) -> bool:
        return not self.terms

    @property
    def dtype(self):
        return np.result_type(self.base, *(t.amplitude for t in self.terms))

    def __call__(self, t: float) -> np.ndarray:
        return self.deriv(t, 0)

    def eval(self, t: float) -> np.ndarray:
        return self.deriv(t, 0)

    def deriv(self, t: float, order: int = 1) -> np.ndarray:
        if order == 0:
            out = np.array(self.base, dtype=self.dtype)
        else:
            out = np.zeros(self.shape, dtype=self.dtype)
        for term in self.terms:
            out += basis_value(term.basis, term.parameter, t, order) * term.amplitude
        return out

    def apply(self, t: float, x: np.ndarray, order: int = 0) -> np.ndarray:
        """``(d^order/dt^order c)(t) @ x`` without forming the matrix."""
        out = self.base @ x if order == 0 else np.zeros(self.shape[0], dtype=np.result_type(self.dtype, x))
        for term in self.terms:
            out = out + basis_value(term.basis, term.parameter, t, order) * (term.amplitude @ x)
        return out

    def left_multiplied(self, L: np.ndarray) -> "TimeCoefficient":
        """The family ``L @ c(t)``, with the product distributed over the terms."""
        return TimeCoefficient(L @ self.base,
                               tuple(Term(L @ t.amplitude, t.basis, t.parameter) for t in self.terms))

    def __add__(self, other: "TimeCoefficient") -> "TimeCoefficient":
        return TimeCoefficient(self.base + other.base, self.terms + other.terms)

    def deriv_norm_bound(self, t: float, order: int) -> float:
        """Bound on the spectral norm of the ``order``-th derivative at ``t``."""
        total = self._base_norm if order == 0 else 0.0
        for term, amp in zip(self.terms, self._amp_norms):
            total += amp * basis_bound(term.basis, term.parameter, t, order)
        return total

    def scaled(self, factor) -> "TimeCoefficient":
        return TimeCoefficient(factor * self.base,
                               tuple(Term(factor * t.amplitude, t.basis, t.parameter) for t in self.terms))

    @staticmethod
    def block_diag(*coeffs: "TimeCoefficient") -> "TimeCoefficient":
        """Block-diagonal coefficient; each block keeps its own terms."""
        base = block_diag(*(c.base for c in coeffs))
        terms = []
        for i, c in enumerate(coeffs):
            for term in c.terms:
                blocks = [np.zeros(o.shape) for o in coeffs]
                blocks[i] = term.amplitude
                terms.append(Term(block_diag(*blocks), term.basis, term.parameter))
        return TimeCoefficient(base, tuple(terms))


def eval_coefficient(c: TimeCoefficient, t: float) -> np.ndarray:
    return c.eval(t)


def deriv_coefficient(c: TimeCoefficient, t: float) -> np.ndarray:
    return c.deriv(t, 1)


@dataclass(frozen=True)
class CoercivityReport:
    is_coercive: bool
    gamma: float
    worst_time: float
    asymmetry: float = 0.0
    is_self_adjoint: bool = True


def check_coercivity(c: TimeCoefficient, horizon: float, samples: int,
                     gram: np.ndarray | None = None, sym_tol: float = 1e-10) -> CoercivityReport:
    """Sample the smallest eigenvalue of the self-adjoint part of ``gram @ c(t)`` on ``[0, horizon]``.

    ``gram`` defaults to the identity; with a Gram matrix the check is for
    self-adjointness and coercivity in the weighted inner product.
    """
    if samples < 2:
        raise ValueError("samples must be at least 2")
    times = np.linspace(0.0, horizon, samples)
    gamma, worst_time, asym = math.inf, 0.0, 0.0
    for t in times:
        F = c.eval(t)
        if gram is not None:
            F = gram @ F
        scale = max(np.linalg.norm(F, 2), 1e-300)
        asym = max(asym, float(np.linalg.norm(F - F.conj().T, 2) / scale))
        lam = float(np.linalg.eigvalsh(hermitian_part(F))[0])
        if lam < gamma:
            gamma, worst_time = lam, float(t)
    return CoercivityReport(gamma > 0, gamma, worst_time, asym, asym <= sym_tol)


@dataclass(frozen=True, eq=False)
class DiracNodeMatrices:
    """Bounded connecting operator ``[[A, B], [C, D]]`` with duality map ``psi``.

    ``weight`` is the Gram matrix of the state inner product,
    ``<x, y>_W = y^H W x``.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    psi: np.ndarray | None = None
    weight: np.ndarray | None = None

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        n = A.shape[0]
        if A.shape != (n, n):
            raise StructuralError(f"A must be square, got {A.shape}")
        B = as_matrix(self.B, "B")
        if B.shape[0] != n:
            raise StructuralError(f"B has {B.shape[0]} rows, A has {n}")
        m = B.shape[1]
        C = as_matrix(self.C, "C", (m, n))
        D = as_matrix(self.D, "D", (m, m))
        psi = as_matrix(np.eye(m) if self.psi is None else self.psi, "psi", (m, m))
        W = as_matrix(np.eye(n) if self.weight is None else self.weight, "weight", (n, n))
        if np.linalg.norm(psi.conj().T @ psi - np.eye(m)) > UNITARY_TOL * max(1, m):
            raise InvalidNodeError("psi is not unitary")
        if np.linalg.norm(W - W.conj().T) > UNITARY_TOL * max(1.0, np.linalg.norm(W)):
            raise InvalidNodeError("weight is not self-adjoint")
        if n and np.linalg.eigvalsh(hermitian_part(W))[0] <= 0:
            raise InvalidNodeError("weight is not positive definite")
        for name, value in zip("ABCD", (A, B, C, D)):
            object.__setattr__(self, name, value)
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "weight", W)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def impedance_composite(self) -> np.ndarray:
        """``[[A, B], [-psi C, -psi D]]``, the operator whose dissipativity defines a Dirac node."""
        return np.block([[self.A, self.B], [-self.psi @ self.C, -self.psi @ self.D]])

    def extended_weight(self) -> np.ndarray:
        return block_diag(self.weight, np.eye(self.m))

    def dirac_form(self) -> np.ndarray:
        return hermitian_part(self.extended_weight() @ self.impedance_composite())

    def scattering_form(self) -> np.ndarray:
        """Hermitian matrix of ``2Re<Ax+Be, x>_W + |psi(Cx+De)|^2 - |e|^2``."""
        W = self.weight
        Cp, Dp = self.psi @ self.C, self.psi @ self.D
        top_left = W @ self.A + self.A.conj().T @ W + Cp.conj().T @ Cp
        top_right = W @ self.B + Cp.conj().T @ Dp
        bottom = Dp.conj().T @ Dp - np.eye(self.m)
        S = np.block([[top_left, top_right], [top_right.conj().T, bottom]])
        return hermitian_part(S)


@dataclass(frozen=True)
class DiracCertificate:
    is_dirac: bool
    dissipativity_margin: float
    beta_found: complex | None


@dataclass(frozen=True)
class ScatteringCertificate:
    is_scattering_passive: bool
    margin: float


def _max_eig(S: np.ndarray) -> tuple[float, float]:
    eig = np.linalg.eigvalsh(S)
    return float(eig[-1]), float(np.max(np.abs(eig))) if eig.size else 0.0


def check_dirac_node(node: DiracNodeMatrices, tol: float | None = None) -> DiracCertificate:
    """Decide whether ``node`` is a Dirac node in the weighted inner product.

    The composite ``[[A, B], [-psi C, -psi D]]`` must be dissipative and some
    ``beta`` with positive real part must make ``beta I + psi D`` invertible.
    """
    lam, norm = _max_eig(node.dirac_form())
    if tol is None:
        tol = 1e-10 * norm
    try:
        beta = find_beta(node)
    except NoBetaError:
        beta = None
    return DiracCertificate(lam <= tol and beta is not None, -lam, beta)


def check_scattering_passive(node: DiracNodeMatrices, tol: float | None = None) -> ScatteringCertificate:
    lam, norm = _max_eig(node.scattering_form())
    if tol is None:
        tol = 1e-10 * norm
    return ScatteringCertificate(lam <= tol, -lam)


def find_beta(node: DiracNodeMatrices, max_tries: int = 64, complex_scan: bool = False) -> complex:
    """Return ``beta`` with ``Re beta > 0`` such that ``beta I + psi D`` is well conditioned.

    Tries ``1, 2, 3, ...``; with ``complex_scan`` also ``k + 1j*k`` and ``k - 1j*k``.
    For bounded ``D`` any ``beta`` beyond ``|D|`` works, so the search only fails on
    pathological input.
    """
    psiD = node.psi @ node.D
    eye = np.eye(node.m)
    candidates: list[complex] = []
    for k in range(1, max_tries + 1):
        candidates.append(complex(k))
        if complex_scan:
            candidates.extend([complex(k, k), complex(k, -k)])
    for beta in candidates:
        M = beta * eye + psiD
        if node.m == 0 or np.linalg.cond(M) < COND_LIMIT:
            return beta
    raise NoBetaError(f"no beta found among {len(candidates)} candidates")


@dataclass(frozen=True, eq=False)
class PHSystem:
    """Time-varying port-Hamiltonian system ``xdot = (A P(t) + G(t)) x + B e``, ``f = C P(t) x + D e``.

    The Hamiltonian is ``<P(t) x, x>_W``.
    """

    node: DiracNodeMatrices
    P: TimeCoefficient | None = None
    G: TimeCoefficient | None = None

    def __post_init__(self):
        n = self.node.n
        P = TimeCoefficient(np.eye(n)) if self.P is None else self.P
        G = TimeCoefficient.zeros(n) if self.G is None else self.G
        if P.shape != (n, n) or G.shape != (n, n):
            raise StructuralError(f"P and G must be {n}x{n}")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "G", G)

    @property
    def n(self) -> int:
        return self.node.n

    @property
    def m(self) -> int:
        return self.node.m

    @property
    def gram(self) -> np.ndarray:
        return self.node.weight

    def hamiltonian(self, x: np.ndarray, t: float) -> float:
        return float(np.real(np.vdot(x, self.gram @ (self.P.eval(t) @ x))))

    def with_node(self, node: DiracNodeMatrices) -> "PHSystem":
        return PHSystem(node, self.P, self.G)


def random_dirac_node(rng: np.random.Generator, n: int, m: int, *, weighted: bool = False,
                      lossless: bool = False, feedthrough: bool = True,
                      complex_data: bool = False) -> DiracNodeMatrices:
    """Random node of the Dirac class: ``W A`` dissipative, ``B = W^-1 C^H psi^H``-compatible, ``psi D`` accretive.

    Used by the property tests and by the composition audit.
    """
    def rand(*shape):
        X = rng.standard_normal(shape)
        if complex_data:
            X = X + 1j * rng.standard_normal(shape)
        return X

    if weighted:
        L = rand(n, n)
        W = L @ L.conj().T + n * np.eye(n)
    else:
        W = np.eye(n)
    S = rand(n, n)
    skew = S - S.conj().T
    Rf = rand(n, n)
    diss = np.zeros((n, n)) if lossless else Rf @ Rf.conj().T
    # W A = skew - diss  =>  A = W^-1 (skew - diss)
    A = np.linalg.solve(W, skew - diss)
    Q, _ = np.linalg.qr(rand(m, m))
    psi = Q
    C = rand(m, n)
    B = np.linalg.solve(W, C.conj().T @ psi.conj().T)
    if feedthrough:
        Sd = rand(m, m)
        Rd = rand(m, m)
        psiD = (Sd - Sd.conj().T) + (0 if lossless else 0.5 * Rd @ Rd.conj().T)
        D = psi.conj().T @ psiD
    else:
        D = np.zeros((m, m))
    return DiracNodeMatrices(A, B, C, D, psi=psi, weight=W)


__all__: Sequence[str] = [
    "BASES", "Term", "TimeCoefficient", "CoercivityReport", "DiracNodeMatrices",
    "DiracCertificate", "ScatteringCertificate", "PHSystem", "as_matrix", "basis_value",
    "block_diag", "check_coercivity", "check_dirac_node", "check_scattering_passive",
    "deriv_coefficient", "eval_coefficient", "find_beta", "hermitian_part", "random_dirac_node",
]
