"""Signal transform between efforts/flows and scattering inputs/outputs, and the
external Cayley transform of a bounded node.

With ``s = sqrt(2 Re beta)``::

    u = (beta e + psi f) / s        e = (u + y) / s
    y = (conj(beta) e - psi f) / s  f = psi^H (conj(beta) u - beta y) / s

so that ``|u|^2 - |y|^2 = 2 Re <psi f, e>``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import BadBetaError, StructuralError
from .operator_model import COND_LIMIT, DiracNodeMatrices, PHSystem, find_beta


@dataclass(frozen=True, eq=False)
class CayleyContext:
    beta: complex
    psi: np.ndarray

    def __post_init__(self):
        beta = complex(self.beta)
        if beta.real <= 0:
            raise ValueError(f"beta must have positive real part, got {beta}")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "psi", np.atleast_2d(np.asarray(self.psi)))

    @classmethod
    def for_node(cls, node: DiracNodeMatrices, beta: complex | None = None) -> "CayleyContext":
        return cls(find_beta(node) if beta is None else beta, node.psi)

    @property
    def scale(self) -> float:
        return math.sqrt(2.0 * self.beta.real)

    @property
    def m(self) -> int:
        return self.psi.shape[0]


def _check(ctx: CayleyContext, *vectors):
    for v in vectors:
        if np.shape(v)[-1] != ctx.m:
            raise StructuralError(f"port vector of length {np.shape(v)[-1]}, psi is {ctx.m}x{ctx.m}")


def efforts_to_scattering(ctx: CayleyContext, e, f):
    """Map efforts/flows to scattering input/output. Works row-wise on ``(N, m)`` arrays."""
    e, f = np.asarray(e), np.asarray(f)
    _check(ctx, e, f)
    psi_f = f @ ctx.psi.T
    u = (ctx.beta * e + psi_f) / ctx.scale
    y = (ctx.beta.conjugate() * e - psi_f) / ctx.scale
    return u, y


def scattering_to_efforts(ctx: CayleyContext, u, y):
    u, y = np.asarray(u), np.asarray(y)
    _check(ctx, u, y)
    e = (u + y) / ctx.scale
    f = (ctx.beta.conjugate() * u - ctx.beta * y) @ ctx.psi.conj() / ctx.scale
    return e, f


def transform_node(node: DiracNodeMatrices, ctx: CayleyContext) -> DiracNodeMatrices:
    """External Cayley transform ``(A, B, C, D) -> (Ax, Bx, Cx, Dx)``.

    The result has ``psi = I`` and the same state weight; ``psi`` is absorbed
    into ``Cx`` and ``Dx``.
    """
    m = node.m
    psiC, psiD = node.psi @ node.C, node.psi @ node.D
    K = ctx.beta * np.eye(m) + psiD
    cond = np.linalg.cond(K) if m else 1.0
    if not np.isfinite(cond) or cond > 1e16:
        raise BadBetaError(f"beta*I + psi*D is singular for beta={ctx.beta}")
    if cond > COND_LIMIT:
        warnings.warn(f"beta*I + psi*D is ill-conditioned (cond={cond:.2e})", RuntimeWarning)
    Kinv_psiC = np.linalg.solve(K, psiC)
    # B K^-1 computed as (K^-T B^T)^T
    B_Kinv = np.linalg.solve(K.T, node.B.T).T
    s = ctx.scale
    A_x = node.A - node.B @ Kinv_psiC
    B_x = s * B_Kinv
    C_x = -s * Kinv_psiC
    D_x = np.linalg.solve(K.T, (ctx.beta.conjugate() * np.eye(m) - psiD).T).T
    return DiracNodeMatrices(A_x, B_x, C_x, D_x, psi=np.eye(m), weight=node.weight)


def scattering_system(sys: PHSystem, ctx: CayleyContext) -> PHSystem:
    """The scattering representation; P and G pass through unchanged."""
    return sys.with_node(transform_node(sys.node, ctx))
