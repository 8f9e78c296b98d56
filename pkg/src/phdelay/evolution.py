"""Implicit midpoint integration, discrete evolution families and power audits.

One step of ``xdot = (A P(t) + G(t)) x + B u`` on ``[t, t + h]``::

    (I - h/2 K) x_new = (I + h/2 K) x + h B u_mid,   K = A P(t + h/2) + G(t + h/2)

Inputs are consumed at step midpoints and outputs are produced there as
``y_mid = C P(t + h/2) x_bar + D u_mid`` with ``x_bar = (x + x_new) / 2``. With
that convention the discrete energy identity

    H_{k+1} - H_k = 2 h Re<A P x_bar + B u, P x_bar>_W + 2 h Re<G x_bar, P x_bar>_W + drift

is exact except for the midpoint quadrature of the ``<Pdot x, x>`` drift, whose
error per unit time is ``O(h^2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cayley import CayleyContext, efforts_to_scattering, scattering_system
from .errors import AuditFailure, CoercivityError, StepFailure
from .operator_model import PHSystem, check_coercivity
from .signals import Signal

IMPEDANCE = "impedance"
SCATTERING = "scattering"
EPS = np.finfo(float).eps


@dataclass(eq=False)
class Trajectory:
    """Grid values ``times, states, inputs, outputs`` plus the midpoint port samples
    the integrator actually used (``mid_*``)."""

    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    outputs: np.ndarray
    mid_times: np.ndarray
    mid_inputs: np.ndarray
    mid_outputs: np.ndarray
    representation: str

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


@dataclass(eq=False)
class PowerLedger:
    """Per-step energy bookkeeping; all rates are averages over the step.

    ``residual = (H_{k+1} - H_k)/dt - (supplied_power + p_drift + g_term)``, so
    passivity means ``residual <= slack``.
    """

    times: np.ndarray
    hamiltonian: np.ndarray
    supplied_power: np.ndarray
    p_drift: np.ndarray
    g_term: np.ndarray
    residual: np.ndarray
    slack: np.ndarray
    representation: str


@dataclass(frozen=True)
class PowerAudit:
    passed: bool
    conservative: bool
    max_residual: float
    max_abs_residual: float
    worst_step: int
    worst_excess: float
    max_slack: float


def time_grid(horizon: float, dt: float) -> np.ndarray:
    if not (dt > 0 and horizon > 0):
        raise ValueError("horizon and dt must be positive")
    steps = int(round(horizon / dt))
    if steps < 1 or abs(steps * dt - horizon) > 1e-9 * max(1.0, horizon):
        raise ValueError(f"horizon {horizon} is not a multiple of dt {dt}")
    return dt * np.arange(steps + 1)


def representation_system(sys: PHSystem, representation: str, beta: complex = 1.0) -> PHSystem:
    if representation == IMPEDANCE:
        return sys
    if representation == SCATTERING:
        return scattering_system(sys, CayleyContext(beta, sys.node.psi))
    raise ValueError(f"unknown representation {representation!r}")


def _generator(sys: PHSystem, t: float) -> tuple[np.ndarray, np.ndarray]:
    P = sys.P.eval(t)
    return P, sys.node.A @ P + sys.G.eval(t)


def generator_family(sys: PHSystem):
    """``A P(t) + G(t)`` as a single coefficient family (products formed once)."""
    return sys.P.left_multiplied(sys.node.A) + sys.G


def _solve_step(M: np.ndarray, rhs: np.ndarray, dt: float) -> np.ndarray:
    try:
        x = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as exc:
        raise StepFailure(f"singular midpoint matrix at dt={dt}", suggested_dt=dt / 2) from exc
    if not np.all(np.isfinite(x)):
        raise StepFailure(f"non-finite state at dt={dt}", suggested_dt=dt / 2)
    return x


def step_midpoint(sys: PHSystem, t: float, dt: float, x: np.ndarray, u_mid) -> np.ndarray:
    """One implicit midpoint step from ``t`` to ``t + dt`` with input ``u_mid`` at the midpoint."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    _, K = _generator(sys, t + dt / 2)
    n = sys.n
    rhs = x + 0.5 * dt * (K @ x) + dt * (sys.node.B @ np.atleast_1d(u_mid))
    return _solve_step(np.eye(n) - 0.5 * dt * K, rhs, dt)


def _input_samples(input, times: np.ndarray, mid_times: np.ndarray, m: int):
    """Midpoint and grid samples of an input given as a Signal, None or a ``(steps, m)`` array."""
    if input is None:
        return np.zeros((len(mid_times), m)), np.zeros((len(times), m))
    if isinstance(input, Signal):
        if input.dim != m:
            raise ValueError(f"input has dimension {input.dim}, ports have {m}")
        return input(mid_times), input(times)
    mid = np.asarray(input)
    if mid.ndim == 1:
        mid = mid[:, None]
    if mid.shape != (len(mid_times), m):
        raise ValueError(f"input array must have shape {(len(mid_times), m)}, got {mid.shape}")
    return mid, Signal.sampled(mid_times, mid)(times)


def simulate(sys: PHSystem, representation: str, x0, input, horizon: float, dt: float, *,
             beta: complex = 1.0, slack_c: float = 1.0) -> tuple[Trajectory, PowerLedger]:
    """Integrate the impedance or scattering representation and fill the power ledger.

    ``input`` is the effort ``e`` (impedance) or the scattering input ``u``. The
    ledger slack is ``slack_c * dt^2 * s_k`` where ``s_k`` bounds the leading drift
    quadrature error of step ``k`` (from ``|Pdot|, |Pddot|, |Pdddot|`` and the
    step's state size and speed), plus a round-off allowance.
    """
    times = time_grid(horizon, dt)
    mid_times = times[:-1] + dt / 2
    n, m = sys.n, sys.m
    if not sys.P.is_constant:
        cover = check_coercivity(sys.P, horizon, 65, gram=sys.gram)
        if not cover.is_coercive:
            raise CoercivityError(f"P(t) loses coercivity at t={cover.worst_time:.4g} (gamma={cover.gamma:.3g})")
    run = representation_system(sys, representation, beta)
    node = run.node
    W = node.weight
    nW = float(np.linalg.norm(W, 2))
    u_mid, u_grid = _input_samples(input, times, mid_times, m)

    dtype = np.result_type(node.A, node.B, node.C, node.D, run.P.dtype, run.G.dtype,
                           np.asarray(x0), u_mid, float)
    steps = len(mid_times)
    states = np.zeros((steps + 1, n), dtype=dtype)
    states[0] = x0
    y_mid = np.zeros((steps, m), dtype=dtype)
    ham = np.zeros(steps + 1)
    supplied = np.zeros(steps)
    drift = np.zeros(steps)
    gterm = np.zeros(steps)
    slack = np.zeros(steps)
    I = np.eye(n)
    P, G = run.P, run.G
    gen = generator_family(run)
    has_G = not G.is_constant or bool(np.any(G.base))
    ham[0] = float(np.real(np.vdot(states[0], W @ P.apply(0.0, states[0]))))
    nP = P.deriv_norm_bound(0.0, 0)
    cache = None
    for k, tm in enumerate(mid_times):
        x = states[k]
        if cache is None or not gen.is_constant:
            K = gen.eval(tm)
            cache = (K, I - 0.5 * dt * K)
        K, M = cache
        x_new = _solve_step(M, x + 0.5 * dt * (K @ x) + dt * (node.B @ u_mid[k]), dt)
        states[k + 1] = x_new

        xbar = 0.5 * (x + x_new)
        Px = P.apply(tm, xbar)
        y = node.C @ Px + node.D @ u_mid[k]
        y_mid[k] = y
        if representation == IMPEDANCE:
            supplied[k] = 2.0 * np.real(np.vdot(u_mid[k], node.psi @ y))
        else:
            supplied[k] = float(np.real(np.vdot(u_mid[k], u_mid[k]) - np.vdot(y, y)))
        if not P.is_constant:
            drift[k] = float(np.real(np.vdot(xbar, W @ P.apply(tm, xbar, 1))))
            nP = P.deriv_norm_bound(tm, 0)
        if has_G:
            gterm[k] = 2.0 * float(np.real(np.vdot(G.apply(tm, xbar), W @ Px)))
        ham[k + 1] = float(np.real(np.vdot(x_new, W @ P.apply(times[k + 1], x_new))))

        speed = np.linalg.norm(x_new - x) / dt
        size = np.linalg.norm(xbar)
        truncation = nW * (P.deriv_norm_bound(tm, 1) * speed**2
                           + P.deriv_norm_bound(tm, 2) * size * speed
                           + P.deriv_norm_bound(tm, 3) * size**2)
        roundoff = 256 * EPS * (nW * nP * (np.linalg.norm(x)**2 + np.linalg.norm(x_new)**2) / dt
                                + abs(supplied[k]) + abs(drift[k]) + abs(gterm[k]))
        slack[k] = slack_c * dt**2 * truncation + roundoff

    residual = np.diff(ham) / dt - (supplied + drift + gterm)
    y_grid = np.zeros((steps + 1, m), dtype=dtype)
    for k, t in enumerate(times):
        y_grid[k] = node.C @ P.apply(t, states[k]) + node.D @ u_grid[k]
    traj = Trajectory(times, states, u_grid, y_grid, mid_times, u_mid, y_mid, representation)
    ledger = PowerLedger(times, ham, supplied, drift, gterm, residual, slack, representation)
    return traj, ledger


def audit_power(traj: Trajectory, ledger: PowerLedger, conservative: bool = False,
                raise_on_failure: bool = True) -> PowerAudit:
    """Check the per-step power inequality (or equality when ``conservative``)."""
    res, slack = ledger.residual, ledger.slack
    excess = (np.abs(res) if conservative else res) - slack
    worst = int(np.argmax(excess)) if excess.size else 0
    passed = bool(np.all(excess <= 0))
    audit = PowerAudit(passed, conservative,
                       float(res.max()) if res.size else 0.0,
                       float(np.abs(res).max()) if res.size else 0.0,
                       worst, float(excess[worst]) if excess.size else 0.0,
                       float(slack.max()) if slack.size else 0.0)
    if not passed and raise_on_failure:
        kind = "equality" if conservative else "inequality"
        first = int(np.argmax(excess > 0))
        raise AuditFailure(
            f"power {kind} first violated at step {first} (t={traj.mid_times[first]:.6g}): "
            f"residual {res[first]:.3e} exceeds slack {slack[first]:.3e}; worst at step {worst}", step=first)
    return audit


class EvolutionFamily:
    """Discrete evolution family on a uniform grid, with the input and output maps.

    ``T(t_k, t_j)`` is the ordered product of the zero-input midpoint step maps
    ``S_{k-1} ... S_j``; only grid-aligned times with ``t >= r`` are accepted.
    """

    def __init__(self, sys: PHSystem, horizon: float, dt: float,
                 representation: str = IMPEDANCE, beta: complex = 1.0):
        self.times = time_grid(horizon, dt)
        self.mid_times = self.times[:-1] + dt / 2
        self.dt = dt
        self.representation = representation
        self.system = representation_system(sys, representation, beta)
        node = self.system.node
        n = node.n
        steps, gammas, outs = [], [], []
        I = np.eye(n)
        for tm in self.mid_times:
            Pm, K = _generator(self.system, tm)
            M = I - 0.5 * dt * K
            try:
                Minv = np.linalg.inv(M)
            except np.linalg.LinAlgError as exc:
                raise StepFailure(f"singular midpoint matrix at dt={dt}", suggested_dt=dt / 2) from exc
            steps.append(Minv @ (I + 0.5 * dt * K))
            gammas.append(dt * (Minv @ node.B))
            outs.append(node.C @ Pm)
        self.steps = np.array(steps)
        self.input_maps = np.array(gammas)
        self.output_maps = np.array(outs)
        self.D = node.D

    @property
    def n(self) -> int:
        return self.system.n

    @property
    def m(self) -> int:
        return self.system.m

    def index(self, t: float) -> int:
        k = int(round(t / self.dt))
        if k < 0 or k >= len(self.times) or abs(k * self.dt - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"time {t} is not on the family grid")
        return k

    def _pair(self, t: float, r: float) -> tuple[int, int]:
        k, j = self.index(t), self.index(r)
        if k < j:
            raise ValueError(f"need t >= r, got t={t}, r={r}")
        return k, j

    def T(self, t: float, r: float) -> np.ndarray:
        k, j = self._pair(t, r)
        out = np.eye(self.n, dtype=self.steps.dtype)
        for i in range(j, k):
            out = self.steps[i] @ out
        return out

    def input_samples(self, u) -> np.ndarray:
        if isinstance(u, Signal):
            return u(self.mid_times)
        u = np.asarray(u)
        return u[:, None] if u.ndim == 1 else u

    def restrict(self, u, r: float, t: float) -> np.ndarray:
        """Truncation ``P_[r,t]``: zero the midpoint samples outside ``[r, t)``."""
        k, j = self._pair(t, r)
        out = np.zeros_like(self.input_samples(u))
        out[j:k] = self.input_samples(u)[j:k]
        return out


def build_evolution_family(sys: PHSystem, horizon: float, dt: float,
                           representation: str = IMPEDANCE, beta: complex = 1.0) -> EvolutionFamily:
    return EvolutionFamily(sys, horizon, dt, representation, beta)


def apply_phi(family: EvolutionFamily, t: float, r: float, u) -> np.ndarray:
    """State at ``t`` reached from zero state at ``r`` under input ``u``."""
    k, j = family._pair(t, r)
    us = family.input_samples(u)
    x = np.zeros(family.n, dtype=np.result_type(family.steps, us))
    for i in range(j, k):
        x = family.steps[i] @ x + family.input_maps[i] @ us[i]
    return x


def _outputs(family: EvolutionFamily, j: int, k: int, x: np.ndarray, us: np.ndarray | None) -> np.ndarray:
    dtype = np.result_type(family.steps, x, family.output_maps, *(() if us is None else (us,)))
    y = np.zeros((len(family.mid_times), family.m), dtype=dtype)
    for i in range(j, k):
        x_new = family.steps[i] @ x
        if us is not None:
            x_new = x_new + family.input_maps[i] @ us[i]
        y[i] = family.output_maps[i] @ (0.5 * (x + x_new))
        if us is not None:
            y[i] += family.D @ us[i]
        x = x_new
    return y


def apply_psi(family: EvolutionFamily, t: float, r: float, x_r) -> np.ndarray:
    """Midpoint output samples on ``[r, t)`` of the free motion from ``x_r``; zero elsewhere."""
    k, j = family._pair(t, r)
    return _outputs(family, j, k, np.asarray(x_r), None)


def apply_f(family: EvolutionFamily, t: float, r: float, u) -> np.ndarray:
    """Midpoint output samples on ``[r, t)`` from zero state at ``r``, feedthrough included."""
    k, j = family._pair(t, r)
    us = family.input_samples(u)
    return _outputs(family, j, k, np.zeros(family.n, dtype=np.result_type(family.steps, us)), us)


@dataclass(frozen=True)
class CompositionReport:
    phi_law: float
    psi_law: float
    f_law: float
    phi_causality: float
    psi_causality: float
    f_causality: float

    @property
    def max_residual(self) -> float:
        return max(self.phi_law, self.psi_law, self.f_law,
                   self.phi_causality, self.psi_causality, self.f_causality)


def check_composition_laws(family: EvolutionFamily, t: float, s: float, r: float,
                           probes: int = 4, rng: np.random.Generator | None = None) -> CompositionReport:
    """Evaluate the concatenation identities and causality on random probes.

    Laws checked for ``t >= s >= r``::

        Phi(t,r) = Phi(t,s) + T(t,s) Phi(s,r)
        Psi(t,r) = Psi(t,s) T(s,r) + Psi(s,r)
        F(t,r)   = F(t,s) + F(s,r) + Psi(t,s) Phi(s,r)
    """
    if not t >= s >= r:
        raise ValueError("need t >= s >= r")
    rng = np.random.default_rng() if rng is None else rng
    steps, n, m = len(family.mid_times), family.n, family.m
    res = dict.fromkeys(CompositionReport.__dataclass_fields__, 0.0)
    ks = family.index(s)
    Tts = family.T(t, s)
    Tsr = family.T(s, r)
    for _ in range(probes):
        u = rng.standard_normal((steps, m))
        x = rng.standard_normal(n)
        phi_sr = apply_phi(family, s, r, u)
        res["phi_law"] = max(res["phi_law"], np.linalg.norm(
            apply_phi(family, t, r, u) - apply_phi(family, t, s, u) - Tts @ phi_sr))
        res["psi_law"] = max(res["psi_law"], np.linalg.norm(
            apply_psi(family, t, r, x) - apply_psi(family, t, s, Tsr @ x) - apply_psi(family, s, r, x)))
        res["f_law"] = max(res["f_law"], np.linalg.norm(
            apply_f(family, t, r, u) - apply_f(family, t, s, u) - apply_f(family, s, r, u)
            - apply_psi(family, t, s, phi_sr)))

        trunc = family.restrict(u, r, t)
        late = np.zeros_like(u)
        late[ks:] = u[ks:]
        res["phi_causality"] = max(res["phi_causality"],
                                   np.linalg.norm(apply_phi(family, t, r, u) - apply_phi(family, t, r, trunc)),
                                   np.linalg.norm(apply_phi(family, s, r, late)))
        window = np.zeros(steps, dtype=bool)
        window[family.index(r):family.index(t)] = True
        res["psi_causality"] = max(res["psi_causality"],
                                   np.linalg.norm(apply_psi(family, t, r, x)[~window]))
        Fu = apply_f(family, t, r, u)
        res["f_causality"] = max(res["f_causality"], np.linalg.norm(Fu[~window]),
                                 np.linalg.norm(Fu - apply_f(family, t, r, trunc)))
    return CompositionReport(**{k: float(v) for k, v in res.items()})


def mild_solution(family: EvolutionFamily, x0, u, t: float) -> tuple[np.ndarray, np.ndarray]:
    """``x(t) = T(t,0) x0 + Phi(t,0) u`` and the output ``Psi(t,0) x0 + F(t,0) u``."""
    x = family.T(t, 0.0) @ np.asarray(x0) + apply_phi(family, t, 0.0, u)
    y = apply_psi(family, t, 0.0, x0) + apply_f(family, t, 0.0, u)
    return x, y


def estimate_wp_constant(sys: PHSystem, horizon: float, dt: float, trials: int,
                         representation: str = SCATTERING, beta: complex = 1.0,
                         rng: np.random.Generator | None = None) -> float:
    """Empirical lower bound of the well-posedness constant.

    Returns the largest ``(|x(T)|^2 + int |y|^2) / (|x0|^2 + int |u|^2)`` over the
    trials (state norm in the Gram weight). Trial 0 has zero input, trial 1 zero
    initial state, the rest draw both at random.
    """
    rng = np.random.default_rng() if rng is None else rng
    W = sys.gram
    steps = len(time_grid(horizon, dt)) - 1
    worst = 0.0
    for trial in range(trials):
        x0 = rng.standard_normal(sys.n) if trial != 1 else np.zeros(sys.n)
        u = rng.standard_normal((steps, sys.m)) if trial != 0 else np.zeros((steps, sys.m))
        if not np.any(x0) and not np.any(u):
            continue
        traj, _ = simulate(sys, representation, x0, u, horizon, dt, beta=beta)
        xT = traj.states[-1]
        num = np.real(np.vdot(xT, W @ xT)) + dt * np.sum(np.abs(traj.mid_outputs) ** 2)
        den = np.real(np.vdot(x0, W @ x0)) + dt * np.sum(np.abs(u) ** 2)
        worst = max(worst, float(num / den))
    return worst


def cayley_equivalence(sys: PHSystem, x0, e, horizon: float, dt: float,
                       beta: complex = 1.0) -> tuple[float, Trajectory, Trajectory]:
    """Run the impedance representation, map its midpoint ``(e, f)`` to ``(u, y)``, drive
    the scattering representation with that ``u`` and compare.

    Returns the state mismatch relative to the largest state norm, and both trajectories.
    The output mismatch against the transformed ``y`` is available from the trajectories.
    """
    imp, _ = simulate(sys, IMPEDANCE, x0, e, horizon, dt)
    ctx = CayleyContext(beta, sys.node.psi)
    u, _ = efforts_to_scattering(ctx, imp.mid_inputs, imp.mid_outputs)
    scat, _ = simulate(sys, SCATTERING, x0, u, horizon, dt, beta=beta)
    scale = max(float(np.max(np.linalg.norm(imp.states, axis=1))), 1e-300)
    err = float(np.max(np.linalg.norm(imp.states - scat.states, axis=1)))
    return err / scale, imp, scat


def refinement_study(sys: PHSystem, representation: str, x0, input: Signal, horizon: float,
                     dts) -> tuple[np.ndarray, float]:
    """Differences between successive refinements on the coarsest grid and the observed order.

    ``dts`` must be successively halved. Returns ``(diffs, slope)`` where ``diffs[i]``
    is the max state difference between runs ``i`` and ``i + 1`` and ``slope`` the
    least-squares log-log slope of ``diffs`` against ``dts[:-1]``.
    """
    dts = list(dts)
    runs = [simulate(sys, representation, x0, input, horizon, dt)[0] for dt in dts]
    diffs = []
    for a, b in zip(runs, runs[1:]):
        ratio = int(round(a.dt / b.dt))
        diffs.append(float(np.max(np.linalg.norm(a.states - b.states[::ratio], axis=1))))
    diffs = np.array(diffs)
    if len(diffs) < 2:
        return diffs, math.nan
    slope = float(np.polyfit(np.log(dts[:-1]), np.log(diffs), 1)[0])
    return diffs, slope
