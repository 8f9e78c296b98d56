"""Simulation and passivity certification of time-varying port-Hamiltonian systems
with bounded control and observation, built around a delay-line example."""

from .cayley import (CayleyContext, efforts_to_scattering, scattering_system, scattering_to_efforts,
                     transform_node)
from .delay_line import (CertificateMatrices, CertificationReport, DelaySpec, DiscreteSystem, ResolventSolution,
                         build_certificates, certify, delay_fidelity, discretize, initial_state, solve_resolvent)
from .errors import (AuditFailure, BadBetaError, CoercivityError, ConfigError, InvalidNodeError, NoBetaError,
                     PHDelayError, ResolventFailure, StepFailure, StructuralError, ValidationError)
from .evolution import (IMPEDANCE, SCATTERING, EvolutionFamily, PowerAudit, PowerLedger, Trajectory, apply_f,
                        apply_phi, apply_psi, audit_power, build_evolution_family, cayley_equivalence,
                        check_composition_laws, estimate_wp_constant, mild_solution, refinement_study, simulate,
                        step_midpoint)
from .operator_model import (CoercivityReport, DiracCertificate, DiracNodeMatrices, PHSystem,
                             ScatteringCertificate, TimeCoefficient, check_coercivity, check_dirac_node,
                             check_scattering_passive, deriv_coefficient, eval_coefficient, find_beta,
                             random_dirac_node)
from .signals import Signal

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
