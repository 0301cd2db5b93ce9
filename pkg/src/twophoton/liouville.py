"""Vectorized master-equation generators.

Density matrices are column-stacked, so ``vec(A @ rho @ B) == kron(B.T, A) @ vec(rho)``.
Superoperators are plain dense complex arrays of shape (D**2, D**2).
"""
from __future__ import annotations

import numpy as np

from .errors import SingularSteadyStateError
from .hilbert import OperatorSet, SystemParams, build_operator_set

MAX_CONDITION = 1e12


def vectorize(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {rho.shape}")
    return rho.reshape(-1, order="F")


def devectorize(v: np.ndarray, dim: int | None = None) -> np.ndarray:
    v = np.asarray(v)
    if v.ndim != 1:
        raise ValueError("expected a 1-d vectorized state")
    if dim is None:
        dim = int(round(np.sqrt(v.size)))
    if dim * dim != v.size:
        raise ValueError(f"vector of length {v.size} is not a vectorized {dim}x{dim} matrix")
    return v.reshape((dim, dim), order="F")


def trace_row(dim: int) -> np.ndarray:
    """Row vector t with ``t @ vec(rho) == trace(rho)``."""
    return vectorize(np.eye(dim, dtype=complex))


def spre(a: np.ndarray) -> np.ndarray:
    return np.kron(np.eye(a.shape[0]), a)


def spost(b: np.ndarray) -> np.ndarray:
    return np.kron(b.T, np.eye(b.shape[0]))


def sandwich(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Superoperator of rho -> a @ rho @ b."""
    return np.kron(b.T, a)


def commutator_superop(x: np.ndarray) -> np.ndarray:
    """Superoperator of rho -> [x, rho]."""
    return spre(x) - spost(x)


def effective_hamiltonian(params: SystemParams, ops: OperatorSet | None = None) -> np.ndarray:
    """Non-Hermitian Hamiltonian with the omega_1 drive and both loss channels."""
    ops = ops or build_operator_set(params.n_max)
    return (
        params.detuning1 * (ops.sigma_z + ops.number)
        + 1j * params.g * (ops.a_dag @ ops.sigma_minus - ops.a @ ops.sigma_plus)
        + 1j * params.e1 * (ops.sigma_plus - ops.sigma_minus)
        - 1j * params.kappa * ops.number
        - 0.5j * params.gamma * (ops.sigma_plus @ ops.sigma_minus)
    )


def nonhermitian_superop(params: SystemParams, ops: OperatorSet | None = None) -> np.ndarray:
    h = effective_hamiltonian(params, ops)
    return -1j * (spre(h) - spost(h.conj().T))


def jump_superop(params: SystemParams, ops: OperatorSet | None = None) -> np.ndarray:
    ops = ops or build_operator_set(params.n_max)
    return (params.gamma * sandwich(ops.sigma_minus, ops.sigma_plus)
            + 2.0 * params.kappa * sandwich(ops.a, ops.a_dag))


def build_static_liouvillian(params: SystemParams, ops: OperatorSet | None = None) -> np.ndarray:
    """Time-independent generator: non-Hermitian evolution plus quantum jumps."""
    ops = ops or build_operator_set(params.n_max)
    return nonhermitian_superop(params, ops) + jump_superop(params, ops)


def build_sideband_superops(params: SystemParams, ops: OperatorSet | None = None):
    """Return ``(s_up, s_down)`` multiplying exp(-i delta t) and exp(+i delta t)."""
    ops = ops or build_operator_set(params.n_max)
    s_up = params.e2 * commutator_superop(ops.sigma_plus)
    s_down = -params.e2 * commutator_superop(ops.sigma_minus)
    return s_up, s_down


def full_generator(static: np.ndarray, s_up: np.ndarray, s_down: np.ndarray,
                   delta: float, t: float) -> np.ndarray:
    return static + s_up * np.exp(-1j * delta * t) + s_down * np.exp(1j * delta * t)


def steady_state(generator: np.ndarray) -> np.ndarray:
    """Trace-one null vector of ``generator`` returned as a density matrix.

    The |0,g><0,g| row is replaced by the trace functional.
    """
    dim = int(round(np.sqrt(generator.shape[0])))
    m = generator.copy()
    m[0, :] = trace_row(dim)
    rhs = np.zeros(generator.shape[0], dtype=complex)
    rhs[0] = 1.0
    cond = np.linalg.cond(m)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise SingularSteadyStateError(f"steady-state system is singular (condition number {cond:.3g})")
    return devectorize(np.linalg.solve(m, rhs), dim)
