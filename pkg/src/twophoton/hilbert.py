"""Truncated Jaynes-Cummings Hilbert space: operators, Hamiltonians, dressed states.

Basis layout is field-major, atom-minor: ``index = 2 * n_fock + atom`` with
``atom = 0`` for the ground state and ``atom = 1`` for the excited state.
All rates are in units of the cavity damping rate (``kappa = 1``); the
inversion operator ``sigma_z`` has eigenvalues -1/2 and +1/2.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

GROUND, EXCITED = 0, 1

#: Normalized detuning of the |1>_- <-> |2>_+ two-photon resonance.
PEAK_DELTA_TILDE = 1.0 + np.sqrt(2.0)


@dataclass(frozen=True)
class SystemParams:
    """Parameters of one driven, damped atom-cavity system.

    ``detuning1`` is omega - omega_1 (locked to the selected coupling g_f),
    ``delta`` is omega_2 - omega_1. ``kappa`` is the unit of all rates and is
    1 for every physical run; it is kept as a field only so that limiting
    cases (pure atomic decay) can be set up in tests.
    """

    g: float = 9.0
    kappa: float = 1.0
    gamma: float = 2.0
    detuning1: float = 9.0
    delta: float = 9.0 * (2.0 + np.sqrt(2.0))
    e1: float = 0.1
    e2: float = 0.1
    n_max: int = 4

    def __post_init__(self):
        for name in ("g", "kappa", "gamma", "e1", "e2"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and non-negative, got {value!r}")
        for name in ("detuning1", "delta"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if int(self.n_max) != self.n_max or self.n_max < 0:
            raise ValueError(f"n_max must be a non-negative integer, got {self.n_max!r}")

    @property
    def dim(self) -> int:
        return 2 * (self.n_max + 1)

    @property
    def delta_tilde(self) -> float:
        """Normalized scanning detuning (omega_2 - omega) / (omega - omega_1)."""
        return self.delta / self.detuning1 - 1.0

    def at_delta_tilde(self, delta_tilde: float) -> "SystemParams":
        """Return a copy with ``delta`` set from the normalized detuning."""
        return replace(self, delta=self.detuning1 * (1.0 + delta_tilde))

    def with_(self, **changes) -> "SystemParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class OperatorSet:
    n_max: int
    a: np.ndarray = field(repr=False)
    a_dag: np.ndarray = field(repr=False)
    sigma_plus: np.ndarray = field(repr=False)
    sigma_minus: np.ndarray = field(repr=False)
    sigma_z: np.ndarray = field(repr=False)
    number: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return 2 * (self.n_max + 1)

    @property
    def identity(self) -> np.ndarray:
        return np.eye(self.dim, dtype=complex)


def basis_index(n_fock: int, atom: int) -> int:
    return 2 * n_fock + atom


def build_operator_set(n_max: int) -> OperatorSet:
    if int(n_max) != n_max or n_max < 0:
        raise ValueError(f"n_max must be a non-negative integer, got {n_max!r}")
    n_max = int(n_max)
    nf = n_max + 1
    a_field = np.diag(np.sqrt(np.arange(1, nf, dtype=float)), k=1).astype(complex)
    lower = np.zeros((2, 2), dtype=complex)
    lower[GROUND, EXCITED] = 1.0
    inversion = np.diag([-0.5, 0.5]).astype(complex)
    eye_f = np.eye(nf, dtype=complex)
    eye_a = np.eye(2, dtype=complex)

    a = np.kron(a_field, eye_a)
    sm = np.kron(eye_f, lower)
    return OperatorSet(
        n_max=n_max,
        a=a,
        a_dag=a.conj().T.copy(),
        sigma_plus=sm.conj().T.copy(),
        sigma_minus=sm,
        sigma_z=np.kron(eye_f, inversion),
        number=a.conj().T @ a,
    )


def jc_hamiltonian(params: SystemParams, frame: str = "rotating", omega: float | None = None,
                   ops: OperatorSet | None = None) -> np.ndarray:
    """Hermitian Jaynes-Cummings Hamiltonian.

    ``frame="rotating"`` uses omega - omega_1 (``params.detuning1``) as the
    level spacing; ``frame="lab"`` uses ``omega`` (defaults to the same value,
    since absolute frequencies never enter the dynamics).
    """
    ops = ops or build_operator_set(params.n_max)
    if frame == "rotating":
        spacing = params.detuning1
    elif frame == "lab":
        spacing = params.detuning1 if omega is None else omega
    else:
        raise ValueError(f"unknown frame {frame!r}")
    coupling = ops.a_dag @ ops.sigma_minus - ops.a @ ops.sigma_plus
    return spacing * (ops.sigma_z + ops.number) + 1j * params.g * coupling


def dressed_state(n: int, branch: str, n_max: int) -> np.ndarray:
    """Dressed state |n>_+ or |n>_- of couplet ``n`` as a state vector.

    |n>_± = (i/√2)(|n-1, e> ± i|n, g>). Its energy in the rotating frame is
    (omega - omega_1)(n - 1/2) ± √n g.
    """
    if branch not in ("+", "-"):
        raise ValueError(f"branch must be '+' or '-', got {branch!r}")
    if int(n) != n or n < 1:
        raise ValueError(f"couplet index must be a positive integer, got {n!r}")
    if n > n_max:
        raise ValueError(f"couplet {n} exceeds the photon cutoff n_max={n_max}")
    sign = 1.0 if branch == "+" else -1.0
    psi = np.zeros(2 * (n_max + 1), dtype=complex)
    psi[basis_index(n - 1, EXCITED)] = 1j / np.sqrt(2.0)
    psi[basis_index(n, GROUND)] = (1j / np.sqrt(2.0)) * (sign * 1j)
    return psi


def ground_state(n_max: int) -> np.ndarray:
    psi = np.zeros(2 * (n_max + 1), dtype=complex)
    psi[basis_index(0, GROUND)] = 1.0
    return psi


def fock_projector(n_fock: int, atom: int, n_max: int) -> np.ndarray:
    """Density matrix |n, atom><n, atom|."""
    rho = np.zeros((2 * (n_max + 1),) * 2, dtype=complex)
    k = basis_index(n_fock, atom)
    rho[k, k] = 1.0
    return rho


def dressed_energy(n: int, branch: str, params: SystemParams) -> float:
    sign = 1.0 if branch == "+" else -1.0
    return params.detuning1 * (n - 0.5) + sign * np.sqrt(n) * params.g
