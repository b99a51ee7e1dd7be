"""Dense statevector and density-matrix simulation.

States are plain numpy arrays: a pure state is a complex vector of length
``2**n``, a mixed state a ``2**n x 2**n`` complex matrix.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .circuit import ParamCircuit, Observable, PAULI, H, as_params, check
from .errors import ChannelError, CircuitError, MeasurementError, SizeLimitError

MAX_STATEVECTOR_QUBITS = 12
MAX_DENSITY_QUBITS = 7
ZERO_TOL = 1e-10


def max_qubits(kind: str = "statevector") -> int:
    """Qubit cap for ``kind``; ``FISHERLAB_MAX_QUBITS`` overrides both caps."""
    env = os.environ.get("FISHERLAB_MAX_QUBITS")
    if env:
        return int(env)
    return MAX_DENSITY_QUBITS if kind == "density" else MAX_STATEVECTOR_QUBITS


def _check_size(n: int, kind: str) -> None:
    cap = max_qubits(kind)
    if n > cap:
        raise SizeLimitError(f"{n} qubits exceeds the {kind} limit of {cap}")


def apply_op(state: np.ndarray, op: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """Apply a ``k``-qubit operator to ``targets`` of an ``n``-qubit vector."""
    k = len(targets)
    psi = state.reshape((2,) * n)
    out = np.tensordot(op.reshape((2,) * (2 * k)), psi, axes=(range(k, 2 * k), targets))
    return np.moveaxis(out, range(k), targets).reshape(-1)


def _apply_left(rho: np.ndarray, op: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    k = len(targets)
    t = rho.reshape((2,) * (2 * n))
    out = np.tensordot(op.reshape((2,) * (2 * k)), t, axes=(range(k, 2 * k), targets))
    return np.moveaxis(out, range(k), targets).reshape(rho.shape)


def conjugate(rho: np.ndarray, op: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """Return ``op rho op^dagger`` with ``op`` acting on ``targets``."""
    left = _apply_left(rho, op, targets, n)
    return _apply_left(left.conj().T, op, targets, n).conj().T


def embed(op: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """Full ``2**n`` matrix of ``op`` acting on ``targets``."""
    dim = 2**n
    cols = [apply_op(e, op, targets, n) for e in np.eye(dim, dtype=complex)]
    return np.array(cols).T


@dataclass(frozen=True, eq=False)
class NoiseChannel:
    """CPTP map given by Kraus operators on ``targets``."""

    kraus: tuple[np.ndarray, ...]
    targets: tuple[int, ...]

    def __post_init__(self):
        kraus = tuple(np.asarray(k, dtype=complex) for k in self.kraus)
        object.__setattr__(self, "kraus", kraus)
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        dim = 2 ** len(self.targets)
        if not kraus or any(k.shape != (dim, dim) for k in kraus):
            raise ChannelError(f"Kraus operators must be {dim}x{dim}")
        total = sum(k.conj().T @ k for k in kraus)
        if np.max(np.abs(total - np.eye(dim))) > 1e-9:
            raise ChannelError("Kraus operators are not trace preserving")

    def apply(self, rho: np.ndarray, n: int) -> np.ndarray:
        if max(self.targets) >= n:
            raise ChannelError(f"channel targets {self.targets} outside {n}-qubit register")
        return sum(conjugate(rho, k, self.targets, n) for k in self.kraus)


def depolarizing(p: float, target: int) -> NoiseChannel:
    """``rho -> (1-p) rho + p I/2`` on one qubit."""
    _check_prob(p)
    ops = [np.sqrt(1 - 3 * p / 4) * PAULI["I"]] + [np.sqrt(p / 4) * PAULI[c] for c in "XYZ"]
    return NoiseChannel(tuple(ops), (target,))


def dephasing(p: float, target: int) -> NoiseChannel:
    """Shrinks off-diagonal elements by ``1 - p``."""
    _check_prob(p)
    return NoiseChannel((np.sqrt(1 - p / 2) * PAULI["I"], np.sqrt(p / 2) * PAULI["Z"]), (target,))


def amplitude_damping(p: float, target: int) -> NoiseChannel:
    _check_prob(p)
    k0 = np.array([[1, 0], [0, np.sqrt(1 - p)]], dtype=complex)
    k1 = np.array([[0, np.sqrt(p)], [0, 0]], dtype=complex)
    return NoiseChannel((k0, k1), (target,))


def _check_prob(p: float) -> None:
    if not 0 <= p <= 1:
        raise ChannelError(f"noise probability {p} not in [0, 1]")


NoiseSpec = Mapping[int, "NoiseChannel | Sequence[NoiseChannel]"]


def _channels_after(noise: NoiseSpec | None, k: int) -> Sequence[NoiseChannel]:
    if not noise or k not in noise:
        return ()
    entry = noise[k]
    return (entry,) if isinstance(entry, NoiseChannel) else tuple(entry)


def zero_state(n: int) -> np.ndarray:
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = 1
    return psi


def run_pure(circuit: ParamCircuit, theta: Sequence[float] | None = None,
             initial: np.ndarray | None = None) -> np.ndarray:
    """Statevector ``U(theta)|0...0>`` (or ``U(theta)|initial>``)."""
    check(circuit)
    n = circuit.n_qubits
    _check_size(n, "statevector")
    theta = as_params(circuit, theta)
    psi = zero_state(n) if initial is None else np.asarray(initial, dtype=complex)
    for gate in circuit.gates:
        psi = apply_op(psi, gate.matrix(theta), gate.targets, n)
    return psi


def run_mixed(circuit: ParamCircuit, theta: Sequence[float] | None = None,
              noise: NoiseSpec | None = None) -> np.ndarray:
    """Density matrix after the circuit, applying ``noise[k]`` right after gate ``k``.

    Key ``-1`` applies channels to the initial state before any gate.
    """
    check(circuit)
    n = circuit.n_qubits
    _check_size(n, "density")
    theta = as_params(circuit, theta)
    rho = np.zeros((2**n, 2**n), dtype=complex)
    rho[0, 0] = 1
    for ch in _channels_after(noise, -1):
        rho = ch.apply(rho, n)
    for k, gate in enumerate(circuit.gates):
        rho = conjugate(rho, gate.matrix(theta), gate.targets, n)
        for ch in _channels_after(noise, k):
            rho = ch.apply(rho, n)
    return rho


def derivative_state(circuit: ParamCircuit, theta: Sequence[float], i: int) -> np.ndarray:
    """Unnormalized ``d|psi(theta)>/d theta_i`` by inserting ``-i G_i`` after gate ``i``."""
    check(circuit)
    theta = as_params(circuit, theta)
    if i not in circuit.param_gate:
        raise CircuitError(f"parameter {i} does not drive any rotation gate")
    n = circuit.n_qubits
    _check_size(n, "statevector")
    g_idx = circuit.param_gate[i]
    psi = zero_state(n)
    for k, gate in enumerate(circuit.gates):
        psi = apply_op(psi, gate.matrix(theta), gate.targets, n)
        if k == g_idx:
            psi = apply_op(psi, -1j * gate.generator.matrix, gate.targets, n)
    return psi


@dataclass(frozen=True, eq=False)
class Measurement:
    """Measurement ``{Pi_l}``.

    Projective measurements store only the orthonormal ``basis`` (columns);
    the effects are then built on demand.
    """

    basis: np.ndarray | None = None
    povm: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        if (self.basis is None) == (self.povm is None):
            raise MeasurementError("give exactly one of basis or povm")
        if self.basis is not None:
            b = np.asarray(self.basis, dtype=complex)
            if b.ndim != 2 or b.shape[0] != b.shape[1]:
                raise MeasurementError("basis must be a square matrix")
            if np.max(np.abs(b.conj().T @ b - np.eye(b.shape[0]))) > 1e-9:
                raise MeasurementError("basis vectors are not orthonormal")
            object.__setattr__(self, "basis", b)
        else:
            povm = tuple(np.asarray(e, dtype=complex) for e in self.povm)
            dim = povm[0].shape[0]
            for e in povm:
                if e.shape != (dim, dim) or np.max(np.abs(e - e.conj().T)) > 1e-9:
                    raise MeasurementError("effects must be Hermitian and equally sized")
                if np.linalg.eigvalsh(e)[0] < -1e-9:
                    raise MeasurementError("effect is not positive semidefinite")
            if np.max(np.abs(sum(povm) - np.eye(dim))) > 1e-9:
                raise MeasurementError("effects do not sum to identity")
            object.__setattr__(self, "povm", povm)

    @classmethod
    def computational(cls, n: int) -> "Measurement":
        return cls(basis=np.eye(2**n, dtype=complex))

    @classmethod
    def pauli_basis(cls, letters: str) -> "Measurement":
        """Product eigenbasis of single-qubit Paulis, one letter per qubit."""
        rot = {"Z": np.eye(2), "X": H, "Y": np.array([[1, 1], [1j, -1j]]) / np.sqrt(2)}
        b = np.array([[1.0]], dtype=complex)
        for c in letters.upper():
            b = np.kron(b, rot[c])
        return cls(basis=b)

    @property
    def dim(self) -> int:
        return self.basis.shape[0] if self.basis is not None else self.povm[0].shape[0]

    @cached_property
    def effects(self) -> tuple[np.ndarray, ...]:
        if self.povm is not None:
            return self.povm
        return tuple(np.outer(v, v.conj()) for v in self.basis.T)

    def __len__(self) -> int:
        return self.dim if self.basis is not None else len(self.povm)


def probabilities(state: np.ndarray, m: Measurement) -> np.ndarray:
    """Outcome distribution ``p_l = Tr{rho Pi_l}``; negative round-off clamped to 0."""
    state = np.asarray(state)
    if state.shape[0] != m.dim:
        raise MeasurementError(f"state dimension {state.shape[0]} does not match measurement {m.dim}")
    if state.ndim == 1:
        if m.basis is not None:
            p = np.abs(m.basis.conj().T @ state) ** 2
        else:
            p = np.array([np.real(np.vdot(state, e @ state)) for e in m.povm])
    else:
        if m.basis is not None:
            p = np.real(np.einsum("ik,ij,jk->k", m.basis.conj(), state, m.basis))
        else:
            p = np.array([np.real(np.trace(state @ e)) for e in m.povm])
    p = np.where(p < 0, 0.0, p)
    total = p.sum()
    if abs(1 - total) > 1e-9:
        raise MeasurementError(f"probabilities sum to {total}, state not normalized")
    return p / total


def expectation(state: np.ndarray, obs: Observable) -> float:
    """``sum_l p_l h_l`` in the eigenbasis of ``obs``."""
    vals, vecs = obs.eig
    state = np.asarray(state)
    if state.ndim == 1:
        p = np.abs(vecs.conj().T @ state) ** 2
    else:
        p = np.real(np.einsum("ik,ij,jk->k", vecs.conj(), state, vecs))
    return float(p @ vals)


def sample(probs: np.ndarray, shots: int, seed=None) -> np.ndarray:
    """Multinomial outcome counts; deterministic for a fixed ``seed``."""
    if shots < 0:
        raise ValueError("shots must be non-negative")
    p = np.clip(np.asarray(probs, dtype=float), 0, None)
    return np.random.default_rng(seed).multinomial(int(shots), p / p.sum())


class Spectrum(NamedTuple):
    values: np.ndarray
    vectors: np.ndarray
    zero: np.ndarray


def eigendecompose(rho: np.ndarray, zero_tol: float = ZERO_TOL) -> Spectrum:
    """Descending eigenpairs of ``rho``; eigenvalues below ``zero_tol`` set to 0 and flagged."""
    vals, vecs = np.linalg.eigh(rho)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    zero = vals < zero_tol
    return Spectrum(np.where(zero, 0.0, vals), vecs, zero)
