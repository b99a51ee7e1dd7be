"""Distances between distributions and quantum states, and overlap circuits."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .circuit import ParamCircuit, cswap, hadamard
from .errors import KLUndefinedError
from .simulator import run_pure, sample, _check_size

PSD_CLAMP = -1e-9
EIGH_FLOOR = 16 * np.finfo(float).eps


def kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """Relative entropy ``sum_l p_l ln(p_l / q_l)`` in nats."""
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("distributions have different outcome sets")
    support = p > 0
    if np.any(q[support] <= 0):
        raise KLUndefinedError("KL undefined: q vanishes where p does not")
    return float(np.sum(p[support] * np.log(p[support] / q[support])))


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("distributions have different outcome sets")
    return 0.5 * float(np.abs(p - q).sum())


def fidelity_pure(psi: np.ndarray, phi: np.ndarray) -> float:
    """``|<psi|phi>|^2``."""
    if psi.shape != phi.shape:
        raise ValueError(f"dimension mismatch {psi.shape} vs {phi.shape}")
    return float(min(abs(np.vdot(psi, phi)) ** 2, 1.0))


def fidelity_distance(psi: np.ndarray, phi: np.ndarray) -> float:
    return 1.0 - fidelity_pure(psi, phi)


def psd_sqrt(rho: np.ndarray) -> np.ndarray:
    """Positive square root via ``eigh``.

    Slightly negative eigenvalues are clamped. Eigenvalues below the round-off
    floor of ``eigh`` are zeroed too: taking the root of a 1e-17 artefact would
    otherwise inject a spurious 3e-9 component.
    """
    vals, vecs = np.linalg.eigh(rho)
    if vals[0] < PSD_CLAMP:
        raise ValueError(f"matrix is not positive semidefinite (eigenvalue {vals[0]:.3g})")
    floor = EIGH_FLOOR * max(abs(vals[-1]), 1.0) * vals.shape[0]
    vals = np.where(vals > floor, vals, 0.0)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def bures_fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Uhlmann fidelity ``Tr{(rho^1/2 sigma rho^1/2)^1/2}^2``."""
    if rho.shape != sigma.shape:
        raise ValueError(f"dimension mismatch {rho.shape} vs {sigma.shape}")
    root = psd_sqrt(rho)
    inner = root @ sigma @ root
    inner = (inner + inner.conj().T) / 2
    return float(np.real(np.trace(psd_sqrt(inner))) ** 2)


def bures_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    return 2.0 - 2.0 * bures_fidelity(rho, sigma)


def overlap_compute_reverse(circuit: ParamCircuit, theta: Sequence[float],
                            theta_prime: Sequence[float]) -> float:
    """Probability of all zeros after ``U(theta)`` followed by ``U(theta')^dagger``."""
    joined = circuit.bind(theta).compose(circuit.adjoint(theta_prime))
    return float(np.abs(run_pure(joined)[0]) ** 2)


def swap_test_circuit(circuit: ParamCircuit, theta: Sequence[float],
                      theta_prime: Sequence[float]) -> ParamCircuit:
    """Ancilla on qubit 0, ``U(theta)`` on qubits 1..n, ``U(theta')`` on n+1..2n."""
    n = circuit.n_qubits
    total = 2 * n + 1
    first = circuit.bind(theta).relabel(range(1, n + 1), total)
    second = circuit.bind(theta_prime).relabel(range(n + 1, 2 * n + 1), total)
    tail = [cswap(0, 1 + q, n + 1 + q) for q in range(n)] + [hadamard(0)]
    return ParamCircuit(total, (hadamard(0),)).compose(first).compose(second).compose(
        ParamCircuit(total, tuple(tail)))


def overlap_swap_test(circuit: ParamCircuit, theta: Sequence[float], theta_prime: Sequence[float],
                      shots: int | None = None, seed=None) -> float:
    """Ancilla ``<Z>`` of the SWAP test; exact when ``shots`` is None."""
    _check_size(2 * circuit.n_qubits + 1, "statevector")
    psi = run_pure(swap_test_circuit(circuit, theta, theta_prime))
    # ancilla is the most significant qubit: outcome 0 is the first half
    p0 = float(np.sum(np.abs(psi[: psi.shape[0] // 2]) ** 2))
    if shots is None:
        return 2 * p0 - 1
    if shots <= 0:
        raise ValueError("shots must be positive")
    counts = sample(np.array([p0, 1 - p0]), shots, seed)
    return float((counts[0] - counts[1]) / shots)
