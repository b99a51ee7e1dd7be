import itertools

import numpy as np
import pytest
import scipy.linalg
from scipy.stats import unitary_group

from fisherlab import circuit as qc


def dense_operator(op, targets, n):
    """Full 2^n matrix of ``op`` on ``targets`` by explicit index bookkeeping."""
    dim = 2**n
    k = len(targets)
    full = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        bits = [(col >> (n - 1 - q)) & 1 for q in range(n)]
        sub_in = sum(bits[t] << (k - 1 - j) for j, t in enumerate(targets))
        for sub_out in range(2**k):
            amp = op[sub_out, sub_in]
            if amp == 0:
                continue
            out_bits = list(bits)
            for j, t in enumerate(targets):
                out_bits[t] = (sub_out >> (k - 1 - j)) & 1
            row = sum(b << (n - 1 - q) for q, b in enumerate(out_bits))
            full[row, col] += amp
    return full


def dense_unitary(circuit, theta):
    """Oracle: product of full matrices, rotation gates through scipy's expm."""
    n = circuit.n_qubits
    u = np.eye(2**n, dtype=complex)
    for g in circuit.gates:
        if g.generator is None:
            m = g.unitary
        else:
            m = scipy.linalg.expm(-1j * theta[g.param] * g.generator.matrix)
        u = dense_operator(m, g.targets, n) @ u
    return u


def dense_state(circuit, theta):
    return dense_unitary(circuit, theta)[:, 0]


def fd_state_derivative(circuit, theta, i, h=1e-5):
    plus = np.array(theta, dtype=float)
    minus = plus.copy()
    plus[i] += h
    minus[i] -= h
    return (dense_state(circuit, plus) - dense_state(circuit, minus)) / (2 * h)


def random_pauli_circuit(rng, n_qubits, depth, max_params=8):
    """Layers of random Pauli rotations (some two-qubit) interleaved with CNOTs."""
    gates = []
    k = 0
    for layer in range(depth):
        for q in range(n_qubits):
            if k >= max_params:
                break
            if n_qubits > 1 and q < n_qubits - 1 and rng.random() < 0.25:
                pauli = "".join(rng.choice(list("XYZ"), size=2))
                gates.append(qc.pauli_rotation(pauli, (q, q + 1), k))
            else:
                gates.append(qc.pauli_rotation(str(rng.choice(list("XYZ"))), (q,), k))
            k += 1
        if n_qubits > 1:
            for q in range(layer % 2, n_qubits - 1, 2):
                gates.append(qc.cnot(q, q + 1))
    return qc.ParamCircuit(n_qubits, tuple(gates))


def random_instance(seed, max_qubits=4, max_depth=6, max_params=8):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, max_qubits + 1))
    depth = int(rng.integers(1, max_depth + 1))
    circ = random_pauli_circuit(rng, n, depth, max_params)
    theta = rng.uniform(-np.pi, np.pi, circ.n_params)
    return circ, theta, rng


def haar_unitary(dim, rng):
    if dim == 1:
        return np.eye(1, dtype=complex)
    return unitary_group.rvs(dim, random_state=rng)


def random_density(dim, rng, rank=None):
    rank = dim if rank is None else rank
    a = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def random_kraus(dim, rng, n_ops=3):
    """Random CPTP map from an isometry split into Kraus blocks."""
    v = unitary_group.rvs(dim * n_ops, random_state=rng)[:, :dim]
    return [v[j * dim:(j + 1) * dim] for j in range(n_ops)]


def apply_kraus(ops, rho):
    return sum(k @ rho @ k.conj().T for k in ops)


def random_stochastic(n_out, n_in, rng):
    t = rng.random((n_out, n_in))
    return t / t.sum(axis=0, keepdims=True)


def hessian_fd(fun, d, eps):
    """Central-difference Hessian of ``fun`` at 0."""
    h = np.zeros((d, d))
    eye = np.eye(d)
    for i, j in itertools.product(range(d), repeat=2):
        ei, ej = eps * eye[i], eps * eye[j]
        h[i, j] = (fun(ei + ej) - fun(ei - ej) - fun(-ei + ej) + fun(-ei - ej)) / (4 * eps**2)
    return h


@pytest.fixture
def ry_circuit():
    return qc.ParamCircuit(1, (qc.ry(0, 0),))


@pytest.fixture
def ry_rz_circuit():
    return qc.ParamCircuit(1, (qc.ry(0, 0), qc.rz(0, 1)))


# lines recorded by test_acceptance, echoed in the terminal summary
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
