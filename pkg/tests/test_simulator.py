import numpy as np
import pytest

from fisherlab import circuit as qc
from fisherlab.errors import ChannelError, CircuitError, MeasurementError, SizeLimitError
from fisherlab.simulator import (
    Measurement,
    NoiseChannel,
    amplitude_damping,
    dephasing,
    depolarizing,
    derivative_state,
    eigendecompose,
    expectation,
    probabilities,
    run_mixed,
    run_pure,
    sample,
)

from conftest import (
    dense_state,
    fd_state_derivative,
    haar_unitary,
    random_density,
    random_instance,
    random_kraus,
    random_pauli_circuit,
)


def test_empty_circuit():
    np.testing.assert_array_equal(run_pure(qc.ParamCircuit(1)), [1, 0])


@pytest.mark.parametrize("theta, expected", [
    (np.pi, [0, 1]),
    (np.pi / 2, [1 / np.sqrt(2), 1 / np.sqrt(2)]),
])
def test_ry_states(ry_circuit, theta, expected):
    np.testing.assert_allclose(run_pure(ry_circuit, [theta]), expected, atol=1e-12)


@pytest.mark.parametrize("seed", range(8))
def test_run_pure_matches_dense_oracle(seed):
    circ, theta, _ = random_instance(seed)
    psi = run_pure(circ, theta)
    np.testing.assert_allclose(psi, dense_state(circ, theta), atol=1e-12)
    assert np.linalg.norm(psi) == pytest.approx(1, abs=1e-10)


def test_parameter_count_mismatch(ry_circuit):
    with pytest.raises(CircuitError):
        run_pure(ry_circuit, [0.1, 0.2])


def test_size_limit(monkeypatch):
    circ = qc.ParamCircuit(3)
    monkeypatch.setenv("FISHERLAB_MAX_QUBITS", "2")
    with pytest.raises(SizeLimitError):
        run_pure(circ)
    monkeypatch.delenv("FISHERLAB_MAX_QUBITS")
    with pytest.raises(SizeLimitError):
        run_mixed(qc.ParamCircuit(8))


def test_run_mixed_noiseless_is_pure():
    circ, theta, _ = random_instance(3, max_qubits=3)
    rho = run_mixed(circ, theta)
    psi = run_pure(circ, theta)
    np.testing.assert_allclose(rho, np.outer(psi, psi.conj()), atol=1e-10)
    assert np.sum(np.linalg.eigvalsh(rho) > 1e-10) == 1


def test_full_depolarizing_gives_maximally_mixed(ry_circuit):
    rho = run_mixed(ry_circuit, [0.4], {0: depolarizing(1.0, 0)})
    np.testing.assert_allclose(rho, np.eye(2) / 2, atol=1e-12)


def test_dephasing_against_kraus_sum(ry_circuit):
    p = 0.5
    rho = run_mixed(ry_circuit, [np.pi / 2], {0: dephasing(p, 0)})
    pure = np.full((2, 2), 0.5, dtype=complex)
    k0 = np.sqrt(1 - p / 2) * np.eye(2)
    k1 = np.sqrt(p / 2) * np.diag([1, -1])
    expected = k0 @ pure @ k0.conj().T + k1 @ pure @ k1.conj().T
    np.testing.assert_allclose(rho, expected, atol=1e-12)
    assert rho[0, 1].real == pytest.approx(0.5 * (1 - p))


def test_noise_on_two_qubit_register_matches_dense():
    rng = np.random.default_rng(11)
    circ = random_pauli_circuit(rng, 2, 2)
    theta = rng.uniform(-1, 1, circ.n_params)
    channel = amplitude_damping(0.3, 1)
    rho = run_mixed(circ, theta, {len(circ.gates) - 1: channel})
    psi = dense_state(circ, theta)
    pure = np.outer(psi, psi.conj())
    ops = [np.kron(np.eye(2), k) for k in channel.kraus]
    np.testing.assert_allclose(rho, sum(k @ pure @ k.conj().T for k in ops), atol=1e-12)


@pytest.mark.parametrize("factory", [depolarizing, dephasing, amplitude_damping])
def test_channels_preserve_trace_and_hermiticity(factory):
    rng = np.random.default_rng(4)
    rho = random_density(4, rng)
    out = factory(0.37, 1).apply(rho, 2)
    assert np.trace(out).real == pytest.approx(1, abs=1e-10)
    np.testing.assert_allclose(out, out.conj().T, atol=1e-10)


def test_random_channel_preserves_trace():
    rng = np.random.default_rng(6)
    ch = NoiseChannel(tuple(random_kraus(4, rng)), (0, 2))
    out = ch.apply(random_density(8, rng), 3)
    assert np.trace(out).real == pytest.approx(1, abs=1e-10)
    np.testing.assert_allclose(out, out.conj().T, atol=1e-10)


def test_non_trace_preserving_channel_rejected():
    with pytest.raises(ChannelError):
        NoiseChannel((0.5 * np.eye(2),), (0,))


def test_probabilities_examples():
    m = Measurement.computational(1)
    np.testing.assert_array_equal(probabilities(np.array([1, 0]), m), [1, 0])
    np.testing.assert_allclose(probabilities(np.array([1, 1]) / np.sqrt(2), m), [0.5, 0.5], atol=1e-15)
    basis = Measurement(basis=haar_unitary(2, np.random.default_rng(0)))
    np.testing.assert_allclose(probabilities(np.eye(2) / 2, basis), [0.5, 0.5], atol=1e-12)


def test_povm_and_projective_agree():
    rng = np.random.default_rng(8)
    u = haar_unitary(4, rng)
    proj = Measurement(basis=u)
    povm = Measurement(povm=proj.effects)
    rho = random_density(4, rng)
    psi = u[:, 1] + 0.3 * u[:, 2]
    psi /= np.linalg.norm(psi)
    np.testing.assert_allclose(probabilities(rho, proj), probabilities(rho, povm), atol=1e-12)
    np.testing.assert_allclose(probabilities(psi, proj), probabilities(psi, povm), atol=1e-12)


def test_bad_povm_rejected():
    with pytest.raises(MeasurementError):
        Measurement(povm=(np.diag([1, 0]), np.diag([0, 0.5])))


@pytest.mark.parametrize("seed", range(5))
def test_pure_and_mixed_probabilities_agree(seed):
    circ, theta, rng = random_instance(seed, max_qubits=3)
    m = Measurement(basis=haar_unitary(2**circ.n_qubits, rng))
    np.testing.assert_allclose(probabilities(run_pure(circ, theta), m),
                               probabilities(run_mixed(circ, theta), m), atol=1e-9)


def test_expectation_examples(ry_circuit):
    z = qc.Observable(qc.Z)
    assert expectation(np.array([1, 0]), z) == 1
    for theta in np.linspace(-3, 3, 7):
        assert expectation(run_pure(ry_circuit, [theta]), z) == pytest.approx(np.cos(theta), abs=1e-12)
    assert expectation(np.eye(2) / 2, qc.Observable(qc.X + 0.3 * qc.Z)) == pytest.approx(0, abs=1e-15)


def test_expectation_identity_and_trace():
    rng = np.random.default_rng(2)
    rho = random_density(4, rng)
    obs = qc.Observable.from_paulis({"ZX": 0.7, "YY": -0.2, "IZ": 1.1})
    assert expectation(rho, qc.Observable(np.eye(4))) == pytest.approx(1, abs=1e-10)
    assert expectation(rho, obs) == pytest.approx(np.trace(rho @ obs.matrix).real, abs=1e-10)


def test_sample_examples():
    np.testing.assert_array_equal(sample(np.array([1.0, 0.0]), 100, seed=0), [100, 0])
    np.testing.assert_array_equal(sample(np.array([0.3, 0.7]), 0, seed=0), [0, 0])
    counts = sample(np.array([0.5, 0.5]), 10**6, seed=12345)
    # 3 sigma of a binomial frequency at n = 1e6 is 0.0015
    assert abs(counts[0] / 1e6 - 0.5) < 0.002
    np.testing.assert_array_equal(counts, sample(np.array([0.5, 0.5]), 10**6, seed=12345))
    assert counts.sum() == 10**6


def test_derivative_state_ry_at_zero(ry_circuit):
    dpsi = derivative_state(ry_circuit, [0.0], 0)
    np.testing.assert_allclose(dpsi, [0, 0.5], atol=1e-12)
    np.testing.assert_allclose(dpsi, fd_state_derivative(ry_circuit, [0.0], 0), atol=1e-8)


def test_derivative_norm_bound():
    circ = qc.ParamCircuit(2, (qc.hadamard(0), qc.rx(1, 0), qc.rz(0, 1)))
    theta = [0.4, 1.3]
    for i in range(2):
        assert np.linalg.norm(derivative_state(circ, theta, i)) <= 0.5 + 1e-12


def test_derivative_requires_rotation():
    circ = qc.ParamCircuit(1, (qc.ry(0, 0),), n_params=2)
    with pytest.raises(CircuitError):
        derivative_state(circ, [0.1, 0.2], 1)


@pytest.mark.parametrize("seed", range(10))
def test_derivative_state_matches_finite_differences(seed):
    circ, theta, _ = random_instance(100 + seed)
    for i in range(circ.n_params):
        np.testing.assert_allclose(derivative_state(circ, theta, i),
                                   fd_state_derivative(circ, theta, i), atol=1e-7)


def test_eigendecompose_examples():
    spec = eigendecompose(np.eye(2) / 2)
    np.testing.assert_allclose(spec.values, [0.5, 0.5])
    spec = eigendecompose(np.diag([1.0, 0.0]).astype(complex))
    np.testing.assert_array_equal(spec.values, [1, 0])
    np.testing.assert_array_equal(spec.zero, [False, True])
    spec = eigendecompose(np.diag([0.25, 0.75]).astype(complex))
    np.testing.assert_allclose(spec.values, [0.75, 0.25])
    np.testing.assert_allclose(np.abs(spec.vectors), [[0, 1], [1, 0]], atol=1e-15)


def test_eigendecompose_reconstructs():
    rho = random_density(8, np.random.default_rng(3))
    spec = eigendecompose(rho)
    assert np.all(np.diff(spec.values) <= 0)
    np.testing.assert_allclose((spec.vectors * spec.values) @ spec.vectors.conj().T, rho, atol=1e-9)
