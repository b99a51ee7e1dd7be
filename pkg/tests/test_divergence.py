import numpy as np
import pytest

from fisherlab import circuit as qc
from fisherlab.divergence import (
    bures_distance,
    bures_fidelity,
    fidelity_distance,
    fidelity_pure,
    kl_divergence,
    overlap_compute_reverse,
    overlap_swap_test,
    psd_sqrt,
    total_variation,
)
from fisherlab.errors import KLUndefinedError, SizeLimitError
from fisherlab.simulator import run_pure

from conftest import (
    apply_kraus,
    dense_state,
    haar_unitary,
    hessian_fd,
    random_density,
    random_kraus,
    random_pauli_circuit,
    random_stochastic,
)


def kl_oracle(p, q):
    total = 0.0
    for a, b in zip(p, q):
        if a > 0:
            total += a * np.log(a / b)
    return total


@pytest.mark.parametrize("p, q, expected", [
    ([0.3, 0.7], [0.3, 0.7], 0.0),
    ([1.0, 0.0], [0.5, 0.5], np.log(2)),
    ([0.5, 0.5], [0.25, 0.75], 0.5 * np.log(4 / 3)),
])
def test_kl_examples(p, q, expected):
    assert kl_divergence(np.array(p), np.array(q)) == pytest.approx(expected, abs=1e-12)


def test_kl_matches_summation_oracle():
    rng = np.random.default_rng(0)
    for _ in range(20):
        p, q = rng.dirichlet(np.ones(6)), rng.dirichlet(np.ones(6))
        value = kl_divergence(p, q)
        assert value == pytest.approx(kl_oracle(p, q), rel=1e-12)
        assert value >= 0


def test_kl_support_violation():
    with pytest.raises(KLUndefinedError, match="KL undefined"):
        kl_divergence(np.array([0.5, 0.5]), np.array([1.0, 0.0]))


def test_kl_monotone_under_stochastic_maps():
    rng = np.random.default_rng(1)
    for _ in range(50):
        p, q = rng.dirichlet(np.ones(5)), rng.dirichlet(np.ones(5))
        t = random_stochastic(3, 5, rng)
        assert kl_divergence(t @ p, t @ q) <= kl_divergence(p, q) + 1e-10


@pytest.mark.parametrize("p, q, expected", [
    ([0.2, 0.8], [0.2, 0.8], 0.0),
    ([1.0, 0.0], [0.0, 1.0], 1.0),
    ([0.5, 0.5], [0.25, 0.75], 0.25),
])
def test_total_variation_examples(p, q, expected):
    assert total_variation(np.array(p), np.array(q)) == pytest.approx(expected, abs=1e-15)


def test_pure_fidelity_examples():
    zero, one = np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)
    plus = np.array([1, 1]) / np.sqrt(2)
    assert fidelity_pure(zero, zero) == pytest.approx(1)
    assert fidelity_pure(zero, one) == 0
    assert fidelity_pure(zero, plus) == pytest.approx(0.5)
    assert fidelity_distance(zero, zero) == pytest.approx(0, abs=1e-15)
    assert fidelity_distance(zero, one) == 1
    assert fidelity_distance(zero, plus) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        fidelity_pure(zero, np.ones(4))


def test_psd_sqrt_squares_back():
    rho = random_density(4, np.random.default_rng(2), rank=2)
    root = psd_sqrt(rho)
    np.testing.assert_allclose(root @ root, rho, atol=1e-10)
    with pytest.raises(ValueError):
        psd_sqrt(np.diag([1.0, -0.1]))


def test_bures_examples():
    rho = random_density(4, np.random.default_rng(3))
    zero = np.diag([1.0, 0.0]).astype(complex)
    assert bures_fidelity(rho, rho) == pytest.approx(1, abs=1e-9)
    assert bures_fidelity(zero, np.eye(2) / 2) == pytest.approx(0.5, abs=1e-12)
    assert bures_distance(rho, rho) == pytest.approx(0, abs=1e-9)
    assert bures_distance(zero, np.eye(2) / 2) == pytest.approx(1, abs=1e-12)


def test_bures_reduces_to_pure_fidelity():
    rng = np.random.default_rng(4)
    for _ in range(10):
        u, w = haar_unitary(4, rng), haar_unitary(4, rng)
        psi, phi = u[:, 0], w[:, 0]
        expected = abs(np.vdot(psi, phi)) ** 2
        value = bures_fidelity(np.outer(psi, psi.conj()), np.outer(phi, phi.conj()))
        assert value == pytest.approx(expected, abs=1e-9)
        assert value == pytest.approx(fidelity_pure(psi, phi), abs=1e-9)


def test_bures_range_and_unitary_invariance():
    rng = np.random.default_rng(5)
    for _ in range(20):
        rho, sigma = random_density(4, rng), random_density(4, rng, rank=2)
        u = haar_unitary(4, rng)
        f = bures_fidelity(rho, sigma)
        assert 0 <= f <= 1 + 1e-9
        rotated = bures_distance(u @ rho @ u.conj().T, u @ sigma @ u.conj().T)
        assert rotated == pytest.approx(bures_distance(rho, sigma), abs=1e-9)


def test_bures_monotone_under_channels():
    rng = np.random.default_rng(6)
    for _ in range(30):
        rho, sigma = random_density(4, rng), random_density(4, rng)
        ops = random_kraus(4, rng)
        after = bures_distance(apply_kraus(ops, rho), apply_kraus(ops, sigma))
        assert after <= bures_distance(rho, sigma) + 1e-9


def test_compute_reverse_examples(ry_circuit):
    assert overlap_compute_reverse(ry_circuit, [0.7], [0.7]) == pytest.approx(1, abs=1e-12)
    assert overlap_compute_reverse(ry_circuit, [0.0], [np.pi]) == pytest.approx(0, abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_compute_reverse_matches_direct_fidelity(seed):
    rng = np.random.default_rng(seed)
    circ = random_pauli_circuit(rng, 3, 3)
    a, b = rng.uniform(-np.pi, np.pi, (2, circ.n_params))
    direct = fidelity_pure(dense_state(circ, a), dense_state(circ, b))
    assert overlap_compute_reverse(circ, a, b) == pytest.approx(direct, abs=1e-10)


def test_swap_test_analytic(ry_circuit):
    assert overlap_swap_test(ry_circuit, [0.4], [0.4]) == pytest.approx(1, abs=1e-12)
    assert overlap_swap_test(ry_circuit, [0.0], [np.pi]) == pytest.approx(0, abs=1e-12)
    assert overlap_compute_reverse(ry_circuit, [0.0], [np.pi]) == pytest.approx(0, abs=1e-12)


def test_swap_test_expectation_equals_overlap():
    rng = np.random.default_rng(7)
    circ = random_pauli_circuit(rng, 2, 3)
    a, b = rng.uniform(-np.pi, np.pi, (2, circ.n_params))
    exact = overlap_swap_test(circ, a, b)
    assert exact == pytest.approx(overlap_compute_reverse(circ, a, b), abs=1e-10)
    # binomial 3 sigma at 1e5 shots on a +/-1 variable is at most 0.0095
    estimate = overlap_swap_test(circ, a, b, shots=10**5, seed=11)
    assert abs(estimate - exact) < 0.01
    assert estimate == overlap_swap_test(circ, a, b, shots=10**5, seed=11)


def test_swap_test_size_limit():
    circ = qc.ParamCircuit(6, (qc.ry(0, 0),))
    with pytest.raises(SizeLimitError):
        overlap_swap_test(circ, [0.1], [0.2])


@pytest.mark.parametrize("seed", range(4))
def test_sqrt_fidelity_hessian_is_half(seed):
    rng = np.random.default_rng(20 + seed)
    circ = random_pauli_circuit(rng, 2, 2, max_params=1)
    theta = rng.uniform(-np.pi, np.pi, 1)
    psi = run_pure(circ, theta)

    def fid(delta):
        return fidelity_pure(psi, run_pure(circ, theta + delta))

    h_lin = hessian_fd(lambda d: 1 - fid(d), 1, 1e-3)
    h_sqrt = hessian_fd(lambda d: 1 - np.sqrt(fid(d)), 1, 1e-3)
    np.testing.assert_allclose(h_sqrt, 0.5 * h_lin, atol=1e-5)
