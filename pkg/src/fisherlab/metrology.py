"""Cramér-Rao bounds, sensing experiments and Fisher-spectrum capacity measures.

A sensing model is three circuits on one register: a probe preparing the
input state (parameters ``theta``), an encoding imprinting the physical
parameters ``phi``, and a measurement stage (parameters ``mu``) followed by a
computational-basis readout.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import xlogy

from .circuit import ParamCircuit, check, cnot, hadamard, phase_rotation
from .errors import NotIdentifiableError, SizeLimitError
from .fisher import (
    FisherMatrix,
    cfim_from_distribution,
    prob_jacobian,
    qfim_pure,
    symmetrize,
    _default_mode,
)
from .simulator import Measurement, max_qubits, probabilities, run_pure, sample

SINGULAR_TOL = 1e-10
RANK_TOL = 1e-8
MLE_GRID_POINTS = 10_000
FLAT_TOL = 1e-9


def _inverse(m: FisherMatrix | np.ndarray) -> np.ndarray:
    m = symmetrize(np.atleast_2d(np.asarray(m, dtype=float)))
    eig = np.linalg.eigvalsh(m)
    if eig.size and eig[0] <= SINGULAR_TOL * max(1.0, eig[-1]):
        raise NotIdentifiableError(
            f"parameter not identifiable: Fisher matrix singular (min eigenvalue {eig[0]:.3g})")
    return np.linalg.inv(m)


def crb_bound(fim: FisherMatrix | np.ndarray, n: int) -> np.ndarray:
    """Covariance lower bound ``I^-1 / n`` after ``n`` repetitions."""
    if n <= 0:
        raise ValueError("number of repetitions must be positive")
    return symmetrize(_inverse(fim) / n)


def qcrb_bound(qfim: FisherMatrix | np.ndarray, n: int) -> np.ndarray:
    """Measurement-independent bound ``F^-1 / n``."""
    return crb_bound(qfim, n)


def weighted_bound(weight: np.ndarray, fim: FisherMatrix | np.ndarray, n: int) -> float:
    """Scalar bound ``Tr{W M^-1} / n``; ``W = 1`` bounds the mean-squared error."""
    weight = np.atleast_2d(np.asarray(weight, dtype=float))
    if weight.size and np.linalg.eigvalsh(symmetrize(weight))[0] < -1e-9:
        raise ValueError("weight matrix must be positive semidefinite")
    return float(np.trace(weight @ crb_bound(fim, n)))


@dataclass(frozen=True, eq=False)
class SensingModel:
    """Probe, encoding and measurement stage, each indexed from parameter 0."""

    probe: ParamCircuit
    encoding: ParamCircuit
    measurement_stage: ParamCircuit

    def __post_init__(self):
        n = self.probe.n_qubits
        for part in (self.probe, self.encoding, self.measurement_stage):
            check(part)
            if part.n_qubits != n:
                raise ValueError("all stages must act on the same register")

    @property
    def n_qubits(self) -> int:
        return self.probe.n_qubits

    @property
    def sizes(self) -> tuple[int, int, int]:
        return self.probe.n_params, self.encoding.n_params, self.measurement_stage.n_params

    def phi_slice(self) -> slice:
        return slice(self.sizes[0], self.sizes[0] + self.sizes[1])

    def compose(self, with_measurement: bool = True) -> ParamCircuit:
        """Single circuit over the concatenated vector ``(theta, phi, mu)``."""
        n = self.n_qubits
        qubits = range(n)
        dt, dp, _ = self.sizes
        circ = self.probe.compose(self.encoding.relabel(qubits, n, dt))
        if with_measurement:
            circ = circ.compose(self.measurement_stage.relabel(qubits, n, dt + dp))
        return circ

    def params(self, theta=None, phi=None, mu=None, with_measurement: bool = True) -> np.ndarray:
        parts = [theta, phi, mu] if with_measurement else [theta, phi]
        out = []
        for values, size in zip(parts, self.sizes):
            values = np.zeros(size) if values is None else np.atleast_1d(np.asarray(values, dtype=float))
            if values.shape[0] != size:
                raise ValueError(f"expected {size} values, got {values.shape[0]}")
            out.append(values)
        return np.concatenate(out)

    def distribution(self, theta=None, phi=None, mu=None) -> np.ndarray:
        psi = run_pure(self.compose(), self.params(theta, phi, mu))
        return probabilities(psi, Measurement.computational(self.n_qubits))


def sensing_cfim(model: SensingModel, theta=None, phi=None, mu=None) -> FisherMatrix:
    """CFIM of the computational readout with respect to ``phi`` only."""
    circ = model.compose()
    params = model.params(theta, phi, mu)
    m = Measurement.computational(model.n_qubits)
    p = probabilities(run_pure(circ, params), m)
    jac = prob_jacobian(circ, params, m, mode=_default_mode(circ))[:, model.phi_slice()]
    return FisherMatrix(cfim_from_distribution(p, jac), "classical", "exact", {"block": "phi"})


def sensing_qfim(model: SensingModel, theta=None, phi=None) -> FisherMatrix:
    """QFIM of probe plus encoding with respect to ``phi``; independent of ``mu``."""
    circ = model.compose(with_measurement=False)
    full = qfim_pure(circ, model.params(theta, phi, with_measurement=False)).entries
    block = model.phi_slice()
    return FisherMatrix(full[block, block], "quantum", "exact", {"block": "phi"})


def ghz_probe(n: int) -> ParamCircuit:
    """``(|0...0> + |1...1>)/sqrt(2)`` from a Hadamard and a CNOT chain."""
    return ParamCircuit(n, (hadamard(0),) + tuple(cnot(q, q + 1) for q in range(n - 1)))


def plus_probes(n: int) -> ParamCircuit:
    """``n`` unentangled ``|+>`` probes."""
    return ParamCircuit(n, tuple(hadamard(q) for q in range(n)))


def collective_phase(n: int) -> ParamCircuit:
    """One phase ``phi`` per excitation on every qubit, generator ``sum_j |1><1|_j``."""
    return ParamCircuit(n, (phase_rotation(range(n), 0),))


def ghz_model(n: int) -> SensingModel:
    """GHZ probe with parity readout (probe undone, then Hadamard on qubit 0)."""
    readout = ParamCircuit(n, tuple(cnot(q, q + 1) for q in reversed(range(n - 1))) + (hadamard(0),))
    return SensingModel(ghz_probe(n), collective_phase(n), readout)


def separate_model(n: int) -> SensingModel:
    """``n`` independent ``|+>`` probes read out in the X basis."""
    return SensingModel(plus_probes(n), collective_phase(n), plus_probes(n))


@dataclass
class ScalingResult:
    strategy: str
    n: np.ndarray
    fisher: np.ndarray
    slope: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "qfi", "strategy"])
        for n, f in zip(self.n, self.fisher):
            w.writerow([int(n), repr(float(f)), self.strategy])
        return buf.getvalue()


def scaling_experiment(n_range: Sequence[int], strategy: str = "ghz", phi: float = 0.0) -> ScalingResult:
    """QFI versus probe number and the log-log slope of ``F(n)``."""
    builders = {"ghz": ghz_model, "separate": separate_model}
    if strategy not in builders:
        raise ValueError(f"strategy must be one of {sorted(builders)}")
    ns = np.array(sorted(int(n) for n in n_range))
    if ns.size == 0 or ns[0] < 1:
        raise ValueError("probe numbers must be positive")
    if ns[-1] > max_qubits("statevector"):
        raise SizeLimitError(f"{ns[-1]} probes exceeds the statevector limit")
    values = np.array([sensing_qfim(builders[strategy](int(n)), phi=[phi]).entries[0, 0] for n in ns])
    slope = float(np.polyfit(np.log(ns), np.log(values), 1)[0]) if ns.size > 1 else float("nan")
    return ScalingResult(strategy, ns, values, slope)


@dataclass
class EstimatorResult:
    estimates: np.ndarray
    true_value: float
    shots: int
    fisher: float

    @property
    def mean(self) -> float:
        return float(np.mean(self.estimates))

    @property
    def variance(self) -> float:
        return float(np.var(self.estimates, ddof=1))

    @property
    def variance_stderr(self) -> float:
        """Standard error of the sample variance under a normal approximation."""
        r = self.estimates.shape[0]
        return self.variance * float(np.sqrt(2.0 / (r - 1)))

    @property
    def crb(self) -> float:
        return 1.0 / (self.fisher * self.shots)

    @property
    def ratio(self) -> float:
        return self.variance / self.crb

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["repeat", "estimate"])
        for k, e in enumerate(self.estimates):
            w.writerow([k, repr(float(e))])
        return buf.getvalue()


def mle_estimate(model: SensingModel, true_phi: float, shots: int, grid: np.ndarray | None = None,
                 seed=None, repeats: int = 200, theta=None, mu=None) -> EstimatorResult:
    """Grid maximum-likelihood estimates of a single phase over independent repeats.

    The default grid has 10^4 points on ``[0, pi]``.
    """
    if model.sizes[1] != 1:
        raise ValueError("maximum-likelihood estimation supports a single physical parameter")
    if repeats < 2:
        raise ValueError("need at least two repeats to estimate a variance")
    grid = np.linspace(0.0, np.pi, MLE_GRID_POINTS) if grid is None else np.asarray(grid, dtype=float)
    circ = model.compose()
    m = Measurement.computational(model.n_qubits)

    def dist(phi: float) -> np.ndarray:
        return probabilities(run_pure(circ, model.params(theta, [phi], mu)), m)

    table = np.array([dist(g) for g in grid])
    p_true = dist(true_phi)
    fisher = sensing_cfim(model, theta, [true_phi], mu).entries[0, 0]
    estimates = np.empty(repeats)
    for k, child in enumerate(np.random.SeedSequence(seed).spawn(repeats)):
        counts = sample(p_true, shots, child)
        loglik = xlogy(counts[None, :], table).sum(axis=1)
        best = np.max(loglik)
        # round-off leaves ~1e-16 ripples on a likelihood that is flat in exact arithmetic
        if not np.isfinite(best) or best - np.min(loglik) <= FLAT_TOL * max(1.0, abs(best)):
            raise NotIdentifiableError("non-identifiable on grid: likelihood is flat")
        estimates[k] = grid[int(np.argmax(loglik))]
    return EstimatorResult(estimates, float(true_phi), int(shots), float(fisher))


def fisher_spectrum(fim: FisherMatrix | np.ndarray) -> np.ndarray:
    """Eigenvalues of the symmetrized matrix, largest first."""
    return np.linalg.eigvalsh(symmetrize(np.atleast_2d(np.asarray(fim, dtype=float))))[::-1]


def effective_quantum_dimension(qfim: FisherMatrix | np.ndarray, rank_tol: float = RANK_TOL) -> int:
    """Numerical rank: eigenvalues above ``rank_tol`` times the largest one."""
    vals = fisher_spectrum(qfim)
    if vals.size == 0:
        return 0
    return int(np.sum(vals > rank_tol * max(vals[0], 1e-12)))
