"""Gradient descent, quantum natural gradient and SPSA-QNG on expectation values."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
import scipy.linalg

from .circuit import Observable, ParamCircuit, as_params, check, shift
from .errors import SingularMetricError, UnsupportedGateError
from .fisher import psd_project, qfim_pure, qfim_spsa
from .simulator import expectation, run_pure

METHODS = ("gd", "qng", "spsaQng")


@dataclass(frozen=True, eq=False)
class CostFunction:
    """``C(theta) = <psi(theta)|H|psi(theta)>``."""

    circuit: ParamCircuit
    observable: Observable

    def __post_init__(self):
        check(self.circuit)
        if self.observable.matrix.shape[0] != 2**self.circuit.n_qubits:
            raise ValueError("observable does not act on the circuit register")

    def __call__(self, theta: Sequence[float]) -> float:
        return expectation(run_pure(self.circuit, theta), self.observable)


def gradient(cost: CostFunction, theta: Sequence[float]) -> np.ndarray:
    """Exact gradient by the two-term parameter-shift rule."""
    circuit = cost.circuit
    theta = as_params(circuit, theta)
    grad = np.zeros(circuit.n_params)
    for i, k in circuit.param_gate.items():
        r = circuit.gates[k].shift_constant
        if r is None:
            raise UnsupportedGateError(f"parameter {i} has no two-term parameter-shift rule")
        s = np.pi / (4 * r)
        grad[i] = r * (cost(shift(theta, i, s)) - cost(shift(theta, i, -s)))
    return grad


@dataclass(frozen=True)
class OptimizerConfig:
    """Step size, regularization and stopping rules.

    ``spsa_samples=None`` makes ``spsaQng`` use the exact metric instead of
    SPSA estimates. ``backtrack`` halves the step until the cost does not rise.
    """

    eta: float = 0.1
    lambda_reg: float = 1e-6
    max_iters: int = 200
    grad_tol: float = 1e-8
    method: str = "qng"
    beta: float = 0.0
    seed: int | None = None
    spsa_eps: float = 0.01
    spsa_samples: int | None = 10
    backtrack: bool = False

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.lambda_reg < 0:
            raise ValueError("lambda_reg must be non-negative")
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if not 0 <= self.beta < 1:
            raise ValueError("beta must lie in [0, 1)")
        if self.spsa_samples is not None and self.spsa_samples < 1:
            raise ValueError("spsa_samples must be positive")


def natural_direction(metric: np.ndarray, grad: np.ndarray, lambda_reg: float) -> tuple[np.ndarray, dict]:
    """Solve ``(F + lambda I) x = grad``; return ``x`` and solve diagnostics."""
    metric = np.atleast_2d(np.asarray(metric, dtype=float))
    d = metric.shape[0]
    if d == 0:
        return np.zeros(0), {"min_eig": None, "max_eig": None, "cond": None}
    system = metric + lambda_reg * np.eye(d)
    eig = np.linalg.eigvalsh(system)
    scale = max(abs(eig[-1]), 1.0)
    if eig[0] <= 1e-12 * scale:
        if lambda_reg == 0:
            raise SingularMetricError("metric singular - increase lambda_reg")
        raise SingularMetricError(f"regularized metric not positive definite (min eigenvalue {eig[0]:.3g})")
    x = scipy.linalg.solve(system, grad, assume_a="pos")
    return x, {"min_eig": float(eig[0]), "max_eig": float(eig[-1]), "cond": float(eig[-1] / eig[0])}


def qng_update(theta: np.ndarray, grad: np.ndarray, metric: np.ndarray, eta: float,
               lambda_reg: float) -> np.ndarray:
    x, _ = natural_direction(metric, grad, lambda_reg)
    return theta - eta * x


def gd_step(cost: CostFunction, theta: Sequence[float], config: OptimizerConfig) -> np.ndarray:
    theta = as_params(cost.circuit, theta)
    return theta - config.eta * gradient(cost, theta)


def qng_step(cost: CostFunction, theta: Sequence[float], config: OptimizerConfig,
             metric: np.ndarray | None = None) -> np.ndarray:
    """``theta - eta (F + lambda I)^-1 grad C``; ``metric`` overrides the exact QFIM."""
    theta = as_params(cost.circuit, theta)
    if metric is None:
        metric = qfim_pure(cost.circuit, theta).entries
    return qng_update(theta, gradient(cost, theta), metric, config.eta, config.lambda_reg)


def _spsa_seed(config: OptimizerConfig, iteration: int):
    return None if config.seed is None else [int(config.seed), int(iteration)]


def smoothed_metric(cost: CostFunction, theta: np.ndarray, config: OptimizerConfig,
                    state: np.ndarray | None, iteration: int) -> np.ndarray:
    """``beta * state + (1 - beta) * fresh`` with a fresh SPSA (or exact) metric."""
    if config.spsa_samples is None:
        fresh = qfim_pure(cost.circuit, theta).entries
    else:
        fresh = qfim_spsa(cost.circuit, theta, config.spsa_eps, config.spsa_samples,
                          seed=_spsa_seed(config, iteration)).entries
    smoothed = fresh if state is None else config.beta * state + (1 - config.beta) * fresh
    # the exact metric is PSD already; projecting it would only add round-off
    return smoothed if config.spsa_samples is None else psd_project(smoothed)


def spsa_qng_step(cost: CostFunction, theta: Sequence[float], config: OptimizerConfig,
                  state: np.ndarray | None = None, iteration: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """One SPSA-QNG step; returns the new parameters and the updated smoothed metric."""
    theta = as_params(cost.circuit, theta)
    metric = smoothed_metric(cost, theta, config, state, iteration)
    return qng_update(theta, gradient(cost, theta), metric, config.eta, config.lambda_reg), metric


@dataclass
class OptTrace:
    """Per-iteration records of an optimization run."""

    records: list[dict[str, Any]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def final(self) -> dict[str, Any]:
        return self.records[-1]

    @property
    def costs(self) -> np.ndarray:
        return np.array([r["cost"] for r in self.records])

    @property
    def thetas(self) -> np.ndarray:
        return np.array([r["theta"] for r in self.records])

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r) + "\n" for r in self.records)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        d = len(self.records[0]["theta"]) if self.records else 0
        writer.writerow(["iteration", "cost", "grad_norm", "cond", "eta"] + [f"theta_{i}" for i in range(d)])
        for r in self.records:
            writer.writerow([r["iteration"], repr(r["cost"]), repr(r["grad_norm"]),
                             "" if r["cond"] is None else repr(r["cond"]), repr(r["eta"])]
                            + [repr(t) for t in r["theta"]])
        return buf.getvalue()


def minimize(cost: CostFunction, theta0: Sequence[float], config: OptimizerConfig) -> OptTrace:
    """Iterate ``config.method`` until the gradient norm drops below ``grad_tol``."""
    theta = as_params(cost.circuit, theta0).copy()
    trace = OptTrace()
    state = None
    cond = None
    eta = config.eta
    for it in range(config.max_iters + 1):
        value = cost(theta)
        grad = gradient(cost, theta)
        gnorm = float(np.linalg.norm(grad))
        trace.records.append({"iteration": it, "theta": theta.tolist(), "cost": value,
                              "grad_norm": gnorm, "cond": cond, "eta": eta})
        if gnorm <= config.grad_tol or it == config.max_iters:
            break
        if config.method == "gd":
            direction = grad
        else:
            if config.method == "qng":
                metric = qfim_pure(cost.circuit, theta).entries
            else:
                state = metric = smoothed_metric(cost, theta, config, state, it)
            direction, info = natural_direction(metric, grad, config.lambda_reg)
            cond = info["cond"]
        new = theta - eta * direction
        if config.backtrack:
            for _ in range(60):
                if cost(new) <= value + 1e-12:
                    break
                eta /= 2
                new = theta - eta * direction
        theta = new
    return trace
