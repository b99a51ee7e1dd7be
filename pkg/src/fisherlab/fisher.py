"""Classical and quantum Fisher information matrices of parametrized circuits.

Classical (CFIM) side::

    I_ij = sum_l (d_i p_l)(d_j p_l) / p_l

Quantum (QFIM) side, for pure states::

    F_ij = 4 Re[<d_i psi|d_j psi> - <d_i psi|psi><psi|d_j psi>]

and for mixed states the eigenbasis formula over pairs with
``lambda_k + lambda_l > 0``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .circuit import ParamCircuit, as_params, check, shift
from .divergence import fidelity_distance, fidelity_pure, overlap_compute_reverse
from .errors import FisherDiscontinuityError, UnsupportedGateError
from .simulator import (
    ZERO_TOL,
    Measurement,
    NoiseSpec,
    apply_op,
    derivative_state,
    eigendecompose,
    probabilities,
    run_mixed,
    run_pure,
    sample,
)

P_TOL = 1e-12
GRAD_TOL = 1e-8
MIXED_STEP = 1e-5

KINDS = ("classical", "quantum")
METHODS = ("exact", "sampled", "paramShift", "finiteDiff", "spsa", "mixedExact", "layerBlocks")


@dataclass(eq=False)
class FisherMatrix:
    """A ``d x d`` information matrix with provenance.

    ``kind`` is ``"classical"`` or ``"quantum"``; ``method`` names the estimator.
    Behaves like an ndarray in numpy expressions.
    """

    entries: np.ndarray
    kind: str
    method: str
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=float)
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def __getitem__(self, idx):
        return self.entries[idx]

    @property
    def d(self) -> int:
        return self.entries.shape[0]

    @property
    def shape(self) -> tuple[int, ...]:
        return self.entries.shape

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "method": self.method,
            "d": self.d,
            "entries": [None if np.isnan(x) else float(x) for x in self.entries.reshape(-1)],
            "meta": self.meta,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "FisherMatrix":
        d = int(data["d"])
        flat = np.array([np.nan if x is None else x for x in data["entries"]], dtype=float)
        return cls(flat.reshape(d, d), data["kind"], data["method"], dict(data.get("meta", {})))

    @classmethod
    def from_json(cls, text: str) -> "FisherMatrix":
        return cls.from_dict(json.loads(text))


def symmetrize(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    return (m + m.T) / 2


def psd_project(m: np.ndarray) -> np.ndarray:
    """Clip negative eigenvalues of the symmetric part at zero."""
    vals, vecs = np.linalg.eigh(symmetrize(m))
    return (vecs * np.clip(vals, 0, None)) @ vecs.T


def _seeds(seed, count: int) -> list[np.random.SeedSequence]:
    # one independent child stream per evaluation, fixed by position only
    return np.random.SeedSequence(seed).spawn(count)


# -- classical ---------------------------------------------------------------

def _distribution(circuit: ParamCircuit, theta: np.ndarray, m: Measurement) -> np.ndarray:
    return probabilities(run_pure(circuit, theta), m)


def _shift_amount(circuit: ParamCircuit, i: int) -> tuple[float, float]:
    gate = circuit.gates[circuit.param_gate[i]]
    r = gate.shift_constant
    if r is None:
        raise UnsupportedGateError(
            f"parameter {i} ({gate.name}) has no two-term parameter-shift rule")
    return r, np.pi / (4 * r)


def prob_jacobian(circuit: ParamCircuit, theta: Sequence[float], m: Measurement,
                  mode: str = "param_shift", eps: float = 1e-5) -> np.ndarray:
    """Matrix ``J[l, i] = d p_l / d theta_i`` (outcomes x parameters).

    ``mode`` is ``"param_shift"``, ``"fd"`` (central differences with step
    ``eps``) or ``"analytic"`` (``2 Re <psi|Pi_l|d_i psi>`` from derivative
    states, valid for any generator).
    """
    check(circuit)
    theta = as_params(circuit, theta)
    d = circuit.n_params
    jac = np.zeros((len(m), d))
    if mode == "analytic":
        psi = run_pure(circuit, theta)
        for i in circuit.param_gate:
            dpsi = derivative_state(circuit, theta, i)
            if m.basis is not None:
                amp = m.basis.conj().T
                jac[:, i] = 2 * np.real((amp @ psi).conj() * (amp @ dpsi))
            else:
                jac[:, i] = [2 * np.real(np.vdot(psi, e @ dpsi)) for e in m.povm]
        return jac
    if mode == "fd" and eps <= 0:
        raise ValueError("finite-difference step must be positive")
    for i in circuit.param_gate:
        if mode == "param_shift":
            r, s = _shift_amount(circuit, i)
            jac[:, i] = r * (_distribution(circuit, shift(theta, i, s), m)
                             - _distribution(circuit, shift(theta, i, -s), m))
        elif mode == "fd":
            jac[:, i] = (_distribution(circuit, shift(theta, i, eps), m)
                         - _distribution(circuit, shift(theta, i, -eps), m)) / (2 * eps)
        else:
            raise ValueError(f"unknown jacobian mode {mode!r}")
    return jac


def cfim_from_distribution(p: np.ndarray, jac: np.ndarray, p_tol: float = P_TOL,
                           grad_tol: float = GRAD_TOL) -> np.ndarray:
    """CFIM from probabilities and their Jacobian.

    Outcomes with ``p_l <= p_tol`` are dropped when their whole gradient row is
    below ``grad_tol``; otherwise the information is discontinuous and
    :class:`FisherDiscontinuityError` is raised.
    """
    p = np.asarray(p, dtype=float)
    jac = np.asarray(jac, dtype=float)
    vanishing = p <= p_tol
    steep = np.any(np.abs(jac) > grad_tol, axis=1)
    if np.any(vanishing & steep):
        bad = np.flatnonzero(vanishing & steep).tolist()
        raise FisherDiscontinuityError(f"Fisher discontinuity: outcomes {bad} vanish with nonzero slope")
    keep = ~vanishing
    rows = jac[keep]
    return symmetrize((rows.T / p[keep]) @ rows)


def _default_mode(circuit: ParamCircuit) -> str:
    shiftable = all(circuit.gates[k].shift_constant is not None for k in circuit.param_gate.values())
    return "param_shift" if shiftable else "analytic"


def cfim_exact(circuit: ParamCircuit, theta: Sequence[float], m: Measurement,
               mode: str | None = None, p_tol: float = P_TOL, grad_tol: float = GRAD_TOL) -> FisherMatrix:
    """Exact CFIM of ``m`` on ``|psi(theta)>``.

    Derivatives use the parameter-shift rule when every gate admits one and
    derivative states otherwise, unless ``mode`` forces a choice.
    """
    theta = as_params(check(circuit), theta)
    mode = mode or _default_mode(circuit)
    p = _distribution(circuit, theta, m)
    jac = prob_jacobian(circuit, theta, m, mode=mode)
    return FisherMatrix(cfim_from_distribution(p, jac, p_tol, grad_tol), "classical", "exact",
                        {"jacobian": mode})


def cfim_sampled(circuit: ParamCircuit, theta: Sequence[float], m: Measurement,
                 shots: int | None, seed=None, mode: str = "param_shift",
                 eps: float = 1e-2) -> FisherMatrix:
    """CFIM with every distribution estimated from its own batch of ``shots``.

    ``shots=None`` is the infinite-shot limit and reproduces :func:`cfim_exact`.
    Zero-count outcomes are dropped when their estimated slope is below the
    gradient tolerance.
    """
    theta = as_params(check(circuit), theta)
    if shots is None:
        exact = cfim_exact(circuit, theta, m, mode=mode)
        exact.meta.update(shots=None, seed=seed)
        return exact
    if shots <= 0:
        raise ValueError("shots must be positive")
    params = sorted(circuit.param_gate)
    streams = iter(_seeds(seed, 1 + 2 * len(params)))

    def estimate(t: np.ndarray) -> np.ndarray:
        return sample(_distribution(circuit, t, m), shots, next(streams)) / shots

    p_hat = estimate(theta)
    jac = np.zeros((len(m), circuit.n_params))
    for i in params:
        if mode == "param_shift":
            r, s = _shift_amount(circuit, i)
            jac[:, i] = r * (estimate(shift(theta, i, s)) - estimate(shift(theta, i, -s)))
        elif mode == "fd":
            jac[:, i] = (estimate(shift(theta, i, eps)) - estimate(shift(theta, i, -eps))) / (2 * eps)
        else:
            raise ValueError(f"unknown jacobian mode {mode!r}")
    entries = cfim_from_distribution(p_hat, jac, p_tol=0.0, grad_tol=GRAD_TOL)
    meta = {"shots": int(shots), "seed": seed, "jacobian": mode}
    if mode == "fd":
        meta["epsilon"] = eps
    return FisherMatrix(entries, "classical", "sampled", meta)


# -- quantum, pure states ------------------------------------------------------

def derivative_states(circuit: ParamCircuit, theta: Sequence[float]) -> np.ndarray:
    """Columns ``d_i |psi>``; parameters driving no gate give zero columns."""
    theta = as_params(check(circuit), theta)
    out = np.zeros((2**circuit.n_qubits, circuit.n_params), dtype=complex)
    for i in circuit.param_gate:
        out[:, i] = derivative_state(circuit, theta, i)
    return out


def qfim_pure(circuit: ParamCircuit, theta: Sequence[float]) -> FisherMatrix:
    """Exact QFIM of ``|psi(theta)>`` from derivative states."""
    theta = as_params(check(circuit), theta)
    psi = run_pure(circuit, theta)
    dpsi = derivative_states(circuit, theta)
    overlap = dpsi.conj().T @ psi
    gram = dpsi.conj().T @ dpsi
    entries = 4 * np.real(gram - np.outer(overlap, overlap.conj()))
    return FisherMatrix(symmetrize(entries), "quantum", "exact")


def qfim_layer_blocks(circuit: ParamCircuit, theta: Sequence[float]) -> FisherMatrix:
    """Blocks of the QFIM for gates that share a layer.

    Each block is the fourfold covariance of the layer's generators on the
    state entering the layer. Entries linking different layers are NaN.
    """
    theta = as_params(check(circuit), theta)
    n = circuit.n_qubits
    d = circuit.n_params
    entries = np.full((d, d), np.nan)
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = 1
    blocks = []
    for layer in circuit.layers:
        rot = [circuit.gates[k] for k in layer if circuit.gates[k].param is not None]
        if rot:
            g_psi = [apply_op(psi, g.generator.matrix, g.targets, n) for g in rot]
            means = [np.real(np.vdot(psi, v)) for v in g_psi]
            for a, ga in enumerate(rot):
                for b, gb in enumerate(rot):
                    # generators on disjoint qubits commute: {Ga, Gb}/2 = Ga Gb
                    second = np.real(np.vdot(g_psi[a], g_psi[b]))
                    entries[ga.param, gb.param] = 4 * (second - means[a] * means[b])
            blocks.append([g.param for g in rot])
        for k in layer:
            gate = circuit.gates[k]
            psi = apply_op(psi, gate.matrix(theta), gate.targets, n)
    return FisherMatrix(entries, "quantum", "layerBlocks", {"blocks": blocks})


def qfim_param_shift(circuit: ParamCircuit, theta: Sequence[float]) -> FisherMatrix:
    """QFIM from four compute-and-reverse overlaps per entry, shifts of pi/2.

    Requires every generator to have two eigenvalues one unit apart
    (Pauli strings over two).
    """
    theta = as_params(check(circuit), theta)
    for i in circuit.param_gate:
        r, _ = _shift_amount(circuit, i)
        if abs(r - 0.5) > 1e-9:
            raise UnsupportedGateError(f"parameter {i}: shift constant {r} != 1/2")
    d = circuit.n_params
    half_pi = np.pi / 2
    entries = np.zeros((d, d))
    active = sorted(circuit.param_gate)

    def f(step: np.ndarray) -> float:
        return overlap_compute_reverse(circuit, theta, theta + step)

    for a, i in enumerate(active):
        for j in active[a:]:
            ei = np.zeros(d)
            ei[i] = half_pi
            ej = np.zeros(d)
            ej[j] = half_pi
            val = -0.5 * (f(ei + ej) - f(ei - ej) - f(-(ei - ej)) + f(-(ei + ej)))
            entries[i, j] = entries[j, i] = val
    return FisherMatrix(symmetrize(entries), "quantum", "paramShift")


def qfim_projection_fd(circuit: ParamCircuit, theta: Sequence[float], v: Sequence[float],
                       eps: float = 1e-3, central: bool = False) -> float:
    """Finite-difference estimate of ``v^T F v`` as ``4 d_f(theta, theta + eps v) / eps^2``.

    The one-sided form carries the cubic term of ``d_f`` and is only O(eps)
    accurate. ``central=True`` averages the steps ``+eps v`` and ``-eps v``,
    which cancels that term and gives O(eps^2).
    """
    theta = as_params(check(circuit), theta)
    v = np.asarray(v, dtype=float)
    if abs(np.linalg.norm(v) - 1) > 1e-9:
        raise ValueError("direction must have unit length")
    if eps <= 0:
        raise ValueError("eps must be positive")
    psi = run_pure(circuit, theta)
    forward = 4 * fidelity_distance(psi, run_pure(circuit, theta + eps * v)) / eps**2
    if not central:
        return forward
    backward = 4 * fidelity_distance(psi, run_pure(circuit, theta - eps * v)) / eps**2
    return (forward + backward) / 2


def spsa_directions(d: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Two independent unit vectors with entries drawn from ``{-1, +1}/sqrt(d)``."""
    v = rng.choice([-1.0, 1.0], size=(2, d)) / np.sqrt(d)
    return v[0], v[1]


def spsa_sample(circuit: ParamCircuit, theta: np.ndarray, psi: np.ndarray, v1: np.ndarray,
                v2: np.ndarray, eps: float) -> np.ndarray:
    """One rank-2 estimate ``-dF/(2 eps^2) (v1 v2^T + v2 v1^T)`` scaled by ``d^2``.

    Directions with entries ``+-1/sqrt(d)`` make the raw estimate average to
    ``F / d^2``; the ``d^2`` factor removes that bias.
    """
    def f(delta: np.ndarray) -> float:
        return fidelity_pure(psi, run_pure(circuit, theta + delta))

    e1, e2 = eps * v1, eps * v2
    delta_f = f(e1 + e2) - f(-e1) - f(-e1 + e2) + f(e1)
    d = theta.shape[0]
    return -(d**2) * delta_f / (2 * eps**2) * (np.outer(v1, v2) + np.outer(v2, v1))


def qfim_spsa(circuit: ParamCircuit, theta: Sequence[float], eps: float = 0.01,
              n_samples: int = 1, seed=None, psd: bool = False,
              directions: Sequence[tuple[np.ndarray, np.ndarray]] | None = None) -> FisherMatrix:
    """Average of ``n_samples`` rank-2 SPSA estimates of the QFIM.

    Sample ``k`` draws its directions from its own child seed, so the result
    does not depend on evaluation order. ``directions`` overrides the draw.
    """
    theta = as_params(check(circuit), theta)
    d = circuit.n_params
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    psi = run_pure(circuit, theta)
    if directions is None:
        directions = [spsa_directions(d, np.random.default_rng(s)) for s in _seeds(seed, n_samples)]
    total = np.zeros((d, d))
    for v1, v2 in directions:
        total += spsa_sample(circuit, theta, psi, np.asarray(v1, float), np.asarray(v2, float), eps)
    entries = symmetrize(total / len(directions))
    if psd:
        entries = psd_project(entries)
    meta: dict[str, Any] = {"epsilon": eps, "samples": len(directions), "seed": seed, "psd": psd}
    if len(directions) == 1:
        meta["warning"] = "single SPSA sample: rank <= 2"
    return FisherMatrix(entries, "quantum", "spsa", meta)


# -- quantum, mixed states -----------------------------------------------------

def mixed_derivatives(circuit: ParamCircuit, theta: Sequence[float], noise: NoiseSpec | None = None,
                      step: float = MIXED_STEP) -> list[np.ndarray]:
    """Central differences ``d_i rho`` of :func:`run_mixed`."""
    theta = as_params(check(circuit), theta)
    return [(run_mixed(circuit, shift(theta, i, step), noise)
             - run_mixed(circuit, shift(theta, i, -step), noise)) / (2 * step)
            for i in range(circuit.n_params)]


def _eigen_frame(rho: np.ndarray, drho: Sequence[np.ndarray], zero_tol: float, grad_tol: float):
    spec = eigendecompose(rho, zero_tol)
    lam, vecs = spec.values, spec.vectors
    rotated = [vecs.conj().T @ np.asarray(dr) @ vecs for dr in drho]
    for i, a in enumerate(rotated):
        slope = np.abs(np.diag(a))[spec.zero]
        if np.any(slope > grad_tol):
            raise FisherDiscontinuityError(
                f"rank-change discontinuity: zero eigenvalue moves with parameter {i}")
    denom = lam[:, None] + lam[None, :]
    mask = denom > zero_tol
    return vecs, rotated, np.where(mask, denom, 1.0), mask


def qfim_mixed(rho: np.ndarray, drho: Sequence[np.ndarray], zero_tol: float = ZERO_TOL,
               grad_tol: float = GRAD_TOL) -> FisherMatrix:
    """QFIM of a density-matrix family from ``rho`` and its derivatives."""
    _, rotated, denom, mask = _eigen_frame(rho, drho, zero_tol, grad_tol)
    d = len(rotated)
    entries = np.zeros((d, d))
    for i in range(d):
        for j in range(i, d):
            terms = 2 * np.real(rotated[i] * rotated[j].T) / denom
            entries[i, j] = entries[j, i] = np.sum(terms[mask])
    return FisherMatrix(entries, "quantum", "mixedExact", {"zero_tol": zero_tol})


def qfim_mixed_circuit(circuit: ParamCircuit, theta: Sequence[float], noise: NoiseSpec | None = None,
                       step: float = MIXED_STEP, zero_tol: float = ZERO_TOL) -> FisherMatrix:
    """:func:`qfim_mixed` for a (noisy) circuit with finite-difference derivatives."""
    rho = run_mixed(circuit, theta, noise)
    fm = qfim_mixed(rho, mixed_derivatives(circuit, theta, noise, step), zero_tol)
    fm.meta["step"] = step
    return fm


def sld_operators(rho: np.ndarray, drho: Sequence[np.ndarray], zero_tol: float = ZERO_TOL,
                  grad_tol: float = GRAD_TOL) -> list[np.ndarray]:
    """Symmetric logarithmic derivatives ``L_i`` with ``d_i rho = (L_i rho + rho L_i)/2``.

    Matrix elements on the kernel of ``rho`` (``lambda_k + lambda_l = 0``) are set to 0.
    """
    vecs, rotated, denom, mask = _eigen_frame(rho, drho, zero_tol, grad_tol)
    out = []
    for a in rotated:
        l_eig = np.where(mask, 2 * a / denom, 0)
        sld = vecs @ l_eig @ vecs.conj().T
        out.append((sld + sld.conj().T) / 2)
    return out


def qfim_from_sld(rho: np.ndarray, slds: Sequence[np.ndarray]) -> np.ndarray:
    """``F_ij = Tr{rho (L_i L_j + L_j L_i)} / 2``."""
    d = len(slds)
    out = np.zeros((d, d))
    for i in range(d):
        for j in range(d):
            out[i, j] = 0.5 * np.real(np.trace(rho @ (slds[i] @ slds[j] + slds[j] @ slds[i])))
    return out


def reparametrize(fim: FisherMatrix | np.ndarray, jac: np.ndarray) -> FisherMatrix | np.ndarray:
    """Information matrix in new coordinates, ``J F J^T`` with ``J_ij = d theta_j / d f_i``."""
    jac = np.atleast_2d(np.asarray(jac, dtype=float))
    entries = np.asarray(fim, dtype=float)
    if jac.shape[1] != entries.shape[0]:
        raise ValueError(f"Jacobian shape {jac.shape} does not match {entries.shape[0]} parameters")
    new = symmetrize(jac @ entries @ jac.T)
    if isinstance(fim, FisherMatrix):
        return FisherMatrix(new, fim.kind, fim.method, {**fim.meta, "reparametrized": True})
    return new


def qfim_finite_diff(circuit: ParamCircuit, theta: Sequence[float], eps: float = 1e-3) -> FisherMatrix:
    """Full QFIM assembled from projections along ``e_i`` and ``(e_i + e_j)/sqrt(2)``."""
    theta = as_params(check(circuit), theta)
    d = circuit.n_params
    eye = np.eye(d)
    diag = np.array([qfim_projection_fd(circuit, theta, eye[i], eps) for i in range(d)])
    entries = np.diag(diag)
    for i in range(d):
        for j in range(i + 1, d):
            along = qfim_projection_fd(circuit, theta, (eye[i] + eye[j]) / np.sqrt(2), eps)
            entries[i, j] = entries[j, i] = along - (diag[i] + diag[j]) / 2
    return FisherMatrix(entries, "quantum", "finiteDiff", {"epsilon": eps})
