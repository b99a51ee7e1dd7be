"""Parametrized circuits, gates, generators and observables.

Every parametrized gate realizes ``exp(-i * theta_k * G)`` for a Hermitian
generator ``G`` acting on an ordered tuple of target qubits. Qubit 0 is the
most significant bit of a computational-basis index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, reduce
from typing import Iterable, Sequence

import numpy as np

from .errors import CircuitError

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-12
# eigenvalues closer than this count as one level when looking for a shift rule
_LEVEL_TOL = 1e-9

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}


def pauli_matrix(label: str) -> np.ndarray:
    """Kronecker product of single-qubit Paulis, leftmost factor first."""
    try:
        return reduce(np.kron, (PAULI[c] for c in label.upper()))
    except KeyError as exc:
        raise CircuitError(f"unknown Pauli letter in {label!r}") from exc
    except TypeError as exc:
        raise CircuitError("empty Pauli string") from exc


@dataclass(frozen=True, eq=False)
class Generator:
    """Hermitian generator ``G`` of a rotation gate, on ``targets``."""

    matrix: np.ndarray
    targets: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=complex))
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))

    @cached_property
    def spectrum(self) -> tuple[np.ndarray, np.ndarray]:
        return np.linalg.eigh(self.matrix)

    def exp(self, theta: float) -> np.ndarray:
        """Return ``exp(-i theta G)``."""
        vals, vecs = self.spectrum
        return (vecs * np.exp(-1j * theta * vals)) @ vecs.conj().T

    @cached_property
    def levels(self) -> np.ndarray:
        """Distinct eigenvalues, ascending."""
        vals = self.spectrum[0]
        out = [vals[0]]
        for v in vals[1:]:
            if v - out[-1] > _LEVEL_TOL:
                out.append(v)
        return np.array(out)

    @property
    def shift_constant(self) -> float | None:
        """``r`` of the two-term shift rule, or None without exactly two levels."""
        lv = self.levels
        if len(lv) != 2:
            return None
        return float(lv[1] - lv[0]) / 2


@dataclass(frozen=True, eq=False)
class Gate:
    """Either a fixed unitary or a rotation ``exp(-i theta[param] G)``."""

    targets: tuple[int, ...]
    unitary: np.ndarray | None = None
    generator: Generator | None = None
    param: int | None = None
    name: str = "gate"

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if self.unitary is not None:
            object.__setattr__(self, "unitary", np.asarray(self.unitary, dtype=complex))

    @property
    def kind(self) -> str:
        return "rotation" if self.generator is not None else "fixed"

    @property
    def shift_constant(self) -> float | None:
        return None if self.generator is None else self.generator.shift_constant

    def matrix(self, theta: Sequence[float] | None = None) -> np.ndarray:
        if self.generator is None:
            return self.unitary
        return self.generator.exp(float(theta[self.param]))

    def dagger(self, theta: Sequence[float] | None = None) -> "Gate":
        """Fixed gate implementing the inverse of this gate at ``theta``."""
        return Gate(self.targets, unitary=self.matrix(theta).conj().T, name=self.name + "_dg")


# -- gate library -----------------------------------------------------------

def rotation(generator: np.ndarray, targets: Iterable[int], param: int, name: str = "rot") -> Gate:
    """Rotation gate with an arbitrary Hermitian generator."""
    targets = tuple(targets)
    return Gate(targets, generator=Generator(generator, targets), param=int(param), name=name)


def pauli_rotation(paulis: str, targets: Iterable[int], param: int) -> Gate:
    """``exp(-i theta P/2)`` for the Pauli string ``P`` laid out over ``targets``."""
    targets = tuple(targets)
    if len(paulis) != len(targets):
        raise CircuitError(f"Pauli string {paulis!r} does not match {len(targets)} targets")
    return rotation(pauli_matrix(paulis) / 2, targets, param, name="r" + paulis.lower())


def rx(target: int, param: int) -> Gate:
    return pauli_rotation("X", (target,), param)


def ry(target: int, param: int) -> Gate:
    return pauli_rotation("Y", (target,), param)


def rz(target: int, param: int) -> Gate:
    return pauli_rotation("Z", (target,), param)


def phase_rotation(targets: Iterable[int], param: int) -> Gate:
    """Collective phase ``exp(-i phi sum_j |1><1|_j)`` on ``targets``.

    One parameter drives all targets through a single multi-qubit generator.
    """
    targets = tuple(targets)
    k = len(targets)
    excitations = np.array([bin(b).count("1") for b in range(2**k)], dtype=float)
    return rotation(np.diag(excitations).astype(complex), targets, param, name="phase")


def fixed(matrix: np.ndarray, targets: Iterable[int], name: str = "fixed") -> Gate:
    return Gate(tuple(targets), unitary=np.asarray(matrix, dtype=complex), name=name)


def hadamard(target: int) -> Gate:
    return fixed(H, (target,), "h")


def pauli_x(target: int) -> Gate:
    return fixed(X, (target,), "x")


def cnot(control: int, target: int) -> Gate:
    m = np.eye(4, dtype=complex)[[0, 1, 3, 2]]
    return fixed(m, (control, target), "cnot")


def cz(a: int, b: int) -> Gate:
    return fixed(np.diag([1, 1, 1, -1]).astype(complex), (a, b), "cz")


def cswap(control: int, a: int, b: int) -> Gate:
    perm = list(range(8))
    perm[5], perm[6] = 6, 5
    return fixed(np.eye(8, dtype=complex)[perm], (control, a, b), "cswap")


# -- circuits ---------------------------------------------------------------

def _infer_layers(gates: Sequence[Gate]) -> tuple[tuple[int, ...], ...]:
    frontier: dict[int, int] = {}
    layers: list[list[int]] = []
    for g_idx, gate in enumerate(gates):
        depth = max((frontier.get(q, 0) for q in gate.targets), default=0)
        if depth == len(layers):
            layers.append([])
        layers[depth].append(g_idx)
        for q in gate.targets:
            frontier[q] = depth + 1
    return tuple(tuple(layer) for layer in layers)


@dataclass(frozen=True, eq=False)
class ParamCircuit:
    """Ordered gate list over ``n_qubits`` driven by ``n_params`` angles.

    ``n_params`` defaults to one past the largest parameter index in use and
    ``layers`` defaults to a greedy as-soon-as-possible schedule.
    """

    n_qubits: int
    gates: tuple[Gate, ...] = ()
    n_params: int | None = None
    layers: tuple[tuple[int, ...], ...] | None = field(default=None)

    def __post_init__(self):
        gates = tuple(self.gates)
        object.__setattr__(self, "gates", gates)
        if self.n_params is None:
            used = [g.param for g in gates if g.param is not None]
            object.__setattr__(self, "n_params", max(used) + 1 if used else 0)
        if self.layers is None:
            object.__setattr__(self, "layers", _infer_layers(gates))
        else:
            object.__setattr__(self, "layers", tuple(tuple(int(i) for i in l) for l in self.layers))

    @cached_property
    def problems(self) -> tuple[str, ...]:
        return tuple(_collect_problems(self))

    @cached_property
    def param_gate(self) -> dict[int, int]:
        """Map parameter index to the index of the gate it drives."""
        return {g.param: k for k, g in enumerate(self.gates) if g.param is not None}

    def compose(self, other: "ParamCircuit") -> "ParamCircuit":
        """Run ``self`` then ``other`` on the same register and parameter vector."""
        if other.n_qubits != self.n_qubits:
            raise CircuitError("cannot compose circuits on different registers")
        return ParamCircuit(self.n_qubits, self.gates + other.gates, max(self.n_params, other.n_params))

    def bind(self, theta: Sequence[float]) -> "ParamCircuit":
        """Parameter-free copy with every rotation frozen at ``theta``."""
        theta = as_params(self, theta)
        gates = tuple(g if g.generator is None else fixed(g.matrix(theta), g.targets, g.name) for g in self.gates)
        return ParamCircuit(self.n_qubits, gates, 0, self.layers)

    def adjoint(self, theta: Sequence[float]) -> "ParamCircuit":
        """Parameter-free circuit implementing ``U(theta)^dagger``."""
        theta = as_params(self, theta)
        return ParamCircuit(self.n_qubits, tuple(g.dagger(theta) for g in reversed(self.gates)), 0)

    def relabel(self, qubit_map: Sequence[int], n_qubits: int, param_offset: int = 0) -> "ParamCircuit":
        """Copy acting on ``qubit_map[q]`` of a larger register with shifted parameters."""
        gates = []
        for g in self.gates:
            targets = tuple(qubit_map[q] for q in g.targets)
            if g.generator is None:
                gates.append(Gate(targets, unitary=g.unitary, name=g.name))
            else:
                gates.append(Gate(targets, generator=Generator(g.generator.matrix, targets),
                                  param=g.param + param_offset, name=g.name))
        return ParamCircuit(n_qubits, tuple(gates), self.n_params + param_offset)


def _collect_problems(circuit: ParamCircuit) -> list[str]:
    errs: list[str] = []
    n = circuit.n_qubits
    if not isinstance(n, (int, np.integer)) or n <= 0:
        return [f"qubit count must be a positive integer, got {n!r}"]
    d = circuit.n_params
    seen_params: dict[int, int] = {}
    for k, g in enumerate(circuit.gates):
        if len(set(g.targets)) != len(g.targets):
            errs.append(f"gate {k}: duplicate target qubits {g.targets}")
        if any(q < 0 or q >= n for q in g.targets):
            errs.append(f"gate {k}: qubit index out of range {g.targets}")
        dim = 2 ** len(g.targets)
        if g.generator is None:
            u = g.unitary
            if u is None or u.shape != (dim, dim):
                errs.append(f"gate {k}: unitary shape does not match {len(g.targets)} targets")
            elif np.max(np.abs(u.conj().T @ u - np.eye(dim))) > UNITARY_TOL:
                errs.append(f"gate {k}: matrix is not unitary")
            if g.param is not None:
                errs.append(f"gate {k}: fixed gate carries a parameter")
            continue
        gm = g.generator.matrix
        if gm.shape != (dim, dim):
            errs.append(f"gate {k}: generator shape does not match {len(g.targets)} targets")
        elif np.max(np.abs(gm - gm.conj().T)) > HERMITIAN_TOL:
            errs.append(f"gate {k}: generator is not Hermitian")
        if g.generator.targets != g.targets:
            errs.append(f"gate {k}: generator targets differ from gate targets")
        if g.param is None or not 0 <= g.param < d:
            errs.append(f"gate {k}: parameter index out of range ({g.param} not in [0, {d}))")
        elif g.param in seen_params:
            errs.append(f"gate {k}: parameter {g.param} already used by gate {seen_params[g.param]}")
        else:
            seen_params[g.param] = k

    flat = [i for layer in circuit.layers for i in layer]
    if sorted(flat) != list(range(len(circuit.gates))):
        errs.append("layers do not partition the gate indices")
        return errs
    position = {}
    for l_idx, layer in enumerate(circuit.layers):
        used: set[int] = set()
        for i in layer:
            position[i] = l_idx
            qs = set(circuit.gates[i].targets)
            if used & qs:
                errs.append(f"overlapping layer {l_idx}: qubits {sorted(used & qs)} used twice")
            used |= qs
    last: dict[int, int] = {}
    for k, g in enumerate(circuit.gates):
        for q in g.targets:
            if q in last and position[last[q]] >= position[k]:
                errs.append(f"layer order contradicts gate order on qubit {q} (gates {last[q]}, {k})")
            last[q] = k
    return errs


def validate(circuit: ParamCircuit) -> list[str]:
    """Return every invariant violation of ``circuit``; an empty list means ok."""
    return list(circuit.problems)


def check(circuit: ParamCircuit) -> ParamCircuit:
    """Raise :class:`CircuitError` listing all problems, else return the circuit."""
    if circuit.problems:
        raise CircuitError("; ".join(circuit.problems))
    return circuit


def as_params(circuit: ParamCircuit, theta: Sequence[float] | None) -> np.ndarray:
    theta = np.zeros(0) if theta is None else np.asarray(theta, dtype=float).reshape(-1)
    if theta.shape[0] != circuit.n_params:
        raise CircuitError(f"expected {circuit.n_params} parameters, got {theta.shape[0]}")
    return theta


def shift(theta: Sequence[float], i: int, s: float) -> np.ndarray:
    """Return ``theta + s * e_i`` as a new array."""
    out = np.array(theta, dtype=float)
    if not 0 <= i < out.shape[0]:
        raise IndexError(f"parameter index {i} out of range for {out.shape[0]} parameters")
    out[i] += s
    return out


def layers_of(circuit: ParamCircuit) -> list[list[int]]:
    """Parameter indices of the rotation gates in each layer; empty layers dropped."""
    groups = []
    for layer in circuit.layers:
        params = [circuit.gates[i].param for i in layer if circuit.gates[i].param is not None]
        if params:
            groups.append(params)
    return groups


@dataclass(frozen=True, eq=False)
class Observable:
    """Hermitian operator on the full register with lazily computed spectrum."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise CircuitError("observable must be a square matrix")
        if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
            raise CircuitError("observable is not Hermitian")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_paulis(cls, terms: dict[str, float]) -> "Observable":
        """Sum of weighted full-register Pauli strings, e.g. ``{"ZZ": 1, "XI": .5}``."""
        return cls(sum(c * pauli_matrix(p) for p, c in terms.items()))

    @cached_property
    def eig(self) -> tuple[np.ndarray, np.ndarray]:
        return np.linalg.eigh(self.matrix)

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.eig[0]

    @property
    def eigenvectors(self) -> np.ndarray:
        return self.eig[1]

    @property
    def n_qubits(self) -> int:
        return int(round(np.log2(self.matrix.shape[0])))
