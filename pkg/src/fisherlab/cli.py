"""``fisherlab`` command line: cfim, qfim, qng, sense and spectrum.

Exit codes: 0 success, 2 configuration or schema error, 3 computation error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import circuit as qc
from .errors import CircuitError, FisherlabError
from .fisher import (
    FisherMatrix,
    cfim_exact,
    cfim_sampled,
    qfim_finite_diff,
    qfim_layer_blocks,
    qfim_mixed_circuit,
    qfim_param_shift,
    qfim_pure,
    qfim_spsa,
)
from .metrology import (
    effective_quantum_dimension,
    fisher_spectrum,
    ghz_model,
    mle_estimate,
    scaling_experiment,
    sensing_qfim,
    separate_model,
)
from .optimize import CostFunction, OptimizerConfig, minimize
from .simulator import Measurement, NoiseChannel, amplitude_damping, dephasing, depolarizing

EXIT_CONFIG = 2
EXIT_COMPUTE = 3


class ConfigError(Exception):
    """Bad command-line configuration or input file."""


# -- circuit files ---------------------------------------------------------------

_GATE_FIELDS = {
    "rx": {"target", "param"},
    "ry": {"target", "param"},
    "rz": {"target", "param"},
    "h": {"target"},
    "x": {"target"},
    "cnot": {"control", "target"},
    "cz": {"control", "target"},
    "rot": {"targets", "pauli", "param"},
    "phase": {"targets", "param"},
    "fixed": {"targets", "matrix"},
}


def _complex_matrix(rows: Any, where: str) -> np.ndarray:
    try:
        return np.array([[complex(*e) if isinstance(e, list) else complex(e) for e in row] for row in rows])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: matrix entries must be numbers or [re, im] pairs") from exc


def _gate_from_spec(spec: Any, k: int) -> qc.Gate:
    where = f"gates[{k}]"
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigError(f"{where}: expected an object with a 'type' field")
    kind = spec["type"]
    if kind not in _GATE_FIELDS:
        raise ConfigError(f"{where}: unknown gate type {kind!r}")
    given = set(spec) - {"type"}
    if given != _GATE_FIELDS[kind]:
        missing = sorted(_GATE_FIELDS[kind] - given)
        extra = sorted(given - _GATE_FIELDS[kind])
        raise ConfigError(f"{where}: missing fields {missing}, unknown fields {extra}")
    try:
        if kind in ("rx", "ry", "rz"):
            return getattr(qc, kind)(int(spec["target"]), int(spec["param"]))
        if kind == "h":
            return qc.hadamard(int(spec["target"]))
        if kind == "x":
            return qc.pauli_x(int(spec["target"]))
        if kind == "cnot":
            return qc.cnot(int(spec["control"]), int(spec["target"]))
        if kind == "cz":
            return qc.cz(int(spec["control"]), int(spec["target"]))
        if kind == "rot":
            return qc.pauli_rotation(str(spec["pauli"]), [int(t) for t in spec["targets"]], int(spec["param"]))
        if kind == "phase":
            return qc.phase_rotation([int(t) for t in spec["targets"]], int(spec["param"]))
        return qc.fixed(_complex_matrix(spec["matrix"], where), [int(t) for t in spec["targets"]])
    except (TypeError, ValueError, CircuitError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def circuit_from_dict(data: Any) -> qc.ParamCircuit:
    """Build and validate a circuit from the JSON schema."""
    if not isinstance(data, dict):
        raise ConfigError("circuit file must hold a JSON object")
    unknown = set(data) - {"qubits", "params", "gates", "layers"}
    if unknown:
        raise ConfigError(f"unknown circuit fields {sorted(unknown)}")
    if "qubits" not in data or "gates" not in data:
        raise ConfigError("circuit needs 'qubits' and 'gates'")
    gates = tuple(_gate_from_spec(g, k) for k, g in enumerate(data["gates"]))
    circuit = qc.ParamCircuit(int(data["qubits"]), gates, data.get("params"), data.get("layers"))
    problems = qc.validate(circuit)
    if problems:
        raise ConfigError("invalid circuit: " + "; ".join(problems))
    return circuit


def circuit_to_dict(circuit: qc.ParamCircuit) -> dict[str, Any]:
    """Inverse of :func:`circuit_from_dict`; every gate is written as ``rot``/``phase``/``fixed``."""
    gates = []
    for g in circuit.gates:
        if g.generator is None:
            gates.append({"type": "fixed", "targets": list(g.targets),
                          "matrix": [[[z.real, z.imag] for z in row] for row in g.unitary]})
        elif g.name == "phase":
            gates.append({"type": "phase", "targets": list(g.targets), "param": g.param})
        elif g.name.startswith("r") and g.name != "rot":
            gates.append({"type": "rot", "targets": list(g.targets), "pauli": g.name[1:].upper(), "param": g.param})
        else:
            raise CircuitError("generic generators have no JSON form")
    return {"qubits": circuit.n_qubits, "params": circuit.n_params, "gates": gates,
            "layers": [list(l) for l in circuit.layers]}


def load_circuit(path: str) -> qc.ParamCircuit:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read circuit file {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}") from exc
    return circuit_from_dict(data)


# -- argument helpers ------------------------------------------------------------

def _floats(text: str | None, name: str) -> np.ndarray:
    if text is None or text.strip() == "":
        return np.zeros(0)
    try:
        return np.array([float(t) for t in text.split(",")])
    except ValueError as exc:
        raise ConfigError(f"{name}: expected comma-separated numbers") from exc


def _measurement(basis: str, n: int) -> Measurement:
    letters = basis.upper()
    if len(letters) == 1:
        letters *= n
    if len(letters) != n or set(letters) - set("XYZ"):
        raise ConfigError(f"--basis must be one letter or {n} letters from X, Y, Z")
    return Measurement.pauli_basis(letters)


_CHANNELS = {"depolarizing": depolarizing, "dephasing": dephasing, "amplitude-damping": amplitude_damping}


def _noise(text: str | None, circuit: qc.ParamCircuit) -> dict[int, list[NoiseChannel]]:
    """``NAME:P`` applied to every target of every gate."""
    if not text:
        raise ConfigError("--method mixed requires --noise NAME:P")
    try:
        name, p = text.split(":")
        factory = _CHANNELS[name]
        p = float(p)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"--noise must be NAME:P with NAME in {sorted(_CHANNELS)}") from exc
    try:
        return {k: [factory(p, t) for t in g.targets] for k, g in enumerate(circuit.gates)}
    except FisherlabError as exc:
        raise ConfigError(str(exc)) from exc


def _require_seed(args: argparse.Namespace) -> None:
    if args.seed is None:
        raise ConfigError("seed required for stochastic methods (--seed N)")


def _theta(args: argparse.Namespace, circuit: qc.ParamCircuit, name: str = "theta") -> np.ndarray:
    theta = _floats(getattr(args, name), f"--{name}")
    if theta.shape[0] != circuit.n_params:
        raise ConfigError(f"--{name}: expected {circuit.n_params} values, got {theta.shape[0]}")
    return theta


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_matrix(fm: FisherMatrix, args: argparse.Namespace) -> None:
    if args.format == "csv":
        rows = "".join(",".join(repr(float(x)) for x in row) + "\n" for row in fm.entries)
        _emit(rows, args.out)
    else:
        _emit(fm.to_json(sort_keys=True) + "\n", args.out)


# -- commands --------------------------------------------------------------------

def cmd_cfim(args: argparse.Namespace) -> None:
    circuit = load_circuit(args.circuit)
    theta = _theta(args, circuit)
    m = _measurement(args.basis, circuit.n_qubits)
    if args.method == "exact":
        fm = cfim_exact(circuit, theta, m)
    else:
        _require_seed(args)
        if args.shots is None or args.shots <= 0:
            raise ConfigError("--method sampled requires --shots N > 0")
        fm = cfim_sampled(circuit, theta, m, args.shots, args.seed)
    _emit_matrix(fm, args)


def _qfim_target(args: argparse.Namespace) -> tuple[qc.ParamCircuit, np.ndarray]:
    if args.ghz or args.separate:
        if args.encoding != "collective-phase":
            raise ConfigError("only --encoding collective-phase is available")
        model = ghz_model(args.ghz) if args.ghz else separate_model(args.separate)
        phi = _floats(args.theta, "--theta") if args.theta else np.zeros(1)
        if phi.shape[0] != 1:
            raise ConfigError("--theta: the probe builders take one phase value")
        return model.compose(with_measurement=False), phi
    if not args.circuit:
        raise ConfigError("--circuit is required unless --ghz or --separate is given")
    circuit = load_circuit(args.circuit)
    return circuit, _theta(args, circuit)


def cmd_qfim(args: argparse.Namespace) -> None:
    circuit, theta = _qfim_target(args)
    method = args.method
    eps = args.epsilon
    if method == "exact":
        fm = qfim_pure(circuit, theta)
    elif method == "param-shift":
        fm = qfim_param_shift(circuit, theta)
    elif method == "layer-blocks":
        fm = qfim_layer_blocks(circuit, theta)
    elif method == "fd-projection":
        fm = qfim_finite_diff(circuit, theta, 1e-3 if eps is None else eps)
    elif method == "spsa":
        _require_seed(args)
        fm = qfim_spsa(circuit, theta, 0.01 if eps is None else eps, args.samples, seed=args.seed,
                       psd=args.psd)
    else:
        fm = qfim_mixed_circuit(circuit, theta, _noise(args.noise, circuit),
                                step=1e-5 if eps is None else eps)
    _emit_matrix(fm, args)


def _observable(text: str, n: int) -> qc.Observable:
    terms: dict[str, float] = {}
    try:
        for part in text.split(","):
            label, coeff = part.split(":")
            label = label.strip().upper()
            if len(label) != n:
                raise ConfigError(f"--observable term {label!r} must have {n} Pauli letters")
            terms[label] = terms.get(label, 0.0) + float(coeff)
        return qc.Observable.from_paulis(terms)
    except (ValueError, CircuitError) as exc:
        raise ConfigError(f"--observable must look like ZZ:1,XI:0.5 ({exc})") from exc


def cmd_qng(args: argparse.Namespace) -> None:
    circuit = load_circuit(args.circuit)
    theta0 = _theta(args, circuit)
    obs = _observable(args.observable, circuit.n_qubits)
    method = {"gd": "gd", "qng": "qng", "spsa-qng": "spsaQng"}[args.method]
    if method == "spsaQng":
        _require_seed(args)
    try:
        config = OptimizerConfig(eta=args.eta, lambda_reg=args.lambda_reg, max_iters=args.max_iters,
                                 grad_tol=args.grad_tol, method=method, beta=args.beta, seed=args.seed,
                                 spsa_eps=0.01 if args.epsilon is None else args.epsilon,
                                 spsa_samples=args.samples, backtrack=args.backtrack)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    trace = minimize(CostFunction(circuit, obs), theta0, config)
    _emit(trace.to_csv() if args.format == "csv" else trace.to_jsonl(), args.out)
    final = trace.final
    summary = {"iterations": final["iteration"], "cost": final["cost"], "grad_norm": final["grad_norm"],
               "theta": final["theta"], "method": method}
    if args.out:
        Path(args.out + ".summary.json").write_text(json.dumps(summary, sort_keys=True) + "\n")
    else:
        sys.stderr.write(json.dumps(summary, sort_keys=True) + "\n")


def _int_range(text: str) -> list[int]:
    try:
        if ".." in text:
            lo, hi = text.split("..")
            return list(range(int(lo), int(hi) + 1))
        return [int(t) for t in text.split(",")]
    except ValueError as exc:
        raise ConfigError("--n must look like 1..5 or 1,2,4") from exc


def cmd_sense(args: argparse.Namespace) -> None:
    if args.experiment == "scaling":
        result = scaling_experiment(_int_range(args.n), args.strategy)
        _emit(result.to_csv(), args.out)
        sys.stderr.write(json.dumps({"strategy": args.strategy, "slope": result.slope}) + "\n")
        return
    _require_seed(args)
    if args.shots is None or args.shots <= 0:
        raise ConfigError("--experiment mle requires --shots N > 0")
    model = ghz_model(args.probes) if args.strategy == "ghz" else separate_model(args.probes)
    grid = None
    if args.grid_points:
        grid = np.linspace(0.0, np.pi / args.probes if args.strategy == "ghz" else np.pi, args.grid_points)
    result = mle_estimate(model, args.phi, args.shots, grid=grid, seed=args.seed, repeats=args.repeats)
    _emit(result.to_csv(), args.out)
    sys.stderr.write(json.dumps({"mean": result.mean, "variance": result.variance, "crb": result.crb,
                                 "ratio": result.ratio}) + "\n")


def cmd_spectrum(args: argparse.Namespace) -> None:
    circuit = load_circuit(args.circuit)
    theta = _theta(args, circuit)
    if args.kind == "quantum":
        fm = qfim_pure(circuit, theta)
    else:
        fm = cfim_exact(circuit, theta, _measurement(args.basis, circuit.n_qubits))
    out = {"kind": fm.kind, "eigenvalues": fisher_spectrum(fm).tolist(),
           "effective_dimension": effective_quantum_dimension(fm, args.rank_tol)}
    _emit(json.dumps(out, sort_keys=True) + "\n", args.out)


# -- parser ----------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, circuit_required: bool = True) -> None:
    p.add_argument("--circuit", required=circuit_required, help="circuit JSON file")
    p.add_argument("--theta", help="comma-separated parameter values")
    p.add_argument("--shots", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fisherlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cfim", help="classical Fisher information matrix")
    _common(p)
    p.add_argument("--basis", default="z", help="measurement basis letters (X/Y/Z)")
    p.add_argument("--method", choices=("exact", "sampled"), default="exact")
    p.set_defaults(func=cmd_cfim)

    p = sub.add_parser("qfim", help="quantum Fisher information matrix")
    _common(p, circuit_required=False)
    p.add_argument("--method", default="exact",
                   choices=("exact", "param-shift", "layer-blocks", "fd-projection", "spsa", "mixed"))
    p.add_argument("--samples", type=int, default=100, help="SPSA samples")
    p.add_argument("--psd", action="store_true", help="clip negative SPSA eigenvalues")
    p.add_argument("--noise", help="NAME:P after every gate (mixed method)")
    p.add_argument("--ghz", type=int, help="use an n-qubit GHZ probe instead of --circuit")
    p.add_argument("--separate", type=int, help="use n separate |+> probes instead of --circuit")
    p.add_argument("--encoding", default="collective-phase")
    p.set_defaults(func=cmd_qfim)

    p = sub.add_parser("qng", help="minimize an expectation value")
    _common(p)
    p.add_argument("--observable", required=True, help="Pauli terms, e.g. ZZ:1,XI:0.5")
    p.add_argument("--method", choices=("gd", "qng", "spsa-qng"), default="qng")
    p.add_argument("--eta", type=float, default=0.1)
    p.add_argument("--lambda-reg", type=float, default=1e-6)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--grad-tol", type=float, default=1e-8)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--samples", type=int, default=10, help="SPSA samples per iteration")
    p.add_argument("--backtrack", action="store_true")
    p.set_defaults(func=cmd_qng)

    p = sub.add_parser("sense", help="sensing experiments")
    p.add_argument("--experiment", choices=("scaling", "mle"), default="scaling")
    p.add_argument("--strategy", choices=("ghz", "separate"), default="ghz")
    p.add_argument("--n", default="1..5", help="probe numbers for scaling")
    p.add_argument("--probes", type=int, default=1, help="probe number for mle")
    p.add_argument("--phi", type=float, default=0.7)
    p.add_argument("--repeats", type=int, default=200)
    p.add_argument("--grid-points", type=int)
    p.add_argument("--shots", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv",), default="csv")
    p.set_defaults(func=cmd_sense)

    p = sub.add_parser("spectrum", help="Fisher spectrum and effective quantum dimension")
    _common(p)
    p.add_argument("--kind", choices=("quantum", "classical"), default="quantum")
    p.add_argument("--basis", default="z")
    p.add_argument("--rank-tol", type=float, default=1e-8)
    p.set_defaults(func=cmd_spectrum)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except ConfigError as exc:
        sys.stderr.write(f"fisherlab: error: {exc}\n")
        return EXIT_CONFIG
    except (FisherlabError, np.linalg.LinAlgError) as exc:
        sys.stderr.write(f"fisherlab: computation failed: {exc}\n")
        return EXIT_COMPUTE
    return 0


if __name__ == "__main__":
    sys.exit(main())
