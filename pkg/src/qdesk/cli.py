"""Command-line front end.

Every subcommand writes one JSON run record (to ``--out`` or stdout). The
record is validated against ``schemas/run_record.schema.json`` before it is
written. Exit status is 0 on success and 2 on input errors, which are reported
as ``source:line:col: message`` whenever a position is known.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from importlib import resources
from pathlib import Path
from typing import Any, Callable

import jsonschema
import numpy as np

from . import __version__, qec, qem, vqa
from .circuit import (
    CircuitError,
    CircuitParseError,
    _load_matrix,
    dft_matrix,
    load_circuit,
    observable_from_spec,
    parse_noise_text,
    qft,
    run_and_measure,
    unitary_of,
)
from .gates import PAULI_MATRICES, GateError, apply_matrix, gate_from_label, random_unitary, rotation
from .measure import spectral
from .noise import bit_flip, depolarizing, phase_flip
from .state import StateVector, random_state

SCHEMA_VERSION = "1.0"
SEED_ENV = "QDESK_SEED"


class CliError(Exception):
    """Input problem reported to the user with exit status 2."""


def load_schema() -> dict:
    text = resources.files("qdesk").joinpath("schemas/run_record.schema.json").read_text()
    return json.loads(text)


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise CliError(f"{SEED_ENV}={raw!r} is not an integer") from None


def _read_json(path: str) -> dict:
    p = Path(path)
    try:
        data = json.loads(p.read_text())
    except FileNotFoundError:
        raise CliError(f"{path}: file not found") from None
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise CliError(f"{path}:1:1: top level must be a JSON object")
    return data


def _jsonable(x: Any) -> Any:
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


# --- matrices and ansatz descriptions in JSON configs ---------------------------


def _matrix_from_json(value, base: Path) -> np.ndarray:
    if isinstance(value, str):
        p = Path(value)
        return _load_matrix(p if p.is_absolute() else base / p)
    arr = np.array(value, dtype=float)
    if arr.ndim == 3 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    return arr.astype(np.complex128)


def _observable(block, n_qubits: int, base: Path):
    if block is None:
        return observable_from_spec("zall", n_qubits)
    if isinstance(block, str):
        return observable_from_spec(block, n_qubits, base)
    if isinstance(block, dict) and "matrix" in block:
        m = _matrix_from_json(block["matrix"], base)
        if m.shape != (1 << n_qubits, 1 << n_qubits):
            raise CliError(f"observable matrix shape {m.shape} does not match {n_qubits} qubits")
        return spectral(m)
    raise CliError("observable must be a Pauli string, 'zall', a file name, or {'matrix': ...}")


def _layer(entry: dict, idx: int) -> vqa.Layer:
    try:
        gate = str(entry["gate"]).upper()
        targets = tuple(int(t) for t in entry["targets"])
    except (KeyError, TypeError, ValueError):
        raise CliError(f"ansatz layer {idx}: needs 'gate' and 'targets'") from None
    slots = [k for k in ("param", "data", "value") if k in entry]
    if gate in ("RX", "RY", "RZ") and len(targets) == 1:
        if len(slots) != 1:
            raise CliError(f"ansatz layer {idx}: rotation needs exactly one of param/data/value")
        k = slots[0]
        if k == "value":
            return vqa.fixed_rot(gate[1], targets[0], float(entry["value"]))
        return vqa.rot(gate[1], targets[0], int(entry[k]), "trainable" if k == "param" else "data")
    if gate == "PAULI":
        # exp(-i angle P/2) for a Pauli string P, e.g. {"gate": "pauli", "pauli": "ZZ", ...}
        word = str(entry.get("pauli", "")).upper()
        if len(word) != len(targets) or any(c not in "XYZ" for c in word) or len(slots) != 1:
            raise CliError(f"ansatz layer {idx}: bad Pauli generator")
        mats = [PAULI_MATRICES[c] for c in word]
        h = mats[0]
        for m in mats[1:]:
            h = np.kron(h, m)
        k = slots[0]
        if k == "value":
            return vqa.Layer(targets, "fixed", 0, vqa.HermitianGenerator(h / 2), value=float(entry["value"]))
        return vqa.generator_layer(h / 2, targets, int(entry[k]), "trainable" if k == "param" else "data")
    if slots:
        raise CliError(f"ansatz layer {idx}: {gate} takes no parameter")
    try:
        g = gate_from_label(str(entry["gate"]))
    except GateError as exc:
        raise CliError(f"ansatz layer {idx}: {exc}") from None
    return vqa.fixed_gate(g.matrix, *targets)


def _ansatz(block: dict, n_qubits: int, observable, psi0=None) -> vqa.ParameterizedCircuit:
    kind = block.get("type", "layers")
    if kind == "hardware_efficient":
        return vqa.hardware_efficient_ansatz(n_qubits, int(block.get("layers", 2)), observable, psi0)
    if kind == "layers":
        layers = [_layer(e, i) for i, e in enumerate(block.get("layers", []))]
        return vqa.ParameterizedCircuit.from_circuit_order(n_qubits, layers, observable, psi0)
    raise CliError(f"unknown ansatz type {kind!r}")


def _mode(block, rng) -> vqa.Mode:
    block = block or {"kind": "exact"}
    if block.get("kind", "exact") == "exact":
        return vqa.Mode.exact()
    if block["kind"] == "shots":
        return vqa.Mode.sampled(int(block.get("shots", 1000)), rng)
    raise CliError(f"unknown mode {block['kind']!r}")


def _optimizer(block) -> vqa.OptimizerConfig:
    try:
        return vqa.OptimizerConfig.from_dict(block)
    except (TypeError, vqa.VQAError) as exc:
        raise CliError(f"optimizer: {exc}") from None


# --- subcommands ------------------------------------------------------------------


def cmd_run(args, rng) -> tuple[dict, dict, list[list]]:
    c = load_circuit(args.circuit)
    if args.noise:
        p = Path(args.noise)
        c = c.with_noise(c.noise.merged(parse_noise_text(p.read_text(), str(p))))
    res = run_and_measure(c, shots=args.shots, rng=rng, readout=args.readout)
    config = {"circuit": args.circuit, "noise": args.noise, "shots": args.shots, "readout": args.readout}
    rows = [["outcome", "count"]] + [[k, v] for k, v in sorted(res.counts.items())]
    return config, res.to_dict(), rows


def _history_rows(hist: vqa.OptimizerState) -> list[list]:
    return [["iteration", "cost"]] + [[i, f] for i, (_, f) in enumerate(hist.history)]


def cmd_vqe(args, rng):
    cfg = _read_json(args.config)
    base = Path(args.config).parent
    problem = cfg.get("problem", {})
    n = int(cfg.get("n_qubits", problem.get("n_qubits", 1)))
    if "matrix_file" in problem:
        h = spectral(_matrix_from_json(problem["matrix_file"], base))
        if h.dim != 1 << n:
            raise CliError(f"Hamiltonian has dimension {h.dim}, expected {1 << n}")
    else:
        h = _observable(cfg.get("observable"), n, base)
    pc = _ansatz(cfg.get("ansatz", {"type": "hardware_efficient"}), n, h)
    res = vqa.vqe(h, pc, _optimizer(cfg.get("optimizer")), rng, _mode(cfg.get("mode"), rng))
    return cfg, res.to_dict(), _history_rows(res.history)


def cmd_qaoa(args, rng):
    cfg = _read_json(args.config)
    problem = cfg.get("problem", {})
    try:
        n = int(problem["n"])
        edges = [tuple(int(v) for v in e) for e in problem["edges"]]
    except (KeyError, TypeError, ValueError):
        raise CliError("qaoa problem needs 'n' and an 'edges' list") from None
    spec = vqa.maxcut(n, edges)
    p = int(problem.get("p", 1))
    res = vqa.qaoa(spec, p, _optimizer(cfg.get("optimizer")), rng, int(problem.get("samples", 1024)),
                   _mode(cfg.get("mode"), rng))
    vals = spec.values()
    out = res.to_dict()
    out["brute_force_optimum"] = float(vals.min())
    return cfg, out, _history_rows(res.history)


def _dataset(problem: dict, pc: vqa.ParameterizedCircuit, base: Path):
    if "teacher_theta" in problem:
        xs = np.array(problem["inputs"], dtype=float)
        return xs, vqa.predict(pc, problem["teacher_theta"], xs)
    if "data" in problem:
        arr = np.array(problem["data"], dtype=float)
    elif "dataset" in problem:
        p = Path(problem["dataset"])
        p = p if p.is_absolute() else base / p
        with open(p, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
        try:
            float(rows[0][0])
        except ValueError:
            rows = rows[1:]  # header
        arr = np.array(rows, dtype=float)
    else:
        raise CliError("qml problem needs 'data', 'dataset' or 'teacher_theta' + 'inputs'")
    return arr[:, :-1], arr[:, -1]


def cmd_qml(args, rng):
    cfg = _read_json(args.config)
    base = Path(args.config).parent
    n = int(cfg.get("n_qubits", 1))
    obs = _observable(cfg.get("observable"), n, base)
    pc = _ansatz(cfg.get("ansatz", {}), n, obs)
    problem = cfg.get("problem", {})
    xs, ys = _dataset(problem, pc, base)
    theta0 = problem.get("theta0")
    res = vqa.qml_fit(pc, xs, ys, _optimizer(cfg.get("optimizer")), rng, theta0, _mode(cfg.get("mode"), rng))
    out = res.to_dict()
    out["final_loss"] = res.losses[-1]
    out["predictions"] = vqa.predict(pc, res.theta, xs).tolist()
    return cfg, out, _history_rows(res.history)


SINGLE_ERRORS: dict[str, Callable[[np.random.Generator], np.ndarray]] = {
    "x": lambda rng: PAULI_MATRICES["X"],
    "y": lambda rng: PAULI_MATRICES["Y"],
    "z": lambda rng: PAULI_MATRICES["Z"],
    "pauli": lambda rng: PAULI_MATRICES["XYZ"[rng.integers(3)]],
    "rx": lambda rng: rotation("x", rng.uniform(0, 2 * np.pi)).matrix,
    "unitary": lambda rng: random_unitary(2, rng),
}
CHANNEL_ERRORS = {"bitflip-channel": bit_flip, "phaseflip-channel": phase_flip, "depolarizing-channel": depolarizing}
ERROR_MODELS = sorted(SINGLE_ERRORS) + sorted(CHANNEL_ERRORS)


def _corrupt(model: str, psi, n: int, p: float, rng: np.random.Generator):
    if model in SINGLE_ERRORS:
        return qec.apply_single_qubit(SINGLE_ERRORS[model](rng), psi, int(rng.integers(n)))
    # one Kraus branch per qubit, drawn with probability ||E_j psi||^2
    ch = CHANNEL_ERRORS[model](p)
    amps = psi.amplitudes
    for q in range(n):
        branches = [apply_matrix(e, amps, (q,), n) for e in ch.operators]
        w = np.array([np.vdot(b, b).real for b in branches])
        j = rng.choice(len(w), p=w / w.sum())
        amps = branches[j] / np.sqrt(w[j])
    return StateVector(amps)


def cmd_qec(args, rng):
    try:
        code = qec.get_code(args.code)
    except qec.CodeError as exc:
        raise CliError(str(exc)) from None
    models = ERROR_MODELS if args.error == "all" else args.error.split(",")
    for m in models:
        if m not in ERROR_MODELS:
            raise CliError(f"unknown error model {m!r}; choose from {ERROR_MODELS} or 'all'")
    if args.trials < 1:
        raise CliError("trials must be positive")
    table = []
    for m in models:
        ok, fids = 0, []
        for _ in range(args.trials):
            a = random_state(1, rng).amplitudes
            psi = qec.encode(code, *a)
            bad = _corrupt(m, psi, code.n_physical, args.p, rng)
            _, fixed = qec.detect_and_correct(code, bad, rng)
            f = abs(fixed.inner(psi)) ** 2
            fids.append(f)
            ok += f > 1 - 1e-9
        table.append({
            "code": code.code_kind,
            "error": m,
            "trials": args.trials,
            "successes": ok,
            "success_rate": ok / args.trials,
            "mean_fidelity": float(np.mean(fids)),
        })
    config = {"code": args.code, "error": args.error, "trials": args.trials, "p": args.p}
    rows = [list(table[0])] + [list(r.values()) for r in table]
    return config, {"table": table}, rows


def cmd_zne(args, rng):
    c = load_circuit(args.circuit)
    if args.noise:
        p = Path(args.noise)
        c = c.with_noise(c.noise.merged(parse_noise_text(p.read_text(), str(p))))
    cfg = _read_json(args.config) if args.config else {}
    try:
        zc = qem.ZneConfig.from_dict(cfg)
    except (TypeError, qem.ZneError) as exc:
        raise CliError(f"zne config: {exc}") from None
    rep = qem.zne_run(c, zc, args.mode, rng)
    config = {"circuit": args.circuit, "noise": args.noise, "mode": args.mode, "zne": zc.to_dict(),
              "noise_model": c.noise.to_dict()}
    rows = [["scale", "value", "stderr"]] + [[lam, v, s] for lam, v, s in zip(rep.scale_factors, rep.values, rep.stderrs)]
    return config, rep.to_dict(), rows


def cmd_qft_check(args, rng):
    results = []
    for n in range(1, args.max_qubits + 1):
        err = float(np.abs(unitary_of(qft(n)).matrix - dft_matrix(n)).max())
        results.append({"n_qubits": n, "max_abs_error": err, "pass": err < args.tol})
    pattern = [op.label for op in qft(3).ops]
    out = {"results": results, "gate_pattern_n3": pattern, "all_pass": all(r["pass"] for r in results)}
    rows = [["n_qubits", "max_abs_error", "pass"]] + [[r["n_qubits"], r["max_abs_error"], r["pass"]] for r in results]
    return {"max_qubits": args.max_qubits, "tol": args.tol}, out, rows


COMMANDS = {
    "run": cmd_run,
    "vqe": cmd_vqe,
    "qaoa": cmd_qaoa,
    "qml": cmd_qml,
    "qec": cmd_qec,
    "zne": cmd_zne,
    "qft-check": cmd_qft_check,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qdesk", description="Desk-scale quantum circuit experiments.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None, help=f"RNG seed (default: ${SEED_ENV} or 0)")
        p.add_argument("--out", help="write the JSON record here instead of stdout")
        p.add_argument("--csv", help="also write the tabular part of the output as CSV")

    p = sub.add_parser("run", help="execute a circuit file and sample its measurement")
    p.add_argument("circuit")
    p.add_argument("--shots", type=int, default=1024)
    p.add_argument("--readout", choices=("observable", "bitstring"), default="observable")
    p.add_argument("--noise", help="file with extra noise/cce directives")
    common(p)
    for name, helptext in (("vqe", "variational eigensolver"), ("qaoa", "max-cut QAOA"), ("qml", "fit a QML model")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config")
        common(p)
    p = sub.add_parser("qec", help="error-correction success rates")
    p.add_argument("--code", required=True, choices=sorted(qec.CODES))
    p.add_argument("--error", default="all", help="comma-separated error models or 'all'")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--p", type=float, default=0.9, help="channel parameter for the *-channel error models")
    common(p)
    p = sub.add_parser("zne", help="zero-noise extrapolation report")
    p.add_argument("circuit")
    p.add_argument("--config", help="ZNE config JSON")
    p.add_argument("--noise", help="file with extra noise/cce directives")
    p.add_argument("--mode", choices=("exact", "shots"), default="exact")
    common(p)
    p = sub.add_parser("qft-check", help="compare QFT circuits with the DFT matrix")
    p.add_argument("--max-qubits", type=int, default=4)
    p.add_argument("--tol", type=float, default=1e-9)
    common(p)
    return ap


def make_record(command: str, config: dict, seed: int, outputs: dict, wall_time: float) -> dict:
    return _jsonable({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": config,
        "seed": seed,
        "outputs": outputs,
        "wall_time": wall_time,
        "version": __version__,
    })


def _write_csv(path: str, rows: list[list]) -> None:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(_jsonable(rows))
    Path(path).write_text(buf.getvalue())


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        seed = args.seed if args.seed is not None else _default_seed()
        rng = np.random.default_rng(seed)
        t0 = time.perf_counter()
        config, outputs, rows = COMMANDS[args.command](args, rng)
        record = make_record(args.command, config, seed, outputs, time.perf_counter() - t0)
        jsonschema.validate(record, load_schema())
    except CircuitParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc.filename}: file not found", file=sys.stderr)
        return 2
    except (ValueError, KeyError, CircuitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = json.dumps(record, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    if args.csv:
        _write_csv(args.csv, rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
