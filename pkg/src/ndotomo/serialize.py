"""On-disk formats: model checkpoints, training reports, matrix blocks.

All floating-point values are written with 17 significant digits, which
round-trips IEEE doubles bit-exactly. Checkpoints are JSON documents;
reports and matrices are commented CSV-style text.
"""

import json

import numpy as np

from .model import NdoParams, ParamSet
from .training import EpochRecord

CHECKPOINT_FORMAT = "ndo-checkpoint"
CHECKPOINT_VERSION = 1
BIT_ORDER = "msb-first"

REPORT_HEADER = "# ndotomo train-report v1"
MATRIX_HEADER = "# ndotomo matrix v1"


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def _emit(value, out):
    """Minimal JSON emitter with exact float formatting."""
    if isinstance(value, dict):
        out.append("{")
        for i, (k, v) in enumerate(value.items()):
            if i:
                out.append(", ")
            out.append(json.dumps(k) + ": ")
            _emit(v, out)
        out.append("}")
    elif isinstance(value, (list, tuple)):
        out.append("[")
        for i, v in enumerate(value):
            if i:
                out.append(", ")
            _emit(v, out)
        out.append("]")
    elif isinstance(value, bool):
        out.append("true" if value else "false")
    elif isinstance(value, (int, np.integer)):
        out.append(str(int(value)))
    elif isinstance(value, (float, np.floating)):
        out.append(fmt_float(value))
    elif isinstance(value, str):
        out.append(json.dumps(value))
    elif value is None:
        out.append("null")
    else:
        raise TypeError(f"cannot serialize {type(value)}")


def dumps_exact(payload: dict) -> str:
    out: list = []
    _emit(payload, out)
    return "".join(out)


def _pset_payload(pset: ParamSet) -> dict:
    payload = {
        "W": pset.W.tolist(),
        "U": pset.U.tolist(),
        "b": pset.b.tolist(),
        "c": pset.c.tolist(),
    }
    if pset.d is not None:
        payload["d"] = pset.d.tolist()
    return payload


def save_checkpoint(params: NdoParams, path) -> None:
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "bit_order": BIT_ORDER,
        "n_visible": params.n_visible,
        "n_hidden": params.n_hidden,
        "n_aux": params.n_aux,
        "lambda": _pset_payload(params.lam),
        "mu": _pset_payload(params.mu),
    }
    with open(path, "w") as fh:
        fh.write(dumps_exact(payload))
        fh.write("\n")


def load_checkpoint(path) -> NdoParams:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a model checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version")
    if payload.get("bit_order") != BIT_ORDER:
        raise ValueError(f"{path}: unknown bit-order tag {payload.get('bit_order')!r}")

    def pset(entry, with_d):
        return ParamSet(
            W=np.array(entry["W"], dtype=float),
            U=np.array(entry["U"], dtype=float),
            b=np.array(entry["b"], dtype=float),
            c=np.array(entry["c"], dtype=float),
            d=np.array(entry["d"], dtype=float) if with_d else None,
        )

    return NdoParams(
        n_visible=int(payload["n_visible"]),
        n_hidden=int(payload["n_hidden"]),
        n_aux=int(payload["n_aux"]),
        lam=pset(payload["lambda"], True),
        mu=pset(payload["mu"], False),
    )


def save_train_report(records, best_epoch: int, best_nll: float, path) -> None:
    """Per-epoch rows (epoch, nll, fidelity?) plus the selection result."""
    with open(path, "w") as fh:
        fh.write(REPORT_HEADER + "\n")
        fh.write("# columns: epoch,nll,fidelity\n")
        fh.write(f"# best_epoch: {best_epoch}\n")
        fh.write(f"# best_nll: {fmt_float(best_nll)}\n")
        for rec in records:
            fid = "" if rec.fidelity is None else fmt_float(rec.fidelity)
            fh.write(f"{rec.epoch},{fmt_float(rec.nll)},{fid}\n")


def load_train_report(path):
    """Returns (records, best_epoch, best_nll)."""
    records = []
    best_epoch = None
    best_nll = None
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line.startswith("# best_epoch:"):
                    best_epoch = int(line.split(":", 1)[1])
                elif line.startswith("# best_nll:"):
                    best_nll = float(line.split(":", 1)[1])
                continue
            fields = line.split(",")
            fid = float(fields[2]) if len(fields) > 2 and fields[2] else None
            records.append(EpochRecord(int(fields[0]), float(fields[1]), fid))
    return records, best_epoch, best_nll


def format_matrix_blocks(matrix: np.ndarray) -> str:
    """Complex matrix as two CSV blocks of real and imaginary parts."""
    m = np.asarray(matrix, dtype=complex)
    n_qubits = int(round(np.log2(m.shape[0])))
    lines = [MATRIX_HEADER, f"# qubits: {n_qubits}", "# block: real"]
    for row in m.real:
        lines.append(",".join(fmt_float(v) for v in row))
    lines.append("# block: imag")
    for row in m.imag:
        lines.append(",".join(fmt_float(v) for v in row))
    return "\n".join(lines) + "\n"


def write_matrix_blocks(matrix: np.ndarray, path) -> None:
    with open(path, "w") as fh:
        fh.write(format_matrix_blocks(matrix))


def parse_matrix_blocks(text: str) -> np.ndarray:
    """Inverse of :func:`format_matrix_blocks`.

    Lines before the first ``# block:`` marker are ignored, so the
    parser also accepts evaluation reports that carry a metrics
    preamble.
    """
    blocks: dict = {}
    current = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("# block:"):
            current = line.split(":", 1)[1].strip()
            blocks[current] = []
            continue
        if line.startswith("#") or current is None:
            continue
        blocks[current].append([float(v) for v in line.split(",")])
    if "real" not in blocks or "imag" not in blocks:
        raise ValueError("matrix text lacks real/imag blocks")
    real = np.array(blocks["real"])
    imag = np.array(blocks["imag"])
    if real.shape != imag.shape or real.ndim != 2:
        raise ValueError("real and imaginary blocks disagree in shape")
    return real + 1j * imag


def read_matrix_blocks(path) -> np.ndarray:
    with open(path) as fh:
        return parse_matrix_blocks(fh.read())
