"""Synthetic measurement records from exact target states, the 9-basis
two-qubit protocol, and the plain-text dataset format.

File format (version 1): one record per line, ``<basis> <outcome>``
(e.g. ``XY 01``), ``#`` starts a comment. A count-table variant
``<basis> <outcome> <count>`` is expanded to individual records on
load, which is how externally tabulated coincidence counts come in.
"""

from dataclasses import dataclass, field

import numpy as np

from .qcore import (
    DensityMatrix,
    NumericalDomainError,
    basis_rotation,
    check_basis,
    enumerate_configs,
)

DATASET_HEADER = "# ndotomo dataset v1"

NEGATIVE_PROB_ATOL = 1e-12
PROB_SUM_ATOL = 1e-10


@dataclass
class Dataset:
    """Measurement records grouped per basis.

    ``groups`` maps a basis string to a (n_records, n_qubits) uint8
    array of outcome bits; every group is non-empty.
    """

    n_qubits: int
    groups: dict = field(default_factory=dict)

    def __post_init__(self):
        for basis, rec in self.groups.items():
            check_basis(basis)
            if len(basis) != self.n_qubits:
                raise ValueError(f"basis {basis!r} length != {self.n_qubits}")
            rec = np.asarray(rec, dtype=np.uint8)
            if rec.ndim != 2 or rec.shape[1] != self.n_qubits or rec.shape[0] == 0:
                raise ValueError(f"group {basis!r} must be non-empty (n, {self.n_qubits})")
            self.groups[basis] = rec

    @property
    def n_records(self) -> int:
        return sum(rec.shape[0] for rec in self.groups.values())

    def equals(self, other: "Dataset") -> bool:
        if self.n_qubits != other.n_qubits:
            return False
        if list(self.groups) != list(other.groups):
            return False
        return all(np.array_equal(self.groups[b], other.groups[b]) for b in self.groups)


@dataclass(frozen=True)
class MeasurementProtocol:
    """Which bases to measure, how many shots each, and the seed."""

    bases: tuple
    samples_per_basis: int
    seed: int

    def __post_init__(self):
        if not self.bases:
            raise ValueError("protocol needs at least one basis")
        lengths = {len(b) for b in self.bases}
        if len(lengths) != 1:
            raise ValueError("all bases must have the same length")
        for b in self.bases:
            check_basis(b)
        if self.samples_per_basis < 1:
            raise ValueError("samples_per_basis must be >= 1")


def nine_bases() -> list:
    """The standard two-qubit protocol: all pairs over {Z, X, Y} in the
    fixed order ZZ, ZX, ZY, XZ, XX, XY, YZ, YX, YY."""
    order = "ZXY"
    return [a + b for a in order for b in order]


def outcome_distribution(target: DensityMatrix, basis: str) -> np.ndarray:
    """Outcome probabilities in a measurement basis: the diagonal of the
    rotated density matrix, clamped against tiny negative noise."""
    check_basis(basis)
    if len(basis) != target.n_qubits:
        raise ValueError(f"basis {basis!r} does not match a {target.n_qubits}-qubit state")
    u = basis_rotation(basis)
    probs = np.diag(u @ target.matrix @ u.conj().T).real.copy()
    if probs.min() < -NEGATIVE_PROB_ATOL:
        raise NumericalDomainError(
            f"negative outcome probability {probs.min():.3e} in basis {basis}"
        )
    probs = np.clip(probs, 0.0, None)
    if abs(probs.sum() - 1.0) > PROB_SUM_ATOL:
        raise NumericalDomainError(
            f"outcome probabilities sum to {probs.sum()} in basis {basis}"
        )
    return probs


def sample_dataset(target: DensityMatrix, protocol: MeasurementProtocol) -> Dataset:
    """Independent draws from the exact outcome distribution of each
    basis, via inverse CDF; deterministic given the protocol seed."""
    rng = np.random.default_rng(protocol.seed)
    n = target.n_qubits
    configs = enumerate_configs(n)
    groups = {}
    for basis in protocol.bases:
        probs = outcome_distribution(target, basis)
        cdf = np.cumsum(probs)
        cdf[-1] = max(cdf[-1], 1.0)  # guard the final bin against rounding
        u = rng.random(protocol.samples_per_basis)
        idx = np.searchsorted(cdf, u, side="right")
        groups[basis] = configs[idx].copy()
    return Dataset(n_qubits=n, groups=groups)


def write_dataset(dataset: Dataset, path) -> None:
    with open(path, "w") as fh:
        fh.write(DATASET_HEADER + "\n")
        fh.write(f"# qubits: {dataset.n_qubits}\n")
        for basis, rec in dataset.groups.items():
            for row in rec:
                fh.write(f"{basis} {''.join(str(int(b)) for b in row)}\n")


def _parse_outcome(token: str, lineno: int) -> np.ndarray:
    for ch in token:
        if ch not in "01":
            raise ValueError(
                f"line {lineno}: invalid outcome character {ch!r} in {token!r}"
            )
    return np.frombuffer(token.encode(), dtype=np.uint8) - ord("0")


def read_dataset(path) -> Dataset:
    """Parse a dataset file; count-table lines are expanded to records.

    Malformed lines raise ValueError naming the line number and the
    offending token.
    """
    groups: dict = {}
    n_qubits = None
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            if len(tokens) not in (2, 3):
                raise ValueError(f"line {lineno}: expected 2 or 3 fields, got {len(tokens)}")
            basis, outcome = tokens[0], tokens[1]
            for ch in basis:
                if ch not in "XYZ":
                    raise ValueError(
                        f"line {lineno}: invalid basis character {ch!r} in {basis!r}"
                    )
            bits = _parse_outcome(outcome, lineno)
            if len(basis) != bits.size:
                raise ValueError(
                    f"line {lineno}: basis {basis!r} and outcome {outcome!r} differ in length"
                )
            if n_qubits is None:
                n_qubits = len(basis)
            elif len(basis) != n_qubits:
                raise ValueError(f"line {lineno}: inconsistent qubit count")
            count = 1
            if len(tokens) == 3:
                try:
                    count = int(tokens[2])
                except ValueError:
                    raise ValueError(
                        f"line {lineno}: invalid count {tokens[2]!r}"
                    ) from None
                if count < 0:
                    raise ValueError(f"line {lineno}: negative count {count}")
            if count:
                groups.setdefault(basis, []).extend([bits] * count)
    if not groups:
        raise ValueError("dataset file contains no records")
    return Dataset(
        n_qubits=n_qubits,
        groups={b: np.array(rows, dtype=np.uint8) for b, rows in groups.items()},
    )
