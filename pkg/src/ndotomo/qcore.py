"""Dense complex linear algebra and quantum-state utilities.

Conventions used throughout the package:

* Qubits are ordered most-significant-first: a configuration
  ``sigma = (s_1, ..., s_N)`` maps to the integer index
  ``sum_j s_j * 2**(N - j)``, so the 2-qubit basis order is
  ``|00>, |01>, |10>, |11>``.
* Measurement bases are strings over ``{X, Y, Z}``, one letter per qubit.
  ``Z`` is the computational (reference) basis; rows of each local
  rotation index outcomes in the new basis, columns index reference
  states, with outcome 0 mapped to the +1 eigenstate.
"""

from dataclasses import dataclass

import numpy as np

# Dense 2^N x 2^N matrices only; keeps memory at desk scale.
MAX_QUBITS = 10

_INV_SQRT2 = 1.0 / np.sqrt(2.0)

# Local basis-change matrices U[s_out, s_ref] = <s_out, basis | s_ref, Z>.
# X is the Hadamard; the Y phase convention fixes outcome 0 to the +1
# eigenstate of Pauli-Y written in the Z basis.
LOCAL_UNITARIES = {
    "Z": np.eye(2, dtype=complex),
    "X": _INV_SQRT2 * np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex),
    "Y": _INV_SQRT2 * np.array([[1.0, -1.0j], [1.0, 1.0j]], dtype=complex),
}

HERMITICITY_ATOL = 1e-12
TRACE_ATOL = 1e-10
PSD_ATOL = 1e-10


class NumericalDomainError(ArithmeticError):
    """A computation left its valid numerical domain (overflow, log of
    a vanishing quantity, PSD violation beyond tolerance)."""


@dataclass(frozen=True)
class DensityMatrix:
    """A validated density matrix: Hermitian, unit trace, PSD.

    Construct via :func:`validate_density` (diagnostic path) or
    :meth:`DensityMatrix.from_matrix` (raising path).
    """

    dim: int
    matrix: np.ndarray

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "DensityMatrix":
        result = validate_density(m)
        if isinstance(result, DensityCheck):
            raise ValueError(f"not a valid density matrix: {result.describe()}")
        return result

    @property
    def n_qubits(self) -> int:
        return int(round(np.log2(self.dim)))

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))


@dataclass(frozen=True)
class DensityCheck:
    """Diagnostic report from :func:`validate_density`.

    Records by how much each of the three defining invariants is
    violated; ``ok`` only when all three pass their tolerances.
    """

    hermiticity_dev: float
    trace_dev: float
    min_eigenvalue: float
    ok: bool

    def describe(self) -> str:
        parts = []
        if self.hermiticity_dev > HERMITICITY_ATOL:
            parts.append(f"hermiticity deviation {self.hermiticity_dev:.3e}")
        if self.trace_dev > TRACE_ATOL:
            parts.append(f"trace deviation {self.trace_dev:.3e}")
        if self.min_eigenvalue < -PSD_ATOL:
            parts.append(f"negative eigenvalue {self.min_eigenvalue:.3e}")
        return "; ".join(parts) if parts else "all invariants satisfied"


def validate_density(m: np.ndarray) -> "DensityMatrix | DensityCheck":
    """Check the three density-matrix invariants of a square matrix.

    Returns a :class:`DensityMatrix` when Hermiticity, unit trace and
    positive semidefiniteness all hold within tolerance, otherwise a
    :class:`DensityCheck` report quantifying the violations.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    herm_dev = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
    trace_dev = float(abs(np.trace(m) - 1.0))
    # Eigenvalues of the Hermitian part; for a nearly Hermitian matrix this
    # is the meaningful PSD test.
    ev = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
    min_eig = float(ev[0])
    ok = (
        herm_dev <= HERMITICITY_ATOL
        and trace_dev <= TRACE_ATOL
        and min_eig >= -PSD_ATOL
    )
    check = DensityCheck(herm_dev, trace_dev, min_eig, ok)
    if not ok:
        return check
    return DensityMatrix(dim=m.shape[0], matrix=m)


def ensure_within_cap(n_qubits: int) -> None:
    """Reject systems too large for dense 2^N enumeration."""
    if n_qubits > MAX_QUBITS:
        raise ValueError(
            f"{n_qubits} qubits exceeds the dense-matrix cap of {MAX_QUBITS}"
        )


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product of two matrices (dims multiply)."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.size == 0 or b.size == 0:
        raise ValueError("kron arguments must be non-empty")
    return np.kron(a, b)


def local_unitary(label: str) -> np.ndarray:
    """The 2x2 basis-change matrix for one site, label in {X, Y, Z}."""
    try:
        return LOCAL_UNITARIES[label].copy()
    except KeyError:
        raise ValueError(f"unknown basis label {label!r}; expected X, Y or Z")


def check_basis(basis: str) -> str:
    if not basis or any(ch not in "XYZ" for ch in basis):
        raise ValueError(f"invalid basis string {basis!r}; use letters X, Y, Z")
    return basis


def basis_rotation(basis: str) -> np.ndarray:
    """Tensor product of local basis changes for an N-site basis string.

    Rows index outcomes in the measurement basis, columns index
    reference-basis states. Unitary by construction.
    """
    check_basis(basis)
    if len(basis) > MAX_QUBITS:
        raise ValueError(
            f"{len(basis)} qubits exceeds the dense-matrix cap of {MAX_QUBITS}"
        )
    u = local_unitary(basis[0])
    for ch in basis[1:]:
        u = np.kron(u, local_unitary(ch))
    return u


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    """Hermitian square root with tolerance-checked eigenvalue clamping."""
    ev, vec = np.linalg.eigh(m)
    if ev[0] < -PSD_ATOL:
        raise NumericalDomainError(
            f"matrix is not PSD: minimum eigenvalue {ev[0]:.3e}"
        )
    ev = np.clip(ev, 0.0, None)
    return (vec * np.sqrt(ev)) @ vec.conj().T


def fidelity(a: DensityMatrix, b: DensityMatrix) -> float:
    """Fidelity Tr sqrt(sqrt(a) b sqrt(a)) between two density matrices.

    Computed via Hermitian eigendecompositions; eigenvalues in
    ``[-1e-10, 0)`` are clamped to zero, anything more negative raises.
    The result is clamped to [0, 1] after a tolerance check.
    """
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    sqrt_a = _psd_sqrt(a.matrix)
    inner = sqrt_a @ b.matrix @ sqrt_a
    ev = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    if ev[0] < -PSD_ATOL:
        raise NumericalDomainError(
            f"fidelity inner matrix not PSD: minimum eigenvalue {ev[0]:.3e}"
        )
    f = float(np.sum(np.sqrt(np.clip(ev, 0.0, None))))
    if f > 1.0 + 1e-9:
        raise NumericalDomainError(f"fidelity {f} exceeds 1 beyond tolerance")
    return min(max(f, 0.0), 1.0)


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    """Trace distance 0.5 * ||a - b||_1."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    diff = a.matrix - b.matrix
    ev = np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))
    return float(0.5 * np.sum(np.abs(ev)))


def depolarize(psi: np.ndarray, p_dep: float) -> DensityMatrix:
    """Pure state sent through a depolarizing channel of strength p_dep.

    Returns ``(1 - p)|psi><psi| + p * I / 2^N``.
    """
    if not 0.0 <= p_dep <= 1.0:
        raise ValueError(f"p_dep must lie in [0, 1], got {p_dep}")
    psi = np.asarray(psi, dtype=complex).ravel()
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"state vector must be normalized, |psi| = {norm}")
    dim = psi.size
    rho = (1.0 - p_dep) * np.outer(psi, psi.conj())
    rho += p_dep * np.eye(dim) / dim
    return DensityMatrix.from_matrix(rho)


def mix_with_identity(rho: DensityMatrix, p_dep: float) -> DensityMatrix:
    """Depolarizing channel applied to an arbitrary (possibly mixed) state."""
    if not 0.0 <= p_dep <= 1.0:
        raise ValueError(f"p_dep must lie in [0, 1], got {p_dep}")
    mixed = (1.0 - p_dep) * rho.matrix + p_dep * np.eye(rho.dim) / rho.dim
    return DensityMatrix.from_matrix(mixed)


CANONICAL_STATES = ("bell_phi_plus", "psi_i")


def canonical_state(name: str) -> np.ndarray:
    """Reference two-qubit pure states used by the reconstruction demos.

    ``bell_phi_plus`` is (|00> + |11>)/sqrt(2); ``psi_i`` is
    (|00> + i|11>)/sqrt(2).
    """
    if name == "bell_phi_plus":
        return np.array([1.0, 0.0, 0.0, 1.0], dtype=complex) * _INV_SQRT2
    if name == "psi_i":
        return np.array([1.0, 0.0, 0.0, 1.0j], dtype=complex) * _INV_SQRT2
    raise ValueError(f"unknown canonical state {name!r}; options: {CANONICAL_STATES}")


def pure_density(psi: np.ndarray) -> DensityMatrix:
    """|psi><psi| as a validated density matrix."""
    psi = np.asarray(psi, dtype=complex).ravel()
    return DensityMatrix.from_matrix(np.outer(psi, psi.conj()))


def enumerate_configs(n: int) -> np.ndarray:
    """All binary configurations of n sites, shape (2^n, n), uint8.

    Row i is the bit pattern of i with the first site most significant,
    matching the package-wide index convention.
    """
    if n < 0:
        raise ValueError("site count must be non-negative")
    if n > MAX_QUBITS * 2:
        raise ValueError(f"refusing to enumerate 2^{n} configurations")
    idx = np.arange(2**n, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1)
    return ((idx[:, None] >> shifts) & 1).astype(np.uint8)


def bits_to_index(bits: np.ndarray) -> int:
    """Integer index of a bit vector (first bit most significant)."""
    bits = np.asarray(bits).astype(np.int64).ravel()
    idx = 0
    for b in bits:
        idx = (idx << 1) | int(b)
    return idx


def index_to_bits(index: int, n: int) -> np.ndarray:
    """Bit vector of length n for an integer index (msb first)."""
    shifts = np.arange(n - 1, -1, -1)
    return ((index >> shifts) & 1).astype(np.uint8)
