"""Dense operator algebra for small multi-qubit systems.

Pauli assembly and projection, Hermitian/general eigendecomposition with a
deterministic eigenvector phase convention, and tensor products. Everything
is plain dense numpy; the systems handled here are 2 to a few dozen levels.
"""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DecompositionError

PAULI_1Q: dict[str, np.ndarray] = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

DEGENERACY_GUARD = 1e-8
HERMITICITY_TOL = 1e-12


def tensor(*mats: np.ndarray) -> np.ndarray:
    """Kronecker product of one or more operators, left-to-right."""
    if not mats:
        raise ValueError("tensor() needs at least one operator")
    out = np.asarray(mats[0], dtype=complex)
    for m in mats[1:]:
        out = np.kron(out, np.asarray(m, dtype=complex))
    return out


def pauli_matrix(label: str) -> np.ndarray:
    """Build the n-qubit Pauli operator named by a label such as "ZX" or "IYI"."""
    if not label or any(c not in PAULI_1Q for c in label):
        raise ValueError(f"invalid Pauli label {label!r}")
    return tensor(*(PAULI_1Q[c] for c in label))


@dataclass(frozen=True)
class PauliTerm:
    """One term of a Pauli-basis decomposition: coefficient times a product."""

    coefficient: complex
    factors: tuple[str, ...]

    def __post_init__(self):
        for f in self.factors:
            if f not in PAULI_1Q:
                raise ValueError(f"invalid Pauli factor {f!r}")

    @property
    def label(self) -> str:
        return "".join(self.factors)

    def matrix(self) -> np.ndarray:
        return self.coefficient * pauli_matrix(self.label)


@dataclass(frozen=True)
class HermitianOperator:
    """A dense operator with an explicit hermiticity contract.

    When ``hermitian`` is True (the default) the entries are validated to be
    Hermitian within 1e-12 of the operator's scale at construction time.
    """

    entries: np.ndarray
    hermitian: bool = True

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"operator must be square, got shape {a.shape}")
        object.__setattr__(self, "entries", a)
        if self.hermitian:
            scale = max(1.0, float(np.linalg.norm(a)))
            dev = float(np.max(np.abs(a - a.conj().T)))
            if dev > HERMITICITY_TOL * scale:
                raise ValueError(
                    f"operator is not Hermitian (max deviation {dev:.3e})"
                )

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues (ascending by real part) and phase-fixed eigenvectors.

    ``degeneracy_gap`` is the smallest spacing between adjacent eigenvalues;
    ``degenerate`` flags a gap below 1e-8 times the operator norm, in which
    case eigenvector phases inside the degenerate block are only fixed up to
    the deterministic secondary sort used here.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray
    degeneracy_gap: float
    degenerate: bool = False
    hermitian: bool = True
    _inverse: np.ndarray | None = field(default=None, repr=False)

    def reconstruct(self) -> np.ndarray:
        if self.hermitian:
            return (self.vectors * self.eigenvalues) @ self.vectors.conj().T
        return (self.vectors * self.eigenvalues) @ self._inverse


def fix_phases(vectors: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude component of each column real and positive."""
    out = vectors.copy()
    for k in range(out.shape[1]):
        i = int(np.argmax(np.abs(out[:, k])))
        piv = out[i, k]
        if abs(piv) > 0:
            out[:, k] = out[:, k] * (abs(piv) / piv)
    return out


def _matrix_hash(a: np.ndarray) -> str:
    return hashlib.sha1(np.ascontiguousarray(a).tobytes()).hexdigest()[:12]


def eigendecompose(a: np.ndarray, mode: str = "hermitian") -> SpectralDecomposition:
    """Diagonalize a dense operator.

    mode="hermitian" uses the symmetric solver and returns real ascending
    eigenvalues with unitary, phase-fixed eigenvector columns. mode="general"
    uses the nonsymmetric solver, sorts by real part (ties by imaginary
    part), and keeps the inverse eigenvector matrix for reconstruction.
    """
    a = np.asarray(a, dtype=complex)
    if mode not in ("hermitian", "general"):
        raise ValueError(f"unknown mode {mode!r}")
    try:
        if mode == "hermitian":
            evals, vecs = np.linalg.eigh(a)
        else:
            evals, vecs = np.linalg.eig(a)
    except np.linalg.LinAlgError as exc:
        raise DecompositionError(_matrix_hash(a), str(exc)) from exc

    if mode == "general":
        order = np.lexsort((evals.imag, evals.real))
        evals = evals[order]
        vecs = vecs[:, order]
        vecs = vecs / np.linalg.norm(vecs, axis=0, keepdims=True)

    vecs = fix_phases(vecs)
    if len(evals) > 1:
        gap = float(np.min(np.abs(np.diff(evals))))
    else:
        gap = float("inf")
    scale = max(1.0, float(np.linalg.norm(a)))
    degenerate = gap < DEGENERACY_GUARD * scale
    if degenerate:
        warnings.warn(
            f"nearly degenerate spectrum (gap {gap:.3e}); eigenvector phases "
            f"inside the degenerate block are convention-dependent",
            stacklevel=2,
        )
    inv = None
    if mode == "general":
        inv = np.linalg.inv(vecs)
    return SpectralDecomposition(
        eigenvalues=evals if mode == "general" else evals.astype(float),
        vectors=vecs,
        degeneracy_gap=gap,
        degenerate=degenerate,
        hermitian=(mode == "hermitian"),
        _inverse=inv,
    )


def pauli_assemble(terms: list[PauliTerm], n_qubits: int | None = None) -> np.ndarray:
    """Sum a list of Pauli terms into a dense matrix.

    An empty list needs an explicit ``n_qubits`` and yields the zero matrix.
    """
    if not terms:
        if n_qubits is None:
            raise ValueError("empty term list needs n_qubits to fix the dimension")
        return np.zeros((2**n_qubits, 2**n_qubits), dtype=complex)
    nq = len(terms[0].factors)
    if n_qubits is not None and n_qubits != nq:
        raise ValueError(f"terms act on {nq} qubits, but n_qubits={n_qubits}")
    out = np.zeros((2**nq, 2**nq), dtype=complex)
    for t in terms:
        if len(t.factors) != nq:
            raise ValueError("all terms must act on the same number of qubits")
        out += t.matrix()
    return out


def _all_labels(n_qubits: int) -> list[str]:
    labels = [""]
    for _ in range(n_qubits):
        labels = [s + c for s in labels for c in "IXYZ"]
    return labels


def pauli_project(
    a: np.ndarray, basis: list[str] | None = None
) -> tuple[list[PauliTerm], float]:
    """Project an operator onto a set of Pauli products.

    Coefficients are Tr(A P) / 2^n. ``basis`` is a list of labels such as
    ["ZZ", "IX"]; None means the complete basis, for which the residual is
    zero up to rounding. Returns the coefficient terms (in basis order) and
    the Frobenius norm of the unprojected remainder.
    """
    a = np.asarray(a, dtype=complex)
    d = a.shape[0]
    nq = int(round(np.log2(d)))
    if 2**nq != d:
        raise ValueError(f"dimension {d} is not a power of two")
    if basis is None:
        basis = _all_labels(nq)
    terms = []
    remainder = a.copy()
    for label in basis:
        if len(label) != nq:
            raise ValueError(f"label {label!r} does not act on {nq} qubits")
        p = pauli_matrix(label)
        c = complex(np.trace(a @ p)) / d
        if abs(c.imag) < 1e-12 * max(1.0, abs(c)):
            c = complex(c.real, 0.0)
        terms.append(PauliTerm(coefficient=c, factors=tuple(label)))
        remainder -= c * p
    residual = float(np.linalg.norm(remainder))
    return terms, residual
