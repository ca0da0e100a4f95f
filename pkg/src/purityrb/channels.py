"""Quantum channel representations and conversions.

A channel can be held as a set of Kraus operators (:class:`KrausChannel`),
as its transfer matrix in a Hermitian operator basis (:class:`Superoperator`,
real-valued by construction), or as its Choi state (:class:`ChoiState`).
Composition of channels is matrix multiplication of transfer matrices, and
the transfer matrix splits into survival / leakage / nonunital / unital
blocks (:class:`BlockDecomposition`) that drive every figure of merit in
:mod:`purityrb.metrics`.
"""

from __future__ import annotations

import functools
import itertools
import json
from dataclasses import dataclass

import numpy as np

from . import linalg
from .linalg import ATOL_EQ, ATOL_STRUCT, dagger

PAULI_1Q = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class OperatorBasis:
    """Orthonormal Hermitian operator basis with the identity first.

    ``elements[0]`` is 1/sqrt(d) times the identity and the remaining
    elements are traceless, all orthonormal under Tr(A^dag B).
    """

    dim: int
    elements: tuple[np.ndarray, ...]

    def __post_init__(self):
        d = self.dim
        if len(self.elements) != d * d:
            raise ValueError(f"need {d * d} basis elements, got {len(self.elements)}")
        ident = self.elements[0] * np.sqrt(d)
        if np.linalg.norm(ident - np.eye(d)) > ATOL_EQ:
            raise ValueError("first basis element must be identity/sqrt(d)")
        for k, a in enumerate(self.elements):
            if not linalg.is_hermitian(a, ATOL_EQ):
                raise ValueError(f"basis element {k} is not Hermitian")
            if k > 0 and abs(np.trace(a)) > ATOL_EQ:
                raise ValueError(f"basis element {k} is not traceless")
        gram = np.array(
            [[linalg.frobenius_inner(a, b) for b in self.elements] for a in self.elements]
        )
        if np.linalg.norm(gram - np.eye(d * d)) > 1e-11:
            raise ValueError("basis elements are not orthonormal")

    @property
    def size(self) -> int:
        return self.dim * self.dim


@functools.lru_cache(maxsize=None)
def pauli_basis(n_qubits: int) -> OperatorBasis:
    """Normalized Pauli basis on ``n_qubits`` qubits.

    Ordering: identity string first, then the remaining strings in
    lexicographic order over (I, X, Y, Z) per site.  Each element is a
    Pauli string divided by sqrt(2^n).
    """
    if not 1 <= n_qubits <= 3:
        raise ValueError("pauli_basis supports 1 to 3 qubits")
    d = 2**n_qubits
    norm = 1.0 / np.sqrt(d)
    strings = ["".join(s) for s in itertools.product("IXYZ", repeat=n_qubits)]
    strings.remove("I" * n_qubits)
    strings.insert(0, "I" * n_qubits)
    elements = []
    for s in strings:
        op = np.array([[1.0]], dtype=np.complex128)
        for ch in s:
            op = np.kron(op, PAULI_1Q[ch])
        elements.append(_frozen(op * norm))
    return OperatorBasis(dim=d, elements=tuple(elements))


def pauli_strings(n_qubits: int) -> list[str]:
    """Labels matching the ordering of :func:`pauli_basis`."""
    strings = ["".join(s) for s in itertools.product("IXYZ", repeat=n_qubits)]
    strings.remove("I" * n_qubits)
    return ["I" * n_qubits] + strings


def default_basis(dim: int) -> OperatorBasis:
    n = int(round(np.log2(dim)))
    if 2**n != dim:
        raise ValueError(f"only power-of-two dimensions are supported, got {dim}")
    return pauli_basis(n)


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """A completely positive map given by its Kraus operators."""

    dim: int
    kraus_ops: tuple[np.ndarray, ...]

    def __post_init__(self):
        if not self.kraus_ops:
            raise ValueError("a channel needs at least one Kraus operator")
        for k in self.kraus_ops:
            if k.shape != (self.dim, self.dim):
                raise ValueError(f"Kraus operator shape {k.shape} != ({self.dim}, {self.dim})")
            linalg.require_finite(k)

    @functools.cached_property
    def kraus_sum(self) -> np.ndarray:
        return sum(dagger(k) @ k for k in self.kraus_ops)

    @property
    def trace_preserving(self) -> bool:
        return bool(np.linalg.norm(self.kraus_sum - np.eye(self.dim)) < ATOL_STRUCT)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        rho = linalg.as_cmatrix(rho)
        return sum(k @ rho @ dagger(k) for k in self.kraus_ops)


def identity_channel(dim: int) -> KrausChannel:
    return KrausChannel(dim, (_frozen(np.eye(dim, dtype=np.complex128)),))


def unitary_channel(u: np.ndarray) -> KrausChannel:
    u = linalg.as_cmatrix(u)
    if not linalg.is_unitary(u, 1e-8):
        raise ValueError("unitary_channel requires a unitary matrix")
    return KrausChannel(u.shape[0], (_frozen(u),))


def scale_channel(channel: KrausChannel, factor: float) -> KrausChannel:
    """Scale the whole map by ``factor`` in [0, 1] (uniform loss)."""
    if not 0.0 <= factor <= 1.0:
        raise ValueError("scale factor must be in [0, 1]")
    root = np.sqrt(factor)
    return KrausChannel(channel.dim, tuple(_frozen(root * k) for k in channel.kraus_ops))


def compose_kraus(later: KrausChannel, earlier: KrausChannel) -> KrausChannel:
    """Kraus form of ``later`` after ``earlier`` (all pairwise products)."""
    if later.dim != earlier.dim:
        raise ValueError("dimension mismatch in composition")
    ops = tuple(
        _frozen(b @ a) for b in later.kraus_ops for a in earlier.kraus_ops
    )
    return KrausChannel(later.dim, ops)


@dataclass(frozen=True, eq=False)
class Superoperator:
    """Transfer matrix of a channel in a Hermitian operator basis.

    Hermiticity-preserving maps have real entries in such a basis, so the
    matrix is stored real.
    """

    basis: OperatorBasis
    matrix: np.ndarray

    def __post_init__(self):
        n = self.basis.size
        if self.matrix.shape != (n, n):
            raise ValueError(f"transfer matrix must be {n} x {n}")
        if np.iscomplexobj(self.matrix):
            raise ValueError("transfer matrix entries must be real")
        linalg.require_finite(self.matrix)

    @property
    def dim(self) -> int:
        return self.basis.dim


def coeff_vector(op: np.ndarray, basis: OperatorBasis) -> np.ndarray:
    """Expansion coefficients Tr(A_k^dag op) of a Hermitian operator."""
    coeffs = np.array([linalg.frobenius_inner(a, op) for a in basis.elements])
    if np.abs(coeffs.imag).max() > 1e-11:
        raise ValueError("operator is not Hermitian: complex expansion coefficients")
    return coeffs.real


def operator_from_coeffs(vec: np.ndarray, basis: OperatorBasis) -> np.ndarray:
    out = np.zeros((basis.dim, basis.dim), dtype=np.complex128)
    for c, a in zip(vec, basis.elements):
        out += c * a
    return out


def kraus_to_liouville(channel: KrausChannel, basis: OperatorBasis | None = None) -> Superoperator:
    """Transfer matrix with entries Tr(A_k^dag E(A_l))."""
    basis = basis or default_basis(channel.dim)
    if basis.dim != channel.dim:
        raise ValueError("basis dimension does not match channel dimension")
    n = basis.size
    images = [channel.apply(a) for a in basis.elements]
    matrix = np.empty((n, n), dtype=np.complex128)
    for l, img in enumerate(images):
        for k, a in enumerate(basis.elements):
            matrix[k, l] = linalg.frobenius_inner(a, img)
    imag_residue = float(np.abs(matrix.imag).max())
    if imag_residue > ATOL_EQ * 10:
        raise ValueError(
            f"transfer matrix has imaginary residue {imag_residue:.2e}; "
            "the basis is not Hermitian or the Kraus set is corrupt"
        )
    return Superoperator(basis=basis, matrix=_frozen(matrix.real))


def liouville_of_unitary(u: np.ndarray, basis: OperatorBasis | None = None) -> np.ndarray:
    """Transfer matrix (as a bare array) of conjugation by ``u``."""
    basis = basis or default_basis(u.shape[0])
    return kraus_to_liouville(unitary_channel(u), basis).matrix


def compose(later: Superoperator, earlier: Superoperator) -> Superoperator:
    """Transfer matrix of ``later`` after ``earlier``."""
    if later.basis.dim != earlier.basis.dim:
        raise ValueError("dimension mismatch in composition")
    return Superoperator(basis=later.basis, matrix=_frozen(later.matrix @ earlier.matrix))


def adjoint_channel(s: Superoperator) -> Superoperator:
    """Adjoint map with respect to the Hilbert-Schmidt inner product."""
    return Superoperator(basis=s.basis, matrix=_frozen(s.matrix.T))


@dataclass(frozen=True, eq=False)
class BlockDecomposition:
    """Survival / leakage / nonunital / unital blocks of a transfer matrix."""

    survival: float
    sdl: np.ndarray        # first row without the survival entry
    nonunital: np.ndarray  # first column without the survival entry
    unital: np.ndarray     # trailing (d^2-1) x (d^2-1) block

    def reassemble(self) -> np.ndarray:
        n = len(self.sdl) + 1
        out = np.empty((n, n))
        out[0, 0] = self.survival
        out[0, 1:] = self.sdl
        out[1:, 0] = self.nonunital
        out[1:, 1:] = self.unital
        return out


def block_decompose(s: Superoperator) -> BlockDecomposition:
    m = s.matrix
    return BlockDecomposition(
        survival=float(m[0, 0]),
        sdl=_frozen(m[0, 1:]),
        nonunital=_frozen(m[1:, 0]),
        unital=_frozen(m[1:, 1:]),
    )


@dataclass(frozen=True, eq=False)
class ChoiState:
    """Jamiolkowski state J(E) = (E (x) Id)[Phi], Phi the maximally entangled state.

    The channel acts on the first tensor factor; Tr J equals the average
    survival rate of the channel.
    """

    dim: int
    matrix: np.ndarray

    def purity(self) -> float:
        return float(np.real(np.trace(dagger(self.matrix) @ self.matrix)))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh((self.matrix + dagger(self.matrix)) / 2).min())


def jamiolkowski(channel: KrausChannel) -> ChoiState:
    d = channel.dim
    j = np.zeros((d * d, d * d), dtype=np.complex128)
    unit = np.zeros((d, d), dtype=np.complex128)
    for a in range(d):
        for b in range(d):
            unit[:] = 0.0
            unit[a, b] = 1.0
            j += np.kron(channel.apply(unit), unit) / d
    return ChoiState(dim=d, matrix=_frozen(j))


@dataclass(frozen=True)
class CptpReport:
    cp: bool
    tp: bool
    tni: bool
    choi_min_eigenvalue: float
    kraus_sum_deviation: float
    kraus_sum_max_eigenvalue: float


def is_cptp(channel: KrausChannel) -> CptpReport:
    """Complete positivity / trace preservation / trace non-increase report."""
    choi_min = jamiolkowski(channel).min_eigenvalue()
    deviation = float(np.linalg.norm(channel.kraus_sum - np.eye(channel.dim)))
    top = float(np.linalg.eigvalsh(channel.kraus_sum).max())
    return CptpReport(
        cp=choi_min > -ATOL_STRUCT,
        tp=deviation < ATOL_STRUCT,
        tni=top <= 1.0 + ATOL_STRUCT,
        choi_min_eigenvalue=choi_min,
        kraus_sum_deviation=deviation,
        kraus_sum_max_eigenvalue=top,
    )


# --- serialization ---------------------------------------------------------

def _matrix_to_json(m: np.ndarray) -> list:
    return [[[float(np.real(x)), float(np.imag(x))] for x in row] for row in np.asarray(m)]


def _matrix_from_json(rows) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows])


def channel_to_dict(channel: KrausChannel) -> dict:
    return {
        "d": channel.dim,
        "kind": "kraus",
        "ops": [_matrix_to_json(k) for k in channel.kraus_ops],
    }


def superoperator_to_dict(s: Superoperator) -> dict:
    return {
        "d": s.dim,
        "kind": "liouville",
        "basis": "pauli",
        "matrix": [[float(x) for x in row] for row in s.matrix],
    }


def channel_from_dict(data: dict) -> KrausChannel | Superoperator:
    kind = data.get("kind")
    if kind == "kraus":
        ops = tuple(_frozen(_matrix_from_json(rows)) for rows in data["ops"])
        return KrausChannel(int(data["d"]), ops)
    if kind == "liouville":
        if data.get("basis", "pauli") != "pauli":
            raise ValueError(f"unsupported basis {data.get('basis')!r}")
        basis = default_basis(int(data["d"]))
        return Superoperator(basis=basis, matrix=_frozen(np.array(data["matrix"], dtype=float)))
    raise ValueError(f"unknown channel kind {kind!r}")


def save_channel(obj: KrausChannel | Superoperator, path) -> None:
    data = channel_to_dict(obj) if isinstance(obj, KrausChannel) else superoperator_to_dict(obj)
    with open(path, "w") as fh:
        json.dump(data, fh)


def load_channel(path) -> KrausChannel | Superoperator:
    with open(path) as fh:
        return channel_from_dict(json.load(fh))
