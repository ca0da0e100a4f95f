"""Unitary 2-design machinery.

Builds the single-qubit Clifford group as the default gate set, certifies
the 2-design property numerically through the frame potential, and exposes
the two-copy twirl projector and sequence-averaged operator whose 2 x 2
invariant restriction drives the decay curves.
"""

from __future__ import annotations

import functools
import json
from dataclasses import dataclass

import numpy as np

from . import channels
from .channels import OperatorBasis, Superoperator, _frozen
from .linalg import is_unitary
from .metrics import DecayMatrix

HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=np.complex128) / np.sqrt(2.0)
PHASE = np.array([[1.0, 0.0], [0.0, 1.0j]], dtype=np.complex128)


def canonical_phase(u: np.ndarray) -> np.ndarray:
    """Fix the global phase so the first nonzero entry of column 0 is real positive."""
    col = u[:, 0]
    idx = int(np.argmax(np.abs(col) > 1e-12))
    phase = col[idx] / abs(col[idx])
    return u / phase


@dataclass(frozen=True, eq=False)
class GateSet:
    """A finite set of unitaries, deduplicated up to global phase."""

    dim: int
    unitaries: tuple[np.ndarray, ...]
    label: str = ""

    def __post_init__(self):
        for k, u in enumerate(self.unitaries):
            if u.shape != (self.dim, self.dim) or not is_unitary(u, 1e-12):
                raise ValueError(f"gate {k} is not unitary to 1e-12")
        canon = [canonical_phase(u) for u in self.unitaries]
        for i in range(len(canon)):
            for j in range(i + 1, len(canon)):
                if np.linalg.norm(canon[i] - canon[j]) < 1e-8:
                    raise ValueError(f"gates {i} and {j} coincide up to global phase")

    def __len__(self) -> int:
        return len(self.unitaries)


@functools.lru_cache(maxsize=None)
def clifford_1q() -> GateSet:
    """The 24-element single-qubit Clifford group.

    Generated by closing {H, S} under multiplication with global-phase
    canonicalization.
    """
    elements = [canonical_phase(np.eye(2, dtype=np.complex128))]
    frontier = list(elements)
    while frontier:
        nxt = []
        for u in frontier:
            for g in (HADAMARD, PHASE):
                cand = canonical_phase(g @ u)
                if all(np.linalg.norm(cand - e) >= 1e-8 for e in elements):
                    elements.append(cand)
                    nxt.append(cand)
        frontier = nxt
    return GateSet(dim=2, unitaries=tuple(_frozen(e) for e in elements), label="clifford-1q")


def frame_potential_2(gateset: GateSet) -> float:
    """Second frame potential |G|^-2 sum_{g,h} |Tr(g^dag h)|^4; 2 for a 2-design."""
    stack = np.stack(gateset.unitaries)
    overlaps = np.einsum("aji,bjk->abik", stack.conj(), stack)
    traces = np.trace(overlaps, axis1=2, axis2=3)
    return float(np.mean(np.abs(traces) ** 4))


def gate_superoperators(gateset: GateSet, basis: OperatorBasis | None = None) -> np.ndarray:
    """Stack of transfer matrices of the gates, shape (|G|, d^2, d^2)."""
    basis = basis or channels.default_basis(gateset.dim)
    return np.stack(
        [channels.liouville_of_unitary(u, basis) for u in gateset.unitaries]
    )


def single_copy_twirl(gateset: GateSet, basis: OperatorBasis | None = None) -> np.ndarray:
    """|G|^-1 sum_g of the gate transfer matrices (rank one for a 1-design)."""
    return gate_superoperators(gateset, basis).mean(axis=0)


def twirl_projector_2copy(gateset: GateSet, basis: OperatorBasis | None = None) -> np.ndarray:
    """Projector |G|^-1 sum_g L(g) (x) L(g) onto the twirl-invariant subspace.

    For an exact 2-design this is the rank-2 orthogonal projector onto the
    span of the vectorized invariant-basis operators.
    """
    mats = gate_superoperators(gateset, basis)
    n = mats.shape[1]
    acc = np.zeros((n * n, n * n))
    for m in mats:
        acc += np.kron(m, m)
    return acc / len(mats)


def invariant_coeff_vectors(d: int) -> tuple[np.ndarray, np.ndarray]:
    """Coefficient vectors of the invariant-basis operators in two-copy space.

    In the product basis A_k (x) A_l, the normalized two-copy identity has a
    single coefficient at (0, 0), and the traceless part of SWAP weights the
    diagonal pairs (k, k) for k > 0 equally.
    """
    n = d * d
    b1 = np.zeros(n * n)
    b1[0] = 1.0
    b2 = np.zeros(n * n)
    for k in range(1, n):
        b2[k * n + k] = 1.0
    b2 /= np.sqrt(n - 1.0)
    return b1, b2


def averaged_operator(
    gateset: GateSet, noise: Superoperator
) -> tuple[np.ndarray, DecayMatrix]:
    """Sequence-averaged two-copy operator and its invariant 2 x 2 restriction."""
    if noise.dim != gateset.dim:
        raise ValueError("noise dimension does not match gate set")
    proj = twirl_projector_2copy(gateset, noise.basis)
    full = proj @ np.kron(noise.matrix, noise.matrix) @ proj
    b1, b2 = invariant_coeff_vectors(noise.dim)
    entries = [[float(u @ full @ v) for v in (b1, b2)] for u in (b1, b2)]
    restriction = DecayMatrix(
        m11=entries[0][0], m12=entries[0][1], m21=entries[1][0], m22=entries[1][1]
    )
    return full, restriction


def save_gateset(gateset: GateSet, path) -> None:
    data = {
        "d": gateset.dim,
        "label": gateset.label,
        "unitaries": [channels._matrix_to_json(u) for u in gateset.unitaries],
    }
    with open(path, "w") as fh:
        json.dump(data, fh)


def load_gateset(path, require_2design: bool = False) -> GateSet:
    """Load a gate set from JSON, re-verifying unitarity (and optionally the
    frame potential)."""
    with open(path) as fh:
        data = json.load(fh)
    unitaries = tuple(
        _frozen(channels._matrix_from_json(rows)) for rows in data["unitaries"]
    )
    gateset = GateSet(dim=int(data["d"]), unitaries=unitaries, label=data.get("label", ""))
    if require_2design:
        potential = frame_potential_2(gateset)
        if abs(potential - 2.0) > 1e-10:
            raise ValueError(f"gate set is not a 2-design: frame potential {potential!r}")
    return gateset
