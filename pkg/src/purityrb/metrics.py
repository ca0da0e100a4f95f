"""Scalar figures of merit for noise channels.

The central quantity is the unitarity: the average squared length of the
output Bloch vector over Haar-random pure inputs, with the identity
component removed.  It equals the mean squared Frobenius weight of the
unital block of the transfer matrix, is 1 exactly for unitary channels,
and together with the survival rate fixes the two decay rates of the
sequence protocol through a 2 x 2 matrix of block norms.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from . import channels
from .channels import (
    BlockDecomposition,
    KrausChannel,
    Superoperator,
    block_decompose,
    jamiolkowski,
)
from .linalg import ATOL_EQ, ATOL_STRUCT


def unitarity(s: Superoperator) -> float:
    """Mean squared weight of the unital block, Tr(E_u^T E_u) / (d^2 - 1)."""
    blocks = block_decompose(s)
    n = blocks.unital.shape[0]
    return float(np.sum(blocks.unital**2) / n)


def survival_rate(s: Superoperator) -> float:
    """Haar-average surviving trace; the (1, 1) transfer-matrix entry."""
    return float(s.matrix[0, 0])


def average_infidelity(s: Superoperator) -> float:
    """Average gate infidelity to the identity, 1 - (Tr L + d) / (d^2 + d).

    The closed form assumes a trace-preserving channel; a warning is issued
    otherwise.
    """
    d = s.dim
    if abs(survival_rate(s) - 1.0) > ATOL_STRUCT:
        warnings.warn(
            "average_infidelity assumes a trace-preserving channel",
            stacklevel=2,
        )
    return float(1.0 - (np.trace(s.matrix) + d) / (d * d + d))


def _so3_rotation(alpha: float, beta: float, gamma: float) -> np.ndarray:
    """Bloch rotation Rz(alpha) Ry(beta) Rz(gamma)."""
    ca, sa = np.cos(alpha), np.sin(alpha)
    cb, sb = np.cos(beta), np.sin(beta)
    cg, sg = np.cos(gamma), np.sin(gamma)
    rz_a = np.array([[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]])
    ry_b = np.array([[cb, 0.0, sb], [0.0, 1.0, 0.0], [-sb, 0.0, cb]])
    rz_g = np.array([[cg, -sg, 0.0], [sg, cg, 0.0], [0.0, 0.0, 1.0]])
    return rz_a @ ry_b @ rz_g


def optimized_infidelity(s: Superoperator, restarts: int = 20, seed: int = 0) -> float:
    """Best average infidelity achievable with perfect unitary control (qubits).

    Minimizes the infidelity of V o E o U over single-qubit unitaries U, V
    parametrized by three Euler angles each, using multi-start Nelder-Mead
    simplex minimization.  The returned value is the best local minimum
    found, hence an upper bound on the true optimum; it never exceeds the
    uncorrected infidelity because the identity correction is always tried.
    """
    if s.dim != 2:
        raise ValueError("optimized_infidelity is implemented for qubits only")
    e_u = block_decompose(s).unital

    def objective(x):
        r_v = _so3_rotation(x[0], x[1], x[2])
        r_u = _so3_rotation(x[3], x[4], x[5])
        return 1.0 - (3.0 + np.trace(r_v @ e_u @ r_u)) / 6.0

    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0x0F1D,)))
    starts = [np.zeros(6)]
    starts += [rng.uniform(0.0, 2.0 * np.pi, size=6) for _ in range(max(0, restarts - 1))]
    best = average_infidelity(s)
    best_x = None
    for x0 in starts:
        res = scipy.optimize.minimize(
            objective,
            x0,
            method="Nelder-Mead",
            options={"xatol": 1e-9, "fatol": 1e-13, "maxiter": 800},
        )
        if res.fun < best:
            best = float(res.fun)
            best_x = res.x
    if best_x is not None:
        # polish the winner once; Nelder-Mead restarts rebuild the simplex
        res = scipy.optimize.minimize(
            objective,
            best_x,
            method="Nelder-Mead",
            options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 800},
        )
        best = min(best, float(res.fun))
    return best


@dataclass(frozen=True)
class DecayMatrix:
    """Restriction of the sequence-averaged two-copy map to its invariant plane.

    Entries are fixed by the block norms of the single-copy transfer matrix:
    m11 is the squared survival rate, m22 the unitarity, and the
    off-diagonal entries carry the squared leakage/nonunital block norms
    scaled by 1/sqrt(d^2 - 1).
    """

    m11: float
    m12: float
    m21: float
    m22: float

    def as_array(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m21, self.m22]])


def m_matrix(s: Superoperator) -> DecayMatrix:
    blocks = block_decompose(s)
    scale = 1.0 / np.sqrt(blocks.unital.shape[0])
    return DecayMatrix(
        m11=float(blocks.survival**2),
        m12=float(np.sum(blocks.sdl**2) * scale),
        m21=float(np.sum(blocks.nonunital**2) * scale),
        m22=unitarity(s),
    )


def decay_eigenvalues(m: DecayMatrix) -> tuple[float, float]:
    """Eigenvalues (lambda_plus, lambda_minus) of the 2 x 2 decay matrix."""
    disc = (m.m11 - m.m22) ** 2 + 4.0 * m.m12 * m.m21
    if disc < -ATOL_EQ:
        raise ValueError(f"negative discriminant {disc:.2e}: non-physical decay matrix")
    root = np.sqrt(max(disc, 0.0))
    mid = 0.5 * (m.m11 + m.m22)
    return float(mid + 0.5 * root), float(mid - 0.5 * root)


def swap_operator(d: int) -> np.ndarray:
    """SWAP on C^d (x) C^d."""
    s = np.zeros((d * d, d * d))
    for i in range(d):
        for j in range(d):
            s[i * d + j, j * d + i] = 1.0
    return s


@dataclass(frozen=True, eq=False)
class TwirlInvariantBasis:
    """Orthonormal operators spanning the subspace fixed by two-copy twirling.

    ``b1`` is the normalized two-copy identity and ``b2`` the traceless part
    of SWAP; both commute with U (x) U conjugation for every unitary U.
    """

    dim: int
    b1: np.ndarray
    b2: np.ndarray


def twirl_invariant_basis(d: int) -> TwirlInvariantBasis:
    ident = np.eye(d * d)
    swap = swap_operator(d)
    b1 = ident / d
    b2 = (swap - ident / d) / np.sqrt(d * d - 1.0)
    return TwirlInvariantBasis(dim=d, b1=b1, b2=b2)


@dataclass(frozen=True, eq=False)
class SubspaceProbes:
    """Maximally mixed states and projectors on the symmetric/antisymmetric subspaces."""

    dim: int
    sym_state: np.ndarray
    anti_state: np.ndarray
    sym_projector: np.ndarray
    anti_projector: np.ndarray


def subspace_probes(d: int) -> SubspaceProbes:
    ident = np.eye(d * d)
    swap = swap_operator(d)
    return SubspaceProbes(
        dim=d,
        sym_state=(ident + swap) / (d * (d + 1)),
        anti_state=(ident - swap) / (d * (d - 1)),
        sym_projector=(ident + swap) / 2.0,
        anti_projector=(ident - swap) / 2.0,
    )


def probe_probabilities(s: Superoperator) -> tuple[float, float]:
    """Outcome probabilities of the two subspace-probe experiments.

    ``p_as`` is the probability of landing in the antisymmetric subspace
    when starting from the symmetric mixed state (and vice versa for
    ``p_sa``), after one step of the sequence-averaged two-copy map.  Both
    are probabilities, so they are confined to [0, 1] for physical channels.
    """
    d = s.dim
    blocks = block_decompose(s)
    s2 = blocks.survival**2
    u = unitarity(s)
    n2 = float(np.sum(blocks.nonunital**2))
    l2 = float(np.sum(blocks.sdl**2))
    p_as = (d - 1) / (2.0 * d) * (s2 - u - n2 / (d - 1) + l2 / (d + 1))
    p_sa = (d + 1) / (2.0 * d) * (s2 - u + n2 / (d + 1) - l2 / (d - 1))
    return float(p_as), float(p_sa)


@dataclass(frozen=True)
class NormBoundReport:
    """Residuals (bound minus value, >= 0 when satisfied) of the block-norm bounds."""

    nonunital_residual: float
    sdl_residual: float
    tp_residual: float | None
    satisfied: bool


def check_norm_bounds(s: Superoperator, atol: float = ATOL_EQ) -> NormBoundReport:
    d = s.dim
    blocks = block_decompose(s)
    bound = 0.5 * (d * d - 1) * (blocks.survival**2 - unitarity(s))
    n2 = float(np.sum(blocks.nonunital**2))
    l2 = float(np.sum(blocks.sdl**2))
    tp_residual = None
    if abs(blocks.survival - 1.0) < ATOL_STRUCT and np.linalg.norm(blocks.sdl) < ATOL_STRUCT:
        tp_residual = float((d - 1) * (1.0 - unitarity(s)) - n2)
    residuals = [bound - n2, bound - l2] + ([tp_residual] if tp_residual is not None else [])
    return NormBoundReport(
        nonunital_residual=float(bound - n2),
        sdl_residual=float(bound - l2),
        tp_residual=tp_residual,
        satisfied=bool(min(residuals) >= -atol),
    )


@dataclass(frozen=True)
class InfidelityChainReport:
    """Unitarity bounds in terms of the (optimized) average infidelity.

    ``first_residual`` is u - [1 - dR/(d-1)]^2 and ``second_residual`` is
    [1 - dR/(d-1)]^2 - [1 - dr/(d-1)]^2; both are nonnegative when the chain
    holds.  ``bracket_valid`` records the precondition r <= (d-1)/d under
    which the second inequality is meaningful.  ``lower_bound_residual`` is
    R - (d-1)/d (1 - sqrt(u)) >= 0.
    """

    unitarity: float
    infidelity: float
    optimized_infidelity_upper: float
    first_residual: float
    second_residual: float
    lower_bound_residual: float
    bracket_valid: bool


def check_infidelity_chain(
    s: Superoperator, restarts: int = 20, seed: int = 0
) -> InfidelityChainReport:
    d = s.dim
    u = unitarity(s)
    r = average_infidelity(s)
    r_opt = optimized_infidelity(s, restarts=restarts, seed=seed)
    scale = d / (d - 1)
    bracket_r_opt = (1.0 - scale * r_opt) ** 2
    bracket_r = (1.0 - scale * r) ** 2
    return InfidelityChainReport(
        unitarity=u,
        infidelity=r,
        optimized_infidelity_upper=r_opt,
        first_residual=float(u - bracket_r_opt),
        second_residual=float(bracket_r_opt - bracket_r),
        lower_bound_residual=float(r_opt - (1.0 - np.sqrt(max(u, 0.0))) / scale),
        bracket_valid=bool(r <= (d - 1) / d + ATOL_EQ),
    )


@dataclass(frozen=True)
class JamiolkowskiReport:
    """Choi-purity identity d^2 Tr(J^dag J) = S^2 + |sdl|^2 + |n|^2 + (d^2-1) u."""

    lhs: float
    rhs: float
    residual: float


def check_jamiolkowski_identity(channel: KrausChannel) -> JamiolkowskiReport:
    d = channel.dim
    lhs = d * d * jamiolkowski(channel).purity()
    s = channels.kraus_to_liouville(channel)
    blocks = block_decompose(s)
    rhs = (
        blocks.survival**2
        + float(np.sum(blocks.sdl**2))
        + float(np.sum(blocks.nonunital**2))
        + (d * d - 1) * unitarity(s)
    )
    return JamiolkowskiReport(lhs=float(lhs), rhs=float(rhs), residual=float(abs(lhs - rhs)))


def composition_unitarity(first: Superoperator, second: Superoperator) -> float:
    """Unitarity of the composite map (``first`` applied first)."""
    return unitarity(channels.compose(second, first))
