"""Generators for noise channels: named analytic channels, Haar-random
unitaries, eigenvalue-perturbed gate-dependent errors, and random CPTP
channels of prescribed Kraus rank.

All randomness flows through :class:`RngStream`, a (seed, key) pair backed
by ``numpy``'s ``SeedSequence``.  Identical pairs reproduce identical
output; distinct keys give statistically independent streams, so parallel
generation is schedule-independent.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from . import channels
from .channels import KrausChannel, OperatorBasis, Superoperator, _frozen
from .linalg import dagger, unitary_eigensystem

KET0 = np.array([[1.0], [0.0]], dtype=np.complex128)


def _encode_key(key: tuple) -> tuple[int, ...]:
    out = []
    for item in key:
        if isinstance(item, str):
            out.append(zlib.crc32(item.encode()))
        elif isinstance(item, (int, np.integer)):
            if item < 0:
                raise ValueError("stream key integers must be nonnegative")
            out.append(int(item))
        else:
            raise TypeError(f"unsupported stream key element {item!r}")
    return tuple(out)


@dataclass(frozen=True)
class RngStream:
    """Deterministic random stream identified by a seed and a purpose key."""

    seed: int
    key: tuple = ()

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=_encode_key(self.key))
        return np.random.default_rng(seq)

    def child(self, *key) -> "RngStream":
        return RngStream(seed=self.seed, key=self.key + key)


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError("rng must be an RngStream or numpy Generator")


# --- named channels --------------------------------------------------------

def depolarizing(d: int, p: float) -> KrausChannel:
    """rho -> (1 - p) rho + p * identity/d."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("depolarizing strength p must be in [0, 1]")
    basis = channels.default_basis(d)
    ops = [np.sqrt(1.0 - p + p / d**2) * np.eye(d, dtype=np.complex128)]
    for a in basis.elements[1:]:
        # unnormalized Pauli strings are unitary, so sqrt(d) * a is a valid factor
        ops.append(np.sqrt(p) / d * (np.sqrt(d) * a))
    return KrausChannel(d, tuple(_frozen(k) for k in ops))


def reset_channel(p: float) -> KrausChannel:
    """Qubit relaxation toward |0>: rho -> p |0><0| Tr(rho) + (1 - p) rho."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("reset probability p must be in [0, 1]")
    k0 = np.sqrt(1.0 - p) * np.eye(2, dtype=np.complex128)
    k1 = np.sqrt(p) * (KET0 @ KET0.conj().T)
    k2 = np.sqrt(p) * np.array([[0.0, 1.0], [0.0, 0.0]], dtype=np.complex128)
    return KrausChannel(2, (_frozen(k0), _frozen(k1), _frozen(k2)))


def state_prep_channel() -> KrausChannel:
    """rho -> Tr(rho) |0><0|: trace-preserving but maximally nonunital."""
    k1 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=np.complex128)
    k2 = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=np.complex128)
    return KrausChannel(2, (_frozen(k1), _frozen(k2)))


def filter_channel() -> KrausChannel:
    """rho -> |0><0| rho |0><0|: trace-decreasing projection filter."""
    k = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=np.complex128)
    return KrausChannel(2, (_frozen(k),))


def state_prep_dual_channel() -> KrausChannel:
    """rho -> <0|rho|0> identity/2: half the adjoint of :func:`state_prep_channel`."""
    k1 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=np.complex128) / np.sqrt(2.0)
    k2 = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=np.complex128) / np.sqrt(2.0)
    return KrausChannel(2, (_frozen(k1), _frozen(k2)))


def partial_filter(gamma: float) -> KrausChannel:
    """Attenuate |1> amplitude by sqrt(1 - gamma): a smooth trace-decreasing map."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must be in [0, 1]")
    k = np.diag([1.0, np.sqrt(1.0 - gamma)]).astype(np.complex128)
    return KrausChannel(2, (_frozen(k),))


def rotation_unitary(axis, angle: float) -> KrausChannel:
    """Qubit rotation by ``angle`` radians about a unit Bloch ``axis``."""
    axis = np.asarray(axis, dtype=float)
    if axis.shape != (3,) or abs(np.linalg.norm(axis) - 1.0) > 1e-10:
        raise ValueError("axis must be a unit 3-vector")
    sigma = (
        axis[0] * channels.PAULI_1Q["X"]
        + axis[1] * channels.PAULI_1Q["Y"]
        + axis[2] * channels.PAULI_1Q["Z"]
    )
    u = np.cos(angle / 2) * np.eye(2) - 1j * np.sin(angle / 2) * sigma
    return channels.unitary_channel(u)


# --- random ensembles ------------------------------------------------------

def _ginibre(gen: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    return gen.standard_normal((rows, cols)) + 1j * gen.standard_normal((rows, cols))


def haar_unitary(d: int, rng) -> np.ndarray:
    """Haar-random unitary via QR of a Ginibre matrix with phase correction."""
    if d < 2:
        raise ValueError("dimension must be at least 2")
    gen = _as_generator(rng)
    q, r = np.linalg.qr(_ginibre(gen, d, d))
    diag = np.diagonal(r)
    return q * (diag / np.abs(diag))[np.newaxis, :]


@dataclass(frozen=True, eq=False)
class GateDependentNoise:
    """Per-gate error channels, indexed like the gate set they perturb."""

    channels: tuple[KrausChannel, ...]

    def __len__(self) -> int:
        return len(self.channels)

    def __getitem__(self, index: int) -> KrausChannel:
        return self.channels[index]

    def average_superoperator(self, basis: OperatorBasis | None = None) -> Superoperator:
        """Transfer matrix of the gate-averaged error channel."""
        basis = basis or channels.default_basis(self.channels[0].dim)
        mats = [channels.kraus_to_liouville(c, basis).matrix for c in self.channels]
        return Superoperator(basis=basis, matrix=_frozen(np.mean(mats, axis=0)))


def compose_with_gate_noise(base: KrausChannel, gate_noise: GateDependentNoise) -> GateDependentNoise:
    """Per-gate noise ``gate_noise[g]`` applied after the shared ``base`` channel."""
    return GateDependentNoise(
        channels=tuple(channels.compose_kraus(w, base) for w in gate_noise.channels)
    )


def eigenvalue_perturbed_gates(gates, max_delta: float, rng) -> GateDependentNoise:
    """Systematic over/under-rotation errors for each gate.

    Each gate g = sum_k exp(i theta_k) v_k v_k^dag is replaced by the unitary
    with eigenphases theta_k + eps_k, where the eps_k are drawn once,
    independently and uniformly from [-max_delta, max_delta].  The stored
    error channel is the residual conjugation by the perturbed gate times
    g^{-1}, so each error is itself unitary.
    """
    if max_delta < 0:
        raise ValueError("max_delta must be nonnegative")
    gen = _as_generator(rng)
    noise = []
    for g in gates:
        phases, v = unitary_eigensystem(g)
        eps = gen.uniform(-max_delta, max_delta, size=len(phases))
        perturbed = (v * np.exp(1j * (phases + eps))[np.newaxis, :]) @ dagger(v)
        noise.append(channels.unitary_channel(perturbed @ dagger(g)))
    return GateDependentNoise(channels=tuple(noise))


def bruzda_channel(d: int, kraus_rank: int, rng) -> KrausChannel:
    """Random CPTP channel of prescribed Kraus rank.

    Draws a d^2 x rank complex Ginibre matrix G, forms the Wishart matrix
    G G^dag as an unnormalized Choi state, and restores trace preservation
    by conjugating with identity (x) Y^{-1/2} where Y is the partial trace
    over the output factor.  Kraus operators come from the eigenvectors of
    the resulting Choi state; eigenvalues below 1e-10 are treated as zero.
    """
    if not 1 <= kraus_rank <= d * d:
        raise ValueError(f"kraus_rank must be in [1, {d * d}]")
    gen = _as_generator(rng)
    g = _ginibre(gen, d * d, kraus_rank)
    w = g @ dagger(g)
    # partial trace over the first (output) factor
    y = np.einsum("aiaj->ij", w.reshape(d, d, d, d))
    evals, evecs = np.linalg.eigh(y)
    # y is PSD up to roundoff; guard against tiny negative eigenvalues
    evals = np.maximum(evals, 1e-30)
    y_isqrt = (evecs / np.sqrt(evals)[np.newaxis, :]) @ dagger(evecs)
    corr = np.kron(np.eye(d), y_isqrt)
    choi = corr @ w @ corr  # Choi state times d
    choi = (choi + dagger(choi)) / 2.0
    mu, vectors = np.linalg.eigh(choi)
    ops = []
    for weight, vec in zip(mu, vectors.T):
        if weight > 1e-10:
            ops.append(_frozen(np.sqrt(weight) * vec.reshape(d, d)))
    return KrausChannel(d, tuple(ops))


# --- channel specifier strings ---------------------------------------------

class ChannelSpecError(ValueError):
    """Raised for malformed channel specifier strings."""


def _split_composition(body: str) -> list[str]:
    parts, depth, current = [], 0, []
    for ch in body:
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(current))
            current = []
        else:
            current.append(ch)
    parts.append("".join(current))
    return [p.strip() for p in parts if p.strip()]


def parse_channel_spec(spec: str) -> KrausChannel:
    """Parse a channel specifier string.

    Supported forms: ``dep:p``, ``reset:p``, ``rotX:theta`` (also rotY,
    rotZ), ``haar:seed``, ``bruzda:rank:seed``, ``scale:factor:inner`` and
    ``compose:[a,b,...]`` (listed in application order).
    """
    spec = spec.strip()
    head, _, rest = spec.partition(":")
    try:
        if head == "dep":
            return depolarizing(2, float(rest))
        if head == "reset":
            return reset_channel(float(rest))
        if head in ("rotX", "rotY", "rotZ"):
            axis = {"rotX": (1, 0, 0), "rotY": (0, 1, 0), "rotZ": (0, 0, 1)}[head]
            return rotation_unitary(axis, float(rest))
        if head == "haar":
            stream = RngStream(seed=int(rest), key=("haar-spec",))
            return channels.unitary_channel(haar_unitary(2, stream))
        if head == "bruzda":
            rank_text, _, seed_text = rest.partition(":")
            stream = RngStream(seed=int(seed_text), key=("bruzda-spec", int(rank_text)))
            return bruzda_channel(2, int(rank_text), stream)
        if head == "scale":
            factor_text, _, inner = rest.partition(":")
            return channels.scale_channel(parse_channel_spec(inner), float(factor_text))
        if head == "compose":
            if not (rest.startswith("[") and rest.endswith("]")):
                raise ChannelSpecError(f"compose expects a [a,b] list, got {rest!r}")
            parts = _split_composition(rest[1:-1])
            if not parts:
                raise ChannelSpecError("compose list is empty")
            out = parse_channel_spec(parts[0])
            for part in parts[1:]:
                out = channels.compose_kraus(parse_channel_spec(part), out)
            return out
    except ChannelSpecError:
        raise
    except (TypeError, ValueError) as exc:
        raise ChannelSpecError(f"bad channel spec {spec!r}: {exc}") from exc
    raise ChannelSpecError(f"unknown channel kind {head!r} in {spec!r}")
