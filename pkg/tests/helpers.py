"""Independent numerical oracles used by the tests.

These deliberately avoid the library's transfer-matrix code paths: the
Monte Carlo routines integrate the defining Haar averages directly over
random pure states, and the Procrustes bound solves the unitary-correction
problem in closed form.  Each Monte Carlo oracle returns (value, stderr).
"""

import numpy as np

from purityrb import channels
from purityrb.channels import KrausChannel


def haar_states(gen: np.random.Generator, n: int, d: int) -> np.ndarray:
    """n Haar-random pure state vectors, shape (n, d)."""
    raw = gen.standard_normal((n, d)) + 1j * gen.standard_normal((n, d))
    return raw / np.linalg.norm(raw, axis=1, keepdims=True)


def _mc(values: np.ndarray) -> tuple[float, float]:
    return float(values.mean()), float(values.std(ddof=1) / np.sqrt(len(values)))


def mc_unitarity(channel: KrausChannel, n: int = 100_000, seed: int = 0) -> tuple[float, float]:
    """Monte Carlo average of the squared shifted Bloch length of outputs.

    Uses the adjoint trick n_k(E(psi)) = <psi| E^dag(A_k) |psi> to stay
    vectorized over states.
    """
    d = channel.dim
    basis = channels.default_basis(d)
    gen = np.random.default_rng(seed)
    states = haar_states(gen, n, d)
    adj_images = np.stack(
        [
            sum(k.conj().T @ a @ k for k in channel.kraus_ops)
            for a in basis.elements[1:]
        ]
    )
    coords = np.einsum("ni,kij,nj->nk", states.conj(), adj_images, states).real
    base = channels.coeff_vector(channel.apply(np.eye(d) / d), basis)[1:]
    sq = np.sum((coords - base[np.newaxis, :]) ** 2, axis=1)
    value, err = _mc(sq)
    scale = d / (d - 1.0)
    return scale * value, scale * err


def mc_survival(channel: KrausChannel, n: int = 100_000, seed: int = 0) -> tuple[float, float]:
    """Monte Carlo Haar average of the surviving trace."""
    gen = np.random.default_rng(seed)
    states = haar_states(gen, n, channel.dim)
    ksum = channel.kraus_sum
    values = np.einsum("ni,ij,nj->n", states.conj(), ksum, states).real
    return _mc(values)


def mc_infidelity(channel: KrausChannel, n: int = 100_000, seed: int = 0) -> tuple[float, float]:
    """Monte Carlo Haar average of 1 - <psi| E(psi) |psi>."""
    gen = np.random.default_rng(seed)
    states = haar_states(gen, n, channel.dim)
    overlap = np.zeros(n)
    for k in channel.kraus_ops:
        overlap += np.abs(np.einsum("ni,ij,nj->n", states.conj(), k, states)) ** 2
    value, err = _mc(overlap)
    return 1.0 - value, err


def procrustes_optimized_infidelity(sup) -> float:
    """Exact qubit optimum of the unitary-corrected infidelity.

    Maximizing Tr(Rv Eu Ru) over rotation pairs is an orthogonal Procrustes
    problem: the optimum is s1 + s2 + sign(det Eu) s3 in the singular values
    of the unital block.
    """
    eu = channels.block_decompose(sup).unital
    s = np.linalg.svd(eu, compute_uv=False)
    best = s[0] + s[1] + np.sign(np.linalg.det(eu)) * s[2]
    return 1.0 - (3.0 + best) / 6.0
