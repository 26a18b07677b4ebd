"""Seeded sampling of Haar unitaries, probes and random states.

Every sampler takes an explicit ``RngState`` (or a ready numpy
``Generator``); there is no module-level generator. A ``(master_seed,
stream_id)`` pair maps to a PCG64 stream through ``numpy.random.SeedSequence``
so the same pair reproduces the same samples on every platform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_U64 = 2**64


@dataclass(frozen=True)
class RngState:
    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_id"):
            v = getattr(self, name)
            if not 0 <= int(v) < _U64:
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {v}")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.master_seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.PCG64(ss))

    def stream(self, stream_id: int) -> "RngState":
        return RngState(self.master_seed, stream_id)


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngState):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return RngState(int(rng)).generator()
    raise TypeError(f"cannot build a generator from {type(rng).__name__}")


def complex_gaussian(gen: np.random.Generator, shape) -> np.ndarray:
    """I.i.d. standard complex normals, ``E|z|^2 = 1``."""
    return (gen.standard_normal(shape) + 1j * gen.standard_normal(shape)) / np.sqrt(2)


def haar_unitary(n: int, rng) -> np.ndarray:
    """Haar-distributed ``n x n`` unitary.

    QR of a complex Ginibre matrix with the phases of ``diag(R)`` moved into
    ``Q`` (Mezzadri's correction), which makes the law exactly Haar.
    """
    if n < 1:
        raise ValueError("dimension must be at least 1")
    z = complex_gaussian(as_generator(rng), (n, n))
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def random_probe(db: int, rng, rows: int | None = None) -> np.ndarray:
    """Probe operator drawn from the Gaussian-induced pure-state measure.

    A ``rows x db`` complex Gaussian matrix normalized to unit Frobenius
    norm; this is a uniformly random pure state on ``B'B``.
    """
    if db < 1:
        raise ValueError("dimension must be at least 1")
    g = complex_gaussian(as_generator(rng), (rows or db, db))
    return g / np.linalg.norm(g)


def random_pure(d: int, rng) -> np.ndarray:
    v = complex_gaussian(as_generator(rng), d)
    return v / np.linalg.norm(v)


def random_density_and_pure(da: int, db: int, rng):
    """Random bipartite density matrix plus one pure state on each side.

    ``rho = G G^dagger / Tr(G G^dagger)`` with ``G`` square complex Gaussian
    (Hilbert-Schmidt measure).
    """
    gen = as_generator(rng)
    d = da * db
    g = complex_gaussian(gen, (d, d))
    rho = g @ g.conj().T
    rho /= np.trace(rho).real
    rho = (rho + rho.conj().T) / 2
    return rho, random_pure(da, gen), random_pure(db, gen)
