"""Dense complex linear algebra shared by every bound method.

Matrices are plain ``numpy`` arrays; ``Effect`` and ``Measurement`` wrap them
with the validity checks used for strategies and fixtures.
"""

from dataclasses import dataclass
from functools import reduce
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from scipy import linalg

from bellbound.errors import DimensionMismatch, InvalidStrategy, RankOutOfRange
from bellbound.loader.models import TOLERANCES, EffectKind


RngLike = Union[int, np.random.Generator, None]


def as_rng(seed: RngLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def hermitian_part(m: np.ndarray) -> np.ndarray:
    return (m + m.conj().T) / 2


def hermiticity_error(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def is_hermitian(m: np.ndarray, tol: Optional[float] = None) -> bool:
    tol = TOLERANCES.hermitian if tol is None else tol
    return m.ndim == 2 and m.shape[0] == m.shape[1] and hermiticity_error(m) <= tol


def min_eigenvalue(m: np.ndarray) -> float:
    return float(linalg.eigvalsh(hermitian_part(m))[0])


def tensor(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product of the operands, left to right."""
    if not ops:
        return np.ones((1, 1), dtype=complex)
    return reduce(np.kron, ops)


def ket_to_density(ket: np.ndarray) -> np.ndarray:
    ket = np.asarray(ket, dtype=complex).reshape(-1)
    return np.outer(ket, ket.conj())


def haar_unitary(dim: int, seed: RngLike = None) -> np.ndarray:
    rng = as_rng(seed)
    ginibre = (
        rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    ) / np.sqrt(2)
    q, r = np.linalg.qr(ginibre)
    # Fix the phases of R's diagonal so Q is Haar distributed.
    phases = np.diagonal(r) / np.abs(np.diagonal(r))
    return q * phases


def random_pure_state(dim: int, seed: RngLike = None) -> np.ndarray:
    if dim < 1:
        raise DimensionMismatch(f"State dimension must be positive, got {dim}")
    rng = as_rng(seed)
    ket = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return ket / np.linalg.norm(ket)


@dataclass(frozen=True)
class Effect:
    matrix: np.ndarray
    kind: EffectKind = EffectKind.general_positive

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def validate(self, tol: Optional[float] = None):
        psd_tol = TOLERANCES.psd if tol is None else tol
        herm_tol = TOLERANCES.hermitian if tol is None else tol
        if not is_hermitian(self.matrix, herm_tol):
            raise InvalidStrategy(
                f"Effect is not Hermitian (error {hermiticity_error(self.matrix):.2e})"
            )
        low = min_eigenvalue(self.matrix)
        if low < -psd_tol:
            raise InvalidStrategy(f"Effect is not PSD (min eigenvalue {low:.2e})")
        if self.kind == EffectKind.projector:
            proj_tol = TOLERANCES.projector if tol is None else tol
            residue = np.linalg.norm(self.matrix @ self.matrix - self.matrix)
            if residue > proj_tol:
                raise InvalidStrategy(f"Effect is not a projector ({residue:.2e})")


def haar_projector(dim: int, rank: int, seed: RngLike = None) -> Effect:
    if rank < 0 or rank > dim:
        raise RankOutOfRange(f"Rank {rank} out of range for dimension {dim}")
    if rank == 0:
        return Effect(np.zeros((dim, dim), dtype=complex), EffectKind.projector)
    if rank == dim:
        return Effect(np.eye(dim, dtype=complex), EffectKind.projector)
    columns = haar_unitary(dim, seed)[:, :rank]
    return Effect(columns @ columns.conj().T, EffectKind.projector)


@dataclass(frozen=True)
class Measurement:
    effects: Tuple[Effect, ...]

    @classmethod
    def from_matrices(
        cls,
        matrices: Sequence[np.ndarray],
        kind: EffectKind = EffectKind.general_positive,
    ) -> "Measurement":
        return cls(tuple(Effect(np.asarray(m, dtype=complex), kind) for m in matrices))

    @classmethod
    def completed(
        cls,
        matrices: Sequence[np.ndarray],
        kind: EffectKind = EffectKind.general_positive,
    ) -> "Measurement":
        """Builds a measurement from all but the last effect."""
        matrices = [np.asarray(m, dtype=complex) for m in matrices]
        last = np.eye(matrices[0].shape[0], dtype=complex) - sum(matrices)
        return cls.from_matrices(matrices + [last], kind)

    @property
    def outcomes(self) -> int:
        return len(self.effects)

    @property
    def dim(self) -> int:
        return self.effects[0].dim

    @property
    def matrices(self) -> List[np.ndarray]:
        return [e.matrix for e in self.effects]

    def completeness_error(self) -> float:
        total = sum(self.matrices)
        return float(np.linalg.norm(total - np.eye(self.dim)))

    def validate(self, tol: Optional[float] = None):
        if len({e.dim for e in self.effects}) != 1:
            raise InvalidStrategy("Effects of one measurement differ in dimension")
        for effect in self.effects:
            effect.validate(tol)
        limit = TOLERANCES.completeness if tol is None else tol
        error = self.completeness_error()
        if error > limit:
            raise InvalidStrategy(f"Effects do not sum to identity (error {error:.2e})")


def inverse_sqrt(m: np.ndarray) -> np.ndarray:
    values, vectors = linalg.eigh(hermitian_part(m))
    values = np.clip(values, TOLERANCES.psd, None)
    return (vectors / np.sqrt(values)) @ vectors.conj().T


def clip_psd(m: np.ndarray) -> np.ndarray:
    values, vectors = linalg.eigh(hermitian_part(m))
    return (vectors * np.clip(values, 0, None)) @ vectors.conj().T


def random_povm(dim: int, outcomes: int, seed: RngLike = None) -> Measurement:
    if outcomes < 2:
        raise InvalidStrategy(f"A measurement needs at least 2 outcomes, got {outcomes}")
    rng = as_rng(seed)
    raw = []
    for _ in range(outcomes):
        g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        raw.append(g @ g.conj().T)
    s = inverse_sqrt(sum(raw))
    return Measurement.from_matrices([hermitian_part(s @ e @ s) for e in raw])


def nearest_measurement(
    matrices: Sequence[np.ndarray],
    kind: EffectKind = EffectKind.general_positive,
) -> Measurement:
    """Hermitian part, clipped to PSD and renormalized to sum to identity."""
    clipped = [clip_psd(m) for m in matrices]
    s = inverse_sqrt(sum(clipped))
    return Measurement.from_matrices([hermitian_part(s @ e @ s) for e in clipped], kind)


def round_to_projective(measurement: Measurement) -> Measurement:
    """Eigenvalue rounding of every effect onto mutually orthogonal projectors."""
    dim = measurement.dim
    remaining = np.eye(dim, dtype=complex)
    projectors = []
    for effect in measurement.matrices[:-1]:
        values, vectors = linalg.eigh(hermitian_part(remaining @ effect @ remaining))
        kept = vectors[:, values > 0.5]
        p = kept @ kept.conj().T
        projectors.append(p)
        remaining = remaining - p
    projectors.append(remaining)
    return Measurement.from_matrices(projectors, EffectKind.projector)


def top_eigenpair(m: np.ndarray) -> Tuple[float, np.ndarray]:
    """Largest eigenvalue and a unit eigenvector, from the full decomposition."""
    if not np.all(np.isfinite(m)):
        raise InvalidStrategy("Operator has non-finite entries")
    values, vectors = linalg.eigh(hermitian_part(m))
    vector = vectors[:, -1]
    return float(values[-1]), vector / np.linalg.norm(vector)


def partial_trace(rho: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Traces out every subsystem not listed in ``keep``."""
    dims = list(dims)
    n = len(dims)
    keep = sorted(keep)
    reshaped = rho.reshape(dims + dims)
    traced = [i for i in range(n) if i not in keep]
    letters = "abcdefghijklmnopqrstuvwxyz"
    rows = [letters[i] for i in range(n)]
    cols = [letters[i + n] if i in keep else letters[i] for i in range(n)]
    out = [rows[i] for i in keep] + [cols[i] for i in keep]
    result = np.einsum(f"{''.join(rows)}{''.join(cols)}->{''.join(out)}", reshaped)
    kept_dim = int(np.prod([dims[i] for i in keep])) if keep else 1
    if not traced:
        return rho
    return result.reshape(kept_dim, kept_dim)
