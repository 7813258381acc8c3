"""Quantum states, effects and measurements as validated numpy objects.

Everything downstream (simulation schemes, dilations, discrimination,
tomography) is built on the types and primitives defined here.  All objects
are immutable after construction: the wrapped numpy arrays are marked
read-only, so concurrent reads are safe.
"""

from __future__ import annotations

import json
from typing import Iterable, Iterator, Sequence

import numpy as np

# Hermiticity / positivity / idempotence / completeness checks use an
# absolute tolerance proportional to the dimension; double-precision
# eigensolves at d <= 64 stay well inside this.
TOLERANCE_SCALE = 1e-9
NORM_ATOL = 1e-12
IO_ATOL = 1e-12

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def default_atol(dim: int) -> float:
    return TOLERANCE_SCALE * dim


class InvariantViolation(ValueError):
    """A quantum object failed one of its defining invariants.

    Carries the name of the violated invariant and the size of the
    violation so that loaders and tests can report both.
    """

    def __init__(self, invariant: str, deviation: float, message: str | None = None):
        self.invariant = invariant
        self.deviation = float(deviation)
        if message is None:
            message = f"violated by {deviation:.3e}"
        super().__init__(f"invariant '{invariant}': {message}")


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


def _rng(seed) -> np.random.Generator:
    """Accept an int seed or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def as_operator(matrix, name: str = "matrix") -> np.ndarray:
    """Coerce to a square complex matrix with finite entries."""
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ValueError(f"{name} must be a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvariantViolation("finite entries", np.inf, f"{name} has non-finite entries")
    return m


def hermiticity_defect(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - m.conj().T)))


def require_hermitian(m: np.ndarray, atol: float, name: str = "matrix") -> np.ndarray:
    defect = hermiticity_defect(m)
    if defect > atol:
        raise InvariantViolation("hermiticity", defect, f"{name} is not Hermitian (defect {defect:.3e})")
    return (m + m.conj().T) / 2


def operator_norm(matrix) -> float:
    """Largest absolute eigenvalue for Hermitian input, else largest singular value."""
    m = as_operator(matrix)
    if hermiticity_defect(m) <= default_atol(m.shape[0]):
        return float(np.max(np.abs(np.linalg.eigvalsh((m + m.conj().T) / 2))))
    return float(np.linalg.norm(m, ord=2))


def min_eigenvalue(matrix, atol: float | None = None) -> float:
    """Smallest eigenvalue of a Hermitian matrix."""
    m = as_operator(matrix)
    if atol is None:
        atol = default_atol(m.shape[0])
    m = require_hermitian(m, atol)
    return float(np.linalg.eigvalsh(m)[0])


def validate_effect(matrix: np.ndarray, atol: float, name: str = "effect") -> np.ndarray:
    """Check Hermiticity and spectrum in [-atol, 1 + atol]; return symmetrized copy."""
    m = require_hermitian(as_operator(matrix, name), atol, name)
    evs = np.linalg.eigvalsh(m)
    if evs[0] < -atol:
        raise InvariantViolation("positivity", -evs[0], f"{name} has eigenvalue {evs[0]:.3e} < 0")
    if evs[-1] > 1 + atol:
        raise InvariantViolation("effect bound", evs[-1] - 1, f"{name} has eigenvalue {evs[-1]:.6f} > 1")
    return m


class QuantumState:
    """A quantum state, stored as a density operator with an optional pure vector.

    Use :meth:`pure` / :meth:`density` to construct.  ``rho`` is always
    available; ``vector`` is ``None`` for genuinely mixed states.
    """

    def __init__(self, matrix=None, vector=None, atol: float | None = None):
        if (matrix is None) == (vector is None):
            raise ValueError("provide exactly one of matrix or vector")
        if vector is not None:
            v = np.asarray(vector, dtype=complex).reshape(-1)
            if v.size < 1 or not np.all(np.isfinite(v)):
                raise ValueError("state vector must be a finite complex vector")
            norm = float(np.linalg.norm(v))
            if abs(norm - 1.0) > NORM_ATOL:
                raise InvariantViolation("unit norm", abs(norm - 1.0))
            self._vector = _freeze(v)
            self._rho = _freeze(np.outer(v, v.conj()))
        else:
            m = as_operator(matrix, "density matrix")
            dim = m.shape[0]
            if atol is None:
                atol = default_atol(dim)
            m = require_hermitian(m, atol, "density matrix")
            tr = float(np.trace(m).real)
            if abs(tr - 1.0) > atol:
                raise InvariantViolation("unit trace", abs(tr - 1.0))
            evs = np.linalg.eigvalsh(m)
            if evs[0] < -atol:
                raise InvariantViolation("positivity", -evs[0])
            self._vector = None
            self._rho = _freeze(m)

    @classmethod
    def pure(cls, vector) -> "QuantumState":
        return cls(vector=vector)

    @classmethod
    def density(cls, matrix, atol: float | None = None) -> "QuantumState":
        return cls(matrix=matrix, atol=atol)

    @classmethod
    def basis_state(cls, dim: int, index: int) -> "QuantumState":
        v = np.zeros(dim, dtype=complex)
        v[index] = 1.0
        return cls(vector=v)

    @classmethod
    def maximally_mixed(cls, dim: int) -> "QuantumState":
        return cls(matrix=np.eye(dim, dtype=complex) / dim)

    @property
    def dim(self) -> int:
        return self._rho.shape[0]

    @property
    def rho(self) -> np.ndarray:
        return self._rho

    @property
    def vector(self) -> np.ndarray | None:
        return self._vector

    @property
    def is_pure(self) -> bool:
        return self._vector is not None

    def __repr__(self) -> str:
        kind = "pure" if self.is_pure else "density"
        return f"QuantumState(dim={self.dim}, {kind})"


class Povm:
    """An ordered list of effects summing to the identity.

    Each effect is validated (Hermitian, spectrum in [0, 1]) and the
    completeness defect is checked against ``atol``.
    """

    def __init__(self, effects: Iterable, labels: Sequence[str] | None = None,
                 atol: float | None = None):
        mats = [as_operator(e, f"effect {i}") for i, e in enumerate(effects)]
        if not mats:
            raise ValueError("a POVM needs at least one effect")
        dim = mats[0].shape[0]
        if any(m.shape[0] != dim for m in mats):
            raise ValueError("all effects must share one dimension")
        if atol is None:
            atol = default_atol(dim)
        self._atol = float(atol)
        mats = [validate_effect(m, self._atol, f"effect {i}") for i, m in enumerate(mats)]
        total = sum(mats)
        defect = float(np.max(np.abs(total - np.eye(dim))))
        if defect > self._atol:
            raise InvariantViolation("completeness", defect,
                                     f"effects sum to identity only within {defect:.3e}")
        if labels is None:
            labels = tuple(str(i + 1) for i in range(len(mats)))
        else:
            labels = tuple(str(l) for l in labels)
            if len(labels) != len(mats):
                raise ValueError("labels must match the number of effects")
        self._effects = tuple(_freeze(m) for m in mats)
        self._labels = labels

    @property
    def dim(self) -> int:
        return self._effects[0].shape[0]

    @property
    def n_outcomes(self) -> int:
        return len(self._effects)

    @property
    def effects(self) -> tuple[np.ndarray, ...]:
        return self._effects

    @property
    def labels(self) -> tuple[str, ...]:
        return self._labels

    @property
    def atol(self) -> float:
        return self._atol

    @property
    def completeness_defect(self) -> float:
        return float(np.max(np.abs(sum(self._effects) - np.eye(self.dim))))

    def __len__(self) -> int:
        return len(self._effects)

    def __iter__(self) -> Iterator[np.ndarray]:
        return iter(self._effects)

    def __getitem__(self, i: int) -> np.ndarray:
        return self._effects[i]

    def allclose(self, other: "Povm", atol: float | None = None) -> bool:
        if atol is None:
            atol = max(self.atol, other.atol)
        if self.dim != other.dim or self.n_outcomes != other.n_outcomes:
            return False
        return all(np.allclose(a, b, atol=atol, rtol=0.0)
                   for a, b in zip(self._effects, other._effects))

    def __repr__(self) -> str:
        return f"{type(self).__name__}(dim={self.dim}, outcomes={self.n_outcomes})"


class ProjectiveMeasurement(Povm):
    """A POVM whose effects are mutually orthogonal projectors.

    Null effects are allowed; idempotence and pairwise orthogonality are
    enforced within the POVM tolerance.
    """

    def __init__(self, effects: Iterable, labels: Sequence[str] | None = None,
                 atol: float | None = None):
        super().__init__(effects, labels=labels, atol=atol)
        for i, p in enumerate(self.effects):
            defect = float(np.max(np.abs(p @ p - p)))
            if defect > self.atol:
                raise InvariantViolation("idempotence", defect,
                                         f"effect {i} is not a projector (P^2 != P by {defect:.3e})")
        for i in range(self.n_outcomes):
            for j in range(i + 1, self.n_outcomes):
                defect = float(np.max(np.abs(self.effects[i] @ self.effects[j])))
                if defect > self.atol:
                    raise InvariantViolation("orthogonality", defect,
                                             f"effects {i},{j} are not orthogonal")

    @classmethod
    def binary(cls, projector_direction) -> "ProjectiveMeasurement":
        """The two-outcome measurement (|psi><psi|, 1 - |psi><psi|)."""
        v = np.asarray(projector_direction, dtype=complex).reshape(-1)
        v = v / np.linalg.norm(v)
        p = np.outer(v, v.conj())
        return cls([p, np.eye(v.size) - p], labels=("+", "-"))

    @classmethod
    def computational_basis(cls, dim: int) -> "ProjectiveMeasurement":
        effects = []
        for k in range(dim):
            p = np.zeros((dim, dim), dtype=complex)
            p[k, k] = 1.0
            effects.append(p)
        return cls(effects)


class BlochVector:
    """A qubit effect in the form (alpha/2)(1 + n.sigma)."""

    def __init__(self, alpha: float, n: Sequence[float]):
        self.alpha = float(alpha)
        self.n = _freeze(np.asarray(n, dtype=float).reshape(3))
        if not (0 < self.alpha <= 1 + TOLERANCE_SCALE):
            raise InvariantViolation("effect weight", abs(self.alpha),
                                     f"alpha must be in (0, 1], got {self.alpha}")

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.n))

    @property
    def physical(self) -> bool:
        """True when the reconstructed matrix is a valid effect (|n| <= 1)."""
        return self.length <= 1 + 1e-9

    def to_matrix(self) -> np.ndarray:
        nx, ny, nz = self.n
        return (self.alpha / 2) * (np.eye(2) + nx * PAULI_X + ny * PAULI_Y + nz * PAULI_Z)

    @classmethod
    def from_matrix(cls, matrix) -> "BlochVector":
        m = require_hermitian(as_operator(matrix, "qubit effect"), default_atol(2))
        if m.shape[0] != 2:
            raise ValueError("Bloch parametrization needs a 2x2 matrix")
        alpha = float(np.trace(m).real)
        if alpha <= 0:
            raise InvariantViolation("effect weight", abs(alpha), "effect has non-positive trace")
        n = np.array([np.trace(m @ PAULI_X).real,
                      np.trace(m @ PAULI_Y).real,
                      np.trace(m @ PAULI_Z).real]) / alpha
        return cls(alpha, n)

    def __repr__(self) -> str:
        return f"BlochVector(alpha={self.alpha:.6f}, n={tuple(np.round(self.n, 6))})"


def born_probabilities(state: QuantumState, povm: Povm) -> np.ndarray:
    """Outcome distribution tr(M_i rho) with round-off clamping.

    Negative entries of magnitude up to the POVM tolerance are clamped to
    zero and the vector renormalized; anything more negative is an error.
    """
    if state.dim != povm.dim:
        raise ValueError(f"dimension mismatch: state {state.dim}, POVM {povm.dim}")
    if state.is_pure:
        v = state.vector
        p = np.array([np.vdot(v, m @ v).real for m in povm.effects])
    else:
        p = np.array([np.trace(m @ state.rho).real for m in povm.effects])
    if np.min(p) < -povm.atol:
        raise InvariantViolation("probability positivity", -float(np.min(p)))
    p = np.clip(p, 0.0, None)
    total = p.sum()
    if abs(total - 1.0) > povm.atol:
        raise InvariantViolation("probability normalization", abs(total - 1.0))
    return p / total


def haar_random_unitary(dim: int, seed) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Gaussian matrix."""
    rng = _rng(seed)
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    # fix the phase ambiguity of QR so the distribution is exactly Haar
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def haar_random_pure_state(dim: int, seed) -> QuantumState:
    """Unit vector distributed as the first column of a Haar unitary."""
    if dim < 1:
        raise ValueError("dimension must be at least 1")
    rng = _rng(seed)
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return QuantumState.pure(v / np.linalg.norm(v))


def random_rank_one_povm(dim: int, n_outcomes: int, seed) -> Povm:
    """Random rank-one POVM from truncated columns of a Haar unitary.

    The first ``dim`` entries of each column of an n x n Haar unitary give
    sub-normalized vectors whose projectors sum to the identity.
    """
    if n_outcomes < dim:
        raise ValueError("need at least dim outcomes for a rank-one POVM")
    u = haar_random_unitary(n_outcomes, seed)
    rows = u[:dim, :]
    effects = [np.outer(rows[:, i], rows[:, i].conj()) for i in range(n_outcomes)]
    return Povm(effects)


def random_povm(dim: int, n_outcomes: int, seed, rank: int = 1) -> Povm:
    """Random POVM with effects of rank up to ``rank`` (rank-one pieces glued)."""
    if rank < 1:
        raise ValueError("rank must be positive")
    fine = random_rank_one_povm(dim, n_outcomes * rank, seed)
    effects = [sum(fine.effects[i * rank:(i + 1) * rank]) for i in range(n_outcomes)]
    return Povm(effects)


def pauli_eigenstates() -> tuple[QuantumState, ...]:
    """The six eigenstates of X, Y, Z: a standard probe set for qubit checks."""
    s = 1 / np.sqrt(2)
    vectors = [(1, 0), (0, 1), (s, s), (s, -s), (s, 1j * s), (s, -1j * s)]
    return tuple(QuantumState.pure(np.array(v, dtype=complex)) for v in vectors)


# ---------------------------------------------------------------------------
# JSON measurement-exchange format.  Complex numbers are two-element
# [re, im] arrays; matrices are row-major nested lists.

def _encode_complex(z: complex) -> list[float]:
    return [float(np.real(z)), float(np.imag(z))]


def _decode_complex(pair) -> complex:
    if not isinstance(pair, (list, tuple)) or len(pair) != 2:
        raise ValueError(f"expected [re, im] pair, got {pair!r}")
    return complex(float(pair[0]), float(pair[1]))


def matrix_to_lists(m: np.ndarray) -> list:
    return [[_encode_complex(z) for z in row] for row in np.asarray(m, dtype=complex)]


def matrix_from_lists(rows) -> np.ndarray:
    return np.array([[_decode_complex(z) for z in row] for row in rows], dtype=complex)


def povm_to_document(povm: Povm) -> dict:
    return {
        "dim": povm.dim,
        "effects": [matrix_to_lists(m) for m in povm.effects],
        "labels": list(povm.labels),
    }


def povm_from_document(doc: dict, atol: float | None = None) -> Povm:
    effects = [matrix_from_lists(e) for e in doc["effects"]]
    if any(m.shape[0] != doc["dim"] for m in effects):
        raise ValueError("effect dimension does not match declared dim")
    return Povm(effects, labels=doc.get("labels"), atol=atol)


def state_to_document(state: QuantumState) -> dict:
    if state.is_pure:
        return {"dim": state.dim, "vector": [_encode_complex(z) for z in state.vector]}
    return {"dim": state.dim, "matrix": matrix_to_lists(state.rho)}


def state_from_document(doc: dict) -> QuantumState:
    if "vector" in doc:
        v = np.array([_decode_complex(z) for z in doc["vector"]], dtype=complex)
        if v.size != doc["dim"]:
            raise ValueError("vector length does not match declared dim")
        return QuantumState.pure(v)
    return QuantumState.density(matrix_from_lists(doc["matrix"]))


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2)


def loads(text: str) -> dict:
    return json.loads(text)
