"""Simulating generalized measurements with projective measurements,
classical randomness/post-processing, and postselection.

The central construction: any POVM M on dimension d, refined to rank-one
effects a_k|e_k><e_k|, is realized by drawing a binary measurement
(|e_k><e_k|, 1-|e_k><e_k|) with probability a_k/d, relabelling "+" to the
parent outcome of k and "-" to a failure outcome.  Conditioned on not
failing, this samples exactly from M; the success probability is 1/d.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .core import (
    InvariantViolation,
    Povm,
    ProjectiveMeasurement,
    QuantumState,
    _freeze,
    _rng,
    born_probabilities,
    default_atol,
    povm_from_document,
    povm_to_document,
)

ORTHOGONALITY_ATOL = 1e-9
FAIL_LABEL = "fail"


class PostProcessingMap:
    """Conditional probabilities q(j|k) mapping measurement outcomes k to
    relabelled outcomes j.  Stored as a (n_out, n_in) matrix whose columns
    are probability vectors."""

    def __init__(self, matrix):
        q = np.asarray(matrix, dtype=float)
        if q.ndim != 2:
            raise ValueError("post-processing map must be a 2-d matrix")
        if np.min(q) < -1e-12:
            raise InvariantViolation("stochasticity", -float(np.min(q)),
                                     "post-processing probabilities must be non-negative")
        col_sums = q.sum(axis=0)
        defect = float(np.max(np.abs(col_sums - 1.0)))
        if defect > default_atol(q.shape[1]):
            raise InvariantViolation("stochasticity", defect,
                                     f"columns must sum to 1 (defect {defect:.3e})")
        self.matrix = _freeze(np.clip(q, 0.0, None))

    @property
    def n_in(self) -> int:
        return self.matrix.shape[1]

    @property
    def n_out(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def identity(cls, n: int) -> "PostProcessingMap":
        return cls(np.eye(n))

    @classmethod
    def deterministic(cls, assignment, n_out: int | None = None) -> "PostProcessingMap":
        """Map outcome k to outcome assignment[k] with probability one."""
        assignment = [int(a) for a in assignment]
        if n_out is None:
            n_out = max(assignment) + 1
        q = np.zeros((n_out, len(assignment)))
        for k, j in enumerate(assignment):
            q[j, k] = 1.0
        return cls(q)

    @classmethod
    def glue(cls, n_in: int, merged: tuple[int, ...]) -> "PostProcessingMap":
        """Merge the listed outcomes into a single one, keeping the others.

        The merged group takes the slot of its smallest member; remaining
        outcomes keep their relative order.
        """
        merged_set = sorted(set(int(m) for m in merged))
        target = {}
        out = 0
        for k in range(n_in):
            if k in merged_set and k != merged_set[0]:
                continue
            target[k] = out
            out += 1
        assignment = [target[merged_set[0]] if k in merged_set else target[k]
                      for k in range(n_in)]
        return cls.deterministic(assignment, n_out=out)

    def __repr__(self) -> str:
        return f"PostProcessingMap({self.n_in} -> {self.n_out})"


def apply_postprocessing(povm: Povm, pmap: PostProcessingMap) -> Povm:
    """N_j = sum_k q(j|k) M_k."""
    if pmap.n_in != povm.n_outcomes:
        raise ValueError(f"map expects {pmap.n_in} outcomes, POVM has {povm.n_outcomes}")
    stacked = np.stack(povm.effects)
    out = np.einsum("jk,kab->jab", pmap.matrix, stacked)
    return Povm(list(out), atol=povm.atol)


def convex_combination(terms) -> Povm:
    """Effect-wise weighted sum of POVMs with matching shapes."""
    terms = [(float(w), p) for w, p in terms]
    if not terms:
        raise ValueError("need at least one term")
    weights = np.array([w for w, _ in terms])
    if np.min(weights) < 0:
        raise ValueError("weights must be non-negative")
    n = terms[0][1].n_outcomes
    dim = terms[0][1].dim
    if any(p.n_outcomes != n or p.dim != dim for _, p in terms):
        raise ValueError("all POVMs must share outcome count and dimension")
    defect = abs(weights.sum() - 1.0)
    if defect > default_atol(n):
        raise InvariantViolation("weight normalization", defect)
    atol = max(p.atol for _, p in terms)
    effects = [sum(w * p.effects[i] for w, p in terms) for i in range(n)]
    return Povm(effects, atol=atol)


def build_mq(povm: Povm, q: float) -> Povm:
    """The (n+1)-outcome POVM (q M_1, ..., q M_n, (1-q) 1)."""
    if not 0 < q <= 1:
        raise ValueError(f"q must be in (0, 1], got {q}")
    effects = [q * m for m in povm.effects]
    effects.append((1 - q) * np.eye(povm.dim))
    return Povm(effects, labels=list(povm.labels) + [FAIL_LABEL], atol=povm.atol)


def rank_one_refinement(povm: Povm) -> tuple[Povm, PostProcessingMap]:
    """Split every effect into rank-one pieces plus the merge map undoing it.

    Effects are eigendecomposed; eigenvalues below the POVM tolerance are
    dropped.  Pieces are ordered by (parent outcome, descending eigenvalue).
    The tiny completeness defect introduced by dropping is redistributed
    symmetrically (B^{-1/2} . B^{-1/2}), which preserves rank-one-ness;
    a defect beyond the tolerance is an error.
    """
    pieces = []
    parents = []
    for i, m in enumerate(povm.effects):
        w, v = np.linalg.eigh(m)
        for k in range(w.size - 1, -1, -1):
            if w[k] > povm.atol:
                pieces.append(w[k] * np.outer(v[:, k], v[:, k].conj()))
                parents.append(i)
    if not pieces:
        raise InvariantViolation("positivity", 0.0, "POVM has no non-null effects")
    total = sum(pieces)
    defect = float(np.max(np.abs(total - np.eye(povm.dim))))
    if defect > max(povm.atol, default_atol(povm.dim)):
        raise InvariantViolation("completeness", defect,
                                 f"refinement leaves completeness defect {defect:.3e}")
    if defect > 1e-14:
        w, v = np.linalg.eigh(total)
        inv_sqrt = (v * w ** -0.5) @ v.conj().T
        pieces = [inv_sqrt @ p @ inv_sqrt for p in pieces]
    refined = Povm(pieces, atol=povm.atol)
    merge = PostProcessingMap.deterministic(parents, n_out=povm.n_outcomes)
    return refined, merge


class ProjectiveSimulation:
    """A convex mixture of projective measurements plus a post-processing
    map, declared to reproduce a target POVM."""

    def __init__(self, components, postprocessing: PostProcessingMap, target: Povm):
        self.components = tuple((float(w), pm) for w, pm in components)
        weights = np.array([w for w, _ in self.components])
        defect = abs(weights.sum() - 1.0)
        if defect > default_atol(len(self.components)):
            raise InvariantViolation("weight normalization", defect)
        if any(not isinstance(pm, ProjectiveMeasurement) for _, pm in self.components):
            raise ValueError("components must be projective measurements")
        self.postprocessing = postprocessing
        self.target = target
        simulated = self.simulated_povm()
        if not simulated.allclose(target, atol=max(target.atol, simulated.atol)):
            dev = max(np.max(np.abs(a - b))
                      for a, b in zip(simulated.effects, target.effects))
            raise InvariantViolation("simulation fidelity", dev,
                                     "mixture + post-processing does not reproduce the target")

    def mixture(self) -> Povm:
        return convex_combination(self.components)

    def simulated_povm(self) -> Povm:
        return apply_postprocessing(self.mixture(), self.postprocessing)


class PostselectionScheme:
    """The protocol realizing a POVM with binary projective measurements
    and postselection at success probability 1/d.

    ``states[k]`` is the projector direction of component k, drawn with
    probability ``weights[k]``; outcome "+" is relabelled to
    ``parents[k]`` and "-" to the failure outcome (index n).
    """

    def __init__(self, target: Povm, states, weights, parents):
        self.target = target
        self.states = _freeze(np.asarray(states, dtype=complex))
        self.weights = _freeze(np.asarray(weights, dtype=float))
        self.parents = _freeze(np.asarray(parents, dtype=int))
        if not (len(self.states) == len(self.weights) == len(self.parents)):
            raise ValueError("states, weights and parents must have equal length")
        defect = abs(self.weights.sum() - 1.0)
        if defect > default_atol(len(self.weights)):
            raise InvariantViolation("weight normalization", defect)
        self.success_probability = 1.0 / target.dim
        simulated = self.simulated_povm()
        expected = build_mq(target, self.success_probability)
        if not simulated.allclose(expected):
            dev = max(np.max(np.abs(a - b))
                      for a, b in zip(simulated.effects, expected.effects))
            raise InvariantViolation("postselection construction", dev)

    @property
    def n_components(self) -> int:
        return len(self.weights)

    @property
    def fail_index(self) -> int:
        return self.target.n_outcomes

    def component(self, k: int) -> ProjectiveMeasurement:
        return ProjectiveMeasurement.binary(self.states[k])

    def as_projective_simulation(self) -> ProjectiveSimulation:
        """Single-map view: each component embedded as an (m+1)-outcome PM
        with its projector in slot k, so one merge map covers the mixture."""
        d = self.target.dim
        m = self.n_components
        components = []
        for k in range(m):
            proj = np.outer(self.states[k], self.states[k].conj())
            effects = [np.zeros((d, d), dtype=complex) for _ in range(m + 1)]
            effects[k] = proj
            effects[m] = np.eye(d) - proj
            components.append((self.weights[k], ProjectiveMeasurement(effects)))
        assignment = list(self.parents) + [self.fail_index]
        merge = PostProcessingMap.deterministic(assignment, n_out=self.fail_index + 1)
        return ProjectiveSimulation(components, merge,
                                    build_mq(self.target, self.success_probability))

    def simulated_povm(self) -> Povm:
        """Assemble the mixture and relabelling into the realized POVM."""
        d = self.target.dim
        n = self.target.n_outcomes
        effects = [np.zeros((d, d), dtype=complex) for _ in range(n + 1)]
        for k in range(self.n_components):
            proj = np.outer(self.states[k], self.states[k].conj())
            effects[self.parents[k]] = effects[self.parents[k]] + self.weights[k] * proj
            effects[n] = effects[n] + self.weights[k] * (np.eye(d) - proj)
        return Povm(effects, labels=list(self.target.labels) + [FAIL_LABEL],
                    atol=self.target.atol)

    def to_document(self) -> dict:
        return {
            "success_probability": self.success_probability,
            "weights": [float(w) for w in self.weights],
            "parents": [int(p) for p in self.parents],
            "states": [[[float(z.real), float(z.imag)] for z in s] for s in self.states],
            "target": povm_to_document(self.target),
        }

    @classmethod
    def from_document(cls, doc: dict) -> "PostselectionScheme":
        target = povm_from_document(doc["target"])
        states = np.array([[complex(re, im) for re, im in s] for s in doc["states"]])
        return cls(target, states, doc["weights"], doc["parents"])

    def to_json(self) -> str:
        return json.dumps(self.to_document(), indent=2)

    def __repr__(self) -> str:
        return (f"PostselectionScheme(outcomes={self.target.n_outcomes}, "
                f"components={self.n_components}, q={self.success_probability:g})")


def postselection_scheme(povm: Povm) -> PostselectionScheme:
    """Build the 1/d-success postselection protocol for an arbitrary POVM."""
    refined, merge = rank_one_refinement(povm)
    d = povm.dim
    states = []
    weights = []
    parents = []
    for k, m in enumerate(refined.effects):
        w, v = np.linalg.eigh(m)
        a = float(w[-1])
        states.append(v[:, -1])
        weights.append(a / d)
        parents.append(int(np.argmax(merge.matrix[:, k])))
    return PostselectionScheme(povm, np.array(states), weights, parents)


@dataclass(frozen=True)
class ShotRecord:
    """Raw outcome stream of a sampler run.

    ``outcomes[s]`` is the target-outcome index of shot s, or ``fail_index``
    for a postselected-away shot.
    """

    shots: int
    outcomes: np.ndarray
    seed: int | None
    fail_index: int
    n_outcomes: int

    def counts(self) -> np.ndarray:
        """Counts over outcomes 0..n_outcomes-1 followed by the fail count."""
        return np.bincount(self.outcomes, minlength=self.n_outcomes + 1)

    @property
    def success_count(self) -> int:
        return int(np.sum(self.outcomes != self.fail_index))

    @property
    def success_rate(self) -> float:
        return self.success_count / self.shots

    def conditional_frequencies(self) -> np.ndarray:
        """Frequencies over target outcomes, conditioned on non-failure."""
        c = self.counts()[: self.n_outcomes]
        total = c.sum()
        if total == 0:
            raise ValueError("no successful shots to condition on")
        return c / total

    def merged_with(self, other: "ShotRecord") -> "ShotRecord":
        if (self.fail_index, self.n_outcomes) != (other.fail_index, other.n_outcomes):
            raise ValueError("incompatible shot records")
        return ShotRecord(self.shots + other.shots,
                          np.concatenate([self.outcomes, other.outcomes]),
                          None, self.fail_index, self.n_outcomes)

    def to_csv(self) -> str:
        """Raw outcome stream, one row per shot."""
        lines = ["shot,outcome"]
        lines += [f"{s},{o}" for s, o in enumerate(self.outcomes)]
        return "\n".join(lines) + "\n"


def sample_postselection(scheme: PostselectionScheme, state: QuantumState,
                         shots: int, seed, method: str = "two_stage") -> ShotRecord:
    """Sample the postselection protocol on a state.

    ``two_stage`` draws a component and then its binary outcome, mirroring
    the operational protocol; ``composite`` samples the (n+1)-outcome
    distribution of the realized POVM directly (fast path, identical law).
    """
    if state.dim != scheme.target.dim:
        raise ValueError("state dimension does not match the scheme")
    if shots < 1:
        raise ValueError("shots must be at least 1")
    rng = _rng(seed)
    n = scheme.target.n_outcomes
    if method == "composite":
        probs = born_probabilities(state, scheme.simulated_povm())
        outcomes = rng.choice(n + 1, size=shots, p=probs)
    elif method == "two_stage":
        comp = rng.choice(scheme.n_components, size=shots, p=scheme.weights)
        # success probability of component k on this state: <e_k|rho|e_k>
        succ = np.einsum("ki,ij,kj->k", scheme.states.conj(), state.rho,
                         scheme.states).real
        succ = np.clip(succ, 0.0, 1.0)
        plus = rng.random(shots) < succ[comp]
        outcomes = np.where(plus, np.asarray(scheme.parents)[comp], n)
    else:
        raise ValueError(f"unknown sampling method {method!r}")
    return ShotRecord(shots, outcomes.astype(np.int64),
                      seed if isinstance(seed, int) else None, n, n)


def clock_and_shift(d: int) -> tuple[np.ndarray, np.ndarray]:
    """Generalized X (cyclic shift) and Z (phase clock) on dimension d."""
    shift = np.zeros((d, d), dtype=complex)
    for k in range(d):
        shift[(k + 1) % d, k] = 1.0
    omega = np.exp(2j * np.pi / d)
    clock = np.diag(omega ** np.arange(d))
    return shift, clock


def hw_covariant_povm(d: int, fiducial: QuantumState) -> tuple[Povm, bool]:
    """The d^2-outcome rank-one POVM covariant under clock-and-shift orbits.

    Effects are (1/d)|psi_ab><psi_ab| with |psi_ab> = X^a Z^b |fiducial>;
    group averaging makes the collection complete for any fiducial.  Returns
    the POVM and a flag telling whether all effect pairs are non-commuting
    (true for a generic fiducial, the regime where the 1/d bound is tight).
    """
    if not fiducial.is_pure:
        raise ValueError("fiducial state must be pure")
    if fiducial.dim != d:
        raise ValueError(f"fiducial dimension {fiducial.dim} does not match d={d}")
    shift, clock = clock_and_shift(d)
    vectors = []
    for a in range(d):
        for b in range(d):
            vectors.append(np.linalg.matrix_power(shift, a)
                           @ np.linalg.matrix_power(clock, b) @ fiducial.vector)
    effects = [np.outer(v, v.conj()) / d for v in vectors]
    povm = Povm(effects)
    noncommuting = True
    for i in range(len(effects)):
        for j in range(i + 1, len(effects)):
            comm = effects[i] @ effects[j] - effects[j] @ effects[i]
            if np.max(np.abs(comm)) <= default_atol(d):
                noncommuting = False
                break
        if not noncommuting:
            break
    return povm, noncommuting


def max_success_bound_rank_one(povm: Povm) -> float:
    """Upper bound 1/d on the postselection success probability.

    Valid for rank-one POVMs with pairwise non-orthogonal states: any
    projective-simulable realization of M_q then decomposes over only n+1
    distinct projective measurements, forcing q <= 1/d.
    """
    directions = []
    for i, m in enumerate(povm.effects):
        w, v = np.linalg.eigh(m)
        if np.any(w[:-1] > povm.atol):
            raise ValueError(f"effect {i} is not rank-one; the bound does not apply")
        directions.append(v[:, -1])
    for i in range(len(directions)):
        for j in range(i + 1, len(directions)):
            if abs(np.vdot(directions[i], directions[j])) <= ORTHOGONALITY_ATOL:
                raise ValueError(
                    f"effects {i} and {j} have orthogonal states; the bound does not apply")
    return 1.0 / povm.dim
