"""Unambiguous state discrimination: success functionals, the
equal-probability measurement built from dual vectors, the exact optimum
over projective-simulable strategies, and the bound experiments comparing
the two families on symmetric and Haar-random ensembles.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .core import (
    InvariantViolation,
    Povm,
    QuantumState,
    _freeze,
    default_atol,
    haar_random_pure_state,
    min_eigenvalue,
    state_from_document,
    state_to_document,
)
from .simulation import ORTHOGONALITY_ATOL

UNAMBIGUITY_ATOL = 1e-9
#: relative threshold on singular values for declaring linear independence
LINEAR_INDEPENDENCE_RTOL = 1e-10


class Ensemble:
    """A weighted collection of pure states {p_i, |psi_i>}."""

    def __init__(self, states, probs=None):
        mat = np.asarray(states, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] < 1:
            raise ValueError("states must be a (n_states, dim) array")
        norms = np.linalg.norm(mat, axis=1)
        if np.max(np.abs(norms - 1.0)) > 1e-9:
            raise InvariantViolation("unit norm", float(np.max(np.abs(norms - 1.0))),
                                     "ensemble states must be normalized")
        n = mat.shape[0]
        if probs is None:
            probs = np.full(n, 1.0 / n)
        probs = np.asarray(probs, dtype=float)
        if probs.shape != (n,) or np.min(probs) < 0:
            raise ValueError("probs must be a non-negative vector matching the states")
        defect = abs(probs.sum() - 1.0)
        if defect > default_atol(n):
            raise InvariantViolation("probability normalization", defect)
        self.states = _freeze(mat)
        self.probs = _freeze(probs / probs.sum())
        sv = np.linalg.svd(mat, compute_uv=False)
        self.smallest_singular_value = float(sv[-1])
        self.linearly_independent = bool(sv[-1] > LINEAR_INDEPENDENCE_RTOL * sv[0])

    @property
    def n_states(self) -> int:
        return self.states.shape[0]

    @property
    def space_dim(self) -> int:
        return self.states.shape[1]

    @property
    def uniform(self) -> bool:
        return bool(np.allclose(self.probs, 1.0 / self.n_states, atol=1e-12))

    def gram(self) -> np.ndarray:
        """Correlation matrix C_ij = <psi_i|psi_j>."""
        return self.states.conj() @ self.states.T

    def orthogonal_pairs(self) -> list[tuple[int, int]]:
        c = self.gram()
        out = []
        for i in range(self.n_states):
            for j in range(i + 1, self.n_states):
                if abs(c[i, j]) <= ORTHOGONALITY_ATOL:
                    out.append((i, j))
        return out

    def __repr__(self) -> str:
        return f"Ensemble(n_states={self.n_states}, dim={self.space_dim})"


class SymmetricEnsemble(Ensemble):
    """Fourier-symmetric ensemble with a known discrimination optimum."""

    def __init__(self, states, coefficients, exact_optimum: float):
        super().__init__(states)
        self.coefficients = _freeze(np.asarray(coefficients, dtype=complex))
        self.exact_optimum = float(exact_optimum)


def ensemble_to_document(ensemble: Ensemble) -> dict:
    return {
        "states": [state_to_document(QuantumState.pure(s)) for s in ensemble.states],
        "probs": [float(p) for p in ensemble.probs],
    }


def ensemble_from_document(doc: dict) -> Ensemble:
    states = [state_from_document(d).vector for d in doc["states"]]
    return Ensemble(np.array(states), doc.get("probs"))


@dataclass(frozen=True)
class UsdResult:
    """Success probability plus the unambiguity audit of a measurement."""

    success: float
    violations: tuple[tuple[int, int, float], ...]

    @property
    def unambiguous(self) -> bool:
        return not self.violations

    @property
    def max_violation(self) -> float:
        return max((v for _, _, v in self.violations), default=0.0)


def usd_success(ensemble: Ensemble, povm: Povm) -> UsdResult:
    """sum_i p_i tr(rho_i M_i) with M_{n+1} the inconclusive effect.

    Reports every cross term tr(rho_i M_j), i != j, above the unambiguity
    tolerance; a genuinely unambiguous measurement has none.
    """
    n = ensemble.n_states
    if povm.n_outcomes != n + 1:
        raise ValueError(f"need {n + 1} outcomes (detections plus inconclusive), "
                         f"got {povm.n_outcomes}")
    if povm.dim != ensemble.space_dim:
        raise ValueError("POVM dimension does not match the ensemble space")
    success = 0.0
    violations = []
    for i in range(n):
        psi = ensemble.states[i]
        for j in range(n):
            value = float(np.vdot(psi, povm.effects[j] @ psi).real)
            if i == j:
                success += ensemble.probs[i] * value
            elif value > UNAMBIGUITY_ATOL:
                violations.append((i, j, value))
    return UsdResult(success, tuple(violations))


def dual_states(ensemble: Ensemble) -> tuple[np.ndarray, float]:
    """Reciprocal vectors |psi~_i> with <psi~_i|psi_j> = delta_ij.

    Solved against the Gram matrix (no explicit inverse); also returns the
    Gram condition number, the relevant diagnostic for nearly dependent
    ensembles.
    """
    if not ensemble.linearly_independent:
        raise InvariantViolation("linear independence", ensemble.smallest_singular_value,
                                 "states are linearly dependent; no dual basis exists")
    c = ensemble.gram()
    # with states as rows S, the duals are rows of (C^T)^{-1} S: then
    # duals.conj() @ S.T = (C^{-1})^* C^* = identity
    x = np.linalg.solve(c.T, ensemble.states)
    return x, float(np.linalg.cond(c))


def equal_probability_measurement(ensemble: Ensemble) -> Povm:
    """The USD measurement detecting every state with probability lambda_min(C).

    Effects are lambda_min(C) |psi~_i><psi~_i| over the dual vectors, plus
    the inconclusive remainder, which this scaling makes positive.
    """
    if not ensemble.uniform:
        raise ValueError("the equal-probability construction assumes uniform priors")
    duals, _ = dual_states(ensemble)
    lam = min_eigenvalue(ensemble.gram())
    effects = [lam * np.outer(v, v.conj()) for v in duals]
    effects.append(np.eye(ensemble.space_dim) - sum(effects))
    labels = [str(i + 1) for i in range(ensemble.n_states)] + ["inconclusive"]
    return Povm(effects, labels=labels)


def projective_simulable_optimum(ensemble: Ensemble) -> float:
    """Exact USD optimum over projective-simulable measurements.

    For linearly independent, pairwise non-orthogonal states the only
    unambiguous projective measurements are rank-one, pointing along the
    (unique) dual direction of a single outcome; mixing them cannot beat the
    best single one, so the optimum is max_i p_i |<psi_i|phi_i>|^2 =
    max_i p_i / (C^{-1})_{ii}.
    """
    pairs = ensemble.orthogonal_pairs()
    if pairs:
        raise ValueError(f"states {pairs[0]} are orthogonal; "
                         "the structural optimum requires pairwise non-orthogonality")
    if not ensemble.linearly_independent:
        raise InvariantViolation("linear independence", ensemble.smallest_singular_value)
    c = ensemble.gram()
    inv_diag = np.diag(np.linalg.solve(c, np.eye(ensemble.n_states))).real
    return float(np.max(ensemble.probs / inv_diag))


def projective_simulable_optimum_by_search(ensemble: Ensemble) -> float:
    """Independent evaluation of the projective-simulable optimum.

    Enumerates the structural family directly: for each outcome i, the
    unambiguous direction within the span is found as the null space of the
    other states' overlap constraints (QR + SVD, no Gram inversion).
    """
    pairs = ensemble.orthogonal_pairs()
    if pairs:
        raise ValueError(f"states {pairs[0]} are orthogonal")
    span, _ = np.linalg.qr(ensemble.states.T)  # (D, n) orthonormal basis
    n = ensemble.n_states
    best = 0.0
    for i in range(n):
        others = np.delete(ensemble.states, i, axis=0)
        constraints = others.conj() @ span  # (n-1, n)
        _, sv, vh = np.linalg.svd(constraints)
        null = vh[-1].conj()
        direction = span @ null
        direction = direction / np.linalg.norm(direction)
        value = ensemble.probs[i] * abs(np.vdot(direction, ensemble.states[i])) ** 2
        best = max(best, float(value))
    return best


@dataclass(frozen=True)
class AdvantageBound:
    """Computable two-sided data for the d-fold advantage bound."""

    p_povm_lower: float
    p_sp: float
    ratio: float
    bound_ok: bool
    d: int


def usd_advantage_bound(ensemble: Ensemble) -> AdvantageBound:
    """Check that POVMs beat projective-simulable strategies by at most d.

    The POVM side is lower-bounded by the dual-vector measurement's success
    lambda_min(C); the projective-simulable side is the exact structural
    optimum.  For fully orthogonal ensembles both optima are 1.
    """
    if not ensemble.linearly_independent:
        raise InvariantViolation("linear independence", ensemble.smallest_singular_value)
    d = ensemble.n_states
    lam = min_eigenvalue(ensemble.gram())
    pairs = ensemble.orthogonal_pairs()
    if not pairs:
        p_sp = projective_simulable_optimum(ensemble)
    elif len(pairs) == d * (d - 1) // 2:
        p_sp = 1.0  # orthonormal states: measure them directly
    else:
        raise ValueError("mixed orthogonal/non-orthogonal ensemble; "
                         "the structural optimum is not available")
    ratio = lam / p_sp
    bound_ok = lam <= d * p_sp + default_atol(d)
    return AdvantageBound(float(lam), float(p_sp), float(ratio), bool(bound_ok), d)


def symmetric_ensemble(d: int, coefficients) -> SymmetricEnsemble:
    """Uniform ensemble of Fourier-symmetric states with known USD optimum.

    |phi_i> = (1/sqrt(d)) sum_k c_k w^{ik} |k> with w = exp(2 pi i / d);
    normalization requires sum |c_k|^2 = d, every c_k must be non-zero, and
    the optimum over all measurements is min_k |c_k|^2 (the smallest Gram
    eigenvalue; the ensemble Gram is circulant with eigenvalues |c_k|^2).
    """
    c = np.asarray(coefficients, dtype=complex).reshape(-1)
    if c.size != d:
        raise ValueError(f"need {d} coefficients, got {c.size}")
    total = float(np.sum(np.abs(c) ** 2))
    if abs(total - d) > 1e-9 * d:
        raise InvariantViolation("coefficient normalization", abs(total - d),
                                 f"sum |c_k|^2 must equal d={d}, got {total:.12f}")
    if np.min(np.abs(c)) == 0:
        raise ValueError("all coefficients must be non-zero for linear independence")
    omega = np.exp(2j * np.pi / d)
    k = np.arange(d)
    states = np.array([c * omega ** (i * k) for i in range(d)]) / np.sqrt(d)
    return SymmetricEnsemble(states, c, float(np.min(np.abs(c) ** 2)))


def symmetric_ensemble_from_gap(d: int, epsilon: float) -> SymmetricEnsemble:
    """Symmetric ensemble whose all-measurement optimum is exactly 1 - epsilon.

    One coefficient carries weight |c|^2 = 1 - epsilon and the rest share
    the remainder equally; epsilon in (0, 1) keeps all pairwise overlaps
    non-zero, the regime where projective simulation caps at 1/d.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must be in (0, 1) for non-orthogonal symmetric states")
    if d < 2:
        raise ValueError("need d >= 2")
    mags = np.full(d, (d - 1 + epsilon) / (d - 1))
    mags[0] = 1 - epsilon
    return symmetric_ensemble(d, np.sqrt(mags))


@dataclass
class RandomEnsembleExperiment:
    """Per-trial smallest Gram eigenvalues of Haar-random ensembles, with
    the resulting two-sided advantage-ratio band."""

    d: int
    space_dim: int
    seed: int
    rows: list[dict] = field(default_factory=list)

    @property
    def gamma(self) -> float:
        return self.d / self.space_dim

    @property
    def lambda_values(self) -> np.ndarray:
        return np.array([r["lambda_min"] for r in self.rows])

    @property
    def mean_lambda_min(self) -> float:
        return float(np.mean(self.lambda_values))

    @property
    def std_lambda_min(self) -> float:
        return float(np.std(self.lambda_values))

    @property
    def band_ok(self) -> bool:
        """Trial-wise check that ratio_lower never exceeds ratio_upper."""
        return all(r["ratio_lower"] <= r["ratio_upper"] + default_atol(self.d)
                   for r in self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        fields = ["d", "D", "gamma", "trial", "lambda_min", "p_sp_upper",
                  "ratio_lower", "ratio_upper", "seed"]
        writer = csv.DictWriter(buf, fieldnames=fields)
        writer.writeheader()
        for r in self.rows:
            writer.writerow({"d": self.d, "D": self.space_dim, "gamma": self.gamma,
                             "trial": r["trial"], "lambda_min": r["lambda_min"],
                             "p_sp_upper": r["p_sp_upper"],
                             "ratio_lower": r["ratio_lower"],
                             "ratio_upper": r["ratio_upper"], "seed": self.seed})
        return buf.getvalue()


def random_ensemble_experiment(d: int, space_dim: int, trials: int, seed: int,
                               ) -> RandomEnsembleExperiment:
    """Sample uniform ensembles of d Haar states in dimension D >= d.

    Each trial records lambda_min of the Gram matrix (the POVM-side success
    lower bound) and the band it implies for the POVM/projective advantage
    ratio: d * lambda_min <= ratio <= d, the upper end from the 1/d cap on
    projective-simulable success for generic (non-orthogonal) states.
    """
    if d > space_dim:
        raise ValueError("need d <= D for linearly independent Haar states")
    if trials < 1:
        raise ValueError("need at least one trial")
    experiment = RandomEnsembleExperiment(d, space_dim, seed)
    children = np.random.SeedSequence(seed).spawn(trials)
    for t, child in enumerate(children):
        rng = np.random.default_rng(child)
        states = np.array([haar_random_pure_state(space_dim, rng).vector
                           for _ in range(d)])
        ensemble = Ensemble(states)
        lam = min_eigenvalue(ensemble.gram())
        p_sp_upper = 1.0 / d
        experiment.rows.append({
            "trial": t,
            "lambda_min": float(lam),
            "p_sp_upper": p_sp_upper,
            "ratio_lower": float(lam / p_sp_upper),
            "ratio_upper": float(d),
        })
    return experiment
