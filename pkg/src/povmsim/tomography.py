"""Qubit measurement tomography by linear inversion, and the operational
distance used to score implementations against their targets.

The probe set is the four Pauli eigenstates |0>, |1>, |x+>, |y+>:
informationally complete for the weight/Bloch-vector parametrization of a
qubit effect.  Inversion is deliberately unconstrained; unphysical results
are reported, never projected away.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .core import (
    BlochVector,
    Povm,
    QuantumState,
    _freeze,
    as_operator,
    default_atol,
)

PROBE_LABELS = ("z0", "z1", "x+", "y+")
MAX_SUBSET_OUTCOMES = 20


def probe_states() -> tuple[QuantumState, ...]:
    s = 1 / np.sqrt(2)
    return (QuantumState.pure([1, 0]),
            QuantumState.pure([0, 1]),
            QuantumState.pure([s, s]),
            QuantumState.pure([s, 1j * s]))


class TomographyRecord:
    """Per-probe outcome frequencies, the raw material of reconstruction.

    ``frequencies[p, i]`` is the relative frequency of outcome i on probe p;
    every row sums to one.
    """

    def __init__(self, frequencies, shots_per_probe=None,
                 outcome_labels=None, probe_labels=PROBE_LABELS,
                 row_atol: float = 1e-9):
        f = np.asarray(frequencies, dtype=float)
        if f.ndim != 2:
            raise ValueError("frequencies must be a (n_probes, n_outcomes) table")
        if np.min(f) < -1e-12:
            raise ValueError("frequencies must be non-negative")
        # row_atol is loosened only for tables derived from rounded or
        # not-exactly-complete effects; counted data always sums exactly
        row_defect = float(np.max(np.abs(f.sum(axis=1) - 1.0)))
        if row_defect > row_atol:
            raise ValueError(f"each probe's frequencies must sum to 1 (defect {row_defect:.3e})")
        if len(probe_labels) != f.shape[0]:
            raise ValueError("probe labels do not match the table")
        self.frequencies = _freeze(np.clip(f, 0.0, None))
        self.probe_labels = tuple(probe_labels)
        if outcome_labels is None:
            outcome_labels = tuple(str(i + 1) for i in range(f.shape[1]))
        self.outcome_labels = tuple(outcome_labels)
        if shots_per_probe is None:
            self.shots_per_probe = None
        else:
            self.shots_per_probe = _freeze(np.asarray(shots_per_probe, dtype=int))

    @property
    def n_probes(self) -> int:
        return self.frequencies.shape[0]

    @property
    def n_outcomes(self) -> int:
        return self.frequencies.shape[1]

    @classmethod
    def from_born(cls, povm: Povm, probes=None) -> "TomographyRecord":
        """Exact statistics: the infinite-shot record of a known POVM."""
        from .core import born_probabilities
        if probes is None:
            probes = probe_states()
        table = np.array([born_probabilities(state, povm) for state in probes])
        return cls(table, outcome_labels=povm.labels)

    def postselected(self, fail_index: int) -> "TomographyRecord":
        """Drop one outcome column and renormalize each probe row,
        keeping only non-rejected outcomes."""
        keep = [i for i in range(self.n_outcomes) if i != fail_index]
        table = self.frequencies[:, keep]
        totals = table.sum(axis=1, keepdims=True)
        if np.min(totals) <= 0:
            raise ValueError("a probe has no surviving outcomes after postselection")
        labels = tuple(self.outcome_labels[i] for i in keep)
        return TomographyRecord(table / totals, self.shots_per_probe, labels,
                                self.probe_labels)

    def to_csv(self) -> str:
        """Rows (probe, outcome, count, shots); for records without shot
        totals the counts are the relative frequencies and shots is empty."""
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["probe", "outcome", "count", "shots"])
        for p, plabel in enumerate(self.probe_labels):
            shots = None if self.shots_per_probe is None else int(self.shots_per_probe[p])
            for i, olabel in enumerate(self.outcome_labels):
                if shots is None:
                    writer.writerow([plabel, olabel, repr(self.frequencies[p, i]), ""])
                else:
                    writer.writerow([plabel, olabel, int(round(self.frequencies[p, i] * shots)), shots])
        return buf.getvalue()

    def __repr__(self) -> str:
        return f"TomographyRecord(probes={self.n_probes}, outcomes={self.n_outcomes})"


def reconstruct_effect(freqs) -> BlochVector:
    """Invert one outcome's probe frequencies to (alpha, n).

    alpha = p(z0) + p(z1); n_z = (p(z0) - p(z1)) / alpha;
    n_x = 2 p(x+) / alpha - 1; n_y = 2 p(y+) / alpha - 1.
    """
    p = np.asarray(freqs, dtype=float).reshape(-1)
    if p.size != 4:
        raise ValueError("need frequencies for the four probes z0, z1, x+, y+")
    if np.min(p) < 0 or np.max(p) > 1 + 1e-12:
        raise ValueError("frequencies must lie in [0, 1]")
    alpha = p[0] + p[1]
    if alpha <= 0:
        raise ValueError("effect weight alpha = p(z0) + p(z1) must be positive")
    n = np.array([2 * p[2] / alpha - 1,
                  2 * p[3] / alpha - 1,
                  (p[0] - p[1]) / alpha])
    return BlochVector(alpha, n)


@dataclass(frozen=True)
class Reconstruction:
    """Linear-inversion output: effects plus physicality diagnostics.

    ``bloch[i]`` is ``None`` for an outcome that never fired (zero effect).
    """

    effects: tuple[np.ndarray, ...]
    bloch: tuple[BlochVector | None, ...]
    completeness_defect: float
    unphysical_outcomes: tuple[int, ...]

    @property
    def n_outcomes(self) -> int:
        return len(self.effects)

    @property
    def physical(self) -> bool:
        return not self.unphysical_outcomes

    def as_povm(self, atol: float) -> Povm:
        return Povm(self.effects, atol=atol)


def reconstruct_povm(record: TomographyRecord) -> Reconstruction:
    """Reconstruct every effect of a qubit measurement from a record.

    Outcomes whose Bloch vector leaves the unit ball are flagged as
    unphysical but kept as-is; the completeness defect ||sum M_i - 1|| is
    reported rather than corrected.
    """
    if record.n_probes != 4 or record.probe_labels != PROBE_LABELS:
        raise ValueError("reconstruction needs the standard four-probe record")
    bloch = []
    effects = []
    warned = []
    for i in range(record.n_outcomes):
        column = record.frequencies[:, i]
        if np.max(column) <= 1e-12:
            # outcome never fired on any probe: a null effect
            bloch.append(None)
            effects.append(np.zeros((2, 2), dtype=complex))
            continue
        b = reconstruct_effect(column)
        bloch.append(b)
        effects.append(b.to_matrix())
        if not b.physical:
            warned.append(i)
    defect = operator_norm_hermitian(sum(effects) - np.eye(2))
    return Reconstruction(tuple(_freeze(e) for e in effects), tuple(bloch),
                          float(defect), tuple(warned))


def operator_norm_hermitian(m: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvalsh((m + m.conj().T) / 2))))


def _effect_list(povm):
    if isinstance(povm, (Povm, Reconstruction)):
        return [np.asarray(m) for m in povm.effects]
    return [as_operator(m, f"effect {i}") for i, m in enumerate(povm)]


def operational_distance(m, n) -> float:
    """Worst-case distinguishability distance between two measurements.

    max over outcome subsets x of || sum_{i in x} (M_i - N_i) ||; equals
    2 p_dist - 1 for the optimal entanglement-free discrimination
    probability.  Outcome lists of unequal length are padded with zero
    effects.  When both measurements are complete the subset and its
    complement give the same norm, so only subsets containing outcome 0 are
    scanned; otherwise all subsets are.
    """
    ms = _effect_list(m)
    ns = _effect_list(n)
    dim = ms[0].shape[0]
    if ns[0].shape[0] != dim:
        raise ValueError("measurements act on different dimensions")
    k = max(len(ms), len(ns))
    if k > MAX_SUBSET_OUTCOMES:
        raise ValueError(f"subset enumeration supports at most {MAX_SUBSET_OUTCOMES} outcomes")
    zero = np.zeros((dim, dim), dtype=complex)
    ms = ms + [zero] * (k - len(ms))
    ns = ns + [zero] * (k - len(ns))
    diffs = [a - b for a, b in zip(ms, ns)]
    total = sum(diffs)
    complete_pair = float(np.max(np.abs(total))) <= 1e-12
    best = 0.0
    if complete_pair:
        rest = range(1, k)
        for r in range(0, k):
            for tail in combinations(rest, r):
                subset_sum = diffs[0] + sum((diffs[i] for i in tail), zero)
                best = max(best, operator_norm_hermitian(subset_sum))
    else:
        for r in range(1, k + 1):
            for sub in combinations(range(k), r):
                subset_sum = sum((diffs[i] for i in sub), zero)
                best = max(best, operator_norm_hermitian(subset_sum))
    return best


def bias_mitigated_statistics(records) -> TomographyRecord:
    """Average bit-flip relabelled records from x-gate circuit variants.

    ``records`` maps flip masks to TomographyRecords whose outcome axis is
    indexed by register bitstrings; a variant measured with x gates on the
    masked qubits is relabelled by XOR-ing its outcome index with the mask.
    The full mask set is required: 2 variants for one qubit, 4 for two.
    """
    items = list(records.items()) if isinstance(records, dict) else list(records)
    masks = sorted(int(m) for m, _ in items)
    n_outcomes = items[0][1].n_outcomes
    n_qubits = max(1, (n_outcomes - 1).bit_length())
    if n_outcomes != 2 ** n_qubits:
        raise ValueError("outcome count must be a power of two (register outcomes)")
    if masks != list(range(2 ** n_qubits)):
        raise ValueError(f"need one record per flip mask 0..{2 ** n_qubits - 1}, got {masks}")
    base = items[0][1]
    table = np.zeros((base.n_probes, n_outcomes))
    for mask, rec in items:
        if rec.n_outcomes != n_outcomes or rec.probe_labels != base.probe_labels:
            raise ValueError("variant records do not match")
        relabel = np.array([i ^ int(mask) for i in range(n_outcomes)])
        table[:, relabel] += rec.frequencies
    table /= len(items)
    return TomographyRecord(table, None, base.outcome_labels, base.probe_labels)


def distance_table_csv(rows) -> str:
    """Serialize (povm, method, distance) triples in the published shape."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["povm", "method", "distance"])
    for povm_name, method, distance in rows:
        writer.writerow([povm_name, method, f"{distance:.6f}"])
    return buf.getvalue()
