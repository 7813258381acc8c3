"""Small-register noisy circuit simulation: an in-silico testbed comparing
the postselection scheme against the Naimark construction on noisy
superconducting-style hardware.

Circuits use CNOT and arbitrary single-qubit unitaries; noise is a
depolarizing channel after every gate (two-qubit after CNOT, much weaker
single-qubit after SU(2) gates) plus an asymmetric readout bias towards 0,
mitigated by duplicating circuits with x gates before measurement and
averaging the relabelled statistics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import PAULI_X, HADAMARD, Povm, QuantumState, _rng
from .naimark import NaimarkDilation, naimark_dilation
from .simulation import (
    PostselectionScheme,
    ShotRecord,
    postselection_scheme,
)
from .tomography import (
    Reconstruction,
    TomographyRecord,
    bias_mitigated_statistics,
    operational_distance,
    probe_states,
    reconstruct_povm,
)

DECOMPOSITION_ATOL = 1e-8


@dataclass(frozen=True)
class NoiseModel:
    """Depolarizing-plus-readout noise parameters, all probabilities."""

    cnot_depolarizing: float = 0.0
    su2_depolarizing: float = 0.0
    readout_bias: float = 0.0

    def __post_init__(self):
        for name in ("cnot_depolarizing", "su2_depolarizing", "readout_bias"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")

    @classmethod
    def noiseless(cls) -> "NoiseModel":
        return cls()

    @classmethod
    def preset(cls, name: str) -> "NoiseModel":
        if name == "noiseless":
            return cls()
        if name == "ibmx4-like":
            # synthetic two-qubit-gate-dominated error budget; tunable
            # config values, not a hardware calibration
            return cls(cnot_depolarizing=0.05, su2_depolarizing=0.001,
                       readout_bias=0.02)
        raise KeyError(f"unknown noise preset {name!r}; "
                       "available: noiseless, ibmx4-like")


@dataclass(frozen=True)
class ExperimentPlan:
    """A declarative comparison run: fixture, scheme, noise, shots, seed."""

    povm_fixture: str
    scheme: str
    noise: NoiseModel
    shots: int
    seed: int


def load_experiment_plan(doc: dict) -> ExperimentPlan:
    """Parse a plan mapping with flat dotted noise keys.

    Recognized keys: noise.cnot, noise.su2, noise.readout_bias, shots, seed,
    scheme, povm_fixture.
    """
    known = {"noise.cnot", "noise.su2", "noise.readout_bias",
             "shots", "seed", "scheme", "povm_fixture"}
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"unknown plan keys: {sorted(unknown)}")
    noise = NoiseModel(cnot_depolarizing=float(doc.get("noise.cnot", 0.0)),
                       su2_depolarizing=float(doc.get("noise.su2", 0.0)),
                       readout_bias=float(doc.get("noise.readout_bias", 0.0)))
    scheme = doc.get("scheme", "both")
    if scheme not in ("postselection", "naimark", "both"):
        raise ValueError(f"unknown scheme {scheme!r}")
    return ExperimentPlan(povm_fixture=doc.get("povm_fixture", "tetrahedral"),
                          scheme=scheme, noise=noise,
                          shots=int(doc.get("shots", 8192)),
                          seed=int(doc.get("seed", 0)))


@dataclass(frozen=True)
class Gate:
    kind: str  # "su2" | "h" | "cnot"
    qubits: tuple[int, ...]
    matrix: np.ndarray | None = None


@dataclass
class Circuit:
    """A 1- or 2-qubit gate list followed by computational-basis readout."""

    n_qubits: int
    gates: list[Gate] = field(default_factory=list)
    measured: tuple[int, ...] = ()

    def __post_init__(self):
        if self.n_qubits not in (1, 2):
            raise ValueError("only 1- and 2-qubit circuits are supported")
        if not self.measured:
            self.measured = tuple(range(self.n_qubits))

    def _check_qubit(self, q: int):
        if not 0 <= q < self.n_qubits:
            raise ValueError(f"qubit {q} out of range")

    def su2(self, qubit: int, matrix) -> "Circuit":
        self._check_qubit(qubit)
        m = np.asarray(matrix, dtype=complex)
        if m.shape != (2, 2) or np.max(np.abs(m.conj().T @ m - np.eye(2))) > 1e-9:
            raise ValueError("su2 payload must be a 2x2 unitary")
        self.gates.append(Gate("su2", (qubit,), m))
        return self

    def h(self, qubit: int) -> "Circuit":
        self._check_qubit(qubit)
        self.gates.append(Gate("h", (qubit,)))
        return self

    def x(self, qubit: int) -> "Circuit":
        return self.su2(qubit, PAULI_X)

    def cnot(self, control: int, target: int) -> "Circuit":
        self._check_qubit(control)
        self._check_qubit(target)
        if control == target:
            raise ValueError("control and target must differ")
        self.gates.append(Gate("cnot", (control, target)))
        return self

    @property
    def cnot_count(self) -> int:
        return sum(1 for g in self.gates if g.kind == "cnot")

    def copy(self) -> "Circuit":
        return Circuit(self.n_qubits, list(self.gates), self.measured)

    def gate_matrix(self, gate: Gate) -> np.ndarray:
        """Full-register matrix of one gate (qubit 0 is the leading factor)."""
        if gate.kind == "cnot":
            return _cnot_matrix(self.n_qubits, *gate.qubits)
        single = HADAMARD if gate.kind == "h" else gate.matrix
        return _embed_single(single, gate.qubits[0], self.n_qubits)

    def unitary(self) -> np.ndarray:
        u = np.eye(2 ** self.n_qubits, dtype=complex)
        for gate in self.gates:
            u = self.gate_matrix(gate) @ u
        return u


def _embed_single(m: np.ndarray, qubit: int, n_qubits: int) -> np.ndarray:
    ops = [np.eye(2, dtype=complex)] * n_qubits
    ops[qubit] = m
    out = ops[0]
    for op in ops[1:]:
        out = np.kron(out, op)
    return out


def _cnot_matrix(n_qubits: int, control: int, target: int) -> np.ndarray:
    dim = 2 ** n_qubits
    u = np.zeros((dim, dim), dtype=complex)
    for m in range(dim):
        bits = [(m >> (n_qubits - 1 - q)) & 1 for q in range(n_qubits)]
        if bits[control]:
            bits[target] ^= 1
        out = sum(b << (n_qubits - 1 - q) for q, b in enumerate(bits))
        u[out, m] = 1.0
    return u


def depolarize(rho: np.ndarray, p: float, qubits, n_qubits: int) -> np.ndarray:
    """Depolarizing channel on a qubit subset: rho -> (1-p) rho + p 1/2^k (x) tr_k rho."""
    if p == 0.0:
        return rho
    qubits = tuple(qubits)
    if len(qubits) == n_qubits:
        mixed = np.eye(2 ** n_qubits, dtype=complex) * (np.trace(rho) / 2 ** n_qubits)
        return (1 - p) * rho + p * mixed
    # single qubit of a two-qubit register: trace it out and re-tensor
    (q,) = qubits
    t = rho.reshape(2, 2, 2, 2)
    if q == 0:
        reduced = np.trace(t, axis1=0, axis2=2)  # keeps qubit 1
        mixed = np.kron(np.eye(2) / 2, reduced)
    else:
        reduced = np.trace(t, axis1=1, axis2=3)  # keeps qubit 0
        mixed = np.kron(reduced, np.eye(2) / 2)
    return (1 - p) * rho + p * mixed


def _readout_confusion(n_measured: int, bias: float) -> np.ndarray:
    """Classical channel: a true '1' reads '0' with probability bias."""
    k1 = np.array([[1.0, bias], [0.0, 1.0 - bias]])
    out = np.eye(1)
    for _ in range(n_measured):
        out = np.kron(out, k1)
    return out


def exact_output_distribution(circuit: Circuit, state: QuantumState,
                              noise: NoiseModel) -> np.ndarray:
    """Readout distribution after density-matrix evolution under the noise model."""
    dim = 2 ** circuit.n_qubits
    if state.dim != dim:
        raise ValueError(f"state dimension {state.dim} does not match the "
                         f"{circuit.n_qubits}-qubit register")
    rho = np.array(state.rho, dtype=complex)
    for gate in circuit.gates:
        u = circuit.gate_matrix(gate)
        rho = u @ rho @ u.conj().T
        if gate.kind == "cnot":
            rho = depolarize(rho, noise.cnot_depolarizing, gate.qubits, circuit.n_qubits)
        else:
            rho = depolarize(rho, noise.su2_depolarizing, gate.qubits, circuit.n_qubits)
    diag = np.clip(np.diag(rho).real, 0.0, None)
    # marginalize over unmeasured qubits, packing measured bits in order
    measured = circuit.measured
    probs = np.zeros(2 ** len(measured))
    for m in range(dim):
        bits = [(m >> (circuit.n_qubits - 1 - q)) & 1 for q in range(circuit.n_qubits)]
        out = 0
        for b in (bits[q] for q in measured):
            out = (out << 1) | b
        probs[out] += diag[m]
    probs = probs / probs.sum()
    return _readout_confusion(len(measured), noise.readout_bias) @ probs


def run_shots(circuit: Circuit, state: QuantumState, noise: NoiseModel,
              shots: int, seed) -> ShotRecord:
    """Sample readout results; outcomes are measured-bit register indices."""
    if shots < 1:
        raise ValueError("shots must be at least 1")
    probs = exact_output_distribution(circuit, state, noise)
    rng = _rng(seed)
    outcomes = rng.choice(probs.size, size=shots, p=probs)
    return ShotRecord(shots, outcomes.astype(np.int64),
                      seed if isinstance(seed, int) else None,
                      fail_index=probs.size, n_outcomes=probs.size)


def proportional_shot_allocation(weights, cap: int) -> np.ndarray:
    """Per-measurement run counts N_j = round(cap * a_j / max a_j).

    Block-allocation stand-in for per-run randomization: downstream
    frequency normalization divides by sum N_j, which reproduces the
    weights exactly in expectation.
    """
    w = np.asarray(weights, dtype=float)
    if w.size == 0:
        raise ValueError("weights must be non-empty")
    if np.min(w) <= 0:
        raise ValueError("weights must be positive")
    if cap < 1:
        raise ValueError("cap must be at least 1")
    return np.rint(cap * w / np.max(w)).astype(int)


# ---------------------------------------------------------------------------
# Two-qubit unitary -> (SU(2) layers, <= 3 CNOTs), following the magic-basis
# double-coset method of Shende, Markov & Bullock.  All branch outputs are
# verified against the input; the generic branch retries the simultaneous
# diagonalization with different real/imaginary mixings before giving up.

_MAGIC = np.array([[1, 1j, 0, 0],
                   [0, 0, 1j, 1],
                   [0, 0, 1j, -1],
                   [1, -1j, 0, 0]], dtype=complex) / np.sqrt(2)
_MAGIC_DAG = _MAGIC.conj().T
_CNOT01 = _cnot_matrix(2, 0, 1)
_CNOT10 = _cnot_matrix(2, 1, 0)
_SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]],
                 dtype=complex)
_S_GATE = np.diag([1.0, 1j])
_SX_GATE = 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]])

_MIXINGS = (1.0, 0.618033988749895, 2.23606797749979, 3.302775637731995, 0.0)


def _rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def _ry(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _rx(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def _to_su4(u: np.ndarray) -> np.ndarray:
    det = np.linalg.det(u)
    return u * np.exp(-1j * np.angle(det) / 4)


def _gamma(u: np.ndarray) -> np.ndarray:
    m = _MAGIC_DAG @ u @ _MAGIC
    return m @ m.T


def _num_cnots(u: np.ndarray) -> int:
    trace = np.trace(_gamma(u))
    if abs(trace - 4) < 1e-7 or abs(trace + 4) < 1e-7:
        return 0
    evs = np.sort(np.linalg.eigvals(_gamma(u)).imag)
    if abs(trace) < 1e-7 and np.allclose(evs, [-1, -1, 1, 1], atol=1e-7):
        return 1
    if abs(trace.imag) < 1e-7:
        return 2
    return 3


def _kron_factor(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split an (assumed) tensor product of one-qubit unitaries via the
    rank-one structure of its rearrangement."""
    w = m.reshape(2, 2, 2, 2).transpose(0, 2, 1, 3).reshape(4, 4)
    u, s, vh = np.linalg.svd(w)
    a = (u[:, 0] * np.sqrt(s[0])).reshape(2, 2)
    b = (vh[0, :] * np.sqrt(s[0])).reshape(2, 2)
    # balance the phase/scale freedom so both factors are unitary
    da = np.linalg.det(a)
    scale = 1 / np.sqrt(np.abs(da))
    a = a * scale
    b = b / scale
    return a, b


def _diagonalize_symmetric_unitary(s: np.ndarray, mixing: float):
    """Real orthogonal p with p^T s p diagonal, for unitary symmetric s.

    Real and imaginary parts of s are commuting real symmetric matrices, so
    a common eigenbasis exists; it is found from a generic real mixture."""
    sym = s.real + mixing * s.imag if mixing != 0.0 else s.real
    _, p = np.linalg.eigh((sym + sym.T) / 2)
    if np.linalg.det(p) < 0:
        p[:, -1] = -p[:, -1]
    d = p.T @ s @ p
    return p, d


def _extract_prefactors(u_target: np.ndarray, v_inner: np.ndarray):
    """Find one-qubit a, b, c, d with (a (x) b) v_inner (c (x) d) = u_target.

    Works in the magic basis, where the two double-coset representatives are
    connected by real orthogonal G, H obtained from simultaneous
    diagonalization of u u^T and v v^T."""
    u = _MAGIC_DAG @ u_target @ _MAGIC
    v = _MAGIC_DAG @ v_inner @ _MAGIC
    uut = u @ u.T
    vvt = v @ v.T
    last_error = None
    for mixing in _MIXINGS:
        p, du = _diagonalize_symmetric_unitary(uut, mixing)
        q, dv = _diagonalize_symmetric_unitary(vvt, mixing)
        if (np.max(np.abs(du - np.diag(np.diag(du)))) > 1e-9
                or np.max(np.abs(dv - np.diag(np.diag(dv)))) > 1e-9
                or np.max(np.abs(np.diag(du) - np.diag(dv))) > 1e-7):
            last_error = "diagonalization mismatch"
            continue
        g = p @ q.T
        h = v.conj().T @ g.T @ u
        ab = _MAGIC @ g @ _MAGIC_DAG
        cd = _MAGIC @ h @ _MAGIC_DAG
        a, b = _kron_factor(ab)
        c, d = _kron_factor(cd)
        check = np.kron(a, b) @ v_inner @ np.kron(c, d)
        if _phase_distance(check, u_target) < DECOMPOSITION_ATOL:
            return a, b, c, d
        last_error = "residual too large"
    raise RuntimeError(f"prefactor extraction failed: {last_error}")


def _phase_distance(u: np.ndarray, v: np.ndarray) -> float:
    """Max entrywise distance between u and v after removing a global phase."""
    idx = np.unravel_index(np.argmax(np.abs(v)), v.shape)
    if abs(u[idx]) < 1e-12:
        return float(np.max(np.abs(u - v)))
    phase = v[idx] / u[idx]
    phase = phase / abs(phase)
    return float(np.max(np.abs(phase * u - v)))


def two_qubit_gate_sequence(unitary: np.ndarray) -> list[Gate]:
    """Decompose a 4x4 unitary into SU(2) gates and at most 3 CNOTs.

    Branches on the canonical CNOT count; each branch's output is verified
    to DECOMPOSITION_ATOL, falling back to the generic 3-CNOT form when a
    special-case branch fails numerically.
    """
    u_in = np.asarray(unitary, dtype=complex)
    if u_in.shape != (4, 4):
        raise ValueError("expected a 4x4 unitary")
    if np.max(np.abs(u_in.conj().T @ u_in - np.eye(4))) > 1e-9:
        raise ValueError("matrix is not unitary")
    u = _to_su4(u_in)
    branches = {0: _gates_0_cnots, 1: _gates_1_cnot, 2: _gates_2_cnots,
                3: _gates_3_cnots}
    order = [_num_cnots(u), 3]
    last = None
    for branch in order:
        try:
            gates = branches[branch](u)
        except RuntimeError as err:
            last = err
            continue
        if _phase_distance(_sequence_unitary(gates), u_in) < DECOMPOSITION_ATOL:
            return gates
        last = RuntimeError("branch residual too large")
    raise RuntimeError(f"two-qubit decomposition failed: {last}")


def _sequence_unitary(gates: list[Gate]) -> np.ndarray:
    circ = Circuit(2)
    circ.gates = list(gates)
    return circ.unitary()


def _gates_0_cnots(u: np.ndarray) -> list[Gate]:
    a, b = _kron_factor(u)
    return [Gate("su2", (0,), a), Gate("su2", (1,), b)]


def _gates_1_cnot(u: np.ndarray) -> list[Gate]:
    swap_u = np.exp(1j * np.pi / 4) * _SWAP @ u
    v_inner = _to_su4(_SWAP @ _CNOT01)
    a, b, c, d = _extract_prefactors(swap_u, v_inner)
    # swap_u = (a x b) SWAP CNOT (c x d); commuting the SWAP to the left
    # exchanges the output-side factors, and the SWAPs cancel
    return [Gate("su2", (0,), c), Gate("su2", (1,), d),
            Gate("cnot", (0, 1)),
            Gate("su2", (0,), b), Gate("su2", (1,), a)]


def _gates_2_cnots(u: np.ndarray) -> list[Gate]:
    evs = np.linalg.eigvals(_gamma(u))
    if np.allclose(np.sort(evs.real), [-1, -1, 1, 1], atol=1e-7) and \
            np.max(np.abs(evs.imag)) < 1e-7:
        # adjacent-CNOT special case: interior is S (x) sqrt(X)
        middle = [Gate("su2", (0,), _S_GATE), Gate("su2", (1,), _SX_GATE)]
        inner = np.kron(_S_GATE, _SX_GATE)
    else:
        x = np.angle(evs[0])
        y = np.angle(evs[1])
        if abs(x + y) < 1e-9:
            y = np.angle(evs[2])
        delta = (x + y) / 2
        phi = (x - y) / 2
        middle = [Gate("su2", (0,), _rz(delta)), Gate("su2", (1,), _rx(phi))]
        inner = np.kron(_rz(delta), _rx(phi))
    v_inner = _CNOT10 @ inner @ _CNOT10
    a, b, c, d = _extract_prefactors(u, v_inner)
    return [Gate("su2", (0,), c), Gate("su2", (1,), d),
            Gate("cnot", (1, 0)), *middle, Gate("cnot", (1, 0)),
            Gate("su2", (0,), a), Gate("su2", (1,), b)]


def _gates_3_cnots(u: np.ndarray) -> list[Gate]:
    swap_u = np.exp(1j * np.pi / 4) * _SWAP @ u
    evs = np.linalg.eigvals(_gamma(swap_u))
    angles = np.sort(np.angle(evs))
    x, y, z = angles[0], angles[1], angles[2]
    alpha = (x + y) / 2
    beta = (x + z) / 2
    delta = (z + y) / 2
    inner_gates = [Gate("cnot", (1, 0)),
                   Gate("su2", (0,), _rz(delta)), Gate("su2", (1,), _ry(beta)),
                   Gate("cnot", (0, 1)),
                   Gate("su2", (1,), _ry(alpha)),
                   Gate("cnot", (1, 0))]
    v_inner = _SWAP @ _sequence_unitary(inner_gates)
    a, b, c, d = _extract_prefactors(swap_u, v_inner)
    return [Gate("su2", (0,), c), Gate("su2", (1,), d),
            *inner_gates,
            Gate("su2", (0,), b), Gate("su2", (1,), a)]


# ---------------------------------------------------------------------------
# Circuit compilation for the two implementation routes.

def compile_postselection_circuit(projector_direction) -> Circuit:
    """One SU(2) rotating the component state to |0>, then readout.

    Reading 0 is the "+" (kept) outcome, reading 1 the postselected one.
    """
    psi = np.asarray(projector_direction, dtype=complex).reshape(-1)
    if psi.size != 2:
        raise ValueError("postselection components are qubit projectors")
    psi = psi / np.linalg.norm(psi)
    perp = np.array([-np.conj(psi[1]), np.conj(psi[0])])
    u = np.array([psi.conj(), perp.conj()])
    circuit = Circuit(1)
    circuit.su2(0, u)
    return circuit


def compile_naimark_circuit(dilation: NaimarkDilation) -> Circuit:
    """Two-qubit circuit for a 4x4 dilation unitary (system = qubit 0,
    ancilla = qubit 1 prepared in |0>)."""
    if dilation.ext_dim != 4:
        raise ValueError("circuit compilation needs a 4x4 (two-qubit) dilation")
    gates = two_qubit_gate_sequence(np.array(dilation.unitary))
    circuit = Circuit(2)
    circuit.gates = gates
    residual = _phase_distance(circuit.unitary(), np.array(dilation.unitary))
    if residual > DECOMPOSITION_ATOL:
        raise RuntimeError(f"decomposition residual {residual:.2e} too large")
    return circuit


# ---------------------------------------------------------------------------
# Tomography pipelines and the head-to-head comparison.

@dataclass
class PipelineResult:
    """Bias-mitigated tomography of one implementation route."""

    record: TomographyRecord
    reconstruction: Reconstruction
    postselection_fraction: float | None = None
    residual_mass: float | None = None
    shots_total: int = 0


def _seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def _variant_record(circuit: Circuit, probes, noise: NoiseModel, shots: int,
                    rng_children) -> TomographyRecord:
    rows = []
    for probe, child in zip(probes, rng_children):
        rec = run_shots(circuit, probe, noise, shots, np.random.default_rng(child))
        counts = rec.counts()[: rec.n_outcomes]
        rows.append(counts / counts.sum())
    return TomographyRecord(np.array(rows))


def postselection_tomography(scheme: PostselectionScheme, noise: NoiseModel,
                             cap: int, seed, randomization: str = "block",
                             ) -> PipelineResult:
    """Run every component circuit over the probe set with x-gate bias
    mitigation, aggregate into target-outcome statistics, postselect, and
    reconstruct.

    ``block`` allocates shots proportional to the component weights
    (job-level randomization); ``per_shot`` draws the component count for
    each run from the weights instead.
    """
    n = scheme.target.n_outcomes
    m = scheme.n_components
    alphas = scheme.weights * scheme.target.dim
    seq = _seed_sequence(seed)
    if randomization == "block":
        alloc = proportional_shot_allocation(alphas, cap)
    elif randomization == "per_shot":
        total = int(np.sum(proportional_shot_allocation(alphas, cap)))
        alloc = np.random.default_rng(seq.spawn(1)[0]).multinomial(total, scheme.weights)
        alloc = np.maximum(alloc, 1)
    else:
        raise ValueError(f"unknown randomization mode {randomization!r}")

    probes = probe_states()
    table = np.zeros((len(probes), n + 1))
    shots_total = 0
    children = iter(seq.spawn(2 * m * len(probes)))
    for k in range(m):
        circuit = compile_postselection_circuit(scheme.states[k])
        flipped = circuit.copy().x(0)
        shots_k = int(alloc[k])
        variants = {}
        for mask, circ in ((0, circuit), (1, flipped)):
            variants[mask] = _variant_record(circ, probes, noise, shots_k,
                                             [next(children) for _ in probes])
        mitigated = bias_mitigated_statistics(variants)
        # register outcome 0 is "+" -> parent outcome; 1 is the failure slot
        table[:, scheme.parents[k]] += shots_k * mitigated.frequencies[:, 0]
        table[:, n] += shots_k * mitigated.frequencies[:, 1]
        shots_total += 2 * shots_k * len(probes)
    table /= table.sum(axis=1, keepdims=True)
    labels = list(scheme.target.labels) + ["fail"]
    record = TomographyRecord(table, outcome_labels=labels)
    fraction = float(np.mean(table[:, n]))
    kept = record.postselected(n)
    return PipelineResult(kept, reconstruct_povm(kept),
                          postselection_fraction=fraction,
                          shots_total=shots_total)


def _embed_probe(probe: QuantumState, dilation: NaimarkDilation) -> QuantumState:
    """Join the system probe with the |0> ancilla in register ordering."""
    vector = np.zeros(dilation.ext_dim, dtype=complex)
    for j, register_index in enumerate(dilation.embedding):
        vector[register_index] = probe.vector[j]
    return QuantumState.pure(vector)


def naimark_tomography(povm: Povm, noise: NoiseModel, cap: int, seed,
                       dilation: NaimarkDilation | None = None) -> PipelineResult:
    """Run the two-qubit dilation circuit over the probe set with the four
    x-gate configurations, average, and reconstruct all register outcomes."""
    if dilation is None:
        dilation = naimark_dilation(povm, mode="qubit_register")
    circuit = compile_naimark_circuit(dilation)
    probes = [_embed_probe(p, dilation) for p in probe_states()]
    seq = _seed_sequence(seed)
    children = iter(seq.spawn(4 * len(probes)))
    variants = {}
    for mask in range(4):
        circ = circuit.copy()
        if mask & 2:
            circ.x(0)
        if mask & 1:
            circ.x(1)
        variants[mask] = _variant_record(circ, probes, noise, cap,
                                         [next(children) for _ in probes])
    mitigated = bias_mitigated_statistics(variants)
    # reorder register outcomes into logical outcome order
    perm = dilation.permutation
    table = mitigated.frequencies[:, list(perm)]
    n = povm.n_outcomes
    labels = list(povm.labels) + ["residual"] * (4 - n)
    record = TomographyRecord(table, outcome_labels=labels)
    reconstruction = reconstruct_povm(record)
    residual = float(sum(b.alpha for b in reconstruction.bloch[n:] if b is not None))
    return PipelineResult(record, reconstruction, residual_mass=residual,
                          shots_total=4 * cap * len(probes))


@dataclass
class SchemeComparison:
    d_op_postselection: float
    d_op_naimark: float
    postselection_fraction: float
    naimark_residual_mass: float
    postselection: PipelineResult
    naimark: PipelineResult


def compare_schemes(povm: Povm, noise: NoiseModel, shots: int, seed,
                    ) -> SchemeComparison:
    """Full pipeline both ways: compile, run bias-mitigated probes,
    tomograph, and score against the ideal POVM."""
    seq = _seed_sequence(seed)
    post_seed, naimark_seed = seq.spawn(2)
    scheme = postselection_scheme(povm)
    post = postselection_tomography(scheme, noise, shots, post_seed)
    nai = naimark_tomography(povm, noise, shots, naimark_seed)
    return SchemeComparison(
        d_op_postselection=operational_distance(povm, post.reconstruction),
        d_op_naimark=operational_distance(povm, nai.reconstruction),
        postselection_fraction=post.postselection_fraction,
        naimark_residual_mass=nai.residual_mass,
        postselection=post,
        naimark=nai,
    )
