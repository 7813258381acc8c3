"""Bundled measurement fixtures: ideal qubit POVMs and their tomographic
reconstructions, shipped as JSON documents in the exchange format.

The ideal tetrahedral and trine measurements are stored at full double
precision.  The "random4" measurement and all reconstructions are known only
to three decimal digits; the ideal random4 is therefore repaired on load to
the nearest exact rank-one POVM (see :func:`repair_rank_one_povm`), which
moves its entries by less than 1e-3.
"""

from __future__ import annotations

import json
from importlib import resources

import numpy as np

from .core import Povm, matrix_from_lists, povm_from_document

IDEAL_NAMES = ("tetrahedral", "trine", "random4", "trivial")
RECONSTRUCTION_METHODS = ("postselection", "naimark")

#: (fixture name, method) -> file stem of the reconstruction document
_RECONSTRUCTION_FILES = {
    (name, method): f"{name}_{method}"
    for name in ("tetrahedral", "trine", "random4")
    for method in RECONSTRUCTION_METHODS
}


def _load_document(stem: str) -> dict:
    path = resources.files("povmsim").joinpath("fixtures", f"{stem}.json")
    return json.loads(path.read_text())


def repair_rank_one_povm(effects, atol: float = 2e-3) -> Povm:
    """Nearest exact rank-one POVM to a list of rounded rank-one effects.

    Each effect is replaced by its dominant rank-one part a|v><v| (the
    discarded eigenvalue must be below ``atol``), and the collection is then
    rebalanced as B^{-1/2} M_i B^{-1/2} with B the sum of the parts, which
    restores exact completeness while keeping every effect rank one.
    """
    parts = []
    for i, m in enumerate(effects):
        m = np.asarray(m, dtype=complex)
        w, v = np.linalg.eigh((m + m.conj().T) / 2)
        if abs(w[:-1]).max(initial=0.0) > atol:
            raise ValueError(f"effect {i} is not rank-one within {atol:.1e}")
        parts.append(w[-1] * np.outer(v[:, -1], v[:, -1].conj()))
    total = sum(parts)
    w, v = np.linalg.eigh(total)
    if w[0] <= 0:
        raise ValueError("effects do not span the space; cannot rebalance")
    inv_sqrt = (v * w ** -0.5) @ v.conj().T
    return Povm([inv_sqrt @ p @ inv_sqrt for p in parts])


def ideal_povm(name: str) -> Povm:
    """One of the bundled ideal POVMs, exactly valid at default tolerance."""
    if name not in IDEAL_NAMES:
        raise KeyError(f"unknown fixture {name!r}; available: {', '.join(IDEAL_NAMES)}")
    doc = _load_document(name)
    if name == "random4":
        effects = [matrix_from_lists(e) for e in doc["effects"]]
        return repair_rank_one_povm(effects)
    return povm_from_document(doc)


def reconstruction(name: str, method: str) -> tuple[np.ndarray, ...]:
    """Reconstructed effects for a fixture, as raw matrices.

    These are three-digit roundings of experimental reconstructions and are
    not exactly complete or positive, so they are returned unvalidated.
    """
    if method not in RECONSTRUCTION_METHODS:
        raise KeyError(f"unknown method {method!r}; available: {', '.join(RECONSTRUCTION_METHODS)}")
    key = (name, method)
    if key not in _RECONSTRUCTION_FILES:
        raise KeyError(f"no reconstruction fixture for {name!r}")
    doc = _load_document(_RECONSTRUCTION_FILES[key])
    return tuple(matrix_from_lists(e) for e in doc["effects"])


def fixture_names() -> tuple[str, ...]:
    return IDEAL_NAMES


def tetrahedral_states() -> np.ndarray:
    """The four pure states whose half-projectors form the tetrahedral POVM."""
    s2 = np.sqrt(2)
    w = np.exp(2j * np.pi / 3)
    return np.array([
        [1, 0],
        [1 / np.sqrt(3), s2 / np.sqrt(3)],
        [1 / np.sqrt(3), s2 * w / np.sqrt(3)],
        [1 / np.sqrt(3), s2 * w.conjugate() / np.sqrt(3)],
    ], dtype=complex)


def trine_states() -> np.ndarray:
    """The three pure states whose (2/3)-projectors form the trine POVM."""
    out = []
    for m in ideal_povm("trine").effects:
        w, v = np.linalg.eigh(m)
        out.append(v[:, -1])
    return np.array(out)
