"""Deterministic latent-vector <-> molecule mapping via a fragment grammar.

Each latent coordinate is one decision slot. Slot 0 picks a scaffold;
every later slot either attaches a fragment at a deterministic site or
stops. Coordinates are clamped into the search box and thresholded into
equal-width cells, so the decoder is total, piecewise constant, and has
an exact inverse on expressible molecules.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .molgraph import MAX_VALENCE, MolecularGraph, canonical_smiles

DEFAULT_FRAGMENTS = (
    "methyl",
    "ethyl",
    "hydroxyl",
    "methoxy",
    "carbonyl",
    "formyl",
    "tert_butyl",
    "cyclopropyl",
    "phenyl",
)

DEFAULT_SCAFFOLDS = ("C", "CC", "CO", "ring3", "ring5", "ring6")


class GrammarError(Exception):
    pass


class NotExpressible(GrammarError):
    pass


class TooLarge(GrammarError):
    pass


class DecodeTimeout(GrammarError):
    pass


@dataclass(frozen=True)
class FragmentGrammar:
    """Fragment/scaffold libraries plus the latent slot layout."""

    n_dims: int = 32
    fragments: tuple = DEFAULT_FRAGMENTS
    scaffolds: tuple = DEFAULT_SCAFFOLDS
    max_heavy_atoms: int = 9

    def __post_init__(self):
        if self.n_dims < 1:
            raise GrammarError("need at least one decision slot")
        for f in self.fragments:
            if f not in _FRAGMENT_BUILDERS:
                raise GrammarError("unknown fragment %r" % f)
        for s in self.scaffolds:
            if s not in _SCAFFOLD_BUILDERS:
                raise GrammarError("unknown scaffold %r" % s)

    @property
    def choices_per_slot(self):
        out = [len(self.scaffolds)]
        out.extend([len(self.fragments) + 1] * (self.n_dims - 1))
        return out

    def decision_space_size(self):
        size = 1
        for c in self.choices_per_slot:
            size *= c
        return size

    def to_config(self):
        return {
            "schema_version": 1,
            "n_dims": self.n_dims,
            "fragments": list(self.fragments),
            "scaffolds": list(self.scaffolds),
            "max_heavy_atoms": self.max_heavy_atoms,
        }

    @classmethod
    def from_config(cls, cfg):
        return cls(
            n_dims=int(cfg["n_dims"]),
            fragments=tuple(cfg["fragments"]),
            scaffolds=tuple(cfg["scaffolds"]),
            max_heavy_atoms=int(cfg.get("max_heavy_atoms", 9)),
        )

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_config(), f, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_config(json.load(f))


# --- scaffold and fragment construction ------------------------------------

def _ring(k):
    atoms = ["C"] * k
    bonds = [(i, (i + 1) % k, 1) for i in range(k)]
    return atoms, bonds


_SCAFFOLD_BUILDERS = {
    "C": lambda: (["C"], []),
    "CC": lambda: (["C", "C"], [(0, 1, 1)]),
    "CO": lambda: (["C", "O"], [(0, 1, 1)]),
    "ring3": lambda: _ring(3),
    "ring5": lambda: _ring(5),
    "ring6": lambda: _ring(6),
}

# (new atoms, internal bonds among new atoms, anchor local index,
#  bond order to site, required site element or None, heavy atoms added)
_FRAGMENT_BUILDERS = {
    "methyl": (["C"], [], 0, 1, None),
    "ethyl": (["C", "C"], [(0, 1, 1)], 0, 1, None),
    "hydroxyl": (["O"], [], 0, 1, "C"),
    "methoxy": (["O", "C"], [(0, 1, 1)], 0, 1, "C"),
    "carbonyl": (["O"], [], 0, 2, "C"),
    "formyl": (["C", "O"], [(0, 1, 2)], 0, 1, None),
    "tert_butyl": (["C", "C", "C", "C"],
                   [(0, 1, 1), (0, 2, 1), (0, 3, 1)], 0, 1, None),
    "cyclopropyl": (["C", "C", "C"],
                    [(0, 1, 1), (0, 2, 1), (1, 2, 1)], 0, 1, None),
    "phenyl": (["C"] * 6,
               [(0, 1, 2), (1, 2, 1), (2, 3, 2), (3, 4, 1), (4, 5, 2),
                (5, 0, 1)], 0, 1, None),
}


def _free_valence(atoms, bond_sums, i):
    return MAX_VALENCE[atoms[i]] - bond_sums[i]


def _attach(atoms, bonds, bond_sums, fragment, max_heavy):
    """Attach a fragment at the lowest-index legal site.

    Returns updated (atoms, bonds, bond_sums) lists or None if no site is
    legal or the heavy-atom cap would be exceeded.
    """
    frag_atoms, frag_bonds, anchor, order, site_elem = _FRAGMENT_BUILDERS[fragment]
    if len(atoms) + len(frag_atoms) > max_heavy:
        return None
    site = None
    for i in range(len(atoms)):
        if site_elem is not None and atoms[i] != site_elem:
            continue
        if frag_atoms[anchor] == "O" and atoms[i] == "O":
            continue  # no O-O bonds
        if _free_valence(atoms, bond_sums, i) >= order:
            site = i
            break
    if site is None:
        return None
    base = len(atoms)
    atoms = atoms + frag_atoms
    sums = bond_sums + [0] * len(frag_atoms)
    bonds = list(bonds)
    for a, b, o in frag_bonds:
        bonds.append((base + a, base + b, o))
        sums[base + a] += o
        sums[base + b] += o
    bonds.append((site, base + anchor, order))
    sums[site] += order
    sums[base + anchor] += order
    return atoms, bonds, sums


def _build(grammar, choices):
    """Replay a decision sequence; illegal attachments act as stop."""
    atoms, bonds = _SCAFFOLD_BUILDERS[grammar.scaffolds[choices[0]]]()
    atoms = list(atoms)
    bonds = list(bonds)
    sums = [0] * len(atoms)
    for u, v, o in bonds:
        sums[u] += o
        sums[v] += o
    for c in choices[1:]:
        if c == 0:
            break
        result = _attach(atoms, bonds, sums, grammar.fragments[c - 1],
                         grammar.max_heavy_atoms)
        if result is None:
            break
        atoms, bonds, sums = result
    return MolecularGraph(atoms, bonds)


# --- latent-space cell arithmetic -------------------------------------------

def _as_box(bounds, n):
    lo, hi = np.asarray(bounds[0], dtype=float), np.asarray(bounds[1], dtype=float)
    if lo.shape == ():
        lo = np.full(n, float(lo))
    if hi.shape == ():
        hi = np.full(n, float(hi))
    if lo.shape != (n,) or hi.shape != (n,):
        raise GrammarError("bounds do not match latent dimension %d" % n)
    return lo, hi


def _cells(z, grammar, bounds):
    lo, hi = _as_box(bounds, grammar.n_dims)
    z = np.nan_to_num(np.asarray(z, dtype=float), nan=0.0)
    z = np.clip(z, lo, hi)
    cells = []
    for i, k in enumerate(grammar.choices_per_slot):
        width = hi[i] - lo[i]
        if width <= 0:
            cells.append(0)
            continue
        c = int((z[i] - lo[i]) / width * k)
        cells.append(min(max(c, 0), k - 1))
    return cells


def _cell_center(choices, grammar, bounds):
    lo, hi = _as_box(bounds, grammar.n_dims)
    z = np.empty(grammar.n_dims)
    for i, k in enumerate(grammar.choices_per_slot):
        c = choices[i] if i < len(choices) else 0
        z[i] = lo[i] + (c + 0.5) * (hi[i] - lo[i]) / k
    return z


def decode(z, grammar, bounds, timeout_s=None):
    """Map a latent vector to a molecular graph. Total and deterministic."""
    deadline = None if timeout_s is None else time.monotonic() + timeout_s
    cells = _cells(z, grammar, bounds)
    if deadline is not None and time.monotonic() > deadline:
        raise DecodeTimeout("decode exceeded %.3f s" % timeout_s)
    return _build(grammar, cells)


def encode(g, grammar, bounds):
    """Inverse of decode on expressible molecules.

    Returns the center of the cell of the lexicographically smallest
    decision sequence producing a graph isomorphic to g.
    """
    target = canonical_smiles(g)
    t_atoms = sorted(g.atoms)
    t_rings = g.n_rings
    n_frag_slots = grammar.n_dims - 1

    def compatible(atoms, bonds):
        if len(atoms) > len(t_atoms):
            return False
        if sum(1 for a in atoms if a == "C") > t_atoms.count("C"):
            return False
        if sum(1 for a in atoms if a == "O") > t_atoms.count("O"):
            return False
        if len(bonds) - len(atoms) + 1 > t_rings:
            return False
        return True

    for s in range(len(grammar.scaffolds)):
        atoms, bonds = _SCAFFOLD_BUILDERS[grammar.scaffolds[s]]()
        atoms = list(atoms)
        bonds = list(bonds)
        sums = [0] * len(atoms)
        for u, v, o in bonds:
            sums[u] += o
            sums[v] += o
        if not compatible(atoms, bonds):
            continue
        seq = _search(grammar, target, compatible, atoms, bonds, sums,
                      n_frag_slots)
        if seq is not None:
            return _cell_center([s] + seq, grammar, bounds)
    raise NotExpressible("no decision sequence produces %s" % target)


def _search(grammar, target, compatible, atoms, bonds, sums, slots_left):
    """DFS over fragment choices in lexicographic order; returns the
    fragment-choice suffix (including trailing stop cell) or None."""
    if canonical_smiles(MolecularGraph(atoms, bonds)) == target:
        return [0] if slots_left > 0 else []
    if slots_left == 0:
        return None
    for c in range(1, len(grammar.fragments) + 1):
        result = _attach(atoms, bonds, sums, grammar.fragments[c - 1],
                         grammar.max_heavy_atoms)
        if result is None:
            continue
        na, nb, ns = result
        if not compatible(na, nb):
            continue
        tail = _search(grammar, target, compatible, na, nb, ns, slots_left - 1)
        if tail is not None:
            return [c] + tail
    return None


def enumerate_grammar(grammar, max_decision_space=10 ** 6):
    """All distinct molecules the grammar can produce, sorted by SMILES.

    Returns a dict canonical SMILES -> MolecularGraph.
    """
    if grammar.decision_space_size() > max_decision_space:
        raise TooLarge("decision space %d exceeds cap %d"
                       % (grammar.decision_space_size(), max_decision_space))
    found = {}
    seen_states = set()

    def walk(atoms, bonds, sums, slots_left):
        state = (tuple(atoms), tuple(sorted(bonds)), slots_left)
        if state in seen_states:
            return
        seen_states.add(state)
        g = MolecularGraph(atoms, bonds)
        smi = canonical_smiles(g)
        if smi not in found:
            found[smi] = g
        if slots_left == 0:
            return
        for frag in grammar.fragments:
            result = _attach(atoms, bonds, sums, frag, grammar.max_heavy_atoms)
            if result is not None:
                walk(*result, slots_left - 1)

    for s in grammar.scaffolds:
        atoms, bonds = _SCAFFOLD_BUILDERS[s]()
        atoms = list(atoms)
        bonds = list(bonds)
        sums = [0] * len(atoms)
        for u, v, o in bonds:
            sums[u] += o
            sums[v] += o
        walk(atoms, bonds, sums, grammar.n_dims - 1)

    return dict(sorted(found.items()))
