"""Walk through the molecular representation layer.

Parses a few SMILES strings, shows canonical forms and graph validation,
then enumerates everything a small fragment grammar can build and maps a
couple of molecules back and forth through the latent box.
"""

import numpy as np

from moldesign import molgraph
from moldesign.grammar import FragmentGrammar, decode, encode, enumerate_grammar
from moldesign.molgraph import canonical_smiles, parse_smiles, validate

SMILES = [
    "CC",
    "C1CC1",
    "COC(C)(C)C",       # MTBE
    "CC(C)(C)C=O",
    "OCC",              # same molecule as CCO, written backwards
    "CCO",
]


def show_parsing():
    print("=== parsing and canonicalization ===")
    for s in SMILES:
        g = parse_smiles(s)
        verdict = validate(g)
        print("%-14s -> %-12s atoms=%d rings=%d verdict=%s"
              % (s, canonical_smiles(g), g.n_atoms, g.n_rings, verdict))
    a = parse_smiles("OCC")
    b = parse_smiles("CCO")
    print("OCC and CCO agree:", canonical_smiles(a) == canonical_smiles(b))
    print()


def show_grammar():
    print("=== fragment grammar ===")
    grammar = FragmentGrammar(n_dims=4)
    mols = enumerate_grammar(grammar)
    print("a 4-slot grammar expresses %d distinct molecules" % len(mols))
    sizes = [g.n_atoms for g in mols.values()]
    print("heavy-atom counts: min=%d max=%d mean=%.2f"
          % (min(sizes), max(sizes), np.mean(sizes)))

    bounds = (np.zeros(4), np.ones(4))
    print("\nlatent round trips:")
    for s in ["C", "CCO", "COC(C)(C)C"]:
        g = parse_smiles(s)
        z = encode(g, grammar, bounds)
        back = canonical_smiles(decode(z, grammar, bounds))
        print("  %-12s z=%s -> %s" % (s, np.round(z, 3), back))

    print("\nevery latent point decodes to something valid:")
    rng = np.random.default_rng(0)
    for z in rng.uniform(-2, 3, size=(3, 4)):
        g = decode(z, grammar, bounds)
        assert validate(g) == molgraph.OK
        print("  z=%s -> %s" % (np.round(z, 2), canonical_smiles(g)))


if __name__ == "__main__":
    show_parsing()
    show_grammar()
