import numpy as np
import pytest

from moldesign import molgraph
from moldesign.grammar import (
    DecodeTimeout,
    FragmentGrammar,
    NotExpressible,
    TooLarge,
    decode,
    encode,
    enumerate_grammar,
)
from moldesign.molgraph import canonical_smiles, is_isomorphic, parse_smiles, validate


@pytest.fixture(scope="module")
def small():
    return FragmentGrammar(n_dims=4)


@pytest.fixture(scope="module")
def unit_bounds():
    return np.zeros(4), np.ones(4)


class TestDecode:
    def test_lower_bound_is_methane(self, small, unit_bounds):
        g = decode(np.zeros(4), small, unit_bounds)
        assert canonical_smiles(g) == "C"

    def test_same_cell_same_molecule(self, small, unit_bounds):
        from moldesign.grammar import _cell_center, _cells

        rng = np.random.default_rng(7)
        for _ in range(50):
            z = rng.uniform(0, 1, 4)
            center = _cell_center(_cells(z, small, unit_bounds), small,
                                  unit_bounds)
            a = decode(z, small, unit_bounds)
            b = decode(center, small, unit_bounds)
            assert canonical_smiles(a) == canonical_smiles(b)

    def test_total_on_adversarial_inputs(self, small, unit_bounds):
        rng = np.random.default_rng(3)
        vectors = [rng.uniform(-100, 100, 4) for _ in range(500)]
        vectors += [np.full(4, 1e300), np.full(4, -1e300), np.zeros(4),
                    np.ones(4), np.array([np.inf, -np.inf, 0.5, 0.5])]
        for z in vectors:
            g = decode(z, small, unit_bounds)
            assert validate(g) == molgraph.OK

    def test_deterministic(self, small, unit_bounds):
        z = np.array([0.9, 0.4, 0.7, 0.2])
        a = decode(z, small, unit_bounds)
        b = decode(z, small, unit_bounds)
        assert a == b

    def test_heavy_atom_cap(self, small, unit_bounds):
        rng = np.random.default_rng(11)
        for _ in range(200):
            g = decode(rng.uniform(0, 1, 4), small, unit_bounds)
            assert g.n_atoms <= small.max_heavy_atoms

    def test_timeout_signal(self, small, unit_bounds):
        with pytest.raises(DecodeTimeout):
            decode(np.zeros(4), small, unit_bounds, timeout_s=-1.0)


class TestEncode:
    def test_methane_is_cell_zero_center(self, small, unit_bounds):
        z = encode(parse_smiles("C"), small, unit_bounds)
        # slot 0: first of 6 scaffold cells; others: stop cell of 10
        assert z[0] == pytest.approx(0.5 / 6)
        assert np.allclose(z[1:], 0.05)

    def test_decode_encode_decode_idempotent(self, small, unit_bounds):
        rng = np.random.default_rng(5)
        for _ in range(200):
            z = rng.uniform(-0.5, 1.5, 4)
            g = decode(z, small, unit_bounds)
            z2 = encode(g, small, unit_bounds)
            assert is_isomorphic(decode(z2, small, unit_bounds), g)

    def test_too_big_not_expressible(self, small, unit_bounds):
        ten = parse_smiles("CCCCCCCCCC")
        with pytest.raises(NotExpressible):
            encode(ten, small, unit_bounds)

    def test_foreign_structure_not_expressible(self, small, unit_bounds):
        # 4-membered ring: no scaffold or fragment builds one
        ring4 = parse_smiles("C1CCC1")
        with pytest.raises(NotExpressible):
            encode(ring4, small, unit_bounds)


class TestEnumerate:
    def test_single_scaffold_stop_only(self):
        g = FragmentGrammar(n_dims=1, fragments=(), scaffolds=("C",))
        mols = enumerate_grammar(g)
        assert list(mols) == ["C"]

    def test_default_small_grammar(self, small):
        mols = enumerate_grammar(small)
        assert len(mols) > 100
        for g in mols.values():
            assert validate(g) == molgraph.OK
            assert g.n_atoms <= small.max_heavy_atoms

    def test_matches_grid_oracle(self, small, unit_bounds):
        # every molecule reachable by decode appears in the enumeration
        mols = set(enumerate_grammar(small))
        grid = np.linspace(0.0, 1.0, 10)
        seen = set()
        for z0 in grid:
            for z1 in grid:
                for z2 in grid:
                    for z3 in grid:
                        g = decode(np.array([z0, z1, z2, z3]), small,
                                   unit_bounds)
                        seen.add(canonical_smiles(g))
        assert seen <= mols

    def test_too_large(self):
        g = FragmentGrammar(n_dims=32)
        with pytest.raises(TooLarge):
            enumerate_grammar(g)

    def test_every_enumerated_molecule_encodes(self, small, unit_bounds):
        mols = enumerate_grammar(small)
        for smi, g in list(mols.items())[::7]:
            z = encode(g, small, unit_bounds)
            assert canonical_smiles(decode(z, small, unit_bounds)) == smi


class TestConfig:
    def test_round_trip(self, tmp_path, small):
        path = tmp_path / "grammar.json"
        small.save(path)
        loaded = FragmentGrammar.load(path)
        assert loaded == small
