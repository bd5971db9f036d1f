import numpy as np
import pytest

from moldesign import gnn
from moldesign.gnn import (
    GNN,
    DimensionMismatch,
    EmptyDataset,
    GnnConfig,
    GnnEnsemble,
    PropertyPrediction,
    TrainConfig,
    gradient_check,
    train_ensemble,
    train_model,
)
from moldesign.molgraph import parse_smiles

SMALL = GnnConfig(hidden_dim=8, fp_dim=8, mlp_hidden=4)

MOLECULES = ["C", "CC", "CCO", "COC(C)(C)C", "C1CC1", "CC(C)(C)C=O"]


class TestForward:
    def test_zero_weights_give_bias_image(self):
        model = GNN(SMALL, seed=0)
        for k in model.params:
            model.params[k] = np.zeros_like(model.params[k])
        model.params["b2"] = np.array([1.0, 2.0, 3.0])
        fp, out = model.forward(parse_smiles("CCO"))
        assert np.all(fp == 0.0)
        assert out.tolist() == [1.0, 2.0, 3.0]

    def test_single_atom_no_neighbors(self):
        cfg = GnnConfig(hidden_dim=4, fp_dim=4, n_layers=1, mlp_hidden=4)
        model = GNN(cfg, seed=0)
        model.params["W1_0"] = np.eye(4)
        model.params["W2_0"] = np.zeros((4, 4))
        fp, _ = model.forward(parse_smiles("C"))
        # methane features: [1, 0, 4 H, 0 degree], ReLU is identity here
        assert fp.tolist() == [1.0, 0.0, 4.0, 0.0]

    def test_permutation_invariance(self):
        model = GNN(SMALL, seed=1)
        rng = np.random.default_rng(2)
        for smiles in MOLECULES:
            g = parse_smiles(smiles)
            fp, out = model.forward(g)
            for _ in range(50):
                perm = list(rng.permutation(g.n_atoms))
                fp2, out2 = model.forward(g.permuted(perm))
                assert np.max(np.abs(fp - fp2)) < 1e-9
                assert np.max(np.abs(out - out2)) < 1e-9

    def test_os_identity(self):
        model = GNN(SMALL, seed=3)
        pred = model.predict(parse_smiles("CCO"))
        assert pred.os == pred.ron - pred.mon
        assert pred.score == 2 * pred.ron - pred.mon

    def test_dimension_mismatch(self):
        model = GNN(GnnConfig(in_dim=7), seed=0)
        with pytest.raises(DimensionMismatch):
            model.forward(parse_smiles("CC"))


class TestEnsemble:
    def test_k1_equals_single_model(self):
        ens = GnnEnsemble(n_models=1, config=SMALL, seed=5)
        g = parse_smiles("COC(C)(C)C")
        single = ens.models[0].predict(g)
        mean = ens.predict(g)
        assert mean == single

    def test_mean_is_arithmetic(self):
        ens = GnnEnsemble(n_models=2, config=SMALL, seed=0)
        g = parse_smiles("CC")

        class Fixed:
            def __init__(self, vals):
                self.vals = np.array(vals)

            def forward(self, _):
                return None, self.vals

        ens.models = [Fixed([100.0, 90.0, 50.0]), Fixed([110.0, 100.0, 60.0])]
        pred = ens.predict(g)
        assert (pred.ron, pred.mon, pred.dcn) == (105.0, 95.0, 55.0)
        assert pred.os == 10.0

    def test_mean_bounded_by_members(self):
        ens = GnnEnsemble(n_models=5, config=SMALL, seed=9)
        for smiles in MOLECULES:
            g = parse_smiles(smiles)
            outs = np.array([m.forward(g)[1] for m in ens.models])
            mean = ens.predict(g)
            for i, v in enumerate((mean.ron, mean.mon, mean.dcn)):
                assert outs[:, i].min() <= v <= outs[:, i].max()

    def test_empty_ensemble(self):
        with pytest.raises(gnn.EmptyEnsemble):
            GnnEnsemble(n_models=0)


class TestTraining:
    def test_memorize_single_molecule(self):
        model = GNN(SMALL, seed=0)
        data = [(parse_smiles("CCO"), {"ron": 100.0, "mon": None, "dcn": None})]
        hist = train_model(model, data, TrainConfig(epochs=400,
                                                    learning_rate=1e-2))
        assert hist[-1] < 1e-4

    def test_synthetic_labels(self):
        mols = [parse_smiles(s) for s in
                ["C", "CC", "CCC", "CCO", "COC", "C1CC1", "C1CCCC1", "CC=O",
                 "CCCO", "COC(C)C", "CC(C)C", "OCCO", "C1CC1C", "CCCC",
                 "CC(C)(C)C", "C1CCCCC1", "OC1CC1", "CC(C)O", "CCOC", "CC(C)=O"]]
        data = [(g, {"ron": 10.0 * g.count("O") + 2.0 * g.n_rings,
                     "mon": None, "dcn": None}) for g in mols]
        model = GNN(seed=1)
        train_model(model, data, TrainConfig(epochs=400, learning_rate=4e-3))
        mae = np.mean([abs(model.predict(g).ron - y["ron"])
                       for g, y in data])
        assert mae < 0.5

    def test_masked_task_gets_zero_gradient(self):
        model = GNN(SMALL, seed=2)
        g = parse_smiles("CC")
        # RON label only: columns of M2/b2 for MON and DCN see no gradient
        _, grads = model.loss_and_grad(
            [g], [[100.0, 0.0, 0.0]], [[1.0, 0.0, 0.0]])
        assert np.all(grads["M2"][:, 1:] == 0.0)
        assert np.all(grads["b2"][1:] == 0.0)

    def test_empty_dataset(self):
        model = GNN(SMALL, seed=0)
        with pytest.raises(EmptyDataset):
            train_model(model, [], TrainConfig(epochs=1))

    def test_deterministic_training(self):
        data = [(parse_smiles(s), {"ron": float(i), "mon": None, "dcn": None})
                for i, s in enumerate(MOLECULES)]
        weights = []
        for _ in range(2):
            ens = GnnEnsemble(n_models=2, config=SMALL, seed=42)
            train_ensemble(data, ens, TrainConfig(epochs=20))
            weights.append(ens.to_state())
        assert weights[0] == weights[1]

    def test_bootstrap_differs_across_members(self):
        data = [(parse_smiles(s), {"ron": float(i), "mon": None, "dcn": None})
                for i, s in enumerate(MOLECULES)]
        ens = GnnEnsemble(n_models=2, config=SMALL, seed=0)
        train_ensemble(data, ens, TrainConfig(epochs=5))
        w0 = ens.models[0].params["M2"]
        w1 = ens.models[1].params["M2"]
        assert not np.allclose(w0, w1)


class TestGradients:
    def test_random_model_mtbe(self):
        model = GNN(SMALL, seed=7)
        err = gradient_check(model, parse_smiles("COC(C)(C)C"))
        assert err < 1e-4

    def test_full_size_model(self):
        model = GNN(seed=11)
        err = gradient_check(model, parse_smiles("CC(C)(C)C=O"))
        assert err < 1e-4

    def test_dead_relu_path(self):
        model = GNN(SMALL, seed=0)
        # force the first hidden unit dead: large negative bias via weights
        model.params["M1"][:, 0] = -100.0
        g = parse_smiles("CC")
        _, grads = model.loss_and_grad(
            [g], [np.ones(3)], [np.ones(3)])
        # dead unit: gradient through M1 column 0 is exactly zero
        assert np.all(grads["M1"][:, 0] == 0.0)


class TestCheckpoint:
    def test_state_round_trip_bit_exact(self):
        ens = GnnEnsemble(n_models=3, config=SMALL, seed=13)
        state = ens.to_state()
        clone = GnnEnsemble.from_state(state)
        g = parse_smiles("CCOC(C)(C)C")
        assert clone.predict(g) == ens.predict(g)
        for a, b in zip(ens.models, clone.models):
            for k in a.params:
                assert np.array_equal(a.params[k], b.params[k])
