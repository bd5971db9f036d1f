"""Message-passing GNN ensemble for RON/MON/DCN prediction.

Each model stacks graph-convolution layers
    h_v' = ReLU(h_v W1 + sum_{u in N(v)} h_u W2),
sum-pools the final node states into a molecular fingerprint, and feeds
the fingerprint through a small MLP with three output heads. Training is
full-batch Adam on a masked MSE (missing labels contribute nothing);
all gradients are analytic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import molgraph

TASKS = ("ron", "mon", "dcn")


class GnnError(Exception):
    pass


class DimensionMismatch(GnnError):
    pass


class EmptyEnsemble(GnnError):
    pass


class EmptyDataset(GnnError):
    pass


class NonFiniteLoss(GnnError):
    def __init__(self, epoch):
        super().__init__("training loss became non-finite at epoch %d" % epoch)
        self.epoch = epoch


@dataclass(frozen=True)
class PropertyPrediction:
    ron: float
    mon: float
    dcn: float

    @property
    def os(self):
        return self.ron - self.mon

    @property
    def score(self):
        """Design objective RON + OS = 2 RON - MON."""
        return 2.0 * self.ron - self.mon


@dataclass
class GnnConfig:
    in_dim: int = 4
    hidden_dim: int = 32
    fp_dim: int = 32
    n_layers: int = 3
    mlp_hidden: int = 16
    n_tasks: int = 3


class GNN:
    """One message-passing model. Weights live in a flat dict of arrays."""

    def __init__(self, config=None, seed=0):
        self.config = config or GnnConfig()
        self.seed = seed
        rng = np.random.default_rng(seed)
        c = self.config
        dims = [c.in_dim] + [c.hidden_dim] * (c.n_layers - 1) + [c.fp_dim]
        self.params = {}
        for l in range(c.n_layers):
            self.params["W1_%d" % l] = _uniform_init(rng, dims[l], dims[l + 1])
            self.params["W2_%d" % l] = _uniform_init(rng, dims[l], dims[l + 1])
        self.params["M1"] = _uniform_init(rng, c.fp_dim, c.mlp_hidden)
        # small positive bias keeps fresh hidden units off the ReLU kink
        self.params["b1"] = np.full(c.mlp_hidden, 0.1)
        self.params["M2"] = _uniform_init(rng, c.mlp_hidden, c.n_tasks)
        self.params["b2"] = np.zeros(c.n_tasks)

    def _forward_cache(self, g):
        feats = molgraph.atom_features(g)
        if feats.shape[1] != self.config.in_dim:
            raise DimensionMismatch("feature dim %d != in_dim %d"
                                    % (feats.shape[1], self.config.in_dim))
        adj = np.zeros((g.n_atoms, g.n_atoms))
        for u, v, _ in g.bonds:
            adj[u, v] = 1.0
            adj[v, u] = 1.0
        cache = {"A": adj, "H": [feats], "Z": []}
        h = feats
        for l in range(self.config.n_layers):
            z = h @ self.params["W1_%d" % l] + adj @ h @ self.params["W2_%d" % l]
            h = np.maximum(z, 0.0)
            cache["Z"].append(z)
            cache["H"].append(h)
        fp = h.sum(axis=0)
        a1 = fp @ self.params["M1"] + self.params["b1"]
        h1 = np.maximum(a1, 0.0)
        out = h1 @ self.params["M2"] + self.params["b2"]
        cache.update(fp=fp, a1=a1, h1=h1, out=out)
        return cache

    def forward(self, g):
        """Returns (fingerprint, raw prediction vector [ron, mon, dcn])."""
        cache = self._forward_cache(g)
        return cache["fp"], cache["out"]

    def predict(self, g):
        _, out = self.forward(g)
        return PropertyPrediction(float(out[0]), float(out[1]), float(out[2]))

    def fingerprint(self, g):
        return self.forward(g)[0]

    def loss_and_grad(self, graphs, labels, mask):
        """Masked MSE over all present labels, plus parameter gradients.

        labels, mask: arrays of shape (n_samples, n_tasks); masked-out
        entries contribute zero loss and zero gradient.
        """
        labels = np.asarray(labels, dtype=float)
        mask = np.asarray(mask, dtype=float)
        n_present = mask.sum()
        if n_present == 0:
            raise EmptyDataset("no labels present")
        grads = {k: np.zeros_like(v) for k, v in self.params.items()}
        total = 0.0
        for g, y, m in zip(graphs, labels, mask):
            cache = self._forward_cache(g)
            diff = (cache["out"] - np.where(m > 0, y, 0.0)) * m
            total += float(diff @ diff)
            dout = 2.0 * diff / n_present
            self._backward(cache, dout, grads)
        return total / n_present, grads

    def _backward(self, cache, dout, grads):
        grads["b2"] += dout
        grads["M2"] += np.outer(cache["h1"], dout)
        dh1 = self.params["M2"] @ dout
        da1 = dh1 * (cache["a1"] > 0)
        grads["b1"] += da1
        grads["M1"] += np.outer(cache["fp"], da1)
        dfp = self.params["M1"] @ da1
        dh = np.tile(dfp, (cache["A"].shape[0], 1))
        for l in reversed(range(self.config.n_layers)):
            dz = dh * (cache["Z"][l] > 0)
            h_prev = cache["H"][l]
            grads["W1_%d" % l] += h_prev.T @ dz
            grads["W2_%d" % l] += (cache["A"] @ h_prev).T @ dz
            dh = dz @ self.params["W1_%d" % l].T \
                + cache["A"].T @ dz @ self.params["W2_%d" % l].T

    def to_state(self):
        return {
            "config": vars(self.config).copy(),
            "seed": self.seed,
            "params": {k: v.tolist() for k, v in self.params.items()},
        }

    @classmethod
    def from_state(cls, state):
        model = cls.__new__(cls)
        model.config = GnnConfig(**state["config"])
        model.seed = state["seed"]
        model.params = {k: np.array(v, dtype=float)
                        for k, v in state["params"].items()}
        return model


def _uniform_init(rng, fan_in, fan_out):
    limit = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class GnnEnsemble:
    """K independently seeded models; predictions are averaged."""

    def __init__(self, n_models=40, config=None, seed=0):
        if n_models < 1:
            raise EmptyEnsemble("ensemble needs at least one model")
        self.seed = seed
        self.models = [GNN(config, seed=seed + i) for i in range(n_models)]

    @property
    def n_models(self):
        return len(self.models)

    def predict(self, g):
        outs = np.array([m.forward(g)[1] for m in self.models])
        mean = outs.mean(axis=0)
        return PropertyPrediction(float(mean[0]), float(mean[1]), float(mean[2]))

    def fingerprints(self, g):
        """Per-model fingerprints, in model order."""
        return [m.fingerprint(g) for m in self.models]

    def to_state(self):
        return {"seed": self.seed, "models": [m.to_state() for m in self.models]}

    @classmethod
    def from_state(cls, state):
        ens = cls.__new__(cls)
        ens.seed = state["seed"]
        ens.models = [GNN.from_state(s) for s in state["models"]]
        if not ens.models:
            raise EmptyEnsemble("checkpoint holds no models")
        return ens


@dataclass
class TrainConfig:
    epochs: int = 500
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    bootstrap: bool = True
    normalize_labels: bool = True
    batch_size: int = 32        # None = full batch
    cosine_decay: bool = True   # anneal the step size to 0 over the run


def _prepare_data(data):
    graphs, labels, mask = [], [], []
    for g, lab in data:
        row = [lab.get(t) for t in TASKS]
        if all(v is None for v in row):
            raise EmptyDataset("sample without any label")
        graphs.append(g)
        labels.append([0.0 if v is None else float(v) for v in row])
        mask.append([0.0 if v is None else 1.0 for v in row])
    if not graphs:
        raise EmptyDataset("empty training set")
    return graphs, np.array(labels), np.array(mask)


def train_model(model, data, cfg=None):
    """Full-batch Adam on the masked MSE. Returns the loss history.

    Labels are standardized per task during optimization; the affine
    transform is folded back into the output layer afterwards, so the
    trained model predicts in raw units.
    """
    cfg = cfg or TrainConfig()
    graphs, labels, mask = _prepare_data(data)
    shift = np.zeros(labels.shape[1])
    scale = np.ones(labels.shape[1])
    if cfg.normalize_labels:
        for t in range(labels.shape[1]):
            present = mask[:, t] > 0
            if present.any():
                shift[t] = labels[present, t].mean()
                std = labels[present, t].std()
                scale[t] = std if std > 1e-8 else 1.0
        labels = (labels - shift) / scale
    m_state = {k: np.zeros_like(v) for k, v in model.params.items()}
    v_state = {k: np.zeros_like(v) for k, v in model.params.items()}
    history = []
    n = len(graphs)
    bs = n if cfg.batch_size is None else min(cfg.batch_size, n)
    shuffle_rng = np.random.default_rng(model.seed + 10 ** 6)
    step = 0
    total_steps = cfg.epochs * ((n + bs - 1) // bs)
    for epoch in range(1, cfg.epochs + 1):
        order = shuffle_rng.permutation(n) if bs < n else np.arange(n)
        epoch_loss = 0.0
        for lo in range(0, n, bs):
            idx = order[lo:lo + bs]
            loss, grads = model.loss_and_grad(
                [graphs[i] for i in idx], labels[idx], mask[idx])
            if not np.isfinite(loss):
                raise NonFiniteLoss(epoch)
            epoch_loss += loss * mask[idx].sum()
            step += 1
            lr = cfg.learning_rate
            if cfg.cosine_decay:
                lr *= 0.5 * (1.0 + np.cos(np.pi * (step - 1) / total_steps))
            for k in model.params:
                m_state[k] = cfg.adam_beta1 * m_state[k] \
                    + (1 - cfg.adam_beta1) * grads[k]
                v_state[k] = cfg.adam_beta2 * v_state[k] \
                    + (1 - cfg.adam_beta2) * grads[k] ** 2
                m_hat = m_state[k] / (1 - cfg.adam_beta1 ** step)
                v_hat = v_state[k] / (1 - cfg.adam_beta2 ** step)
                model.params[k] -= lr * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
        history.append(epoch_loss / mask.sum())
    if cfg.normalize_labels:
        model.params["M2"] = model.params["M2"] * scale[None, :]
        model.params["b2"] = model.params["b2"] * scale + shift
    return history


def train_ensemble(data, ensemble, cfg=None):
    """Train each member on its own bootstrap resample.

    Returns per-model loss histories.
    """
    cfg = cfg or TrainConfig()
    if not data:
        raise EmptyDataset("empty training set")
    histories = []
    n = len(data)
    for i, model in enumerate(ensemble.models):
        if cfg.bootstrap and n > 1:
            rng = np.random.default_rng(model.seed)
            idx = rng.integers(0, n, size=n)
            sample = [data[j] for j in idx]
        else:
            sample = list(data)
        histories.append(train_model(model, sample, cfg))
    return histories


def gradient_check(model, g, labels=None, step=1e-5):
    """Max relative error of analytic vs central finite-difference grads."""
    if labels is None:
        labels = np.ones(model.config.n_tasks)
    labels = np.asarray(labels, dtype=float)
    mask = np.ones_like(labels)
    _, grads = model.loss_and_grad([g], [labels], [mask])

    def loss_only():
        return model.loss_and_grad([g], [labels], [mask])[0]

    worst = 0.0
    for k, w in model.params.items():
        flat = w.reshape(-1)
        gflat = grads[k].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = loss_only()
            flat[i] = orig - step
            down = loss_only()
            flat[i] = orig
            numeric = (up - down) / (2 * step)
            denom = max(abs(gflat[i]), abs(numeric), 1e-6)
            worst = max(worst, abs(gflat[i] - numeric) / denom)
    return worst
