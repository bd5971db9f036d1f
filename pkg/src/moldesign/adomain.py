"""Applicability domain: one nu-one-class SVM per GNN, majority vote.

The dual problem
    min 0.5 a' K a   s.t.  0 <= a_i <= 1/(nu m),  sum a_i = 1
is solved by pairwise coordinate updates (SMO style) on an RBF kernel.
A fingerprint is inside the domain when the ensemble vote sum is
strictly positive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class AdError(Exception):
    pass


class DegenerateData(AdError):
    pass


def rbf_kernel(a, b, gamma):
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    sq = (np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :]
          - 2.0 * a @ b.T)
    return np.exp(-gamma * np.maximum(sq, 0.0))


def scale_gamma(fingerprints):
    """sklearn-style 'scale' rule: 1 / (dim * variance of all entries)."""
    x = np.asarray(fingerprints, dtype=float)
    var = x.var()
    if var <= 0:
        raise DegenerateData("zero variance in fingerprints")
    return 1.0 / (x.shape[1] * var)


@dataclass
class OneClassSvm:
    support_vectors: np.ndarray
    alphas: np.ndarray
    rho: float
    gamma: float
    nu: float
    n_train: int

    def decision(self, x):
        """f(x) = sum_i alpha_i k(x_i, x) - rho; >= 0 means inside."""
        k = rbf_kernel(np.atleast_2d(x), self.support_vectors, self.gamma)
        vals = k @ self.alphas - self.rho
        return vals if np.ndim(x) > 1 else float(vals[0])

    def to_state(self):
        return {
            "support_vectors": self.support_vectors.tolist(),
            "alphas": self.alphas.tolist(),
            "rho": self.rho,
            "gamma": self.gamma,
            "nu": self.nu,
            "n_train": self.n_train,
        }

    @classmethod
    def from_state(cls, state):
        return cls(
            support_vectors=np.array(state["support_vectors"], dtype=float),
            alphas=np.array(state["alphas"], dtype=float),
            rho=float(state["rho"]),
            gamma=float(state["gamma"]),
            nu=float(state["nu"]),
            n_train=int(state["n_train"]),
        )


def fit_svm(fingerprints, nu=0.05, gamma="scale", tol=1e-6, max_passes=10 ** 5):
    """Fit a nu-one-class SVM on training fingerprints."""
    x = np.asarray(fingerprints, dtype=float)
    if x.ndim != 2 or len(x) < 2:
        raise AdError("need at least 2 fingerprints")
    if not (0 < nu <= 1):
        raise AdError("nu must be in (0, 1]")
    if np.allclose(x, x[0]):
        raise DegenerateData("all fingerprints identical")
    if gamma == "scale":
        gamma = scale_gamma(x)
    if gamma <= 0:
        raise AdError("gamma must be positive")

    m = len(x)
    cap = 1.0 / (nu * m)
    k = rbf_kernel(x, x, gamma)

    alpha = np.zeros(m)
    n_full = int(np.floor(nu * m))
    alpha[:n_full] = cap
    if n_full < m:
        alpha[n_full] = 1.0 - n_full * cap
    grad = k @ alpha

    eps = 1e-12
    for _ in range(max_passes):
        up = alpha < cap - eps       # can receive weight
        down = alpha > eps           # can give weight
        i = int(np.argmin(np.where(up, grad, np.inf)))
        j = int(np.argmax(np.where(down, grad, -np.inf)))
        if grad[j] - grad[i] < tol:
            break
        eta = k[i, i] + k[j, j] - 2.0 * k[i, j]
        delta = (grad[j] - grad[i]) / max(eta, eps)
        delta = min(delta, cap - alpha[i], alpha[j])
        alpha[i] += delta
        alpha[j] -= delta
        grad += delta * (k[:, i] - k[:, j])

    sv = alpha > eps
    margin = sv & (alpha < cap - eps)
    # rho sits at the inner edge of the numerical margin band so margin
    # support vectors evaluate to f >= 0; only bound SVs can fall outside
    if margin.any():
        rho = float(grad[margin].min()) - tol
    else:
        rho = float(grad[sv].mean())
    return OneClassSvm(
        support_vectors=x[sv].copy(),
        alphas=alpha[sv].copy(),
        rho=rho,
        gamma=float(gamma),
        nu=float(nu),
        n_train=m,
    )


@dataclass
class AdEnsemble:
    """One SVM per GNN ensemble member."""

    svms: list

    @property
    def n_members(self):
        return len(self.svms)

    def to_state(self):
        return {"svms": [s.to_state() for s in self.svms]}

    @classmethod
    def from_state(cls, state):
        return cls(svms=[OneClassSvm.from_state(s) for s in state["svms"]])


def ad_vote(fingerprints, ad):
    """Majority vote: (inside, vote_sum).

    fingerprints may be a single vector (evaluated by every SVM) or a
    list with one fingerprint per ensemble member.
    """
    if isinstance(fingerprints, (list, tuple)):
        if len(fingerprints) != ad.n_members:
            raise AdError("expected %d fingerprints, got %d"
                          % (ad.n_members, len(fingerprints)))
        pairs = zip(ad.svms, fingerprints)
    else:
        pairs = ((svm, fingerprints) for svm in ad.svms)
    vote_sum = 0
    for svm, h in pairs:
        vote_sum += 1 if svm.decision(np.asarray(h, dtype=float)) >= 0 else -1
    return vote_sum > 0, vote_sum


def fit_ad_ensemble(per_model_fingerprints, nu=0.05, gamma="scale"):
    """Fit one SVM per model from that model's training fingerprints."""
    svms = [fit_svm(fps, nu=nu, gamma=gamma) for fps in per_model_fingerprints]
    return AdEnsemble(svms=svms)


def grid_search_hyperparams(fingerprints, gammas, nus, plateau=0.05):
    """Sweep the (gamma, nu) grid and pick hyperparameters.

    Selection rule: with nu fixed at 0.05 (or the first grid value if
    0.05 is absent), walk gamma downward and select the smallest gamma
    whose support-vector count sits within `plateau` of the count at the
    next-smaller gamma.

    Returns (gamma, nu, table) where table rows are dicts with keys
    gamma, nu, n_support_vectors, outlier_fraction.
    """
    if not gammas or not nus:
        raise AdError("empty hyperparameter grid")
    x = np.asarray(fingerprints, dtype=float)
    resolved = [(g, scale_gamma(x) if g == "scale" else float(g)) for g in gammas]

    table = []
    for raw, gval in resolved:
        for nu in nus:
            svm = fit_svm(x, nu=nu, gamma=gval)
            outliers = int(np.sum(svm.decision(x) < 0))
            table.append({
                "gamma": gval,
                "gamma_raw": raw,
                "nu": nu,
                "n_support_vectors": len(svm.alphas),
                "outlier_fraction": outliers / len(x),
            })

    nu_sel = 0.05 if 0.05 in nus else nus[0]
    col = sorted((row for row in table if row["nu"] == nu_sel),
                 key=lambda r: -r["gamma"])
    candidates = [hi["gamma"] for hi, lo in zip(col, col[1:])
                  if abs(hi["n_support_vectors"] - lo["n_support_vectors"])
                  <= plateau * max(lo["n_support_vectors"], 1)]
    selected = min(candidates) if candidates else col[-1]["gamma"]
    return selected, nu_sel, table
