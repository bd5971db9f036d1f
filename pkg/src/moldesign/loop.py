"""The design loop: optimizer -> decode -> AD gate -> predict -> score.

Candidates outside the applicability domain (or failing to decode in
time) receive the penalty score. Duplicates are scored and logged but do
not count toward the unique-molecule budget. The objective is
RON + OS = 2 RON - MON.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import grammar as grammar_mod
from . import optimizers
from .adomain import ad_vote
from .grammar import DecodeTimeout, NotExpressible, decode, encode
from .molgraph import canonical_smiles

PENALTY = -1000.0


class LoopError(Exception):
    pass


class ConfigError(LoopError):
    pass


class NoExpressibleMolecules(LoopError):
    pass


@dataclass
class RunConfig:
    method: str = "ga"                  # "bo" or "ga"
    seed: int = 0
    max_unique: int = 1000
    max_total: int = 2000
    time_limit_s: float = None
    bound_expansion: float = 0.2
    decode_timeout_s: float = 10.0
    penalty: float = PENALTY
    ad_enabled: bool = True
    pca_target_ratio: float = 0.999
    use_pca: bool = None                # default: PCA for BO only
    bo_init: int = 10
    bo_batch: int = 10
    ga: optimizers.GaConfig = field(default_factory=optimizers.GaConfig)

    def __post_init__(self):
        if self.method not in ("bo", "ga"):
            raise ConfigError("method must be 'bo' or 'ga'")
        if self.max_unique is not None and self.max_unique <= 0:
            raise ConfigError("max_unique must be positive")
        if self.max_total is not None and self.max_total <= 0:
            raise ConfigError("max_total must be positive")
        if self.time_limit_s is not None and self.time_limit_s <= 0:
            raise ConfigError("time limit must be positive")
        if self.bound_expansion < 0:
            raise ConfigError("bound expansion must be >= 0")

    def to_dict(self):
        d = vars(self).copy()
        d["ga"] = vars(self.ga).copy()
        return d


@dataclass
class RunRecord:
    index: int
    latent_full: list
    latent_reduced: list
    smiles: str
    ron: float
    mon: float
    dcn: float
    os: float
    score: float
    in_ad: bool
    vote_sum: int
    duplicate: bool
    penalty_applied: bool
    wall_time: float

    def to_json_dict(self):
        # wall_time is timing metadata and stays out of the record file
        # so that replays are byte-identical
        d = {k: v for k, v in vars(self).items() if k != "wall_time"}
        return d


def bounds_from_corpus(corpus, grammar, expansion=0.2):
    """Per-dimension [min, max] over encoded corpus latents, expanded."""
    lo0 = np.full(grammar.n_dims, 0.0)
    hi0 = np.full(grammar.n_dims, 1.0)
    encoded = []
    for g in corpus:
        try:
            encoded.append(encode(g, grammar, (lo0, hi0)))
        except NotExpressible:
            continue
    if not encoded:
        raise NoExpressibleMolecules("no corpus molecule is expressible")
    pts = np.array(encoded)
    return expand_bounds(pts.min(axis=0), pts.max(axis=0), expansion)


def expand_bounds(lo, hi, expansion):
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    span = hi - lo
    out_lo = np.where(span > 0, lo - expansion * span, lo - 0.5)
    out_hi = np.where(span > 0, hi + expansion * span, hi + 0.5)
    return out_lo, out_hi


class EvaluationContext:
    """Shared state for scoring candidates within one run."""

    def __init__(self, grammar, bounds, ensemble, ad=None, ad_enabled=True,
                 penalty=PENALTY, decode_timeout_s=10.0, pca=None):
        if ad_enabled and ad is None:
            raise ConfigError("AD enabled but no AD ensemble given")
        self.grammar = grammar
        self.bounds = bounds
        self.ensemble = ensemble
        self.ad = ad
        self.ad_enabled = ad_enabled
        self.penalty = penalty
        self.decode_timeout_s = decode_timeout_s
        self.pca = pca
        self.seen = set()      # unique-budget set: non-penalized molecules
        self.observed = set()  # every decoded molecule, for duplicate flags
        self.records = []

    @property
    def n_unique(self):
        return len(self.seen)

    @property
    def n_total(self):
        return len(self.records)


def evaluate_candidate(z, ctx):
    """Decode, gate through the AD, predict, and score one latent point."""
    z = np.asarray(z, dtype=float)
    if ctx.pca is not None:
        z_reduced = z
        z_full = ctx.pca.lift(z)
    else:
        z_reduced = None
        z_full = z
    t0 = time.monotonic()
    index = len(ctx.records)

    def finish(smiles, pred, in_ad, vote_sum, duplicate, penalized):
        score = ctx.penalty if penalized else pred.score
        rec = RunRecord(
            index=index,
            latent_full=[float(v) for v in z_full],
            latent_reduced=None if z_reduced is None
            else [float(v) for v in z_reduced],
            smiles=smiles,
            ron=None if penalized else float(pred.ron),
            mon=None if penalized else float(pred.mon),
            dcn=None if penalized else float(pred.dcn),
            os=None if penalized else float(pred.os),
            score=float(score),
            in_ad=in_ad,
            vote_sum=vote_sum,
            duplicate=duplicate,
            penalty_applied=penalized,
            wall_time=time.monotonic() - t0,
        )
        ctx.records.append(rec)
        return rec

    try:
        g = decode(z_full, ctx.grammar, ctx.bounds,
                   timeout_s=ctx.decode_timeout_s)
    except DecodeTimeout:
        return finish(None, None, None, None, False, True)

    smiles = canonical_smiles(g)
    duplicate = smiles in ctx.observed
    ctx.observed.add(smiles)

    in_ad, vote_sum = None, None
    if ctx.ad_enabled:
        in_ad, vote_sum = ad_vote(ctx.ensemble.fingerprints(g), ctx.ad)
        if not in_ad:
            rec = finish(smiles, None, in_ad, vote_sum, duplicate, True)
            return rec

    ctx.seen.add(smiles)
    pred = ctx.ensemble.predict(g)
    return finish(smiles, pred, in_ad, vote_sum, duplicate, False)


def run(config, grammar, ensemble, ad=None, corpus=None, bounds=None):
    """Execute one design-loop run. Returns (records, summary)."""
    if bounds is None:
        if not corpus:
            raise ConfigError("need either explicit bounds or a corpus")
        bounds = bounds_from_corpus(corpus, grammar, config.bound_expansion)
    lo, hi = bounds

    pca = None
    search_bounds = (lo, hi)
    n_dims = grammar.n_dims
    use_pca = config.use_pca if config.use_pca is not None \
        else config.method == "bo"
    if use_pca:
        if not corpus:
            raise ConfigError("PCA pre-reduction needs a corpus")
        latents = []
        for g in corpus:
            try:
                latents.append(encode(g, grammar, (lo, hi)))
            except NotExpressible:
                continue
        if len(latents) < 2:
            raise NoExpressibleMolecules("not enough expressible molecules "
                                         "for PCA")
        pca = optimizers.pca_fit(latents, config.pca_target_ratio)
        reduced = pca.project(np.array(latents))
        search_bounds = expand_bounds(reduced.min(axis=0),
                                      reduced.max(axis=0),
                                      config.bound_expansion)
        n_dims = pca.r

    ctx = EvaluationContext(
        grammar, (lo, hi), ensemble, ad=ad, ad_enabled=config.ad_enabled,
        penalty=config.penalty, decode_timeout_s=config.decode_timeout_s,
        pca=pca,
    )

    start = time.monotonic()

    def stop(_n_evals):
        if config.max_total is not None and ctx.n_total >= config.max_total:
            return True
        if config.max_unique is not None and ctx.n_unique >= config.max_unique:
            return True
        if config.time_limit_s is not None \
                and time.monotonic() - start > config.time_limit_s:
            return True
        return False

    def objective(z):
        return evaluate_candidate(z, ctx).score

    if config.method == "ga":
        optimizers.run_ga(objective, search_bounds, n_dims, stop,
                          seed=config.seed, cfg=config.ga)
    else:
        optimizers.run_bo(objective, search_bounds, n_dims, stop,
                          seed=config.seed, n_init=config.bo_init,
                          batch_size=config.bo_batch,
                          penalty_threshold=config.penalty + 0.5)

    return ctx.records, summarize(ctx.records)


def summarize(records):
    """Table-style run statistics.

    Penalized records are excluded; max and mean-top-20 are over the best
    score per distinct molecule.
    """
    if not records:
        raise LoopError("no records to summarize")
    best_per_mol = {}
    preds = {}
    for rec in records:
        if rec.penalty_applied or rec.smiles is None:
            continue
        if rec.smiles not in best_per_mol or rec.score > best_per_mol[rec.smiles]:
            best_per_mol[rec.smiles] = rec.score
            preds[rec.smiles] = (rec.ron, rec.os)
    n_penalized = sum(1 for r in records if r.penalty_applied)
    if not best_per_mol:
        return {
            "empty": True,
            "n_total": len(records),
            "n_penalized": n_penalized,
            "n_unique": 0,
            "n_promising": 0,
            "max_score": None,
            "mean_top20": None,
        }
    scores = sorted(best_per_mol.values(), reverse=True)
    top = scores[:20]
    promising = sum(1 for ron, os_ in preds.values()
                    if ron is not None and os_ is not None
                    and ron > 110 and os_ > 10)
    return {
        "empty": False,
        "n_total": len(records),
        "n_penalized": n_penalized,
        "n_unique": len(best_per_mol),
        "n_promising": promising,
        "max_score": scores[0],
        "mean_top20": sum(top) / len(top),
    }


def write_records(path, records):
    with open(path, "w") as f:
        for rec in records:
            f.write(json.dumps(rec.to_json_dict(), sort_keys=True))
            f.write("\n")


def read_records(path):
    out = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                d = json.loads(line)
                d["wall_time"] = None
                out.append(RunRecord(**d))
    return out
