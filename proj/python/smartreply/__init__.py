"""Smart-reply suggestions over a trained run directory.

    import smartreply
    run = "run"
    smartreply.train(run, smartreply.default_config() | {...})
    models = smartreply.Models(run)
    models.suggest("want to grab lunch?", ranker="mcvae")
"""

import json
import os

from . import _core
from ._core import ContractError, lexical_clusters, mmr_rerank, model_hash, symmetric_loss, tokenize

__all__ = [
    "ContractError",
    "Models",
    "bench",
    "default_config",
    "evaluate",
    "lexical_clusters",
    "mmr_rerank",
    "model_hash",
    "symmetric_loss",
    "tokenize",
    "train",
]


def _dump(config):
    if config is None:
        return ""
    if isinstance(config, (str, os.PathLike)) and os.path.exists(config):
        with open(config) as f:
            return f.read()
    return json.dumps(config)


def default_config():
    return json.loads(_core.default_config())


def train(run, config=None, synthetic=None):
    """Runs every training stage into `run`; returns the stage reports."""
    cfg = _dump(config)
    synthetic_json = "" if synthetic is None else json.dumps(synthetic)
    os.makedirs(run, exist_ok=True)
    _core.generate_corpus(cfg, run, synthetic_json)
    reports = {"matching": json.loads(_core.train_matching(cfg, run))}
    _core.train_lm(cfg, run)
    reports["response_set_warnings"] = _core.build_response_set(cfg, run)
    reports["cvae"] = json.loads(_core.train_cvae(cfg, run))
    return reports


def evaluate(run, config=None, rankers="matching-nolc,matching,mmr,mcvae"):
    return json.loads(_core.evaluate(_dump(config), run, rankers))


def bench(run, config=None, queries=1000, warmup=100):
    return json.loads(_core.bench(_dump(config), run, queries, warmup))


class Models:
    """Loaded models of one run; safe to share across threads."""

    def __init__(self, run):
        self._m = _core.Models(run)

    def suggest(self, message, ranker="mcvae", **params):
        return json.loads(self._m.suggest(message, ranker, json.dumps(params) if params else ""))

    def encode(self, message):
        return self._m.encode(message)

    @property
    def responses(self):
        return self._m.responses

    @property
    def has_cvae(self):
        return self._m.has_cvae

    @property
    def texts(self):
        return self._m.texts

    @property
    def warnings(self):
        return self._m.warnings
