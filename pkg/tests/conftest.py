"""Session-scoped trained artifacts shared across test modules.

Training is the expensive part of this suite, so the two model bundles are
built exactly once per session: `pipeline` is the real desk-scale recipe used
by quality and acceptance tests, `mini_pipeline` is a deliberately tiny, fast
bundle for contract tests that only need structurally valid outputs.
"""

import time

import pytest

from camtraj.gpt import GptConfig, GptTrainConfig, train_pipeline
from camtraj.tokenizer import TokenizerConfig

_train_seconds = {}


@pytest.fixture(scope="session")
def pipeline():
    """Tokenizer + two-stage LM trained with the pinned recipe (a few minutes)."""
    t0 = time.monotonic()
    tok, model = train_pipeline(seed=0)
    _train_seconds["pipeline"] = time.monotonic() - t0
    return tok, model


@pytest.fixture(scope="session")
def pipeline_train_seconds(pipeline):
    """Wall-clock cost of building the `pipeline` fixture (budget assertions)."""
    return _train_seconds["pipeline"]


@pytest.fixture(scope="session")
def mini_pipeline():
    """Small/fast bundle; output quality is poor but all contracts hold."""
    tok, model = train_pipeline(
        seed=0,
        tokenizer_config=TokenizerConfig(
            hidden=16, latent_dim=32, codebook_size=64, steps=60, lr=1e-3, data_init=True
        ),
        gpt_config=GptConfig(layers=2, model_dim=32, heads=2),
        stage1=GptTrainConfig(steps=80, lr=1e-3, mixture=(0.15, 0.15, 0.55, 0.15)),
        stage2=GptTrainConfig(steps=30, lr=5e-4),
    )
    return tok, model
