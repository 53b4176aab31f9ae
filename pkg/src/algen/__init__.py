"""algen: active-learning-guided LLM data generation.

Clusters an unlabeled text pool, selects per-cluster maximum-entropy
instances for human labeling, expands each label into template-driven LLM
variations, retrains a probabilistic learner, and iterates under a labeling
budget. Ships four acquisition strategies (random, top-N entropy, greedy
k-center coreset, cluster-guided), distributional-bias metrics, a resumable
orchestrator, an annotation HTTP service, and a CLI.
"""

from .corpus import Instance, Pool, SplitSet, Taxonomy, default_taxonomy, dedup_key, load_jsonl, save_jsonl
from .featurize import FeatureVector, Vocabulary
from .generate import LlmConfig, Template, default_template
from .learner import NativeLearner, NativeLearnerParams, RemoteConfig, RemoteLearner, fit_native
from .orchestrate import (
    RunConfig,
    RunState,
    ScriptedAnnotator,
    checkpoint,
    init_run,
    resume,
    run_iteration,
    run_until_budget,
)
from .strategy import Selection, entropy, select_cluster_al, select_coreset, select_random, select_topn

__version__ = "0.1.0"

__all__ = [
    "Instance",
    "Pool",
    "SplitSet",
    "Taxonomy",
    "default_taxonomy",
    "dedup_key",
    "load_jsonl",
    "save_jsonl",
    "FeatureVector",
    "Vocabulary",
    "LlmConfig",
    "Template",
    "default_template",
    "NativeLearner",
    "NativeLearnerParams",
    "RemoteConfig",
    "RemoteLearner",
    "fit_native",
    "RunConfig",
    "RunState",
    "ScriptedAnnotator",
    "checkpoint",
    "init_run",
    "resume",
    "run_iteration",
    "run_until_budget",
    "Selection",
    "entropy",
    "select_cluster_al",
    "select_coreset",
    "select_random",
    "select_topn",
    "__version__",
]
