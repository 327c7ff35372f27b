"""Adversarial text generation laboratory.

Train and compare recurrent text generators under four regimes: a sigmoid
discriminator GAN, and Wasserstein critics constrained by weight clipping,
a two-sided gradient penalty, or a one-sided Lipschitz penalty; with
length-curriculum training and n-gram-overlap evaluation against a
held-out split.
"""

from . import autodiff
from .config import ConfigError, ExperimentConfig, load_config
from .corpus import (CorpusError, Pcfg, TokenizedCorpus, Vocabulary,
                     default_grammar, ingest, parse_pcfg, partition, sample_pcfg)
from .curriculum import CurriculumSchedule, Stage
from .evaluation import (EvalReport, NGramIndex, build_index, evaluate,
                         novelty_score, percent_in_test_n)
from .harness import RunRecord, compare, resume, run
from .lipschitz import (PenaltyMode, clip_weights, grad_norm, interpolate,
                        penalty_one_sided, penalty_two_sided)
from .model import Critic, Generator, SoftSequence, init_critic, init_generator
from .objectives import Adam, OptimizerConfig, TrainState, gan_losses, train_step, wgan_losses

__version__ = "0.1.0"

__all__ = [
    "autodiff",
    "ConfigError", "ExperimentConfig", "load_config",
    "CorpusError", "Pcfg", "TokenizedCorpus", "Vocabulary",
    "default_grammar", "ingest", "parse_pcfg", "partition", "sample_pcfg",
    "CurriculumSchedule", "Stage",
    "EvalReport", "NGramIndex", "build_index", "evaluate",
    "novelty_score", "percent_in_test_n",
    "RunRecord", "compare", "resume", "run",
    "PenaltyMode", "clip_weights", "grad_norm", "interpolate",
    "penalty_one_sided", "penalty_two_sided",
    "Critic", "Generator", "SoftSequence", "init_critic", "init_generator",
    "Adam", "OptimizerConfig", "TrainState", "gan_losses", "train_step", "wgan_losses",
    "__version__",
]
