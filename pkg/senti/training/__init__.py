from .adam import AdamConfig, AdamState, adam_step
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .corpus import CorpusObject, CorpusSample, SyntheticCorpusSpec, generate_corpus, load_corpus, save_corpus
from .evaluate import PolarityReport, eval_alignment, eval_hue_shift, eval_polarity
from .trainer import StepOutcome, TrainConfig, TrainRun, TrainState, train, train_step
