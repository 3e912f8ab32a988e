"""fdtlab: a desk-scale lab for segment-focused discriminative CTC training.

The package trains tiny streaming word-piece CTC models on synthetic data,
locates word-level error regions by comparing forced alignments, and
fine-tunes with a segment-level contrastive loss over a constrained word
graph, next to N-best MMI and MWER baselines.
"""

from .baselines import (
    EditStats,
    levenshtein_wer,
    mmi_loss_grad,
    mwer_loss_grad,
)
from .config import RunConfig, SynthConfig, load_run_config
from .ctc import (
    Alignment,
    LogPosteriorGrid,
    ctc_forward_loss,
    ctc_grad_logits,
    ctc_occupancies,
    viterbi_align,
)
from .errors import ConfigError, DataError, DivergenceError, FdtLabError
from .evaluate import EntropyReport, WerReport, entropy_report, evaluate
from .fdt import (
    ErrorSegment,
    FdtResult,
    WordSegmentation,
    detect_error_segments,
    fdt_utterance_loss_grad,
    segment_by_words,
    segment_contrastive_loss_grad,
)
from .matrixio import read_matrices, write_matrices
from .nbest import Hypothesis, NBestList, nbest_posteriors, prefix_beam_search
from .synth import Dataset, generate_dataset, load_dataset
from .tokenizer import (
    BLANK_ID,
    BLANK_SYMBOL,
    Lexicon,
    PieceVocab,
    TokenizedUtterance,
    tokenize,
    words_from_pieces,
)
from .train import TrainState, finetune_stage, load_checkpoint, save_checkpoint, train_ctc_stage
from .wordgraph import (
    ConstrainedWordGraph,
    build_word_graph,
    constrained_forward_score,
    constrained_occupancies,
)

__version__ = "0.1.0"

__all__ = [
    "Alignment",
    "BLANK_ID",
    "BLANK_SYMBOL",
    "ConfigError",
    "ConstrainedWordGraph",
    "DataError",
    "Dataset",
    "DivergenceError",
    "EditStats",
    "EntropyReport",
    "ErrorSegment",
    "FdtLabError",
    "FdtResult",
    "Hypothesis",
    "Lexicon",
    "LogPosteriorGrid",
    "NBestList",
    "PieceVocab",
    "RunConfig",
    "SynthConfig",
    "TokenizedUtterance",
    "TrainState",
    "WerReport",
    "WordSegmentation",
    "build_word_graph",
    "constrained_forward_score",
    "constrained_occupancies",
    "ctc_forward_loss",
    "ctc_grad_logits",
    "ctc_occupancies",
    "detect_error_segments",
    "entropy_report",
    "evaluate",
    "fdt_utterance_loss_grad",
    "finetune_stage",
    "generate_dataset",
    "levenshtein_wer",
    "load_checkpoint",
    "load_dataset",
    "load_run_config",
    "mmi_loss_grad",
    "mwer_loss_grad",
    "nbest_posteriors",
    "prefix_beam_search",
    "read_matrices",
    "save_checkpoint",
    "segment_by_words",
    "segment_contrastive_loss_grad",
    "tokenize",
    "train_ctc_stage",
    "viterbi_align",
    "words_from_pieces",
    "write_matrices",
]
