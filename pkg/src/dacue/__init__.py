"""Automatic selection of dialogue act cue phrases, and a
transformation-based dialogue act tagger that uses them."""

from .corpus import ClusterLexicon, Corpus, CorpusError, Utterance, parse_corpus, read_corpus, split_corpus, tokenize
from .counts import PhraseTable, build_table, contains, extract_phrases
from .estimators import CueSelector, TBLTagger
from .evaluation import ExperimentResult, accuracy, gen_synthetic, run_sweep, welch_t_test
from .filter import FilterMode, lexical_filter, proper_subphrases
from .metrics import MetricId, RankedPhrase, cutoff, rank_phrases, score_phrase, selected_act
from .tbl import TaggerModel, TransformationRule, apply_rules, train

__version__ = "0.1.0"

__all__ = [
    "ClusterLexicon",
    "Corpus",
    "CorpusError",
    "CueSelector",
    "ExperimentResult",
    "FilterMode",
    "MetricId",
    "PhraseTable",
    "RankedPhrase",
    "TBLTagger",
    "TaggerModel",
    "TransformationRule",
    "Utterance",
    "accuracy",
    "apply_rules",
    "build_table",
    "contains",
    "cutoff",
    "extract_phrases",
    "gen_synthetic",
    "lexical_filter",
    "parse_corpus",
    "proper_subphrases",
    "rank_phrases",
    "read_corpus",
    "run_sweep",
    "score_phrase",
    "selected_act",
    "split_corpus",
    "tokenize",
    "train",
    "welch_t_test",
]
