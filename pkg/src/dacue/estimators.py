"""scikit-learn compatible wrappers.

:class:`CueSelector` is a supervised transformer: ``fit`` ranks, filters
and cuts off candidate phrases, ``transform`` turns utterances into a sparse
phrase-presence matrix. :class:`TBLTagger` is a classifier over dialogues;
its ``fit`` optionally runs a selector to pick its phrase features.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin, clone
from sklearn.utils.validation import check_is_fitted

from ._validation import as_corpus, check_corpus, check_utterances
from .counts import build_table, extract_phrases, ngrams, phrase_str
from .filter import FilterMode, lexical_filter
from .metrics import MetricId, cutoff, rank_phrases
from .tbl import DEFAULT_TEMPLATES, apply_rules, train

__all__ = ["CueSelector", "TBLTagger"]


class CueSelector(TransformerMixin, BaseEstimator):
    """Select dialogue act cue phrases.

    Parameters
    ----------
    metric : str
        Ranking metric (``cooc``, ``cp``, ``ent``, ``ttest``, ``mi``, ``s``,
        ``ig``, ``d``, ``dcp``).
    filter : str
        ``none``, ``basic`` or ``modified`` lexical filter.
    cutoff : float
        Percentage of the full candidate set to keep, in (0, 100].
    max_len : int
        Longest candidate n-gram.
    """

    def __init__(self, metric="dcp", filter="modified", cutoff=5.0, max_len=3):
        self.metric = metric
        self.filter = filter
        self.cutoff = cutoff
        self.max_len = max_len

    def fit(self, X, y=None):
        tokens, acts = check_utterances(X, y)
        if acts is None:
            raise ValueError("CueSelector needs dialogue act labels")
        metric = MetricId.parse(self.metric)
        mode = FilterMode.parse(self.filter)
        corpus = as_corpus(tokens, acts)
        candidates = extract_phrases(corpus, self.max_len)
        self.table_ = build_table(corpus, candidates)
        self.n_candidates_ = len(candidates)
        self.ranking_ = lexical_filter(rank_phrases(self.table_, None, metric), mode)
        self.selected_ = cutoff(self.ranking_, self.cutoff, total=self.n_candidates_)
        self.phrases_ = [r.phrase for r in self.selected_]
        self.vocabulary_ = {p: j for j, p in enumerate(self.phrases_)}
        return self

    def transform(self, X):
        check_is_fitted(self, "vocabulary_")
        tokens, _ = check_utterances(X)
        lengths = sorted({len(p) for p in self.phrases_})
        rows, cols = [], []
        for i, toks in enumerate(tokens):
            present = set()
            for n in lengths:
                present |= ngrams(toks, n, n)
            for j in sorted(self.vocabulary_[p] for p in present if p in self.vocabulary_):
                rows.append(i)
                cols.append(j)
        data = np.ones(len(rows), dtype=np.int8)
        return sp.csr_matrix((data, (rows, cols)), shape=(len(tokens), len(self.phrases_)))

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "phrases_")
        return np.array([phrase_str(p) for p in self.phrases_], dtype=object)


class TBLTagger(ClassifierMixin, BaseEstimator):
    """Transformation-based dialogue act tagger.

    ``X`` is a :class:`~dacue.corpus.Corpus` (or a sequence of dialogues);
    the previous-tag and change-of-speaker features need dialogue order.
    Phrase features come from ``phrases`` if given, else from ``selector``
    fitted on the training utterances, else from every candidate n-gram.
    """

    def __init__(
        self,
        selector=None,
        phrases=None,
        threshold=2,
        templates=DEFAULT_TEMPLATES,
        update="sequential",
        max_len=3,
    ):
        self.selector = selector
        self.phrases = phrases
        self.threshold = threshold
        self.templates = templates
        self.update = update
        self.max_len = max_len

    def fit(self, X, y=None):
        corpus = check_corpus(X, y)
        if self.phrases is not None:
            phrase_set = {tuple(p.split()) if isinstance(p, str) else tuple(p) for p in self.phrases}
        elif self.selector is not None:
            self.selector_ = clone(self.selector).fit(corpus)
            phrase_set = set(self.selector_.phrases_)
        else:
            phrase_set = extract_phrases(corpus, self.max_len)
        self.model_ = train(corpus, phrase_set, self.templates, self.threshold, self.update)
        self.classes_ = np.array(self.model_.acts, dtype=object)
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        return np.array(apply_rules(self.model_, check_corpus(X)), dtype=object)

    def score(self, X, y=None, sample_weight=None):
        """Accuracy against ``y``, or against the corpus' own gold acts."""
        if y is None:
            y = check_corpus(X).gold()
        return super().score(X, y, sample_weight)
