"""Scikit-learn style estimator wrapping the response-selection model.

``X`` is a sequence of DialogueExample; labels default to the ones carried by
the examples so ``fit(X)`` works without a separate ``y``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from . import model as m
from .conllu import DataError, DialogueExample


def _check_examples(X) -> list[DialogueExample]:
    examples = list(X)
    if not examples:
        raise DataError("X must contain at least one dialogue example")
    for i, ex in enumerate(examples):
        if not isinstance(ex, DialogueExample):
            raise TypeError(f"X[{i}] is {type(ex).__name__}, expected DialogueExample")
    return examples


class ResponseSelector(ClassifierMixin, BaseEstimator):
    """Binary context-response matcher with syntax-informed attention masks.

    Parameters mirror the CLI flags; ``tap_layer=None`` taps the middle
    backbone layer. ``fit`` trains from scratch with plain gradient descent.
    """

    def __init__(
        self,
        dim: int = 16,
        heads: int = 2,
        layers: int = 2,
        tap_layer: int | None = None,
        m: int = 4,
        mask_mode: str = "additive",
        special_mode: str = "open",
        use_sia: bool = True,
        max_len: int = 128,
        lr: float = 0.5,
        epochs: int = 100,
        seed: int = 0,
        neg_ratio: int = 0,
    ):
        self.dim = dim
        self.heads = heads
        self.layers = layers
        self.tap_layer = tap_layer
        self.m = m
        self.mask_mode = mask_mode
        self.special_mode = special_mode
        self.use_sia = use_sia
        self.max_len = max_len
        self.lr = lr
        self.epochs = epochs
        self.seed = seed
        self.neg_ratio = neg_ratio

    def _model_config(self) -> m.ModelConfig:
        return m.ModelConfig(
            dim=self.dim,
            heads=self.heads,
            layers=self.layers,
            tap=self.tap_layer,
            m=self.m,
            mask_mode=self.mask_mode,
            max_len=self.max_len,
            special_mode=self.special_mode,
            sia=self.use_sia,
        )

    def _train_config(self) -> m.TrainConfig:
        return m.TrainConfig(
            lr=self.lr,
            epochs=self.epochs,
            seed=self.seed,
            neg_ratio=self.neg_ratio,
            model=self._model_config(),
        )

    def fit(self, X, y=None):
        examples = _check_examples(X)
        if y is not None:
            y = list(y)
            if len(y) != len(examples):
                raise ValueError(f"y has {len(y)} labels for {len(examples)} examples")
            examples = [
                DialogueExample(context=ex.context, response=ex.response, label=int(label))
                for ex, label in zip(examples, y)
            ]
        self.params_, self.loss_curve_ = m.train(examples, self._train_config())
        self.config_ = self._model_config()
        self.classes_ = np.array([0, 1])
        return self

    def _require_fitted(self):
        if not hasattr(self, "params_"):
            raise NotFittedError("this ResponseSelector instance is not fitted yet; call fit first")

    def predict_proba(self, X) -> np.ndarray:
        self._require_fitted()
        scores = np.array([m.forward(ex, self.params_, self.config_) for ex in _check_examples(X)])
        return np.column_stack([1.0 - scores, scores])

    def decision_function(self, X) -> np.ndarray:
        self._require_fitted()
        return self.predict_proba(X)[:, 1]

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) >= 0.5).astype(int)

    def score_candidates(self, context, candidates):
        """Rank candidate responses for one context; see :func:`sia.model.score_candidates`."""
        self._require_fitted()
        return m.score_candidates(context, candidates, self.params_, self.config_)

    def evaluate(self, cases) -> dict:
        """Ranking-metrics report over EvalCase records."""
        self._require_fitted()
        return m.evaluate_cases(list(cases), self.params_, self.config_)
