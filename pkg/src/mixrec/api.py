"""Estimator-style front end.

`SupportRecovery` wraps the recovery pipelines behind the scikit-learn
interface: parameters in ``__init__``, ``fit(X, y)`` on raw samples, fitted
attributes with trailing underscores, and a ``transform`` that restricts
features to the recovered union of support (the natural feature-selection
reading of support recovery).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import classifier_mixtures as mlc
from . import regression_mixtures as mlr
from .errors import MixrecError
from .moment_mixtures import MomentFamily
from .pipeline import (
    MdSource,
    MlcSource,
    MlrBinarySource,
    MlrGeneralSource,
    MlrThresholdSource,
    RunConfig,
    run_exact,
    run_maximal,
)


class SupportRecovery(TransformerMixin, BaseEstimator):
    """Recover the supports of the hidden sparse vectors behind a mixture.

    Parameters mirror the model assumptions: `model` picks the observation
    model ('md' needs only X; 'mlr'/'mlc' need X and y), `ell` the number of
    hidden vectors, and `delta`/`R`/`sigma` the magnitude floor, norm bound
    and noise level.  After `fit`, `supports_` holds (support, multiplicity)
    pairs in exact mode and `maximal_` the maximal antichain in maximal mode;
    `union_` always holds the recovered union of support (1-based).
    """

    def __init__(
        self,
        model: str = "md",
        mode: str = "exact",
        ell: int = 2,
        k: int | None = None,
        delta: float = 1.0,
        R: float = 1.0,
        sigma: float = 1.0,
        family: str = "gaussian",
        upper: float = 1.0,
        binary: bool = False,
        sign_regime: str = "nonneg",
        Delta: float = 0.5,
        alpha_kind: str = "nonneg",
        alpha_values: tuple | None = None,
        gamma: float = 0.05,
        seed: int = 0,
    ):
        self.model = model
        self.mode = mode
        self.ell = ell
        self.k = k
        self.delta = delta
        self.R = R
        self.sigma = sigma
        self.family = family
        self.upper = upper
        self.binary = binary
        self.sign_regime = sign_regime
        self.Delta = Delta
        self.alpha_kind = alpha_kind
        self.alpha_values = alpha_values
        self.gamma = gamma
        self.seed = seed

    def _build_source(self, x, y):
        cfg = RunConfig(m=x.shape[0], gamma=self.gamma, seed=self.seed)
        n = x.shape[1]
        k = self.k if self.k is not None else n
        if self.model == "md":
            fam = MomentFamily(name=self.family, sigma=self.sigma, upper=self.upper)
            return MdSource(x, fam, self.ell, self.delta, cfg, n, k, mode=self.mode)
        if y is None:
            raise MixrecError(f"model {self.model!r} needs responses y")
        if self.model == "mlr":
            if self.mode == "maximal":
                alphas = mlr.alpha_schedule(
                    self.alpha_kind,
                    self.ell,
                    delta=self.delta,
                    explicit=self.alpha_values,
                    k=k,
                )
                return MlrThresholdSource(x, y, self.ell, alphas, cfg)
            if self.binary:
                return MlrBinarySource(x, y, self.ell, cfg, n, k, mode=self.mode)
            params = {"delta": self.delta, "R": self.R, "Delta": self.Delta, "sigma": self.sigma}
            return MlrGeneralSource(x, y, params, cfg, n, self.ell, k)
        if self.model == "mlc":
            a = mlc.conditioning_threshold(self.R, self.sigma, self.delta, self.ell)
            x2, y2 = mlc.negate_if_nonpositive(x, y, self.sign_regime)
            return MlcSource(x2, y2, self.ell, a, cfg, n, k, instance=None, mode=self.mode)
        raise MixrecError(f"unknown model {self.model!r}")

    def fit(self, X, y=None):
        x = check_array(X, dtype=float)
        if y is not None:
            y = np.asarray(y).ravel()
            if y.shape[0] != x.shape[0]:
                raise ValueError("X and y disagree on the sample count")
        source = self._build_source(x, y)
        runner = run_exact if self.mode == "exact" else run_maximal
        report = runner(source, self.ell, x.shape[1], seed=self.seed, model=self.model)
        self.n_features_in_ = x.shape[1]
        self.report_ = report
        self.union_ = tuple(report.union)
        if self.mode == "exact":
            self.supports_ = [(frozenset(s), w) for s, w in report.recovered]
        else:
            self.maximal_ = {frozenset(s) for s in report.recovered}
        return self

    def get_support(self, indices: bool = False):
        check_is_fitted(self, "union_")
        if indices:
            return np.array([i - 1 for i in self.union_], dtype=int)
        mask = np.zeros(self.n_features_in_, dtype=bool)
        for i in self.union_:
            mask[i - 1] = True
        return mask

    def transform(self, X):
        check_is_fitted(self, "union_")
        x = check_array(X, dtype=float)
        if x.shape[1] != self.n_features_in_:
            raise ValueError("feature count changed between fit and transform")
        return x[:, self.get_support(indices=True)]
