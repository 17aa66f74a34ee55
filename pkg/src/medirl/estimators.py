"""Scikit-learn style wrappers around the cost-map models.

ManualCostTransformer applies the handcrafted rules as a stateless
transform; MaxEntIRLEstimator learns a cost map network from
demonstrations (optionally pretrained on the manual prior) and predicts
cost maps for new occupancy grids. Both follow the fit/transform/predict
conventions, so they compose with pipelines and model selection
utilities.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .grid import DemonstrationSet
from .metrics import trajectory_nlls
from .maps import CostMap
from .network import NetConfig, forward
from .prior import ManualRules, manual_cost
from .training import TrainConfig, finetune, pretrain
from .network import init_params
from .validation import as_grid_list, check_same_shape
from .worlds import Scenario


class ManualCostTransformer(TransformerMixin, BaseEstimator):
    """Height-range threshold + obstacle dilation as a stateless transformer."""

    def __init__(
        self,
        height_range_threshold: float = 0.15,
        dilation_radius: int = 2,
        obstacle_cost: float = 0.9,
        free_cost: float = 0.1,
    ):
        self.height_range_threshold = height_range_threshold
        self.dilation_radius = dilation_radius
        self.obstacle_cost = obstacle_cost
        self.free_cost = free_cost

    def _rules(self) -> ManualRules:
        return ManualRules(
            self.height_range_threshold,
            self.dilation_radius,
            self.obstacle_cost,
            self.free_cost,
        )

    def fit(self, X, y=None):
        self._rules()  # validate parameters
        return self

    def transform(self, X) -> np.ndarray:
        rules = self._rules()
        grids = as_grid_list(X)
        check_same_shape(grids)
        return np.stack([manual_cost(g, rules).values for g in grids])


class MaxEntIRLEstimator(BaseEstimator):
    """Cost-map network fit to demonstrations by visitation matching.

    fit(X, y) takes scenarios and one demonstration set per scenario;
    predict(X) maps occupancy grids to cost maps of shape (n, H, W).
    score(X, y) returns the negative mean demonstration NLL, so larger
    is better as scikit-learn expects.
    """

    def __init__(
        self,
        pretrain: bool = True,
        pretrain_epochs: int = 60,
        finetune_epochs: int = 40,
        pretrain_lr: float = 0.05,
        finetune_lr: float = 0.01,
        l2_coeff: float = 1e-4,
        early_stop_patience: int = 5,
        val_fraction: float = 0.2,
        horizon: int = 26,
        height_range_threshold: float = 0.15,
        dilation_radius: int = 2,
        random_state: int = 0,
    ):
        self.pretrain = pretrain
        self.pretrain_epochs = pretrain_epochs
        self.finetune_epochs = finetune_epochs
        self.pretrain_lr = pretrain_lr
        self.finetune_lr = finetune_lr
        self.l2_coeff = l2_coeff
        self.early_stop_patience = early_stop_patience
        self.val_fraction = val_fraction
        self.horizon = horizon
        self.height_range_threshold = height_range_threshold
        self.dilation_radius = dilation_radius
        self.random_state = random_state

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            pretrain=self.pretrain,
            pretrain_epochs=self.pretrain_epochs,
            finetune_epochs=self.finetune_epochs,
            pretrain_lr=self.pretrain_lr,
            finetune_lr=self.finetune_lr,
            l2_coeff=self.l2_coeff,
            early_stop_patience=self.early_stop_patience,
            val_fraction=self.val_fraction,
            seed=self.random_state,
        )

    def fit(self, X, y):
        scenarios = list(X)
        demos = list(y)
        if len(scenarios) != len(demos):
            raise ValueError("need one demonstration set per scenario")
        if not scenarios:
            raise ValueError("need at least one scenario")
        for s in scenarios:
            if not isinstance(s, Scenario):
                raise TypeError("X must contain Scenario objects")
        for d in demos:
            if not isinstance(d, DemonstrationSet):
                raise TypeError("y must contain DemonstrationSet objects")
        cfg = self._train_config()
        rules = ManualRules(
            height_range_threshold=self.height_range_threshold,
            dilation_radius=self.dilation_radius,
        )
        params = init_params(cfg.seed, NetConfig())
        if cfg.pretrain:
            params, self.pretrain_report_ = pretrain(params, scenarios, cfg, rules)
        else:
            self.pretrain_report_ = None
        params, self.finetune_report_ = finetune(
            params, scenarios, demos, cfg, self.horizon
        )
        self.params_ = params
        return self

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise NotFittedError("call fit before predict/score")

    def predict(self, X) -> np.ndarray:
        self._check_fitted()
        grids = as_grid_list(X)
        check_same_shape(grids)
        return np.stack([forward(self.params_, g)[0].values for g in grids])

    def predict_cost_map(self, grid) -> CostMap:
        self._check_fitted()
        return forward(self.params_, as_grid_list(grid)[0])[0]

    def score(self, X, y) -> float:
        self._check_fitted()
        scenarios = list(X)
        demos = list(y)
        nlls = []
        for scenario, demo_set in zip(scenarios, demos):
            cost = self.predict_cost_map(scenario)
            nlls.extend(trajectory_nlls(cost, demo_set, self.horizon))
        return -float(np.mean(nlls))
