"""Estimator-style wrappers.

``HCMPCController`` follows the scikit-learn conventions: constructor
arguments are stored untouched, ``fit`` runs closed loops from the rows of
``X`` and stores fitted attributes with a trailing underscore, ``predict``
returns the receding-horizon input at each row.
``SuboptimalityEstimator`` turns initial states into bound tables.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_choice, check_horizons, check_states
from .bounds import DELTA_METHODS, NU_METHODS, PROVENANCE, compute_bounds
from .closed_loop import run
from .models import make_model
from .solver import SolverOptions, solve
from .transcription import build_hcmpc


class HCMPCController(BaseEstimator):
    """Receding-horizon controller with two constraint sets.

    Parameters
    ----------
    model : str
        Builtin model identifier.
    N, Ntilde : int
        Prediction and constraint horizons.
    T : int
        Closed-loop step budget used by ``fit``.
    model_params : dict, optional
        Overrides passed to the model factory.
    kkt_tolerance : float
    """

    def __init__(self, model="scalar_test", N=4, Ntilde=2, T=200, model_params=None,
                 kkt_tolerance=1e-8):
        self.model = model
        self.N = N
        self.Ntilde = Ntilde
        self.T = T
        self.model_params = model_params
        self.kkt_tolerance = kkt_tolerance

    def _setup(self):
        model = make_model(self.model, **(self.model_params or {}))
        return model, check_horizons(self.N, self.Ntilde), SolverOptions(
            kkt_tolerance=self.kkt_tolerance)

    def fit(self, X, y=None):
        """Run one closed loop from every row of ``X``."""
        model, hp, opts = self._setup()
        X = check_states(X, model.state_dim)
        self.model_ = model
        self.horizons_ = hp
        self.options_ = opts
        self.runs_ = [run(model, hp, x, T=self.T, opts=opts) for x in X]
        self.closed_loop_costs_ = np.array([r.J_T for r in self.runs_])
        self.n_features_in_ = model.state_dim
        return self

    def predict(self, X):
        """First optimal input at each row of ``X``, shape ``(n, input_dim)``."""
        check_is_fitted(self, "model_")
        X = check_states(X, self.model_.state_dim)
        return np.array([solve(build_hcmpc(self.model_, self.horizons_, x),
                               opts=self.options_).inputs[0] for x in X])

    def value(self, X):
        """Optimal open-loop value at each row of ``X``."""
        check_is_fitted(self, "model_")
        X = check_states(X, self.model_.state_dim)
        return np.array([solve(build_hcmpc(self.model_, self.horizons_, x),
                               opts=self.options_).value for x in X])


class SuboptimalityEstimator(TransformerMixin, BaseEstimator):
    """Closed-loop cost bounds for initial states.

    ``transform`` returns one row per state with columns
    ``(V, alpha, omega, lower_bound, upper_bound, J_T)``; unavailable
    entries are ``nan``.
    """

    columns = ("V", "alpha", "omega", "lower_bound", "upper_bound", "J_T")

    def __init__(self, controller=None, delta_method="heuristic", nu_method="heuristic",
                 provenance="x0_only", baseline_lcss=False):
        self.controller = controller
        self.delta_method = delta_method
        self.nu_method = nu_method
        self.provenance = provenance
        self.baseline_lcss = baseline_lcss

    def fit(self, X=None, y=None):
        check_choice("delta_method", self.delta_method, DELTA_METHODS)
        check_choice("nu_method", self.nu_method, NU_METHODS)
        check_choice("provenance", self.provenance, PROVENANCE)
        ctrl = HCMPCController() if self.controller is None else self.controller
        self.controller_ = ctrl
        self.n_features_in_ = make_model(ctrl.model, **(ctrl.model_params or {})).state_dim
        return self

    def transform(self, X):
        check_is_fitted(self, "controller_")
        X = check_states(X, self.n_features_in_)
        ctrl = self.controller_
        model, hp, opts = ctrl._setup()
        self.reports_ = []
        out = np.full((X.shape[0], len(self.columns)), np.nan)
        for i, x in enumerate(X):
            r = run(model, hp, x, T=ctrl.T, opts=opts)
            rep = compute_bounds(r, self.delta_method, self.nu_method, self.provenance,
                                 self.baseline_lcss, opts)
            self.reports_.append(rep)
            vals = (rep.V, rep.alpha_explicit, rep.omega_explicit, rep.lower_bound,
                    rep.upper_bound, r.J_T)
            out[i] = [np.nan if v is None else v for v in vals]
        return out
