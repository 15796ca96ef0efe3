"""Input validation helpers for the estimator interface."""

from __future__ import annotations

import numpy as np
from sklearn.utils import check_array

from .errors import InvalidArgument
from .transcription import HorizonPair


def check_states(X, state_dim):
    """2-D float array of states with ``state_dim`` columns.

    A 1-D input of length ``state_dim`` is read as one state.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1) if X.size == state_dim or state_dim != 1 else X.reshape(-1, 1)
    X = check_array(X, dtype=float, ensure_2d=True)
    if X.shape[1] != state_dim:
        raise InvalidArgument(f"expected {state_dim} state columns, got {X.shape[1]}")
    return X


def check_horizons(N, Ntilde):
    return HorizonPair(N, Ntilde)


def check_choice(name, value, choices):
    if value not in choices:
        raise InvalidArgument(f"{name} must be one of {tuple(choices)}, got {value!r}")
    return value
