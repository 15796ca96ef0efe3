import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from hcmpc.estimators import HCMPCController, SuboptimalityEstimator


def test_controller_fit_predict():
    c = HCMPCController(N=2, Ntilde=2, T=20).fit([0.4, 0.0])
    assert c.closed_loop_costs_.shape == (2,)
    assert c.closed_loop_costs_[1] == 0.0
    u = c.predict([[0.4]])
    assert u.shape == (1, 1)
    assert u[0, 0] == pytest.approx(-0.1, abs=1e-8)
    assert c.value([0.4])[0] == pytest.approx(0.18, abs=1e-10)


def test_controller_params_and_clone():
    c = HCMPCController(N=5, Ntilde=3, model_params={"a": 0.9})
    assert c.get_params()["model_params"] == {"a": 0.9}
    c2 = clone(c)
    assert c2.get_params() == c.get_params()
    with pytest.raises(NotFittedError):
        c2.predict([0.1])


def test_controller_rejects_bad_input():
    with pytest.raises(ValueError):
        HCMPCController(N=3, Ntilde=5).fit([0.1])
    with pytest.raises(ValueError):
        HCMPCController().fit(np.zeros((2, 3)))


def test_transformer():
    est = SuboptimalityEstimator(HCMPCController(model_params={"a": 1.2, "x2_bound": 2.0},
                                                 N=5, Ntilde=3, T=60))
    Z = est.fit_transform(np.array([[0.4], [-0.3]]))
    assert Z.shape == (2, len(est.columns))
    assert len(est.reports_) == 2
    V, J = Z[:, 0], Z[:, 5]
    assert np.all(V > 0) and np.all(J > 0)


def test_transformer_validates_choices():
    with pytest.raises(ValueError):
        SuboptimalityEstimator(provenance="all").fit()
