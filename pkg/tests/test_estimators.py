import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from brennan.autfit import sample_disk
from brennan.estimators import DiskAutomorphismRegressor, SchwarzChristoffelTransformer
from brennan.moebius import DiskAutomorphism

from conftest import regular_polygon


def test_transformer_round_trip():
    est = SchwarzChristoffelTransformer(center=0).fit(regular_polygon(6, 2.0))
    z = sample_disk(50, 0, 0.8)
    w = est.transform(z)
    np.testing.assert_allclose(est.inverse_transform(w), z, atol=1e-8)
    pairs = np.c_[z.real, z.imag]
    out = est.transform(pairs)
    assert out.shape == (50, 2)
    np.testing.assert_allclose(out[:, 0] + 1j * out[:, 1], w, atol=1e-14)


def test_transformer_not_fitted():
    with pytest.raises(NotFittedError):
        SchwarzChristoffelTransformer().transform(np.zeros(3, dtype=complex))
    with pytest.raises(ValueError):
        SchwarzChristoffelTransformer().fit(np.zeros((3, 3)))


def test_regressor_fit_predict_score():
    aut = DiskAutomorphism(np.exp(1.3j), -0.2 + 0.4j)
    z = sample_disk(100, 1, 0.9)
    reg = DiskAutomorphismRegressor().fit(z, aut(z))
    assert abs(reg.lambda_ - aut.lam) < 1e-9 and abs(reg.a_ - aut.a) < 1e-9
    assert reg.score(z, aut(z)) == pytest.approx(1.0, abs=1e-12)
    X = np.c_[z.real, z.imag]
    assert reg.predict(X).shape == (100, 2)


def test_regressor_clone_keeps_params():
    reg = DiskAutomorphismRegressor(multistarts=3)
    assert clone(reg).get_params() == {"multistarts": 3}
