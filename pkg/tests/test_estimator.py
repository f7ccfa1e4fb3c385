import numpy as np
import numpy.testing as npt
import pytest
from sklearn.base import clone
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler

from crsqn.data import synthetic_classification_dataset
from crsqn.estimator import CRSQNClassifier


@pytest.fixture(scope="module")
def blobs():
    ds = synthetic_classification_dataset(6, 400, seed=15)
    return ds.features, ds.labels


class TestSklearnApi:
    def test_get_set_params_round_trip(self):
        est = CRSQNClassifier(mu0=0.5, iterations=100)
        params = est.get_params()
        assert params["mu0"] == 0.5
        est2 = CRSQNClassifier().set_params(**params)
        assert est2.get_params() == params

    def test_clone(self):
        est = CRSQNClassifier(solver="res", mu=0.3, iterations=10)
        cloned = clone(est)
        assert cloned.get_params() == est.get_params()

    def test_unfitted_predict_raises(self):
        from sklearn.exceptions import NotFittedError

        with pytest.raises(NotFittedError):
            CRSQNClassifier().predict(np.zeros((1, 3)))

    def test_requires_two_classes(self, blobs):
        X, _ = blobs
        with pytest.raises(ValueError, match="2 classes"):
            CRSQNClassifier(iterations=10).fit(X, np.zeros(X.shape[0]))


class TestFitPredict:
    @pytest.mark.parametrize("solver", ["crsqn", "res", "sa"])
    def test_beats_chance_on_separable_data(self, blobs, solver):
        X, y = blobs
        est = CRSQNClassifier(solver=solver, gamma0=0.1, iterations=2000, random_state=0)
        est.fit(X, y)
        assert est.coef_.shape == (6,)
        accuracy = (est.predict(X) == y).mean()
        assert accuracy > 0.7
        assert est.final_loss_ < np.log(2.0)

    def test_loss_curve_monotone_trend(self, blobs):
        X, y = blobs
        est = CRSQNClassifier(iterations=2000, random_state=1).fit(X, y)
        ks, losses = zip(*est.loss_curve_)
        assert ks[0] == 0 and ks[-1] == 2000
        assert losses[-1] < losses[0]

    def test_predict_proba_rows_sum_to_one(self, blobs):
        X, y = blobs
        est = CRSQNClassifier(iterations=500, random_state=0).fit(X, y)
        proba = est.predict_proba(X[:20])
        npt.assert_allclose(proba.sum(axis=1), 1.0, rtol=1e-12)
        assert np.all((proba >= 0.0) & (proba <= 1.0))

    def test_deterministic_under_random_state(self, blobs):
        X, y = blobs
        a = CRSQNClassifier(iterations=300, random_state=7).fit(X, y)
        b = CRSQNClassifier(iterations=300, random_state=7).fit(X, y)
        npt.assert_array_equal(a.coef_, b.coef_)

    def test_string_labels(self, blobs):
        X, y = blobs
        y_str = np.where(y == 1, "pos", "neg")
        est = CRSQNClassifier(iterations=500, random_state=0).fit(X, y_str)
        preds = est.predict(X[:10])
        assert set(preds) <= {"pos", "neg"}

    def test_feature_count_mismatch_rejected(self, blobs):
        X, y = blobs
        est = CRSQNClassifier(iterations=100).fit(X, y)
        with pytest.raises(ValueError):
            est.predict(np.zeros((2, 4)))

    def test_composes_in_pipeline(self, blobs):
        X, y = blobs
        pipe = make_pipeline(StandardScaler(), CRSQNClassifier(iterations=500, random_state=0))
        pipe.fit(X, y)
        assert pipe.score(X, y) > 0.7
