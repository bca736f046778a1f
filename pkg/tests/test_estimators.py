import numpy as np
import pytest
from sklearn.base import clone

from footloc.estimators import GeolocationErrorModel, check_focal_areas
from footloc.synthetic import SceneSpec, generate_scene


@pytest.fixture(scope="module")
def offset_scene():
    spec = SceneSpec(n_areas=6, density=2.5, pattern="gap_mosaic",
                     pattern_params={"height_range": (5, 30), "noise_sd": 0.3},
                     true_offset=(-5.60, -7.83), jitter_sd=0.0, tau2=1.0,
                     seed=31)
    return generate_scene(spec)


@pytest.fixture(scope="module")
def fitted_sub(offset_scene):
    est = GeolocationErrorModel(model="sub", n_chains=2, kept=500, warmup=500,
                                seed=3)
    return est.fit(offset_scene.areas)


class TestSklearnContract:
    def test_get_set_params_round_trip(self):
        est = GeolocationErrorModel(kept=123, sigma_f=4.0)
        params = est.get_params()
        assert params["kept"] == 123
        assert params["sigma_f"] == 4.0
        est2 = GeolocationErrorModel().set_params(**params)
        assert est2.get_params() == params

    def test_clone(self):
        est = GeolocationErrorModel(model="sub", kept=55)
        cloned = clone(est)
        assert cloned.get_params() == est.get_params()

    def test_fit_returns_self(self, offset_scene):
        est = GeolocationErrorModel(model="sub", n_chains=1, kept=120,
                                    warmup=60, seed=1)
        assert est.fit(offset_scene.areas) is est
        assert hasattr(est, "output_")

    def test_predict_before_fit_raises(self):
        with pytest.raises(RuntimeError):
            GeolocationErrorModel().predict()


class TestValidation:
    def test_empty_input(self):
        with pytest.raises(ValueError):
            check_focal_areas([])

    def test_type_check(self):
        with pytest.raises(TypeError):
            check_focal_areas([object()])

    def test_mismatched_percentiles(self, offset_scene):
        from footloc.footprint import RhVector
        a, b = offset_scene.areas[0], offset_scene.areas[1]
        import copy
        b2 = copy.copy(b)
        b2.observed_rh = RhVector((50.0,), np.array([5.0]))
        with pytest.raises(ValueError):
            check_focal_areas([a, b2])


class TestFittedBehavior:
    def test_systematic_offset_recovered(self, fitted_sub):
        dx, dy = fitted_sub.systematic_offset_
        assert np.hypot(dx + 5.6, dy + 7.83) < 1.5

    def test_predict_shapes_and_score(self, fitted_sub, offset_scene):
        fitted = fitted_sub.predict()
        assert fitted.shape == (6, 11)
        center = fitted_sub.predict(mode="center")
        assert center.shape == (6, 11)
        # corrected fit beats the uncorrected center simulation
        assert fitted_sub.score() > -np.inf
        obs = np.vstack([a.observed_rh.values for a in offset_scene.areas])
        rmse_fit = np.sqrt(np.mean((obs - fitted) ** 2))
        rmse_center = np.sqrt(np.mean((obs - center) ** 2))
        assert rmse_fit < rmse_center

    def test_corrected_locations_shape(self, fitted_sub):
        locs = fitted_sub.corrected_locations()
        assert locs.shape == (6, 2)
        # all areas shifted by the same systematic offset
        deltas = locs - np.array([a.source_center for a in fitted_sub.areas_])
        assert np.allclose(deltas, deltas[0])

    def test_error_summary_keys(self, fitted_sub):
        s = fitted_sub.error_summary()
        assert "distance_median_m" in s
        assert "systematic_offset_m" in s
        assert s["distance_median_m"] == pytest.approx(9.62, abs=1.5)

    def test_full_model_footprint_locations(self, offset_scene):
        est = GeolocationErrorModel(model="full", n_chains=1, kept=150,
                                    warmup=150, seed=2, ram_step=4.0)
        est.fit(offset_scene.areas)
        locs = est.footprint_locations()
        assert locs.shape == (6, 2)
        with_new = est.predict()
        assert with_new.shape == (6, 11)

    def test_full_predict_rejects_unseen_areas(self, offset_scene):
        est = GeolocationErrorModel(model="full", n_chains=1, kept=120,
                                    warmup=120, seed=2, ram_step=4.0)
        est.fit(offset_scene.areas[:4])
        with pytest.raises(ValueError):
            est.predict(offset_scene.areas[4:])
        # submodel prediction transfers to unseen areas
        sub = GeolocationErrorModel(model="sub", n_chains=1, kept=120,
                                    warmup=120, seed=2)
        sub.fit(offset_scene.areas[:4])
        out = sub.predict(offset_scene.areas[4:])
        assert out.shape == (2, 11)
