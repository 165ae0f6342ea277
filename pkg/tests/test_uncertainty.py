import numpy as np
import pytest

from cibpath.errors import ConfigError, OutOfRangeError
from cibpath.model import Distribution, parse_study_spec
from cibpath.uncertainty import (
    DynamicShockState,
    RandomSource,
    advance_dynamic_shock,
    apply_structural_shock,
    draw_scaled,
    judgement_sigma,
    sample_cim,
)

from conftest import two_desc_document


class TestRandomSource:
    def test_same_parts_same_stream(self):
        a = RandomSource(7).substream("run", 3).random(8)
        b = RandomSource(7).substream("run", 3).random(8)
        assert np.array_equal(a, b)

    def test_different_parts_differ(self):
        a = RandomSource(7).substream("run", 3).random(8)
        b = RandomSource(7).substream("run", 4).random(8)
        c = RandomSource(8).substream("run", 3).random(8)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_string_tags_separate_streams(self):
        a = RandomSource(7).substream("structural", 0).random(4)
        b = RandomSource(7).substream("dynamic", 0).random(4)
        assert not np.array_equal(a, b)

    def test_draw_order_independence(self):
        src = RandomSource(42)
        late = src.substream("run", 100).random(4)
        _ = src.substream("run", 0).random(1000)
        again = src.substream("run", 100).random(4)
        assert np.array_equal(late, again)

    def test_rejects_float_parts(self):
        with pytest.raises(TypeError):
            RandomSource(1).substream(1.5)


class TestDrawScaled:
    def test_gaussian_sd(self):
        rng = np.random.default_rng(0)
        x = draw_scaled(rng, Distribution("gaussian"), 0.85, 200_000)
        assert abs(x.std() - 0.85) < 0.01
        assert abs(x.mean()) < 0.01

    def test_student_t_sd_matches_request(self):
        rng = np.random.default_rng(1)
        x = draw_scaled(rng, Distribution("student_t", 5), 0.85, 400_000)
        assert abs(x.std() - 0.85) < 0.01

    def test_student_t_df_guard(self):
        rng = np.random.default_rng(2)
        with pytest.raises(ConfigError):
            draw_scaled(rng, Distribution("student_t", 2), 1.0, 10)

    def test_zero_sd_is_degenerate(self):
        rng = np.random.default_rng(3)
        assert not draw_scaled(rng, Distribution("gaussian"), 0.0, 50).any()


class TestJudgementSigma:
    def test_default_map_first_period(self, fixture_spec):
        unc = fixture_spec.uncertainty
        expected = {1: 1.5, 2: 1.175, 3: 0.85, 4: 0.525, 5: 0.2}
        for code, sd in expected.items():
            assert judgement_sigma(unc, code, 2025) == pytest.approx(sd)

    def test_time_scale_grows_linearly(self, fixture_spec):
        unc = fixture_spec.uncertainty
        # default ramp 1.0 -> 1.5 across the grid (2025, 2030, 2035)
        assert judgement_sigma(unc, 3, 2025) == pytest.approx(0.85)
        assert judgement_sigma(unc, 3, 2030) == pytest.approx(0.85 * 1.25)
        assert judgement_sigma(unc, 3, 2035) == pytest.approx(0.85 * 1.5)

    def test_bad_inputs(self, fixture_spec):
        unc = fixture_spec.uncertainty
        with pytest.raises(OutOfRangeError):
            judgement_sigma(unc, 0, 2025)
        with pytest.raises(OutOfRangeError):
            judgement_sigma(unc, 3, 1999)


class TestSampleCim:
    def test_point_estimates_recovered_at_zero_sigma(self):
        doc = two_desc_document(
            {"uncertainty": {"confidence_sigma": {"1": 0, "2": 0, "3": 0, "4": 0, "5": 0}}}
        )
        spec = parse_study_spec(doc)
        out = sample_cim(spec, np.random.default_rng(0), 2025)
        assert np.array_equal(out.scores, spec.cim.scores)

    def test_clip_bounds(self, fixture_spec):
        for seed in range(5):
            out = sample_cim(fixture_spec, np.random.default_rng(seed), 2035)
            assert out.scores.min() >= -3.0
            assert out.scores.max() <= 3.0

    def test_invalid_cells_stay_zero(self, fixture_spec):
        out = sample_cim(fixture_spec, np.random.default_rng(4), 2025)
        assert not out.scores[~fixture_spec.cim.valid_mask].any()

    def test_empirical_sd_tracks_confidence_code(self):
        doc = two_desc_document()
        for cell in doc["cim"]:
            cell["confidence"] = 3
        spec = parse_study_spec(doc)
        rng = np.random.default_rng(11)
        mask = spec.cim.valid_mask
        devs = []
        for _ in range(4000):
            out = sample_cim(spec, rng, 2025)
            devs.append((out.scores - spec.cim.scores)[mask])
        sd = np.concatenate(devs).std()
        # clipping at +-3 shaves a little off 0.85 for the |score|=2 cells
        assert 0.7 < sd < 0.87

    def test_confidences_pass_through(self, fixture_spec):
        out = sample_cim(fixture_spec, np.random.default_rng(5), 2025)
        assert np.array_equal(out.confidences, fixture_spec.cim.confidences)


class TestStructuralShock:
    def test_zero_scale_identity(self, fixture_spec):
        from cibpath.model import StructuralShockConfig

        cfg = StructuralShockConfig(True, 0.0, Distribution("gaussian"))
        out = apply_structural_shock(fixture_spec.cim, np.random.default_rng(0), cfg)
        assert np.array_equal(out.scores, fixture_spec.cim.scores)

    def test_scale_reflected_in_deviation(self, fixture_spec):
        from cibpath.model import StructuralShockConfig

        cfg = StructuralShockConfig(True, 0.3, Distribution("student_t", 5))
        rng = np.random.default_rng(1)
        mask = fixture_spec.cim.valid_mask
        devs = []
        for _ in range(4000):
            out = apply_structural_shock(fixture_spec.cim, rng, cfg)
            devs.append((out.scores - fixture_spec.cim.scores)[mask])
        sd = np.concatenate(devs).std()
        assert 0.25 < sd < 0.32


class TestDynamicShock:
    def test_initial_state_is_zero(self, mini_spec):
        st = DynamicShockState.initial(mini_spec)
        assert not st.eta.any()
        assert st.persistence == 0.6
        assert st.long_run_sd == 0.4

    def test_stationary_sd_approaches_long_run(self):
        st = DynamicShockState(
            np.zeros((2, 2)), 0.8, 1.0, Distribution("gaussian")
        )
        rng = np.random.default_rng(9)
        samples = []
        for i in range(60_000):
            st = advance_dynamic_shock(st, rng)
            if i > 200:
                samples.append(st.eta.copy())
        assert abs(np.concatenate(samples).std() - 1.0) < 0.03

    def test_lag_one_autocorrelation(self):
        st = DynamicShockState(np.zeros((1, 1)), 0.6, 0.4, Distribution("gaussian"))
        rng = np.random.default_rng(10)
        xs = []
        for _ in range(40_000):
            st = advance_dynamic_shock(st, rng)
            xs.append(st.eta[0, 0])
        x = np.asarray(xs)
        corr = np.corrcoef(x[:-1], x[1:])[0, 1]
        assert abs(corr - 0.6) < 0.02

    def test_persistence_bound(self):
        st = DynamicShockState(np.zeros((1, 1)), 1.0, 0.4, Distribution("gaussian"))
        with pytest.raises(ConfigError):
            advance_dynamic_shock(st, np.random.default_rng(0))
