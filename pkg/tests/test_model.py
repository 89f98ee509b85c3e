import json

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from latte.model import (
    ALERT_TEMPLATE,
    ModelConfig,
    PredictionSeries,
    attribute_entities,
    frame_step,
    generate_alerts,
    init_params,
    load_checkpoint,
    param_shapes,
    predict_video,
    save_checkpoint,
    sequence_forward,
)
from latte.synth import SynthConfig, synthesize_dataset

CE = 2  # entity channels of the (2, 2, 2) test layout


def _slot(i):
    """Channels holding object ``i`` (the frame occupies slot 0)."""
    return np.arange(CE * (i + 1), CE * (i + 2))


@pytest.fixture(scope="module")
def seq():
    return synthesize_dataset(SynthConfig(1, 0, T=10, N=3, d=8, seed=1))[0]


class TestConfig:
    def test_defaults(self):
        cfg = ModelConfig()
        assert (cfg.C, cfg.H, cfg.W, cfg.S, cfg.threshold) == (160, 8, 8, 40, 0.5)

    def test_dict_round_trip(self, small_config):
        assert ModelConfig.from_dict(json.loads(json.dumps(small_config.to_dict()))) == small_config

    @pytest.mark.parametrize("kwargs,match", [
        ({"G": 3}, "G=3"),
        ({"threshold": 1.0}, "threshold"),
        ({"layout": (1, 2, 2)}, "factor"),
        ({"S": 8}, "S=8"),
        ({"r_maa": 2}, "odd"),
    ])
    def test_rejected(self, kwargs, match):
        base = dict(N=3, d=8, layout=(2, 2, 2), G=2, S=2, d_u=8, head_hidden=8)
        with pytest.raises(ValueError, match=match):
            ModelConfig(**{**base, **kwargs})

    def test_unknown_key(self):
        with pytest.raises(ValueError, match="unknown keys"):
            ModelConfig.from_dict({"N": 3, "bogus": 1})


class TestForward:
    def test_zero_network_is_one_half(self, small_config, seq):
        params = {k: np.zeros_like(v) for k, v in init_params(small_config).items()}
        series = predict_video(seq, params, small_config, seed=0)
        assert_array_equal(series.probs, 0.5)

    @pytest.mark.parametrize("switches", [(False, True, True), (True, False, True),
                                          (True, True, False), (False, False, False)])
    def test_ablations_run(self, small_config, seq, switches):
        cfg = small_config.with_switches(*switches)
        params = init_params(cfg, seed=2)
        series = predict_video(seq, params, cfg)
        assert series.probs.shape == (seq.T,)
        assert np.all((series.probs > 0) & (series.probs < 1))
        full = predict_video(seq, init_params(small_config, seed=2), small_config)
        assert not np.array_equal(series.probs, full.probs)

    def test_mc_determinism(self, small_config, seq):
        cfg = ModelConfig.from_dict({**small_config.to_dict(), "mc_samples": 16})
        params = init_params(cfg, 1)
        assert_array_equal(predict_video(seq, params, cfg, seed=9).probs,
                           predict_video(seq, params, cfg, seed=9).probs)

    def test_single_sample_is_deterministic_head(self, small_config, seq):
        cfg = ModelConfig.from_dict({**small_config.to_dict(), "mc_samples": 1})
        params = init_params(cfg, 1)
        assert_array_equal(predict_video(seq, params, cfg, seed=1).probs,
                           predict_video(seq, params, cfg, seed=2).probs)

    def test_mc_averaging_reduces_variance(self, small_config, seq):
        params = init_params(small_config, 4)
        params["head.w2"] *= 6.0  # widen the per-mask spread so the comparison is informative
        t = 6

        def draws(k):
            cfg = ModelConfig.from_dict({**small_config.to_dict(), "mc_samples": k})
            out = []
            for trial in range(100):
                rng = np.random.default_rng(trial)
                U = None
                for i in range(t):
                    U, p = frame_step(U, seq.object_features[i], seq.frame_features[i], params, cfg,
                                      mode="sample", rng=rng)
                out.append(p)
            return np.var(out)

        assert draws(16) <= draws(1)

    def test_truncation_bitwise(self, small_config, seq):
        params = init_params(small_config, 5)
        full = predict_video(seq, params, small_config, seed=3).probs
        for t in range(1, seq.T + 1):
            assert_array_equal(predict_video(seq.truncated(t), params, small_config, seed=3).probs, full[:t])

    def test_future_frames_invisible(self, small_config, seq):
        params = init_params(small_config, 5)
        other = seq.truncated(seq.T)
        other.object_features = other.object_features.copy()
        other.object_features[6:] += 3.0
        a = predict_video(seq, params, small_config, seed=3).probs
        b = predict_video(other, params, small_config, seed=3).probs
        assert_array_equal(a[:6], b[:6])
        assert not np.array_equal(a[6:], b[6:])

    def test_vectorized_matches_loop_without_dropout(self, small_config, seq):
        cfg = ModelConfig.from_dict({**small_config.to_dict(), "mc_samples": 1})
        params = init_params(cfg, 6)
        vec = sequence_forward(params, seq.object_features[None], seq.frame_features[None], cfg,
                               mode="eval").data[0]
        np.testing.assert_allclose(vec, predict_video(seq, params, cfg).probs, rtol=0, atol=1e-12)

    def test_dimension_mismatch_rejected(self, small_config, seq):
        params = init_params(small_config, 0)
        params["fuse.w_pool"] = params["fuse.w_pool"][:, :4]
        with pytest.raises(ValueError, match="fuse.w_pool"):
            predict_video(seq, params, small_config)
        with pytest.raises(ValueError, match="expected objects"):
            frame_step(None, np.zeros((2, 8)), np.zeros(8), init_params(small_config), small_config)

    def test_params_of_ablated_module_rejected(self, small_config, seq):
        cfg = small_config.with_switches(emsa=False)
        with pytest.raises(ValueError, match="unexpected"):
            predict_video(seq, init_params(small_config), cfg)


class TestPredictionSeries:
    def test_crossing_and_peak(self):
        s = PredictionSeries("v", [0.2, 0.6, 0.4])
        assert s.crossing_frame == 2 and s.p_vid == 0.6

    def test_no_crossing(self):
        s = PredictionSeries("v", [0.1, 0.3])
        assert s.crossing_frame is None and s.p_vid < s.threshold

    def test_to_dict(self):
        d = PredictionSeries("v", [0.5], fps=5.0).to_dict()
        assert d == {"video_id": "v", "probs": [0.5], "p_vid": 0.5, "crossing_frame": 1,
                     "threshold": 0.5, "fps": 5.0}


class TestAttribution:
    def test_dead_input_ranks_last(self, seq):
        cfg = ModelConfig(N=3, d=8, layout=(2, 2, 2), G=2, S=2, d_u=8, head_hidden=8, emsa_on=False)
        params = init_params(cfg, 7)
        dead = _slot(1)
        for k in ("fuse.w_pool", "fuse.w_maa", "maa.w_mk", "maa.dw_w"):
            params[k][dead] = 0.0
        s = seq.truncated(seq.T)
        s.object_features = s.object_features.copy()
        s.object_features[:, 1] = 0.0
        ranked = attribute_entities(s, params, cfg, 8)
        assert ranked[-1] == (1, 0.0)
        assert all(v > 0 for _, v in ranked[:-1])

    def test_duplicates_tie_by_index(self, seq):
        cfg = ModelConfig(N=3, d=8, layout=(2, 2, 2), G=4, S=2, d_u=8, head_hidden=8)
        params = init_params(cfg, 3)
        a, b = _slot(1), _slot(2)
        for k in ("fuse.w_pool", "fuse.w_maa", "maa.w_mk", "maa.dw_w", "emsa.dw_w", "emsa.dw_b"):
            params[k][b] = params[k][a]
        for k in ("maa.w_mv", "maa.w_ta"):
            params[k][:, b] = params[k][:, a]
        for k in ("emsa.mix_w", "emsa.mix_b"):  # one group per entity at G=4
            params[k][3] = params[k][2]
        params["fuse.w_emsa"][12:16] = params["fuse.w_emsa"][8:12]
        s = seq.truncated(seq.T)
        s.object_features = s.object_features.copy()
        s.object_features[:, 2] = s.object_features[:, 1]
        for t in (1, 5, 10):
            ranked = attribute_entities(s, params, cfg, t)
            sal = dict(ranked)
            assert abs(sal[1] - sal[2]) <= 1e-9
            order = [i for i, _ in ranked]
            assert order.index(1) < order.index(2)

    def test_masked_objects_excluded(self, small_config, seq):
        s = seq.truncated(seq.T)
        s.valid = s.valid.copy()
        s.valid[3, 0] = False
        ranked = attribute_entities(s, init_params(small_config), small_config, 4)
        assert sorted(i for i, _ in ranked) == [1, 2]

    @pytest.mark.parametrize("t", [0, 11])
    def test_frame_out_of_range(self, small_config, seq, t):
        with pytest.raises(ValueError, match="outside"):
            attribute_entities(seq, init_params(small_config), small_config, t)

    def test_matches_finite_differences(self, small_config, seq):
        cfg = ModelConfig.from_dict({**small_config.to_dict(), "mc_samples": 1})
        params = init_params(cfg, 8)
        t, eps = 5, 1e-6
        ranked = dict(attribute_entities(seq, params, cfg, t))
        base = seq.truncated(t)
        for i in range(cfg.N):
            g = np.zeros(cfg.d)
            for j in range(cfg.d):
                vals = []
                for sgn in (1, -1):
                    s = base.truncated(t)
                    s.object_features = s.object_features.copy()
                    s.object_features[t - 1, i, j] += sgn * eps
                    vals.append(predict_video(s, params, cfg).probs[-1])
                g[j] = (vals[0] - vals[1]) / (2 * eps)
            assert abs(np.linalg.norm(g) - ranked[i]) <= 1e-6 + 1e-4 * ranked[i]


class TestAlerts:
    @pytest.mark.parametrize("probs,frames", [
        ([0.1, 0.7, 0.8, 0.3, 0.6], [2, 5]),
        ([0.9] * 5, [1]),
        ([0.1, 0.2, 0.49], []),
    ])
    def test_crossings(self, probs, frames):
        alerts = generate_alerts(PredictionSeries("v", probs))
        assert [a.frame for a in alerts] == frames

    def test_exact_threshold_counts(self):
        assert [a.frame for a in generate_alerts(PredictionSeries("v", [0.2, 0.5]))] == [2]

    def test_message_and_fields(self):
        series = PredictionSeries("v7", [0.1, 0.734], fps=10.0)
        alerts = generate_alerts(series, {2: [(3, 0.9), (0, 0.5), (1, 0.1)]})
        a = alerts[0]
        assert (a.video_id, a.frame, a.seconds, a.probability) == ("v7", 2, 0.2, 0.734)
        assert a.message == "accident risk 0.73 at t=0.2s; entities 3, 0"
        assert a.message == ALERT_TEMPLATE.format(prob=0.734, sec=0.2, ids="3, 0")
        assert a.to_dict()["entities"][0] == {"index": 3, "saliency": 0.9}

    def test_callable_source_and_config_threshold(self, small_config):
        cfg = ModelConfig.from_dict({**small_config.to_dict(), "threshold": 0.3})
        calls = []
        alerts = generate_alerts(PredictionSeries("v", [0.35, 0.1, 0.4]),
                                 lambda t: calls.append(t) or [(0, 1.0)], cfg)
        assert calls == [1, 3] and [a.frame for a in alerts] == [1, 3]
        assert alerts[0].message.endswith("entities 0")

    def test_no_attribution(self):
        assert generate_alerts(PredictionSeries("v", [0.9]))[0].message.endswith("entities none")


class TestCheckpoint:
    def test_round_trip_bitwise(self, small_config, tmp_path):
        params = init_params(small_config, 11)
        save_checkpoint(tmp_path / "ck", params, small_config, {"epoch": 3})
        back, cfg = load_checkpoint(tmp_path / "ck")
        assert cfg == small_config
        assert list(back) == list(param_shapes(small_config))
        for k in params:
            assert_array_equal(back[k], params[k])
        assert json.loads((tmp_path / "ck" / "manifest.json").read_text())["epoch"] == 3

    def test_loads_via_manifest_path(self, small_config, tmp_path):
        save_checkpoint(tmp_path, init_params(small_config), small_config)
        _, cfg = load_checkpoint(tmp_path / "manifest.json")
        assert cfg == small_config

    def test_shape_mismatch_rejected(self, small_config, tmp_path):
        save_checkpoint(tmp_path, init_params(small_config), small_config)
        m = json.loads((tmp_path / "manifest.json").read_text())
        m["config"]["d_u"] = 4
        (tmp_path / "manifest.json").write_text(json.dumps(m))
        with pytest.raises(ValueError, match="config expects"):
            load_checkpoint(tmp_path)

    def test_short_blob_rejected(self, small_config, tmp_path):
        save_checkpoint(tmp_path, init_params(small_config), small_config)
        raw = (tmp_path / "params.bin").read_bytes()
        (tmp_path / "params.bin").write_bytes(raw[:-8])
        with pytest.raises(ValueError, match="blob too short"):
            load_checkpoint(tmp_path)

    def test_wrong_format_rejected(self, small_config, tmp_path):
        save_checkpoint(tmp_path, init_params(small_config), small_config)
        m = json.loads((tmp_path / "manifest.json").read_text())
        m["format"] = "XYZ"
        (tmp_path / "manifest.json").write_text(json.dumps(m))
        with pytest.raises(ValueError, match="LCK1"):
            load_checkpoint(tmp_path)
