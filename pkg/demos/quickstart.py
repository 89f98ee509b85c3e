"""Synthesize a small dataset, train a model, evaluate it and raise alerts.

Run with ``python demos/quickstart.py``. Takes well under a minute.
"""

import numpy as np

from latte import (
    LossConfig,
    ModelConfig,
    SynthConfig,
    TrainConfig,
    attribute_entities,
    evaluate_model,
    generate_alerts,
    predict_video,
    split_dataset,
    synthesize_dataset,
    train,
)

# 1. data: 40 positive and 40 negative videos of 30 frames, 5 objects each
seqs = synthesize_dataset(SynthConfig(40, 40, T=30, N=5, d=32, difficulty=0.2, seed=7))
train_set, test_set = split_dataset(seqs, test_positive=10, test_negative=10)
print(f"{len(train_set)} training videos, {len(test_set)} test videos")

# 2. a compact model; the frame loss down-weights frames far before the onset
cfg = ModelConfig(N=5, d=32, d_u=32, head_hidden=32, mc_samples=4)
result = train(train_set, cfg, TrainConfig(epochs=15, batch_size=10, seed=0),
               LossConfig(sign_convention="decay"))
for epoch, loss in enumerate(result.epoch_losses, 1):
    print(f"epoch {epoch}: loss {loss:.3f}")

# 3. video-level metrics on held-out data
report = evaluate_model(test_set, result.params, cfg)
print(f"AP {report.ap:.3f}  mTTA {report.mtta_seconds:.2f} s  TTA@R80 {report.tta_r80_seconds}")

# 4. per-frame probabilities and an alert with the most salient objects
video = next(s for s in test_set if s.label == 1)
series = predict_video(video, result.params, cfg)
print(f"{video.video_id}: onset frame {video.onset_frame}, first crossing {series.crossing_frame}")
print("probabilities:", np.round(series.probs, 2))
for alert in generate_alerts(series, lambda t: attribute_entities(video, result.params, cfg, t), cfg):
    print(alert.message)
