import json

import numpy as np
import pytest

from tubeprop.config import PipelineConfig, config_from_dict, load_config
from tubeprop.core import Box2D, FrameDetections, GroundTruthTube, ScoredBox, VideoDetections
from tubeprop.grid import tensor_size
from tubeprop.head import DenseParams
from tubeprop.io import FormatError
from tubeprop.pipeline import infer_video, propose_video, run_pipeline, trim_proposals, link_videos
from tubeprop.synth import make_dataset
from tubeprop.train import TrainingVideo, train_toy


def peaked_video(length=15, vid="v"):
    t = np.arange(length)
    ac = 1.0 / (1.0 + np.abs(t - length // 2))
    frames = tuple(
        FrameDetections(i, (ScoredBox(Box2D(0.5, 0.5, 0.3, 0.3), 0.9, float(ac[i]), 0.1),))
        for i in range(length)
    )
    return VideoDetections(vid, frames)


def test_single_box_per_frame_gives_sole_path():
    v = peaked_video()
    props, warns = propose_video(v, PipelineConfig())
    assert warns == [] and len(props) == 1
    assert props[0][0].start == 0 and props[0][0].end == 14


def test_empty_frame_gives_warning_and_zero_recall():
    v = peaked_video(5)
    frames = list(v.frames)
    frames[2] = FrameDetections(2, ())
    v = VideoDetections("v", tuple(frames))
    gt = {"v": [GroundTruthTube(0, 4, (Box2D(0.5, 0.5, 0.3, 0.3),) * 5)]}
    props, report, warns = run_pipeline(PipelineConfig(), {"v": v}, gt)
    assert props == {"v": []}
    assert report.recall_at[0.5] == 0.0
    assert len(warns) == 1 and "frame 2" in warns[0]


def test_proposals_stay_in_range():
    videos = make_dataset(5, 1, length=30, untrimmed_fraction=1.0)
    props, _, _ = run_pipeline(PipelineConfig(), {v.video_id: v.detections for v in videos})
    for v in videos:
        for p, _ in props[v.video_id]:
            assert 0 <= p.start <= p.end <= 29


def test_thread_count_does_not_change_output():
    videos = make_dataset(6, 2, length=25, untrimmed_fraction=0.5)
    dets = {v.video_id: v.detections for v in videos}
    gts = {v.video_id: [v.ground_truth] for v in videos}
    a = run_pipeline(PipelineConfig(), dets, gts, threads=1)
    b = run_pipeline(PipelineConfig(), dets, gts, threads=4)
    assert a[0] == b[0] and a[1].to_dict() == b[1].to_dict()


def test_staged_link_trim_equals_pipeline():
    videos = make_dataset(4, 3, length=30, untrimmed_fraction=1.0)
    dets = {v.video_id: v.detections for v in videos}
    cfg = PipelineConfig()
    staged = trim_proposals(link_videos(dets, cfg), cfg)
    assert staged == run_pipeline(cfg, dets)[0]


def test_fused_stream_adds_boxes():
    videos = make_dataset(2, 4, length=10)
    dets = {v.video_id: v.detections for v in videos}
    props, _, _ = run_pipeline(PipelineConfig(trim=False), dets, extra_stream=dets)
    plain, _, _ = run_pipeline(PipelineConfig(trim=False), dets)
    for vid in dets:
        assert len(props[vid]) == 2 * len(plain[vid])


def test_infer_video_decodes_every_frame(rng):
    k, b, d = 2, 1, 4
    readout = DenseParams(rng.normal(size=(tensor_size(k, b), d)), rng.normal(size=tensor_size(k, b)))
    v = infer_video("v", rng.normal(size=(3, d)), "static", None, readout, k, b)
    assert v.length == 3 and all(len(fr.boxes) == k * k * b for fr in v.frames)
    with pytest.raises(ValueError):
        infer_video("v", rng.normal(size=(3, d)), "static", None, readout, 3, b)


# --- config ---------------------------------------------------------------


def test_config_defaults():
    c = PipelineConfig()
    assert (c.grid_k, c.boxes_per_cell, c.lambda_coord, c.lambda_noobj) == (7, 2, 5.0, 0.5)
    assert (c.lambda0, c.smooth_window, c.neighborhood, c.seed) == (1.0, 5, 5, 0)
    assert c.learning_rate_at(19) == 1e-4 and c.learning_rate_at(20) == 1e-5


def test_config_file_and_overrides(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"grid_k": 3, "lambda0": 2}))
    c = load_config(p, seed=9)
    assert (c.grid_k, c.lambda0, c.seed) == (3, 2.0, 9)
    assert config_from_dict(c.to_dict()) == c


@pytest.mark.parametrize("raw", [{"bogus": 1}, {"grid_k": "7"}, {"smooth_window": 4},
                                 {"trim": 1}, {"head": "cnn"}])
def test_config_rejects_bad_values(raw):
    with pytest.raises(FormatError):
        config_from_dict(raw)


# --- toy training ---------------------------------------------------------


@pytest.mark.parametrize("head", ["static", "rnn", "lstm"])
def test_training_lowers_loss(head):
    cfg = PipelineConfig(grid_k=2, boxes_per_cell=1, head=head, hidden=6, epochs=6,
                         batch_size=8, seq_len=5, learning_rate=1e-2,
                         decayed_learning_rate=1e-2, feature_size=8)
    videos = make_dataset(4, 0, length=10, frame_size=8)
    result = train_toy(cfg, videos)
    assert len(result.losses) == 6
    assert result.losses[-1] < result.losses[0]


def test_mirrored_training_video():
    v = make_dataset(1, 0, length=4)[0]
    tv = TrainingVideo.from_synthetic(v)
    m = tv.mirrored()
    assert m.tubes[0].boxes[0].x == pytest.approx(1 - v.ground_truth.boxes[0].x)
    assert np.array_equal(m.mirrored().features, tv.features)
