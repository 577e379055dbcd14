"""Spatio-temporal action proposals from per-frame grid regression.

Per-frame detections are linked into video-long tubes by dynamic programming,
then cut into action segments at peaks of the smoothed actionness and
background scores.
"""

from .core import Box2D, FrameDetections, GroundTruthTube, ScoredBox, TubePath, VideoDetections, iou, mirror_box
from .linking import LinkConfig, ScoredPath, extract_paths, fuse_streams, path_score, viterbi_link
from .metrics import MetricsReport, abo, mabo, recall_curve, tube_overlap
from .trimming import TrimConfig, find_peaks, smooth, trim

__version__ = "0.1.0"
