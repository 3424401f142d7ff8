"""Dynamic point removal for accumulated LiDAR maps."""
from .classify import BinStatus, ClassifyConfig, classify_bins, classify_frame
from .descriptor import VoiParams, assign_bin, build_descriptor_grid, layer_index
from .evaluate import MetricsReport, compute_pr_rr, f1_score
from .ingest import SequenceSource, read_labels, read_poses, read_scan
from .model import Frame, PointCloud, PoseSE3, invert_pose, transform_cloud
from .pipeline import MapState, PipelineConfig, process_frame, run_sequence
from .retrieve import RetrievalConfig, retrieve_static

__version__ = "0.1.0"
