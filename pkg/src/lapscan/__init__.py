"""Multi-view scan planning, calibration, registration and evaluation toolkit."""

from .geometry import (DualQuaternion, Pose, Rotation, compose, dq_from_pose,
                       invert, pose_from_dq, rotation_angle)
from .pointcloud import (KdTree, OutlierParams, PointCloud, build_kdtree,
                         crop_by_centroid, estimate_normals,
                         remove_statistical_outliers, voxel_downsample)
from .registration import (IcpParams, RegistrationResult, SimilarityTransform,
                           icp_point_to_plane, tukey_weight, umeyama)
from .sampling import (SampleConfig, Trajectory, TrajectoryConfig,
                       equal_angle_directions, fibonacci_directions,
                       generate_trajectory, look_at_pose)
from .calibration import MotionPair, motion_pairs, relative_motions, solve_hand_eye
from .metrics import (CloudMetrics, PoseMetrics, align_trajectory, cloud_metrics,
                      evaluate_poses, nn_distances, pose_coverage, rpe, trim_top)
from .simulator import (OrganShape, ScanConfig, ScanResult, simulate_scan,
                        sliding_window_pairs, subsample_frames, synth_organ)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
