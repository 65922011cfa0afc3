"""Bayesian contextual risk fields.

Composes a demonstration-learned safe-distance CDF likelihood with a
distance-attenuated semantic prior into a viability/risk posterior,
evaluates it densely over images, scores trajectories, and extracts
safety radii for a union-of-balls planner.
"""

from .bezier import BezierCurve, EmpiricalCdf, evaluate, evaluate_at_distance, fit_to_cdf, inverse
from .core import (AttenuationConfig, attenuate_prior, compose_viability,
                   risk_from_viability)
from .demos import DemoRecord, TrainingExample, build_histogram, cdf_from_histogram, ingest_demo_log, make_training_set
from .field import (DistanceImage, FeatureImage, PosteriorCurve, RiskImage,
                    average_over_masks, posterior_curve, render_turbo, risk_at, risk_image)
from .likelihood import LikelihoodModel, TrainingConfig, backward, forward, init_model, load_model, loss, save_model, train
from .planner import BallObstacle, Path, PlannerConfig, extract_radius, inflate_point_cloud, path_clearance, plan
from .prior import ObjectLUT, RiskLUT, build_object_lut, generate_risk_table, ingest_risk_table, lookup_rating, match_category, rating_to_prob
from .valuation import FrameScore, TrajectoryScore, dtw_distance, frame_percentile, rank_trajectories, trajectory_score

__version__ = "0.1.0"
