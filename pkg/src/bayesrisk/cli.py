"""Command-line surface wiring the full pipeline.

Every command reads one INI config file (flags override single keys),
writes delimited outputs plus a matplotlib figure next to them, and is
byte-deterministic given the same config and seed.

Exit codes: 0 success, 2 missing input, 3 dataset, 4 file format,
5 scoring, 6 planning, 1 internal.
"""

from __future__ import annotations

import argparse
import glob
import os
import sys

import numpy as np

from . import demos, field, likelihood, planner, prior, report, synth, valuation
from .config import Config, load_config
from .core import AttenuationConfig
from .errors import (BayesRiskError, ConfigError, DatasetError, FormatError,
                     PlanningError, ScoringError)

EXIT_INPUT_MISSING = 2
EXIT_DATASET = 3
EXIT_FORMAT = 4
EXIT_SCORING = 5
EXIT_PLANNING = 6
EXIT_INTERNAL = 1


def _require(path: str) -> str:
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    return path


def _world_from_args(args, cfg: Config) -> synth.SynthWorld:
    return synth.gen_world(args.categories, cfg.feature_dim, seed=args.world_seed)


# ---------------------------------------------------------------------------
# Synthetic data commands
# ---------------------------------------------------------------------------

def cmd_gen_world(args, cfg: Config) -> None:
    world = _world_from_args(args, cfg)
    os.makedirs(os.path.join(args.out_dir, "samples"), exist_ok=True)
    samples = synth.object_samples(world, args.samples_per_category, seed=cfg.seed)
    for name in sorted(samples):
        np.save(os.path.join(args.out_dir, "samples", f"{name}.npy"), samples[name])
    prior.save_risk_table(world.ratings, os.path.join(args.out_dir, "risk_table.txt"))


def cmd_gen_demos(args, cfg: Config) -> None:
    world = _world_from_args(args, cfg)
    synth.gen_demos(world, args.traj_per_pair, args.frames, args.out, seed=cfg.seed)


def cmd_gen_scene(args, cfg: Config) -> None:
    world = _world_from_args(args, cfg)
    names = [c.name for c in world.categories]
    manip = args.manip or names[0]
    region_names = [n for n in names if n != manip][: args.regions]
    layout = synth.shelf_layout(region_names, args.height, args.width, args.distance)
    scene = synth.gen_scene(world, layout, args.height, args.width, manip, seed=cfg.seed)
    field.write_feature_image(scene.features, args.out_prefix + ".fimg")
    field.write_distance_image(scene.distances, args.out_prefix + ".dimg")
    field.write_mask_image(scene.masks, args.out_prefix + ".mimg")
    np.save(args.out_prefix + "_manip.npy", world.category(manip).mean)
    with open(args.out_prefix + "_truth.csv", "w") as f:
        f.write("label,category,rating\n")
        for label in sorted(scene.regions):
            cat, rating = scene.regions[label]
            f.write(f"{label},{cat},{rating}\n")


# ---------------------------------------------------------------------------
# LUT commands
# ---------------------------------------------------------------------------

def cmd_build_object_lut(args, cfg: Config) -> None:
    _require(args.samples_dir)
    samples = {}
    for path in sorted(glob.glob(os.path.join(args.samples_dir, "*.npy"))):
        name = os.path.splitext(os.path.basename(path))[0]
        samples[name] = np.load(path)
    if not samples:
        raise FileNotFoundError(f"no .npy sample files in {args.samples_dir}")
    lut = prior.build_object_lut(samples, k=cfg.k, seed=cfg.seed)
    prior.save_object_lut(lut, args.out)


def cmd_build_risk_lut(args, cfg: Config) -> None:
    safe = tuple(args.safe_category or ())
    if args.table:
        lut = prior.ingest_risk_table(_require(args.table), safe_categories=safe,
                                      default_rating=args.default_rating)
    else:
        if args.categories_file:
            with open(_require(args.categories_file)) as f:
                categories = [ln.strip() for ln in f if ln.strip()]
        else:
            categories = prior.load_bundled_categories()
        endpoint = prior.EndpointConfig(
            url=cfg.endpoint_url, model=cfg.endpoint_model, token_env=cfg.token_env,
            timeout_s=cfg.timeout_s, replay_path=cfg.replay or None,
            pairs_per_prompt=cfg.pairs_per_prompt)
        result = prior.generate_risk_table(endpoint, categories, safe_categories=safe)
        lut = result.lut
        with open(args.out + ".transcript.txt", "w") as f:
            for prompt, response in result.transcript:
                f.write(prompt + "\n---\n" + response + "\n===\n")
        if result.skipped:
            with open(args.out + ".skipped.txt", "w") as f:
                for a, b in result.skipped:
                    f.write(f"{a}|{b}\n")
    prior.save_risk_table(lut, args.out)


# ---------------------------------------------------------------------------
# Training / evaluation / scoring / planning
# ---------------------------------------------------------------------------

def cmd_train(args, cfg: Config) -> None:
    records = demos.ingest_demo_log(_require(args.demos))
    groups = demos.group_by_trajectory(records)
    examples = demos.make_training_set(groups, d_max=cfg.d_max, seed=cfg.seed)
    dim = examples[0].feat_a.size
    model = likelihood.init_model(dim, width=cfg.width, layers=cfg.layers, seed=cfg.seed)
    train_cfg = likelihood.TrainingConfig(
        learning_rate=cfg.learning_rate, epochs=cfg.epochs,
        batch_size=cfg.batch_size, seed=cfg.seed)
    model, history = likelihood.train(model, examples, train_cfg)
    likelihood.save_model(model, args.out)
    loss_csv = args.loss_csv or args.out + ".loss.csv"
    with open(loss_csv, "w") as f:
        f.write("epoch,mse\n")
        for i, v in enumerate(history):
            f.write(f"{i},{v!r}\n")
    report.save_loss_figure(history, args.figure or args.out + ".loss.png")


def _load_eval_inputs(args, cfg: Config):
    model = likelihood.load_model(_require(args.model))
    object_lut = prior.load_object_lut(_require(args.object_lut))
    risk_lut = prior.ingest_risk_table(_require(args.risk_lut),
                                       default_rating=args.default_rating)
    manip_feat = np.load(_require(args.manip_feature))
    return model, object_lut, risk_lut, manip_feat


def cmd_eval(args, cfg: Config) -> None:
    model, object_lut, risk_lut, manip_feat = _load_eval_inputs(args, cfg)
    feat_img = field.read_feature_image(_require(args.features))
    dist_img = field.read_distance_image(_require(args.distances))
    atten = AttenuationConfig(cfg.lam)
    risk = field.risk_image(model, object_lut, risk_lut, args.manip, manip_feat,
                            feat_img, dist_img, atten, cfg.d_max)
    rows = []
    if args.masks:
        masks = field.read_mask_image(_require(args.masks))
        means = field.region_means(risk, masks)
        risk = field.average_over_masks(risk, masks)
        for label in sorted(means):
            sel = (masks == label) & risk.valid
            reason = risk.reasons[sel][0] if risk.reasons is not None and np.any(sel) else ""
            rows.append((label, means[label], reason))
    field.write_risk_image(risk, args.out_prefix + ".rimg")
    field.render_turbo(risk, args.out_prefix + ".ppm")
    report.save_risk_figure(risk, args.out_prefix + ".png", title=f"risk ({args.manip})")
    with open(args.out_prefix + "_objects.csv", "w") as f:
        f.write("label,mean_risk,reason\n")
        for label, mean, reason in rows:
            f.write(f"{label},{mean!r},{reason}\n")


def cmd_score(args, cfg: Config) -> None:
    paths = sorted(glob.glob(args.frames))
    if not paths:
        raise ScoringError(f"no frame files match {args.frames!r}")
    by_traj: dict[str, list[str]] = {}
    for path in paths:
        stem = os.path.splitext(os.path.basename(path))[0]
        traj_id = stem.rsplit("_", 1)[0]
        by_traj.setdefault(traj_id, []).append(path)
    curves: dict[str, list[float]] = {}
    scores = []
    for traj_id in sorted(by_traj):
        frames = [field.read_risk_image(p) for p in by_traj[traj_id]]
        if args.window > 0 and len(frames) > 2 * args.window:
            frames = frames[: args.window] + frames[-args.window :]
        score = valuation.trajectory_score(frames, p=cfg.percentile, traj_id=traj_id)
        curves[traj_id] = [valuation.frame_percentile(f, cfg.percentile).p75 for f in frames]
        scores.append(score)
    with open(args.out, "w") as f:
        f.write("traj_id,frames,mean_p75\n")
        for s in scores:
            f.write(f"{s.traj_id},{s.frame_count},{s.mean_risk!r}\n")
    report.save_score_figure(curves, args.figure or args.out + ".png", cfg.percentile)


def cmd_rank(args, cfg: Config) -> None:
    scores = []
    with open(_require(args.scores)) as f:
        header = f.readline()
        if not header.startswith("traj_id"):
            raise FormatError(f"{args.scores}: expected a traj_id,frames,mean_p75 header")
        for line in f:
            if not line.strip():
                continue
            traj_id, frames, mean = line.strip().split(",")
            scores.append(valuation.TrajectoryScore(traj_id, float(mean), int(frames)))
    if not scores:
        raise ScoringError(f"{args.scores} has no score rows")
    ordering, least, most = valuation.rank_trajectories(scores)
    by_id = {s.traj_id: s for s in scores}
    with open(args.out, "w") as f:
        f.write("rank,traj_id,mean_p75\n")
        for i, traj_id in enumerate(ordering, start=1):
            f.write(f"{i},{traj_id},{by_id[traj_id].mean_risk!r}\n")
        f.write(f"least,{least},{by_id[least].mean_risk!r}\n")
        f.write(f"most,{most},{by_id[most].mean_risk!r}\n")
    report.save_ranking_figure(ordering, [by_id[t].mean_risk for t in ordering],
                               args.figure or args.out + ".png")


def back_project(dist_img: field.DistanceImage, cfg: Config, stride: int = 1):
    """Pinhole back-projection of valid depth pixels into 3D points."""
    points = []
    h, w = dist_img.data.shape
    for r in range(0, h, stride):
        for c in range(0, w, stride):
            z = dist_img.data[r, c]
            if np.isnan(z):
                continue
            x = (c - cfg.cx) * z / cfg.fx
            y = (r - cfg.cy) * z / cfg.fy
            points.append(((r, c), np.array([x, y, float(z)])))
    return points


def cmd_plan(args, cfg: Config) -> None:
    model, object_lut, risk_lut, manip_feat = _load_eval_inputs(args, cfg)
    dist_img = field.read_distance_image(_require(args.depth))
    feat_img = field.read_feature_image(_require(args.features))
    if feat_img.shape != dist_img.data.shape:
        raise FormatError("feature and depth image shapes disagree")
    atten = AttenuationConfig(cfg.lam)
    memo: dict[bytes, field.PosteriorCurve] = {}
    cloud = []
    for (r, c), point in back_project(dist_img, cfg, stride=args.stride):
        feat = feat_img.data[r, c].astype(float)
        key = feat.tobytes()
        curve = memo.get(key)
        if curve is None:
            curve = field.posterior_curve(model, object_lut, risk_lut, args.manip,
                                          manip_feat, feat, atten, cfg.d_max)
            memo[key] = curve
        cloud.append((point, curve))
    obstacles = planner.inflate_point_cloud(cloud, alpha=cfg.alpha, voxel=cfg.voxel)
    plan_cfg = planner.PlannerConfig(resolution=cfg.resolution,
                                     bounds_min=tuple(cfg.bounds_min),
                                     bounds_max=tuple(cfg.bounds_max))
    start = np.array([float(v) for v in args.start.split(",")])
    goal = np.array([float(v) for v in args.goal.split(",")])
    path = planner.plan(start, goal, obstacles, plan_cfg)
    planner.save_path(path, args.out)
    planner.save_obstacles(obstacles, args.out + ".obstacles.txt")
    clearance = planner.path_clearance(path, obstacles, step=cfg.resolution / 2)
    with open(args.clearance_report or args.out + ".clearance.csv", "w") as f:
        f.write("waypoints,length,min_clearance,obstacles\n")
        f.write(f"{len(path.waypoints)},{path.length!r},{clearance!r},{len(obstacles)}\n")
    report.save_path_figure(path, obstacles, args.figure or args.out + ".png")


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bayesrisk",
        description="Bayesian contextual risk fields: train, evaluate, score, rank, plan.")
    parser.add_argument("--config", help="INI config file (flags override single keys)")
    parser.add_argument("--seed", type=int, help="override [risk] seed")
    parser.add_argument("--d-max", type=float, dest="d_max", help="distance domain in meters")
    parser.add_argument("--lambda", type=float, dest="lam", help="prior attenuation rate (1/m)")
    parser.add_argument("--alpha", type=float, help="viability threshold for radii")
    parser.add_argument("--percentile", type=float, help="frame percentile for scoring")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-world", help="write synthetic category samples and risk table")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--categories", type=int, default=5)
    p.add_argument("--world-seed", type=int, default=0)
    p.add_argument("--samples-per-category", type=int, default=40)
    p.set_defaults(func=cmd_gen_world)

    p = sub.add_parser("gen-demos", help="write a synthetic demonstration log")
    p.add_argument("--out", required=True)
    p.add_argument("--categories", type=int, default=5)
    p.add_argument("--world-seed", type=int, default=0)
    p.add_argument("--traj-per-pair", type=int, default=5)
    p.add_argument("--frames", type=int, default=25)
    p.set_defaults(func=cmd_gen_demos)

    p = sub.add_parser("gen-scene", help="write a synthetic labeled scene")
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--categories", type=int, default=5)
    p.add_argument("--world-seed", type=int, default=0)
    p.add_argument("--manip", default="")
    p.add_argument("--regions", type=int, default=4)
    p.add_argument("--height", type=int, default=24)
    p.add_argument("--width", type=int, default=24)
    p.add_argument("--distance", type=float, default=0.5)
    p.set_defaults(func=cmd_gen_scene)

    p = sub.add_parser("build-object-lut", help="K-means centroids per sample category")
    p.add_argument("--samples-dir", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_object_lut)

    p = sub.add_parser("build-risk-lut", help="ingest or generate the pairwise risk table")
    p.add_argument("--table", help="existing category_a|category_b|rating|reason file")
    p.add_argument("--categories-file", help="category list for endpoint generation")
    p.add_argument("--safe-category", action="append", help="zero-risk override category")
    p.add_argument("--default-rating", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_risk_lut)

    p = sub.add_parser("train", help="train the likelihood model from a demo log")
    p.add_argument("--demos", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--loss-csv")
    p.add_argument("--figure")
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", type=float, dest="learning_rate")
    p.add_argument("--width", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="dense risk image for a scene")
    p.add_argument("--model", required=True)
    p.add_argument("--object-lut", required=True)
    p.add_argument("--risk-lut", required=True)
    p.add_argument("--manip", required=True)
    p.add_argument("--manip-feature", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--distances", required=True)
    p.add_argument("--masks")
    p.add_argument("--default-rating", type=int, default=None)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("score", help="per-frame percentile scores over risk image streams")
    p.add_argument("--frames", required=True, help="glob of <traj>_<frame>.rimg files")
    p.add_argument("--window", type=int, default=0,
                   help="use only the first/last N frames per trajectory (0 = all)")
    p.add_argument("--out", required=True)
    p.add_argument("--figure")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("rank", help="sort trajectory scores, report least/most risky")
    p.add_argument("--scores", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--figure")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("plan", help="plan a path around posterior-inflated depth points")
    p.add_argument("--depth", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--object-lut", required=True)
    p.add_argument("--risk-lut", required=True)
    p.add_argument("--manip", required=True)
    p.add_argument("--manip-feature", required=True)
    p.add_argument("--default-rating", type=int, default=None)
    p.add_argument("--start", required=True, help="x,y,z meters")
    p.add_argument("--goal", required=True, help="x,y,z meters")
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--clearance-report")
    p.add_argument("--figure")
    p.set_defaults(func=cmd_plan)
    return parser


_OVERRIDES = ("seed", "d_max", "lam", "alpha", "percentile", "epochs",
              "learning_rate", "width", "layers", "batch_size")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        for name in _OVERRIDES:
            value = getattr(args, name, None)
            if value is not None:
                setattr(cfg, name, value)
        cfg.validate()
        args.func(args, cfg)
        return 0
    except FileNotFoundError as exc:
        print(f"error: missing input: {exc}", file=sys.stderr)
        return EXIT_INPUT_MISSING
    except DatasetError as exc:
        print(f"error: dataset: {exc}", file=sys.stderr)
        return EXIT_DATASET
    except FormatError as exc:
        print(f"error: format: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except ScoringError as exc:
        print(f"error: scoring: {exc}", file=sys.stderr)
        return EXIT_SCORING
    except PlanningError as exc:
        print(f"error: planning: {exc}", file=sys.stderr)
        return EXIT_PLANNING
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_INPUT_MISSING
    except BayesRiskError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
