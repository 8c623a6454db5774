"""Command-line front end.

Sub-commands::

    init-sphere        fit a fresh field network to a sphere SDF
    render             render color, depth, opacity and feature buffers
    extract-mesh       sample the SDF on a grid and run marching cubes
    eval-consistency   frontal/side depth and reprojection consistency
    gradcheck          finite-difference check of the field derivatives

Every run writes into its own directory with a ``manifest.json``. Exit codes:
0 success, 1 configuration or usage error, 2 runtime or numeric error.
"""

import argparse
import json
import logging
import shutil
import sys
from pathlib import Path

import numpy as np
from pydantic import ValidationError
from tqdm import tqdm

from camera.pose import save_camera
from commands.config import apply_overrides, config_to_json, load_config
from common.errors import (
    EvaluationError,
    FormatError,
    ParameterError,
    PreconditionError,
    SdfRenderError,
    ShapeError,
    TrainingError,
)
from common.logging_setup import configure_logging
from consistency.evaluate import evaluate_pair, save_aggregate, write_report
from field.analytic import AnalyticSdf
from field.gradcheck import run_gradcheck
from field.network import FieldNetwork, sdf_input_gradient
from field.scene import as_scene
from field.serialization import load_network, save_network
from geometry.grid import sample_grid, save_grid
from geometry.mesh import attach_vertex_noise, marching_cubes, subdivide
from geometry.mesh_io import export_mesh
from losses.regularizers import field_regularizers
from losses.sphere_init import save_history, sphere_fit_residual, sphere_init_fit
from rendering.density import DensityParams
from rendering.export import export_buffers
from rendering.renderer import render

logger = logging.getLogger(__name__)

RUNS_DIR = Path("runs")
EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
CORRUPTION_SCALE = 1.01
FRONTAL_DIRECTION = (0.0, 0.0, -1.0)
REGULARIZER_POINTS = 4096


class RunDirectoryExists(SdfRenderError):
    """The run directory already exists and ``--force`` was not given."""


class GradientCheckFailure(SdfRenderError, RuntimeError):
    """Analytic and numeric gradients disagree beyond the tolerance."""


def prepare_run_dir(path, force):
    path = Path(path)
    if path.exists():
        if not force:
            raise RunDirectoryExists(f"{path} already exists; pass --force to overwrite it")
        shutil.rmtree(path)
    path.mkdir(parents=True)
    return path


def write_manifest(run_dir, command, config, artifacts, **extra):
    manifest = {"command": command, "seed": config.seed, "config": config_to_json(config), "artifacts": artifacts}
    manifest.update(extra)
    (run_dir / "manifest.json").write_text(json.dumps(manifest, indent=2))
    logger.info("Saved manifest to %s", run_dir / "manifest.json")
    return manifest


def streams(config, count):
    """Independent generators spawned from the run seed, in a fixed order."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(config.seed).spawn(count)]


def build_field(config, rng):
    """Resolve the configured scene; a network gets its latent code from ``rng``."""
    scene = config.scene
    if scene.kind == "sphere":
        return AnalyticSdf.sphere(scene.radius, scene.center)
    if scene.kind == "box":
        return AnalyticSdf.box(scene.half_extents, scene.center)
    if scene.kind == "torus":
        return AnalyticSdf.torus(scene.major, scene.minor, scene.center)
    net = load_network(scene.network)
    mods = net.modulations(rng.standard_normal(net.architecture.z_dim))
    view = FRONTAL_DIRECTION if config.render.frontal_view else None
    return as_scene(net, mods, view_direction=view)


# --- commands ---------------------------------------------------------------


def cmd_init_sphere(config, run_dir, threads=None):
    """Fit a freshly initialised network to a sphere and save it with its loss history."""
    init_rng, fit_rng, eval_rng = streams(config, 3)
    net = FieldNetwork.initialize(config.network.architecture(), init_rng)
    settings = config.sphere_init.settings()
    try:
        fitted, history = sphere_init_fit(net, settings, fit_rng, progress=True)
    except TrainingError as exc:
        if exc.history is not None:
            save_history(exc.history, run_dir / "loss.csv")
        write_manifest(run_dir, "init-sphere", config, ["loss.csv"], status="diverged")
        raise
    save_network(fitted, run_dir / "network.sdfn")
    save_history(history, run_dir / "loss.csv")

    residual = sphere_fit_residual(fitted, settings.radius, eval_rng)
    z = eval_rng.standard_normal(net.architecture.z_dim)
    points = eval_rng.uniform(-settings.box_half, settings.box_half, (REGULARIZER_POINTS, 3))
    regs = field_regularizers(fitted, fitted.modulations(z), points, config.losses.weights())
    logger.info("Sphere fit residual %.3e, eikonal %.3e", residual, regs.eikonal)
    return write_manifest(
        run_dir,
        "init-sphere",
        config,
        ["network.sdfn", "loss.csv"],
        status="ok",
        final_loss=float(history[-1]),
        residual=residual,
        regularizers={"eikonal": regs.eikonal, "surface": regs.surface, "total": regs.total},
    )


def cmd_render(config, run_dir, threads=None):
    """Render the scene from the configured camera and write every buffer."""
    scene_rng, render_rng = streams(config, 2)
    field = build_field(config, scene_rng)
    cam = config.camera.pose(config.render.resolution)
    params = DensityParams(config.render.alpha)
    buffers = render(field, cam, params, config.render.n_samples, render_rng, threads=threads)
    artifacts = export_buffers(buffers, run_dir, cam.near, cam.far)
    save_camera(cam, run_dir / "camera.json")
    return write_manifest(
        run_dir,
        "render",
        config,
        artifacts + ["camera.json"],
        camera=cam.to_dict(),
        alpha=params.alpha,
        n_samples=config.render.n_samples,
        bin_size=buffers.bin_size,
        valid_pixels=int(buffers.valid.sum()),
    )


def cmd_extract_mesh(config, run_dir, threads=None):
    """Grid sample, marching cubes, optional subdivision and noise, then export."""
    scene_rng, noise_rng = streams(config, 2)
    field = build_field(config, scene_rng)
    block = config.mesh
    grid = sample_grid(field, block.bounds, block.resolution, threads=threads)
    artifacts = []
    if block.save_grid:
        save_grid(grid, run_dir / "grid.raw")
        artifacts += ["grid.raw", "grid.json"]
    mesh = marching_cubes(grid, block.iso)
    for _ in range(block.subdivide):
        mesh = subdivide(mesh)
    if block.noise:
        mesh = attach_vertex_noise(mesh, noise_rng)
    name = f"mesh.{block.format}"
    export_mesh(mesh, run_dir / name, block.format)
    return write_manifest(
        run_dir,
        "extract-mesh",
        config,
        artifacts + [name],
        vertices=mesh.n_vertices,
        faces=mesh.n_faces,
        bounds=grid.bounds.tolist(),
    )


def cmd_eval_consistency(config, run_dir, threads=None):
    """Evaluate frontal/side consistency for every requested identity."""
    block = config.consistency
    frontal = config.camera.pose(block.resolution)
    side = config.camera.side_pose(block.resolution)
    params = DensityParams(block.alpha)
    records, artifacts = [], []
    identity_seeds = np.random.SeedSequence(config.seed).spawn(block.identities)
    for index, seed in enumerate(tqdm(identity_seeds, desc="Consistency", unit="identity")):
        scene_rng, eval_rng = (np.random.default_rng(s) for s in seed.spawn(2))
        field = build_field(config, scene_rng)
        report = evaluate_pair(
            field,
            frontal,
            side,
            n_samples=block.n_samples,
            resolution=block.resolution,
            params=params,
            rng=eval_rng,
            threads=threads,
            mask_occlusion=block.mask_occlusion,
        )
        stem = f"identity_{index:03d}"
        artifacts += write_report(report, run_dir, stem=stem, clouds=block.export_clouds)
        records.append(report.to_record())
    frame = save_aggregate(records, run_dir / "consistency.csv")
    return write_manifest(
        run_dir,
        "eval-consistency",
        config,
        artifacts + ["consistency.csv"],
        frontal_camera=frontal.to_dict(),
        side_camera=side.to_dict(),
        alpha=params.alpha,
        n_samples=block.n_samples,
        mean_chamfer=float(frame["chamfer"].iloc[-1]),
    )


def corrupted_input_gradient(net, x, mods):
    return CORRUPTION_SCALE * sdf_input_gradient(net, x, mods)


def cmd_gradcheck(config, run_dir, threads=None, corrupt_gradient=False):
    """Compare analytic and finite-difference gradients; fail on any breach."""
    (rng,) = streams(config, 1)
    gradient_fn = corrupted_input_gradient if corrupt_gradient else sdf_input_gradient
    report = run_gradcheck(config.gradcheck.settings(), rng, input_gradient_fn=gradient_fn)
    report.to_csv(run_dir / "gradcheck.csv", index=False)
    print(report.to_string(index=False))
    passed = bool(report["passed"].all())
    write_manifest(run_dir, "gradcheck", config, ["gradcheck.csv"], passed=passed, corrupted=corrupt_gradient)
    if not passed:
        failing = ", ".join(report.loc[~report["passed"], "layer"])
        raise GradientCheckFailure(f"gradient check failed for: {failing}")
    return report


# --- argument parsing -------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="sdfvr", description="SDF volume rendering and view-consistency toolkit")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration")
    common.add_argument("--seed", type=int, help="Run seed (unsigned 64-bit)")
    common.add_argument("--threads", type=int, default=None, help="Worker threads (default: all cores)")
    common.add_argument("--force", action="store_true", help="Overwrite an existing run directory")
    common.add_argument("--output", type=Path, help="Run directory (default: runs/<command>-<seed>)")
    common.add_argument("--log-level", default="INFO", help="Logging level")

    scene = argparse.ArgumentParser(add_help=False)
    scene.add_argument("--network", help="Field network file; switches the scene to the network")

    pose = argparse.ArgumentParser(add_help=False)
    pose.add_argument("--azimuth", type=float)
    pose.add_argument("--elevation", type=float)
    pose.add_argument("--fov", type=float)
    pose.add_argument("--dataset", choices=["ffhq", "afhq"])

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init-sphere", parents=[common], help="Fit a network to a sphere SDF")
    p.add_argument("--iterations", type=int)
    p.add_argument("--radius", type=float)

    p = sub.add_parser("render", parents=[common, scene, pose], help="Render buffers")
    p.add_argument("--alpha", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--resolution", type=int)
    p.add_argument("--frontal-view", action="store_true", default=None, help="Fix the colour view direction")

    p = sub.add_parser("extract-mesh", parents=[common, scene], help="Extract a mesh with marching cubes")
    p.add_argument("--resolution", type=int)
    p.add_argument("--subdivide", type=int, metavar="K")
    p.add_argument("--noise", action="store_true", default=None, help="Attach per-vertex Gaussian noise")
    p.add_argument("--format", choices=["ply", "obj"])

    p = sub.add_parser("eval-consistency", parents=[common, scene, pose], help="Depth and reprojection consistency")
    p.add_argument("--alpha", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--resolution", type=int)
    p.add_argument("--side-azimuth", type=float)
    p.add_argument("--side-elevation", type=float)
    p.add_argument("--identities", type=int)
    p.add_argument("--export-clouds", action="store_true", default=None)
    p.add_argument("--no-occlusion", action="store_true", help="Count occluded pixels in the reprojection error")

    p = sub.add_parser("gradcheck", parents=[common], help="Finite-difference gradient check")
    p.add_argument("--corrupt-gradient", action="store_true", help=argparse.SUPPRESS)
    return parser


def collect_overrides(args):
    """Map parsed flags onto dotted config keys; unset flags are None and ignored."""
    get = vars(args).get
    overrides = {
        "seed": get("seed"),
        "camera.azimuth": get("azimuth"),
        "camera.elevation": get("elevation"),
        "camera.fov_deg": get("fov"),
        "camera.dataset": get("dataset"),
        "camera.side_azimuth": get("side_azimuth"),
        "camera.side_elevation": get("side_elevation"),
    }
    if get("network"):
        overrides.update({"scene.kind": "network", "scene.network": get("network")})
    if args.command == "init-sphere":
        overrides.update({"sphere_init.iterations": get("iterations"), "sphere_init.radius": get("radius")})
    elif args.command == "render":
        overrides.update(
            {
                "render.alpha": get("alpha"),
                "render.n_samples": get("samples"),
                "render.resolution": get("resolution"),
                "render.frontal_view": get("frontal_view"),
            }
        )
    elif args.command == "extract-mesh":
        overrides.update(
            {
                "mesh.resolution": get("resolution"),
                "mesh.subdivide": get("subdivide"),
                "mesh.noise": get("noise"),
                "mesh.format": get("format"),
            }
        )
    elif args.command == "eval-consistency":
        overrides.update(
            {
                "consistency.alpha": get("alpha"),
                "consistency.n_samples": get("samples"),
                "consistency.resolution": get("resolution"),
                "consistency.identities": get("identities"),
                "consistency.export_clouds": get("export_clouds"),
                "consistency.mask_occlusion": False if get("no_occlusion") else None,
            }
        )
    return overrides


COMMANDS = {
    "init-sphere": cmd_init_sphere,
    "render": cmd_render,
    "extract-mesh": cmd_extract_mesh,
    "eval-consistency": cmd_eval_consistency,
    "gradcheck": cmd_gradcheck,
}


def main(argv=None):
    """Parse arguments, run one command and return its exit code."""
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        config = apply_overrides(load_config(args.config), collect_overrides(args))
        run_dir = prepare_run_dir(args.output or RUNS_DIR / f"{args.command}-{config.seed}", args.force)
        logger.info("Running %s into %s", args.command, run_dir)
        kwargs = {"corrupt_gradient": args.corrupt_gradient} if args.command == "gradcheck" else {}
        COMMANDS[args.command](config, run_dir, threads=args.threads, **kwargs)
    except (ValidationError, ParameterError, ShapeError, PreconditionError, RunDirectoryExists) as exc:
        logger.error("Configuration error: %s", exc)
        return EXIT_CONFIG
    except (TrainingError, EvaluationError, FormatError, GradientCheckFailure, OSError) as exc:
        logger.error("%s failed: %s", args.command, exc)
        return EXIT_RUNTIME
    logger.info("%s finished", args.command)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
