//! `symps`: render, solve, evaluate, and inspect symmetric-light photometric stereo data.
//!
//! Exit codes: 0 success, 2 configuration error, 3 IO error, 4 unsupported
//! light arrangement, 1 anything else.

mod images;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use symps::constraints::{numeric_rank, ConstraintLayout, DEFAULT_RANK_TOL};
use symps::io::{read_json, CameraConfig, FloatImage, Manifest, Provenance, RigConfig, SceneConfig};
use symps::metrics::{evaluate, Alignment};
use symps::oracle::{brute_force_image, DepthGrid};
use symps::probe::ProbePixel;
use symps::render::{apply_noise, render_with};
use symps::solver::{Observations, DEFAULT_SHADOW_THRESHOLD};
use symps::{classify_arrangement, Error, Execution, Falloff, SolveOptions, SymmetricRig, Vec3};

#[derive(Parser)]
#[command(name = "symps", version, about = "Near-light photometric stereo with symmetric light pairs")]
struct Cli {
    /// Run per-pixel work on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic dataset with ground truth.
    Render {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        rig: PathBuf,
        #[arg(long)]
        camera: PathBuf,
        #[arg(long, default_value = "cubic")]
        falloff: Falloff,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recover normals, depth, and albedo from a dataset.
    Solve {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        rig: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SHADOW_THRESHOLD)]
        shadow_threshold: f64,
        #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
        rank_tol: f64,
    },
    /// Compare a solution against ground truth and write report.json.
    Eval {
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Align depth by shift only (for metric depth).
        #[arg(long)]
        shift_only: bool,
    },
    /// Classify a rig and measure constraint ranks on a synthetic pixel.
    Check {
        #[arg(long)]
        rig: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Brute-force depth search along each viewing ray.
    Oracle {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        rig: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "relaxed")]
        falloff: Falloff,
        #[command(flatten)]
        grid: GridArgs,
    },
}

#[derive(Args)]
struct GridArgs {
    /// Nominal scene distance; the default grid spans [0.25, 2] times it.
    #[arg(long, default_value_t = 6.0)]
    distance: f64,
    #[arg(long)]
    grid_min: Option<f64>,
    #[arg(long)]
    grid_max: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    grid_steps: usize,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io { .. } | Error::Pfm(_) => 3,
            Error::UnsupportedArrangement(_) => 4,
            Error::Config { .. }
            | Error::InvalidRig(_)
            | Error::InvalidCamera(_)
            | Error::InvalidScene(_)
            | Error::RigNotMetric(_)
            | Error::DegenerateBasis { .. }
            | Error::Shape(_)
            | Error::Json(_) => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    let outcome = match cli.command {
        Command::Render {
            scene,
            rig,
            camera,
            falloff,
            out,
        } => cmd_render(&scene, &rig, &camera, falloff, &out, exec),
        Command::Solve {
            manifest,
            rig,
            out,
            shadow_threshold,
            rank_tol,
        } => cmd_solve(
            &manifest,
            &rig,
            &out,
            SolveOptions {
                shadow_threshold,
                rank_tol,
                execution: exec,
            },
        ),
        Command::Eval {
            estimate,
            truth,
            shift_only,
        } => cmd_eval(&estimate, &truth, shift_only),
        Command::Check { rig, seed } => cmd_check(&rig, seed),
        Command::Oracle {
            manifest,
            rig,
            out,
            falloff,
            grid,
        } => cmd_oracle(&manifest, &rig, &out, falloff, &grid, exec),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_rig(path: &Path) -> CliResult<(RigConfig, SymmetricRig)> {
    let config: RigConfig = read_json(path)?;
    let rig = config.to_rig()?;
    Ok((config, rig))
}

fn create_dir(path: &Path) -> CliResult {
    std::fs::create_dir_all(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn manifest_dir(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

fn load_observations(manifest_path: &Path, rig: &SymmetricRig) -> CliResult<(Manifest, Observations)> {
    let manifest = Manifest::load(manifest_path)?;
    manifest.check_rig(rig)?;
    let dir = manifest_dir(manifest_path);
    let images = manifest.read_images(dir)?;
    let (width, height) = (manifest.camera.width, manifest.camera.height);
    let mask = match manifest.mask_path(dir) {
        Some(p) => Some(images::read_mask(&p, width, height)?),
        None => None,
    };
    Ok((
        manifest,
        Observations {
            width,
            height,
            images,
            mask,
        },
    ))
}

fn cmd_render(
    scene_path: &Path,
    rig_path: &Path,
    camera_path: &Path,
    falloff: Falloff,
    out: &Path,
    exec: Execution,
) -> CliResult {
    let scene_config: SceneConfig = read_json(scene_path)?;
    let scene = scene_config.to_scene()?;
    let (rig_config, mut rig) = load_rig(rig_path)?;
    let camera_config: CameraConfig = read_json(camera_path)?;
    let camera = camera_config.to_camera()?;
    if rig.absolute_radius.is_none() {
        return Err(Error::RigNotMetric("absolute_radius is required to render").into());
    }
    if rig.offset_truth.is_none() {
        rig = rig.with_offset_truth(Vec3::zeros());
    }

    let mut stack = render_with(&scene, &rig, &camera, falloff, exec)?;
    if let Some(noise) = scene_config.noise_model() {
        apply_noise(&mut stack, &noise)?;
    }

    create_dir(out)?;
    let (w, h) = (camera.width, camera.height);
    let entries = Manifest::light_entries(rig.n_pairs());
    for (entry, image) in entries.iter().zip(&stack.images) {
        FloatImage::from_scalars(w, h, image)?.write(&out.join(&entry.path))?;
    }
    FloatImage::from_vectors(w, h, &stack.gt_normal)?.write(&out.join("gt_normal.pfm"))?;
    FloatImage::from_scalars(w, h, &stack.gt_depth)?.write(&out.join("gt_depth.pfm"))?;
    images::write_mask(&out.join("mask.png"), w, h, &stack.mask)?;
    let manifest = Manifest {
        images: entries,
        camera: camera_config,
        mask: Some("mask.png".into()),
        provenance: Provenance::Rendered {
            falloff: falloff.name().into(),
            rig: rig_config,
            scene: scene_config,
        },
        notes: vec![
            "gt_depth is the camera-frame z coordinate in scene units".into(),
            "normals point toward the camera (negative z)".into(),
        ],
    };
    manifest.save(&out.join("manifest.json"))?;
    println!(
        "rendered {} images ({} of {} pixels valid) to {}",
        stack.images.len(),
        stack.valid_count(),
        camera.pixel_count(),
        out.display()
    );
    Ok(())
}

fn cmd_solve(manifest_path: &Path, rig_path: &Path, out: &Path, options: SolveOptions) -> CliResult {
    let (_, rig) = load_rig(rig_path)?;
    let class = classify_arrangement(&rig);
    if !class.recovers_position() {
        return Err(Error::UnsupportedArrangement(format!("{}: {}", class.kind, class.diagnostic)).into());
    }
    let (manifest, observations) = load_observations(manifest_path, &rig)?;
    let camera = manifest.camera.to_camera()?;
    let map = symps::solve_image(&observations, &rig, &camera, &options)?;

    create_dir(out)?;
    let (w, h) = (map.width, map.height);
    let normals = map.normals();
    FloatImage::from_vectors(w, h, &normals)?.write(&out.join("normal.pfm"))?;
    FloatImage::from_scalars(w, h, &map.depth(rig.absolute_radius))?.write(&out.join("depth.pfm"))?;
    FloatImage::from_scalars(w, h, &map.scaled_albedo())?.write(&out.join("albedo.pfm"))?;
    images::write_gray(&out.join("status.png"), w, h, map.status_codes())?;
    images::write_normal_vis(&out.join("normal_vis.png"), w, h, &normals)?;

    let depth_units = if rig.absolute_radius.is_some() {
        "scene units, measured from the light plane"
    } else {
        "normalized units"
    };
    let info = serde_json::json!({
        "arrangement": class.kind.name(),
        "diagnostic": class.diagnostic,
        "depth_units": depth_units,
        "albedo": "albedo divided by the first pair's radius",
        "status_codes": {"0": "ok", "1": "shadowed", "2": "sign_conflict", "3": "degenerate", "4": "masked"},
        "normal_vis": "RGB = ((nx + 1) / 2, (ny + 1) / 2, (1 - nz) / 2)",
        "ok_pixels": map.ok_count(),
        "pixels": w * h,
    });
    symps::io::write_json(&out.join("solution.json"), &info)?;
    println!(
        "{}: solved {} of {} pixels ({})",
        class.kind,
        map.ok_count(),
        w * h,
        depth_units
    );
    Ok(())
}

fn cmd_eval(estimate: &Path, truth: &Path, shift_only: bool) -> CliResult {
    let est_normal = FloatImage::read(&estimate.join("normal.pfm"))?;
    let est_depth = FloatImage::read(&estimate.join("depth.pfm"))?;
    let gt_normal = FloatImage::read(&truth.join("gt_normal.pfm"))?;
    let gt_depth = FloatImage::read(&truth.join("gt_depth.pfm"))?;
    let (w, h) = (gt_depth.width, gt_depth.height);
    let mask_path = truth.join("mask.png");
    let mask = if mask_path.exists() {
        images::read_mask(&mask_path, w, h)?
    } else {
        vec![true; w * h]
    };
    let alignment = if shift_only {
        Alignment::ShiftOnly
    } else {
        Alignment::Affine
    };
    let report = evaluate(
        &est_normal.to_vectors()?,
        &est_depth.to_scalars()?,
        &gt_normal.to_vectors()?,
        &gt_depth.to_scalars()?,
        &mask,
        alignment,
    )?;
    symps::io::write_json(&estimate.join("report.json"), &report)?;
    FloatImage::from_scalars(w, h, &report.angular_error_map)?.write(&estimate.join("angular_error.pfm"))?;
    FloatImage::from_scalars(w, h, &report.depth_error_map)?.write(&estimate.join("depth_error.pfm"))?;
    println!("{}", serde_json::to_string_pretty(&report).map_err(Error::from)?);
    Ok(())
}

fn cmd_check(rig_path: &Path, seed: u64) -> CliResult {
    let (_, rig) = load_rig(rig_path)?;
    let class = classify_arrangement(&rig);
    let n = rig.n_pairs();
    println!("arrangement: {}", class.kind);
    println!("diagnostic: {}", class.diagnostic);
    if class.recovers_position() && !rig.is_collinear() {
        println!(
            "predicted ranks: A = {}, [A; A'] = {} (unknowns {})",
            2 * n - 3,
            2 * n - 1,
            2 * n
        );
    } else {
        println!("predicted ranks: no general-position prediction for this arrangement (unknowns {})", 2 * n);
    }
    match ConstraintLayout::new(&rig) {
        Ok(layout) => {
            let probe = ProbePixel::generic(&rig, seed);
            let system = layout.build(&probe.stack);
            println!(
                "measured ranks: A = {}, [A; A'] = {}",
                numeric_rank(&system.a.matrix, DEFAULT_RANK_TOL),
                numeric_rank(&system.stacked(), DEFAULT_RANK_TOL)
            );
        }
        Err(e) => println!("measured ranks: unavailable ({e})"),
    }
    if class.recovers_position() {
        Ok(())
    } else {
        Err(Failure {
            code: 4,
            message: format!("unsupported arrangement: {}: {}", class.kind, class.diagnostic),
        })
    }
}

fn cmd_oracle(
    manifest_path: &Path,
    rig_path: &Path,
    out: &Path,
    falloff: Falloff,
    grid: &GridArgs,
    exec: Execution,
) -> CliResult {
    let (_, rig) = load_rig(rig_path)?;
    rig.metric_positions()?;
    let grid = DepthGrid::new(
        grid.grid_min.unwrap_or(0.25 * grid.distance),
        grid.grid_max.unwrap_or(2.0 * grid.distance),
        grid.grid_steps,
    )?;
    let (manifest, observations) = load_observations(manifest_path, &rig)?;
    let camera = manifest.camera.to_camera()?;
    let map = brute_force_image(&observations, &rig, &camera, &grid, falloff, exec)?;

    create_dir(out)?;
    let (w, h) = (map.width, map.height);
    FloatImage::from_scalars(w, h, &map.depth())?.write(&out.join("oracle_depth.pfm"))?;
    FloatImage::from_vectors(w, h, &map.normals())?.write(&out.join("oracle_normal.pfm"))?;
    FloatImage::from_scalars(w, h, &map.residuals())?.write(&out.join("oracle_residual.pfm"))?;
    let searched = map.fits.iter().filter(|f| f.depth.is_finite()).count();
    println!(
        "oracle searched {searched} of {} pixels over [{}, {}] with step {:.3e}",
        w * h,
        grid.z_min,
        grid.z_max,
        grid.step()
    );
    Ok(())
}
