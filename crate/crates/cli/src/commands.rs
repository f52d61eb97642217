use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};

use speclight::components::{composite, render_components, CompositeMode, RenderComponents};
use speclight::diffuse::{gather_observations, robust_min_irls, IrlsParams};
use speclight::frame::Frame;
use speclight::geometry::{Scene, TriangleMesh};
use speclight::io::binary::{read_logits, write_counts, write_logits};
use speclight::io::dataset::{frame_stem, load_dataset, FrameFormat, LoadOptions, LoadedDataset};
use speclight::io::{pfm, ply, png};
use speclight::metrics::evaluate;
use speclight::optimizer::{optimize, OptimizerConfig};
use speclight::panorama::Panorama;
use speclight::raster::{RgbImage, ScalarImage};
use speclight::synth::{render_synthetic, write_synthetic, SyntheticSceneSpec};
use speclight::Error;

use crate::{
    ComponentsArgs, DatasetArgs, DiffuseArgs, EvalArgs, FrameFormatArg, RenderArgs, RunArgs,
    SplitArg, SrmArgs, SynthArgs,
};

pub const ALBEDO_FILE: &str = "albedo.ply";
pub const COUNTS_FILE: &str = "counts.bin";
pub const LOGITS_FILE: &str = "logits.bin";
pub const LOSS_FILE: &str = "loss.csv";
pub const MASK_FILE: &str = "mask.pfm";
pub const CONFIG_FILE: &str = "config.toml";

pub fn srm_file(i: usize) -> String {
    format!("srm_{i}.pfm")
}

#[derive(Debug)]
pub enum Failure {
    /// Bad flags or configuration values; exit code 1.
    Usage(String),
    /// Unreadable, missing or inconsistent inputs; exit code 2.
    Data(String),
    /// The optimization diverged; exit code 3.
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Data(e.to_string())
        }
    }
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir)
        .map_err(|e| Failure::Data(format!("cannot create {}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text)
        .map_err(|e| Failure::Data(format!("cannot write {}: {e}", path.display())))
}

fn load(args: &DatasetArgs, mesh: Option<PathBuf>) -> Result<LoadedDataset, Failure> {
    if args.stride == Some(0) {
        return Err(Failure::Usage("--stride must be at least 1".into()));
    }
    let options = LoadOptions {
        frames_dir: args.frames.clone(),
        mesh,
        stride: args.stride,
    };
    Ok(load_dataset(&args.scene, &options)?)
}

pub fn synth(args: &SynthArgs, seed: Option<u64>) -> Result<(), Failure> {
    let text = fs::read_to_string(&args.spec)
        .map_err(|e| Failure::Data(format!("cannot read {}: {e}", args.spec.display())))?;
    let mut spec: SyntheticSceneSpec = toml::from_str(&text)
        .map_err(|e| Failure::Usage(format!("{}: {e}", args.spec.display())))?;
    if let Some(s) = seed {
        spec.noise.seed = s;
    }
    // A relative environment path is relative to the spec file.
    if let Some(env) = &spec.env_path {
        if env.is_relative() {
            let base = args.spec.parent().unwrap_or(Path::new("."));
            spec.env_path = Some(base.join(env));
        }
    }
    spec.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let ds = render_synthetic(&spec)?;
    let format = match args.format {
        FrameFormatArg::Pfm => FrameFormat::Pfm,
        FrameFormatArg::Png => FrameFormat::Png,
        FrameFormatArg::Both => FrameFormat::Both,
    };
    write_synthetic(&args.out, &ds, format)?;
    println!(
        "wrote {} frames ({} test) and {} ground-truth SRMs to {}",
        ds.frames.len(),
        ds.test_ids.len(),
        ds.gt_srms.len(),
        args.out.display()
    );
    Ok(())
}

/// Estimates albedo from `frames`, stores it in the mesh and writes the
/// mesh and sample counts into `out`.
fn estimate_and_store(
    mesh: TriangleMesh,
    frames: &[Frame],
    params: IrlsParams,
    out: &Path,
) -> Result<TriangleMesh, Failure> {
    let scene = Scene::new(mesh);
    let obs = gather_observations(&scene, frames);
    let est = robust_min_irls(&obs, params);
    let low = est.low_confidence.iter().filter(|&&f| f).count();
    if low > 0 {
        warn!(
            "{low} of {} vertices have fewer than 3 observations",
            est.albedo.len()
        );
    }
    let mesh = scene.into_mesh().with_albedo(est.albedo)?;
    ply::write_mesh(&out.join(ALBEDO_FILE), &mesh)?;
    write_counts(&out.join(COUNTS_FILE), &est.counts)?;
    println!(
        "estimated albedo for {} vertices ({low} low-confidence) from {} frames",
        mesh.vertex_count(),
        frames.len()
    );
    Ok(mesh)
}

pub fn estimate_diffuse(args: &DiffuseArgs) -> Result<(), Failure> {
    if args.iterations == 0 || args.epsilon.is_nan() || args.epsilon <= 0.0 {
        return Err(Failure::Usage(
            "--iterations must be at least 1 and --epsilon positive".into(),
        ));
    }
    let data = load(&args.dataset, None)?;
    create_dir(&args.out)?;
    let params = IrlsParams {
        iterations: args.iterations,
        epsilon: args.epsilon,
    };
    estimate_and_store(data.scene.into_mesh(), &data.train, params, &args.out)?;
    Ok(())
}

fn optimizer_config(args: &SrmArgs, seed: Option<u64>) -> Result<OptimizerConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Data(format!("cannot read {}: {e}", path.display())))?;
            toml::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
        }
        None => OptimizerConfig::default(),
    };
    if let Some(v) = args.m {
        cfg.material_count = v;
    }
    if let Some(v) = args.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = args.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = args.lr_srm {
        cfg.lr_srm = v;
    }
    if let Some(v) = args.lr_logits {
        cfg.lr_logits = v;
    }
    if let Some(v) = args.lambda_s {
        cfg.lambda_sparsity = v;
    }
    if let Some(v) = args.lambda_w {
        cfg.lambda_smooth = v;
    }
    if let Some(w) = args.srm_width {
        cfg.srm_width = w;
        cfg.srm_height = w / 2;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(cfg)
}

pub fn estimate_srm(args: &SrmArgs, seed: Option<u64>) -> Result<(), Failure> {
    let cfg = optimizer_config(args, seed)?;
    let data = load(&args.dataset, None)?;
    if data.train.len() < 2 {
        return Err(Failure::Data(format!(
            "{} train frames after subsampling; at least 2 are needed",
            data.train.len()
        )));
    }
    create_dir(&args.out)?;
    let mesh = data.scene.into_mesh();
    let mesh = match &args.albedo {
        Some(path) => {
            let colored = ply::read_mesh(path)?;
            if colored.vertex_count() != mesh.vertex_count() {
                return Err(Failure::Data(format!(
                    "{} has {} vertices but the scene mesh has {}",
                    path.display(),
                    colored.vertex_count(),
                    mesh.vertex_count()
                )));
            }
            let mesh = mesh.with_albedo(colored.albedo().to_vec())?;
            ply::write_mesh(&args.out.join(ALBEDO_FILE), &mesh)?;
            mesh
        }
        None => estimate_and_store(mesh, &data.train, IrlsParams::default(), &args.out)?,
    };
    let scene = Scene::new(mesh);
    let recovery = optimize(&scene, &data.train, &cfg)?;

    for (i, srm) in recovery.srms().iter().enumerate() {
        pfm::write_panorama(&args.out.join(srm_file(i)), srm)?;
    }
    write_logits(&args.out.join(LOGITS_FILE), recovery.state.logits())?;
    let mask = &recovery.mask;
    let mask_image = ScalarImage::from_vec(
        mask.width(),
        mask.height(),
        mask.as_slice()
            .iter()
            .map(|&m| if m { 1.0 } else { 0.0 })
            .collect(),
    );
    pfm::write_scalar(&args.out.join(MASK_FILE), &mask_image)?;
    let mut csv = String::from("epoch,data,sparsity,smoothness\n");
    for e in &recovery.state.history {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            e.epoch, e.loss.data, e.loss.sparsity, e.loss.smoothness
        ));
    }
    write_text(&args.out.join(LOSS_FILE), &csv)?;
    let cfg_text = toml::to_string(&cfg).map_err(|e| Failure::Data(e.to_string()))?;
    write_text(&args.out.join(CONFIG_FILE), &cfg_text)?;
    if let Some(last) = recovery.state.history.last() {
        println!(
            "final epoch loss {:.6} (data {:.6}); {} of {} texels observed",
            last.loss.total(),
            last.loss.data,
            mask.as_slice().iter().filter(|&&m| m).count(),
            mask.len()
        );
    }
    Ok(())
}

/// A finished run: the dataset with the run's mesh, logits and SRMs.
struct LoadedRun {
    data: LoadedDataset,
    scene: Scene,
    srms: Vec<Panorama>,
}

fn load_run(args: &RunArgs) -> Result<LoadedRun, Failure> {
    if let Some(r0) = args.fresnel {
        if !(0.0..=1.0).contains(&r0) {
            return Err(Failure::Usage("--fresnel must lie in [0, 1]".into()));
        }
    }
    let data = load(&args.dataset, Some(args.run.join(ALBEDO_FILE)))?;
    let mut mesh = data.scene.mesh().clone();
    let (m, logits) = read_logits(&args.run.join(LOGITS_FILE), mesh.vertex_count())?;
    mesh.set_logits(m, logits)?;
    let srms = (0..m)
        .map(|i| pfm::read_panorama(&args.run.join(srm_file(i))))
        .collect::<Result<Vec<_>, _>>()?;
    info!("loaded run with {m} bases from {}", args.run.display());
    Ok(LoadedRun {
        data,
        scene: Scene::new(mesh),
        srms,
    })
}

fn predict(
    run: &LoadedRun,
    frame: &Frame,
    fresnel: Option<f64>,
) -> Result<(RenderComponents, RgbImage), Failure> {
    let c = render_components(&run.scene, &run.srms, &frame.camera)?;
    let image = match fresnel {
        Some(r0) => composite(&c, CompositeMode::Fresnel, r0)?,
        None => composite(&c, CompositeMode::Plain, 1.0)?,
    };
    Ok((c, image))
}

fn select(data: &LoadedDataset, split: SplitArg) -> Vec<&Frame> {
    let mut frames: Vec<&Frame> = match split {
        SplitArg::Train => data.train.iter().collect(),
        SplitArg::Test => data.test.iter().collect(),
        SplitArg::All => data.train.iter().chain(&data.test).collect(),
    };
    frames.sort_by_key(|f| f.id);
    frames
}

pub fn render(args: &RenderArgs) -> Result<(), Failure> {
    let run = load_run(&args.run)?;
    let frames = select(&run.data, args.split);
    if frames.is_empty() {
        return Err(Failure::Data("no frames in the selected split".into()));
    }
    create_dir(&args.out)?;
    for f in &frames {
        let (_, image) = predict(&run, f, args.run.fresnel)?;
        let stem = frame_stem(f.id);
        pfm::write_rgb(&args.out.join(format!("{stem}.pfm")), &image)?;
        png::write(&args.out.join(format!("{stem}.png")), &image, 0.0)?;
    }
    println!("rendered {} frames to {}", frames.len(), args.out.display());
    Ok(())
}

pub fn eval(args: &EvalArgs) -> Result<(), Failure> {
    let run = load_run(&args.run)?;
    if run.data.test.is_empty() {
        return Err(Failure::Data(
            "the dataset has no test frames; add a `test` list to its split file to evaluate"
                .into(),
        ));
    }
    let mut rendered = Vec::new();
    let mut truth = Vec::new();
    let mut masks = Vec::new();
    let mut cameras = Vec::new();
    for f in &run.data.test {
        let (c, image) = predict(&run, f, args.run.fresnel)?;
        rendered.push(image);
        truth.push(f.image.clone());
        masks.push(c.coverage);
        cameras.push((f.id, f.camera));
    }
    // Angles are measured against every train pose, not only the
    // subsampled ones.
    let train_cameras = run
        .data
        .dataset
        .split
        .train
        .iter()
        .map(|&id| {
            speclight::geometry::Camera::new(
                run.data.intrinsics,
                run.data.poses[id].world_from_camera,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let report = evaluate(
        &rendered,
        &truth,
        &masks,
        &cameras,
        &train_cameras,
        &run.scene.mesh().centroid(),
    )?;
    println!("frame        L1        L2      PSNR  angle");
    for f in &report.frames {
        let angle = f
            .view_angle_deg
            .map_or_else(|| "-".to_string(), |a| format!("{a:.2}"));
        println!(
            "{:>5} {:>9.5} {:>9.5} {:>9.3}  {angle}",
            f.frame, f.l1, f.l2, f.psnr
        );
    }
    println!(
        " mean {:>9.5} {:>9.5} {:>9.3}",
        report.mean_l1, report.mean_l2, report.mean_psnr
    );
    if let Some(path) = &args.out {
        let json =
            serde_json::to_string_pretty(&report).map_err(|e| Failure::Data(e.to_string()))?;
        write_text(path, &json)?;
    }
    Ok(())
}

pub fn components(args: &ComponentsArgs) -> Result<(), Failure> {
    let run = load_run(&args.run)?;
    let mut frames = select(&run.data, args.split);
    if !args.ids.is_empty() {
        frames.retain(|f| args.ids.contains(&f.id));
    }
    if frames.is_empty() {
        return Err(Failure::Data("no frames selected".into()));
    }
    create_dir(&args.out)?;
    let scalar = |mask: &[bool], w: usize, h: usize| {
        ScalarImage::from_vec(
            w,
            h,
            mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect(),
        )
    };
    for f in &frames {
        let (c, _) = predict(&run, f, args.run.fresnel)?;
        let (w, h) = (c.width(), c.height());
        let path =
            |tag: &str, ext: &str| args.out.join(format!("{}_{tag}.{ext}", frame_stem(f.id)));
        pfm::write_rgb(&path("D", "pfm"), &c.diffuse)?;
        pfm::write_rgb(&path("S", "pfm"), &c.specular)?;
        pfm::write_rgb(&path("R", "pfm"), &c.reflection)?;
        pfm::write_scalar(&path("V", "pfm"), &scalar(c.visibility.as_slice(), w, h))?;
        pfm::write_rgb(&path("FBI", "pfm"), &c.first_bounce)?;
        pfm::write_scalar(&path("FCI", "pfm"), &c.fresnel)?;
        png::write(&path("D", "png"), &c.diffuse, 0.0)?;
        png::write(&path("S", "png"), &c.specular, 0.0)?;
        png::write(&path("FBI", "png"), &c.first_bounce, 0.0)?;
        // Directions map from [-1, 1] to [0, 1] for viewing.
        let r = c.reflection.map(|d| d.map(|v| 0.5 * (v + 1.0)));
        png::write(&path("R", "png"), &r, 0.0)?;
    }
    println!(
        "wrote components for {} frames to {}",
        frames.len(),
        args.out.display()
    );
    Ok(())
}
