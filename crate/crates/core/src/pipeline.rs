//! End-to-end runs: simulate, reconstruct, super-resolve, baseline, sweep.

use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result, StageExt};
use crate::image::DynamicImage;
use crate::inr::{make_coordinates, model_values, HashEncoderConfig, MlpConfig, ModelConfig};
use crate::io::{render_frames, render_yt, ArrayContainer, ArrayData, Checkpoint, Precision, Window};
use crate::metrics::{evaluate, roi_curve, MetricsReport, RoiMask};
use crate::numerics::{is_power_of_two, ComplexArray, C64};
use crate::nufft::{CoilMaps, NufftOptions};
use crate::optim::{train, LossReport, ReconConfig};
use crate::phantom::{
    generate_dynamic_image, retrospective_undersample, simulate_coil_maps, AcquisitionMeta,
    KSpaceDataset, PhantomSpec,
};
use crate::trajectory::{golden_angle_trajectory, ramp_density_weights, Trajectory, TrajectoryShape};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhantomSection {
    pub n: usize,
    pub frames: usize,
    pub coils: usize,
    /// Per-component standard deviation of complex k-space noise.
    pub noise_std: f64,
    /// Directory written by `simulate`; when set, nothing is simulated.
    pub dataset: Option<PathBuf>,
}

impl Default for PhantomSection {
    fn default() -> Self {
        Self {
            n: 64,
            frames: 16,
            coils: 8,
            noise_std: 0.0,
            dataset: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectorySection {
    pub spokes_per_frame: usize,
    /// Readout length; `2·N` when absent.
    pub samples_per_spoke: Option<usize>,
}

impl Default for TrajectorySection {
    fn default() -> Self {
        Self {
            spokes_per_frame: 13,
            samples_per_spoke: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Artifact {
    Arrays,
    Images,
    YtSlices,
    Metrics,
    Loss,
    Checkpoint,
}

pub const ALL_ARTIFACTS: [Artifact; 6] = [
    Artifact::Arrays,
    Artifact::Images,
    Artifact::YtSlices,
    Artifact::Metrics,
    Artifact::Loss,
    Artifact::Checkpoint,
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub artifacts: Vec<Artifact>,
    /// Image column for y-t slices; `N/2` when absent.
    pub yt_column: Option<usize>,
    pub precision: Precision,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            artifacts: ALL_ARTIFACTS.to_vec(),
            yt_column: None,
            precision: Precision::F64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub lambda_s: Vec<f64>,
    pub lambda_l: Vec<f64>,
}

impl SweepSection {
    /// Cartesian product, `lambda_s` outer.
    pub fn grid(&self) -> Vec<(f64, f64)> {
        self.lambda_s
            .iter()
            .flat_map(|&s| self.lambda_l.iter().map(move |&l| (s, l)))
            .collect()
    }
}

/// Everything needed to reproduce one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub phantom: PhantomSection,
    #[serde(default)]
    pub trajectory: TrajectorySection,
    #[serde(default)]
    pub nufft: NufftOptions,
    #[serde(default)]
    pub encoder: HashEncoderConfig,
    #[serde(default)]
    pub mlp: MlpConfig,
    pub recon: ReconConfig,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
}

impl ExperimentSpec {
    /// Default phantom and acquisition with the given regularisation weights.
    pub fn new(lambda_s: f64, lambda_l: f64) -> Self {
        Self {
            seed: 0,
            phantom: PhantomSection::default(),
            trajectory: TrajectorySection::default(),
            nufft: NufftOptions::default(),
            encoder: HashEncoderConfig::default(),
            mlp: MlpConfig::default(),
            recon: ReconConfig::new(lambda_s, lambda_l),
            output: OutputSection::default(),
            sweep: None,
        }
    }

    pub fn model(&self) -> ModelConfig {
        ModelConfig {
            encoder: self.encoder,
            mlp: self.mlp,
        }
    }

    /// Recon settings with the experiment seed applied.
    pub fn recon_config(&self) -> ReconConfig {
        ReconConfig {
            seed: self.seed,
            ..self.recon.clone()
        }
    }

    pub fn samples_per_spoke(&self) -> usize {
        self.trajectory
            .samples_per_spoke
            .unwrap_or(2 * self.phantom.n)
    }

    pub fn validate(&self) -> Result<()> {
        self.recon.validate()?;
        self.model().validate()?;
        let p = &self.phantom;
        if !is_power_of_two(p.n) {
            return Err(Error::invalid(format!("phantom.n = {} must be a power of two", p.n)));
        }
        if p.frames == 0 || p.coils == 0 {
            return Err(Error::invalid("phantom.frames and phantom.coils must be >= 1"));
        }
        if !(p.noise_std >= 0.0) {
            return Err(Error::invalid("phantom.noise_std must be >= 0"));
        }
        if self.trajectory.spokes_per_frame == 0 {
            return Err(Error::invalid("trajectory.spokes_per_frame must be >= 1"));
        }
        let s = self.samples_per_spoke();
        if s < 2 || s % 2 != 0 {
            return Err(Error::invalid("trajectory.samples_per_spoke must be even and >= 2"));
        }
        if let Some(c) = self.output.yt_column {
            if c >= p.n {
                return Err(Error::invalid(format!("output.yt_column {c} outside 0..{}", p.n)));
            }
        }
        if let Some(sw) = &self.sweep {
            if sw.lambda_s.is_empty() || sw.lambda_l.is_empty() {
                return Err(Error::invalid("sweep grids must be nonempty"));
            }
        }
        Ok(())
    }

    fn wants(&self, a: Artifact) -> bool {
        self.output.artifacts.contains(&a)
    }
}

/// Acceleration factor `N / M` rounded to one decimal.
pub fn acceleration_factor(n: usize, spokes_per_frame: usize) -> String {
    format!("{:.1}", n as f64 / spokes_per_frame as f64)
}

/// Ground truth and its retrospectively undersampled acquisition.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub phantom: PhantomSpec,
    pub truth: DynamicImage,
    pub dataset: KSpaceDataset,
}

pub fn simulate(spec: &ExperimentSpec) -> Result<Simulation> {
    spec.validate()?;
    let p = &spec.phantom;
    let mut phantom = PhantomSpec::cardiac(p.n, p.frames);
    phantom.noise_std = p.noise_std;
    let truth = generate_dynamic_image(&phantom).stage("phantom")?;
    let coils = simulate_coil_maps(p.n, p.coils, spec.seed).stage("coils")?;
    let traj = golden_angle_trajectory(
        p.n,
        p.frames,
        spec.trajectory.spokes_per_frame,
        spec.samples_per_spoke(),
    )
    .stage("trajectory")?;
    let dataset = retrospective_undersample(
        &truth,
        &coils,
        &traj,
        p.noise_std,
        spec.seed.wrapping_add(1),
        spec.nufft,
    )
    .stage("undersample")?;
    Ok(Simulation {
        phantom,
        truth,
        dataset,
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetSidecar {
    trajectory: TrajectoryShape,
    meta: AcquisitionMeta,
}

const KSPACE_FILE: &str = "kspace.arr";
const COILS_FILE: &str = "coils.arr";
const TRAJECTORY_FILE: &str = "trajectory.arr";
const SIDECAR_FILE: &str = "trajectory.json";
const TRUTH_FILE: &str = "truth.arr";

/// Writes k-space, coil maps, trajectory (`T × M × S × 2`) with its JSON
/// sidecar and, when given, the ground truth. Returns the written paths.
pub fn write_dataset(dir: &Path, dataset: &KSpaceDataset, truth: Option<&DynamicImage>) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let shape = dataset.trajectory.shape();
    let mut written = Vec::new();
    let mut put = |name: &str, c: ArrayContainer| -> Result<()> {
        let path = dir.join(name);
        c.write(&path)?;
        written.push(path);
        Ok(())
    };
    put(KSPACE_FILE, ArrayContainer::complex(&dataset.samples, "kspace", Precision::F64))?;
    put(COILS_FILE, ArrayContainer::complex(dataset.coils.as_array(), "coil_maps", Precision::F64))?;
    let coords: Vec<f64> = dataset.trajectory.coords().iter().flat_map(|k| *k).collect();
    put(
        TRAJECTORY_FILE,
        ArrayContainer::new(
            vec![shape.frames, shape.spokes_per_frame, shape.samples_per_spoke, 2],
            "trajectory",
            ArrayData::F64(coords),
        )?,
    )?;
    if let Some(t) = truth {
        put(TRUTH_FILE, ArrayContainer::complex(&t.to_array(), "ground_truth", Precision::F64))?;
    }
    let sidecar = DatasetSidecar {
        trajectory: shape,
        meta: dataset.meta.clone(),
    };
    let path = dir.join(SIDECAR_FILE);
    fs::write(&path, serde_json::to_string_pretty(&sidecar)? + "\n")?;
    written.push(path);
    Ok(written)
}

/// Reads a directory written by [`write_dataset`].
pub fn load_dataset(dir: &Path) -> Result<(KSpaceDataset, Option<DynamicImage>)> {
    let sidecar_path = dir.join(SIDECAR_FILE);
    let sidecar: DatasetSidecar = serde_json::from_str(&fs::read_to_string(&sidecar_path)?)
        .map_err(|e| Error::format(&sidecar_path, e.to_string()))?;
    let samples = ArrayContainer::read(&dir.join(KSPACE_FILE))?.to_complex()?;
    let coils = CoilMaps::new(ArrayContainer::read(&dir.join(COILS_FILE))?.to_complex()?)?;
    let traj_path = dir.join(TRAJECTORY_FILE);
    let traj = ArrayContainer::read(&traj_path)?;
    let ArrayData::F64(flat) = traj.data else {
        return Err(Error::format(traj_path, "trajectory must be f64"));
    };
    let coords = flat.chunks_exact(2).map(|k| [k[0], k[1]]).collect();
    let trajectory = Trajectory::from_parts(sidecar.trajectory, coords)?;
    let truth_path = dir.join(TRUTH_FILE);
    let truth = if truth_path.exists() {
        Some(DynamicImage::from_array(ArrayContainer::read(&truth_path)?.to_complex()?)?)
    } else {
        None
    };
    Ok((KSpaceDataset::new(samples, trajectory, coils, sidecar.meta)?, truth))
}

/// Data to reconstruct: loaded from `phantom.dataset` or simulated.
pub struct Acquisition {
    pub dataset: KSpaceDataset,
    pub truth: Option<DynamicImage>,
    pub phantom: Option<PhantomSpec>,
}

pub fn acquire(spec: &ExperimentSpec) -> Result<Acquisition> {
    match &spec.phantom.dataset {
        Some(dir) => {
            let (dataset, truth) = load_dataset(dir).stage("load")?;
            Ok(Acquisition {
                dataset,
                truth,
                phantom: None,
            })
        }
        None => {
            let sim = simulate(spec)?;
            Ok(Acquisition {
                dataset: sim.dataset,
                truth: Some(sim.truth),
                phantom: Some(sim.phantom),
            })
        }
    }
}

/// Density-compensated multicoil adjoint, scaled per frame so that the
/// point-spread function peaks at one.
pub fn baseline_image(dataset: &KSpaceDataset, options: NufftOptions) -> Result<DynamicImage> {
    let op = dataset.operator(options)?;
    let weights = ramp_density_weights(&dataset.trajectory);
    let mut img = op.adjoint(&dataset.samples, Some(&weights))?;
    let p = img.pixels() as f64;
    for t in 0..img.frames() {
        let total: f64 = weights.frame(t).iter().sum();
        let scale = p / total;
        img.frame_mut(t).iter_mut().for_each(|z| *z *= scale);
    }
    Ok(img)
}

pub fn run_baseline(spec: &ExperimentSpec) -> Result<(DynamicImage, Option<MetricsReport>)> {
    let acq = acquire(spec)?;
    let img = baseline_image(&acq.dataset, spec.nufft).stage("baseline")?;
    let metrics = match &acq.truth {
        Some(t) => Some(evaluate(&img, t, Some(&acq.dataset.coils)).stage("metrics")?),
        None => None,
    };
    Ok((img, metrics))
}

/// Outputs of one reconstruction run.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub image: DynamicImage,
    pub checkpoint: Checkpoint,
    pub loss: LossReport,
    pub metrics: Option<MetricsReport>,
    pub baseline: DynamicImage,
    pub baseline_metrics: Option<MetricsReport>,
    pub truth: Option<DynamicImage>,
    pub phantom: Option<PhantomSpec>,
    pub acceleration_factor: String,
}

/// Trains on the acquisition described by `spec`, evaluates against ground
/// truth when available and writes the requested artifacts into `out`.
pub fn run_reconstruction(spec: &ExperimentSpec, out: Option<&Path>) -> Result<Reconstruction> {
    spec.validate()?;
    let acq = acquire(spec)?;
    let rec = reconstruct(spec, acq)?;
    if let Some(dir) = out {
        write_reconstruction(spec, &rec, dir).stage("write")?;
    }
    Ok(rec)
}

pub fn reconstruct(spec: &ExperimentSpec, acq: Acquisition) -> Result<Reconstruction> {
    let model = spec.model();
    let recon = spec.recon_config();
    let ds = &acq.dataset;
    info!(
        "training N={} T={} C={} M={} for {} epochs",
        ds.n(),
        ds.frames(),
        ds.coils.coils(),
        ds.trajectory.spokes_per_frame(),
        recon.epochs
    );
    let trained = train(ds, &recon, &model, spec.nufft).stage("train")?;
    let baseline = baseline_image(ds, spec.nufft).stage("baseline")?;
    let (metrics, baseline_metrics) = match &acq.truth {
        Some(t) => (
            Some(evaluate(&trained.image, t, Some(&ds.coils)).stage("metrics")?),
            Some(evaluate(&baseline, t, Some(&ds.coils)).stage("metrics")?),
        ),
        None => (None, None),
    };
    let checkpoint = Checkpoint::new(model, recon.seed, ds.n(), ds.frames(), trained.params)?;
    Ok(Reconstruction {
        image: trained.image,
        checkpoint,
        loss: trained.report,
        metrics,
        baseline,
        baseline_metrics,
        truth: acq.truth,
        acceleration_factor: acceleration_factor(ds.n(), ds.trajectory.spokes_per_frame()),
        phantom: acq.phantom,
    })
}

/// Queries a trained model on `T + (T − 1)(R − 1)` frames.
pub fn run_superres(checkpoint: &Checkpoint, factor: usize) -> Result<DynamicImage> {
    if factor == 0 {
        return Err(Error::invalid("super-resolution factor must be >= 1"));
    }
    let h = &checkpoint.header;
    let batch = make_coordinates(h.n, h.frames, factor)?;
    let values = model_values(&batch, &checkpoint.params, &h.model).stage("superres")?;
    DynamicImage::new(h.n, batch.output_frames(), values)
}

/// One cell of a hyperparameter sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepCell {
    pub lambda_s: f64,
    pub lambda_l: f64,
    pub metrics: Option<MetricsReport>,
    pub final_dc: Option<f64>,
    pub error: Option<String>,
}

impl SweepCell {
    pub fn mean_psnr(&self) -> f64 {
        self.metrics.as_ref().map_or(f64::NEG_INFINITY, MetricsReport::mean_psnr)
    }

    pub fn unregularized(&self) -> bool {
        self.lambda_s == 0.0 && self.lambda_l == 0.0
    }
}

/// Trains once per `(λ_S, λ_L)` on the same acquisition and seed. Failed
/// cells keep their error; the table is sorted by mean PSNR, best first.
pub fn sweep_hyperparameters(spec: &ExperimentSpec, grid: &[(f64, f64)]) -> Result<Vec<SweepCell>> {
    if grid.is_empty() {
        return Err(Error::invalid("sweep grid is empty"));
    }
    spec.validate()?;
    let acq = acquire(spec)?;
    let truth = acq
        .truth
        .as_ref()
        .ok_or_else(|| Error::invalid("sweep needs ground truth"))?;
    let model = spec.model();
    let mut cells: Vec<SweepCell> = grid
        .iter()
        .map(|&(ls, ll)| {
            let recon = ReconConfig {
                lambda_s: ls,
                lambda_l: ll,
                ..spec.recon_config()
            };
            let run = train(&acq.dataset, &recon, &model, spec.nufft).and_then(|t| {
                let m = evaluate(&t.image, truth, Some(&acq.dataset.coils))?;
                Ok((m, t.report.last().map(|r| r.dc)))
            });
            match run {
                Ok((m, dc)) => {
                    info!("sweep λ_S={ls:e} λ_L={ll:e}: mean PSNR {:.3} dB", m.mean_psnr());
                    SweepCell {
                        lambda_s: ls,
                        lambda_l: ll,
                        metrics: Some(m),
                        final_dc: dc,
                        error: None,
                    }
                }
                Err(e) => {
                    warn!("sweep λ_S={ls:e} λ_L={ll:e} failed: {e}");
                    SweepCell {
                        lambda_s: ls,
                        lambda_l: ll,
                        metrics: None,
                        final_dc: None,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect();
    cells.sort_by(|a, b| b.mean_psnr().total_cmp(&a.mean_psnr()));
    Ok(cells)
}

pub fn sweep_csv(cells: &[SweepCell]) -> String {
    let mut s = String::from("lambda_s,lambda_l,unregularized,mean_psnr,std_psnr,mean_ssim,final_dc,error\n");
    for c in cells {
        let (mp, sp, ms) = match &c.metrics {
            Some(m) => {
                let (mp, sp) = crate::metrics::mean_std(&m.psnr);
                (format!("{mp:e}"), format!("{sp:e}"), format!("{:e}", m.mean_ssim()))
            }
            None => Default::default(),
        };
        let dc = c.final_dc.map(|d| format!("{d:e}")).unwrap_or_default();
        let err = c.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        s += &format!(
            "{:e},{:e},{},{mp},{sp},{ms},{dc},{err}\n",
            c.lambda_s,
            c.lambda_l,
            c.unregularized()
        );
    }
    s
}

/// `sha256("blob <len>\0" ‖ bytes)` in hex.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

/// Hash of the canonical JSON form of the spec plus any external inputs.
pub fn input_hash(spec: &ExperimentSpec) -> Result<String> {
    let mut bytes = serde_json::to_vec(spec)?;
    if let Some(dir) = &spec.phantom.dataset {
        for name in [KSPACE_FILE, COILS_FILE, TRAJECTORY_FILE, SIDECAR_FILE, TRUTH_FILE] {
            let p = dir.join(name);
            if p.exists() {
                bytes.extend(content_hash(&fs::read(p)?).into_bytes());
            }
        }
    }
    Ok(content_hash(&bytes))
}

/// Files written so far, with their content hashes, for the manifest.
#[derive(Default)]
pub struct ArtifactLog {
    root: PathBuf,
    entries: Vec<(String, String)>,
}

impl ArtifactLog {
    pub fn new(root: &Path) -> Self {
        Self {
            root: root.to_path_buf(),
            entries: Vec::new(),
        }
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        self.entries.push((rel.to_string(), content_hash(bytes)));
        Ok(())
    }

    pub fn record(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path)?;
        let rel = path
            .strip_prefix(&self.root)
            .unwrap_or(path)
            .to_string_lossy()
            .into_owned();
        self.entries.push((rel, content_hash(&bytes)));
        Ok(())
    }

    pub fn files(&self) -> serde_json::Value {
        self.entries
            .iter()
            .map(|(k, v)| (k.clone(), json!(v)))
            .collect::<serde_json::Map<_, _>>()
            .into()
    }

    /// Writes `manifest.json` with `body` plus the file table.
    pub fn finish(self, mut body: serde_json::Value) -> Result<()> {
        body["files"] = self.files();
        let text = serde_json::to_string_pretty(&body)? + "\n";
        fs::write(self.root.join("manifest.json"), text)?;
        Ok(())
    }
}

/// Base manifest fields shared by every command.
pub fn manifest_base(command: &str, spec: &ExperimentSpec) -> Result<serde_json::Value> {
    Ok(json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "spec": spec,
        "input_hash": input_hash(spec)?,
        "acceleration_factor": {
            "formula": "N / M",
            "n": spec.phantom.n,
            "m": spec.trajectory.spokes_per_frame,
            "value": acceleration_factor(spec.phantom.n, spec.trajectory.spokes_per_frame),
        },
    }))
}

fn image_container(d: &DynamicImage, tag: &str, precision: Precision) -> Vec<u8> {
    ArrayContainer::complex(&d.to_array(), tag, precision).to_bytes()
}

/// Writes frame and y-t PGM dumps of `d` under `prefix` and returns the
/// window used.
pub fn write_renders(
    log: &mut ArtifactLog,
    d: &DynamicImage,
    prefix: &str,
    column: usize,
    frames: bool,
    yt: bool,
) -> Result<Window> {
    let window = Window::of(d);
    if frames {
        for (t, img) in render_frames(d, window).iter().enumerate() {
            log.write(&format!("frames/{prefix}_t{t:03}.pgm"), img)?;
        }
    }
    if yt {
        log.write(&format!("{prefix}_yt_x{column:03}.pgm"), &render_yt(d, column, window)?)?;
    }
    Ok(window)
}

fn roi_table(rec: &Reconstruction) -> Result<Option<String>> {
    let (Some(phantom), Some(truth)) = (&rec.phantom, &rec.truth) else {
        return Ok(None);
    };
    let disc = &phantom.ellipses[PhantomSpec::CARDIAC_RAMP_DISC];
    // shrink by one pixel to stay clear of partial-volume edge pixels;
    // 0.75 > √½ always keeps at least one pixel centre
    let mask = RoiMask::disc(truth.n(), disc.center, (disc.semi_axes[0] - 1.0).max(0.75))?;
    let curves = [
        roi_curve(truth, &mask)?,
        roi_curve(&rec.image, &mask)?,
        roi_curve(&rec.baseline, &mask)?,
    ];
    let mut s = String::from("frame,truth,inr,baseline\n");
    for t in 0..truth.frames() {
        s += &format!(
            "{t},{:e},{:e},{:e}\n",
            curves[0].values[t], curves[1].values[t], curves[2].values[t]
        );
    }
    Ok(Some(s))
}

pub fn write_reconstruction(spec: &ExperimentSpec, rec: &Reconstruction, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut log = ArtifactLog::new(dir);
    let precision = spec.output.precision;
    if spec.wants(Artifact::Arrays) {
        log.write("recon.arr", &image_container(&rec.image, "inr_reconstruction", precision))?;
        log.write("baseline.arr", &image_container(&rec.baseline, "adjoint_baseline", precision))?;
        if let Some(t) = &rec.truth {
            log.write("truth.arr", &image_container(t, "ground_truth", precision))?;
        }
    }
    if spec.wants(Artifact::Checkpoint) {
        log.write("checkpoint.ckpt", &rec.checkpoint.to_bytes())?;
    }
    if spec.wants(Artifact::Loss) {
        log.write("loss.csv", rec.loss.to_csv().as_bytes())?;
    }
    if spec.wants(Artifact::Metrics) {
        if let Some(m) = &rec.metrics {
            log.write("metrics.csv", m.to_csv().as_bytes())?;
        }
        if let Some(m) = &rec.baseline_metrics {
            log.write("baseline_metrics.csv", m.to_csv().as_bytes())?;
        }
        if let Some(table) = roi_table(rec)? {
            log.write("roi.csv", table.as_bytes())?;
        }
    }
    let column = spec.output.yt_column.unwrap_or(rec.image.n() / 2);
    let (frames, yt) = (spec.wants(Artifact::Images), spec.wants(Artifact::YtSlices));
    let mut windows = serde_json::Map::new();
    if frames || yt {
        let w = write_renders(&mut log, &rec.image, "recon", column, frames, yt)?;
        windows.insert("recon".into(), json!(w));
        let w = write_renders(&mut log, &rec.baseline, "baseline", column, false, yt)?;
        windows.insert("baseline".into(), json!(w));
        if let Some(t) = &rec.truth {
            let w = write_renders(&mut log, t, "truth", column, false, yt)?;
            windows.insert("truth".into(), json!(w));
        }
    }
    let mut body = manifest_base("recon", spec)?;
    body["render_windows"] = windows.into();
    body["summary"] = json!({
        "epochs": rec.loss.records.len(),
        "first_dc": rec.loss.first().map(|r| r.dc),
        "final_dc": rec.loss.last().map(|r| r.dc),
        "mean_psnr": rec.metrics.as_ref().map(MetricsReport::mean_psnr),
        "baseline_mean_psnr": rec.baseline_metrics.as_ref().map(MetricsReport::mean_psnr),
    });
    log.finish(body)
}

/// Simulates and writes the dataset plus a manifest.
pub fn run_simulation(spec: &ExperimentSpec, dir: &Path) -> Result<Simulation> {
    let sim = simulate(spec)?;
    let mut log = ArtifactLog::new(dir);
    for path in write_dataset(dir, &sim.dataset, Some(&sim.truth)).stage("write")? {
        log.record(&path)?;
    }
    let mut body = manifest_base("simulate", spec)?;
    body["shapes"] = json!({
        "kspace": sim.dataset.samples.shape(),
        "coils": sim.dataset.coils.as_array().shape(),
        "trajectory": [sim.dataset.frames(), spec.trajectory.spokes_per_frame, spec.samples_per_spoke(), 2],
        "truth": [sim.truth.frames(), sim.truth.n(), sim.truth.n()],
    });
    body["phantom_spec"] = serde_json::to_value(&sim.phantom)?;
    log.finish(body)?;
    Ok(sim)
}

/// Complex image stored as a `[T, N, N]` container.
pub fn read_image(path: &Path) -> Result<DynamicImage> {
    DynamicImage::from_array(ArrayContainer::read(path)?.to_complex()?)
}

pub fn write_image(path: &Path, d: &DynamicImage, tag: &str, precision: Precision) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, image_container(d, tag, precision))?;
    Ok(())
}

/// Zero-valued k-space with the shape of `dataset`.
pub fn zero_kspace_like(dataset: &KSpaceDataset) -> Result<KSpaceDataset> {
    KSpaceDataset::new(
        ComplexArray::from_fn(dataset.samples.shape(), |_| C64::new(0.0, 0.0)),
        dataset.trajectory.clone(),
        dataset.coils.clone(),
        dataset.meta.clone(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> ExperimentSpec {
        let mut s = ExperimentSpec::new(1e-3, 1e-3);
        s.phantom = PhantomSection {
            n: 16,
            frames: 4,
            coils: 2,
            ..Default::default()
        };
        s.trajectory.spokes_per_frame = 5;
        s.encoder = HashEncoderConfig {
            levels: 4,
            log2_table_size: 10,
            ..Default::default()
        };
        s.mlp = MlpConfig {
            hidden_layers: 2,
            hidden_width: 16,
        };
        s.recon.epochs = 3;
        s
    }

    #[test]
    fn af_bookkeeping() {
        assert_eq!(acceleration_factor(208, 13), "16.0");
        assert_eq!(acceleration_factor(208, 5), "41.6");
        assert_eq!(acceleration_factor(64, 13), "4.9");
    }

    #[test]
    fn baseline_of_zero_kspace_is_zero() {
        let sim = simulate(&tiny_spec()).unwrap();
        let zero = zero_kspace_like(&sim.dataset).unwrap();
        let img = baseline_image(&zero, NufftOptions::default()).unwrap();
        assert!(img.data().iter().all(|z| *z == C64::new(0.0, 0.0)));
    }

    #[test]
    fn superres_factor_one_matches_training_grid() {
        let spec = tiny_spec();
        let rec = run_reconstruction(&spec, None).unwrap();
        let again = run_superres(&rec.checkpoint, 1).unwrap();
        assert_eq!(again, rec.image);
        let up = run_superres(&rec.checkpoint, 4).unwrap();
        assert_eq!(up.frames(), 4 + 3 * 3);
        for t in 0..4 {
            assert_eq!(up.frame(4 * t), rec.image.frame(t));
        }
        assert!(run_superres(&rec.checkpoint, 0).is_err());
    }

    #[test]
    fn dataset_round_trip() {
        let sim = simulate(&tiny_spec()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &sim.dataset, Some(&sim.truth)).unwrap();
        let (ds, truth) = load_dataset(dir.path()).unwrap();
        assert_eq!(ds.samples, sim.dataset.samples);
        assert_eq!(ds.trajectory, sim.dataset.trajectory);
        assert_eq!(truth.unwrap(), sim.truth);
    }

    #[test]
    fn degenerate_sweep_matches_single_run() {
        let spec = tiny_spec();
        let cells = sweep_hyperparameters(&spec, &[(spec.recon.lambda_s, spec.recon.lambda_l)]).unwrap();
        let rec = run_reconstruction(&spec, None).unwrap();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].metrics.as_ref(), rec.metrics.as_ref());
        let cells = sweep_hyperparameters(&spec, &[(0.0, 0.0)]).unwrap();
        assert!(cells[0].unregularized());
        assert!(sweep_hyperparameters(&spec, &[]).is_err());
    }

    #[test]
    fn external_dataset_without_truth_skips_metrics() {
        let spec = tiny_spec();
        let sim = simulate(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &sim.dataset, None).unwrap();
        let mut ext = spec.clone();
        ext.phantom.dataset = Some(dir.path().to_path_buf());
        let rec = run_reconstruction(&ext, None).unwrap();
        assert!(rec.metrics.is_none());
        assert_eq!(rec.loss.records.len(), 3);
    }
}
