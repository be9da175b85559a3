use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use calibmoo::analysis::{innovization_report, parse_weight_list, robustness_sweep, select_knee, KneeCaps};
use calibmoo::baselines::epsilon_constraint_sweep;
use calibmoo::data::artifacts::{
    fraction_near_edges, front_svg, knee_summary, load_archive_csv, render_overlay, write_archive_csv,
    write_correlations_csv, write_epsilon_csv, write_generations_csv, write_robustness_csv,
};
use calibmoo::data::manifest::{load_scene, write_scene, SyntheticInfo, MANIFEST_FILE};
use calibmoo::data::pgm::encode_ppm;
use calibmoo::data::synthetic::{
    decalibrate, default_intrinsics, default_true_extrinsics, generate_synthetic_scene, SceneLayout,
    DEFAULT_IMAGE_SIZE,
};
use calibmoo::evolution::ArchiveEntry;
use calibmoo::problem::{FeatureSettings, NUM_VARIABLES};
use calibmoo::{
    evolve, CalibrationBounds, CalibrationProblem, CalibrationScene, CalibrationVector, CostMode, EvolutionConfig,
    WeightPair,
};

/// Bi-objective camera-LiDAR extrinsic calibration.
#[derive(Debug, Parser)]
#[command(name = "calibmoo", version)]
struct Cli {
    /// Worker threads for population evaluation (default: all cores).
    #[arg(long, global = true, env = "CALIBMOO_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic scene (cloud, image, calibration, manifest).
    Synth(SynthArgs),
    /// Run NSGA-II on a scene and write the Pareto archive.
    Calibrate(CalibrateArgs),
    /// Epsilon-constraint baseline over the archive's cost range.
    Epsilon(EpsilonArgs),
    /// Select the knee of an archive.
    Knee(KneeArgs),
    /// Pairwise correlations between archive variables and objectives.
    Innovize(InnovizeArgs),
    /// Single-objective runs over a list of edge weights.
    Robustness(RobustnessArgs),
    /// Overlay projected LiDAR edge points on the camera image.
    Project(ProjectArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value = SceneLayout::NAMES[0], value_parser = clap::builder::PossibleValuesParser::new(SceneLayout::NAMES))]
    layout: String,
    /// Rotation offset applied to every axis of the stored initial extrinsics.
    #[arg(long, default_value_t = 0.0)]
    decal_rotation_deg: f64,
    /// Translation offset applied to every axis of the stored initial extrinsics.
    #[arg(long, default_value_t = 0.0)]
    decal_translation_m: f64,
    /// Seed for the decalibration signs (defaults to --seed).
    #[arg(long)]
    decal_seed: Option<u64>,
    #[arg(long)]
    gradient_threshold: Option<f64>,
    #[arg(long)]
    depth_gap: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CostModeArg {
    Proxy,
    Measured,
}

#[derive(Debug, Args)]
struct ProblemArgs {
    /// Scene manifest, or a directory containing scene.json.
    #[arg(long)]
    scene: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = CostModeArg::Proxy)]
    cost_mode: CostModeArg,
    /// Edge weight; the intensity weight is 1 - w1.
    #[arg(long, default_value_t = 0.8)]
    w1: f64,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, conflicts_with = "paper_scale")]
    pop: Option<usize>,
    #[arg(long, conflicts_with = "paper_scale")]
    gens: Option<usize>,
    /// Population 1000 for 200 generations.
    #[arg(long)]
    paper_scale: bool,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct EpsilonArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value = "archive.csv")]
    archive: PathBuf,
    /// Explicit cost bounds; otherwise `--count` values evenly spanning the archive's costs.
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
    #[arg(long, default_value_t = 5)]
    count: usize,
    /// Reference NSGA-II population; each constrained run gets a quarter of its budget.
    #[arg(long, default_value_t = 100)]
    pop: usize,
    #[arg(long, default_value_t = 100)]
    gens: usize,
    #[arg(long, default_value = "epsilon.csv")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct KneeArgs {
    #[arg(long, default_value = "archive.csv")]
    archive: PathBuf,
    #[arg(long)]
    max_chamfer: Option<f64>,
    #[arg(long)]
    max_cost: Option<f64>,
    #[arg(long, default_value = "knee.txt")]
    out: PathBuf,
    /// Also write the front with the knee highlighted.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct InnovizeArgs {
    #[arg(long, default_value = "archive.csv")]
    archive: PathBuf,
    #[arg(long, default_value = "correlations.csv")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RobustnessArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// `start:stop:step` or a comma-separated list.
    #[arg(long, default_value = "0.1:0.9:0.1")]
    w1_list: String,
    #[arg(long, default_value_t = 100)]
    pop: usize,
    #[arg(long, default_value_t = 100)]
    gens: usize,
    #[arg(long, default_value = "robustness.csv")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ProjectArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Correction `x,y,z,yaw,pitch,roll` in metres and radians (zero when omitted).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "archive")]
    genome: Option<Vec<f64>>,
    /// Take the correction from this archive instead.
    #[arg(long)]
    archive: Option<PathBuf>,
    /// Archive row (0-based); defaults to the minimum-chamfer entry.
    #[arg(long, requires = "archive")]
    row: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "overlay.ppm")]
    out: PathBuf,
}

/// An invalid combination of arguments detected after parsing; exits with status 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Epsilon(a) => epsilon(a),
        Command::Knee(a) => knee(a),
        Command::Innovize(a) => innovize(a),
        Command::Robustness(a) => robustness(a),
        Command::Project(a) => project(a),
    }
}

fn synth(a: SynthArgs) -> anyhow::Result<()> {
    let layout = SceneLayout::by_name(&a.layout)?;
    let mut settings = FeatureSettings::default();
    if let Some(g) = a.gradient_threshold {
        settings.gradient_threshold = g;
    }
    if let Some(d) = a.depth_gap {
        settings.depth_gap = d;
    }
    let truth = default_true_extrinsics();
    let mut scene = generate_synthetic_scene(a.seed, &layout, default_intrinsics(), DEFAULT_IMAGE_SIZE, truth, settings)?;
    let decal = if a.decal_rotation_deg != 0.0 || a.decal_translation_m != 0.0 {
        let (initial, d) = decalibrate(
            &truth,
            (a.decal_rotation_deg, a.decal_translation_m),
            a.decal_seed.unwrap_or(a.seed),
        )
        .map_err(|e| usage(e.to_string()))?;
        scene.initial = initial;
        Some(d)
    } else {
        None
    };
    let info = SyntheticInfo {
        seed: a.seed,
        layout: a.layout.clone(),
    };
    let path = write_scene(&a.out_dir, &scene, decal, Some(info))?;
    println!(
        "wrote {} ({} points, {} image edge points, {} intensity points)",
        path.display(),
        scene.cloud.len(),
        scene.gt_edges.len(),
        scene.gt_intensity.len()
    );
    Ok(())
}

fn manifest_path(scene: &Path) -> PathBuf {
    if scene.is_dir() {
        scene.join(MANIFEST_FILE)
    } else {
        scene.to_path_buf()
    }
}

fn open_scene(scene: &Path) -> anyhow::Result<Arc<CalibrationScene>> {
    Ok(load_scene(manifest_path(scene))?.scene)
}

/// Applies the weight-domain rule: with intensity points present w1 must lie in (0,1);
/// without them the intensity term is dropped.
fn weights_for(scene: &CalibrationScene, w1: f64) -> anyhow::Result<WeightPair> {
    if !scene.has_intensity() {
        log::warn!("scene has no intensity points; intensity term disabled, ignoring --w1 {w1}");
        return Ok(WeightPair::edge_only());
    }
    if !(w1 > 0.0 && w1 < 1.0) {
        return Err(usage(format!(
            "--w1 must lie in (0,1) when the scene has intensity points, got {w1}"
        )));
    }
    Ok(WeightPair::new(w1)?)
}

fn build_problem(p: &ProblemArgs) -> anyhow::Result<CalibrationProblem> {
    let scene = open_scene(&p.scene)?;
    let weights = weights_for(&scene, p.w1)?;
    let bounds = CalibrationBounds::standard(scene.cloud.len());
    let problem = CalibrationProblem::new(scene, bounds, weights, CostMode::Proxy, p.seed)?;
    Ok(match p.cost_mode {
        CostModeArg::Proxy => problem,
        CostModeArg::Measured => {
            let reference = problem.calibrate_measured_reference(5)?;
            log::info!("measured cost reference: {reference:?}");
            problem.with_cost_mode(CostMode::Measured(reference))
        }
    })
}

fn evolution_config(a: &CalibrateArgs) -> EvolutionConfig {
    let base = if a.paper_scale {
        EvolutionConfig::paper_scale()
    } else {
        EvolutionConfig::default()
    };
    EvolutionConfig {
        population_size: a.pop.unwrap_or(base.population_size),
        generations: a.gens.unwrap_or(base.generations),
        ..base
    }
    .with_seed(a.problem.seed)
}

fn checked(cfg: EvolutionConfig) -> anyhow::Result<EvolutionConfig> {
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    write_file(path, text.as_bytes())
}

fn write_file(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let mut w = create(path)?;
    w.write_all(bytes)
        .and_then(|_| w.flush())
        .with_context(|| format!("writing {}", path.display()))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> anyhow::Result<()> {
    w.flush().with_context(|| format!("writing {}", path.display()))
}

fn calibrate(a: CalibrateArgs) -> anyhow::Result<()> {
    let cfg = checked(evolution_config(&a))?;
    let problem = build_problem(&a.problem)?;
    log::info!("evolution config: {cfg:?}");
    let result = evolve(&problem, &cfg)?;
    let entries = result.archive.entries();

    let archive_path = a.out_dir.join("archive.csv");
    let mut w = create(&archive_path)?;
    write_archive_csv(&mut w, entries)?;
    finish(w, &archive_path)?;

    let gen_path = a.out_dir.join("generations.csv");
    let mut w = create(&gen_path)?;
    write_generations_csv(&mut w, &result.log)?;
    finish(w, &gen_path)?;

    let knee = select_knee(entries, KneeCaps::default()).ok().map(|k| k.entry);
    write_text(&a.out_dir.join("front.svg"), &front_svg(entries, knee.as_ref()))?;

    println!(
        "population {} x {} generations: archive of {} entries written to {}",
        cfg.population_size,
        cfg.generations,
        entries.len(),
        a.out_dir.display()
    );
    if let Some(best) = result.archive.min_chamfer() {
        println!(
            "min chamfer {} at comp_cost {}",
            best.objectives.chamfer, best.objectives.comp_cost
        );
    }
    Ok(())
}

fn read_archive(path: &Path) -> anyhow::Result<Vec<ArchiveEntry>> {
    if !path.exists() {
        bail!("archive file {} not found (run `calibmoo calibrate` first)", path.display());
    }
    Ok(load_archive_csv(path)?)
}

/// `count` evenly spaced values from the lowest to the highest archive cost.
fn spanning_epsilons(entries: &[ArchiveEntry], count: usize) -> Vec<f64> {
    let (lo, hi) = entries
        .iter()
        .map(|e| e.objectives.comp_cost)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), c| (a.min(c), b.max(c)));
    match count {
        0 => vec![],
        1 => vec![hi],
        _ => (0..count)
            .map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
            .collect(),
    }
}

fn epsilon(a: EpsilonArgs) -> anyhow::Result<()> {
    let entries = read_archive(&a.archive)?;
    let epsilons = match &a.epsilons {
        Some(v) => v.clone(),
        None if entries.is_empty() => bail!("archive {} is empty", a.archive.display()),
        None => spanning_epsilons(&entries, a.count),
    };
    let reference = EvolutionConfig {
        population_size: a.pop,
        generations: a.gens,
        ..EvolutionConfig::default()
    };
    let cfg = checked(reference.quarter_budget().with_seed(a.problem.seed))?;
    let problem = build_problem(&a.problem)?;
    let results = epsilon_constraint_sweep(&problem, &epsilons, &cfg)?;
    let archive = calibmoo::ParetoArchive::from_entries(entries);
    for r in &results {
        let gap = archive
            .best_chamfer_within_cost(r.achieved.comp_cost)
            .map(|e| format!("{:+.2}%", 100.0 * (r.achieved.chamfer / e.objectives.chamfer - 1.0)))
            .unwrap_or_else(|| "n/a".into());
        println!(
            "epsilon {:.6}: feasible {} chamfer {:.6} comp_cost {:.6} vs archive {gap}",
            r.epsilon, r.feasible, r.achieved.chamfer, r.achieved.comp_cost
        );
    }
    let mut w = create(&a.out)?;
    write_epsilon_csv(&mut w, &results)?;
    finish(w, &a.out)
}

fn knee(a: KneeArgs) -> anyhow::Result<()> {
    let entries = read_archive(&a.archive)?;
    let caps = KneeCaps {
        max_chamfer: a.max_chamfer,
        max_cost: a.max_cost,
    };
    let k = select_knee(&entries, caps)?;
    let summary = knee_summary(&k);
    print!("{summary}");
    write_text(&a.out, &summary)?;
    if let Some(svg) = &a.svg {
        write_text(svg, &front_svg(&entries, Some(&k.entry)))?;
    }
    Ok(())
}

fn innovize(a: InnovizeArgs) -> anyhow::Result<()> {
    let entries = read_archive(&a.archive)?;
    let report = innovization_report(&entries)?;
    if report.flagged.is_empty() {
        println!("no pair exceeds the correlation threshold");
    }
    for &(i, j, r) in &report.flagged {
        println!("{} ~ {}: r = {r:.4}", report.columns[i], report.columns[j]);
    }
    let mut w = create(&a.out)?;
    write_correlations_csv(&mut w, &report)?;
    finish(w, &a.out)
}

fn robustness(a: RobustnessArgs) -> anyhow::Result<()> {
    let weights = parse_weight_list(&a.w1_list).map_err(|e| usage(e.to_string()))?;
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && **w < 1.0)) {
        return Err(usage(format!("--w1-list values must lie in (0,1), got {w}")));
    }
    let cfg = checked(
        EvolutionConfig {
            population_size: a.pop,
            generations: a.gens,
            ..EvolutionConfig::default()
        }
        .with_seed(a.problem.seed),
    )?;
    let problem = build_problem(&a.problem)?;
    if !problem.scene().has_intensity() {
        bail!("the weight sweep needs a scene with intensity points");
    }
    let points = robustness_sweep(&problem, &weights, &cfg)?;
    for p in &points {
        println!("w1 {:.3}: error {:.6}", p.w1, p.error);
    }
    let mut w = create(&a.out)?;
    write_robustness_csv(&mut w, &points)?;
    finish(w, &a.out)
}

fn project(a: ProjectArgs) -> anyhow::Result<()> {
    let scene = open_scene(&a.scene)?;
    let n_max = scene.cloud.len();
    let correction: [f64; 6] = match (&a.genome, &a.archive) {
        (Some(g), _) => {
            if g.len() != 6 {
                return Err(usage(format!("--genome needs 6 values, got {}", g.len())));
            }
            g.as_slice().try_into().expect("length checked")
        }
        (None, Some(path)) => {
            let entries = read_archive(path)?;
            let entry = match a.row {
                Some(r) => entries
                    .get(r)
                    .with_context(|| format!("row {r} out of range ({} entries)", entries.len()))?,
                None => entries
                    .iter()
                    .min_by(|x, y| x.objectives.chamfer.total_cmp(&y.objectives.chamfer))
                    .context("archive is empty")?,
            };
            entry.genome.0[..6].try_into().expect("genome has 7 genes")
        }
        (None, None) => [0.0; 6],
    };
    let problem = CalibrationProblem::new(
        scene.clone(),
        CalibrationBounds::standard(n_max),
        WeightPair::edge_only(),
        CostMode::Proxy,
        a.seed,
    )?;
    let full = |g: [f64; 6]| {
        let mut v = [0.0; NUM_VARIABLES];
        v[..6].copy_from_slice(&g);
        v[6] = n_max as f64;
        CalibrationVector(v)
    };
    let pixels = |g: [f64; 6]| -> anyhow::Result<Vec<[f64; 2]>> {
        Ok(problem.evaluate_detailed(&full(g))?.lidar_edges.points)
    };
    let candidate = pixels(correction)?;
    let reference = scene.ground_truth_genome().map(pixels).transpose()?;
    let rgb = render_overlay(&scene.image, &scene.gt_edges, &candidate, reference.as_deref());
    write_file(&a.out, &encode_ppm(scene.image.width, scene.image.height, &rgb)?)?;
    let near = fraction_near_edges(&candidate, &scene.gt_edges, 1.0);
    println!(
        "{} LiDAR edge points, {:.2}% within 1 px of an image edge; overlay written to {}",
        candidate.len(),
        100.0 * near,
        a.out.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("calibmoo").chain(args.iter().copied())).unwrap()
    }

    fn calibrate_args(args: &[&str]) -> CalibrateArgs {
        match parse(args).command {
            Command::Calibrate(a) => a,
            c => panic!("unexpected {c:?}"),
        }
    }

    #[test]
    fn paper_scale_preset() {
        let cfg = evolution_config(&calibrate_args(&["calibrate", "--scene", "s", "--paper-scale"]));
        assert_eq!((cfg.population_size, cfg.generations), (1000, 200));
        assert_eq!((cfg.sbx_probability, cfg.sbx_eta, cfg.pm_eta), (0.9, 15.0, 20.0));
    }

    #[test]
    fn explicit_budget_and_seed() {
        let cfg = evolution_config(&calibrate_args(&[
            "calibrate", "--scene", "s", "--pop", "40", "--gens", "7", "--seed", "9",
        ]));
        assert_eq!((cfg.population_size, cfg.generations, cfg.seed), (40, 7, 9));
    }

    #[test]
    fn paper_scale_conflicts_with_pop() {
        let r = Cli::try_parse_from(["calibmoo", "calibrate", "--scene", "s", "--paper-scale", "--pop", "10"]);
        assert!(r.is_err());
    }

    #[test]
    fn synth_requires_out_dir() {
        let e = Cli::try_parse_from(["calibmoo", "synth", "--seed", "7"]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn spanning_epsilons_cover_range() {
        let e = |c: f64| ArchiveEntry {
            genome: CalibrationVector([0.0; 7]),
            objectives: calibmoo::ObjectiveVector::new(1.0, c),
        };
        let v = spanning_epsilons(&[e(0.5), e(0.1), e(0.9)], 5);
        assert_eq!(v.len(), 5);
        assert!((v[0] - 0.1).abs() < 1e-12 && (v[4] - 0.9).abs() < 1e-12);
        assert!((v[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn negative_genome_values_parse() {
        match parse(&["project", "--scene", "s", "--genome", "-0.1,0,0,0.01,-0.02,0"]).command {
            Command::Project(a) => assert_eq!(a.genome.unwrap()[0], -0.1),
            c => panic!("unexpected {c:?}"),
        }
    }
}
