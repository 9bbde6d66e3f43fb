//! Command-line front end: mesh and dataset generation, training,
//! evaluation along homogeneous paths, distillation and validation solves.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use ickan::evaluation::{
    evaluate_path, gamma_samples, parity, relative_rms, PathCurve, PATHS, PATH_SAMPLES,
};
use ickan::fem::{
    generate_dataset, plate_with_hole, square_mesh, validation_mesh, Mesh, NoiseOptions,
    SolverOptions, Specimen, SpecimenDataset,
};
use ickan::hyperelasticity::MaterialModel;
use ickan::network::{Architecture, IckanModel, Mode};
use ickan::symreg::{distill, SymbolicEnergy, LAMBDA_SYM};
use ickan::trainer::{train_ensemble, TrainConfig};
use ickan::{Error, Result};

const EXIT_INPUT: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "ickan", version, about = "Learn hyperelastic strain energies with input-convex KANs")]
#[command(args_override_self = true)]
struct Cli {
    /// File of `key=value` lines; entries override command-line flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a triangle mesh.
    Mesh(MeshArgs),
    /// Solve a benchmark material on the training specimen and record snapshots.
    Generate(GenerateArgs),
    /// Train an ensemble on a dataset and keep the lowest-loss member.
    Train(TrainArgs),
    /// Tabulate energy and stress along the six homogeneous paths.
    Evaluate(EvaluateArgs),
    /// Fit closed-form expressions to a trained model.
    Distill(DistillArgs),
    /// Solve the validation specimen with a learned and a reference material.
    Simulate(SimulateArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MeshKind {
    /// Unit square with a quarter hole at the origin.
    Plate,
    /// Unit square with an off-centre hole.
    Validation,
    /// Plain unit square.
    Square,
}

#[derive(Args, Debug)]
struct MeshArgs {
    #[arg(long, value_enum, default_value = "plate")]
    kind: MeshKind,
    /// Cells along the hole per block (cells along x for squares).
    #[arg(long, default_value_t = 10)]
    n_ang: usize,
    /// Cells from the hole to the edge (cells along y for squares).
    #[arg(long, default_value_t = 18)]
    n_rad: usize,
    #[arg(long, default_value_t = 0.2)]
    radius: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Benchmark material: NH, IH, HW, GT, AB or OG.
    #[arg(long, default_value = "NH")]
    model: String,
    /// Standard deviation of the displacement noise.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Number of load levels.
    #[arg(long, default_value_t = 3)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Mesh file; the default training plate is used when absent.
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Draw one noise value per DOF and reuse it at every load level.
    #[arg(long)]
    noise_per_dof_constant: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = 1000)]
    epochs: usize,
    /// Ensemble size.
    #[arg(long, default_value_t = 10)]
    ensemble: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.001)]
    base_lr: f64,
    #[arg(long, default_value_t = 0.1)]
    max_lr: f64,
    #[arg(long, default_value_t = 50)]
    cycle_step: usize,
    /// Weight of the reaction terms in the loss.
    #[arg(long, default_value_t = 1.0)]
    reaction_weight: f64,
    /// Train unconstrained splines with a SiLU base branch.
    #[arg(long)]
    ablation_vanilla: bool,
    /// Output directory for the checkpoint and logs.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Reference benchmark material.
    #[arg(long, default_value = "NH")]
    model: String,
    /// Optional distilled expression file.
    #[arg(long)]
    symbolic: Option<PathBuf>,
    #[arg(long, default_value_t = PATH_SAMPLES)]
    samples: usize,
    /// Common upper load for every path instead of the per-path default.
    #[arg(long)]
    gamma_max: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DistillArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Weight of complexity against goodness of fit.
    #[arg(long, default_value_t = LAMBDA_SYM)]
    lambda: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, required_unless_present = "symbolic")]
    checkpoint: Option<PathBuf>,
    /// Distilled expression used instead of a checkpoint.
    #[arg(long, conflicts_with = "checkpoint")]
    symbolic: Option<PathBuf>,
    /// Reference benchmark material.
    #[arg(long, default_value = "NH")]
    model: String,
    /// Mesh file; the default validation mesh is used when absent.
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Load levels `0.01 * t` for `t = 1..=steps`.
    #[arg(long, default_value_t = 100)]
    steps: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match parse_cli() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INPUT)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_INPUT })
        }
    }
}

/// Parses the command line, then re-parses with the config file entries
/// appended so that they take precedence.
fn parse_cli() -> std::result::Result<Cli, clap::Error> {
    let argv: Vec<String> = std::env::args().collect();
    let first = Cli::try_parse_from(&argv)?;
    let Some(path) = first.config else {
        return Ok(first);
    };
    let text = fs::read_to_string(&path).map_err(|e| {
        Cli::command().error(
            clap::error::ErrorKind::Io,
            format!("cannot read config {}: {e}", path.display()),
        )
    })?;
    let mut full = argv;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Cli::command().error(
                clap::error::ErrorKind::InvalidValue,
                format!("{}:{}: expected key=value", path.display(), n + 1),
            ));
        };
        let flag = format!("--{}", key.trim().replace('_', "-"));
        match value.trim() {
            "true" => full.push(flag),
            "false" => {}
            v => {
                full.push(flag);
                full.push(v.to_string());
            }
        }
    }
    let matches = Cli::command().try_get_matches_from(full)?;
    Cli::from_arg_matches(&matches)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Mesh(a) => cmd_mesh(a),
        Command::Generate(a) => cmd_generate(a),
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Distill(a) => cmd_distill(a),
        Command::Simulate(a) => cmd_simulate(a),
    }
}

fn read(path: &FsPath) -> Result<String> {
    fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn write(path: &FsPath, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn cmd_mesh(a: MeshArgs) -> Result<()> {
    let mesh = match a.kind {
        MeshKind::Plate => plate_with_hole(a.n_ang, a.n_rad, a.radius)?,
        MeshKind::Validation => validation_mesh(a.n_ang, a.n_rad)?,
        MeshKind::Square => square_mesh(a.n_ang, a.n_rad)?,
    };
    write(&a.out, &mesh.to_text())?;
    println!("{} nodes, {} triangles -> {}", mesh.n_nodes(), mesh.n_elements(), a.out.display());
    Ok(())
}

/// Load increment of the training specimen for a benchmark.
fn load_step(model: &MaterialModel) -> f64 {
    match model {
        MaterialModel::ArrudaBoyce(_) | MaterialModel::Ogden(_) => 0.05,
        _ => 0.1,
    }
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let model = MaterialModel::benchmark(&a.model)?;
    if a.steps == 0 {
        return Err(Error::Argument("--steps must be positive".into()));
    }
    let mesh = match &a.mesh {
        Some(p) => Mesh::from_text(&read(p)?)?,
        None => plate_with_hole(10, 18, 0.2)?,
    };
    let specimen = Specimen::biaxial(mesh)?;
    let step = load_step(&model);
    let deltas: Vec<f64> = (1..=a.steps).map(|t| step * t as f64).collect();
    let noise = NoiseOptions {
        sigma: a.noise,
        seed: a.seed,
        per_dof_constant: a.noise_per_dof_constant,
    };
    let ds = generate_dataset(&specimen, &model, &deltas, &noise, &SolverOptions::default())?;
    write(&a.out, &ds.to_text())?;
    println!(
        "{}: {} snapshots on {} nodes, noise {}",
        model.name(),
        ds.snapshots.len(),
        ds.mesh.n_nodes(),
        a.noise
    );
    for s in &ds.snapshots {
        let r: Vec<String> = s.reactions.iter().map(|v| format!("{v:.6}")).collect();
        println!("  delta {:.3}: reactions [{}]", s.delta, r.join(", "));
    }
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let ds = SpecimenDataset::from_text(&read(&a.dataset)?)?;
    let cfg = TrainConfig {
        epochs: a.epochs,
        base_lr: a.base_lr,
        max_lr: a.max_lr,
        cycle_step: a.cycle_step,
        ensemble_size: a.ensemble,
        seed: a.seed,
        reaction_weight: a.reaction_weight,
        architecture: Architecture {
            mode: if a.ablation_vanilla { Mode::Vanilla } else { Mode::Constrained },
            ..Architecture::default()
        },
        ..TrainConfig::default()
    };
    let (best, reports) = train_ensemble(&cfg, &ds)?;
    fs::create_dir_all(&a.out)?;
    write(&a.out.join("checkpoint.txt"), &best.to_checkpoint())?;
    let mut table = String::from("seed,final_loss,selected,aborted\n");
    for r in &reports {
        let _ = writeln!(
            table,
            "{},{},{},{}",
            r.seed,
            r.final_loss,
            r.selected,
            r.aborted.as_deref().unwrap_or("").replace(',', ";")
        );
        if r.aborted.is_none() {
            let mut log = String::from("epoch,lr,loss\n");
            for (e, l) in r.losses.iter().enumerate() {
                let _ = writeln!(log, "{e},{},{l}", cfg.learning_rate(e));
            }
            write(&a.out.join(format!("log_seed{}.csv", r.seed)), &log)?;
        }
        println!(
            "seed {:>4}  final loss {:.6e}  {:>7.2}s{}",
            r.seed,
            r.final_loss,
            r.wall_time.as_secs_f64(),
            if r.selected { "  selected" } else { "" }
        );
    }
    write(&a.out.join("final_losses.csv"), &table)?;
    println!("checkpoint -> {}", a.out.join("checkpoint.txt").display());
    Ok(())
}

fn load_checkpoint(path: &FsPath) -> Result<IckanModel> {
    IckanModel::from_checkpoint(&read(path)?)
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let truth = MaterialModel::benchmark(&a.model)?;
    let learned = MaterialModel::ickan(load_checkpoint(&a.checkpoint)?)?;
    let symbolic = match &a.symbolic {
        Some(p) => Some(MaterialModel::symbolic(SymbolicEnergy::from_prefix(&read(p)?)?)?),
        None => None,
    };
    let mut csv = String::from("path,gamma,W_true,W_ickan,W_sym");
    for who in ["true", "ickan", "sym"] {
        for c in ["P11", "P12", "P21", "P22"] {
            let _ = write!(csv, ",{c}_{who}");
        }
    }
    csv.push('\n');
    println!("path  rel-RMS(P) ickan{}", if symbolic.is_some() { "   sym" } else { "" });
    for path in PATHS {
        let gammas = gamma_samples(a.gamma_max.unwrap_or(path.gamma_max()), a.samples)?;
        let t = evaluate_path(&truth, path, &gammas)?;
        let l = evaluate_path(&learned, path, &gammas)?;
        let s = symbolic.as_ref().map(|m| evaluate_path(m, path, &gammas)).transpose()?;
        for i in 0..gammas.len() {
            let w_sym = s.as_ref().map(|c| c.energy[i].to_string()).unwrap_or_default();
            let _ = write!(csv, "{path},{},{},{},{w_sym}", gammas[i], t.energy[i], l.energy[i]);
            for c in [Some(&t), Some(&l), s.as_ref()] {
                for (r, q) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    match c {
                        Some(c) => {
                            let _ = write!(csv, ",{}", c.stress[i][(r, q)]);
                        }
                        None => csv.push(','),
                    }
                }
            }
            csv.push('\n');
        }
        let err = |c: &PathCurve| relative_rms(&t, c).map(|v| format!("{v:.4}"));
        let sym = s.as_ref().map(err).transpose()?.map(|v| format!("  {v}")).unwrap_or_default();
        println!("{:<4}  {:>16}{sym}", path.code(), err(&l)?);
    }
    write(&a.out, &csv)?;
    println!("table -> {}", a.out.display());
    Ok(())
}

fn cmd_distill(a: DistillArgs) -> Result<()> {
    let model = load_checkpoint(&a.checkpoint)?;
    let d = distill(&model, a.lambda)?;
    println!("layer  i  j  candidate        R2");
    for f in &d.fits {
        println!(
            "{:>5} {:>2} {:>2}  {:<12} {:.6}",
            f.layer,
            f.i,
            f.j,
            f.fit.candidate.token(),
            f.fit.r2
        );
    }
    let coef = d.energy.coefficients_at_origin()?;
    println!("W = {}", d.energy.to_infix());
    println!(
        "dW/dK at 0: K1 {:.4}, K2 {:.4}, K3 {:.4}",
        coef[0], coef[1], coef[2]
    );
    println!("parity R2 against the network: {:.6}", d.parity_r2);
    write(&a.out, &d.energy.to_prefix())?;
    println!("expression -> {}", a.out.display());
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let truth = MaterialModel::benchmark(&a.model)?;
    let learned = match (&a.checkpoint, &a.symbolic) {
        (Some(p), _) => MaterialModel::ickan(load_checkpoint(p)?)?,
        (None, Some(p)) => MaterialModel::symbolic(SymbolicEnergy::from_prefix(&read(p)?)?)?,
        (None, None) => return Err(Error::Argument("--checkpoint or --symbolic is required".into())),
    };
    if a.steps == 0 {
        return Err(Error::Argument("--steps must be positive".into()));
    }
    let mesh = match &a.mesh {
        Some(p) => Mesh::from_text(&read(p)?)?,
        None => validation_mesh(12, 8)?,
    };
    let specimen = Specimen::uniaxial(mesh)?;
    let deltas: Vec<f64> = (1..=a.steps).map(|t| 0.01 * t as f64).collect();
    let report = parity(&specimen, &truth, &learned, &deltas, &SolverOptions::default())?;

    fs::create_dir_all(&a.out)?;
    let mut fields = String::from("node,x,y,ux_true,uy_true,ux_learned,uy_learned\n");
    for (n, p) in specimen.mesh.nodes().iter().enumerate() {
        let _ = writeln!(
            fields,
            "{n},{},{},{},{},{},{}",
            p[0],
            p[1],
            report.u_reference[2 * n],
            report.u_reference[2 * n + 1],
            report.u_learned[2 * n],
            report.u_learned[2 * n + 1]
        );
    }
    write(&a.out.join("fields.csv"), &fields)?;
    let mut reactions = String::from("step,delta,group,reaction_true,reaction_learned\n");
    for (t, d) in deltas.iter().enumerate() {
        for (g, group) in specimen.partition.groups().iter().enumerate() {
            let _ = writeln!(
                reactions,
                "{},{d},{},{},{}",
                t + 1,
                group.name,
                report.reactions_reference[t][g],
                report.reactions_learned[t][g]
            );
        }
    }
    write(&a.out.join("reactions.csv"), &reactions)?;
    let mut par = String::from("element,itil1_true,itil1_learned,J_true,J_learned\n");
    for (e, (i, j)) in report.itil1.iter().zip(&report.j).enumerate() {
        let _ = writeln!(par, "{e},{},{},{},{}", i.0, i.1, j.0, j.1);
    }
    write(&a.out.join("parity.csv"), &par)?;
    println!(
        "{} elements, {} load levels; parity R2: I1~ {:.6}, J {:.6}",
        specimen.mesh.n_elements(),
        deltas.len(),
        report.r2_itil1,
        report.r2_j
    );
    println!("results -> {}", a.out.display());
    Ok(())
}
