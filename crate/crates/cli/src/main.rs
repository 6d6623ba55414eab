//! `chi`: command-line interface for the Cahn-Hilliard inpainting filter,
//! its damage generators, the dense classifier, and the benchmark harness.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime failure (including failed
//! `--assert` checks on benchmark reports).

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use ch_inpaint::classifier::{self, MlpModel, ModelMeta, TrainConfig};
use ch_inpaint::damage::{self, DamageKind, DamageSpec, Variant};
use ch_inpaint::experiment::{self, ExperimentSpec};
use ch_inpaint::field::SolverParams;
use ch_inpaint::inpaint::{self, StageAnchor, TwoStepConfig};
use ch_inpaint::mnist::{Dataset, Split};
use ch_inpaint::solver::{run_to_steady_with, Scheme, StepTrace};
use ch_inpaint::{pgm, ExecMode};

#[derive(Parser)]
#[command(
    name = "chi",
    version,
    about = "Cahn-Hilliard image inpainting and its MNIST classification benchmark",
    propagate_version = true
)]
struct Cli {
    /// Cap the worker pool (1 gives identical results to any other value).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Apply stripe or random damage to a PGM image, emitting the damaged
    /// image and its mask.
    Damage(DamageArgs),
    /// Restore a damaged PGM image given its damage mask.
    Inpaint(InpaintArgs),
    /// Train the 784-64-64-10 classifier on MNIST IDX files.
    Train(TrainArgs),
    /// Accuracy of a trained model on an images/labels pair.
    Evaluate(EvaluateArgs),
    /// Damage the test set, inpaint, classify both batches, report accuracy
    /// with and without the filter.
    Bench(BenchArgs),
    /// Fidelity-strength calibration sweep on the built-in crossline image.
    Crossline(CrosslineArgs),
    /// Parameter-sensitivity gallery for a damaged image.
    Sensitivity(SensitivityArgs),
}

#[derive(Args)]
struct DamageArgs {
    /// Input image (binary PGM).
    #[arg(long = "in")]
    input: PathBuf,
    /// Damage kind: a, b, c, d (frozen 28x28 stripe patterns), rows,
    /// pixels, or stripes (explicit geometry via --stripes).
    #[arg(long)]
    kind: String,
    /// Row count for --kind rows.
    #[arg(long)]
    count: Option<usize>,
    /// Damaged-pixel fraction in [0,1] for --kind pixels.
    #[arg(long)]
    fraction: Option<f64>,
    /// Explicit stripes as o:start:thickness[,o:start:thickness...],
    /// orientation h or v.
    #[arg(long)]
    stripes: Option<String>,
    /// Grey phase value painted into damaged cells.
    #[arg(long, default_value_t = 0.0)]
    grey: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_img: PathBuf,
    #[arg(long)]
    out_mask: PathBuf,
}

#[derive(Args)]
struct InpaintArgs {
    /// Damaged image (binary PGM).
    #[arg(long = "in")]
    input: PathBuf,
    /// Damage mask (PGM, 255 = damaged).
    #[arg(long)]
    mask: PathBuf,
    /// Parameter preset: customized (eps1 1.5, eps2 0.5, lambda 1000),
    /// rows (1.5, 0.5, 1000) or pixels (1.5, 0.5, 9000).
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    eps1: Option<f64>,
    #[arg(long)]
    eps2: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Steady-state L1 tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Time stepper: splitting (default) or full2d.
    #[arg(long)]
    scheme: Option<String>,
    /// Stage-two fidelity anchor: original (default) or stage1.
    #[arg(long)]
    anchor: Option<String>,
    /// Per-step trace CSV (step, l1_delta, energy, newton_iters).
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Directory holding the four MNIST IDX files.
    #[arg(long)]
    data_dir: PathBuf,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    learning_rate: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Threshold pixels to {0, 255} before training.
    #[arg(long)]
    binarize: Option<u8>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    images: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// Evaluate only the first N samples.
    #[arg(long)]
    limit: Option<usize>,
    /// Threshold pixels to {0, 255} before evaluating.
    #[arg(long)]
    binarize: Option<u8>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data_dir: PathBuf,
    /// Damage family: a, b, c, d, rows or pixels.
    #[arg(long)]
    kind: String,
    /// Row counts to sweep for --kind rows, e.g. 6,8,16.
    #[arg(long, value_delimiter = ',')]
    counts: Vec<usize>,
    /// Pixel fractions to sweep for --kind pixels, e.g. 0.3,0.8.
    #[arg(long, value_delimiter = ',')]
    fractions: Vec<f64>,
    /// Stratified sample size (max 10000); --full overrides.
    #[arg(long, default_value_t = 1000)]
    limit: usize,
    /// Run the full 10000-image test set.
    #[arg(long)]
    full: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Grey phase value painted into damaged cells.
    #[arg(long, default_value_t = 0.0)]
    grey: f64,
    /// Write the report as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the report (with the full spec echo) as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Check every report row, e.g. "improvement_pct>0" or
    /// "acc_with>=0.8"; any failure exits nonzero. Repeatable.
    #[arg(long = "assert")]
    asserts: Vec<String>,
}

#[derive(Args)]
struct CrosslineArgs {
    /// Fidelity strengths to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 10.0, 100.0, 1000.0])]
    lambdas: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    /// Time stepper: splitting (default) or full2d.
    #[arg(long)]
    scheme: Option<String>,
    /// Save the damaged input and each steady state as PGM files here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SensitivityArgs {
    /// Damaged image (binary PGM).
    #[arg(long = "in")]
    input: PathBuf,
    /// Damage mask (PGM, 255 = damaged).
    #[arg(long)]
    mask: PathBuf,
    /// Gallery output directory (one PGM per parameter combination).
    #[arg(long)]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own help/error text.
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        ch_inpaint::exec::set_threads(threads);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<ch_inpaint::Error> for CliError {
    fn from(e: ch_inpaint::Error) -> Self {
        match e {
            ch_inpaint::Error::InvalidParam(_) | ch_inpaint::Error::DimensionMismatch(..) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

type CliResult = Result<(), CliError>;

fn echo_config(command: &str, config: &serde_json::Value) {
    eprintln!(
        "config: {}",
        json!({ "command": command, "resolved": config })
    );
}

fn run(command: Command) -> CliResult {
    match command {
        Command::Damage(args) => cmd_damage(args),
        Command::Inpaint(args) => cmd_inpaint(args),
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Crossline(args) => cmd_crossline(args),
        Command::Sensitivity(args) => cmd_sensitivity(args),
    }
}

fn parse_kind(args: &DamageArgs) -> Result<DamageKind, CliError> {
    match args.kind.as_str() {
        "a" | "b" | "c" | "d" | "A" | "B" | "C" | "D" => Ok(DamageKind::Customized(
            Variant::from_str(&args.kind).map_err(|e| CliError::Usage(e.to_string()))?,
        )),
        "rows" => {
            let count = args
                .count
                .ok_or_else(|| CliError::Usage("--kind rows requires --count".into()))?;
            Ok(DamageKind::RandomRows { count })
        }
        "pixels" => {
            let fraction = args
                .fraction
                .ok_or_else(|| CliError::Usage("--kind pixels requires --fraction".into()))?;
            Ok(DamageKind::RandomPixels { fraction })
        }
        "stripes" => {
            let text = args
                .stripes
                .as_deref()
                .ok_or_else(|| CliError::Usage("--kind stripes requires --stripes".into()))?;
            Ok(DamageKind::Stripes(
                damage::parse_stripes(text).map_err(|e| CliError::Usage(e.to_string()))?,
            ))
        }
        other => Err(CliError::Usage(format!(
            "unknown damage kind '{other}' (expected a, b, c, d, rows, pixels or stripes)"
        ))),
    }
}

fn cmd_damage(args: DamageArgs) -> CliResult {
    let kind = parse_kind(&args)?;
    let spec = DamageSpec {
        kind,
        grey_value: args.grey,
        seed: args.seed,
    };
    echo_config(
        "damage",
        &json!({ "in": args.input, "spec": spec, "out_img": args.out_img, "out_mask": args.out_mask }),
    );
    let image = pgm::read_field_path(&args.input)?;
    let (damaged, mask) = damage::apply_damage(&image, &spec)?;
    pgm::write_field_path(&damaged, &args.out_img)?;
    pgm::write_mask_path(&mask, &args.out_mask)?;
    Ok(())
}

fn build_two_step(args: &InpaintArgs) -> Result<TwoStepConfig, CliError> {
    let mut config = match args.preset.as_deref() {
        None => TwoStepConfig::default(),
        Some("customized") => inpaint::preset_for(&DamageKind::Customized(Variant::A)),
        Some("rows") => inpaint::preset_for(&DamageKind::RandomRows { count: 0 }),
        Some("pixels") => inpaint::preset_for(&DamageKind::RandomPixels { fraction: 0.0 }),
        Some(other) => {
            return Err(CliError::Usage(format!(
                "unknown preset '{other}' (expected customized, rows or pixels)"
            )))
        }
    };
    if let Some(e) = args.eps1 {
        config.epsilon1 = e;
    }
    if let Some(e) = args.eps2 {
        config.epsilon2 = e;
    }
    if let Some(l) = args.lambda {
        config.lambda0 = l;
    }
    if let Some(dt) = args.dt {
        config.dt = dt;
    }
    if let Some(tol) = args.tol {
        config.steady_tol = tol;
    }
    if let Some(scheme) = args.scheme.as_deref() {
        config.scheme = Scheme::from_str(scheme).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    config.anchor = match args.anchor.as_deref() {
        None | Some("original") => StageAnchor::OriginalImage,
        Some("stage1") => StageAnchor::StageOutput,
        Some(other) => {
            return Err(CliError::Usage(format!(
                "unknown anchor '{other}' (expected original or stage1)"
            )))
        }
    };
    Ok(config)
}

fn cmd_inpaint(args: InpaintArgs) -> CliResult {
    let config = build_two_step(&args)?;
    echo_config(
        "inpaint",
        &json!({ "in": args.input, "mask": args.mask, "config": config, "out": args.out }),
    );
    let image = pgm::read_field_path(&args.input)?;
    let mask = pgm::read_mask_path(&args.mask)?;

    let restored = match args.trace {
        None => inpaint::inpaint(&image, &mask, &config)?,
        Some(trace_path) => {
            // Traced runs drive the two stages explicitly so every step
            // lands in the CSV.
            let mut rows = String::from("stage,step,l1_delta,energy,newton_iters\n");
            let stage_params = |eps: f64, max_steps: usize| SolverParams {
                epsilon: eps,
                lambda0: config.lambda0,
                dt: config.dt,
                steady_tol: config.steady_tol,
                max_steps,
                ..SolverParams::default()
            };
            let mut sink1 = |t: &StepTrace| {
                rows.push_str(&format!(
                    "1,{},{:.6e},{:.6e},{}\n",
                    t.step, t.l1_delta, t.energy, t.newton_iters
                ));
            };
            let (stage1, _) = run_to_steady_with(
                &image,
                &mask,
                &stage_params(config.epsilon1, config.max_steps_stage1),
                config.scheme,
                ExecMode::default(),
                Some(&mut sink1),
            )?;
            let anchor = match config.anchor {
                StageAnchor::OriginalImage => &image,
                StageAnchor::StageOutput => &stage1,
            };
            let mut sink2 = |t: &StepTrace| {
                rows.push_str(&format!(
                    "2,{},{:.6e},{:.6e},{}\n",
                    t.step, t.l1_delta, t.energy, t.newton_iters
                ));
            };
            let (restored, _) = ch_inpaint::solver::run_to_steady_anchored(
                &stage1,
                anchor,
                &mask,
                &stage_params(config.epsilon2, config.max_steps_stage2),
                config.scheme,
                ExecMode::default(),
                Some(&mut sink2),
            )?;
            std::fs::write(trace_path, rows)?;
            restored
        }
    };
    pgm::write_field_path(&restored, &args.out)?;
    Ok(())
}

fn cmd_train(args: TrainArgs) -> CliResult {
    let config = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch_size,
        learning_rate: args.learning_rate,
        seed: args.seed,
        ..Default::default()
    };
    echo_config(
        "train",
        &json!({
            "data_dir": args.data_dir,
            "epochs": config.epochs,
            "batch_size": config.batch_size,
            "learning_rate": config.learning_rate,
            "seed": config.seed,
            "binarize": args.binarize,
            "out": args.out,
        }),
    );
    let mut train_set = Dataset::load_dir(&args.data_dir, Split::Train)?;
    if let Some(t) = args.binarize {
        train_set.binarize(t);
    }
    let model = classifier::train_sized(&train_set, &config, [784, 64, 64, 10], |(epoch, loss)| {
        eprintln!("epoch {epoch}: mean loss {loss:.4}");
    })?;
    let train_acc = classifier::evaluate_dataset(&model, &train_set)?;
    println!("train accuracy: {train_acc:.4}");
    model.save_path(
        &args.out,
        &ModelMeta {
            seed: config.seed,
            epochs: config.epochs as u32,
        },
    )?;
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> CliResult {
    echo_config(
        "evaluate",
        &json!({ "model": args.model, "images": args.images, "labels": args.labels, "limit": args.limit }),
    );
    let (model, _) = MlpModel::load_path(&args.model)?;
    let mut dataset = Dataset::load_idx(&args.images, &args.labels, Split::Test)?;
    if let Some(t) = args.binarize {
        dataset.binarize(t);
    }
    if let Some(limit) = args.limit {
        dataset.images.truncate(limit);
    }
    let accuracy = classifier::evaluate_dataset(&model, &dataset)?;
    println!("accuracy: {accuracy:.4}");
    Ok(())
}

struct Assertion {
    field: String,
    op: String,
    value: f64,
}

fn parse_assertion(text: &str) -> Result<Assertion, CliError> {
    for op in ["<=", ">=", "<", ">"] {
        if let Some((field, value)) = text.split_once(op) {
            let field = field.trim().to_string();
            if !["acc_with", "acc_without", "improvement_pct"].contains(&field.as_str()) {
                return Err(CliError::Usage(format!(
                    "unknown assert field '{field}' (expected acc_with, acc_without or improvement_pct)"
                )));
            }
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("bad assert value in '{text}'")))?;
            return Ok(Assertion {
                field,
                op: op.to_string(),
                value,
            });
        }
    }
    Err(CliError::Usage(format!(
        "bad assert '{text}', expected field<op>value"
    )))
}

fn check_assertion(a: &Assertion, report: &experiment::ExperimentReport) -> Result<bool, CliError> {
    let actual = match a.field.as_str() {
        "acc_with" => report.acc_with,
        "acc_without" => report.acc_without,
        "improvement_pct" => report.improvement_pct().ok_or_else(|| {
            CliError::Runtime("improvement undefined (zero without-filter accuracy)".into())
        })?,
        _ => unreachable!("field validated at parse time"),
    };
    Ok(match a.op.as_str() {
        "<" => actual < a.value,
        "<=" => actual <= a.value,
        ">" => actual > a.value,
        ">=" => actual >= a.value,
        _ => unreachable!("op validated at parse time"),
    })
}

fn cmd_bench(args: BenchArgs) -> CliResult {
    let asserts: Vec<Assertion> = args
        .asserts
        .iter()
        .map(|t| parse_assertion(t))
        .collect::<Result<_, _>>()?;

    let kinds: Vec<DamageKind> = match args.kind.as_str() {
        "a" | "b" | "c" | "d" | "A" | "B" | "C" | "D" => {
            vec![DamageKind::Customized(
                Variant::from_str(&args.kind).map_err(|e| CliError::Usage(e.to_string()))?,
            )]
        }
        "rows" => {
            if args.counts.is_empty() {
                return Err(CliError::Usage("--kind rows requires --counts".into()));
            }
            args.counts
                .iter()
                .map(|&count| DamageKind::RandomRows { count })
                .collect()
        }
        "pixels" => {
            if args.fractions.is_empty() {
                return Err(CliError::Usage("--kind pixels requires --fractions".into()));
            }
            args.fractions
                .iter()
                .map(|&fraction| DamageKind::RandomPixels { fraction })
                .collect()
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown damage kind '{other}' (expected a, b, c, d, rows or pixels)"
            )))
        }
    };

    let sample_limit = if args.full { None } else { Some(args.limit) };
    let specs: Vec<ExperimentSpec> = kinds
        .into_iter()
        .map(|kind| {
            let preset = inpaint::preset_for(&kind);
            ExperimentSpec {
                damage: DamageSpec {
                    kind,
                    grey_value: args.grey,
                    seed: args.seed,
                },
                preset,
                sample_limit,
                seed: args.seed,
            }
        })
        .collect();

    let config_echo = json!({
        "model": args.model,
        "data_dir": args.data_dir,
        "specs": specs,
    });
    echo_config("bench", &config_echo);

    let (model, _) = MlpModel::load_path(&args.model)?;
    let test_set = Dataset::load_dir(&args.data_dir, Split::Test)?;
    let reports = experiment::sweep(&specs, &model, &test_set)?;

    print!("# config: {config_echo}\n{}", experiment::render_table(&reports));
    if let Some(path) = &args.csv {
        std::fs::write(path, experiment::reports_to_csv(&reports, &config_echo))?;
    }
    if let Some(path) = &args.json {
        std::fs::write(
            path,
            serde_json::to_string_pretty(&experiment::reports_to_json(&reports, &specs))
                .expect("reports serialize"),
        )?;
    }

    let mut failed = false;
    for report in &reports {
        for a in &asserts {
            if !check_assertion(a, report)? {
                eprintln!(
                    "assert failed on {} {}: {}{}{} (acc_without {:.4}, acc_with {:.4}, improvement {})",
                    report.damage_kind,
                    report.param,
                    a.field,
                    a.op,
                    a.value,
                    report.acc_without,
                    report.acc_with,
                    report
                        .improvement_pct()
                        .map_or("n/a".into(), |p| format!("{p:.1}%"))
                );
                failed = true;
            }
        }
    }
    if failed {
        return Err(CliError::Runtime("benchmark assertions failed".into()));
    }
    Ok(())
}

fn cmd_crossline(args: CrosslineArgs) -> CliResult {
    let scheme = match args.scheme.as_deref() {
        None => Scheme::Splitting,
        Some(s) => Scheme::from_str(s).map_err(|e| CliError::Usage(e.to_string()))?,
    };
    let config_echo = json!({ "lambdas": args.lambdas, "eps": args.eps, "scheme": scheme });
    echo_config("crossline", &config_echo);

    if let Some(dir) = &args.out_dir {
        std::fs::create_dir_all(dir)?;
        let (damaged, mask) = experiment::crossline_damaged();
        pgm::write_field_path(&damaged, dir.join("damaged.pgm"))?;
        pgm::write_mask_path(&mask, dir.join("mask.pgm"))?;
    }
    let rows = experiment::crossline_calibration_with(
        &args.lambdas,
        args.eps,
        scheme,
        ExecMode::default(),
    )?;
    println!("# config: {config_echo}");
    println!("{:>10} {:>8} {:>10} {:>10}", "lambda", "steps", "seconds", "l1_norm");
    for row in &rows {
        println!(
            "{:>10} {:>8} {:>10.2} {:>10.2}",
            row.lambda, row.steps, row.seconds, row.l1_from_initial
        );
        if let Some(dir) = &args.out_dir {
            let (damaged, mask) = experiment::crossline_damaged();
            let params = SolverParams {
                epsilon: args.eps,
                lambda0: row.lambda,
                ..Default::default()
            };
            let (final_field, _) = run_to_steady_with(
                &damaged,
                &mask,
                &params,
                scheme,
                ExecMode::default(),
                None,
            )?;
            pgm::write_field_path(&final_field, dir.join(format!("steady-lambda{}.pgm", row.lambda)))?;
        }
    }
    Ok(())
}

fn cmd_sensitivity(args: SensitivityArgs) -> CliResult {
    echo_config(
        "sensitivity",
        &json!({ "in": args.input, "mask": args.mask, "out_dir": args.out_dir }),
    );
    let image = pgm::read_field_path(&args.input)?;
    let mask = pgm::read_mask_path(&args.mask)?;
    std::fs::create_dir_all(&args.out_dir)?;
    let cases = experiment::sensitivity_study(&image, &mask);
    for case in &cases {
        match &case.outcome {
            Ok(field) => {
                let path = args.out_dir.join(format!("{}.pgm", case.label));
                pgm::write_field_path(field, &path)?;
                println!(
                    "{:<14} eps1 {:>5} eps2 {:>5} lambda {:>8} -> {}",
                    case.label,
                    case.epsilon1,
                    case.epsilon2,
                    case.lambda0,
                    path.display()
                );
            }
            Err(e) => {
                println!(
                    "{:<14} eps1 {:>5} eps2 {:>5} lambda {:>8} -> failed: {e}",
                    case.label, case.epsilon1, case.epsilon2, case.lambda0
                );
            }
        }
    }
    Ok(())
}
