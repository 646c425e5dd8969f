//! The `onebit` command line.
//!
//! Exit status is 0 on success, 1 for usage and configuration errors and 2
//! when a run fails after its inputs were accepted.

use std::ffi::OsString;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use ndarray::Array1;
use serde::Serialize;
use serde_json::json;

use super::{run_sweep, write_csv, write_meta, ExperimentConfig, ModelSpec};
use crate::embed::{
    bese_deviation, build_epsilon_net, local_embedding_check, noisy_bound_check,
    unit_pair_at_distance, verify_norm_preservation, verify_sep_lemma, verify_sep_lemma_near,
    verify_sign_flip_prob, NoisyBoundSetup,
};
use crate::error::{Error, Result};
use crate::genmodel::{normalize_model, FeedForwardModel, GenerativeModel};
use crate::measure::{geodesic_dist, noisy_sign_measure, MeasurementEnsemble, NoiseSpec};
use crate::recover::{project_range, RecoveryConfig, Solver, SolverSettings};
use crate::rng::{derive_seed, rng_from_seed, unit_sphere};

const DEFAULT_MODEL: &str = "group-sparse:n=64,k=2,r=1,x_max=1.7320508075688772,x_c=1";

#[derive(Debug, Parser)]
#[command(
    name = "onebit",
    version,
    about = "1-bit compressive sensing with generative priors"
)]
struct Cli {
    /// Master seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Emit JSON instead of plain text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a recovery sweep described by a TOML config and write CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        /// Comma-separated measurement counts.
        #[arg(long, value_delimiter = ',')]
        m_grid: Option<Vec<usize>>,
    },
    /// Run a named Monte Carlo verifier and print a JSON report.
    Verify(VerifyArgs),
    /// Project a vector onto the range of a generative model.
    Project {
        /// `group-sparse:n=…,k=…[,r=…,x_max=…,x_c=…]` or `ffnet:<weights.json>`.
        #[arg(long)]
        model: String,
        /// Normalize an ffnet model with this output floor.
        #[arg(long)]
        r_min: Option<f64>,
        /// File holding the vector (JSON array or whitespace-separated), `-` for stdin.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        inner_steps: Option<usize>,
        #[arg(long)]
        inner_lr: Option<f64>,
    },
    /// Take sign measurements of a vector with a seeded Gaussian matrix.
    Measure {
        #[arg(long)]
        m: usize,
        /// File holding the vector, `-` for stdin.
        #[arg(long)]
        input: PathBuf,
        /// `none`, `sign_flip:<p>` or `gaussian:<sigma>`.
        #[arg(long, default_value = "none")]
        noise: String,
        /// Also write the matrix in the binary layout.
        #[arg(long)]
        save_matrix: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Verifier {
    /// Far-pair hyperplane separation.
    #[value(alias = "separation-far")]
    Lemma1,
    /// Near-pair hyperplane agreement.
    #[value(alias = "separation-near")]
    Lemma1Near,
    /// Norm preservation of A/√m.
    #[value(alias = "norm")]
    Lemma2,
    /// Sign-flip probability equals geodesic distance.
    #[value(alias = "sign-flip")]
    Lemma4,
    /// Geodesic versus Euclidean distance sandwich.
    #[value(alias = "sandwich")]
    Lemma6,
    /// Uniform Hamming/geodesic deviation on a model range.
    Bese,
    /// Far/near Hamming extremes on a model range.
    LocalEmbedding,
    /// Recovery error bound under noise.
    NoisyBound,
    /// Grid ε-net of a latent ball.
    EpsilonNet,
}

#[derive(Debug, clap::Args)]
struct VerifyArgs {
    #[arg(value_enum)]
    name: Verifier,
    /// Monte Carlo trials (rows, matrices or probes depending on the verifier).
    #[arg(long)]
    trials: Option<usize>,
    /// Number of vector pairs.
    #[arg(long)]
    pairs: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    r_min: Option<f64>,
    /// `none`, `sign_flip:<p>` or `gaussian:<sigma>`.
    #[arg(long)]
    noise: Option<String>,
    #[arg(long)]
    solver: Option<Solver>,
    /// TOML file of per-solver settings (tables `[pgd1bit]`, `[biht]`, …).
    #[arg(long)]
    settings: Option<PathBuf>,
    /// Latent dimension for `epsilon-net`.
    #[arg(long)]
    k: Option<usize>,
    /// Ball radius for `epsilon-net`.
    #[arg(long)]
    r: Option<f64>,
    /// Net radius for `epsilon-net`.
    #[arg(long)]
    delta: Option<f64>,
}

enum Failure {
    Config(Error),
    Runtime(Error),
}

fn config<T>(r: Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(Failure::Config)
}

fn runtime<T>(r: Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(Failure::Runtime)
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            1
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn execute(cli: &Cli) -> std::result::Result<(), Failure> {
    match &cli.command {
        Command::Sweep {
            config: path,
            trials,
            m_grid,
        } => sweep(cli, path, *trials, m_grid.clone()),
        Command::Verify(args) => verify(cli, args),
        Command::Project {
            model,
            r_min,
            input,
            restarts,
            inner_steps,
            inner_lr,
        } => {
            let model = config(build_model(model, *r_min))?;
            let y = config(read_vector(input))?;
            if y.len() != model.ambient_dim() {
                return Err(Failure::Config(Error::Config(format!(
                    "input has length {}, model ambient dimension is {}",
                    y.len(),
                    model.ambient_dim()
                ))));
            }
            let mut rc = RecoveryConfig::default().with_seed(cli.seed.unwrap_or(0));
            rc.restarts = restarts.unwrap_or(rc.restarts);
            rc.inner_steps = inner_steps.unwrap_or(rc.inner_steps);
            rc.inner_lr = inner_lr.unwrap_or(rc.inner_lr);
            config(rc.validate())?;
            let p = runtime(project_range(model.as_ref(), &y, &rc))?;
            let text = if cli.json {
                json!({ "x": p.x.to_vec(), "z": p.z.to_vec(), "residual": p.residual }).to_string()
            } else {
                format!(
                    "x {}\nz {}\nresidual {:e}",
                    join(&p.x),
                    join(&p.z),
                    p.residual
                )
            };
            runtime(emit(cli, &text))
        }
        Command::Measure {
            m,
            input,
            noise,
            save_matrix,
        } => {
            let x = config(read_vector(input))?;
            let seed = cli.seed.unwrap_or(0);
            let noise = config(parse_noise(noise))?.with_seed(derive_seed(seed, &[1]));
            let a = config(MeasurementEnsemble::gaussian(*m, x.len(), seed))?;
            let b = runtime(noisy_sign_measure(&a, &x, &noise))?;
            if let Some(path) = save_matrix {
                runtime(a.write_binary(path))?;
            }
            let text = if cli.json {
                json!({ "m": m, "n": x.len(), "seed": seed, "bits": b.bits() }).to_string()
            } else {
                b.bits()
                    .iter()
                    .map(|v| if *v > 0 { "+1" } else { "-1" })
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            runtime(emit(cli, &text))
        }
    }
}

fn join(v: &Array1<f64>) -> String {
    v.iter()
        .map(|x| format!("{x:e}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn emit(cli: &Cli, text: &str) -> Result<()> {
    match &cli.out {
        Some(path) => Ok(std::fs::write(path, format!("{text}\n"))?),
        None => match writeln!(io::stdout().lock(), "{text}") {
            Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
            _ => Ok(()),
        },
    }
}

fn build_model(spec: &str, r_min: Option<f64>) -> Result<Box<dyn GenerativeModel>> {
    match spec.parse::<ModelSpec>()? {
        ModelSpec::Ffnet { path, .. } => {
            let net = FeedForwardModel::load(&path)
                .map_err(|e| Error::Config(format!("cannot load model {}: {e}", path.display())))?;
            match r_min {
                Some(r) => Ok(Box::new(normalize_model(net, r)?)),
                None => Ok(Box::new(net)),
            }
        }
        gs => gs.build(),
    }
}

/// `none`, `sign_flip:<p>` or `gaussian:<sigma>`.
pub fn parse_noise(s: &str) -> Result<NoiseSpec> {
    let bad = || Error::Config(format!("bad noise spec {s:?}"));
    let spec = match s.split_once(':') {
        None if s == "none" => NoiseSpec::none(),
        Some(("sign_flip", p)) => NoiseSpec::sign_flip(p.parse().map_err(|_| bad())?, 0),
        Some(("gaussian", sigma)) => NoiseSpec::gaussian(sigma.parse().map_err(|_| bad())?, 0),
        _ => return Err(bad()),
    };
    spec.validate().map_err(|e| Error::Config(e.to_string()))?;
    Ok(spec)
}

/// A JSON array, or numbers separated by whitespace or commas.
fn read_vector(path: &Path) -> Result<Array1<f64>> {
    let text = if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        s
    } else {
        std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?
    };
    let trimmed = text.trim();
    let values: Vec<f64> = if trimmed.starts_with('[') {
        serde_json::from_str(trimmed).map_err(|e| Error::Config(e.to_string()))?
    } else {
        trimmed
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse()
                    .map_err(|_| Error::Config(format!("not a number: {t:?}")))
            })
            .collect::<Result<_>>()?
    };
    if values.is_empty() {
        return Err(Error::Config(format!(
            "{} holds no numbers",
            path.display()
        )));
    }
    Ok(Array1::from(values))
}

fn sweep(
    cli: &Cli,
    path: &Path,
    trials: Option<usize>,
    m_grid: Option<Vec<usize>>,
) -> std::result::Result<(), Failure> {
    let mut cfg = config(ExperimentConfig::load(path))?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(grid) = m_grid {
        cfg.m_grid = grid;
    }
    if let Some(out) = &cli.out {
        cfg.output = Some(out.clone());
    }
    config(cfg.validate())?;
    config(cfg.model.build())?;

    let started = Instant::now();
    let result = runtime(run_sweep(&cfg))?;
    let elapsed = started.elapsed().as_secs_f64();
    match &cfg.output {
        Some(out) => {
            let file = runtime(std::fs::File::create(out).map_err(Error::from))?;
            runtime(write_csv(&result, io::BufWriter::new(file)))?;
            runtime(write_meta(out, &cfg, &result, elapsed))?;
            if cli.json {
                let text = serde_json::to_string_pretty(&result.aggregates)
                    .map_err(|e| Failure::Runtime(Error::Format(e.to_string())))?;
                println!("{text}");
            } else {
                println!("wrote {} rows to {}", result.rows.len(), out.display());
            }
        }
        None if cli.json => {
            let text = serde_json::to_string_pretty(&result)
                .map_err(|e| Failure::Runtime(Error::Format(e.to_string())))?;
            println!("{text}");
        }
        None => runtime(write_csv(&result, io::stdout().lock()))?,
    }
    Ok(())
}

#[derive(Serialize)]
struct PairCheck {
    distance: f64,
    value: f64,
    pass: bool,
}

#[derive(Serialize)]
struct PairReport {
    verifier: &'static str,
    bound: String,
    trials: usize,
    failures: usize,
    pairs: Vec<PairCheck>,
}

fn to_json<T: Serialize>(v: &T) -> std::result::Result<String, Failure> {
    serde_json::to_string_pretty(v).map_err(|e| Failure::Runtime(Error::Format(e.to_string())))
}

fn verify(cli: &Cli, args: &VerifyArgs) -> std::result::Result<(), Failure> {
    let seed = cli.seed.unwrap_or(0);
    let mut rng = rng_from_seed(seed);
    let n = args.n.unwrap_or(10);
    let pairs = args.pairs;
    let report = match args.name {
        Verifier::Lemma1 | Verifier::Lemma1Near => {
            let far = args.name == Verifier::Lemma1;
            let eps = args.eps.unwrap_or(0.5);
            let trials = args.trials.unwrap_or(100_000);
            let slack = 0.01;
            let bound = if far {
                eps / 12.0
            } else {
                1.0 - 2.0 * eps / 3.0
            };
            let mut checks = Vec::new();
            for i in 0..pairs.unwrap_or(10) {
                let u: f64 = rand::Rng::random(&mut rng);
                let dist = if far { eps + u * (2.0 - eps) } else { u * eps };
                let (x, s) = config(unit_pair_at_distance(&mut rng, n.max(2), dist.min(2.0)))?;
                let pseed = derive_seed(seed, &[i as u64]);
                let value = config(if far {
                    verify_sep_lemma(&x, &s, eps, trials, pseed)
                } else {
                    verify_sep_lemma_near(&x, &s, eps, trials, pseed)
                })?;
                checks.push(PairCheck {
                    distance: dist,
                    value,
                    pass: value >= bound - slack,
                });
            }
            to_json(&PairReport {
                verifier: if far { "lemma1" } else { "lemma1-near" },
                bound: format!("frequency >= {bound} - {slack}"),
                trials,
                failures: checks.iter().filter(|c| !c.pass).count(),
                pairs: checks,
            })?
        }
        Verifier::Lemma2 => {
            let x = unit_sphere(&mut rng, args.n.unwrap_or(50));
            let rep = config(verify_norm_preservation(
                &x,
                args.m.unwrap_or(1000),
                args.eps.unwrap_or(0.3),
                args.trials.unwrap_or(100),
                seed,
            ))?;
            to_json(&rep)?
        }
        Verifier::Lemma4 => {
            let rows = args.trials.unwrap_or(100_000);
            let m = args.m.unwrap_or(1000).min(rows).max(1);
            let matrices = rows.div_ceil(m);
            let tol = 0.01;
            let mut checks = Vec::new();
            for i in 0..pairs.unwrap_or(20) {
                let x = unit_sphere(&mut rng, n);
                let s = unit_sphere(&mut rng, n);
                let d_s = config(geodesic_dist(&x, &s))?;
                let value = config(verify_sign_flip_prob(
                    &x,
                    &s,
                    m,
                    matrices,
                    derive_seed(seed, &[i as u64]),
                ))?;
                checks.push(PairCheck {
                    distance: d_s,
                    value,
                    pass: (value - d_s).abs() <= tol,
                });
            }
            to_json(&PairReport {
                verifier: "lemma4",
                bound: format!("|mean d_H - d_S| <= {tol}"),
                trials: m * matrices,
                failures: checks.iter().filter(|c| !c.pass).count(),
                pairs: checks,
            })?
        }
        Verifier::Lemma6 => {
            let count = pairs.unwrap_or(100_000);
            let mut violations = 0;
            for _ in 0..count {
                let x = unit_sphere(&mut rng, n);
                let s = unit_sphere(&mut rng, n);
                let d = (&x - &s).dot(&(&x - &s)).sqrt();
                let d_s = config(geodesic_dist(&x, &s))?;
                if !(d / std::f64::consts::PI <= d_s && d_s <= d / 2.0) {
                    violations += 1;
                }
            }
            to_json(&json!({ "verifier": "lemma6", "pairs": count, "violations": violations }))?
        }
        Verifier::Bese | Verifier::LocalEmbedding | Verifier::NoisyBound => {
            let model = config(build_model(
                args.model.as_deref().unwrap_or(DEFAULT_MODEL),
                args.r_min,
            ))?;
            let default_m = if args.name == Verifier::NoisyBound {
                2000
            } else {
                1000
            };
            let a = config(MeasurementEnsemble::gaussian(
                args.m.unwrap_or(default_m),
                model.ambient_dim(),
                derive_seed(seed, &[0xA]),
            ))?;
            let num_pairs = pairs.unwrap_or(2000);
            match args.name {
                Verifier::Bese => to_json(&config(bese_deviation(
                    model.as_ref(),
                    &a,
                    num_pairs,
                    seed,
                ))?)?,
                Verifier::LocalEmbedding => to_json(&config(local_embedding_check(
                    model.as_ref(),
                    &a,
                    args.eps.unwrap_or(0.5),
                    num_pairs,
                    seed,
                ))?)?,
                _ => {
                    let settings = match &args.settings {
                        Some(path) => config(load_settings(path))?,
                        None => SolverSettings::default(),
                    };
                    let setup = NoisyBoundSetup {
                        noise: config(parse_noise(
                            args.noise.as_deref().unwrap_or("sign_flip:0.05"),
                        ))?
                        .with_seed(seed),
                        solver: args.solver.unwrap_or(Solver::Pgd1Bit),
                        settings,
                        trials: args.trials.unwrap_or(50),
                        bese_pairs: num_pairs,
                        seed,
                    };
                    let mut rep = runtime(noisy_bound_check(model.as_ref(), &a, &setup))?;
                    if !cli.json {
                        rep.trials.clear();
                    }
                    to_json(&rep)?
                }
            }
        }
        Verifier::EpsilonNet => {
            let net = config(build_epsilon_net(
                args.k.unwrap_or(2),
                args.r.unwrap_or(1.0),
                args.delta.unwrap_or(0.2),
            ))?;
            let probes = args.trials.unwrap_or(10_000);
            let worst = net.certify(probes, seed);
            to_json(&json!({
                "verifier": "epsilon-net",
                "points": net.len(),
                "radius": net.radius,
                "log_cardinality": net.log_cardinality(),
                "declared_bound": net.declared_bound,
                "probes": probes,
                "max_probe_distance": worst,
                "covered": worst <= net.radius,
            }))?
        }
    };
    runtime(emit(cli, &report))
}

fn load_settings(path: &Path) -> Result<SolverSettings> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))
}
