use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use permreg::counting::{estimate_pattern_count, EstimateOptions};
use permreg::patterns::{count_pattern, destroy_pattern, verify_destroyed, Pattern, VERIFY_MAX_M};
use permreg::quasirand::{quasirandom_report, ReportOptions};
use permreg::regularity::{regular_partition, EquitablePartition, RegularityLimits};
use permreg::uniformity::{canonical_family, uniform_partition, UniformPartition, UniformStrategy};
use permreg::{format_permutation, generate, DominanceTable, Error, GeneratorKind, Permutation};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(
    name = "permreg",
    version,
    about = "Regularity, uniformity and pattern statistics for permutations"
)]
struct Cli {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true, env = "PERMREG_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Generate the input permutation.
    #[arg(long, value_name = "KIND")]
    gen: Option<Kind>,
    /// Read a one-line permutation of 0..n-1 from a file.
    #[arg(long, value_name = "PATH")]
    input: Option<PathBuf>,
}

#[derive(Args)]
struct InputArgs {
    #[command(flatten)]
    source: Source,
    /// Size for --gen.
    #[arg(long, default_value_t = 1024)]
    n: usize,
    /// Seed for --gen random.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSON result here instead of standard output.
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Identity,
    Reverse,
    Interleave,
    Random,
}

impl From<Kind> for GeneratorKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Identity => GeneratorKind::Identity,
            Kind::Reverse => GeneratorKind::Reverse,
            Kind::Interleave => GeneratorKind::Interleave,
            Kind::Random => GeneratorKind::Random,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Regular,
    Uniform,
}

#[derive(Clone, Copy, ValueEnum)]
enum Strategy {
    Coarsest,
    Regularity,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated permutation in one-line form.
    Gen {
        #[arg(long)]
        kind: Kind,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_name = "PATH")]
        output: Option<PathBuf>,
    },
    /// Build a regular or uniform partition.
    Partition {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        eps: f64,
        #[arg(long, value_enum, default_value = "regular")]
        mode: Mode,
        /// Initial number of blocks.
        #[arg(long, default_value_t = 4)]
        m: usize,
        #[arg(long, value_enum, default_value = "coarsest")]
        strategy: Strategy,
        /// Refinement step limit for the regular driver (default ⌈2/ε⁵⌉).
        #[arg(long)]
        max_iterations: Option<usize>,
        #[arg(long, default_value_t = 4096)]
        max_parts: usize,
    },
    /// Count occurrences of a pattern exactly, estimate them, or both.
    Count {
        #[command(flatten)]
        input: InputArgs,
        /// Pattern in one-line form, e.g. "0 2 1".
        #[arg(long)]
        tau: Pattern,
        /// Use the integral estimator even when exact counting is possible.
        #[arg(long, conflicts_with = "both")]
        estimate: bool,
        /// Report the exact count and the estimate.
        #[arg(long)]
        both: bool,
        /// Number of equitable blocks for the estimator.
        #[arg(long, default_value_t = 20)]
        k: usize,
        /// ε entering the estimator's error bound.
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
        /// Also report the smoothed estimate.
        #[arg(long)]
        smoothed: bool,
    },
    /// Delete index pairs so that no occurrence of a pattern survives.
    Destroy {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        tau: Pattern,
        #[arg(long)]
        eps: f64,
        /// Initial number of blocks for the uniform partition.
        #[arg(long, default_value_t = 4)]
        m: usize,
    },
    /// Quasirandomness statistics.
    Qr {
        #[command(flatten)]
        input: InputArgs,
        /// ε for the uniform-partition check.
        #[arg(long, default_value_t = 0.15)]
        eps: f64,
        /// Skip the uniform-partition check.
        #[arg(long)]
        no_uniform: bool,
        /// Largest frequency in the character-sum profile.
        #[arg(long, default_value_t = 16)]
        k_max: usize,
        /// Grid step for the separability statistic (default n/32).
        #[arg(long)]
        grid: Option<usize>,
    },
}

/// Failure of a command; the exit code distinguishes the kinds.
enum Failure {
    Usage(String),
    /// The result was written but a limit stopped the computation early.
    Partial(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn load(args: &InputArgs) -> Result<Permutation, Failure> {
    match (&args.source.gen, &args.source.input) {
        (Some(kind), _) => Ok(generate((*kind).into(), args.n, args.seed)?),
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
            Ok(text.parse()?)
        }
        (None, None) => Err(Failure::Usage("no input given".into())),
    }
}

fn emit(text: &str, output: Option<&PathBuf>) -> Result<(), Failure> {
    match output {
        Some(path) => fs::write(path, text)
            .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Failure::Usage(format!("cannot write output: {e}")))
        }
    }
}

fn emit_json(value: &Value, output: Option<&PathBuf>) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
    text.push('\n');
    emit(&text, output)
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Gen {
            kind,
            n,
            seed,
            output,
        } => {
            let p = generate(kind.into(), n, seed)?;
            eprintln!("generated a permutation of size {n}");
            emit(&format_permutation(&p), output.as_ref())
        }
        Command::Partition {
            input,
            eps,
            mode,
            m,
            strategy,
            max_iterations,
            max_parts,
        } => {
            let p = load(&input)?;
            let table = DominanceTable::new(&p)?;
            match mode {
                Mode::Regular => {
                    let limits = RegularityLimits {
                        max_iterations,
                        max_parts,
                        ..RegularityLimits::default()
                    };
                    let out = regular_partition(&table, eps, m, &limits)?;
                    emit_json(&to_value(&out), input.output.as_ref())?;
                    eprintln!(
                        "k = {}, |C_0| = {}, q = {:.6}, {} checks",
                        out.report.k,
                        out.report.exceptional_size,
                        out.report.q,
                        out.iterations.len()
                    );
                    if out.is_regular() {
                        Ok(())
                    } else {
                        Err(Failure::Partial(format!(
                            "stopped before regularity: {:?}",
                            out.status
                        )))
                    }
                }
                Mode::Uniform => {
                    let strategy = match strategy {
                        Strategy::Coarsest => UniformStrategy::Coarsest,
                        Strategy::Regularity => UniformStrategy::Regularity,
                    };
                    let out = uniform_partition(&table, eps, m, strategy)?;
                    emit_json(&to_value(&out), input.output.as_ref())?;
                    eprintln!(
                        "k = {}, |C_0| = {}, uniform = {}",
                        out.uniform.partition.k(),
                        out.uniform.partition.exceptional_size(),
                        out.check.uniform
                    );
                    if out.check.uniform {
                        Ok(())
                    } else {
                        Err(Failure::Partial("partition failed verification".into()))
                    }
                }
            }
        }
        Command::Count {
            input,
            tau,
            estimate,
            both,
            k,
            eps,
            smoothed,
        } => {
            let p = load(&input)?;
            let mut result = json!({ "tau": tau.to_string(), "n": p.len() });
            let exact = if estimate {
                None
            } else {
                Some(count_pattern(&p, &tau, None))
            };
            let mut need_estimate = estimate || both;
            match exact {
                Some(Ok(c)) => result["exact"] = json!(c),
                Some(Err(Error::Guard(reason))) => {
                    eprintln!("exact counting skipped: {reason}");
                    need_estimate = true;
                }
                Some(Err(e)) => return Err(e.into()),
                None => {}
            }
            if need_estimate {
                let part = EquitablePartition::equitable(p.len(), k)?;
                let u = UniformPartition {
                    family: canonical_family(&p, &part)?,
                    partition: part,
                    epsilon: eps,
                };
                let opts = EstimateOptions {
                    smoothed,
                    ..EstimateOptions::default()
                };
                let e = estimate_pattern_count(&p, &u, &tau, &opts)?;
                result["estimate"] = json!(e.estimate);
                result["bound"] = json!(e.bound);
                result["epsilon"] = json!(e.epsilon);
                result["k"] = json!(e.k);
                result["m"] = json!(e.m);
                result["smoothed_estimate"] = json!(e.smoothed_estimate);
                if let Some(c) = result.get("exact").and_then(Value::as_u64) {
                    result["within_bound"] = json!((c as f64 - e.estimate).abs() <= e.bound);
                }
            }
            emit_json(&result, input.output.as_ref())?;
            eprintln!("counted {tau} in a permutation of size {}", p.len());
            Ok(())
        }
        Command::Destroy { input, tau, eps, m } => {
            let p = load(&input)?;
            let table = DominanceTable::new(&p)?;
            let out = destroy_pattern(&table, &tau, eps, m)?;
            let check = if tau.m() <= VERIFY_MAX_M {
                match verify_destroyed(&p, &tau, &out.deletion) {
                    Ok(c) => Some(c),
                    Err(Error::Guard(reason)) => {
                        eprintln!("verification skipped: {reason}");
                        None
                    }
                    Err(e) => return Err(e.into()),
                }
            } else {
                None
            };
            let result = json!({
                "deletion": to_value(&out.deletion),
                "audit": to_value(&out.audit),
                "verification": check.as_ref().map(to_value),
            });
            emit_json(&result, input.output.as_ref())?;
            eprintln!(
                "deleted {} pairs (rules a/b/c: {}/{}/{}), destroyed = {}",
                out.audit.total,
                out.audit.rule_a,
                out.audit.rule_b,
                out.audit.rule_c,
                check.map_or("unverified".to_string(), |c| c.destroyed.to_string())
            );
            Ok(())
        }
        Command::Qr {
            input,
            eps,
            no_uniform,
            k_max,
            grid,
        } => {
            let p = load(&input)?;
            let table = DominanceTable::new(&p)?;
            let opts = ReportOptions {
                separability_grid: grid,
                k_max,
                uniform_eps: (!no_uniform).then_some(eps),
                ..ReportOptions::default()
            };
            let rep = quasirandom_report(&table, &opts)?;
            emit_json(&to_value(&rep), input.output.as_ref())?;
            eprintln!(
                "n = {}, D* = {:.3}, D in [{:.3}, {:.3}]",
                rep.n, rep.d_star, rep.d_lower, rep.d_upper
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    // clap exits with 2 on bad arguments, which here means a partial result
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            eprintln!("error: cannot configure {t} threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Partial(msg)) => {
            eprintln!("partial result: {msg}");
            ExitCode::from(2)
        }
    }
}
