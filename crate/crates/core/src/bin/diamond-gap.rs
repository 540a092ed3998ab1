use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use diamond_gap::channel::load_channel;
use diamond_gap::ensemble::{run_ensemble, write_csv, EnsembleConfig};
use diamond_gap::protocol::GammaForm;
use diamond_gap::verify::{run_suite, Suite};
use diamond_gap::{analyze, Error};

const EXIT_PASS: u8 = 0;
const EXIT_FALSIFIED: u8 = 1;
const EXIT_NOT_APPLICABLE: u8 = 2;
const EXIT_INPUT: u8 = 3;

/// Constant-gap certification for the half-duplex two-relay MIMO diamond channel.
#[derive(Parser)]
#[command(name = "diamond-gap", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyse one channel and write a JSON report.
    ///
    /// Exit status: 0 all checks pass, 1 a check failed, 2 delta <= 0,
    /// 3 unreadable input.
    Analyze {
        #[arg(long)]
        channel: PathBuf,
        #[arg(long, default_value_t = GammaForm::Corrected)]
        gamma_form: GammaForm,
        /// Report destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Certify the gap over a seeded random ensemble.
    Ensemble {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, default_value_t = GammaForm::Corrected)]
        gamma_form: GammaForm,
        #[arg(long)]
        csv: PathBuf,
        /// Also bracket each LP optimum with the grid oracle at this resolution.
        #[arg(long, default_value_t = 0)]
        grid_steps: usize,
        /// Worker threads; all cores when omitted.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run a certification suite: fiedler, prop1, lemmas, lp-oracle,
    /// waterfill-oracle or all.
    Verify {
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { EXIT_PASS });
        }
    };
    let code = match cli.command {
        Command::Analyze {
            channel,
            gamma_form,
            out,
        } => cmd_analyze(&channel, gamma_form, out.as_deref()),
        Command::Ensemble {
            n,
            trials,
            seed,
            scale,
            gamma_form,
            csv,
            grid_steps,
            threads,
        } => with_threads(threads, || {
            let cfg = EnsembleConfig {
                n,
                trials,
                seed,
                scale,
                gamma_form,
                grid_steps,
            };
            cmd_ensemble(&cfg, &csv)
        }),
        Command::Verify {
            suite,
            trials,
            seed,
            threads,
        } => with_threads(threads, || cmd_verify(&suite, trials, seed)),
    };
    ExitCode::from(code)
}

fn with_threads(threads: Option<usize>, f: impl FnOnce() -> u8 + Send) -> u8 {
    match threads {
        None => f(),
        Some(0) => {
            eprintln!("error: --threads must be at least 1");
            EXIT_INPUT
        }
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(f),
            Err(e) => {
                eprintln!("error: cannot start worker pool: {e}");
                EXIT_INPUT
            }
        },
    }
}

fn fail(e: &Error) -> u8 {
    eprintln!("error: {e}");
    match e {
        Error::NotApplicable { .. } => EXIT_NOT_APPLICABLE,
        _ => EXIT_INPUT,
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn cmd_analyze(channel: &Path, form: GammaForm, out: Option<&Path>) -> u8 {
    let dc = match load_channel(channel) {
        Ok(dc) => dc,
        Err(e) => return fail(&e),
    };
    let analysis = match analyze(&dc, form) {
        Ok(a) => a,
        Err(e) => return fail(&e),
    };
    let json = serde_json::to_string_pretty(&analysis).expect("report serialises") + "\n";
    match out {
        Some(path) => {
            if let Err(e) = write_text(path, &json) {
                return fail(&e);
            }
        }
        None => print!("{json}"),
    }
    let Some(gap) = &analysis.gap else {
        eprintln!(
            "delta = {:.6e} <= 0: the gap result does not apply",
            analysis.params.delta
        );
        return EXIT_NOT_APPLICABLE;
    };
    eprintln!(
        "kappa = {:.6} bits (bound {:.6}), r_ach = {:.6}, r_up = {:.6}, branch {}, {}",
        gap.kappa,
        gap.theorem_bound,
        gap.r_ach,
        gap.r_up,
        gap.branch,
        if gap.all_checks_pass { "all checks pass" } else { "CHECK FAILED" }
    );
    if gap.all_checks_pass {
        EXIT_PASS
    } else {
        EXIT_FALSIFIED
    }
}

fn cmd_ensemble(cfg: &EnsembleConfig, csv: &Path) -> u8 {
    let run = match run_ensemble(cfg) {
        Ok(run) => run,
        Err(e) => return fail(&e),
    };
    if let Err(e) = write_csv(&run.rows, csv) {
        return fail(&e);
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&run.summary).expect("summary serialises")
    );
    if run.summary.falsifications == 0 {
        EXIT_PASS
    } else {
        EXIT_FALSIFIED
    }
}

fn cmd_verify(suite: &str, trials: usize, seed: u64) -> u8 {
    let suite: Suite = match suite.parse() {
        Ok(s) => s,
        Err(e) => return fail(&e),
    };
    let reports = match run_suite(suite, trials, seed) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    let mut total = 0;
    for r in &reports {
        print!("{r}");
        total += r.falsifications();
    }
    println!("total falsifications: {total}");
    if total == 0 {
        EXIT_PASS
    } else {
        EXIT_FALSIFIED
    }
}
