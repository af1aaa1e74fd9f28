//! The `mtem` command line.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use mtem_core::analysis::ErrorKind;
use mtem_core::builtins::GRID_POINTS;

use crate::config::CONFIG_HELP;
use crate::experiment::{write_json, SCHEMA_VERSION};
use crate::setup::{ConstantsFile, EXAMPLE2_SEARCH_RADIUS};
use crate::{check_conditions, derive_constants, run_experiment, with_jobs, CliError, ExperimentConfig, Setup};

/// Strong-convergence experiments for the modified truncated Euler-Maruyama scheme.
#[derive(Parser)]
#[command(name = "mtem", version)]
struct Cli {
    /// Worker threads; outputs do not depend on this.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured error ladders; writes error_ladder.csv,
    /// rate_fit.json, conditions.json and divergence.csv.
    #[command(after_long_help = CONFIG_HELP)]
    Run { config: PathBuf },
    /// Grid-search the constants of a built-in example (example1, example2)
    /// and write constants-<problem>.json.
    DeriveConstants {
        problem: String,
        /// Drift parameter of example1.
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        /// Moment exponent for the example2 Khasminskii constant.
        #[arg(long, default_value_t = 6.0)]
        p: f64,
        #[arg(long, default_value_t = GRID_POINTS)]
        points: usize,
    },
    /// Sample the structural conditions and step admissibility only;
    /// writes conditions.json.
    #[command(after_long_help = CONFIG_HELP)]
    CheckConditions { config: PathBuf },
}

fn load(cli: &Cli, path: &PathBuf) -> Result<ExperimentConfig, CliError> {
    let mut config = ExperimentConfig::from_file(path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(dir) = &cli.out_dir {
        config.output.dir = dir.clone();
    }
    Ok(config)
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Run { config } => {
            let config = load(cli, config)?;
            let outcome = with_jobs(cli.jobs, || run_experiment(&config))??;
            for ladder in &outcome.ladders {
                let diverged = ladder.total_diverged();
                for kind in [ErrorKind::Terminal, ErrorKind::Sup, ErrorKind::SupStep] {
                    let Some(fit) = outcome.fit(ladder.scheme, kind) else { continue };
                    match fit.slope {
                        Some(slope) => println!(
                            "{:<4} {:<8} slope {slope:.4} (theory {:.4}), residual {:.3e}, {diverged} diverged",
                            ladder.scheme.name(),
                            kind.name(),
                            fit.theoretical_slope,
                            fit.residual.unwrap_or(f64::NAN),
                        ),
                        None => println!(
                            "{:<4} {:<8} no fit: {}",
                            ladder.scheme.name(),
                            kind.name(),
                            fit.fit_error.as_deref().unwrap_or("unknown")
                        ),
                    }
                }
            }
            if !outcome.conditions.all_hold() {
                eprintln!("warning: a sampled condition margin exceeds its bound; see conditions.json");
            }
            println!("wrote {}", config.output.dir.display());
        }
        Command::DeriveConstants { problem, a, p, points } => {
            let derived = derive_constants(problem, *a, *p, *points)?;
            let dir = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
            std::fs::create_dir_all(&dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
            let path = dir.join(format!("constants-{problem}.json"));
            let file = ConstantsFile {
                schema_version: SCHEMA_VERSION,
                derived,
            };
            write_json(&path, &file)?;
            println!("{}", serde_json::to_string_pretty(&file)?);
            if problem == "example2" {
                eprintln!("searched |x| <= {EXAMPLE2_SEARCH_RADIUS}");
            }
            println!("wrote {}", path.display());
        }
        Command::CheckConditions { config } => {
            let config = load(cli, config)?;
            let report = with_jobs(cli.jobs, || {
                let setup = Setup::new(&config)?;
                check_conditions(&config, &setup)
            })??;
            let c = &report.checks;
            println!("monotonicity  worst {:.6} holds {}", c.monotonicity.worst, c.monotonicity.holds);
            println!("khasminskii   worst {:.6} holds {}", c.khasminskii.worst, c.khasminskii.holds);
            if let Some(g) = &c.diffusion_growth {
                println!("diffusion     worst {:.6} holds {}", g.worst, g.holds);
            }
            for l in &c.local_lipschitz {
                println!("lipschitz R={} consistent {}", l.report.radius, l.consistent);
            }
            for a in &report.admissibility {
                println!(
                    "level {:>2} h {:.6e} L^4 delta {:.6e} theorem-covered {}",
                    a.level, a.checks.h_delta, a.checks.l4_delta.margin, a.theorem_covered
                );
            }
            std::fs::create_dir_all(&config.output.dir)
                .map_err(|e| CliError::io(format!("creating {}", config.output.dir.display()), e))?;
            write_json(&config.output.conditions(), &report)?;
            println!("wrote {}", config.output.conditions().display());
        }
    }
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("mtem: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use std::path::Path;

    use super::*;

    fn run(args: &[&str]) -> i32 {
        main_with(std::iter::once("mtem").chain(args.iter().copied()))
    }

    fn write_config(dir: &Path, body: &str) -> String {
        let path = dir.join("test.cfg");
        std::fs::write(&path, body).unwrap();
        path.to_str().unwrap().to_string()
    }

    const SMALL: &str = "[problem]\nname = linear\n[conditions]\nsamples = 500\n\
                         [run]\nschemes = mtem, em\nlevels = 2..5\nreference = closed-form\nreplicates = 200\nseed = 3\n";

    #[test]
    fn run_writes_outputs_with_exact_header() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(dir.path(), SMALL);
        let out = dir.path().join("out");
        assert_eq!(run(&["run", &cfg, "--out-dir", out.to_str().unwrap()]), 0);
        let csv = std::fs::read_to_string(out.join("error_ladder.csv")).unwrap();
        assert_eq!(
            csv.lines().next().unwrap(),
            "scheme,delta,level,q,err_T_mean,err_T_se,err_sup_mean,err_sup_se,err_T_step_mean,err_T_step_se,L_h_delta,L4_delta,replicates,diverged"
        );
        assert_eq!(csv.lines().count(), 1 + 2 * 4);
        // EM rows carry no truncation radius
        assert!(csv.lines().filter(|l| l.starts_with("em,")).all(|l| l.contains(",,,")));
        let fits: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("rate_fit.json")).unwrap()).unwrap();
        let first = &fits[0];
        for key in ["schema_version", "problem", "scheme", "q", "slope", "intercept", "residual", "rows_used"] {
            assert!(first.get(key).is_some(), "missing {key}");
        }
        assert_eq!(first["schema_version"], 1);
        assert!(out.join("conditions.json").exists());
        assert!(out.join("divergence.csv").exists());
    }

    #[test]
    fn seed_flag_changes_results() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(dir.path(), SMALL);
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        assert_eq!(run(&["run", &cfg, "--out-dir", a.to_str().unwrap()]), 0);
        assert_eq!(run(&["--seed", "4", "run", &cfg, "--out-dir", b.to_str().unwrap()]), 0);
        let read = |d: &Path| std::fs::read(d.join("error_ladder.csv")).unwrap();
        assert_ne!(read(&a), read(&b));
    }

    #[test]
    fn exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let out = out.to_str().unwrap();
        let few = write_config(dir.path(), &SMALL.replace("replicates = 200", "replicates = 50"));
        assert_eq!(run(&["run", &few, "--out-dir", out]), 3);
        let bad = write_config(dir.path(), "[problem]\nname = example9\n");
        assert_eq!(run(&["run", &bad, "--out-dir", out]), 2);
        assert_eq!(run(&["run", "/nonexistent/mtem.cfg"]), 1);
        assert_eq!(run(&["--jobs", "0", "run", &write_config(dir.path(), SMALL), "--out-dir", out]), 2);
        assert_eq!(run(&["frobnicate"]), 2);
        assert_eq!(run(&["derive-constants", "linear", "--out-dir", out]), 2);
    }

    #[test]
    fn derived_constants_feed_a_run() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        assert_eq!(run(&["derive-constants", "example2", "--points", "20000", "--out-dir", out]), 0);
        let file: ConstantsFile =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("constants-example2.json")).unwrap()).unwrap();
        let cfg = write_config(
            dir.path(),
            "[problem]\nname = example2\nconstants = constants-example2.json\n[conditions]\nsamples = 500\n\
             [run]\nlevels = 2..4\nreference = fine:6\nreplicates = 100\n",
        );
        let run_out = dir.path().join("run");
        assert_eq!(run(&["check-conditions", &cfg, "--out-dir", run_out.to_str().unwrap()]), 0);
        let report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(run_out.join("conditions.json")).unwrap()).unwrap();
        let crate::setup::DerivedConstants::Example2 { constants, .. } = file.derived else { panic!() };
        assert_eq!(report["conditions"]["k"].as_f64().unwrap(), constants.k);
        assert_eq!(report["derived_constants"]["constants"]["grid_points"], 20000);
    }
}
