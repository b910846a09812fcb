use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pdflow::compare::compare;
use pdflow::config::load_config;
use pdflow::error::{CliError, CliResult};
use pdflow::instance::{dump, gen_instance};
use pdflow::output::{read_csv, report_lines, validation_lines};
use pdflow::runner::{run, validate};

#[derive(Parser)]
#[command(name = "pdflow", version, about = "Preconditioned primal-dual flows: runs, schedule validation and comparisons")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate every [schedule] of a config and write CSV, plot data and a summary.
    Run {
        config: PathBuf,
        /// Overrides the output directory of the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the schedule conditions on the config's time grid.
    Validate {
        config: PathBuf,
        /// Only this schedule label.
        #[arg(long)]
        label: Option<String>,
    },
    /// Compare a column of two trajectory CSVs at matched times.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value = "gap")]
        column: String,
        /// Column of the second file, defaults to --column.
        #[arg(long)]
        column_b: Option<String>,
    },
    /// Generate the config's instance.
    Gen {
        config: PathBuf,
        #[arg(long = "dump-instance")]
        dump_instance: PathBuf,
    },
}

fn exec(cli: Cli) -> CliResult<i32> {
    match cli.cmd {
        Cmd::Run { config, out } => {
            let mut cfg = load_config(&config)?;
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            let summary = run(&cfg)?;
            for o in &summary.outcomes {
                match o {
                    Ok(o) => {
                        if let Some(t) = o.truncated_at {
                            println!("{}: truncated by wall-clock cap at t={t:.6e}", o.label);
                        }
                        print!("{}", report_lines(&o.label, &o.report));
                        for (k, r) in o.probe_reports.iter().enumerate() {
                            if !r.passed() {
                                print!("{}", report_lines(&format!("{} probe {k}", o.label), r));
                            }
                        }
                    }
                    Err(e) => eprintln!("error: {e}"),
                }
            }
            for f in &summary.files {
                println!("wrote {}", f.display());
            }
            Ok(summary.exit_code())
        }
        Cmd::Validate { config, label } => {
            let cfg = load_config(&config)?;
            let reports = validate(&cfg, label.as_deref())?;
            let mut ok = true;
            for (l, r) in &reports {
                print!("{}", validation_lines(l, r));
                ok &= r.passed();
            }
            Ok(if ok { 0 } else { 1 })
        }
        Cmd::Compare { a, b, column, column_b } => {
            let ta = read_csv(&a)?;
            let tb = read_csv(&b)?;
            let c = compare(&ta, &column, &tb, column_b.as_deref().unwrap_or(&column))?;
            print!("{}", c.render());
            Ok(0)
        }
        Cmd::Gen { config, dump_instance } => {
            let cfg = load_config(&config)?;
            let inst = gen_instance(&cfg.instance)?;
            std::fs::write(&dump_instance, dump(&inst)).map_err(CliError::from)?;
            println!("wrote {}", dump_instance.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match exec(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
