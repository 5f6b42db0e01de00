use clap::{Parser, Subcommand, ValueEnum};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use twinsim_core::definitions::{import_dtdl, parse_documents, resolve_graph, to_yaml, Definitions, Resource};
use twinsim_core::engine::{city_resources, run, run_with_store, Provisioning, ScenarioConfig};
use twinsim_core::metrics::{compare, export_history, read_run, write_report, write_run, Summary};
use twinsim_core::routing::derive_topology;
use twinsim_core::store::EventStore;

#[derive(Parser)]
#[command(name = "twinsim", version, about = "Digital-twin platform simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Auto,
    Under,
    Over,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate twin definition files.
    Validate { files: Vec<PathBuf> },
    /// Convert DTDL v2 JSON interfaces to twin definition YAML.
    ImportDtdl {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Derive the broker topology of a set of definitions.
    Plan {
        files: Vec<PathBuf>,
        /// Print the full plan as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run a smart city scenario.
    Simulate {
        /// Scenario file (YAML or JSON); defaults apply when omitted.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        neighborhoods: Option<u32>,
        #[arg(long, value_enum)]
        provisioning: Option<Mode>,
        /// Run directory to write.
        #[arg(long)]
        out: PathBuf,
        /// Persist the event store under `<out>/store`.
        #[arg(long)]
        store: bool,
    },
    /// Regenerate CSV series and the summary of a run directory.
    Report {
        run: PathBuf,
        /// List the CSV files written.
        #[arg(long, conflicts_with = "json")]
        csv: bool,
        /// Print the summary as JSON.
        #[arg(long)]
        json: bool,
        /// Export one key's stored history as CSV: INTERFACE INSTANCE.
        #[arg(long, num_args = 2, value_names = ["INTERFACE", "INSTANCE"])]
        history: Option<Vec<String>>,
    },
    /// Compare two runs; prints savings for an auto/fixed pair.
    Compare { a: PathBuf, b: PathBuf },
    /// Write the smart city definitions for `n` neighborhoods.
    GenerateCity {
        #[arg(short, long, default_value_t = 1)]
        neighborhoods: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the default scenario configuration.
    GenerateScenario,
}

type Result<T> = std::result::Result<T, String>;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_definitions(files: &[PathBuf]) -> Result<Definitions> {
    let mut defs = Definitions::default();
    for f in files {
        let text = read(f)?;
        defs.extend(parse_documents(&text).map_err(|e| format!("{}: {e}", f.display()))?);
    }
    Ok(defs)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| format!("{}: {e}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn print_summary(s: &Summary) {
    println!("provisioning {} seed {} neighborhoods {}", s.provisioning, s.seed, s.neighborhoods);
    println!(
        "broker events/s median {} mean {:.2} max {}",
        s.cloudevents_per_second.median, s.cloudevents_per_second.mean, s.cloudevents_per_second.max
    );
    println!("pods mean {:.2} max {}", s.pods.mean, s.pods.max);
    println!("requested cpu-seconds {:.2}", s.requested_cpu_integral);
    for (svc, p) in &s.latency {
        println!("  {svc}: n={} p50={:.4} p90={:.4} p95={:.4} p99={:.4}", p.count, p.p50, p.p90, p.p95, p.p99);
    }
    println!("summary hash {}", s.summary_hash);
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Validate { files } => {
            let defs = load_definitions(&files)?;
            resolve_graph(&defs.interfaces, &defs.instances).map_err(|e| e.to_string())?;
            println!(
                "{} resources ({} interfaces, {} instances)",
                defs.interfaces.len() + defs.instances.len(),
                defs.interfaces.len(),
                defs.instances.len()
            );
        }
        Command::ImportDtdl { files, out } => {
            let mut resources = Vec::new();
            for f in &files {
                let imported = import_dtdl(&read(f)?).map_err(|e| format!("{}: {e}", f.display()))?;
                for w in &imported.warnings {
                    eprintln!("warning: {}: {w}", f.display());
                }
                resources.extend(imported.interfaces.into_iter().map(Resource::Interface));
            }
            emit(out.as_deref(), &to_yaml(&resources))?;
        }
        Command::Plan { files, json } => {
            let defs = load_definitions(&files)?;
            let graph = resolve_graph(&defs.interfaces, &defs.instances).map_err(|e| e.to_string())?;
            let plan = derive_topology(&graph).map_err(|e| e.to_string())?;
            if json {
                println!("{}", serde_json::to_string_pretty(&plan).map_err(|e| e.to_string())?);
            } else {
                println!("{}", plan.summary());
            }
        }
        Command::Simulate { scenario, seed, neighborhoods, provisioning, out, store } => {
            let mut config = match &scenario {
                Some(p) => ScenarioConfig::from_yaml(&read(p)?).map_err(|e| format!("{}: {e}", p.display()))?,
                None => ScenarioConfig::default(),
            };
            if let Some(s) = seed {
                config.seed = s;
            }
            if let Some(n) = neighborhoods {
                config.neighborhoods = n;
            }
            if let Some(m) = provisioning {
                config.provisioning = match m {
                    Mode::Auto => Provisioning::Auto,
                    Mode::Under => Provisioning::UNDER,
                    Mode::Over => Provisioning::OVER,
                };
            }
            config.validate().map_err(|e| e.to_string())?;
            fs::create_dir_all(&out).map_err(|e| format!("{}: {e}", out.display()))?;
            let result = if store {
                let dir = out.join("store");
                let es = EventStore::open(&dir).map_err(|e| e.to_string())?;
                let (result, mut es) = run_with_store(&config, es).map_err(|e| e.to_string())?;
                es.flush().map_err(|e| e.to_string())?;
                result
            } else {
                run(&config).map_err(|e| e.to_string())?
            };
            let summary = write_run(&out, &result).map_err(|e| e.to_string())?;
            print_summary(&summary);
        }
        Command::Report { run, csv, json, history } => {
            if let Some(h) = history {
                let es = EventStore::open(&run.join("store")).map_err(|e| e.to_string())?;
                let mut stdout = std::io::stdout().lock();
                export_history(&es, &h[0], &h[1], &mut stdout).map_err(|e| e.to_string())?;
                return Ok(());
            }
            let summary = write_report(&run).map_err(|e| e.to_string())?;
            if json {
                println!("{}", serde_json::to_string_pretty(&summary).map_err(|e| e.to_string())?);
            } else if csv {
                let mut files: Vec<_> = fs::read_dir(run.join("metrics"))
                    .map_err(|e| e.to_string())?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                    .collect();
                files.sort();
                for f in files {
                    println!("{}", f.display());
                }
            } else {
                print_summary(&summary);
            }
        }
        Command::Compare { a, b } => {
            let ra = read_run(&a).map_err(|e| e.to_string())?;
            let rb = read_run(&b).map_err(|e| e.to_string())?;
            print!("{}", compare(&ra, &rb).map_err(|e| e.to_string())?);
        }
        Command::GenerateCity { neighborhoods, out } => {
            let resources = city_resources(neighborhoods).map_err(|e| e.to_string())?;
            emit(out.as_deref(), &to_yaml(&resources))?;
        }
        Command::GenerateScenario => {
            print!("{}", serde_yaml::to_string(&ScenarioConfig::default()).map_err(|e| e.to_string())?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
