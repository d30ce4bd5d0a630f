use std::fs::File;
use std::io::BufWriter;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use plaguesim::batch::{run_batch, tune_beta_for_target_r0};
use plaguesim::output::{summary_text, write_run};
use plaguesim::sim::{run_with, RunOptions};
use plaguesim::sir::{compare_macro_micro, integrate_sir, matched_params, macro_r0, MicroSeries, SirParams};
use plaguesim::transmission::ChannelKind;
use plaguesim::{Error, ScenarioConfig};

#[derive(Parser)]
#[command(name = "plaguesim", version, about = "Agent-based virtual plague simulator")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario and write its output files.
    Run {
        /// Bundled scenario name or path to a scenario file.
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write the NDJSON event log.
        #[arg(long)]
        events: bool,
        /// Attack rate at or above which a run counts as an epidemic.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Run a range of seeds in parallel and print a JSON summary.
    Batch {
        #[arg(long)]
        scenario: String,
        /// `N..M` (half-open) or `N..=M`.
        #[arg(long, value_parser = parse_seeds)]
        seeds: Seeds,
        #[arg(long)]
        threshold: Option<f64>,
        /// Write the summary here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bisect one channel's beta toward a target mean first-generation R0.
    Tune {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value = "proximity")]
        channel: ChannelKind,
        #[arg(long, default_value_t = 1.0)]
        target: f64,
        #[arg(long, default_value_t = 0.1)]
        tolerance: f64,
        /// Seeded runs per evaluation.
        #[arg(long, default_value_t = 50)]
        runs: usize,
    },
    /// Compare micro runs against an RK4 SIR trajectory.
    CompareSir {
        #[arg(long)]
        scenario: String,
        #[arg(long, value_parser = parse_seeds, default_value = "1..21")]
        seeds: Seeds,
        /// Override the matched beta (per day).
        #[arg(long)]
        beta: Option<f64>,
        /// Override the matched gamma (per day).
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, default_value_t = 0.1)]
        dt: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Serve the HTTP and websocket session API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

#[derive(Debug, Clone)]
struct Seeds(Vec<u64>);

fn parse_seeds(s: &str) -> Result<Seeds, String> {
    let (a, b, inclusive) = if let Some((a, b)) = s.split_once("..=") {
        (a, b, true)
    } else if let Some((a, b)) = s.split_once("..") {
        (a, b, false)
    } else {
        let n: u64 = s.parse().map_err(|e| format!("bad seed `{s}`: {e}"))?;
        return Ok(Seeds(vec![n]));
    };
    let a: u64 = a.trim().parse().map_err(|e| format!("bad range start `{a}`: {e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("bad range end `{b}`: {e}"))?;
    let seeds: Vec<u64> = if inclusive { (a..=b).collect() } else { (a..b).collect() };
    if seeds.is_empty() {
        return Err(format!("seed range `{s}` is empty"));
    }
    Ok(Seeds(seeds))
}

fn load(name: &str, threshold: Option<f64>) -> Result<ScenarioConfig, Error> {
    let mut cfg = ScenarioConfig::resolve(name)?;
    if let Some(t) = threshold {
        cfg.run.epidemic_threshold = t;
        cfg.validate()?;
    }
    Ok(cfg)
}

fn create(path: &std::path::Path) -> Result<BufWriter<File>, Error> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Io { path: path.display().to_string(), source })
}

fn io(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.display().to_string(), source }
}

fn execute(cmd: Cmd) -> Result<(), Error> {
    match cmd {
        Cmd::Run { scenario, seed, out, events, threshold } => {
            let cfg = load(&scenario, threshold)?;
            let seed = seed.unwrap_or(cfg.run.seed);
            let result = run_with(&cfg, seed, RunOptions { record_events: events, stop_after_index_cases: false })?;
            write_run(&out, &result)?;
            print!("{}", summary_text(&result));
            eprintln!("wrote {}", out.display());
        }
        Cmd::Batch { scenario, seeds, threshold, out } => {
            let cfg = load(&scenario, threshold)?;
            let summary = run_batch(&cfg, &seeds.0)?;
            let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
            match out {
                Some(p) => std::fs::write(&p, json + "\n").map_err(io(&p))?,
                None => println!("{json}"),
            }
        }
        Cmd::Tune { scenario, channel, target, tolerance, runs } => {
            let cfg = load(&scenario, None)?;
            let r = tune_beta_for_target_r0(&cfg, channel, target, tolerance, runs)?;
            println!("{}", serde_json::to_string_pretty(&r).expect("result serializes"));
            if !r.converged {
                eprintln!("did not converge within {} iterations", r.iterations);
            }
        }
        Cmd::CompareSir { scenario, seeds, beta, gamma, dt, out } => {
            let cfg = load(&scenario, None)?;
            let params = match matched_params(&cfg) {
                Ok(mut p) => {
                    p.beta_macro = beta.unwrap_or(p.beta_macro);
                    p.gamma = gamma.unwrap_or(p.gamma);
                    p
                }
                Err(e) => match (beta, gamma) {
                    (Some(b), Some(g)) => SirParams::seeded(
                        b,
                        g,
                        cfg.population.count as f64,
                        cfg.run.index_cases.count as f64,
                    ),
                    _ => return Err(e),
                },
            };
            let horizon_days = cfg.run.horizon_ticks as f64 * cfg.run.tick_length_days;
            let traj = integrate_sir(&params, dt, horizon_days)?;
            let series = seeds
                .0
                .iter()
                .map(|&s| {
                    run_with(&cfg, s, RunOptions::default())
                        .map(|r| MicroSeries::from_snapshots(&r.snapshots, cfg.run.tick_length_days, cfg.run.horizon_ticks))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let micro = MicroSeries::mean(&series)?;
            let report = compare_macro_micro(&traj, &micro)?;

            std::fs::create_dir_all(&out).map_err(io(&out))?;
            let p = out.join("macro.csv");
            traj.write_csv(create(&p)?).map_err(io(&p))?;
            let p = out.join("micro.csv");
            let mut w = csv::Writer::from_writer(create(&p)?);
            let werr = |e: csv::Error| Error::Io { path: p.display().to_string(), source: e.into() };
            w.write_record(["time", "S", "I", "R"]).map_err(werr)?;
            for k in 0..micro.time.len() {
                let row = [micro.time[k], micro.s[k], micro.i[k], micro.r[k]].map(|x| x.to_string());
                w.write_record(&row).map_err(werr)?;
            }
            w.flush().map_err(io(&p))?;
            let p = out.join("report.json");
            let doc = serde_json::json!({ "params": params, "macro_r0": macro_r0(&params), "runs": seeds.0.len(), "report": report });
            std::fs::write(&p, serde_json::to_string_pretty(&doc).expect("report serializes")).map_err(io(&p))?;

            println!("macro R0          {:.4}", macro_r0(&params));
            println!("mean |I gap|      {:.3}", report.mean_i_gap);
            println!("peak time macro   {:.2}", report.peak_time_macro);
            println!("peak time micro   {:.2}", report.peak_time_micro);
            println!("final size macro  {:.1}", report.final_size_macro);
            println!("final size micro  {:.1}", report.final_size_micro);
        }
        Cmd::Serve { addr } => {
            let rt = tokio::runtime::Runtime::new().map_err(|e| Error::Invalid(format!("cannot start runtime: {e}")))?;
            eprintln!("listening on {addr}");
            rt.block_on(plaguesim::service::serve(addr)).map_err(io(std::path::Path::new("<listener>")))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Validation(v)) => {
            eprintln!("invalid scenario:");
            for msg in &v.violations {
                eprintln!("  - {msg}");
            }
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
