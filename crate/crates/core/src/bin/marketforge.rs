use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use marketforge::eval::{compare, Comparison};
use marketforge::marketdata::{write_dataset, DataError};
use marketforge::pipeline::{
    load_panel, load_raw, run_backtest_job, run_ensemble_job, run_training_job, write_curves_csv,
    write_training_outputs, PipelineError, RunConfig,
};

#[derive(Parser)]
#[command(name = "marketforge", version, about = "Train, ensemble and evaluate trading agents")]
struct Cli {
    /// Override the config's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Log progress to stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load the configured market data and write it in the binary format.
    Ingest {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the feature panel and print its shape.
    Featurize {
        #[arg(long)]
        config: PathBuf,
        /// Also write the panel in the binary format.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train every configured agent on the first train slice.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Backtest saved parameters on the first test slice.
    Backtest {
        #[arg(long)]
        config: PathBuf,
        /// Directory written by `train`.
        #[arg(long)]
        policy: PathBuf,
        /// Write the comparison JSON here instead of printing a table.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the rolling-window ensemble; writes the report and curves.csv.
    Ensemble {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a report JSON.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<RunConfig, PipelineError> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn create(path: &Path) -> Result<BufWriter<File>, PipelineError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn title(c: &Comparison) -> String {
    if let Some(t) = c.meta.get("title").and_then(|v| v.as_str()) {
        return t.to_string();
    }
    match c.meta.get("test_period").and_then(|v| v.as_array()) {
        Some(p) if p.len() == 2 => {
            let day = |v: &serde_json::Value| v.as_str().unwrap_or("").chars().take(10).collect::<String>().replace('-', "/");
            format!("({}-{})", day(&p[0]), day(&p[1]))
        }
        _ => String::new(),
    }
}

fn render_csv(c: &Comparison) -> Result<String, PipelineError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| PipelineError::Io(std::io::Error::other(e));
    w.write_record(["strategy", "annual_return", "annual_volatility", "sharpe", "calmar", "max_drawdown", "n_periods"])
        .map_err(io)?;
    let cell = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in &c.strategies {
        w.write_record([
            r.name.clone(),
            cell(r.annual_return),
            cell(r.annual_volatility),
            cell(r.sharpe),
            cell(r.calmar),
            cell(r.max_drawdown),
            r.n_periods.to_string(),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| PipelineError::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Ingest { config, out } => {
            let cfg = load_config(&config, cli.seed)?;
            let ds = load_raw(&cfg)?;
            let mut w = create(&out)?;
            write_dataset(&ds, &mut w)?;
            w.flush()?;
            println!("wrote {} rows x {} tickers to {}", ds.n_rows(), ds.n_tickers(), out.display());
        }
        Command::Featurize { config, out } => {
            let cfg = load_config(&config, cli.seed)?;
            let ds = load_panel(&cfg)?;
            println!("rows {}  tickers {}  columns {}", ds.n_rows(), ds.n_tickers(), ds.n_columns());
            println!("{}", ds.columns().join(","));
            if let Some(out) = out {
                let mut w = create(&out)?;
                write_dataset(&ds, &mut w)?;
                w.flush()?;
            }
        }
        Command::Train { config, out_dir } => {
            let cfg = load_config(&config, cli.seed)?;
            let data = Arc::new(load_panel(&cfg)?);
            let trained = run_training_job(&cfg, data)?;
            write_training_outputs(&out_dir, &trained)?;
            for (name, t) in &trained {
                println!("{name}: {} steps, {} episodes", t.outcome.steps, t.outcome.episode_returns.len());
            }
        }
        Command::Backtest { config, policy, out } => {
            let cfg = load_config(&config, cli.seed)?;
            let data = Arc::new(load_panel(&cfg)?);
            let results = run_backtest_job(&cfg, data, &policy)?;
            let mut cmp = compare(&results)?;
            let first = &results[0].curve;
            cmp.meta.insert("seed".into(), cfg.seed.into());
            cmp.meta.insert(
                "test_period".into(),
                serde_json::json!([
                    marketforge::marketdata::format_timestamp(&first.timestamps()[0]),
                    marketforge::marketdata::format_timestamp(first.timestamps().last().unwrap()),
                ]),
            );
            match out {
                Some(path) => create(&path)?.write_all(cmp.to_json().as_bytes())?,
                None => print!("{}", cmp.render_text(&cfg.eval.title.clone().unwrap_or_else(|| title(&cmp)))),
            }
        }
        Command::Ensemble { config, out } => {
            let cfg = load_config(&config, cli.seed)?;
            let data = Arc::new(load_panel(&cfg)?);
            let report = run_ensemble_job(&cfg, data)?;
            let mut w = create(&out)?;
            w.write_all(report.comparison.to_json().as_bytes())?;
            w.flush()?;
            let curves_path = out.with_file_name("curves.csv");
            write_curves_csv(&report.curves(), create(&curves_path)?)?;
            for w in &report.result.windows {
                log::info!("window {} winner {}", w.index, w.winner);
            }
            print!("{}", report.comparison.render_text(&title(&report.comparison)));
        }
        Command::Report { input, format } => {
            let text = fs::read_to_string(&input)?;
            let cmp = Comparison::from_json(&text).map_err(|e| PipelineError::Data(DataError::BadFormat(e.to_string())))?;
            let rendered = match format {
                Format::Text => cmp.render_text(&title(&cmp)),
                Format::Json => cmp.to_json(),
                Format::Csv => render_csv(&cmp)?,
            };
            print!("{rendered}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
