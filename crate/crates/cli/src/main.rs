use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use domwsd::domain_labelling::DlPrediction;
use domwsd::eval::{self, EvalReport};
use domwsd::inventory::InventoryStats;
use domwsd::lexicon::{self, Lexicon};
use domwsd::metadata::Task;
use domwsd::pipeline::{self, PipelineError, RunManifest, RunOptions, ENDPOINT_ENV};
use domwsd::wsd::{self, WsdPrediction};
use domwsd::{DomainInventory, HintsMode};

mod convert;

#[derive(Parser)]
#[command(name = "domwsd", version, about = "Zero-shot domain disambiguation and gloss domain labelling")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a unified-format XML corpus and gold key to dataset JSONL.
    Convert {
        #[arg(long)]
        xml: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// WordNet index.sense file, needed when the key uses sense keys.
        #[arg(long)]
        sense_index: Option<PathBuf>,
        /// Check every record against this lexicon after conversion.
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Print inventory statistics, optionally truncating the hierarchy.
    Inventory {
        assignments: PathBuf,
        #[arg(long, default_value = "inventory")]
        name: String,
        #[arg(long)]
        hierarchy: Option<PathBuf>,
        #[arg(long)]
        truncate_depth: Option<usize>,
        /// Write the (truncated) assignments here.
        #[arg(long)]
        write_assignments: Option<PathBuf>,
        /// Write the (truncated) hierarchy here.
        #[arg(long)]
        write_hierarchy: Option<PathBuf>,
        /// Print statistics as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run a manifest: predict, evaluate and write artifacts.
    Run {
        manifest: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Maximum scorer batches in flight.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
        workers: u16,
        /// Remote scorer endpoint; also read from the environment.
        #[arg(long, env = ENDPOINT_ENV)]
        endpoint: Option<String>,
    },
    /// Score an existing predictions file against a manifest's dataset.
    Eval {
        manifest: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Defaults to predictions.jsonl in the output directory.
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Write the report JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random-choice baseline over candidate domains (WSD manifests).
    Baseline {
        manifest: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Rank-correlate per-label F1 between two reports.
    Correlate {
        report_a: PathBuf,
        report_b: PathBuf,
        /// Scatter data: label,f1_dl,f1_wsd.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

/// Flags that replace manifest fields.
#[derive(Args)]
struct Overrides {
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    template: Option<String>,
    #[arg(long, value_parser = parse_hints_mode)]
    hints_mode: Option<HintsMode>,
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    batch_size: Option<usize>,
}

fn parse_hints_mode(s: &str) -> Result<HintsMode, String> {
    serde_json::from_value(serde_json::Value::String(s.into()))
        .map_err(|_| format!("expected with_hints or without_hints, got {s:?}"))
}

impl Overrides {
    fn load(&self, path: &Path) -> Result<RunManifest> {
        let mut m = RunManifest::load(path)?;
        if let Some(d) = &self.output_dir {
            m.output_dir = d.clone();
        }
        if let Some(s) = self.seed {
            m.seed = s;
        }
        if let Some(t) = &self.template {
            m.template_id = t.clone();
        }
        if let Some(h) = self.hints_mode {
            m.hints_mode = Some(h);
        }
        if let Some(c) = &self.cache {
            m.cache = Some(c.clone());
        }
        if let Some(b) = self.batch_size {
            m.scorer.batch_size = b;
        }
        m.validate()?;
        Ok(m)
    }
}

fn print_stats(s: &InventoryStats) {
    println!(
        "{}: {} labels, {} assignments, {} multi-label synsets",
        s.name, s.labels, s.assignments, s.multi_label_synsets
    );
    for (depth, n) in &s.depth_histogram {
        println!("  depth {depth}: {n} labels");
    }
}

fn cmd_inventory(
    assignments: &Path,
    name: &str,
    hierarchy: Option<&Path>,
    truncate_depth: Option<usize>,
    write_assignments: Option<&Path>,
    write_hierarchy: Option<&Path>,
    json: bool,
) -> Result<()> {
    let inv = DomainInventory::load(assignments, name, hierarchy)?;
    let before = inv.stats();
    let (inv, after) = match truncate_depth {
        Some(d) => {
            let t = inv.truncate_hierarchy(d)?;
            let s = t.stats();
            (t, Some(s))
        }
        None => (inv, None),
    };
    if json {
        let v = serde_json::json!({ "before": before, "after_truncation": after, "truncate_depth": truncate_depth });
        println!("{}", serde_json::to_string_pretty(&v)?);
    } else {
        print_stats(&before);
        if let (Some(d), Some(a)) = (truncate_depth, &after) {
            println!("after truncation to depth {d}:");
            print_stats(a);
            println!("labels: {} -> {}", before.labels, a.labels);
        }
    }
    if let Some(p) = write_assignments {
        fs::write(p, inv.render_assignments()).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = write_hierarchy {
        let text = inv.render_hierarchy().context("inventory has no hierarchy to write")?;
        fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn cmd_convert(xml: &Path, gold: &Path, sense_index: Option<&Path>, lexicon: Option<&Path>, out: &Path) -> Result<()> {
    let read = |p: &Path| fs::read_to_string(p).with_context(|| format!("reading {}", p.display()));
    let index = sense_index.map(|p| convert::parse_sense_index(&read(p)?)).transpose()?;
    let records = convert::convert(&read(xml)?, &read(gold)?, index.as_ref())?;
    pipeline::write_jsonl(out, &records)?;
    if let Some(lp) = lexicon {
        let lex = Lexicon::load(lp)?;
        lexicon::load_wsd_dataset(out, &lex).with_context(|| format!("{} does not match the lexicon", out.display()))?;
    }
    eprintln!("wrote {} instances to {}", records.len(), out.display());
    Ok(())
}

fn cmd_run(manifest: &Path, overrides: &Overrides, workers: usize, endpoint: Option<String>) -> Result<()> {
    let m = overrides.load(manifest)?;
    let outcome = pipeline::execute(&m, &RunOptions { workers, endpoint })?;
    print!("{}", outcome.report.render_text());
    let md = &outcome.metadata;
    eprintln!(
        "{} scored pairs, {} sent to the scorer, {} monosemous shortcuts",
        md.scored_pairs, md.scorer_dispatches, md.monosemous_shortcuts
    );
    if let Some(b) = &md.random_baseline {
        eprintln!("random baseline: {:.4}", b.analytic);
    }
    eprintln!("artifacts in {}", m.output_dir.display());
    Ok(())
}

fn cmd_eval(manifest: &Path, overrides: &Overrides, predictions: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let m = overrides.load(manifest)?;
    let inventory = pipeline::load_inventory(&m)?;
    let preds = predictions
        .map(Path::to_path_buf)
        .unwrap_or_else(|| m.output_dir.join(pipeline::PREDICTIONS_FILE));
    let report: EvalReport = match m.task {
        Task::Wsd => {
            let lex = Lexicon::load(m.lexicon.as_ref().expect("validated"))?;
            let data = lexicon::load_wsd_dataset(&m.dataset, &lex)?;
            let p: Vec<WsdPrediction> = pipeline::read_jsonl(&preds)?;
            eval::score_wsd(&p, &data, &inventory)?
        }
        Task::DomainLabelling => {
            let data = lexicon::load_gloss_dataset(&m.dataset)?;
            let p: Vec<DlPrediction> = pipeline::read_jsonl(&preds)?;
            eval::score_domain_labelling(&p, &data, &inventory)?
        }
    };
    print!("{}", report.render_text());
    if let Some(o) = out {
        pipeline::write_json(o, &report)?;
    }
    Ok(())
}

fn cmd_baseline(manifest: &Path, overrides: &Overrides, trials: Option<usize>) -> Result<()> {
    let m = overrides.load(manifest)?;
    if m.task != Task::Wsd {
        bail!("the random baseline applies to WSD manifests only");
    }
    let inventory = pipeline::load_inventory(&m)?;
    let lex = Lexicon::load(m.lexicon.as_ref().expect("validated"))?;
    let data = lexicon::load_wsd_dataset(&m.dataset, &lex)?;
    println!("analytic: {:.6}", wsd::random_baseline_analytic(&data, &inventory)?);
    let trials = trials.unwrap_or(m.baseline_trials);
    if trials > 0 {
        let mc = wsd::random_baseline_mc(&data, &inventory, m.seed, trials)?;
        println!(
            "monte carlo: {:.6} (std error {:.6}, {} trials, seed {})",
            mc.accuracy, mc.std_error, mc.trials, mc.seed
        );
    }
    Ok(())
}

fn cmd_correlate(a: &Path, b: &Path, csv: Option<&Path>, json: Option<&Path>) -> Result<()> {
    let ra: EvalReport = pipeline::read_json(a)?;
    let rb: EvalReport = pipeline::read_json(b)?;
    let report = eval::correlate_tasks(&ra, &rb)?;
    print!("{}", report.render_text());
    if let Some(p) = csv {
        let f = fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
        report.write_csv(f)?;
    }
    if let Some(p) = json {
        pipeline::write_json(p, &report)?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Convert {
            xml,
            gold,
            sense_index,
            lexicon,
            out,
        } => cmd_convert(&xml, &gold, sense_index.as_deref(), lexicon.as_deref(), &out),
        Command::Inventory {
            assignments,
            name,
            hierarchy,
            truncate_depth,
            write_assignments,
            write_hierarchy,
            json,
        } => cmd_inventory(
            &assignments,
            &name,
            hierarchy.as_deref(),
            truncate_depth,
            write_assignments.as_deref(),
            write_hierarchy.as_deref(),
            json,
        ),
        Command::Run {
            manifest,
            overrides,
            workers,
            endpoint,
        } => cmd_run(&manifest, &overrides, workers as usize, endpoint),
        Command::Eval {
            manifest,
            overrides,
            predictions,
            out,
        } => cmd_eval(&manifest, &overrides, predictions.as_deref(), out.as_deref()),
        Command::Baseline {
            manifest,
            overrides,
            trials,
        } => cmd_baseline(&manifest, &overrides, trials),
        Command::Correlate {
            report_a,
            report_b,
            csv,
            json,
        } => cmd_correlate(&report_a, &report_b, csv.as_deref(), json.as_deref()),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let scorer = err
        .chain()
        .any(|e| e.downcast_ref::<PipelineError>().is_some_and(PipelineError::is_scorer_failure));
    if scorer {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
