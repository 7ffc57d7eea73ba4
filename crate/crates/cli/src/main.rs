use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};

use llbench::attributes::{cooccurrence_matrix, frame_flags, sequence_attributes};
use llbench::config::BenchConfig;
use llbench::dataset::{
    dataset_stats, load_dataset, load_results, validate_sequence, Sequence, GT_FILE,
};
use llbench::enhance::EnhanceOp;
use llbench::imaging::{load_rgb, save_png};
use llbench::metrics::evaluate;
use llbench::ope::{run_benchmark, RunConfig};
use llbench::prompt_gate::{ablation_run, AblationConfig};
use llbench::report::{cooccurrence_csv, emit_report, fmt_sig6, RankingTable};
use llbench::synth::{generate, preset, SynthSpec};
use llbench::trackers::TrackerKind;
use llbench::{AttributeSet, Error, Result};

const COMPUTED_ATTRIBUTES_FILE: &str = "attributes.computed.txt";

#[derive(Debug, Parser)]
#[command(
    name = "bench",
    version,
    about = "Low-light single-object tracking benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// Flat JSON file overriding thresholds and defaults.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<BenchConfig> {
        match &self.config {
            Some(p) => BenchConfig::load(p),
            None => Ok(BenchConfig::default()),
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a built-in tracker over a dataset and write result files.
    Run {
        #[arg(long)]
        tracker: String,
        /// Tracker option as key=value; repeatable.
        #[arg(long = "tracker-opt")]
        tracker_opt: Vec<String>,
        #[arg(long)]
        dataset: PathBuf,
        /// none, histeq or gamma:<value>.
        #[arg(long, default_value = "none")]
        enhance: String,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Score result files against a dataset and write the report.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        /// One tracker's result directory, or a directory with one
        /// subdirectory per tracker.
        #[arg(long)]
        results: PathBuf,
        /// Report directory, or a `.json` path whose directory receives the
        /// other files.
        #[arg(long, default_value = "report")]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Compute SV / ARC / LR / LAI and the attribute co-occurrence matrix.
    Attrs {
        dataset: PathBuf,
        /// Where to write cooccurrence.csv; defaults to the dataset directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Render a synthetic sequence.
    #[command(group(ArgGroup::new("source").required(true).args(["preset", "spec"])))]
    Synth {
        #[arg(long)]
        preset: Option<String>,
        /// Flat JSON spec file.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Prompt-gate depth ablation on preset micro-sequences.
    Ablate {
        /// Inclusive range `from:to`.
        #[arg(long, default_value = "1:12")]
        layers: String,
        #[arg(long, default_value = "dark")]
        preset: String,
        #[arg(long, default_value = "ablation.csv")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Apply an enhancement to an image file or a directory of images.
    Enhance {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value = "histeq")]
        op: String,
    },
    /// Check dataset structure and annotation invariants.
    Validate {
        dataset: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
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
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 1 } else { 2 })
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run {
            tracker,
            tracker_opt,
            dataset,
            enhance,
            workers,
            out,
            seed,
            config,
        } => {
            let cfg = config.load()?;
            let kind: TrackerKind = tracker.parse()?;
            let kind = kind.with_options(tracker_opt.iter().map(String::as_str))?;
            let run_config = RunConfig {
                workers: workers.unwrap_or(cfg.workers),
                enhance: enhance.parse()?,
                output_dir: out,
                seed: seed.unwrap_or(cfg.seed),
                validation: cfg.validation(),
            };
            if run_config.workers == 0 {
                return Err(Error::InvalidArgument("--workers must be >= 1".into()));
            }
            let sequences = load_sequences(&dataset)?;
            let run = run_benchmark(kind.name(), || kind.build(), &sequences, &run_config)?;
            for r in &run.runs {
                println!(
                    "{}: {} frames, {} held",
                    r.result.sequence_name,
                    r.result.boxes.len(),
                    r.warnings.len()
                );
            }
            for (name, reason) in &run.skipped {
                println!("{name}: skipped ({reason})");
            }
            if run.runs.is_empty() {
                return Err(Error::Data("no sequence could be run".into()));
            }
            Ok(())
        }
        Command::Eval {
            dataset,
            results,
            out,
            config,
        } => {
            let cfg = config.load()?;
            let sequences = load_sequences(&dataset)?;
            let attr_cfg = cfg.attributes();
            let sets = sequences
                .iter()
                .map(|s| {
                    let flags = frame_flags(s, &attr_cfg, |f| load_rgb(&f.image_path))?;
                    Ok(sequence_attributes(s, &flags, &attr_cfg))
                })
                .collect::<Result<Vec<AttributeSet>>>()?;
            let mut reports = Vec::new();
            for (name, dir) in tracker_dirs(&results)? {
                let loaded = load_results(&dir, &sequences)?;
                reports.push(evaluate(&name, &loaded, &sequences, &sets, &cfg.metrics())?);
            }
            let (out_dir, json_name) = report_target(&out);
            emit_report(&reports, Some(&cooccurrence_matrix(&sets)), &out_dir)?;
            if let Some(name) = json_name {
                let from = out_dir.join("report.json");
                let to = out_dir.join(name);
                fs::rename(&from, &to).map_err(|e| Error::Io {
                    path: to,
                    source: e,
                })?;
            }
            print!("{}", RankingTable::new(&reports).to_text());
            Ok(())
        }
        Command::Attrs {
            dataset,
            out,
            config,
        } => {
            let cfg = config.load()?;
            let attr_cfg = cfg.attributes();
            let sequences = load_sequences(&dataset)?;
            let mut sets = Vec::new();
            for s in &sequences {
                let flags = frame_flags(s, &attr_cfg, |f| load_rgb(&f.image_path))?;
                let set = sequence_attributes(s, &flags, &attr_cfg);
                let path = sequence_dir(&dataset, s).join(COMPUTED_ATTRIBUTES_FILE);
                write_file(&path, &format!("{}\n", set.to_line()))?;
                let names: Vec<&str> = set.iter().map(|a| a.name()).collect();
                println!("{}: {}", s.name, names.join(" "));
                sets.push(set);
            }
            let out = out.unwrap_or_else(|| dataset.clone());
            write_file(
                &out.join("cooccurrence.csv"),
                &cooccurrence_csv(&cooccurrence_matrix(&sets)),
            )?;
            let stats = dataset_stats(&sequences, &attr_cfg)?;
            println!(
                "{} sequences, {} frames, average LAI {}",
                stats.sequences,
                stats.frames,
                fmt_sig6(stats.mean_lai)
            );
            Ok(())
        }
        Command::Synth {
            preset: p,
            spec,
            out,
        } => {
            let spec = match (p, spec) {
                (Some(name), None) => preset(&name)?,
                (None, Some(path)) => {
                    let text = fs::read_to_string(&path).map_err(|e| Error::Io {
                        path: path.clone(),
                        source: e,
                    })?;
                    SynthSpec::from_json(&text)?
                }
                _ => unreachable!("clap enforces exactly one source"),
            };
            let seq = generate(&spec, &out)?;
            println!(
                "{}: {} frames written to {}",
                seq.name,
                seq.len(),
                out.display()
            );
            Ok(())
        }
        Command::Ablate {
            layers,
            preset,
            out,
            seed,
        } => {
            let (from, to) = parse_range(&layers)?;
            let defaults = AblationConfig::default();
            let config = AblationConfig {
                layers_from: from,
                layers_to: to,
                preset,
                seed: seed.unwrap_or(defaults.seed),
                ..defaults
            };
            let rows = ablation_run(&config)?;
            let mut csv = String::from("layers,s_auc,p,p_norm\n");
            println!(
                "{:>6}  {:>6}  {:>6}  {:>6}  {:>9}",
                "layers", "S_AUC", "P", "P_Norm", "wall_ms"
            );
            for r in &rows {
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    r.layers,
                    fmt_sig6(r.s_auc),
                    fmt_sig6(r.p),
                    fmt_sig6(r.p_norm)
                ));
                println!(
                    "{:>6}  {:>6.3}  {:>6.3}  {:>6.3}  {:>9.1}",
                    r.layers, r.s_auc, r.p, r.p_norm, r.wall_ms
                );
            }
            write_file(&out, &csv)
        }
        Command::Enhance { input, output, op } => {
            let op: EnhanceOp = op.parse()?;
            if input.is_dir() {
                let mut files: Vec<PathBuf> = fs::read_dir(&input)
                    .map_err(|e| Error::Io {
                        path: input.clone(),
                        source: e,
                    })?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| is_image(p))
                    .collect();
                files.sort();
                for f in &files {
                    let name = Path::new(f.file_name().expect("file entry")).with_extension("png");
                    save_png(&op.apply(&load_rgb(f)?)?, &output.join(name))?;
                }
                println!("{} images written to {}", files.len(), output.display());
            } else {
                save_png(&op.apply(&load_rgb(&input)?)?, &output)?;
            }
            Ok(())
        }
        Command::Validate { dataset, config } => {
            let cfg = config.load()?;
            let load = load_dataset(&dataset)?;
            let mut failed = load.failures.len();
            for (name, err) in &load.failures {
                println!("{name}: FAILED {err}");
            }
            for s in &load.sequences {
                let report = validate_sequence(s, &cfg.validation());
                if report.is_ok() {
                    println!(
                        "{}: ok ({} frames, {} warnings)",
                        s.name,
                        s.len(),
                        report.warnings.len()
                    );
                } else {
                    failed += 1;
                    println!("{}: FAILED ({} errors)", s.name, report.errors.len());
                }
                for (frame, msg) in &report.errors {
                    println!("  error frame {frame}: {msg}");
                }
                for (frame, msg) in &report.warnings {
                    println!("  warning frame {frame}: {msg}");
                }
            }
            if load.sequences.is_empty() && load.failures.is_empty() {
                return Err(Error::Data(format!(
                    "no sequences under {}",
                    dataset.display()
                )));
            }
            if failed > 0 {
                return Err(Error::Data(format!(
                    "{failed} sequence(s) failed validation"
                )));
            }
            Ok(())
        }
    }
}

/// Loads the dataset; any sequence that fails to load is a data error.
fn load_sequences(root: &Path) -> Result<Vec<Sequence>> {
    let load = load_dataset(root)?;
    if let Some((name, err)) = load.failures.into_iter().next() {
        return Err(Error::Data(format!("{name}: {err}")));
    }
    if load.sequences.is_empty() {
        return Err(Error::Data(format!(
            "no sequences under {}",
            root.display()
        )));
    }
    Ok(load.sequences)
}

fn sequence_dir(root: &Path, seq: &Sequence) -> PathBuf {
    if root.join(GT_FILE).is_file() {
        root.to_path_buf()
    } else {
        root.join(&seq.name)
    }
}

/// (tracker name, result directory) pairs, sorted by name.
fn tracker_dirs(results: &Path) -> Result<Vec<(String, PathBuf)>> {
    let entries: Vec<PathBuf> = fs::read_dir(results)
        .map_err(|e| Error::Io {
            path: results.to_path_buf(),
            source: e,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    let has_txt = entries
        .iter()
        .any(|p| p.is_file() && p.extension().is_some_and(|x| x == "txt"));
    let name_of = |p: &Path| {
        p.file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("tracker")
            .to_string()
    };
    if has_txt {
        let abs = fs::canonicalize(results).unwrap_or_else(|_| results.to_path_buf());
        return Ok(vec![(name_of(&abs), results.to_path_buf())]);
    }
    let mut dirs: Vec<(String, PathBuf)> = entries
        .into_iter()
        .filter(|p| p.is_dir())
        .map(|p| (name_of(&p), p))
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Data(format!(
            "no result files under {}",
            results.display()
        )));
    }
    Ok(dirs)
}

fn report_target(out: &Path) -> (PathBuf, Option<String>) {
    if out.extension().is_some_and(|x| x == "json") {
        let dir = out
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        let name = out.file_name().and_then(|n| n.to_str()).map(str::to_string);
        (dir, name.filter(|n| n != "report.json"))
    } else {
        (out.to_path_buf(), None)
    }
}

fn parse_range(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::InvalidArgument(format!("--layers expects from:to, got {s:?}"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let from = a.trim().parse().map_err(|_| bad())?;
    let to = b.trim().parse().map_err(|_| bad())?;
    Ok((from, to))
}

fn is_image(p: &Path) -> bool {
    p.is_file()
        && p.extension()
            .and_then(|x| x.to_str())
            .is_some_and(|x| matches!(x.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    fs::write(path, contents).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}
