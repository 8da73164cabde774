use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use travemb::config::{ExperimentConfig, Scenario};
use travemb::harness::{dummy_encoders, load_survey, pca_encoders, run_comparison, run_sweep};
use travemb::io::{self, csv_string};
use travemb::report::{self, export_report, markdown};
use travemb::spec_file::SpecFile;
use travemb::{Error, Result};
use travemb_core::data::{split, ChoiceDataset, DataSplit};
use travemb_core::embed::{export, repeat_seeds, train, Repeats, TrainingSet};
use travemb_core::encoders::{EncoderModel, EncodingSet};
use travemb_core::mds::layout_encoder;
use travemb_core::mnl::{estimate_dropping_dependent, MnlProblem, NewtonOptions, UtilitySpec};
use travemb_core::projection::project_all;

const DATASET_STEM: &str = "swissmetro";

#[derive(Parser)]
#[command(name = "travemb", version, about = "Supervised categorical embeddings for discrete choice models", arg_required_else_help = true)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Experiment configuration (TOML or JSON); flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for the split and the embedding repeats.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Survey file, or a directory written by `prepare`.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Directory for written artefacts.
    #[arg(long, global = true, env = "TRAVEMB_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
    /// Format of tables printed to stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Md)]
    format: Format,
    /// Log more (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
    Md,
}

#[derive(Clone, Copy, ValueEnum)]
enum Encoding {
    Dummy,
    Pca,
    Embedding,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Light,
    Bigdata,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Filter the raw survey, derive features and save it with its split.
    Prepare {
        /// Raw tab- or comma-separated survey file.
        #[arg(long)]
        input: PathBuf,
        /// Directory for the prepared dataset.
        #[arg(long)]
        out: PathBuf,
        /// Train, dev and test proportions.
        #[arg(long, value_parser = parse_ratios)]
        ratios: Option<[f64; 3]>,
    },
    /// Train the embedding network and save the best run's encoders.
    TrainEmbeddings {
        /// Number of training runs.
        #[arg(long)]
        repeats: Option<usize>,
        /// Epochs per run.
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Estimate a choice model on the training split and print its coefficients.
    Estimate {
        /// How the specification's encoded variables are represented.
        #[arg(long, value_enum, default_value_t = Encoding::Dummy)]
        encoding: Encoding,
        /// Utility specification (TOML).
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Directory holding `encoder_<variable>.json` files (embedding encoding).
        #[arg(long)]
        encoders: Option<PathBuf>,
    },
    /// Project embedding coefficients onto one coefficient per category.
    Project {
        /// Use only the covariance diagonal.
        #[arg(long)]
        independent: bool,
        /// Utility specification (TOML).
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Directory holding `encoder_<variable>.json` files.
        #[arg(long)]
        encoders: PathBuf,
        /// Keep only rows with p below 0.05.
        #[arg(long)]
        significant: bool,
    },
    /// Two-dimensional classical scaling of one variable's embeddings.
    Mds {
        /// Encoded variable, e.g. OD.
        #[arg(long)]
        variable: String,
        /// Directory holding `encoder_<variable>.json` files.
        #[arg(long)]
        encoders: PathBuf,
    },
    /// Run the model comparison and write every report.
    Experiment,
    /// Run the survey-fraction sweep.
    Sweep {
        #[arg(long, value_enum, default_value_t = ScenarioArg::All)]
        scenario: ScenarioArg,
        /// Fractions of the detailed survey, increasing, in (0, 1].
        #[arg(long, value_delimiter = ',')]
        fractions: Option<Vec<f64>>,
        /// Embedding repeats per scenario.
        #[arg(long)]
        repeats: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn load_config(g: &Global) -> Result<ExperimentConfig> {
    let mut config = match &g.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = g.seed {
        config.seed = seed;
    }
    if let Some(data) = &g.data {
        config.dataset = data.clone();
    }
    if let Some(dir) = &g.output_dir {
        config.output_dir = dir.clone();
    }
    config.normalise();
    config.validate()?;
    Ok(config)
}

fn banner(config: &ExperimentConfig) {
    eprintln!(
        "travemb {} | config sha256 {} | seed {}",
        env!("CARGO_PKG_VERSION"),
        config.hash(),
        config.seed
    );
}

fn load_data(path: &Path, config: &ExperimentConfig) -> Result<ChoiceDataset> {
    if path.is_dir() {
        Ok(io::load_dataset(path, DATASET_STEM)?.0)
    } else {
        load_survey(path, &config.filter)
    }
}

fn emit<T: Serialize>(format: Format, header: &[&str], rows: &[Vec<String>], value: &T) {
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(value).expect("serialisable")),
        Format::Csv => print!("{}", csv_string(header, rows)),
        Format::Md => print!("{}", markdown(header, rows)),
    }
}

fn load_encoders(dir: &Path, variables: &[&str]) -> Result<Vec<EncoderModel>> {
    variables
        .iter()
        .map(|v| io::read_json(&dir.join(format!("encoder_{}.json", report::file_stem(v)))))
        .collect()
}

fn spec_for(path: Option<&Path>, data: &ChoiceDataset, encoded: &EncodingSet) -> Result<UtilitySpec> {
    match path {
        Some(p) => SpecFile::load(p)?.resolve(data.alternatives()),
        None => Ok(UtilitySpec::swissmetro_base().with_swissmetro_encoded(encoded.variables())),
    }
}

fn parse_ratios(s: &str) -> std::result::Result<[f64; 3], String> {
    let v = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    <[f64; 3]>::try_from(v).map_err(|v| format!("expected three values, got {}", v.len()))
}

fn run(cli: Cli) -> Result<ExitCode> {
    let g = &cli.global;
    let mut config = load_config(g)?;
    if let Command::Prepare { ratios: Some(r), .. } = &cli.command {
        config.ratios = *r;
        config.validate()?;
    }
    banner(&config);

    match cli.command {
        Command::Prepare { input, out, .. } => {
            let data = load_survey(&input, &config.filter)?;
            let s = split(&data, &config.split_spec())?;
            io::save_dataset(&out, DATASET_STEM, &data, Some(&s.indices))?;
            eprintln!(
                "{} observations ({} train, {} dev, {} test) written to {}",
                data.len(),
                s.train.len(),
                s.dev.len(),
                s.test.len(),
                out.display()
            );
        }
        Command::TrainEmbeddings { repeats, epochs } => {
            if let Some(r) = repeats {
                config.embedding.repeats = r;
            }
            if let Some(e) = epochs {
                config.embedding.epochs = e;
            }
            config.validate()?;
            let data = load_data(&config.dataset, &config)?;
            config.encoding.validate(&data)?;
            let DataSplit { train: tr, dev, .. } = split(&data, &config.split_spec())?;
            let set = TrainingSet::new(&config.embedding, &tr, &dev)?;
            let runs = repeat_seeds(&config.embedding).map(|s| train(&config.embedding, &set, s)).collect();
            let repeats = Repeats::collect(runs)?;
            let best = repeats.best_run();
            let dir = &config.output_dir;
            for enc in export(best) {
                io::write_json(&dir.join(format!("encoder_{}.json", report::file_stem(&enc.variable))), &enc)?;
            }
            io::write_text(&dir.join("embedding_trace.csv"), &io::trace_csv(best))?;
            let rows: Vec<Vec<String>> = repeats
                .runs
                .iter()
                .map(|r| vec![r.seed.to_string(), r.dev_log_likelihood.to_string(), (r.seed == best.seed).to_string()])
                .collect();
            let json: Vec<(u64, f64)> = repeats.runs.iter().map(|r| (r.seed, r.dev_log_likelihood)).collect();
            emit(g.format, &["seed", "dev_log_likelihood", "best"], &rows, &json);
            if !repeats.diverged.is_empty() {
                eprintln!("diverged seeds: {:?}", repeats.diverged);
            }
        }
        Command::Estimate { encoding, spec, encoders } => {
            let data = load_data(&config.dataset, &config)?;
            let DataSplit { train: tr, test, .. } = split(&data, &config.split_spec())?;
            let spec = spec_for(spec.as_deref(), &data, &config.encoding)?;
            let vars: Vec<&str> = spec.encoded_variables().collect();
            let enc = match encoding {
                Encoding::Dummy => dummy_encoders(&tr, &vars)?,
                Encoding::Pca => {
                    let subset = EncodingSet {
                        entries: config
                            .encoding
                            .entries
                            .iter()
                            .filter(|e| vars.contains(&e.variable.as_str()))
                            .cloned()
                            .collect(),
                    };
                    if subset.entries.len() != vars.len() {
                        return Err(Error::Config("every encoded variable needs a K in the configuration".into()));
                    }
                    pca_encoders(&tr, &subset)?
                }
                Encoding::Embedding => {
                    let dir = encoders.ok_or_else(|| Error::Config("--encoders is required with --encoding embedding".into()))?;
                    load_encoders(&dir, &vars)?
                }
            };
            let problem = MnlProblem::new(&tr, &spec, &enc)?;
            let (result, _, dropped) = estimate_dropping_dependent(&problem, &NewtonOptions::default())?;
            if !dropped.is_empty() {
                eprintln!("dropped dependent columns: {}", dropped.join(", "));
            }
            let test_problem = MnlProblem::new(&test, &spec, &enc)?;
            let dropped_at: Vec<usize> = test_problem
                .design
                .columns()
                .iter()
                .enumerate()
                .filter(|(_, c)| dropped.contains(&c.label))
                .map(|(i, _)| i)
                .collect();
            let test_fit = result.evaluate(&test_problem.drop_columns(&dropped_at))?;
            match g.format {
                Format::Json => println!(
                    "{}",
                    serde_json::to_string_pretty(&serde_json::json!({ "result": result, "test": test_fit })).expect("serialisable")
                ),
                Format::Csv => print!("{}", report::coefficients_csv(&result)),
                Format::Md => {
                    print!("{}", report::coefficients_markdown(&result));
                    println!(
                        "Test: observations {}  log-likelihood {:.3}  pseudo R2 {:.3}",
                        test_fit.n_obs, test_fit.log_likelihood, test_fit.rho_squared
                    );
                }
            }
        }
        Command::Project { independent, spec, encoders, significant } => {
            let data = load_data(&config.dataset, &config)?;
            let DataSplit { train: tr, .. } = split(&data, &config.split_spec())?;
            let spec = spec_for(spec.as_deref(), &data, &config.encoding)?;
            let vars: Vec<&str> = spec.encoded_variables().collect();
            let enc = load_encoders(&encoders, &vars)?;
            let problem = MnlProblem::new(&tr, &spec, &enc)?;
            let result = travemb_core::mnl::estimate(&problem, &NewtonOptions::default())?;
            let mut table = project_all(&result, &enc, independent || config.independent_projection)?;
            if significant {
                table = travemb_core::projection::filter_report(&table, 0.0, travemb_core::projection::SIGNIFICANCE);
            }
            let text = report::projection_csv(&table, data.alternatives());
            match g.format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&table).expect("serialisable")),
                Format::Csv => print!("{text}"),
                Format::Md => {
                    let mut reader = csv_reader(&text);
                    let header: Vec<String> = reader.remove(0);
                    let header: Vec<&str> = header.iter().map(String::as_str).collect();
                    print!("{}", markdown(&header, &reader));
                }
            }
        }
        Command::Mds { variable, encoders } => {
            let enc: EncoderModel = load_encoders(&encoders, &[variable.as_str()])?.remove(0);
            let layout = layout_encoder(&enc)?;
            if layout.degenerate {
                eprintln!("warning: layout is degenerate (fewer than two positive eigenvalues)");
            }
            eprintln!("stress {:.3e}", layout.stress);
            let text = report::mds_csv(&layout);
            match g.format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&layout).expect("serialisable")),
                Format::Csv => print!("{text}"),
                Format::Md => {
                    let mut rows = csv_reader(&text);
                    let header = rows.remove(0);
                    let header: Vec<&str> = header.iter().map(String::as_str).collect();
                    print!("{}", markdown(&header, &rows));
                }
            }
        }
        Command::Experiment => {
            let data = load_data(&config.dataset, &config)?;
            let started = Instant::now();
            let comparison = run_comparison(&config, &data)?;
            let mut seconds = comparison.seconds.clone();
            seconds.push(("total".into(), started.elapsed().as_secs_f64()));
            export_report(&config, Some(&comparison), &[], data.alternatives(), &seconds, &config.output_dir)?;
            match g.format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&comparison.rows).expect("serialisable")),
                Format::Csv => print!("{}", report::summary_csv(&comparison.rows)),
                Format::Md => print!("{}", report::summary_markdown(&comparison.rows)),
            }
            eprintln!("reports written to {}", config.output_dir.display());
            if comparison.any_failed() {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Sweep { scenario, fractions, repeats } => {
            if let Some(f) = fractions {
                config.sweep.fractions = f;
            }
            if repeats.is_some() {
                config.sweep.repeats = repeats;
            }
            config.validate()?;
            let scenarios = match scenario {
                ScenarioArg::Light => vec![Scenario::Light],
                ScenarioArg::Bigdata => vec![Scenario::Bigdata],
                ScenarioArg::All => config.sweep.scenarios.clone(),
            };
            let data = load_data(&config.dataset, &config)?;
            let started = Instant::now();
            let mut points = Vec::new();
            for s in scenarios {
                points.extend(run_sweep(&config, &data, s)?);
            }
            let seconds = vec![("total".to_owned(), started.elapsed().as_secs_f64())];
            export_report(&config, None, &points, data.alternatives(), &seconds, &config.output_dir)?;
            let text = report::sweep_csv(&points);
            match g.format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&points).expect("serialisable")),
                Format::Csv => print!("{text}"),
                Format::Md => {
                    let mut rows = csv_reader(&text);
                    let header = rows.remove(0);
                    let header: Vec<&str> = header.iter().map(String::as_str).collect();
                    print!("{}", markdown(&header, &rows));
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn csv_reader(text: &str) -> Vec<Vec<String>> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(text.as_bytes())
        .records()
        .filter_map(std::result::Result::ok)
        .map(|r| r.iter().map(str::to_owned).collect())
        .collect()
}
