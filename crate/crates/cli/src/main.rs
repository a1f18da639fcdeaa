mod args;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use labelsift::data::{
    load_idx_images, load_tabular, load_text, write_idx_labels, write_tabular, EmbeddingTable,
    TabularOptions,
};
use labelsift::detector::check_alpha;
use labelsift::model_selection::write_cv_trace;
use labelsift::nn::{save_checkpoint, NetworkSpec};
use labelsift::{
    benchmark, detect, flip_at_random, flip_completely_at_random, make_blobs, make_classification,
    BenchmarkConfig, ClassGroups, Dataset, DetectionReport, DetectorConfig, Error, ErrorCategory,
    Hyperparams, NoiseRecord, NoiseRegime,
};

use args::{
    BenchmarkArgs, Cli, Command, DataArgs, DetectArgs, GenerateArgs, InjectArgs, InspectArgs,
    NoiseArgs, Regime, SyntheticKind,
};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

/// Suspects printed by `detect`.
const TOP_SUSPECTS: usize = 10;
/// Smallest number of instances per class accepted by `generate`.
const MIN_PER_CLASS: usize = 10;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            let first = first.trim_start_matches("error: ");
            eprintln!("error[E_USAGE]: {first}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, status) = classify(&e);
            eprintln!("error[{code}]: {}", render(&e));
            ExitCode::from(status)
        }
    }
}

/// Error code and exit status for a failure. Errors that do not come from the
/// library are I/O problems with CLI-owned files and count as data errors.
fn classify(e: &anyhow::Error) -> (&'static str, u8) {
    match e.chain().find_map(|c| c.downcast_ref::<Error>()) {
        Some(err) => {
            let status = match err.category() {
                ErrorCategory::Config => 1,
                ErrorCategory::Data => 2,
                ErrorCategory::Training => 3,
            };
            (err.code(), status)
        }
        None => ("E_IO", 2),
    }
}

/// Joins the error chain on one line, skipping causes whose text is already
/// part of the message before them.
fn render(e: &anyhow::Error) -> String {
    let mut parts: Vec<String> = Vec::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !parts.last().is_some_and(|p| p.contains(&text)) {
            parts.push(text);
        }
    }
    parts.join(": ").replace('\n', " ")
}

fn config_error(msg: impl Into<String>) -> anyhow::Error {
    Error::Config(msg.into()).into()
}

fn run(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(config_error("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Detect(a) => cmd_detect(a),
        Command::Inject(a) => cmd_inject(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Generate(a) => cmd_generate(a),
        Command::Inspect(a) => cmd_inspect(a),
    }
}

/// Where a dataset was read from, which decides how noisy labels are written.
enum Source {
    Table,
    Images,
    Text,
}

fn load_dataset(args: &DataArgs) -> Result<(Dataset, Source)> {
    if let Some(path) = &args.data {
        let options = TabularOptions {
            has_header: !args.no_header,
            label_column: args.label_column.parse().expect("infallible"),
        };
        return Ok((load_tabular(path, &options)?, Source::Table));
    }
    let labels = args.labels.as_ref();
    if let (Some(images), Some(labels)) = (&args.images, labels) {
        let ds = load_idx_images(images, labels, args.replicate_channels)?;
        return Ok((ds, Source::Images));
    }
    if let (Some(corpus), Some(labels), Some(embeddings)) = (&args.corpus, labels, &args.embeddings)
    {
        let table = EmbeddingTable::load(embeddings)?;
        let (ds, diag) = load_text(corpus, labels, &table)?;
        log::info!(
            "embedded {} documents; {} of {} tokens had no vector",
            diag.documents,
            diag.skipped_tokens,
            diag.tokens
        );
        return Ok((ds, Source::Text));
    }
    Err(config_error(
        "no dataset given: use --data, --images with --labels, or --corpus with --labels and --embeddings",
    ))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn describe(hp: &Hyperparams) -> String {
    let network = match hp.network {
        NetworkSpec::Dense(p) => format!(
            "dense network, depth {}, {} units, dropout {}",
            p.depth, p.units, p.dropout
        ),
        NetworkSpec::Conv => "convolutional network".to_string(),
    };
    format!(
        "{network}; learning rate {}, batch {}, up to {} epochs",
        hp.learning_rate, hp.batch_size, hp.max_epochs
    )
}

fn cmd_detect(args: DetectArgs) -> Result<()> {
    check_alpha(args.alpha)?;
    let (dataset, _) = load_dataset(&args.data)?;
    let config = DetectorConfig {
        retain_full_scores: args.retain_full_scores.then_some(true),
        ..DetectorConfig::default()
    };
    let detection = detect(&dataset, args.alpha, args.seed, &config)?;
    let report = DetectionReport::new(&detection.ranking, &dataset);

    let mut out = create(&args.output)?;
    report.write_json(&mut out)?;
    out.flush()?;
    if let Some(path) = &args.csv {
        let mut out = create(path)?;
        report.write_csv(&mut out)?;
        out.flush()?;
    }
    if let Some(path) = &args.cv_trace {
        let mut out = create(path)?;
        write_cv_trace(&detection.cv_results, &mut out)?;
        out.flush()?;
    }
    if let Some(path) = &args.checkpoint {
        save_checkpoint(&detection.model, path)?;
    }

    if let Some(hp) = &report.selected_hyperparams {
        println!("selected: {}", describe(hp));
    }
    println!(
        "{} of {} instances flagged (alpha = {}) in {:.1}s",
        report.suspects.len(),
        report.n,
        report.alpha,
        report.runtime_seconds
    );
    println!("{:>8}  {:>10}  label", "index", "score");
    for s in report.suspects.iter().take(TOP_SUSPECTS) {
        let label = serde_json::to_string(&s.original_label)?;
        println!(
            "{:>8}  {:>10.6}  {}",
            s.index,
            s.score,
            label.trim_matches('"')
        );
    }
    println!("report written to {}", args.output.display());
    Ok(())
}

fn class_names(dataset: &Dataset) -> Vec<String> {
    (0..dataset.num_classes())
        .map(|c| dataset.class_label(c))
        .collect()
}

fn load_groups(noise: &NoiseArgs, dataset: &Dataset) -> Result<Option<ClassGroups>> {
    let names = class_names(dataset);
    let groups = if let Some(path) = &noise.groups {
        Some(ClassGroups::load(path, &names)?)
    } else if noise.cifar100_groups {
        Some(ClassGroups::cifar100(&names)?)
    } else {
        None
    };
    if noise.regime == Regime::AtRandom && groups.is_none() {
        return Err(config_error(
            "--regime at-random needs --groups or --cifar100-groups",
        ));
    }
    Ok(groups)
}

fn check_noise(noise: &NoiseArgs) -> Result<()> {
    if !(noise.mu > 0.0 && noise.mu < 1.0) {
        return Err(config_error(format!(
            "mu must lie in (0, 1), got {}",
            noise.mu
        )));
    }
    if noise.regime == Regime::AtRandom && noise.groups.is_none() && !noise.cifar100_groups {
        return Err(config_error(
            "--regime at-random needs --groups or --cifar100-groups",
        ));
    }
    Ok(())
}

fn regime(r: Regime) -> NoiseRegime {
    match r {
        Regime::CompletelyAtRandom => NoiseRegime::CompletelyAtRandom,
        Regime::AtRandom => NoiseRegime::AtRandom,
    }
}

fn default_record_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".record.json");
    PathBuf::from(name)
}

fn cmd_inject(args: InjectArgs) -> Result<()> {
    check_noise(&args.noise)?;
    let (dataset, source) = load_dataset(&args.data)?;
    let groups = load_groups(&args.noise, &dataset)?;
    let (labels, record): (_, NoiseRecord) = match &groups {
        Some(g) => flip_at_random(dataset.labels(), args.noise.mu, g, args.seed)?,
        None => flip_completely_at_random(dataset.labels(), args.noise.mu, args.seed)?,
    };
    let noisy = dataset.with_labels(labels)?;

    let mut out = create(&args.output)?;
    match source {
        Source::Table => write_tabular(&noisy, &mut out)?,
        Source::Images => {
            let codes = noisy
                .class_indices()
                .into_iter()
                .map(|c| {
                    u8::try_from(c).map_err(|_| config_error("IDX labels hold at most 256 classes"))
                })
                .collect::<Result<Vec<u8>>>()?;
            write_idx_labels(&mut out, &codes)?;
        }
        Source::Text => {
            for c in noisy.class_indices() {
                writeln!(out, "{}", noisy.class_label(c))?;
            }
        }
    }
    out.flush()?;
    let record_path = args
        .record
        .unwrap_or_else(|| default_record_path(&args.output));
    record.save(&record_path)?;
    println!(
        "flipped {} of {} labels ({}); labels written to {}, record to {}",
        record.len(),
        record.n,
        record.regime,
        args.output.display(),
        record_path.display()
    );
    Ok(())
}

fn generate(kind: SyntheticKind, n: usize, d: usize, c: usize, seed: u64) -> Result<Dataset> {
    if n < c.saturating_mul(MIN_PER_CLASS) {
        return Err(config_error(format!(
            "need at least {MIN_PER_CLASS} instances per class, got n = {n} for c = {c}"
        )));
    }
    Ok(match kind {
        SyntheticKind::Blobs => make_blobs(n, d, c, seed)?,
        SyntheticKind::Classification => make_classification(n, d, c, seed)?,
    })
}

fn cmd_benchmark(args: BenchmarkArgs) -> Result<()> {
    check_noise(&args.noise)?;
    if args.runs == 0 {
        return Err(config_error("--runs must be at least 1"));
    }
    if args.alphas.is_empty() {
        return Err(config_error("--alphas needs at least one value"));
    }
    for &a in &args.alphas {
        check_alpha(a)?;
    }
    let (dataset, default_name) = match args.synthetic.synthetic {
        Some(kind) => {
            let s = &args.synthetic;
            let ds = generate(kind, s.n, s.d, s.c, args.seed)?;
            let name = match kind {
                SyntheticKind::Blobs => "synthetic blobs",
                SyntheticKind::Classification => "synthetic classification",
            };
            (ds, name.to_string())
        }
        None => {
            let (ds, _) = load_dataset(&args.data)?;
            let path = [&args.data.data, &args.data.images, &args.data.corpus]
                .into_iter()
                .flatten()
                .next()
                .expect("load_dataset succeeded");
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned());
            (ds, stem.unwrap_or_else(|| "dataset".into()))
        }
    };
    let groups = load_groups(&args.noise, &dataset)?;
    let config = BenchmarkConfig {
        mu: args.noise.mu,
        alphas: args.alphas,
        runs: args.runs,
        regime: regime(args.noise.regime),
        groups,
        detector: DetectorConfig::default(),
    };
    let name = args.name.unwrap_or(default_name);
    let report = match benchmark(&dataset, &name, args.seed, &config) {
        Ok(report) => report,
        Err(Error::BenchmarkAborted {
            run,
            partial,
            source,
        }) => {
            if partial.runs > 0 {
                let mut out = create(&args.output)?;
                out.write_all(partial.to_json().as_bytes())?;
                out.flush()?;
                log::warn!(
                    "partial report with {} completed runs written to {}",
                    partial.runs,
                    args.output.display()
                );
            }
            return Err(anyhow::Error::new(*source).context(format!("benchmark run {run}")));
        }
        Err(e) => return Err(e.into()),
    };
    let mut out = create(&args.output)?;
    out.write_all(report.to_json().as_bytes())?;
    out.flush()?;
    println!("{}", report.render_table());
    println!("report written to {}", args.output.display());
    Ok(())
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let ds = generate(args.kind, args.n, args.d, args.c, args.seed)?;
    let mut out = create(&args.output)?;
    write_tabular(&ds, &mut out)?;
    out.flush()?;
    println!(
        "wrote {} instances, {} features, {} classes to {}",
        ds.len(),
        args.d,
        args.c,
        args.output.display()
    );
    Ok(())
}

fn cmd_inspect(args: InspectArgs) -> Result<()> {
    let (ds, _) = load_dataset(&args.data)?;
    let shape: Vec<String> = ds.instance_shape().iter().map(|s| s.to_string()).collect();
    println!("kind: {}", ds.kind());
    println!("instances: {}", ds.len());
    println!("instance shape: ({})", shape.join(", "));
    println!("classes: {}", ds.num_classes());
    let width = class_names(&ds).iter().map(String::len).max().unwrap_or(0);
    for (c, count) in ds.class_counts().into_iter().enumerate() {
        println!("  {:<width$}  {count}", ds.class_label(c));
    }
    Ok(())
}
