//! Command-line front end: every library stage as one subcommand.
//!
//! All file outputs land in `--out-dir`, written atomically (temp file +
//! rename) and accompanied by a `manifest.json` that records the resolved
//! configuration, a digest of every input, and the seed, so a run can be
//! reproduced from the manifest alone. Nothing in the outputs depends on
//! wall-clock time or on the worker-thread count.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::bound::{evaluate_bound, BoundParams};
use crate::consistency::ConsistencyParams;
use crate::corrector::{apply_corrections, clean_training_sets, train_pair_classifier};
use crate::error::{Error, Result};
use crate::eval::{
    align_to_truth, clean_list_metrics, confidence_pr_curve, document_report, pr_curve_csv,
    pr_curve_svg, render_report_table,
};
use crate::ingest::{extract_glyphs, load_image, read_ocr_tsv, serialize_ocr_tsv};
use crate::lexicon::{
    dictionary_stats, load_lexicon, normalize_token, ConfusionTable, LexiconStats,
};
use crate::pipeline::{
    build_clean_list, read_clean_tsv, serialize_clean_tsv, Mode, PipelineConfig,
};
use crate::pipeline::DocumentChecker;
use crate::similarity::{GlyphPool, DEFAULT_PATCH_SIDE};
use crate::synth::{
    derive_seed, render_document, sample_tokens, simulate_ocr, NoiseParams, SynthFont,
    ENGINE_PATCH_SIDE,
};

#[derive(Parser)]
#[command(
    name = "cleanlist",
    about = "Extracts near-certain word lists from noisy OCR output"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract the clean word list from a page image and its OCR output
    Clean(CleanArgs),
    /// Dictionary neighborhood statistics for chosen or sampled words
    Stats(StatsArgs),
    /// Evaluate the worst-case error bound from a JSON parameter file
    Bound(BoundArgs),
    /// Score clean lists and the confidence PR curve against truth tokens
    Eval(EvalArgs),
    /// Render a synthetic noisy page with simulated OCR output and truth
    Synth(SynthArgs),
    /// Train on clean-list glyphs and correct one confusable pair
    Correct(CorrectArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// key=value file merged under the flags; explicit flags win
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads; 0 or omitted means one per core
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Directory for outputs and the run manifest
    #[arg(long, value_name = "DIR", default_value = "out")]
    out_dir: PathBuf,
    /// Log filter on stderr, e.g. `info` or `cleanlist=debug`
    #[arg(long, value_name = "LEVEL", default_value = "warn")]
    log: String,
}

/// Pipeline knobs shared by `clean` and `eval`. Unset knobs keep the
/// library defaults; the manifest records the resolved values.
#[derive(Args)]
struct PipelineArgs {
    /// Confusable-pair table; compiled-in table when omitted
    #[arg(long, value_name = "FILE")]
    confusions: Option<PathBuf>,
    /// Domination threshold
    #[arg(long, value_name = "THETA")]
    theta: Option<f64>,
    /// Ranked look-alikes examined per glyph
    #[arg(long, value_name = "M")]
    max_neighbors: Option<usize>,
    /// Drop words shorter than this before the dictionary step
    #[arg(long, value_name = "LEN")]
    min_word_length: Option<usize>,
    /// Side of the square patch the consistency check compares
    #[arg(long, value_name = "PX", default_value_t = DEFAULT_PATCH_SIDE)]
    patch_side: u32,
}

impl PipelineArgs {
    fn resolve(&self, mode: Mode) -> Result<PipelineConfig> {
        let mut config = PipelineConfig::new(mode);
        if let Some(path) = &self.confusions {
            config.confusions = ConfusionTable::from_file(path)?;
        }
        if let Some(theta) = self.theta {
            config.consistency.theta = theta;
        }
        if let Some(m) = self.max_neighbors {
            config.consistency.max_neighbors = m;
        }
        if let Some(len) = self.min_word_length {
            config.min_word_length = len;
        }
        config.consistency.validate()?;
        Ok(config)
    }

    fn config_json(&self, config: &PipelineConfig) -> serde_json::Value {
        json!({
            "mode": config.mode.to_string(),
            "theta": config.consistency.theta,
            "max_neighbors": config.consistency.max_neighbors,
            "min_word_length": config.min_word_length,
            "patch_side": self.patch_side,
            "confusions": self
                .confusions
                .as_deref()
                .map(file_name)
                .unwrap_or_else(|| "builtin".to_string()),
        })
    }
}

#[derive(Args)]
struct CleanArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Page image (PGM or grayscale PNG)
    #[arg(long, value_name = "FILE")]
    image: PathBuf,
    /// OCR interchange TSV
    #[arg(long, value_name = "FILE")]
    ocr: PathBuf,
    /// Dictionary, one word per line
    #[arg(long, value_name = "FILE")]
    lexicon: PathBuf,
    /// conservative or aggressive
    #[arg(long, default_value = "conservative", value_parser = parse_mode)]
    mode: Mode,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct StatsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Dictionary, one word per line
    #[arg(long, value_name = "FILE")]
    lexicon: PathBuf,
    /// Confusable-pair table; compiled-in table when omitted
    #[arg(long, value_name = "FILE")]
    confusions: Option<PathBuf>,
    /// Word to profile; repeatable
    #[arg(long = "word", value_name = "WORD")]
    words: Vec<String>,
    /// Also profile this many dictionary words drawn uniformly
    #[arg(long, value_name = "N", default_value_t = 0)]
    sample: usize,
    /// Length of the sampled words
    #[arg(long, value_name = "LEN", default_value_t = 6)]
    word_len: usize,
    #[arg(long, value_name = "SEED", default_value_t = 0)]
    seed: u64,
    /// Largest neighborhood distance profiled
    #[arg(long, value_name = "I", default_value_t = 3)]
    max_i: usize,
}

#[derive(Args)]
struct BoundArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// JSON object with epsilon, delta, d2, e1, p1, r_d, r_e, r_n
    #[arg(long, value_name = "FILE")]
    params: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Page image (PGM or grayscale PNG)
    #[arg(long, value_name = "FILE")]
    image: PathBuf,
    /// OCR interchange TSV
    #[arg(long, value_name = "FILE")]
    ocr: PathBuf,
    /// Truth tokens, one per line, in reading order
    #[arg(long, value_name = "FILE")]
    truth: PathBuf,
    /// Dictionary, one word per line
    #[arg(long, value_name = "FILE")]
    lexicon: PathBuf,
    /// Also emit an SVG plot of the PR curve
    #[arg(long)]
    svg: bool,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Dictionary the page text is drawn from
    #[arg(long, value_name = "FILE")]
    lexicon: PathBuf,
    /// Confusable-pair table; compiled-in table when omitted
    #[arg(long, value_name = "FILE")]
    confusions: Option<PathBuf>,
    /// Number of words on the page
    #[arg(long, value_name = "N", default_value_t = 500)]
    words: usize,
    /// Std dev of per-pixel Gaussian intensity noise
    #[arg(long, value_name = "SIGMA", default_value_t = 135.0)]
    sigma: f64,
    /// Per-pixel probability of a black or white speck
    #[arg(long, value_name = "RATE", default_value_t = 0.002)]
    saltpepper: f64,
    /// Max reported-box offset in pixels
    #[arg(long, value_name = "PX", default_value_t = 1)]
    jitter: u32,
    #[arg(long, value_name = "SEED", default_value_t = 0)]
    seed: u64,
    /// Snap misread non-words to the nearest dictionary word, as engines
    /// with a language model do
    #[arg(long)]
    project_to_dictionary: bool,
}

#[derive(Args)]
struct CorrectArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Page image (PGM or grayscale PNG)
    #[arg(long, value_name = "FILE")]
    image: PathBuf,
    /// OCR interchange TSV
    #[arg(long, value_name = "FILE")]
    ocr: PathBuf,
    /// Clean-list TSV the training glyphs are harvested from
    #[arg(long, value_name = "FILE")]
    clean: PathBuf,
    /// The confusable pair to retrain, e.g. `--pair o c`
    #[arg(long, num_args = 2, value_names = ["POS", "NEG"])]
    pair: Vec<char>,
    #[arg(long, value_name = "N", default_value_t = 40)]
    epochs: u32,
    /// L2 regularization strength
    #[arg(long, value_name = "L", default_value_t = 1e-2)]
    lambda: f64,
    #[arg(long, value_name = "SEED", default_value_t = 0)]
    seed: u64,
    /// Side of the square feature patch
    #[arg(long, value_name = "PX", default_value_t = DEFAULT_PATCH_SIDE)]
    patch_side: u32,
}

/// Entry point. Returns the process exit code: 0 on success (including
/// `--help`/`--version`), 1 for usage and validation problems, 2 for
/// runtime failures.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match merge_config_file(argv) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let command = Cli::command().version(version_string());
    let matches = match command.try_get_matches_from(&argv) {
        Ok(m) => m,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return 1;
        }
    };
    let common = match &cli.command {
        Command::Clean(a) => &a.common,
        Command::Stats(a) => &a.common,
        Command::Bound(a) => &a.common,
        Command::Eval(a) => &a.common,
        Command::Synth(a) => &a.common,
        Command::Correct(a) => &a.common,
    };
    let _ = env_logger::Builder::new()
        .parse_filters(&common.log)
        .try_init();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = common.threads {
        pool = pool.num_threads(n);
    }
    // A second call in one process is fine: outputs never depend on the
    // pool shape, only wall time does.
    let _ = pool.build_global();

    let outcome = match cli.command {
        Command::Clean(args) => cmd_clean(args),
        Command::Stats(args) => cmd_stats(args),
        Command::Bound(args) => cmd_bound(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Correct(args) => cmd_correct(args),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

fn cmd_clean(args: CleanArgs) -> Result<()> {
    require_file("--image", &args.image)?;
    require_file("--ocr", &args.ocr)?;
    require_file("--lexicon", &args.lexicon)?;
    if let Some(path) = &args.pipeline.confusions {
        require_file("--confusions", path)?;
    }
    let config = args.pipeline.resolve(args.mode)?;
    let image = load_image(&args.image)?;
    let words = read_ocr_tsv(&args.ocr)?;
    let lexicon = load_lexicon(&args.lexicon)?;

    let extraction = extract_glyphs(&image, &words);
    let pool = GlyphPool::build(&extraction.glyphs, args.pipeline.patch_side);
    let checker = DocumentChecker::new(&pool, &extraction, config.consistency);
    let list = build_clean_list(&words, &lexicon, &checker, &config)?;

    let out = OutDir::prepare(&args.common.out_dir)?;
    out.write("clean.tsv", serialize_clean_tsv(&list).as_bytes())?;
    out.write("stats.json", &pretty_json(&list.stats)?)?;
    let mut inputs = vec![
        ("image", args.image.as_path()),
        ("ocr", args.ocr.as_path()),
        ("lexicon", args.lexicon.as_path()),
    ];
    if let Some(path) = &args.pipeline.confusions {
        inputs.push(("confusions", path));
    }
    out.manifest(
        "clean",
        &inputs,
        args.pipeline.config_json(&config),
        &["clean.tsv", "stats.json"],
    )?;
    println!(
        "{} mode kept {} of {} words",
        list.mode, list.stats.kept, list.stats.total_words
    );
    Ok(())
}

fn cmd_stats(args: StatsArgs) -> Result<()> {
    require_file("--lexicon", &args.lexicon)?;
    if let Some(path) = &args.confusions {
        require_file("--confusions", path)?;
    }
    if args.words.is_empty() && args.sample == 0 {
        return Err(Error::Usage(
            "nothing to profile: give --word and/or --sample".to_string(),
        ));
    }
    let lexicon = load_lexicon(&args.lexicon)?;
    let table = match &args.confusions {
        Some(path) => ConfusionTable::from_file(path)?,
        None => ConfusionTable::default(),
    };

    let mut queries = Vec::new();
    for raw in &args.words {
        let word = normalize_token(raw).ok_or_else(|| {
            Error::Usage(format!("--word `{raw}` does not normalize to a token"))
        })?;
        queries.push(word);
    }
    queries.extend(sample_words(&lexicon, args.word_len, args.sample, args.seed)?);

    let stats: Vec<LexiconStats> = queries
        .iter()
        .map(|w| dictionary_stats(&lexicon, w, &table, args.max_i))
        .collect();
    let median_r_d = median(stats.iter().filter_map(|s| s.r_d));
    let median_r_e = median(stats.iter().filter_map(|s| s.r_e));

    let out = OutDir::prepare(&args.common.out_dir)?;
    let report = json!({
        "queries": stats,
        "median_r_d": median_r_d,
        "median_r_e": median_r_e,
    });
    out.write("stats.json", &pretty_json(&report)?)?;
    let mut inputs = vec![("lexicon", args.lexicon.as_path())];
    if let Some(path) = &args.confusions {
        inputs.push(("confusions", path));
    }
    out.manifest(
        "stats",
        &inputs,
        json!({
            "words": args.words,
            "sample": args.sample,
            "word_len": args.word_len,
            "seed": args.seed,
            "max_i": args.max_i,
            "confusions": args
                .confusions
                .as_deref()
                .map(file_name)
                .unwrap_or_else(|| "builtin".to_string()),
        }),
        &["stats.json"],
    )?;
    println!(
        "profiled {} words; median r_d {}; median r_e {}",
        stats.len(),
        fmt_opt(median_r_d),
        fmt_opt(median_r_e)
    );
    Ok(())
}

fn cmd_bound(args: BoundArgs) -> Result<()> {
    require_file("--params", &args.params)?;
    let text = fs::read_to_string(&args.params).map_err(|e| Error::io(&args.params, e))?;
    let params: BoundParams = serde_json::from_str(&text)
        .map_err(|e| Error::parse(&args.params, e.line(), e.to_string()))?;
    let breakdown = evaluate_bound(&params)?;

    let out = OutDir::prepare(&args.common.out_dir)?;
    out.write("bound.json", &pretty_json(&breakdown)?)?;
    out.manifest(
        "bound",
        &[("params", args.params.as_path())],
        serde_json::to_value(params).expect("bound params serialize"),
        &["bound.json"],
    )?;
    println!(
        "total {} regime_ok {}",
        breakdown.total, breakdown.regime_ok
    );
    for v in &breakdown.violations {
        println!("violated: {v}");
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    require_file("--image", &args.image)?;
    require_file("--ocr", &args.ocr)?;
    require_file("--truth", &args.truth)?;
    require_file("--lexicon", &args.lexicon)?;
    if let Some(path) = &args.pipeline.confusions {
        require_file("--confusions", path)?;
    }
    let image = load_image(&args.image)?;
    let words = read_ocr_tsv(&args.ocr)?;
    let lexicon = load_lexicon(&args.lexicon)?;
    let truth_text = fs::read_to_string(&args.truth).map_err(|e| Error::io(&args.truth, e))?;
    let truth_tokens: Vec<String> = truth_text
        .lines()
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();

    let labels = align_to_truth(&words, &truth_tokens);
    let extraction = extract_glyphs(&image, &words);
    let pool = GlyphPool::build(&extraction.glyphs, args.pipeline.patch_side);

    let mut metrics = Vec::new();
    let mut resolved = None;
    for mode in [Mode::Conservative, Mode::Aggressive] {
        let config = args.pipeline.resolve(mode)?;
        let checker = DocumentChecker::new(&pool, &extraction, config.consistency);
        let list = build_clean_list(&words, &lexicon, &checker, &config)?;
        metrics.push(clean_list_metrics(&list.entries, &labels)?);
        resolved = Some(config);
    }
    let (conservative, aggressive) = (metrics[0], metrics[1]);
    let name = file_stem(&args.image);
    let report = document_report(&name, &labels, &conservative, &aggressive);
    let points = confidence_pr_curve(&words, &labels)?;

    let out = OutDir::prepare(&args.common.out_dir)?;
    out.write("report.json", &pretty_json(&report)?)?;
    out.write("pr_curve.csv", pr_curve_csv(&points).as_bytes())?;
    let mut outputs = vec!["report.json", "pr_curve.csv"];
    if args.svg {
        let operating = vec![
            (
                "conservative".to_string(),
                conservative.precision,
                conservative.recall,
            ),
            (
                "aggressive".to_string(),
                aggressive.precision,
                aggressive.recall,
            ),
        ];
        out.write("pr_curve.svg", pr_curve_svg(&points, &operating).as_bytes())?;
        outputs.push("pr_curve.svg");
    }
    let mut inputs = vec![
        ("image", args.image.as_path()),
        ("ocr", args.ocr.as_path()),
        ("truth", args.truth.as_path()),
        ("lexicon", args.lexicon.as_path()),
    ];
    if let Some(path) = &args.pipeline.confusions {
        inputs.push(("confusions", path));
    }
    let resolved = resolved.expect("both modes evaluated");
    let mut config_json = args.pipeline.config_json(&resolved);
    config_json["mode"] = json!("both");
    config_json["svg"] = json!(args.svg);
    out.manifest("eval", &inputs, config_json, &outputs)?;
    print!("{}", render_report_table(std::slice::from_ref(&report)));
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    require_file("--lexicon", &args.lexicon)?;
    if let Some(path) = &args.confusions {
        require_file("--confusions", path)?;
    }
    let lexicon = load_lexicon(&args.lexicon)?;
    let table = match &args.confusions {
        Some(path) => ConfusionTable::from_file(path)?,
        None => ConfusionTable::default(),
    };
    let noise = NoiseParams {
        gaussian_sigma: args.sigma,
        saltpepper_rate: args.saltpepper,
        jitter: args.jitter,
        project_to_dictionary: args.project_to_dictionary,
    };
    noise.validate()?;
    let font = SynthFont::regular();
    let tokens = sample_tokens(&lexicon, args.words, derive_seed(args.seed, 0))?;
    let doc = render_document(&tokens, &font, &noise, derive_seed(args.seed, 1))?;
    let sim = simulate_ocr(
        &doc.image,
        &doc.truth,
        &font,
        &noise,
        &lexicon,
        &table,
        derive_seed(args.seed, 2),
    )?;

    let out = OutDir::prepare(&args.common.out_dir)?;
    out.write("page.pgm", &doc.image.to_pgm())?;
    out.write("page.tsv", serialize_ocr_tsv(&sim.words).as_bytes())?;
    let mut truth = tokens.join("\n");
    truth.push('\n');
    out.write("truth.txt", truth.as_bytes())?;
    let mut inputs = vec![("lexicon", args.lexicon.as_path())];
    if let Some(path) = &args.confusions {
        inputs.push(("confusions", path));
    }
    out.manifest(
        "synth",
        &inputs,
        json!({
            "words": args.words,
            "sigma": args.sigma,
            "saltpepper": args.saltpepper,
            "jitter": args.jitter,
            "seed": args.seed,
            "project_to_dictionary": args.project_to_dictionary,
            "engine_patch_side": ENGINE_PATCH_SIDE,
            "confusions": args
                .confusions
                .as_deref()
                .map(file_name)
                .unwrap_or_else(|| "builtin".to_string()),
        }),
        &["page.pgm", "page.tsv", "truth.txt"],
    )?;
    let correct = sim
        .words
        .iter()
        .zip(&tokens)
        .filter(|(w, t)| &w.text == *t)
        .count();
    println!(
        "rendered {} words at sigma {}; {} read correctly",
        tokens.len(),
        args.sigma,
        correct
    );
    Ok(())
}

fn cmd_correct(args: CorrectArgs) -> Result<()> {
    require_file("--image", &args.image)?;
    require_file("--ocr", &args.ocr)?;
    require_file("--clean", &args.clean)?;
    let pair = (args.pair[0], args.pair[1]);
    let image = load_image(&args.image)?;
    let words = read_ocr_tsv(&args.ocr)?;
    let (_, clean_entries) = read_clean_tsv(&args.clean)?;
    let clean_ids = clean_entries.iter().map(|e| e.word_id).collect();

    let extraction = extract_glyphs(&image, &words);
    let (positives, negatives) =
        clean_training_sets(pair, &extraction.glyphs, &clean_ids, args.patch_side);
    let model = train_pair_classifier(
        pair,
        &positives,
        &negatives,
        args.epochs,
        args.lambda,
        args.seed,
    )?;
    if model.degenerate {
        log::warn!(
            "pair model is degenerate (train accuracy {:.3}); corrections will be noise",
            model.train_accuracy
        );
    }
    let thin = positives.len().min(negatives.len());
    if thin < 8 {
        log::warn!(
            "only {thin} clean glyphs on one side of the pair; the boundary \
             carries that class's sampling noise and corrections may overreach"
        );
    }
    let changes = apply_corrections(&model, &extraction.glyphs, &clean_ids);

    let mut tsv = String::from("glyph_id\told\tnew\tscore\n");
    for c in &changes {
        writeln!(
            tsv,
            "{}\t{}\t{}\t{:.6}",
            c.glyph_id, c.old_label, c.new_label, c.score
        )
        .unwrap();
    }
    let out = OutDir::prepare(&args.common.out_dir)?;
    out.write("changes.tsv", tsv.as_bytes())?;
    out.write("model.json", &pretty_json(&model)?)?;
    out.manifest(
        "correct",
        &[
            ("image", args.image.as_path()),
            ("ocr", args.ocr.as_path()),
            ("clean", args.clean.as_path()),
        ],
        json!({
            "pair": [pair.0, pair.1],
            "epochs": args.epochs,
            "lambda": args.lambda,
            "seed": args.seed,
            "patch_side": args.patch_side,
        }),
        &["changes.tsv", "model.json"],
    )?;
    println!(
        "trained on {} '{}' and {} '{}' clean glyphs (accuracy {:.3}); {} corrections",
        positives.len(),
        pair.0,
        negatives.len(),
        pair.1,
        model.train_accuracy,
        changes.len()
    );
    Ok(())
}

/// Applies `--config FILE`: each `key=value` line is appended to the argv
/// as `--key=value` unless that flag is already present, so explicit flags
/// always win. A literal `true` injects a bare switch, `false` nothing.
fn merge_config_file(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut path: Option<PathBuf> = None;
    for (i, arg) in argv.iter().enumerate() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            path = argv.get(i + 1).map(PathBuf::from);
        } else if let Some(v) = s.strip_prefix("--config=") {
            path = Some(PathBuf::from(v));
        }
    }
    let Some(path) = path else { return Ok(argv) };
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut merged = argv.clone();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::parse(&path, idx + 1, "expected key=value"));
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key == "config" {
            return Err(Error::parse(&path, idx + 1, "config files cannot nest"));
        }
        let flag = format!("--{key}");
        let given = argv.iter().any(|a| {
            let s = a.to_string_lossy();
            s == flag || s.starts_with(&format!("{flag}="))
        });
        if given {
            continue;
        }
        match value {
            "true" => merged.push(flag.into()),
            "false" => {}
            _ => merged.push(format!("{flag}={value}").into()),
        }
    }
    Ok(merged)
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    s.parse()
        .map_err(|_| format!("expected `conservative` or `aggressive`, got `{s}`"))
}

fn require_file(flag: &str, path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Usage(format!(
            "{flag} file not found: {}",
            path.display()
        )))
    }
}

fn version_string() -> String {
    format!("{} defaults:{}", env!("CARGO_PKG_VERSION"), defaults_hash())
}

/// Stamp over the compiled-in defaults (confusion table, consistency
/// parameters, patch sides): changing any default changes the version tag.
fn defaults_hash() -> String {
    let params = ConsistencyParams::default();
    let mut text = confusion_lines(&ConfusionTable::default());
    let _ = write!(
        text,
        "theta={} max_neighbors={} patch_side={} engine_patch_side={}",
        params.theta, params.max_neighbors, DEFAULT_PATCH_SIDE, ENGINE_PATCH_SIDE
    );
    hex_sha256(text.as_bytes())[..12].to_string()
}

/// Canonical confusion-table rendering in the table file syntax.
fn confusion_lines(table: &ConfusionTable) -> String {
    let mut out = String::new();
    let mut pairs: Vec<_> = table.pairs().collect();
    pairs.sort_unstable();
    for (a, b) in pairs {
        let _ = writeln!(out, "S {a} {b}");
    }
    let mut patterns: Vec<_> = table.patterns().collect();
    patterns.sort_unstable();
    for (x, y, z) in patterns {
        let _ = writeln!(out, "J {x}{y} {z}");
    }
    out
}

fn hex_sha256(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

fn pretty_json<T: serde::Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| Error::Config(format!("serialization failed: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "document".to_string())
}

fn fmt_opt(value: Option<f64>) -> String {
    value.map_or_else(|| "n/a".to_string(), |v| v.to_string())
}

fn median(values: impl Iterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

/// Uniform sample without replacement from the words of one length.
fn sample_words(
    lexicon: &crate::lexicon::Lexicon,
    word_len: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<String>> {
    use rand::{Rng, SeedableRng};
    if count == 0 {
        return Ok(Vec::new());
    }
    let pool = lexicon.words_of_len(word_len);
    if pool.is_empty() {
        return Err(Error::Usage(format!(
            "lexicon has no words of length {word_len}"
        )));
    }
    let mut indices: Vec<usize> = (0..pool.len()).collect();
    let take = count.min(pool.len());
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
    for k in 0..take {
        let pick = rng.gen_range(k..indices.len());
        indices.swap(k, pick);
    }
    Ok(indices[..take].iter().map(|&i| pool[i].clone()).collect())
}

/// Output directory handle: atomic writes plus the run manifest.
struct OutDir {
    dir: PathBuf,
}

impl OutDir {
    fn prepare(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(OutDir {
            dir: dir.to_path_buf(),
        })
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        let mut tmp = tempfile::Builder::new()
            .prefix(".cleanlist-")
            .tempfile_in(&self.dir)
            .map_err(|e| Error::io(&self.dir, e))?;
        tmp.write_all(bytes).map_err(|e| Error::io(&path, e))?;
        tmp.persist(&path).map_err(|e| Error::io(&path, e.error))?;
        Ok(())
    }

    /// Records what the run consumed and how it was configured. Input
    /// files appear as name + content digest; paths, timestamps, and the
    /// thread count are deliberately absent so reruns byte-match.
    fn manifest(
        &self,
        command: &str,
        inputs: &[(&str, &Path)],
        config: serde_json::Value,
        outputs: &[&str],
    ) -> Result<()> {
        let mut input_map = BTreeMap::new();
        for (role, path) in inputs {
            let bytes = fs::read(path).map_err(|e| Error::io(*path, e))?;
            input_map.insert(
                role.to_string(),
                json!({
                    "file": file_name(path),
                    "sha256": hex_sha256(&bytes),
                }),
            );
        }
        let config_sha256 = hex_sha256(
            serde_json::to_string(&config)
                .map_err(|e| Error::Config(format!("manifest serialization failed: {e}")))?
                .as_bytes(),
        );
        let manifest = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "defaults": defaults_hash(),
            "inputs": input_map,
            "config": config,
            "config_sha256": config_sha256,
            "outputs": outputs,
        });
        self.write("manifest.json", &pretty_json(&manifest)?)
    }
}
