//! Batch commands behind the `discoparse` binary. Each command validates
//! its paths up front and returns a summary that the binary prints.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use discoparse::decoding::parse;
use discoparse::encoding::{
    decode, encode, read_dependencies, repair_labels, write_dependencies, AugmentedDependencyTree,
};
use discoparse::evaluation::{bracket_f1, EvalConfig, EvalReport};
use discoparse::model::{load_pretrained, Model, ModelConfig};
use discoparse::training::{train, TrainConfig, TrainReport};
use discoparse::trees::{
    assign_heads, emit_discbracket, generate_random_tree, parse_discbracket, read_treebank,
    strip_unaries, ConstituentTree, HeadRuleSet, Token, NO_POS,
};
use discoparse::{Error, Result};
use serde::Serialize;

/// Process exit status for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => 1,
        Error::Argument(_) | Error::Usage(_) => 2,
        Error::Format { .. } => 3,
        Error::Alignment(_) => 4,
        Error::Numeric(_) => 5,
        Error::Structure(_) | Error::Dimension { .. } => 6,
    }
}

pub fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Argument(format!("no such file: {}", path.display())))
    }
}

pub fn require_output(path: &Path) -> Result<()> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty());
    match parent {
        Some(dir) if !dir.is_dir() => Err(Error::Argument(format!(
            "output directory does not exist: {}",
            dir.display()
        ))),
        _ => Ok(()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

pub fn load_treebank(path: &Path) -> Result<Vec<ConstituentTree>> {
    read_treebank(open(path)?)
}

pub fn write_treebank(path: &Path, trees: &[ConstituentTree]) -> Result<()> {
    let mut w = create(path)?;
    for t in trees {
        writeln!(w, "{}", emit_discbracket(t))?;
    }
    w.flush()?;
    Ok(())
}

/// Unary stripping, head assignment and encoding for a whole treebank.
/// Returns the dependency trees and the number of unary nodes removed.
pub fn to_dependencies(
    trees: &[ConstituentTree],
    rules: &HeadRuleSet,
) -> Result<(Vec<AugmentedDependencyTree>, usize)> {
    let mut removed = 0;
    let mut deps = Vec::with_capacity(trees.len());
    for t in trees {
        let (stripped, k) = strip_unaries(t);
        removed += k;
        deps.push(encode(&assign_heads(&stripped, rules))?);
    }
    Ok((deps, removed))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConvertDirection {
    ToDependencies,
    ToConstituents,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ConvertSummary {
    pub sentences: usize,
    pub unaries_removed: usize,
    /// Dependency trees whose labels had to be repaired before decoding.
    pub repaired: usize,
}

pub fn cmd_convert(
    input: &Path,
    output: &Path,
    rules: &HeadRuleSet,
    direction: ConvertDirection,
) -> Result<ConvertSummary> {
    require_file(input)?;
    require_output(output)?;
    match direction {
        ConvertDirection::ToDependencies => {
            let trees = load_treebank(input)?;
            let (deps, removed) = to_dependencies(&trees, rules)?;
            let mut w = create(output)?;
            write_dependencies(&mut w, &deps)?;
            w.flush()?;
            Ok(ConvertSummary {
                sentences: deps.len(),
                unaries_removed: removed,
                repaired: 0,
            })
        }
        ConvertDirection::ToConstituents => {
            let deps = read_dependencies(open(input)?)?;
            let mut repaired = 0;
            let mut trees = Vec::with_capacity(deps.len());
            for dep in &deps {
                let fixed = repair_labels(dep);
                repaired += (fixed.labels() != dep.labels()) as usize;
                trees.push(decode(&fixed)?);
            }
            write_treebank(output, &trees)?;
            Ok(ConvertSummary {
                sentences: trees.len(),
                unaries_removed: 0,
                repaired,
            })
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RoundtripSummary {
    pub sentences: usize,
    pub unaries_removed: usize,
    pub failures: Vec<usize>,
}

/// Encode and decode every tree; a sentence fails if the decoded brackets
/// differ from the unary-stripped input.
pub fn cmd_roundtrip(input: &Path, rules: &HeadRuleSet) -> Result<RoundtripSummary> {
    require_file(input)?;
    let trees = load_treebank(input)?;
    let mut summary = RoundtripSummary {
        sentences: trees.len(),
        ..RoundtripSummary::default()
    };
    for (k, t) in trees.iter().enumerate() {
        let (stripped, removed) = strip_unaries(t);
        summary.unaries_removed += removed;
        let ok = encode(&assign_heads(&stripped, rules))
            .and_then(|dep| decode(&dep))
            .map(|back| emit_discbracket(&back) == emit_discbracket(&stripped))
            .unwrap_or(false);
        if !ok {
            summary.failures.push(k + 1);
        }
    }
    Ok(summary)
}

#[derive(Clone, Debug)]
pub struct TrainArgs {
    pub train: PathBuf,
    pub dev: PathBuf,
    pub rules: HeadRuleSet,
    pub model_config: ModelConfig,
    pub train_config: TrainConfig,
    pub embeddings: Option<PathBuf>,
    pub output: PathBuf,
}

/// Train on a treebank and write the best checkpoint plus a JSON report
/// next to it (`<output>.report.json`).
pub fn cmd_train(args: &TrainArgs) -> Result<TrainReport> {
    require_file(&args.train)?;
    require_file(&args.dev)?;
    if let Some(e) = &args.embeddings {
        require_file(e)?;
    }
    require_output(&args.output)?;
    let (corpus, _) = to_dependencies(&load_treebank(&args.train)?, &args.rules)?;
    let (dev, _) = to_dependencies(&load_treebank(&args.dev)?, &args.rules)?;
    let pretrained = match &args.embeddings {
        Some(path) => Some(load_pretrained(open(path)?)?),
        None => None,
    };
    let mut model_config = args.model_config.clone();
    model_config.use_pretrained = pretrained.is_some();
    let (model, report) = train(
        &corpus,
        &dev,
        &model_config,
        &args.train_config,
        pretrained.as_ref(),
    )?;
    model.save(&args.output)?;
    let summary = report_path(&args.output);
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Argument(e.to_string()))?;
    std::fs::write(summary, json + "\n")?;
    Ok(report)
}

pub fn report_path(checkpoint: &Path) -> PathBuf {
    let mut name = checkpoint.as_os_str().to_owned();
    name.push(".report.json");
    PathBuf::from(name)
}

/// Read sentences to parse. Lines starting with `(` are bracketed trees
/// whose terminals supply the tokens; other non-empty lines are
/// whitespace-separated tokens, optionally `form/pos`.
pub fn read_sentences<R: BufRead>(reader: R) -> Result<Vec<Vec<Token>>> {
    let mut out = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if text.starts_with('(') {
            let tree = parse_discbracket(text).map_err(|e| e.at_line(k + 1))?;
            out.push(tree.tokens().to_vec());
            continue;
        }
        let tokens = text
            .split_whitespace()
            .enumerate()
            .map(|(i, raw)| match raw.rsplit_once('/') {
                Some((form, pos)) if !form.is_empty() && !pos.is_empty() => Token::new(i, form, pos),
                _ => Token::new(i, raw, NO_POS),
            })
            .collect();
        out.push(tokens);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParseSummary {
    pub sentences: usize,
    pub mean_log_prob: f64,
}

/// Parse sentences into discbracket trees and, optionally, dependency
/// columns.
pub fn cmd_parse(
    input: &Path,
    checkpoint: &Path,
    beam: usize,
    output: &Path,
    dependencies: Option<&Path>,
) -> Result<ParseSummary> {
    require_file(input)?;
    require_file(checkpoint)?;
    require_output(output)?;
    if let Some(d) = dependencies {
        require_output(d)?;
    }
    let model = Model::load(checkpoint)?;
    let sentences = read_sentences(open(input)?)?;
    let mut trees = Vec::with_capacity(sentences.len());
    let mut deps = Vec::with_capacity(sentences.len());
    let mut total = 0.0;
    for tokens in &sentences {
        let parsed = parse(&model, tokens, beam)?;
        total += parsed.search.log_prob;
        trees.push(decode(&parsed.dependencies)?);
        deps.push(parsed.dependencies);
    }
    write_treebank(output, &trees)?;
    if let Some(path) = dependencies {
        let mut w = create(path)?;
        write_dependencies(&mut w, &deps)?;
        w.flush()?;
    }
    Ok(ParseSummary {
        sentences: sentences.len(),
        mean_log_prob: if sentences.is_empty() {
            0.0
        } else {
            total / sentences.len() as f64
        },
    })
}

pub fn cmd_eval(gold: &Path, pred: &Path, config: &EvalConfig) -> Result<EvalReport> {
    require_file(gold)?;
    require_file(pred)?;
    bracket_f1(&load_treebank(gold)?, &load_treebank(pred)?, config)
}

/// `count` random trees with lengths cycling through
/// `ceil(size / 2)..=size`; tree `k` uses seed `seed + k`.
pub fn generate_corpus(count: usize, size: usize, rate: f64, seed: u64) -> Result<Vec<ConstituentTree>> {
    if size == 0 {
        return Err(Error::Argument("sentence size must be positive".into()));
    }
    let lo = size.div_ceil(2);
    (0..count)
        .map(|k| generate_random_tree(lo + k % (size - lo + 1), rate, seed.wrapping_add(k as u64)))
        .collect()
}

pub fn cmd_gen(count: usize, size: usize, rate: f64, seed: u64, output: &Path) -> Result<usize> {
    require_output(output)?;
    let trees = generate_corpus(count, size, rate, seed)?;
    write_treebank(output, &trees)?;
    Ok(trees.len())
}
