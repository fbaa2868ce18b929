//! Labelled bracket scoring for discontinuous trees, plus attachment
//! scores on augmented dependencies.
//!
//! Brackets are `(label, yield)` pairs. Punctuation terminals are removed
//! from every yield and the remaining terminals renumbered, so a gap made
//! only of punctuation does not count as a discontinuity. Brackets with
//! an empty yield or a root label are dropped. Counts are summed over all
//! sentences before computing precision and recall.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::encoding::AugmentedDependencyTree;
use crate::trees::{is_gapped, ConstituentTree, Token};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub punct_pos: BTreeSet<String>,
    pub root_labels: BTreeSet<String>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            punct_pos: ["$.", "$,", "$("].iter().map(|s| s.to_string()).collect(),
            root_labels: ["VROOT", "ROOT", "TOP"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }
}

impl EvalConfig {
    pub fn is_punctuation(&self, token: &Token) -> bool {
        if token.has_pos() {
            self.punct_pos.contains(&token.pos)
        } else {
            token.form.chars().all(|c| !c.is_alphanumeric())
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    pub fn precision(&self) -> f64 {
        percent(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        percent(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    fn add(&mut self, other: Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

fn percent(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

/// Scores in percent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub sentences: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub disc_precision: f64,
    pub disc_recall: f64,
    pub disc_f1: f64,
    pub counts: Counts,
    pub disc_counts: Counts,
    pub las: Option<f64>,
    pub uas: Option<f64>,
}

impl EvalReport {
    fn from_counts(sentences: usize, counts: Counts, disc_counts: Counts) -> Self {
        EvalReport {
            sentences,
            precision: counts.precision(),
            recall: counts.recall(),
            f1: counts.f1(),
            disc_precision: disc_counts.precision(),
            disc_recall: disc_counts.recall(),
            disc_f1: disc_counts.f1(),
            counts,
            disc_counts,
            las: None,
            uas: None,
        }
    }

    pub fn with_attachment(mut self, las: f64, uas: f64) -> Self {
        self.las = Some(las);
        self.uas = Some(uas);
        self
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "sentences      {:>8}", self.sentences)?;
        writeln!(f, "{:<14} {:>8} {:>8} {:>8} {:>7} {:>7} {:>7}", "", "P", "R", "F1", "tp", "fp", "fn")?;
        for (name, p, r, f1, c) in [
            ("all", self.precision, self.recall, self.f1, self.counts),
            ("discontinuous", self.disc_precision, self.disc_recall, self.disc_f1, self.disc_counts),
        ] {
            writeln!(
                f,
                "{name:<14} {p:>8.2} {r:>8.2} {f1:>8.2} {:>7} {:>7} {:>7}",
                c.tp, c.fp, c.fn_
            )?;
        }
        if let (Some(las), Some(uas)) = (self.las, self.uas) {
            writeln!(f, "LAS            {las:>8.2}")?;
            writeln!(f, "UAS            {uas:>8.2}")?;
        }
        Ok(())
    }
}

/// A labelled bracket with punctuation removed and terminals renumbered.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bracket {
    pub label: String,
    pub terminals: Vec<usize>,
}

impl Bracket {
    pub fn is_discontinuous(&self) -> bool {
        is_gapped(&self.terminals)
    }
}

pub fn brackets(tree: &ConstituentTree, config: &EvalConfig) -> Vec<Bracket> {
    let mut renumber = vec![None; tree.len()];
    let mut next = 0;
    for tok in tree.tokens() {
        if !config.is_punctuation(tok) {
            renumber[tok.index] = Some(next);
            next += 1;
        }
    }
    tree.nodes()
        .into_iter()
        .filter(|n| !config.root_labels.contains(n.label()))
        .filter_map(|n| {
            let terminals: Vec<usize> = n.yield_set().iter().filter_map(|&i| renumber[i]).collect();
            (!terminals.is_empty()).then(|| Bracket {
                label: n.label().to_string(),
                terminals,
            })
        })
        .collect()
}

fn check_aligned(gold: &[Token], pred: &[Token], sentence: usize) -> Result<()> {
    if gold.len() != pred.len() {
        return Err(Error::Alignment(format!(
            "sentence {}: {} gold tokens vs {} predicted",
            sentence + 1,
            gold.len(),
            pred.len()
        )));
    }
    if let Some((g, p)) = gold.iter().zip(pred).find(|(g, p)| g.form != p.form) {
        return Err(Error::Alignment(format!(
            "sentence {}: token {} is `{}` in gold but `{}` in prediction",
            sentence + 1,
            g.index,
            g.form,
            p.form
        )));
    }
    Ok(())
}

fn match_counts<'a>(gold: impl Iterator<Item = &'a Bracket>, pred: impl Iterator<Item = &'a Bracket>) -> Counts {
    let mut remaining: HashMap<&Bracket, usize> = HashMap::new();
    let mut gold_total = 0;
    for b in gold {
        *remaining.entry(b).or_default() += 1;
        gold_total += 1;
    }
    let (mut tp, mut pred_total) = (0, 0);
    for b in pred {
        pred_total += 1;
        if let Some(c) = remaining.get_mut(b) {
            if *c > 0 {
                *c -= 1;
                tp += 1;
            }
        }
    }
    Counts {
        tp,
        fp: pred_total - tp,
        fn_: gold_total - tp,
    }
}

/// Overall and discontinuous-only labelled bracket scores.
pub fn bracket_f1(
    gold: &[ConstituentTree],
    pred: &[ConstituentTree],
    config: &EvalConfig,
) -> Result<EvalReport> {
    if gold.len() != pred.len() {
        return Err(Error::Alignment(format!(
            "{} gold sentences vs {} predicted",
            gold.len(),
            pred.len()
        )));
    }
    let mut all = Counts::default();
    let mut disc = Counts::default();
    for (s, (g, p)) in gold.iter().zip(pred).enumerate() {
        check_aligned(g.tokens(), p.tokens(), s)?;
        let gb = brackets(g, config);
        let pb = brackets(p, config);
        all.add(match_counts(gb.iter(), pb.iter()));
        disc.add(match_counts(
            gb.iter().filter(|b| b.is_discontinuous()),
            pb.iter().filter(|b| b.is_discontinuous()),
        ));
    }
    Ok(EvalReport::from_counts(gold.len(), all, disc))
}

/// `(precision, recall, f1)` over discontinuous brackets only.
pub fn disc_f1(
    gold: &[ConstituentTree],
    pred: &[ConstituentTree],
    config: &EvalConfig,
) -> Result<(f64, f64, f64)> {
    let r = bracket_f1(gold, pred, config)?;
    Ok((r.disc_precision, r.disc_recall, r.disc_f1))
}

/// `(LAS, UAS)` in percent over all words, punctuation included.
pub fn las_uas(
    gold: &[AugmentedDependencyTree],
    pred: &[AugmentedDependencyTree],
) -> Result<(f64, f64)> {
    if gold.len() != pred.len() {
        return Err(Error::Alignment(format!(
            "{} gold sentences vs {} predicted",
            gold.len(),
            pred.len()
        )));
    }
    let (mut words, mut heads, mut labelled) = (0, 0, 0);
    for (s, (g, p)) in gold.iter().zip(pred).enumerate() {
        check_aligned(g.tokens(), p.tokens(), s)?;
        for i in 0..g.len() {
            words += 1;
            if g.heads()[i] == p.heads()[i] {
                heads += 1;
                if g.labels()[i] == p.labels()[i] {
                    labelled += 1;
                }
            }
        }
    }
    Ok((percent(labelled, words), percent(heads, words)))
}
