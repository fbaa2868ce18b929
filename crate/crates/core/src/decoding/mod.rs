//! Left-to-right pointer decoding under an acyclicity constraint.
//!
//! Heads are searched over the per-word pointer distributions alone;
//! labels are chosen afterwards from the labeler. A step's candidates are
//! the heads that do not close a cycle with the prefix, and a candidate is
//! scored by its log-probability renormalised over those legal heads.

use crate::encoding::{decode, repair_labels, AugmentedDependencyTree, AugmentedLabel, ROOT_LABEL};
use crate::model::{Analysis, Model};
use crate::trees::{ConstituentTree, Token};
use crate::{Error, Result};

/// Result of a head search: heads in dummy-root numbering and the summed
/// renormalised log-probability of the chosen pointers.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadSearch {
    pub heads: Vec<usize>,
    pub log_prob: f64,
}

/// True iff attaching word `i` to `j` closes a cycle, i.e. following the
/// assigned heads from `j` reaches `i`. `heads[k - 1]` is the head of word
/// `k`, `None` if not yet assigned.
pub fn creates_cycle(heads: &[Option<usize>], i: usize, j: usize) -> bool {
    let mut w = j;
    for _ in 0..=heads.len() {
        if w == 0 {
            return false;
        }
        if w == i {
            return true;
        }
        match heads[w - 1] {
            Some(h) => w = h,
            None => return false,
        }
    }
    false
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Legal candidates for word `i` with their renormalised log-probabilities,
/// best first; ties go to the lower index.
fn candidates(row: &[f64], heads: &[Option<usize>], i: usize) -> Vec<(usize, f64)> {
    let legal: Vec<usize> = (0..row.len()).filter(|&j| !creates_cycle(heads, i, j)).collect();
    let z = log_sum_exp(legal.iter().map(|&j| row[j]));
    let mut out: Vec<(usize, f64)> = legal.into_iter().map(|j| (j, row[j] - z)).collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    out
}

/// Score a complete head assignment the way the search does. Returns
/// `None` if some prefix step is illegal.
pub fn sequence_log_prob(log_probs: &[Vec<f64>], heads: &[usize]) -> Option<f64> {
    let mut partial = vec![None; heads.len()];
    let mut total = 0.0;
    for (k, &h) in heads.iter().enumerate() {
        let i = k + 1;
        let (_, lp) = candidates(&log_probs[k], &partial, i)
            .into_iter()
            .find(|&(j, _)| j == h)?;
        total += lp;
        partial[k] = Some(h);
    }
    Some(total)
}

/// Greedy pointer decoding: each word takes its best legal head.
pub fn greedy_heads(log_probs: &[Vec<f64>]) -> HeadSearch {
    let mut partial = vec![None; log_probs.len()];
    let mut total = 0.0;
    for (k, row) in log_probs.iter().enumerate() {
        let (j, lp) = candidates(row, &partial, k + 1)[0];
        partial[k] = Some(j);
        total += lp;
    }
    HeadSearch {
        heads: partial.into_iter().map(|h| h.expect("assigned")).collect(),
        log_prob: total,
    }
}

fn beam_once(log_probs: &[Vec<f64>], k: usize) -> HeadSearch {
    let n = log_probs.len();
    let mut beam: Vec<(Vec<Option<usize>>, f64)> = vec![(vec![None; n], 0.0)];
    for (t, row) in log_probs.iter().enumerate() {
        let mut next = Vec::with_capacity(beam.len() * (n + 1));
        for (heads, score) in &beam {
            for (j, lp) in candidates(row, heads, t + 1) {
                next.push((heads, j, score + lp));
            }
        }
        // Stable: equal scores keep parent order, then candidate order.
        next.sort_by(|a, b| b.2.total_cmp(&a.2));
        next.truncate(k);
        beam = next
            .into_iter()
            .map(|(heads, j, score)| {
                let mut heads = heads.clone();
                heads[t] = Some(j);
                (heads, score)
            })
            .collect();
    }
    let (heads, log_prob) = beam.swap_remove(0);
    HeadSearch {
        heads: heads.into_iter().map(|h| h.expect("assigned")).collect(),
        log_prob,
    }
}

/// Beam search over head prefixes. The result is the best of the searches
/// with widths `1..=k`, so its score never falls below a narrower beam's
/// (in particular greedy's), and `k = 1` is exactly greedy.
pub fn beam_heads(log_probs: &[Vec<f64>], k: usize) -> Result<HeadSearch> {
    if k == 0 {
        return Err(Error::Argument("beam width must be at least 1".into()));
    }
    let mut best = beam_once(log_probs, 1);
    for width in 2..=k {
        let candidate = beam_once(log_probs, width);
        if candidate.log_prob > best.log_prob {
            best = candidate;
        }
    }
    Ok(best)
}

/// Brute-force optimum over every acyclic head function. Exponential; for
/// tests on short sentences.
pub fn exhaustive_heads(log_probs: &[Vec<f64>]) -> HeadSearch {
    let n = log_probs.len();
    let mut heads = vec![0usize; n];
    let mut best: Option<HeadSearch> = None;
    loop {
        if let Some(lp) = sequence_log_prob(log_probs, &heads) {
            if best.as_ref().is_none_or(|b| lp > b.log_prob) {
                best = Some(HeadSearch {
                    heads: heads.clone(),
                    log_prob: lp,
                });
            }
        }
        // Odometer over {0..n}^n.
        let mut pos = 0;
        loop {
            if pos == n {
                return best.expect("attaching everything to the root is legal");
            }
            heads[pos] += 1;
            if heads[pos] <= n {
                break;
            }
            heads[pos] = 0;
            pos += 1;
        }
    }
}

/// Keep the first word attached to the dummy root and re-point any other
/// root attachments to it.
pub fn single_root(heads: &[usize]) -> Vec<usize> {
    let first = heads.iter().position(|&h| h == 0).map(|k| k + 1);
    heads
        .iter()
        .enumerate()
        .map(|(k, &h)| match first {
            Some(f) if h == 0 && k + 1 != f => f,
            _ => h,
        })
        .collect()
}

/// Argmax labels for a fixed head assignment: `root` on the root arc, and
/// the best non-`root` label elsewhere when one exists.
pub fn assign_labels(analysis: &mut Analysis, model: &Model, heads: &[usize]) -> Result<Vec<AugmentedLabel>> {
    let inventory = &model.vocab().labels;
    let root_id = inventory.get(ROOT_LABEL);
    let scores = analysis.label_scores(heads)?;
    heads
        .iter()
        .zip(scores)
        .map(|(&h, row)| {
            if h == 0 {
                return Ok(AugmentedLabel::Root);
            }
            let best = row
                .iter()
                .enumerate()
                .filter(|&(l, _)| Some(l) != root_id)
                .fold(None, |acc: Option<(usize, f64)>, (l, &s)| match acc {
                    Some((_, b)) if b >= s => acc,
                    _ => Some((l, s)),
                });
            match best {
                Some((l, _)) => inventory.item(l).parse(),
                None => Ok(AugmentedLabel::Root),
            }
        })
        .collect()
}

/// A parsed sentence: the raw search result and the repaired dependency
/// tree built from it.
#[derive(Clone, Debug)]
pub struct Parse {
    pub search: HeadSearch,
    pub dependencies: AugmentedDependencyTree,
}

/// Head search (greedy for `k = 1`, beam otherwise), single-root repair,
/// labelling and label repair.
pub fn parse(model: &Model, tokens: &[Token], k: usize) -> Result<Parse> {
    let mut analysis = Analysis::new(model, tokens)?;
    let search = beam_heads(analysis.log_probs(), k)?;
    let heads = single_root(&search.heads);
    let labels = assign_labels(&mut analysis, model, &heads)?;
    let dep = AugmentedDependencyTree::new(tokens.to_vec(), heads, labels)?;
    Ok(Parse {
        search,
        dependencies: repair_labels(&dep),
    })
}

pub fn greedy_parse(model: &Model, tokens: &[Token]) -> Result<AugmentedDependencyTree> {
    let mut analysis = Analysis::new(model, tokens)?;
    let search = greedy_heads(analysis.log_probs());
    let heads = single_root(&search.heads);
    let labels = assign_labels(&mut analysis, model, &heads)?;
    let dep = AugmentedDependencyTree::new(tokens.to_vec(), heads, labels)?;
    Ok(repair_labels(&dep))
}

pub fn beam_parse(model: &Model, tokens: &[Token], k: usize) -> Result<AugmentedDependencyTree> {
    Ok(parse(model, tokens, k)?.dependencies)
}

pub fn parse_to_constituents(model: &Model, tokens: &[Token], k: usize) -> Result<ConstituentTree> {
    decode(&beam_parse(model, tokens, k)?)
}
