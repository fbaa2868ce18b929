//! Seeded random constituent trees for property tests and the synthetic
//! mini-treebank.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{is_gapped, Child, ConstituentNode, ConstituentTree, Token};
use crate::{Error, Result};

const LEXICON: &[(&str, &[&str])] = &[
    ("NN", &["Haus", "Frau", "Buch", "Stadt", "Zeit", "Weg", "Jahr", "Kind"]),
    ("NE", &["Anna", "Berlin", "Otto", "Rhein"]),
    ("PPER", &["er", "sie", "es", "wir"]),
    ("ART", &["der", "die", "das", "ein"]),
    ("ADJA", &["alte", "neue", "kleine", "gute", "lange"]),
    ("VVFIN", &["kam", "sah", "liest", "baut", "findet"]),
    ("VAFIN", &["hat", "ist", "wird"]),
    ("APPR", &["in", "mit", "nach", "auf"]),
    ("ADV", &["heute", "dort", "nie", "oft"]),
    ("KON", &["und", "oder"]),
];

fn projection(category: &str) -> &'static str {
    match category {
        "NN" | "NE" | "PPER" | "ART" | "NP" => "NP",
        "ADJA" | "AP" => "AP",
        "VVFIN" | "VAFIN" => "VP",
        "VP" | "S" => "S",
        "APPR" | "PP" => "PP",
        "ADV" | "AVP" => "AVP",
        "KON" | "CS" => "CS",
        _ => "S",
    }
}

struct Item {
    child: Child,
    terminals: Vec<usize>,
    category: String,
}

/// A random unaryless tree over `n` words.
///
/// Each merge of sibling constituents is made discontinuous with
/// probability `discontinuity_rate` (when the current items allow it; a
/// request that cannot be honoured is carried over to the next merge).
/// With rate 0 every constituent is contiguous. Heads are not assigned.
pub fn generate_random_tree(
    n: usize,
    discontinuity_rate: f64,
    seed: u64,
) -> Result<ConstituentTree> {
    if n == 0 {
        return Err(Error::Argument("tree needs at least one word".into()));
    }
    if !(0.0..=1.0).contains(&discontinuity_rate) {
        return Err(Error::Argument(format!(
            "discontinuity rate {discontinuity_rate} outside [0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut tokens = Vec::with_capacity(n);
    for i in 0..n {
        if i == n - 1 && n >= 3 && rng.gen_bool(0.5) {
            tokens.push(Token::new(i, ".", "$."));
            continue;
        }
        let (pos, forms) = LEXICON[rng.gen_range(0..LEXICON.len())];
        tokens.push(Token::new(i, *forms.choose(&mut rng).unwrap(), pos));
    }

    let mut items: Vec<Item> = tokens
        .iter()
        .map(|t| Item {
            child: Child::Terminal(t.index),
            terminals: vec![t.index],
            category: t.pos.clone(),
        })
        .collect();

    let mut pending_disc = 0usize;
    while items.len() > 1 {
        if rng.gen_bool(discontinuity_rate) {
            pending_disc += 1;
        }
        let chosen = if pending_disc > 0 {
            match pick_gapped_pair(&items, &mut rng) {
                Some(pair) => {
                    pending_disc -= 1;
                    pair
                }
                None => pick_run(&items, &mut rng),
            }
        } else {
            pick_run(&items, &mut rng)
        };
        merge(&mut items, &chosen, &mut rng);
    }

    let root = items.pop().unwrap().child;
    ConstituentTree::new(tokens, root)
}

fn union(items: &[Item], chosen: &[usize]) -> Vec<usize> {
    let mut all: Vec<usize> = chosen
        .iter()
        .flat_map(|&i| items[i].terminals.iter().copied())
        .collect();
    all.sort_unstable();
    all
}

fn pick_gapped_pair(items: &[Item], rng: &mut ChaCha8Rng) -> Option<Vec<usize>> {
    let mut pairs = Vec::new();
    for i in 0..items.len() {
        for j in i + 1..items.len() {
            if is_gapped(&union(items, &[i, j])) {
                pairs.push(vec![i, j]);
            }
        }
    }
    pairs.choose(rng).cloned()
}

/// A run of 2-3 neighbouring items, preferring runs with a contiguous union.
fn pick_run(items: &[Item], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let max_len = if items.len() >= 3 && rng.gen_bool(0.3) { 3 } else { 2 };
    let runs: Vec<Vec<usize>> = (0..=items.len() - max_len)
        .map(|start| (start..start + max_len).collect())
        .collect();
    let contiguous: Vec<&Vec<usize>> = runs
        .iter()
        .filter(|r| !is_gapped(&union(items, r)))
        .collect();
    match contiguous.choose(rng) {
        Some(run) => (*run).clone(),
        None => runs.choose(rng).unwrap().clone(),
    }
}

fn merge(items: &mut Vec<Item>, chosen: &[usize], rng: &mut ChaCha8Rng) {
    let terminals = union(items, chosen);
    let head_pick = chosen[rng.gen_range(0..chosen.len())];
    let label = projection(&items[head_pick].category).to_string();

    let mut taken = Vec::new();
    for &i in chosen.iter().rev() {
        taken.push(items.remove(i));
    }
    let node = ConstituentNode::new(label.clone(), taken.into_iter().map(|it| it.child).collect())
        .expect("merged items have disjoint yields");
    let item = Item {
        child: Child::Node(node),
        terminals,
        category: label,
    };
    let at = items
        .iter()
        .position(|it| it.terminals[0] > item.terminals[0])
        .unwrap_or(items.len());
    items.insert(at, item);
}
