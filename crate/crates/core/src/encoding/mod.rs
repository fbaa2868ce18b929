//! Constituent trees as augmented dependency trees.
//!
//! Every constituent `(X, C, w_h)` sitting at level `p` of `w_h`'s spine
//! contributes one arc `(w_h, w_d, X#p)` per non-head child, where `w_d`
//! is the child's head word. The word heading the whole tree hangs from the
//! dummy root with the bare label `root`. Decoding rebuilds each head's
//! spine bottom-up, attaching the dependents of level `p` to the level
//! `p - 1` constituent.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::trees::{check_heads, Child, ConstituentNode, ConstituentTree, Token};
use crate::{Error, Result};

mod conll;

pub use conll::{read_dependencies, write_dependencies};

/// Label used on the arc from the dummy root.
pub const ROOT_LABEL: &str = "root";

/// Non-terminal used when a non-root arc carries the `root` label and its
/// head has no other attachment to borrow a non-terminal from.
pub const FALLBACK_NONTERMINAL: &str = "VROOT";

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AugmentedLabel {
    Root,
    Attach { nonterminal: String, order: usize },
}

impl AugmentedLabel {
    pub fn attach(nonterminal: impl Into<String>, order: usize) -> Self {
        AugmentedLabel::Attach {
            nonterminal: nonterminal.into(),
            order,
        }
    }

    pub fn is_root(&self) -> bool {
        matches!(self, AugmentedLabel::Root)
    }

    pub fn order(&self) -> Option<usize> {
        match self {
            AugmentedLabel::Root => None,
            AugmentedLabel::Attach { order, .. } => Some(*order),
        }
    }

    pub fn nonterminal(&self) -> Option<&str> {
        match self {
            AugmentedLabel::Root => None,
            AugmentedLabel::Attach { nonterminal, .. } => Some(nonterminal),
        }
    }
}

impl fmt::Display for AugmentedLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AugmentedLabel::Root => f.write_str(ROOT_LABEL),
            AugmentedLabel::Attach { nonterminal, order } => write!(f, "{nonterminal}#{order}"),
        }
    }
}

impl FromStr for AugmentedLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == ROOT_LABEL {
            return Ok(AugmentedLabel::Root);
        }
        let (nt, order) = s
            .rsplit_once('#')
            .ok_or_else(|| Error::format(0, format!("label `{s}` is not of the form X#p")))?;
        let order: usize = order
            .parse()
            .map_err(|_| Error::format(0, format!("bad attachment order in `{s}`")))?;
        if nt.is_empty() || order == 0 {
            return Err(Error::format(0, format!("label `{s}` needs X non-empty and p >= 1")));
        }
        Ok(AugmentedLabel::attach(nt, order))
    }
}

/// One head and one label per word. Heads use dummy-root numbering:
/// `0` is the root and word `i` (0-based) is `i + 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AugmentedDependencyTree {
    tokens: Vec<Token>,
    heads: Vec<usize>,
    labels: Vec<AugmentedLabel>,
}

impl AugmentedDependencyTree {
    /// Validates the structure: one head per word, exactly one root
    /// attachment, no cycles. Labels are not checked here.
    pub fn new(tokens: Vec<Token>, heads: Vec<usize>, labels: Vec<AugmentedLabel>) -> Result<Self> {
        let n = tokens.len();
        if heads.len() != n || labels.len() != n {
            return Err(Error::Structure(format!(
                "{n} tokens but {} heads and {} labels",
                heads.len(),
                labels.len()
            )));
        }
        if n == 0 {
            return Err(Error::Structure("empty dependency tree".into()));
        }
        for (i, &h) in heads.iter().enumerate() {
            if h > n {
                return Err(Error::Structure(format!("head {h} of word {} out of range", i + 1)));
            }
            if h == i + 1 {
                return Err(Error::Structure(format!("word {} heads itself", i + 1)));
            }
        }
        let roots = heads.iter().filter(|&&h| h == 0).count();
        if roots != 1 {
            return Err(Error::Structure(format!(
                "expected exactly one root attachment, found {roots}"
            )));
        }
        if !is_acyclic(&heads) {
            return Err(Error::Structure("head function contains a cycle".into()));
        }
        Ok(AugmentedDependencyTree {
            tokens,
            heads,
            labels,
        })
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    /// Head of each word in dummy-root numbering.
    pub fn heads(&self) -> &[usize] {
        &self.heads
    }

    pub fn labels(&self) -> &[AugmentedLabel] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// 0-based index of the word attached to the dummy root.
    pub fn root_word(&self) -> usize {
        self.heads.iter().position(|&h| h == 0).expect("validated")
    }

    /// Arcs as `(head, dependent, label)` in dummy-root numbering.
    pub fn arcs(&self) -> Vec<(usize, usize, AugmentedLabel)> {
        self.heads
            .iter()
            .zip(&self.labels)
            .enumerate()
            .map(|(i, (&h, l))| (h, i + 1, l.clone()))
            .collect()
    }

    /// True iff for every arc all words strictly between head and dependent
    /// descend from the head.
    pub fn is_projective(&self) -> bool {
        let n = self.len();
        let dominates = |h: usize, mut w: usize| {
            while w != 0 {
                if w == h {
                    return true;
                }
                w = self.heads[w - 1];
            }
            h == 0
        };
        for d in 1..=n {
            let h = self.heads[d - 1];
            let (lo, hi) = if h < d { (h, d) } else { (d, h) };
            if (lo + 1..hi).any(|w| !dominates(h, w)) {
                return false;
            }
        }
        true
    }
}

/// True iff following heads from every word reaches the dummy root.
/// `heads` uses dummy-root numbering; unassigned entries are not allowed.
pub fn is_acyclic(heads: &[usize]) -> bool {
    let n = heads.len();
    // 0 = unvisited, 1 = on current path, 2 = reaches root
    let mut state = vec![0u8; n + 1];
    state[0] = 2;
    for start in 1..=n {
        let mut path = Vec::new();
        let mut w = start;
        while state[w] == 0 {
            state[w] = 1;
            path.push(w);
            w = heads[w - 1];
            if w > n {
                return false;
            }
        }
        if state[w] == 1 {
            return false;
        }
        for p in path {
            state[p] = 2;
        }
    }
    true
}

/// Arcs sharing a head word, order and non-terminal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelGroup {
    pub head_word: usize,
    pub order: usize,
    pub nonterminal: String,
    pub dependents: Vec<usize>,
}

/// Level groups of every word (0-based), ordered by attachment order.
///
/// Fails when the labels are ill-formed: a `root` label off the root arc,
/// an attachment label on the root arc, orders that are not `1..k`, or
/// conflicting non-terminals at one level.
pub fn level_groups(dep: &AugmentedDependencyTree) -> Result<Vec<Vec<LevelGroup>>> {
    let n = dep.len();
    let mut by_head: Vec<BTreeMap<usize, LevelGroup>> = vec![BTreeMap::new(); n];
    for (i, (&h, label)) in dep.heads.iter().zip(&dep.labels).enumerate() {
        match (h, label) {
            (0, AugmentedLabel::Root) => {}
            (0, other) => {
                return Err(Error::Structure(format!(
                    "root attachment of word {} labelled `{other}`",
                    i + 1
                )))
            }
            (_, AugmentedLabel::Root) => {
                return Err(Error::Structure(format!(
                    "non-root arc to word {} labelled `root`",
                    i + 1
                )))
            }
            (h, AugmentedLabel::Attach { nonterminal, order }) => {
                let group = by_head[h - 1].entry(*order).or_insert_with(|| LevelGroup {
                    head_word: h - 1,
                    order: *order,
                    nonterminal: nonterminal.clone(),
                    dependents: Vec::new(),
                });
                if group.nonterminal != *nonterminal {
                    return Err(Error::Structure(format!(
                        "word {h} has conflicting non-terminals `{}` and `{nonterminal}` at order {order}",
                        group.nonterminal
                    )));
                }
                group.dependents.push(i);
            }
        }
    }
    by_head
        .into_iter()
        .enumerate()
        .map(|(w, groups)| {
            if groups.keys().copied().ne(1..=groups.len()) {
                return Err(Error::Structure(format!(
                    "attachment orders of word {} are not contiguous from 1",
                    w + 1
                )));
            }
            Ok(groups.into_values().collect())
        })
        .collect()
}

/// Reduce a head-annotated tree to augmented dependencies.
///
/// Unary nodes cannot be represented: they produce no arc and occupy no
/// spine level, so `encode(t) == encode(strip_unaries(t))`.
pub fn encode(tree: &ConstituentTree) -> Result<AugmentedDependencyTree> {
    // Returns the node's level on its head's spine, unary nodes excluded.
    fn visit(
        node: &ConstituentNode,
        heads: &mut [usize],
        labels: &mut [Option<AugmentedLabel>],
    ) -> usize {
        let head = node.head().expect("checked");
        let mut below = 0;
        for child in node.children() {
            if let Child::Node(n) = child {
                let child_level = visit(n, heads, labels);
                if n.head() == Some(head) {
                    below = child_level;
                }
            }
        }
        if node.children().len() == 1 {
            return below;
        }
        let level = below + 1;
        for child in node.children() {
            let d = child.head().expect("checked");
            if d != head {
                heads[d] = head + 1;
                labels[d] = Some(AugmentedLabel::attach(node.label(), level));
            }
        }
        level
    }

    let n = tree.len();
    let mut heads = vec![0; n];
    let mut labels: Vec<Option<AugmentedLabel>> = vec![None; n];
    let root_word = match tree.root() {
        Child::Terminal(i) => *i,
        Child::Node(root) => {
            let head = check_heads(root)?;
            visit(root, &mut heads, &mut labels);
            head
        }
    };
    heads[root_word] = 0;
    labels[root_word] = Some(AugmentedLabel::Root);
    let labels = labels
        .into_iter()
        .map(|l| l.expect("every non-root word is a non-head child exactly once"))
        .collect();
    AugmentedDependencyTree::new(tree.tokens().to_vec(), heads, labels)
}

/// Rebuild the constituent tree from well-formed augmented dependencies.
pub fn decode(dep: &AugmentedDependencyTree) -> Result<ConstituentTree> {
    fn build(word: usize, groups: &[Vec<LevelGroup>]) -> Result<Child> {
        let mut current = Child::Terminal(word);
        for group in &groups[word] {
            let mut children = vec![current];
            for &d in &group.dependents {
                children.push(build(d, groups)?);
            }
            let node = ConstituentNode::new(group.nonterminal.clone(), children)?;
            current = Child::Node(node.with_head(Some(word)));
        }
        Ok(current)
    }

    let groups = level_groups(dep)?;
    let root = build(dep.root_word(), &groups)?;
    ConstituentTree::new(dep.tokens.clone(), root)
}

/// Make any structurally valid tree's labels decodable.
///
/// The root attachment is labelled `root`. A `root` label on any other arc
/// joins the head's topmost level (or `VROOT#1` when the head has no other
/// labelled arcs). Per head, orders are compressed to `1..k` keeping their
/// relative order, and at each order the non-terminal of the leftmost
/// dependent wins.
pub fn repair_labels(dep: &AugmentedDependencyTree) -> AugmentedDependencyTree {
    let n = dep.len();
    let mut labels = dep.labels.clone();
    labels[dep.root_word()] = AugmentedLabel::Root;

    let mut top: Vec<Option<(usize, String)>> = vec![None; n + 1];
    for (&h, label) in dep.heads.iter().zip(&labels) {
        if let AugmentedLabel::Attach { nonterminal, order } = label {
            if top[h].as_ref().is_none_or(|(o, _)| order > o) {
                top[h] = Some((*order, nonterminal.clone()));
            }
        }
    }
    for (i, &h) in dep.heads.iter().enumerate() {
        if h != 0 && labels[i].is_root() {
            labels[i] = match &top[h] {
                Some((order, nt)) => AugmentedLabel::attach(nt.clone(), *order),
                None => AugmentedLabel::attach(FALLBACK_NONTERMINAL, 1),
            };
        }
    }

    // Per head: orders present, and the non-terminal of the leftmost
    // dependent at each order.
    let mut per_head: Vec<BTreeMap<usize, String>> = vec![BTreeMap::new(); n + 1];
    for (i, &h) in dep.heads.iter().enumerate() {
        if let AugmentedLabel::Attach { nonterminal, order } = &labels[i] {
            per_head[h].entry(*order).or_insert_with(|| nonterminal.clone());
        }
    }
    for (i, &h) in dep.heads.iter().enumerate() {
        if let AugmentedLabel::Attach { order, .. } = labels[i] {
            let rank = per_head[h].range(..order).count() + 1;
            labels[i] = AugmentedLabel::attach(per_head[h][&order].clone(), rank);
        }
    }

    AugmentedDependencyTree {
        tokens: dep.tokens.clone(),
        heads: dep.heads.clone(),
        labels,
    }
}

#[cfg(test)]
mod tests;
