//! Constituent trees with set-valued (possibly gapped) yields.
//!
//! Nodes always keep their children ordered by the smallest terminal index
//! in each child's yield, so structural equality and the bracket
//! serialization are both canonical.

use std::fmt;

use crate::{Error, Result};

mod bracket;
mod generate;
mod heads;

pub use bracket::{emit_discbracket, parse_discbracket, read_treebank};
pub use generate::generate_random_tree;
pub(crate) use heads::check_heads;
pub use heads::{assign_heads, extract_spines, Direction, HeadRule, HeadRuleSet, Spine};

/// POS tag used when the input does not provide one.
pub const NO_POS: &str = "_";

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Token {
    pub index: usize,
    pub form: String,
    pub pos: String,
}

impl Token {
    pub fn new(index: usize, form: impl Into<String>, pos: impl Into<String>) -> Self {
        Token {
            index,
            form: form.into(),
            pos: pos.into(),
        }
    }

    pub fn has_pos(&self) -> bool {
        self.pos != NO_POS
    }
}

/// A child of a constituent: either a nested constituent or a terminal
/// index into the sentence.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Child {
    Node(ConstituentNode),
    Terminal(usize),
}

impl Child {
    /// Smallest terminal index dominated by this child.
    pub fn min_terminal(&self) -> usize {
        match self {
            Child::Node(node) => node.yield_set[0],
            Child::Terminal(i) => *i,
        }
    }

    pub fn terminals(&self) -> Vec<usize> {
        match self {
            Child::Node(node) => node.yield_set.clone(),
            Child::Terminal(i) => vec![*i],
        }
    }

    /// Head word: the terminal itself, or the node's assigned head.
    pub fn head(&self) -> Option<usize> {
        match self {
            Child::Node(node) => node.head,
            Child::Terminal(i) => Some(*i),
        }
    }

    pub fn as_node(&self) -> Option<&ConstituentNode> {
        match self {
            Child::Node(node) => Some(node),
            Child::Terminal(_) => None,
        }
    }
}

/// Internal node `(X, C, w_h)`: label, ordered children and optional head.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ConstituentNode {
    label: String,
    children: Vec<Child>,
    head: Option<usize>,
    // Sorted yield, cached at construction.
    yield_set: Vec<usize>,
}

impl ConstituentNode {
    /// Build a node, sorting the children by their smallest terminal.
    ///
    /// Fails if there are no children or if two children share a terminal.
    pub fn new(label: impl Into<String>, mut children: Vec<Child>) -> Result<Self> {
        let label = label.into();
        if children.is_empty() {
            return Err(Error::Structure(format!("node `{label}` has no children")));
        }
        children.sort_by_key(Child::min_terminal);

        let mut yield_set: Vec<usize> = children.iter().flat_map(Child::terminals).collect();
        let total = yield_set.len();
        yield_set.sort_unstable();
        yield_set.dedup();
        if yield_set.len() != total {
            return Err(Error::Structure(format!(
                "children of `{label}` have overlapping yields"
            )));
        }

        Ok(ConstituentNode {
            label,
            children,
            head: None,
            yield_set,
        })
    }

    pub(crate) fn with_head(mut self, head: Option<usize>) -> Self {
        self.head = head;
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn children(&self) -> &[Child] {
        &self.children
    }

    pub fn head(&self) -> Option<usize> {
        self.head
    }

    /// Sorted terminal indices dominated by this node.
    pub fn yield_set(&self) -> &[usize] {
        &self.yield_set
    }

    /// A node is discontinuous when its yield is not an integer interval.
    pub fn is_discontinuous(&self) -> bool {
        is_gapped(&self.yield_set)
    }

    /// Pre-order traversal over this node and all nested nodes.
    pub fn descendants(&self) -> Vec<&ConstituentNode> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            out.push(node);
            for child in node.children.iter().rev() {
                if let Child::Node(n) = child {
                    stack.push(n);
                }
            }
        }
        out
    }
}

/// True iff the sorted, duplicate-free index set is not an interval.
pub fn is_gapped(sorted: &[usize]) -> bool {
    match (sorted.first(), sorted.last()) {
        (Some(lo), Some(hi)) => hi - lo + 1 != sorted.len(),
        _ => false,
    }
}

pub fn is_discontinuous(node: &ConstituentNode) -> bool {
    node.is_discontinuous()
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ConstituentTree {
    tokens: Vec<Token>,
    root: Child,
}

impl ConstituentTree {
    /// Checks that tokens are indexed `0..n` and that the root yield covers
    /// exactly those indices.
    pub fn new(tokens: Vec<Token>, root: Child) -> Result<Self> {
        for (i, tok) in tokens.iter().enumerate() {
            if tok.index != i {
                return Err(Error::Structure(format!(
                    "token at position {i} carries index {}",
                    tok.index
                )));
            }
        }
        let terminals = root.terminals();
        if terminals.len() != tokens.len() || terminals.iter().enumerate().any(|(i, &t)| i != t) {
            return Err(Error::Structure(format!(
                "root yield does not cover terminals 0..{}",
                tokens.len()
            )));
        }
        Ok(ConstituentTree { tokens, root })
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn root(&self) -> &Child {
        &self.root
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// All internal nodes in pre-order.
    pub fn nodes(&self) -> Vec<&ConstituentNode> {
        match &self.root {
            Child::Node(node) => node.descendants(),
            Child::Terminal(_) => Vec::new(),
        }
    }

    pub fn has_discontinuity(&self) -> bool {
        self.nodes().iter().any(|n| n.is_discontinuous())
    }

    /// Replace the token annotation, keeping the structure.
    pub fn with_tokens(&self, tokens: Vec<Token>) -> Result<Self> {
        if tokens.len() != self.tokens.len() {
            return Err(Error::Alignment(format!(
                "{} tokens supplied for a tree over {}",
                tokens.len(),
                self.tokens.len()
            )));
        }
        ConstituentTree::new(tokens, self.root.clone())
    }

    /// Remove every unary node bottom-up, keeping the child in its place.
    pub fn strip_unaries(&self) -> ConstituentTree {
        strip_unaries(self).0
    }

    /// Drop all head annotations.
    pub fn without_heads(&self) -> ConstituentTree {
        fn clear(child: &Child) -> Child {
            match child {
                Child::Terminal(i) => Child::Terminal(*i),
                Child::Node(node) => Child::Node(ConstituentNode {
                    label: node.label.clone(),
                    children: node.children.iter().map(clear).collect(),
                    head: None,
                    yield_set: node.yield_set.clone(),
                }),
            }
        }
        ConstituentTree {
            tokens: self.tokens.clone(),
            root: clear(&self.root),
        }
    }
}

impl fmt::Display for ConstituentTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&emit_discbracket(self))
    }
}

/// Delete every node with exactly one child, promoting the child.
/// Returns the stripped tree and the number of deleted nodes.
pub fn strip_unaries(tree: &ConstituentTree) -> (ConstituentTree, usize) {
    fn strip(child: &Child, removed: &mut usize) -> Child {
        match child {
            Child::Terminal(i) => Child::Terminal(*i),
            Child::Node(node) => {
                let mut children: Vec<Child> =
                    node.children.iter().map(|c| strip(c, removed)).collect();
                if children.len() == 1 {
                    *removed += 1;
                    children.pop().unwrap()
                } else {
                    Child::Node(ConstituentNode {
                        label: node.label.clone(),
                        children,
                        head: node.head,
                        yield_set: node.yield_set.clone(),
                    })
                }
            }
        }
    }

    let mut removed = 0;
    let root = strip(&tree.root, &mut removed);
    (
        ConstituentTree {
            tokens: tree.tokens.clone(),
            root,
        },
        removed,
    )
}

/// True iff no internal node has exactly one child.
pub fn is_unaryless(tree: &ConstituentTree) -> bool {
    tree.nodes().iter().all(|n| n.children.len() != 1)
}
