//! Head rules, head assignment and spine extraction.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use super::{Child, ConstituentNode, ConstituentTree, Token};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Left,
    Right,
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(Direction::Left),
            "right" => Ok(Direction::Right),
            other => Err(Error::format(0, format!("unknown direction `{other}`"))),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Left => "left",
            Direction::Right => "right",
        })
    }
}

/// One priority group: scan direction plus categories in priority order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeadRule {
    pub direction: Direction,
    pub categories: Vec<String>,
}

/// Head-finding table.
///
/// File format, one group per line:
///
/// ```text
/// # comment
/// %default right
/// S   left  VVFIN VAFIN
/// NP  right NN NE
/// NP  right NP
/// ```
///
/// Lines for the same non-terminal are priority groups in file order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeadRuleSet {
    rules: HashMap<String, Vec<HeadRule>>,
    default_direction: Direction,
}

impl Default for HeadRuleSet {
    fn default() -> Self {
        HeadRuleSet::new(Direction::Left)
    }
}

impl HeadRuleSet {
    pub fn new(default_direction: Direction) -> Self {
        HeadRuleSet {
            rules: HashMap::new(),
            default_direction,
        }
    }

    pub fn default_direction(&self) -> Direction {
        self.default_direction
    }

    pub fn add_rule(&mut self, nonterminal: &str, direction: Direction, categories: &[&str]) {
        self.rules
            .entry(nonterminal.to_string())
            .or_default()
            .push(HeadRule {
                direction,
                categories: categories.iter().map(|c| c.to_string()).collect(),
            });
    }

    /// Priority groups for a non-terminal; unknown labels get the default
    /// direction with no categories.
    pub fn lookup(&self, nonterminal: &str) -> Vec<HeadRule> {
        match self.rules.get(nonterminal) {
            Some(groups) => groups.clone(),
            None => vec![HeadRule {
                direction: self.default_direction,
                categories: Vec::new(),
            }],
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut set = HeadRuleSet::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let at_line = |e: Error| e.at_line(lineno + 1);
            if fields[0] == "%default" {
                if fields.len() != 2 {
                    return Err(at_line(Error::format(0, "expected `%default left|right`")));
                }
                set.default_direction = fields[1].parse().map_err(at_line)?;
                continue;
            }
            if fields.len() < 2 {
                return Err(at_line(Error::format(
                    0,
                    format!("rule for `{}` lacks a direction", fields[0]),
                )));
            }
            let direction = fields[1].parse().map_err(at_line)?;
            set.add_rule(fields[0], direction, &fields[2..]);
        }
        Ok(set)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        HeadRuleSet::parse(&std::fs::read_to_string(path)?)
    }

    /// Index of the head child among `children`.
    fn select(&self, label: &str, children: &[Child], tokens: &[Token]) -> usize {
        let groups = self.lookup(label);
        fn category<'a>(child: &'a Child, tokens: &'a [Token]) -> &'a str {
            match child {
                Child::Node(node) => node.label(),
                Child::Terminal(i) => &tokens[*i].pos,
            }
        }
        let scan = |direction: Direction| -> Vec<usize> {
            match direction {
                Direction::Left => (0..children.len()).collect(),
                Direction::Right => (0..children.len()).rev().collect(),
            }
        };

        for group in &groups {
            let order = scan(group.direction);
            for cat in &group.categories {
                if let Some(&i) = order.iter().find(|&&i| category(&children[i], tokens) == cat) {
                    return i;
                }
            }
        }
        scan(groups[0].direction)[0]
    }
}

/// Set `head_index` on every internal node according to `rules`.
pub fn assign_heads(tree: &ConstituentTree, rules: &HeadRuleSet) -> ConstituentTree {
    fn visit(child: &Child, rules: &HeadRuleSet, tokens: &[Token]) -> Child {
        match child {
            Child::Terminal(i) => Child::Terminal(*i),
            Child::Node(node) => {
                let children: Vec<Child> = node
                    .children()
                    .iter()
                    .map(|c| visit(c, rules, tokens))
                    .collect();
                let winner = rules.select(node.label(), &children, tokens);
                let head = children[winner].head();
                let rebuilt = ConstituentNode::new(node.label(), children)
                    .expect("children unchanged from a valid node");
                Child::Node(rebuilt.with_head(head))
            }
        }
    }

    ConstituentTree {
        tokens: tree.tokens.clone(),
        root: visit(&tree.root, rules, &tree.tokens),
    }
}

/// Non-terminals headed by one word, lowest level first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Spine {
    pub word: usize,
    pub levels: Vec<String>,
}

/// Check that every node's head is the head of exactly one of its children.
pub(crate) fn check_heads(node: &ConstituentNode) -> Result<usize> {
    let head = node.head().ok_or_else(|| {
        Error::Structure(format!("node `{}` has no head assigned", node.label()))
    })?;
    let mut matching = 0;
    for child in node.children() {
        let child_head = match child {
            Child::Terminal(i) => *i,
            Child::Node(n) => check_heads(n)?,
        };
        if child_head == head {
            matching += 1;
        }
    }
    if matching != 1 {
        return Err(Error::Structure(format!(
            "head {head} of `{}` is not the head of exactly one child",
            node.label()
        )));
    }
    Ok(head)
}

/// One spine per word, listing the labels of the nodes it heads bottom-up.
pub fn extract_spines(tree: &ConstituentTree) -> Result<Vec<Spine>> {
    fn collect(node: &ConstituentNode, spines: &mut [Spine]) {
        for child in node.children() {
            if let Child::Node(n) = child {
                collect(n, spines);
            }
        }
        let head = node.head().expect("checked");
        spines[head].levels.push(node.label().to_string());
    }

    let mut spines: Vec<Spine> = (0..tree.len())
        .map(|word| Spine {
            word,
            levels: Vec::new(),
        })
        .collect();
    if let Child::Node(root) = tree.root() {
        check_heads(root)?;
        collect(root, &mut spines);
    }
    Ok(spines)
}
