//! Indexed-terminal bracket format ("discbracket").
//!
//! `(VROOT (S (NP 0=Es (NP 2=nichts 3=Interessantes)) 1=kam) 4=.)`
//!
//! Terminals are written `index=form/pos`; the `/pos` suffix is optional.
//! Parentheses inside forms and tags are escaped as `-LRB-` / `-RRB-`.
//! A tree whose root is a bare terminal is written as the terminal alone.

use std::collections::BTreeMap;
use std::io::BufRead;

use super::{Child, ConstituentNode, ConstituentTree, Token, NO_POS};
use crate::{Error, Result};

pub fn parse_discbracket(line: &str) -> Result<ConstituentTree> {
    let chars: Vec<char> = line.chars().collect();
    let mut parser = Parser {
        chars: &chars,
        pos: 0,
        terminals: BTreeMap::new(),
    };
    parser.skip_ws();
    if parser.pos == chars.len() {
        return Err(Error::format(0, "empty tree"));
    }
    let root = parser.item()?;
    parser.skip_ws();
    if parser.pos != chars.len() {
        return Err(Error::format(parser.pos, "trailing input after tree"));
    }

    let n = parser.terminals.len();
    let mut tokens = Vec::with_capacity(n);
    for (expected, (index, (form, pos, _))) in parser.terminals.into_iter().enumerate() {
        if index != expected {
            return Err(Error::format(
                0,
                format!("terminal index {expected} is missing (indices must cover 0..{n})"),
            ));
        }
        tokens.push(Token::new(index, form, pos));
    }
    ConstituentTree::new(tokens, root)
}

/// Canonical serialization; children are already ordered by their
/// smallest terminal.
pub fn emit_discbracket(tree: &ConstituentTree) -> String {
    let mut out = String::new();
    emit_child(tree.root(), tree.tokens(), &mut out);
    out
}

/// Read a treebank: one tree per line, blank lines ignored. Errors carry
/// the 1-based line number.
pub fn read_treebank<R: BufRead>(reader: R) -> Result<Vec<ConstituentTree>> {
    let mut trees = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        trees.push(parse_discbracket(&line).map_err(|e| e.at_line(lineno + 1))?);
    }
    Ok(trees)
}

fn emit_child(child: &Child, tokens: &[Token], out: &mut String) {
    match child {
        Child::Terminal(i) => {
            let tok = &tokens[*i];
            let form = escape(&tok.form);
            out.push_str(&format!("{i}={form}"));
            if tok.pos != NO_POS || form.contains('/') {
                out.push('/');
                out.push_str(&escape(&tok.pos));
            }
        }
        Child::Node(node) => {
            out.push('(');
            out.push_str(&escape(node.label()));
            for c in node.children() {
                out.push(' ');
                emit_child(c, tokens, out);
            }
            out.push(')');
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('(', "-LRB-").replace(')', "-RRB-")
}

fn unescape(s: &str) -> String {
    s.replace("-LRB-", "(").replace("-RRB-", ")")
}

struct Parser<'a> {
    chars: &'a [char],
    pos: usize,
    // index -> (form, pos, column)
    terminals: BTreeMap<usize, (String, String, usize)>,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn word(&mut self) -> String {
        let start = self.pos;
        while self.pos < self.chars.len() {
            let c = self.chars[self.pos];
            if c.is_whitespace() || c == '(' || c == ')' {
                break;
            }
            self.pos += 1;
        }
        self.chars[start..self.pos].iter().collect()
    }

    fn item(&mut self) -> Result<Child> {
        match self.chars.get(self.pos) {
            Some('(') => self.node(),
            Some(')') => Err(Error::format(self.pos, "unbalanced `)`")),
            Some(_) => self.terminal(),
            None => Err(Error::format(self.pos, "unexpected end of input")),
        }
    }

    fn node(&mut self) -> Result<Child> {
        let open = self.pos;
        self.pos += 1;
        let label = self.word();
        if label.is_empty() {
            return Err(Error::format(self.pos, "missing node label"));
        }
        let mut children = Vec::new();
        loop {
            self.skip_ws();
            match self.chars.get(self.pos) {
                Some(')') => {
                    self.pos += 1;
                    break;
                }
                Some(_) => children.push(self.item()?),
                None => {
                    return Err(Error::format(
                        open,
                        format!("unbalanced `(` opening node `{label}`"),
                    ))
                }
            }
        }
        if children.is_empty() {
            return Err(Error::format(open, format!("empty internal node `{label}`")));
        }
        let node = ConstituentNode::new(unescape(&label), children)
            .map_err(|e| Error::format(open, e.to_string()))?;
        Ok(Child::Node(node))
    }

    fn terminal(&mut self) -> Result<Child> {
        let column = self.pos;
        let text = self.word();
        let (index, rest) = text
            .split_once('=')
            .ok_or_else(|| Error::format(column, format!("terminal `{text}` lacks `index=`")))?;
        let index: usize = index
            .parse()
            .map_err(|_| Error::format(column, format!("bad terminal index in `{text}`")))?;
        let (form, pos) = match rest.rsplit_once('/') {
            Some((form, pos)) if !form.is_empty() && !pos.is_empty() => (form, pos),
            _ => (rest, NO_POS),
        };
        if form.is_empty() {
            return Err(Error::format(column, format!("terminal `{text}` has no form")));
        }
        if let Some((_, _, first)) = self.terminals.get(&index) {
            return Err(Error::format(
                column,
                format!("duplicate terminal index {index} (first seen at column {first})"),
            ));
        }
        self.terminals
            .insert(index, (unescape(form), unescape(pos), column));
        Ok(Child::Terminal(index))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIGURE1: &str = "(VROOT (S (NP 0=Es (NP 2=nichts 3=Interessantes)) 1=kam) 4=.)";

    #[test]
    fn figure1_yields() {
        let t = parse_discbracket(FIGURE1).unwrap();
        assert_eq!(t.len(), 5);
        assert_eq!(t.tokens()[1].form, "kam");
        assert_eq!(t.tokens()[1].pos, NO_POS);
        let labels: Vec<_> = t
            .nodes()
            .iter()
            .map(|n| (n.label().to_string(), n.yield_set().to_vec()))
            .collect();
        assert_eq!(
            labels,
            vec![
                ("VROOT".to_string(), vec![0, 1, 2, 3, 4]),
                ("S".to_string(), vec![0, 1, 2, 3]),
                ("NP".to_string(), vec![0, 2, 3]),
                ("NP".to_string(), vec![2, 3]),
            ]
        );
        assert_eq!(emit_discbracket(&t), FIGURE1);
    }

    #[test]
    fn minimal_tree() {
        let t = parse_discbracket("(S 0=a)").unwrap();
        assert_eq!(t.nodes()[0].yield_set(), &[0]);
        assert_eq!(emit_discbracket(&t), "(S 0=a)");
    }

    #[test]
    fn gapped_child() {
        let t = parse_discbracket("(S (A 0=x 2=z) (B 1=y))").unwrap();
        let a = t.nodes()[1];
        assert_eq!((a.label(), a.yield_set()), ("A", &[0, 2][..]));
        let b = t.nodes()[2];
        assert_eq!((b.label(), b.yield_set()), ("B", &[1][..]));
    }

    #[test]
    fn canonical_child_order() {
        let t = parse_discbracket("(S (B 1=y) (A 2=z 0=x))").unwrap();
        assert_eq!(emit_discbracket(&t), "(S (A 0=x 2=z) (B 1=y))");
    }

    #[test]
    fn pos_and_escapes() {
        let line = "(S 0=Haus/NN 1=-LRB-/$-LRB- 2=a/b/_)";
        let t = parse_discbracket(line).unwrap();
        assert_eq!(t.tokens()[0].pos, "NN");
        assert_eq!(t.tokens()[1].form, "(");
        assert_eq!(t.tokens()[1].pos, "$(");
        assert_eq!(t.tokens()[2].form, "a/b");
        assert_eq!(emit_discbracket(&t), line);
    }

    #[test]
    fn bare_terminal() {
        let t = parse_discbracket("0=a/NN").unwrap();
        assert_eq!(t.root(), &Child::Terminal(0));
        assert_eq!(emit_discbracket(&t), "0=a/NN");
    }

    #[test]
    fn format_errors() {
        for bad in [
            "(S 0=a",
            "(S 0=a))",
            "(S 0=a 0=b)",
            "(S 0=a 2=b)",
            "(S () 0=a)",
            "(S (NP) 0=a)",
            "(S a)",
            "",
            ")",
        ] {
            let err = parse_discbracket(bad).unwrap_err();
            assert!(matches!(err, Error::Format { .. }), "{bad}: {err}");
        }
    }

    #[test]
    fn treebank_line_numbers() {
        let text = "(S 0=a 1=b)\n\n(S 0=a\n";
        match read_treebank(text.as_bytes()) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
