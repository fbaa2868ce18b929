//! Tab-separated dependency columns: `ID FORM POS HEAD LABEL`, one token
//! per line, a blank line after each sentence. IDs are 1-based and head 0
//! is the dummy root.

use std::io::{BufRead, Write};

use super::{AugmentedDependencyTree, AugmentedLabel};
use crate::trees::Token;
use crate::{Error, Result};

pub fn write_dependencies<W: Write>(
    mut writer: W,
    trees: &[AugmentedDependencyTree],
) -> Result<()> {
    for tree in trees {
        for (i, tok) in tree.tokens().iter().enumerate() {
            writeln!(
                writer,
                "{}\t{}\t{}\t{}\t{}",
                i + 1,
                tok.form,
                tok.pos,
                tree.heads()[i],
                tree.labels()[i]
            )?;
        }
        writeln!(writer)?;
    }
    Ok(())
}

pub fn read_dependencies<R: BufRead>(reader: R) -> Result<Vec<AugmentedDependencyTree>> {
    let mut trees = Vec::new();
    let mut rows: Vec<(Token, usize, AugmentedLabel)> = Vec::new();
    let mut start_line = 1;

    let flush = |rows: &mut Vec<(Token, usize, AugmentedLabel)>,
                 trees: &mut Vec<AugmentedDependencyTree>,
                 start_line: usize|
     -> Result<()> {
        if rows.is_empty() {
            return Ok(());
        }
        let mut tokens = Vec::new();
        let mut heads = Vec::new();
        let mut labels = Vec::new();
        for (tok, head, label) in rows.drain(..) {
            tokens.push(tok);
            heads.push(head);
            labels.push(label);
        }
        let tree = AugmentedDependencyTree::new(tokens, heads, labels).map_err(|e| {
            Error::Format {
                line: start_line,
                column: 0,
                message: e.to_string(),
            }
        })?;
        trees.push(tree);
        Ok(())
    };

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            flush(&mut rows, &mut trees, start_line)?;
            continue;
        }
        if rows.is_empty() {
            start_line = lineno;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(Error::format(0, format!("expected 5 columns, found {}", fields.len()))
                .at_line(lineno));
        }
        let id: usize = fields[0]
            .parse()
            .map_err(|_| Error::format(0, format!("bad ID `{}`", fields[0])).at_line(lineno))?;
        if id != rows.len() + 1 {
            return Err(
                Error::format(0, format!("ID {id} out of sequence")).at_line(lineno)
            );
        }
        let head: usize = fields[3]
            .parse()
            .map_err(|_| Error::format(0, format!("bad HEAD `{}`", fields[3])).at_line(lineno))?;
        let label: AugmentedLabel = fields[4].parse().map_err(|e: Error| e.at_line(lineno))?;
        rows.push((Token::new(id - 1, fields[1], fields[2]), head, label));
    }
    flush(&mut rows, &mut trees, start_line)?;
    Ok(trees)
}
