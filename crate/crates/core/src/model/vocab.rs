use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::encoding::{AugmentedDependencyTree, ROOT_LABEL};
use crate::trees::Token;

pub const PAD: usize = 0;
pub const UNKNOWN: usize = 1;

/// Dense string-to-id table. When `reserved` is set, ids 0 and 1 are the
/// padding and unknown entries and real items start at 2.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "SymbolsRepr", into = "SymbolsRepr")]
pub struct Symbols {
    items: Vec<String>,
    reserved: bool,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct SymbolsRepr {
    items: Vec<String>,
    reserved: bool,
}

impl From<SymbolsRepr> for Symbols {
    fn from(repr: SymbolsRepr) -> Self {
        let index = repr.items.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Symbols {
            items: repr.items,
            reserved: repr.reserved,
            index,
        }
    }
}

impl From<Symbols> for SymbolsRepr {
    fn from(s: Symbols) -> Self {
        SymbolsRepr {
            items: s.items,
            reserved: s.reserved,
        }
    }
}

impl Symbols {
    fn build(items: impl IntoIterator<Item = String>, reserved: bool) -> Self {
        let mut all = Vec::new();
        if reserved {
            all.push("<pad>".to_string());
            all.push("<unk>".to_string());
        }
        let unique: BTreeSet<String> = items.into_iter().collect();
        all.extend(unique);
        SymbolsRepr {
            items: all,
            reserved,
        }
        .into()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Id of a known item. Reserved entries are never returned for lookups.
    pub fn get(&self, item: &str) -> Option<usize> {
        self.index
            .get(item)
            .copied()
            .filter(|&i| !self.reserved || i > UNKNOWN)
    }

    /// Id of `item`, falling back to the unknown entry.
    pub fn id(&self, item: &str) -> usize {
        self.get(item).unwrap_or(UNKNOWN)
    }

    pub fn item(&self, id: usize) -> &str {
        &self.items[id]
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }
}

/// Word, character, POS and label inventories.
///
/// Words are stored lowercased. Labels carry no reserved entries and always
/// include `root`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub words: Symbols,
    pub chars: Symbols,
    pub pos: Symbols,
    pub labels: Symbols,
}

impl Vocabulary {
    /// Collect inventories from training trees. `extra_words` (for example
    /// the entries of a pretrained embedding file) are added to the word
    /// table.
    pub fn build<'a>(
        corpus: impl IntoIterator<Item = &'a AugmentedDependencyTree>,
        extra_words: impl IntoIterator<Item = String>,
    ) -> Self {
        let mut words = Vec::new();
        let mut chars = Vec::new();
        let mut pos = Vec::new();
        let mut labels = vec![ROOT_LABEL.to_string()];
        for dep in corpus {
            for t in dep.tokens() {
                words.push(t.form.to_lowercase());
                chars.extend(t.form.chars().map(String::from));
                pos.push(t.pos.clone());
            }
            labels.extend(dep.labels().iter().map(|l| l.to_string()));
        }
        words.extend(extra_words.into_iter().map(|w| w.to_lowercase()));
        Vocabulary {
            words: Symbols::build(words, true),
            chars: Symbols::build(chars, true),
            pos: Symbols::build(pos, true),
            labels: Symbols::build(labels, false),
        }
    }

    pub fn word_id(&self, token: &Token) -> usize {
        self.words.id(&token.form.to_lowercase())
    }

    pub fn char_ids(&self, token: &Token) -> Vec<usize> {
        let mut buf = [0u8; 4];
        token
            .form
            .chars()
            .map(|c| self.chars.id(c.encode_utf8(&mut buf)))
            .collect()
    }

    pub fn pos_id(&self, token: &Token) -> usize {
        self.pos.id(&token.pos)
    }
}
