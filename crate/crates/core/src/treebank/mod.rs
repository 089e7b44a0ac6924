//! Bracketed phrase-structure trees: reading, writing and transforms.
//!
//! Leaves are bare word tokens. A part-of-speech tag is represented the way
//! treebanks write it, as a node whose only child is a leaf (`(NN door)`);
//! such nodes are called preterminals here. Keeping a single representation
//! makes `parse_bracketed(serialize(t)) == t` hold for every tree.

mod coord;
mod patterns;

pub use coord::{is_coordinator_child, is_np_label, to_coord_annotation, COORD_LABEL};
pub use patterns::{
    count_agreement_patterns, AgreementPatternTable, Diagnostics, EnglishTagger, FeatureTagger,
    LexiconTagger, PatternMode, PatternRow, WordClass,
};

use std::fmt;
use std::io::{BufRead, Write};

use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Tree {
    Node { label: String, children: Vec<Tree> },
    Leaf(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("unbalanced parentheses at offset {offset}")]
    Unbalanced { offset: usize },
    #[error("empty label at offset {offset}")]
    EmptyLabel { offset: usize },
    #[error("node without children at offset {offset}")]
    NoChildren { offset: usize },
    #[error("expected `(` at offset {offset}")]
    ExpectedOpen { offset: usize },
    #[error("trailing input at offset {offset}")]
    TrailingGarbage { offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match *self {
            ParseError::Unbalanced { offset }
            | ParseError::EmptyLabel { offset }
            | ParseError::NoChildren { offset }
            | ParseError::ExpectedOpen { offset }
            | ParseError::TrailingGarbage { offset } => offset,
        }
    }
}

#[derive(Debug, Error)]
pub enum TreebankError {
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: ParseError,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Tree {
    pub fn node(label: impl Into<String>, children: Vec<Tree>) -> Tree {
        Tree::Node {
            label: label.into(),
            children,
        }
    }

    pub fn leaf(word: impl Into<String>) -> Tree {
        Tree::Leaf(word.into())
    }

    /// Preterminal node `(tag word)`.
    pub fn tagged(tag: impl Into<String>, word: impl Into<String>) -> Tree {
        Tree::node(tag, vec![Tree::leaf(word)])
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Tree::Leaf(_))
    }

    /// Node label, or `None` for a leaf.
    pub fn label(&self) -> Option<&str> {
        match self {
            Tree::Node { label, .. } => Some(label),
            Tree::Leaf(_) => None,
        }
    }

    pub fn children(&self) -> &[Tree] {
        match self {
            Tree::Node { children, .. } => children,
            Tree::Leaf(_) => &[],
        }
    }

    /// `(tag, word)` if this node is a preterminal.
    pub fn as_preterminal(&self) -> Option<(&str, &str)> {
        match self {
            Tree::Node { label, children } => match children.as_slice() {
                [Tree::Leaf(word)] => Some((label, word)),
                _ => None,
            },
            Tree::Leaf(_) => None,
        }
    }

    /// Word sequence in left-to-right order.
    pub fn words(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_words(&mut out);
        out
    }

    fn collect_words<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Tree::Leaf(w) => out.push(w),
            Tree::Node { children, .. } => children.iter().for_each(|c| c.collect_words(out)),
        }
    }

    /// Replaces every preterminal by its bare word.
    pub fn strip_preterminals(&self) -> Tree {
        match self {
            Tree::Leaf(w) => Tree::Leaf(w.clone()),
            Tree::Node { label, children } => match children.as_slice() {
                [Tree::Leaf(w)] => Tree::Leaf(w.clone()),
                _ => Tree::node(
                    label.clone(),
                    children.iter().map(Tree::strip_preterminals).collect(),
                ),
            },
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Tree::Leaf(_) => 0,
            Tree::Node { children, .. } => {
                1 + children.iter().map(Tree::depth).max().unwrap_or(0)
            }
        }
    }

    /// Pre-order iterator over all nodes and leaves.
    pub fn iter(&self) -> impl Iterator<Item = &Tree> {
        let mut stack = vec![self];
        std::iter::from_fn(move || {
            let next = stack.pop()?;
            stack.extend(next.children().iter().rev());
            Some(next)
        })
    }

    pub fn serialize(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tree::Leaf(w) => f.write_str(w),
            Tree::Node { label, children } => {
                write!(f, "({label}")?;
                for c in children {
                    write!(f, " {c}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug)]
enum Token<'a> {
    Open(usize),
    Close(usize),
    Atom(&'a str, usize),
    End(usize),
}

struct Lexer<'a> {
    text: &'a str,
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    // character offset of the next unread char
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            text,
            chars: text.char_indices().peekable(),
            pos: 0,
        }
    }

    fn next_token(&mut self) -> Token<'a> {
        while let Some(&(_, c)) = self.chars.peek() {
            if !c.is_whitespace() {
                break;
            }
            self.chars.next();
            self.pos += 1;
        }
        let Some((start, c)) = self.chars.next() else {
            return Token::End(self.pos);
        };
        let offset = self.pos;
        self.pos += 1;
        match c {
            '(' => Token::Open(offset),
            ')' => Token::Close(offset),
            _ => {
                let mut end = start + c.len_utf8();
                while let Some(&(i, c)) = self.chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' {
                        break;
                    }
                    end = i + c.len_utf8();
                    self.chars.next();
                    self.pos += 1;
                }
                Token::Atom(&self.text[start..end], offset)
            }
        }
    }
}

/// Parses one bracketed tree. Offsets in errors count characters, not bytes.
pub fn parse_bracketed(text: &str) -> Result<Tree, ParseError> {
    let mut lexer = Lexer::new(text);
    let tree = match lexer.next_token() {
        Token::Open(_) => parse_node(&mut lexer)?,
        Token::Close(offset) => return Err(ParseError::Unbalanced { offset }),
        Token::Atom(_, offset) | Token::End(offset) => {
            return Err(ParseError::ExpectedOpen { offset })
        }
    };
    match lexer.next_token() {
        Token::End(_) => Ok(tree),
        Token::Close(offset) => Err(ParseError::Unbalanced { offset }),
        Token::Open(offset) | Token::Atom(_, offset) => Err(ParseError::TrailingGarbage { offset }),
    }
}

// Called after the opening parenthesis has been consumed.
fn parse_node(lexer: &mut Lexer<'_>) -> Result<Tree, ParseError> {
    let label = match lexer.next_token() {
        Token::Atom(label, _) => label.to_string(),
        Token::Open(offset) | Token::Close(offset) => {
            return Err(ParseError::EmptyLabel { offset })
        }
        Token::End(offset) => return Err(ParseError::Unbalanced { offset }),
    };
    let mut children = Vec::new();
    loop {
        match lexer.next_token() {
            Token::Atom(word, _) => children.push(Tree::leaf(word)),
            Token::Open(_) => children.push(parse_node(lexer)?),
            Token::Close(offset) => {
                if children.is_empty() {
                    return Err(ParseError::NoChildren { offset });
                }
                return Ok(Tree::Node { label, children });
            }
            Token::End(offset) => return Err(ParseError::Unbalanced { offset }),
        }
    }
}

pub fn serialize(tree: &Tree) -> String {
    tree.to_string()
}

/// Reads a treebank: one tree per line, blank lines and `#` comments skipped.
pub fn read_treebank<R: BufRead>(reader: R) -> Result<Vec<Tree>, TreebankError> {
    let mut trees = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tree = parse_bracketed(trimmed).map_err(|source| TreebankError::Parse {
            line: i + 1,
            source,
        })?;
        trees.push(tree);
    }
    Ok(trees)
}

pub fn write_treebank<W: Write>(mut writer: W, trees: &[Tree]) -> std::io::Result<()> {
    for t in trees {
        writeln!(writer, "{t}")?;
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod strategies {
    use super::Tree;
    use proptest::prelude::*;

    fn word() -> impl Strategy<Value = String> {
        prop::sample::select(vec!["the", "door", "doors", "and", "window", "é", "co-op", ".", "3"])
            .prop_map(str::to_string)
    }

    fn label() -> impl Strategy<Value = String> {
        prop::sample::select(vec!["S", "NP", "VP", "PP", "NP-COORD", "SBAR"]).prop_map(str::to_string)
    }

    /// Arbitrary trees whose root is an internal node.
    pub fn tree() -> impl Strategy<Value = Tree> {
        let leaf = word().prop_map(Tree::Leaf);
        let inner = leaf.prop_recursive(4, 24, 4, |inner| {
            (label(), prop::collection::vec(inner, 1..4))
                .prop_map(|(l, children)| Tree::node(l, children))
        });
        (label(), prop::collection::vec(inner, 1..4)).prop_map(|(l, c)| Tree::node(l, c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_simple_tree() {
        let t = parse_bracketed("(S (NP (DT the) (NN door)))").unwrap();
        assert_eq!(t.label(), Some("S"));
        assert_eq!(t.words(), vec!["the", "door"]);
        assert_eq!(t.children()[0].children()[1].as_preterminal(), Some(("NN", "door")));
    }

    #[test]
    fn serializes_canonically() {
        let t = Tree::node("NP", vec![Tree::tagged("NN", "door")]);
        assert_eq!(serialize(&t), "(NP (NN door))");
        let messy = parse_bracketed("  (NP\t(NN   door) )\n").unwrap();
        assert_eq!(serialize(&messy), "(NP (NN door))");
    }

    #[test]
    fn bare_leaf_convention() {
        let t = Tree::node(
            "NP",
            vec![
                Tree::node("NP", vec![Tree::leaf("English")]),
                Tree::leaf("and"),
                Tree::node("NP", vec![Tree::leaf("comparative"), Tree::leaf("literature")]),
            ],
        );
        let s = serialize(&t);
        assert_eq!(s, "(NP (NP English) and (NP comparative literature))");
        assert_eq!(parse_bracketed(&s).unwrap(), t);
    }

    #[test]
    fn unbalanced_reports_end_offset() {
        assert_eq!(
            parse_bracketed("(S (NP the"),
            Err(ParseError::Unbalanced { offset: 10 })
        );
        assert_eq!(parse_bracketed(")"), Err(ParseError::Unbalanced { offset: 0 }));
        assert_eq!(
            parse_bracketed("(S a))"),
            Err(ParseError::Unbalanced { offset: 5 })
        );
    }

    #[test]
    fn other_errors() {
        assert_eq!(parse_bracketed("(S a) b"), Err(ParseError::TrailingGarbage { offset: 6 }));
        assert_eq!(parse_bracketed("( (S a))"), Err(ParseError::EmptyLabel { offset: 2 }));
        assert_eq!(parse_bracketed("()"), Err(ParseError::EmptyLabel { offset: 1 }));
        assert_eq!(parse_bracketed("(S)"), Err(ParseError::NoChildren { offset: 2 }));
        assert_eq!(parse_bracketed(""), Err(ParseError::ExpectedOpen { offset: 0 }));
        assert_eq!(parse_bracketed("door"), Err(ParseError::ExpectedOpen { offset: 0 }));
    }

    #[test]
    fn offsets_count_characters() {
        // "é" is two bytes but one character
        assert_eq!(
            parse_bracketed("(S é (NP"),
            Err(ParseError::Unbalanced { offset: 8 })
        );
    }

    #[test]
    fn strips_preterminals() {
        let t = parse_bracketed("(S (NP (DT the) (NN door)) (VP (VBZ opens)))").unwrap();
        assert_eq!(
            t.strip_preterminals().serialize(),
            "(S (NP the door) (VP opens))"
        );
    }

    #[test]
    fn treebank_file_skips_comments() {
        let text = "# header\n(S a)\n\n  # another\n(S (NP b) c)\n";
        let trees = read_treebank(text.as_bytes()).unwrap();
        assert_eq!(trees.len(), 2);
        let mut out = Vec::new();
        write_treebank(&mut out, &trees).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "(S a)\n(S (NP b) c)\n");

        let err = read_treebank("(S a)\n(S (b\n".as_bytes()).unwrap_err();
        assert!(matches!(err, TreebankError::Parse { line: 2, .. }));
    }

    proptest! {
        #[test]
        fn round_trip_identity(t in strategies::tree()) {
            let s = serialize(&t);
            prop_assert_eq!(parse_bracketed(&s).unwrap(), t);
        }

        #[test]
        fn preorder_visits_every_leaf(t in strategies::tree()) {
            let n = t.iter().filter(|n| n.is_leaf()).count();
            prop_assert_eq!(n, t.words().len());
        }
    }
}
