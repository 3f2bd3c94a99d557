//! Newick reading and canonical writing.
//!
//! The parser is iterative, so nesting depth is bounded only by memory.
//! It accepts quoted labels (`'a b'`, with `''` for a literal quote),
//! skips bracket comments, and keeps multifurcations and missing lengths in
//! the data model so that later validation can report them.
//!
//! Canonical output orders children by the smallest tip label below them,
//! writes lengths rounded to 12 significant digits in their shortest
//! round-trip form, and ends with `;`.

use super::{Node, SampleTree};
use crate::error::{Error, Result};

struct Cursor<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn fail<T>(&self, expected: &str) -> Result<T> {
        Err(Error::Parse {
            offset: self.pos,
            expected: expected.to_string(),
        })
    }

    /// Skips whitespace and `[...]` comments.
    fn skip_trivia(&mut self) -> Result<()> {
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_whitespace() => self.pos += 1,
                Some(b'[') => {
                    let start = self.pos;
                    match self.src[start..].iter().position(|&c| c == b']') {
                        Some(k) => self.pos = start + k + 1,
                        None => return self.fail("']' closing comment"),
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn label(&mut self) -> Result<Option<String>> {
        self.skip_trivia()?;
        match self.peek() {
            Some(b'\'') => {
                self.pos += 1;
                let mut out = Vec::new();
                loop {
                    match self.peek() {
                        None => return self.fail("closing quote"),
                        Some(b'\'') if self.src.get(self.pos + 1) == Some(&b'\'') => {
                            out.push(b'\'');
                            self.pos += 2;
                        }
                        Some(b'\'') => {
                            self.pos += 1;
                            break;
                        }
                        Some(c) => {
                            out.push(c);
                            self.pos += 1;
                        }
                    }
                }
                Ok(Some(String::from_utf8_lossy(&out).into_owned()))
            }
            _ => {
                let start = self.pos;
                while let Some(c) = self.peek() {
                    if c.is_ascii_whitespace() || b"()[]':;,".contains(&c) {
                        break;
                    }
                    self.pos += 1;
                }
                if self.pos == start {
                    Ok(None)
                } else {
                    Ok(Some(
                        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned(),
                    ))
                }
            }
        }
    }

    fn length(&mut self) -> Result<Option<f64>> {
        self.skip_trivia()?;
        if self.peek() != Some(b':') {
            return Ok(None);
        }
        self.pos += 1;
        self.skip_trivia()?;
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || b"+-.eE".contains(&c) {
                self.pos += 1;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        match text.parse::<f64>() {
            Ok(x) if x.is_finite() && x >= 0.0 => Ok(Some(x)),
            _ => {
                self.pos = start;
                self.fail("non-negative branch length after ':'")
            }
        }
    }

    fn label_and_length(&mut self, node: &mut Node) -> Result<()> {
        node.label = self.label()?;
        node.length = self.length()?;
        Ok(())
    }

    /// Parses one tree ending in `;`.
    fn tree(&mut self) -> Result<SampleTree> {
        let mut nodes: Vec<Node> = Vec::new();
        let mut open: Vec<usize> = Vec::new();

        let add = |nodes: &mut Vec<Node>, parent: Option<usize>| {
            let id = nodes.len();
            nodes.push(Node::new(parent));
            if let Some(p) = parent {
                nodes[p].children.push(id);
            }
            id
        };

        'start: loop {
            // at the beginning of a subtree
            self.skip_trivia()?;
            if self.peek() == Some(b'(') {
                self.pos += 1;
                let id = add(&mut nodes, open.last().copied());
                open.push(id);
                continue 'start;
            }
            let id = add(&mut nodes, open.last().copied());
            self.label_and_length(&mut nodes[id])?;

            // after a complete subtree
            loop {
                self.skip_trivia()?;
                match self.peek() {
                    Some(b',') if !open.is_empty() => {
                        self.pos += 1;
                        continue 'start;
                    }
                    Some(b')') if !open.is_empty() => {
                        self.pos += 1;
                        let closed = open.pop().expect("checked non-empty");
                        self.label_and_length(&mut nodes[closed])?;
                    }
                    Some(b';') if open.is_empty() => {
                        self.pos += 1;
                        return Ok(SampleTree {
                            nodes,
                            root: 0,
                            horizon: None,
                        });
                    }
                    _ if open.is_empty() => return self.fail("';'"),
                    _ => return self.fail("',' or ')'"),
                }
            }
        }
    }
}

/// Parses a single Newick tree. Trailing whitespace is allowed, further
/// trees are not.
pub fn parse_newick(text: &str) -> Result<SampleTree> {
    let mut cur = Cursor {
        src: text.as_bytes(),
        pos: 0,
    };
    cur.skip_trivia()?;
    if cur.peek().is_none() {
        return cur.fail("a tree");
    }
    let tree = cur.tree()?;
    cur.skip_trivia()?;
    if cur.peek().is_some() {
        return cur.fail("end of input");
    }
    Ok(tree)
}

/// Parses a sequence of `;`-terminated trees.
pub fn parse_newick_many(text: &str) -> Result<Vec<SampleTree>> {
    let mut cur = Cursor {
        src: text.as_bytes(),
        pos: 0,
    };
    let mut out = Vec::new();
    loop {
        cur.skip_trivia()?;
        if cur.peek().is_none() {
            break;
        }
        out.push(cur.tree()?);
    }
    if out.is_empty() {
        return cur.fail("a tree");
    }
    Ok(out)
}

fn format_length(x: f64) -> String {
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

fn format_label(label: &str) -> String {
    let plain = !label.is_empty()
        && label
            .bytes()
            .all(|c| !(c.is_ascii_whitespace() || b"()[]':;,".contains(&c)));
    if plain {
        label.to_string()
    } else {
        format!("'{}'", label.replace('\'', "''"))
    }
}

pub(super) fn serialize(tree: &SampleTree) -> String {
    let nodes = &tree.nodes;

    // smallest tip label below each node, for canonical child order
    let mut key: Vec<Option<&str>> = vec![None; nodes.len()];
    for id in tree.preorder().into_iter().rev() {
        key[id] = if nodes[id].is_tip() {
            Some(nodes[id].label.as_deref().unwrap_or(""))
        } else {
            nodes[id].children.iter().filter_map(|&c| key[c]).min()
        };
    }

    enum Step {
        Enter(usize),
        Close(usize),
        Comma,
    }
    let mut out = String::new();
    let mut stack = vec![Step::Enter(tree.root)];
    while let Some(step) = stack.pop() {
        match step {
            Step::Comma => out.push(','),
            Step::Enter(id) if nodes[id].is_tip() => write_node_suffix(&mut out, &nodes[id]),
            Step::Enter(id) => {
                out.push('(');
                let mut kids = nodes[id].children.clone();
                kids.sort_by(|&a, &b| key[a].cmp(&key[b]));
                stack.push(Step::Close(id));
                for (k, &c) in kids.iter().enumerate().rev() {
                    stack.push(Step::Enter(c));
                    if k > 0 {
                        stack.push(Step::Comma);
                    }
                }
            }
            Step::Close(id) => {
                out.push(')');
                write_node_suffix(&mut out, &nodes[id]);
            }
        }
    }
    out.push(';');
    out
}

fn write_node_suffix(out: &mut String, node: &Node) {
    if let Some(l) = &node.label {
        out.push_str(&format_label(l));
    }
    if let Some(len) = node.length {
        out.push(':');
        out.push_str(&format_length(len));
    }
}
