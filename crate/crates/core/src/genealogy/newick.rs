use std::collections::HashMap;

use super::{Genealogy, Node, NodeId};
use crate::error::{Error, Result};

#[derive(Debug, Default)]
struct RawNode {
    parent: Option<usize>,
    children: Vec<usize>,
    label: Option<String>,
    length: Option<f64>,
    /// Byte offset where the node's text started, for error reporting.
    position: usize,
}

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::NewickSyntax {
            position: self.pos,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) -> Result<()> {
        loop {
            match self.text.get(self.pos) {
                Some(c) if c.is_ascii_whitespace() => self.pos += 1,
                Some(b'[') => {
                    let start = self.pos;
                    while self.text.get(self.pos).is_some_and(|&c| c != b']') {
                        self.pos += 1;
                    }
                    if self.pos >= self.text.len() {
                        self.pos = start;
                        return self.error("unterminated comment");
                    }
                    self.pos += 1;
                }
                _ => return Ok(()),
            }
        }
    }

    fn peek(&mut self) -> Result<Option<u8>> {
        self.skip_ws()?;
        Ok(self.text.get(self.pos).copied())
    }

    fn label(&mut self) -> Result<Option<String>> {
        match self.peek()? {
            Some(b'\'') => {
                let start = self.pos;
                self.pos += 1;
                let mut out = Vec::new();
                loop {
                    match self.text.get(self.pos) {
                        None => {
                            self.pos = start;
                            return self.error("unterminated quoted label");
                        }
                        Some(b'\'') if self.text.get(self.pos + 1) == Some(&b'\'') => {
                            out.push(b'\'');
                            self.pos += 2;
                        }
                        Some(b'\'') => {
                            self.pos += 1;
                            break;
                        }
                        Some(&c) => {
                            out.push(c);
                            self.pos += 1;
                        }
                    }
                }
                Ok(Some(String::from_utf8_lossy(&out).into_owned()))
            }
            Some(c) if !is_delimiter(c) => {
                let start = self.pos;
                while self
                    .text
                    .get(self.pos)
                    .is_some_and(|&c| !is_delimiter(c) && !c.is_ascii_whitespace())
                {
                    self.pos += 1;
                }
                Ok(Some(
                    String::from_utf8_lossy(&self.text[start..self.pos]).into_owned(),
                ))
            }
            _ => Ok(None),
        }
    }

    fn length(&mut self) -> Result<Option<f64>> {
        if self.peek()? != Some(b':') {
            return Ok(None);
        }
        self.pos += 1;
        self.skip_ws()?;
        let start = self.pos;
        while self
            .text
            .get(self.pos)
            .is_some_and(|&c| c.is_ascii_digit() || matches!(c, b'.' | b'-' | b'+' | b'e' | b'E'))
        {
            self.pos += 1;
        }
        let raw = std::str::from_utf8(&self.text[start..self.pos]).unwrap_or("");
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Some(v)),
            _ => {
                self.pos = start;
                self.error(format!("invalid branch length '{raw}'"))
            }
        }
    }
}

fn is_delimiter(c: u8) -> bool {
    matches!(c, b'(' | b')' | b',' | b':' | b';' | b'[' | b']' | b'\'')
}

fn parse_raw(text: &str) -> Result<(Vec<RawNode>, usize)> {
    let mut p = Parser {
        text: text.as_bytes(),
        pos: 0,
    };
    let mut nodes: Vec<RawNode> = Vec::new();
    let mut open: Vec<usize> = Vec::new();
    let mut root = None;

    // Each iteration reads one subtree start: either '(' or a leaf.
    'subtree: loop {
        let position = {
            p.skip_ws()?;
            p.pos
        };
        let parent = open.last().copied();
        let id = nodes.len();
        nodes.push(RawNode {
            parent,
            position,
            ..Default::default()
        });
        if let Some(parent) = parent {
            nodes[parent].children.push(id);
        } else if root.is_some() {
            return p.error("more than one top-level subtree");
        } else {
            root = Some(id);
        }
        if p.peek()? == Some(b'(') {
            p.pos += 1;
            open.push(id);
            continue 'subtree;
        }
        // Leaf: label then branch length.
        nodes[id].label = p.label()?;
        nodes[id].length = p.length()?;

        // Close as many clades as the text closes, then continue or stop.
        loop {
            match p.peek()? {
                Some(b',') => {
                    if open.is_empty() {
                        return p.error("',' outside of a clade");
                    }
                    p.pos += 1;
                    continue 'subtree;
                }
                Some(b')') => {
                    let Some(closed) = open.pop() else {
                        return p.error("unbalanced ')'");
                    };
                    p.pos += 1;
                    nodes[closed].label = p.label()?;
                    nodes[closed].length = p.length()?;
                }
                Some(b';') => {
                    if !open.is_empty() {
                        return p.error("unclosed '('");
                    }
                    p.pos += 1;
                    if p.peek()?.is_some() {
                        return p.error("trailing characters after ';'");
                    }
                    return Ok((nodes, root.expect("root was created")));
                }
                Some(c) => return p.error(format!("unexpected character '{}'", c as char)),
                None => return p.error("missing terminating ';'"),
            }
        }
    }
}

/// Parses a Newick tree with branch lengths into a dated genealogy.
///
/// Without `tip_dates`, tip times come from root-to-tip distances with the
/// most distant tip at time 0. With `tip_dates` (forward calendar dates,
/// e.g. decimal years), tip times are `max_date - date` and internal node
/// times follow from branch lengths measured down from the root, which is
/// placed so that the oldest implied root age is honoured.
///
/// Internal branches of length exactly zero are collapsed into a single
/// multifurcation.
pub fn parse_newick(text: &str, tip_dates: Option<&HashMap<String, f64>>) -> Result<Genealogy> {
    let (raw, raw_root) = parse_raw(text)?;

    for (id, node) in raw.iter().enumerate() {
        if id == raw_root {
            continue;
        }
        match node.length {
            None => {
                return Err(Error::NewickSyntax {
                    position: node.position,
                    message: "missing branch length".into(),
                })
            }
            Some(l) if l < 0.0 => {
                return Err(Error::NegativeBranch {
                    node: node
                        .label
                        .clone()
                        .unwrap_or_else(|| format!("@{}", node.position)),
                    length: l,
                })
            }
            _ => {}
        }
    }

    // Collapse zero-length internal branches; `keep[i]` maps raw → arena id.
    let mut keep: Vec<Option<NodeId>> = vec![None; raw.len()];
    let mut depth = vec![0.0; raw.len()];
    let mut nodes: Vec<Node> = Vec::new();
    let mut order = Vec::with_capacity(raw.len());
    let mut stack = vec![raw_root];
    while let Some(id) = stack.pop() {
        order.push(id);
        for &c in raw[id].children.iter().rev() {
            depth[c] = depth[id] + raw[c].length.unwrap_or(0.0);
            stack.push(c);
        }
    }
    // Preorder: parents before children, siblings left to right.
    let mut owner = vec![0usize; raw.len()];
    for &id in &order {
        let collapse = id != raw_root && !raw[id].children.is_empty() && raw[id].length == Some(0.0);
        if collapse {
            owner[id] = owner[raw[id].parent.unwrap()];
            continue;
        }
        let arena = nodes.len();
        let parent = raw[id].parent.map(|p| owner[p]);
        nodes.push(Node {
            parent,
            children: Vec::new(),
            time: 0.0,
            label: raw[id].label.clone(),
        });
        if let Some(p) = parent {
            nodes[p].children.push(arena);
        }
        keep[id] = Some(arena);
        owner[id] = arena;
    }
    let tips: Vec<usize> = (0..raw.len())
        .filter(|&i| raw[i].children.is_empty())
        .collect();
    let is_dated = tip_dates.is_some();
    match tip_dates {
        None => {
            let max_depth = tips.iter().map(|&i| depth[i]).fold(0.0, f64::max);
            for (id, arena) in keep.iter().enumerate() {
                if let Some(a) = *arena {
                    nodes[a].time = max_depth - depth[id];
                }
            }
            for &t in &tips {
                nodes[keep[t].unwrap()].time = (max_depth - depth[t]).max(0.0);
            }
        }
        Some(dates) => {
            let mut back = HashMap::new();
            let mut latest = f64::NEG_INFINITY;
            for &t in &tips {
                let label = raw[t].label.clone().unwrap_or_default();
                let date = *dates
                    .get(&label)
                    .ok_or_else(|| Error::MissingTipDate(label.clone()))?;
                latest = latest.max(date);
                back.insert(t, date);
            }
            let root_time = tips
                .iter()
                .map(|t| latest - back[t] + depth[*t])
                .fold(f64::NEG_INFINITY, f64::max);
            for (id, arena) in keep.iter().enumerate() {
                if let Some(a) = *arena {
                    nodes[a].time = root_time - depth[id];
                }
            }
            for &t in &tips {
                nodes[keep[t].unwrap()].time = latest - back[&t];
            }
        }
    }
    Genealogy::from_nodes(nodes, 0, is_dated)
}

/// Newick serializer.
#[derive(Debug, Clone, Copy)]
pub struct NewickWriter {
    significant_digits: Option<usize>,
}

impl NewickWriter {
    /// Branch lengths printed with the shortest representation that parses
    /// back to the same `f64`.
    pub fn round_trip() -> Self {
        Self {
            significant_digits: None,
        }
    }

    /// Branch lengths rounded to `digits` significant digits.
    pub fn with_significant_digits(digits: usize) -> Self {
        Self {
            significant_digits: Some(digits.max(1)),
        }
    }

    fn number(&self, x: f64) -> String {
        match self.significant_digits {
            None => format!("{x}"),
            Some(_) if x == 0.0 => "0".to_string(),
            Some(d) => {
                let rounded: f64 = format!("{:.*e}", d - 1, x).parse().unwrap_or(x);
                format!("{rounded}")
            }
        }
    }

    pub fn write(&self, g: &Genealogy) -> String {
        let mut out = String::new();
        // Iterative post-order emission: (node, next child index).
        let mut stack: Vec<(NodeId, usize)> = vec![(g.root(), 0)];
        while let Some(&mut (id, ref mut next)) = stack.last_mut() {
            let node = g.node(id);
            if node.children.is_empty() || *next == node.children.len() {
                if !node.children.is_empty() {
                    out.push(')');
                }
                if let Some(label) = &node.label {
                    out.push_str(&quote_label(label));
                }
                if node.parent.is_some() {
                    out.push(':');
                    out.push_str(&self.number(g.branch_length(id)));
                }
                stack.pop();
                continue;
            }
            out.push(if *next == 0 { '(' } else { ',' });
            let child = node.children[*next];
            *next += 1;
            stack.push((child, 0));
        }
        out.push(';');
        out
    }
}

fn quote_label(label: &str) -> String {
    let needs_quotes = label.is_empty()
        || label
            .bytes()
            .any(|c| is_delimiter(c) || c.is_ascii_whitespace());
    if needs_quotes {
        format!("'{}'", label.replace('\'', "''"))
    } else {
        label.to_string()
    }
}
