//! Dated multifurcating genealogies.
//!
//! Time runs backwards: 0 is the most recent tip and node times increase
//! towards the root. Nodes live in a flat arena addressed by [`NodeId`].

mod newick;
mod stats;

pub use newick::{parse_newick, NewickWriter};
pub use stats::{extract_stats, CoalescentData, LineageStep};

use crate::error::{Error, Result};

/// Times closer than this are treated as identical.
pub const TIME_TOL: f64 = 1e-9;

/// Index into a genealogy's node arena.
pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    /// Time before the most recent tip.
    pub time: f64,
    pub label: Option<String>,
}

impl Node {
    pub fn is_tip(&self) -> bool {
        self.children.is_empty()
    }
}

/// A rooted, dated, multifurcating tree.
///
/// Invariants checked on construction: a single root, every parent strictly
/// older than its children (beyond [`TIME_TOL`]), and at least two children
/// at every internal node.
#[derive(Debug, Clone, PartialEq)]
pub struct Genealogy {
    nodes: Vec<Node>,
    root: NodeId,
    is_dated: bool,
}

impl Genealogy {
    /// Builds a genealogy from an arena. `is_dated` records whether tip times
    /// came from an explicit date table rather than root-to-tip distances.
    pub fn from_nodes(nodes: Vec<Node>, root: NodeId, is_dated: bool) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidData("empty genealogy".into()));
        }
        if root >= nodes.len() || nodes[root].parent.is_some() {
            return Err(Error::InvalidData(format!("node {root} is not a root")));
        }
        let g = Self {
            nodes,
            root,
            is_dated,
        };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<()> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            if std::mem::replace(&mut seen[id], true) {
                return Err(Error::InvalidData(format!("node {id} reached twice")));
            }
            let node = &self.nodes[id];
            if !node.time.is_finite() || node.time < -TIME_TOL {
                return Err(Error::InvalidData(format!(
                    "node {id} has invalid time {}",
                    node.time
                )));
            }
            if node.children.len() == 1 {
                return Err(Error::InvalidData(format!(
                    "internal node {id} has a single child"
                )));
            }
            for &c in &node.children {
                if c >= self.nodes.len() || self.nodes[c].parent != Some(id) {
                    return Err(Error::InvalidData(format!(
                        "child {c} of node {id} does not point back to it"
                    )));
                }
                let child = &self.nodes[c];
                if node.time - child.time <= TIME_TOL {
                    return Err(Error::TimeInversion {
                        node: self.display_name(c),
                        parent: node.time,
                        child: child.time,
                    });
                }
                stack.push(c);
            }
        }
        if let Some(orphan) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidData(format!(
                "node {orphan} is not connected to the root"
            )));
        }
        Ok(())
    }

    pub(crate) fn display_name(&self, id: NodeId) -> String {
        self.nodes[id]
            .label
            .clone()
            .unwrap_or_else(|| format!("#{id}"))
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn is_dated(&self) -> bool {
        self.is_dated
    }

    /// Root time (TMRCA).
    pub fn root_time(&self) -> f64 {
        self.nodes[self.root].time
    }

    pub fn tips(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].is_tip())
    }

    pub fn internal_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).filter(|&i| !self.nodes[i].is_tip())
    }

    pub fn num_tips(&self) -> usize {
        self.tips().count()
    }

    pub fn tip_labels(&self) -> Vec<Option<&str>> {
        self.tips()
            .map(|i| self.nodes[i].label.as_deref())
            .collect()
    }

    /// Branch length above `id`; zero for the root.
    pub fn branch_length(&self, id: NodeId) -> f64 {
        match self.nodes[id].parent {
            Some(p) => self.nodes[p].time - self.nodes[id].time,
            None => 0.0,
        }
    }

    /// Newick serialization with shortest round-trip branch lengths.
    pub fn to_newick(&self) -> String {
        NewickWriter::round_trip().write(self)
    }

    /// True when every internal node has exactly two children.
    pub fn is_binary(&self) -> bool {
        self.nodes
            .iter()
            .all(|n| n.children.is_empty() || n.children.len() == 2)
    }
}
