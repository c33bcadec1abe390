use std::collections::HashMap;
use std::ops::{Index, IndexMut};

use num_traits::{One, Signed, Zero};

use super::ModelError;
use crate::num::Rat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub label: String,
    pub time: usize,
    pub parent: Option<NodeId>,
    pub probability: Rat,
    children: Vec<NodeId>,
}

impl Node {
    pub fn children(&self) -> &[NodeId] {
        &self.children
    }
}

/// Node description used to build a tree; `parent` indexes the input list.
#[derive(Debug, Clone)]
pub struct NodeSpec {
    pub label: String,
    pub parent: Option<usize>,
    pub probability: Rat,
}

/// Finite filtered probability space. Nodes are stored in time order, so
/// `NodeId(0)` is the root and parents precede children.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventTree {
    nodes: Vec<Node>,
    horizon: usize,
}

impl EventTree {
    pub fn new(specs: Vec<NodeSpec>) -> Result<Self, ModelError> {
        let n = specs.len();
        if n == 0 {
            return Err(ModelError::Tree("tree has no nodes".into()));
        }
        let mut seen = HashMap::new();
        for (i, s) in specs.iter().enumerate() {
            if seen.insert(s.label.clone(), i).is_some() {
                return Err(ModelError::Tree(format!("duplicate node label {:?}", s.label)));
            }
            if let Some(p) = s.parent {
                if p >= n || p == i {
                    return Err(ModelError::Tree(format!("node {:?} has an invalid parent", s.label)));
                }
            }
            if !s.probability.is_positive() {
                return Err(ModelError::Tree(format!(
                    "node {:?} must have positive probability",
                    s.label
                )));
            }
        }
        let roots: Vec<usize> = (0..n).filter(|&i| specs[i].parent.is_none()).collect();
        if roots.len() != 1 {
            return Err(ModelError::Tree(format!("expected one root, found {}", roots.len())));
        }
        if !specs[roots[0]].probability.is_one() {
            return Err(ModelError::Tree("root probability must be 1".into()));
        }

        // Breadth-first renumbering; also detects cycles and unreachable nodes.
        let mut kids: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, s) in specs.iter().enumerate() {
            if let Some(p) = s.parent {
                kids[p].push(i);
            }
        }
        let mut order = vec![roots[0]];
        let mut time = vec![0usize; n];
        let mut head = 0;
        while head < order.len() {
            let i = order[head];
            head += 1;
            for &k in &kids[i] {
                time[k] = time[i] + 1;
                order.push(k);
            }
        }
        if order.len() != n {
            return Err(ModelError::Tree("some nodes are not connected to the root".into()));
        }
        let mut new_id = vec![0usize; n];
        for (pos, &old) in order.iter().enumerate() {
            new_id[old] = pos;
        }
        let nodes: Vec<Node> = order
            .iter()
            .map(|&old| Node {
                label: specs[old].label.clone(),
                time: time[old],
                parent: specs[old].parent.map(|p| NodeId(new_id[p])),
                probability: specs[old].probability.clone(),
                children: kids[old].iter().map(|&k| NodeId(new_id[k])).collect(),
            })
            .collect();
        let horizon = nodes.iter().map(|n| n.time).max().unwrap();
        let tree = EventTree { nodes, horizon };
        for (i, node) in tree.nodes.iter().enumerate() {
            if node.children.is_empty() {
                if node.time != horizon {
                    return Err(ModelError::Tree(format!(
                        "leaf {:?} is at time {} but the horizon is {horizon}",
                        node.label, node.time
                    )));
                }
                continue;
            }
            let total: Rat = node.children.iter().map(|c| &tree.nodes[c.0].probability).sum();
            if total != node.probability {
                return Err(ModelError::Tree(format!(
                    "children of {:?} have probability {total}, expected {}",
                    node.label, node.probability
                )));
            }
            debug_assert!(node.children.iter().all(|c| c.0 > i));
        }
        Ok(tree)
    }

    /// Single path `0 -> 1 -> ... -> horizon`.
    pub fn deterministic(horizon: usize) -> Self {
        let specs = (0..=horizon)
            .map(|t| NodeSpec {
                label: format!("t{t}"),
                parent: t.checked_sub(1),
                probability: Rat::one(),
            })
            .collect();
        EventTree::new(specs).expect("chain is a valid tree")
    }

    /// Non-recombining binomial tree with up-probability `q`.
    pub fn binomial(horizon: usize, q: &Rat) -> Result<Self, ModelError> {
        let mut specs = vec![NodeSpec {
            label: "r".into(),
            parent: None,
            probability: Rat::one(),
        }];
        let mut frontier = vec![0usize];
        for _ in 0..horizon {
            let mut next = Vec::new();
            for &p in &frontier {
                for (tag, w) in [("u", q.clone()), ("d", Rat::one() - q)] {
                    let label = format!("{}{}", if p == 0 { "" } else { &specs[p].label }, tag);
                    let probability = &specs[p].probability * &w;
                    specs.push(NodeSpec {
                        label,
                        parent: Some(p),
                        probability,
                    });
                    next.push(specs.len() - 1);
                }
            }
            frontier = next;
        }
        EventTree::new(specs)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id.0].children
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id.0].parent
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        self.nodes[id.0].children.is_empty()
    }

    pub fn leaves(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.ids().filter(|&id| self.is_leaf(id))
    }

    pub fn probability(&self, id: NodeId) -> &Rat {
        &self.nodes[id.0].probability
    }

    /// `P(child | parent)`.
    pub fn transition(&self, child: NodeId) -> Rat {
        let p = self.parent(child).expect("root has no transition probability");
        &self.nodes[child.0].probability / &self.nodes[p.0].probability
    }

    pub fn find(&self, label: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.label == label).map(NodeId)
    }

    /// Nodes from the root down to `id`.
    pub fn path(&self, id: NodeId) -> Vec<NodeId> {
        let mut path = vec![id];
        let mut cur = id;
        while let Some(p) = self.parent(cur) {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// `E[value | F_node]` over the children of a non-leaf node.
    pub fn cond_expectation<T: Weighted>(&self, proc: &AdaptedProcess<T>, node: NodeId) -> Result<T, ModelError> {
        if proc.len() != self.len() {
            return Err(ModelError::Shape(format!(
                "process has {} values for {} nodes",
                proc.len(),
                self.len()
            )));
        }
        if self.is_leaf(node) {
            return Err(ModelError::LeafExpectation(self.node(node).label.clone()));
        }
        let terms: Vec<(Rat, &T)> = self
            .children(node)
            .iter()
            .map(|&c| (self.transition(c), &proc[c]))
            .collect();
        Ok(T::weighted_sum(&terms))
    }
}

/// Values that can be averaged with rational weights.
pub trait Weighted: Sized {
    fn weighted_sum(terms: &[(Rat, &Self)]) -> Self;
}

impl Weighted for Rat {
    fn weighted_sum(terms: &[(Rat, &Self)]) -> Self {
        terms.iter().map(|(w, v)| w * *v).sum()
    }
}

impl Weighted for Vec<Rat> {
    fn weighted_sum(terms: &[(Rat, &Self)]) -> Self {
        let dim = terms.first().map_or(0, |(_, v)| v.len());
        let mut out = vec![Rat::zero(); dim];
        for (w, v) in terms {
            for (o, x) in out.iter_mut().zip(v.iter()) {
                *o += w * x;
            }
        }
        out
    }
}

/// One value per node of a tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdaptedProcess<T> {
    values: Vec<T>,
}

impl<T> AdaptedProcess<T> {
    pub fn new(values: Vec<T>) -> Self {
        AdaptedProcess { values }
    }

    pub fn from_fn(tree: &EventTree, f: impl FnMut(NodeId) -> T) -> Self {
        AdaptedProcess {
            values: tree.ids().map(f).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &T)> {
        self.values.iter().enumerate().map(|(i, v)| (NodeId(i), v))
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> AdaptedProcess<U> {
        AdaptedProcess {
            values: self.values.iter().map(f).collect(),
        }
    }
}

impl<T: Clone> AdaptedProcess<T> {
    pub fn constant(tree: &EventTree, value: T) -> Self {
        AdaptedProcess {
            values: vec![value; tree.len()],
        }
    }
}

impl<T> Index<NodeId> for AdaptedProcess<T> {
    type Output = T;

    fn index(&self, id: NodeId) -> &T {
        &self.values[id.0]
    }
}

impl<T> IndexMut<NodeId> for AdaptedProcess<T> {
    fn index_mut(&mut self, id: NodeId) -> &mut T {
        &mut self.values[id.0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{frac, int};

    fn spec(label: &str, parent: Option<usize>, p: Rat) -> NodeSpec {
        NodeSpec {
            label: label.into(),
            parent,
            probability: p,
        }
    }

    #[test]
    fn binomial_tree_shape() {
        let t = EventTree::binomial(3, &frac(1, 3)).unwrap();
        assert_eq!(t.len(), 15);
        assert_eq!(t.horizon(), 3);
        let total: Rat = t.leaves().map(|l| t.probability(l).clone()).sum();
        assert_eq!(total, int(1));
        assert_eq!(t.probability(t.find("uuu").unwrap()), &frac(1, 27));
        assert_eq!(t.path(t.find("ud").unwrap()).len(), 3);
    }

    #[test]
    fn renumbers_in_time_order() {
        let t = EventTree::new(vec![
            spec("b", Some(2), frac(1, 2)),
            spec("a", Some(2), frac(1, 2)),
            spec("root", None, int(1)),
        ])
        .unwrap();
        assert_eq!(t.node(t.root()).label, "root");
        assert_eq!(t.node(NodeId(1)).time, 1);
    }

    #[test]
    fn rejects_invalid_trees() {
        let bad_sum = vec![spec("r", None, int(1)), spec("a", Some(0), frac(1, 2))];
        assert!(EventTree::new(bad_sum).is_err());
        let uneven = vec![
            spec("r", None, int(1)),
            spec("a", Some(0), frac(1, 2)),
            spec("b", Some(0), frac(1, 2)),
            spec("c", Some(1), frac(1, 2)),
        ];
        assert!(EventTree::new(uneven).is_err());
        let two_roots = vec![spec("r", None, int(1)), spec("s", None, int(1))];
        assert!(EventTree::new(two_roots).is_err());
        let zero = vec![spec("r", None, int(1)), spec("a", Some(0), int(0)), spec("b", Some(0), int(1))];
        assert!(EventTree::new(zero).is_err());
        let cycle = vec![spec("r", None, int(1)), spec("a", Some(2), int(1)), spec("b", Some(1), int(1))];
        assert!(EventTree::new(cycle).is_err());
    }

    #[test]
    fn conditional_expectations() {
        let t = EventTree::binomial(1, &frac(1, 2)).unwrap();
        let p = AdaptedProcess::new(vec![int(0), int(1), int(3)]);
        assert_eq!(t.cond_expectation(&p, t.root()).unwrap(), int(2));

        let chain = EventTree::deterministic(1);
        let p = AdaptedProcess::new(vec![int(0), int(5)]);
        assert_eq!(chain.cond_expectation(&p, chain.root()).unwrap(), int(5));

        let skew = EventTree::binomial(1, &frac(1, 4)).unwrap();
        let p = AdaptedProcess::new(vec![vec![int(0)], vec![int(4)], vec![int(0)]]);
        assert_eq!(skew.cond_expectation(&p, skew.root()).unwrap(), vec![int(1)]);
        assert!(matches!(
            skew.cond_expectation(&p, NodeId(1)),
            Err(ModelError::LeafExpectation(_))
        ));
    }
}
