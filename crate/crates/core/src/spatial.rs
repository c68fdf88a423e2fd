//! Depth-balanced R-tree over reduced points (Guttman insertion with
//! quadratic split, condense-and-reinsert deletion) and the index file
//! that maps the nodes of one depth to their member points.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::dataset::PointId;
use crate::error::{Error, Result};
use crate::num::{total_cmp, Scalar};

pub type NodeId = usize;

#[derive(Clone, Debug, PartialEq)]
pub struct ReducedPoint<T> {
    pub id: PointId,
    pub coords: Vec<T>,
}

impl<T: Scalar> ReducedPoint<T> {
    pub fn new(id: PointId, coords: Vec<T>) -> Self {
        ReducedPoint { id, coords }
    }
}

/// Axis-aligned bounding box.
#[derive(Clone, Debug, PartialEq)]
pub struct Rect<T> {
    pub min: Vec<T>,
    pub max: Vec<T>,
}

impl<T: Scalar> Rect<T> {
    pub fn point(coords: &[T]) -> Self {
        Rect {
            min: coords.to_vec(),
            max: coords.to_vec(),
        }
    }

    pub fn expand(&mut self, other: &Rect<T>) {
        for d in 0..self.min.len() {
            self.min[d] = self.min[d].min(other.min[d]);
            self.max[d] = self.max[d].max(other.max[d]);
        }
    }

    pub fn union(&self, other: &Rect<T>) -> Rect<T> {
        let mut r = self.clone();
        r.expand(other);
        r
    }

    pub fn area(&self) -> T {
        self.min
            .iter()
            .zip(&self.max)
            .fold(T::one(), |acc, (lo, hi)| acc * (*hi - *lo))
    }

    pub fn margin(&self) -> T {
        self.min.iter().zip(&self.max).map(|(lo, hi)| *hi - *lo).sum()
    }

    pub fn contains(&self, other: &Rect<T>) -> bool {
        (0..self.min.len()).all(|d| self.min[d] <= other.min[d] && other.max[d] <= self.max[d])
    }

    pub fn intersects(&self, other: &Rect<T>) -> bool {
        (0..self.min.len()).all(|d| self.min[d] <= other.max[d] && other.min[d] <= self.max[d])
    }

    /// Growth needed to include `other`: (area, margin). Margin breaks
    /// ties between flat boxes whose areas are all zero.
    fn growth(&self, other: &Rect<T>) -> (T, T) {
        let u = self.union(other);
        (u.area() - self.area(), u.margin() - self.margin())
    }
}

fn cmp_pair<T: Scalar>(a: (T, T), b: (T, T)) -> std::cmp::Ordering {
    total_cmp(a.0, b.0).then_with(|| total_cmp(a.1, b.1))
}

#[derive(Clone, Debug, PartialEq)]
enum Entries<T> {
    Points(Vec<ReducedPoint<T>>),
    Children(Vec<NodeId>),
}

#[derive(Clone, Debug, PartialEq)]
struct Node<T> {
    parent: Option<NodeId>,
    /// Distance from the leaf level (leaves are 0).
    level: usize,
    bbox: Option<Rect<T>>,
    entries: Entries<T>,
}

impl<T> Node<T> {
    fn len(&self) -> usize {
        match &self.entries {
            Entries::Points(p) => p.len(),
            Entries::Children(c) => c.len(),
        }
    }
}

enum Orphan<T> {
    Point(ReducedPoint<T>),
    Subtree(NodeId),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RTree<T> {
    dims: usize,
    min_entries: usize,
    max_entries: usize,
    nodes: Vec<Option<Node<T>>>,
    free: BTreeSet<NodeId>,
    root: NodeId,
    leaf_of: BTreeMap<PointId, NodeId>,
}

pub const DEFAULT_MIN_ENTRIES: usize = 2;
pub const DEFAULT_MAX_ENTRIES: usize = 8;

/// Child node with its growth and size keys, compared lexicographically.
type Candidate<T> = (NodeId, (T, T), (T, T));

impl<T: Scalar> RTree<T> {
    pub fn new(dims: usize, min_entries: usize, max_entries: usize) -> Result<Self> {
        if dims == 0 {
            return Err(Error::Invalid("R-tree dimensionality must be >= 1".into()));
        }
        if min_entries < 2 || min_entries * 2 > max_entries {
            return Err(Error::Invalid(format!(
                "R-tree fanout requires 2 <= min <= max/2, got min={min_entries} max={max_entries}"
            )));
        }
        Ok(RTree {
            dims,
            min_entries,
            max_entries,
            nodes: vec![Some(Node {
                parent: None,
                level: 0,
                bbox: None,
                entries: Entries::Points(Vec::new()),
            })],
            free: BTreeSet::new(),
            root: 0,
            leaf_of: BTreeMap::new(),
        })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn min_entries(&self) -> usize {
        self.min_entries
    }

    pub fn max_entries(&self) -> usize {
        self.max_entries
    }

    pub fn len(&self) -> usize {
        self.leaf_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaf_of.is_empty()
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    /// Number of levels; a lone leaf root has height 1.
    pub fn height(&self) -> usize {
        self.node(self.root).level + 1
    }

    pub fn contains(&self, id: PointId) -> bool {
        self.leaf_of.contains_key(&id)
    }

    pub fn point(&self, id: PointId) -> Option<&ReducedPoint<T>> {
        let leaf = self.leaf_of.get(&id)?;
        match &self.node(*leaf).entries {
            Entries::Points(ps) => ps.iter().find(|p| p.id == id),
            Entries::Children(_) => None,
        }
    }

    pub fn point_ids(&self) -> impl Iterator<Item = PointId> + '_ {
        self.leaf_of.keys().copied()
    }

    pub fn bbox(&self, node: NodeId) -> Option<&Rect<T>> {
        self.nodes.get(node)?.as_ref()?.bbox.as_ref()
    }

    pub fn node_exists(&self, node: NodeId) -> bool {
        matches!(self.nodes.get(node), Some(Some(_)))
    }

    pub fn level_of(&self, node: NodeId) -> Option<usize> {
        Some(self.nodes.get(node)?.as_ref()?.level)
    }

    fn node(&self, id: NodeId) -> &Node<T> {
        self.nodes[id].as_ref().expect("live node")
    }

    fn node_mut(&mut self, id: NodeId) -> &mut Node<T> {
        self.nodes[id].as_mut().expect("live node")
    }

    fn alloc(&mut self, node: Node<T>) -> NodeId {
        match self.free.pop_first() {
            Some(id) => {
                self.nodes[id] = Some(node);
                id
            }
            None => {
                self.nodes.push(Some(node));
                self.nodes.len() - 1
            }
        }
    }

    fn release(&mut self, id: NodeId) -> Node<T> {
        let node = self.nodes[id].take().expect("live node");
        self.free.insert(id);
        node
    }

    fn recompute_bbox(&mut self, id: NodeId) {
        let bbox = match &self.node(id).entries {
            Entries::Points(ps) => ps.iter().fold(None, |acc: Option<Rect<T>>, p| {
                let r = Rect::point(&p.coords);
                Some(match acc {
                    Some(a) => a.union(&r),
                    None => r,
                })
            }),
            Entries::Children(cs) => cs.iter().fold(None, |acc: Option<Rect<T>>, c| {
                match (acc, self.node(*c).bbox.as_ref()) {
                    (Some(a), Some(b)) => Some(a.union(b)),
                    (None, Some(b)) => Some(b.clone()),
                    (a, None) => a,
                }
            }),
        };
        self.node_mut(id).bbox = bbox;
    }

    /// Descends from the root to the node at `level` whose box needs the
    /// least enlargement to cover `rect`.
    fn choose_node(&self, rect: &Rect<T>, level: usize) -> NodeId {
        let mut n = self.root;
        while self.node(n).level > level {
            let Entries::Children(children) = &self.node(n).entries else {
                unreachable!("internal node above leaf level");
            };
            let mut best: Option<Candidate<T>> = None;
            for &c in children {
                let b = self.node(c).bbox.as_ref().expect("non-empty child");
                let grow = b.growth(rect);
                let size = (b.area(), b.margin());
                let better = match &best {
                    None => true,
                    Some((_, g, s)) => cmp_pair(grow, *g).then_with(|| cmp_pair(size, *s)).is_lt(),
                };
                if better {
                    best = Some((c, grow, size));
                }
            }
            n = best.expect("internal node has children").0;
        }
        n
    }

    fn check_point(&self, p: &ReducedPoint<T>) -> Result<()> {
        if p.coords.len() != self.dims {
            return Err(Error::Invalid(format!(
                "point {} has {} coordinates, tree has {}",
                p.id,
                p.coords.len(),
                self.dims
            )));
        }
        if p.coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Invalid(format!("point {} has non-finite coordinates", p.id)));
        }
        if self.leaf_of.contains_key(&p.id) {
            return Err(Error::Duplicate(format!("point {}", p.id)));
        }
        Ok(())
    }

    /// Inserts a point and returns the nodes whose membership or bounding
    /// box changed (the leaf's root path plus any nodes created by splits).
    pub fn insert(&mut self, p: ReducedPoint<T>) -> Result<BTreeSet<NodeId>> {
        self.check_point(&p)?;
        let mut influenced = BTreeSet::new();
        self.insert_point(p, &mut influenced);
        Ok(influenced)
    }

    fn insert_point(&mut self, p: ReducedPoint<T>, influenced: &mut BTreeSet<NodeId>) {
        let leaf = self.choose_node(&Rect::point(&p.coords), 0);
        self.leaf_of.insert(p.id, leaf);
        match &mut self.node_mut(leaf).entries {
            Entries::Points(ps) => ps.push(p),
            Entries::Children(_) => unreachable!("level-0 node is a leaf"),
        }
        self.adjust_upwards(leaf, influenced);
    }

    fn insert_subtree(&mut self, child: NodeId, influenced: &mut BTreeSet<NodeId>) {
        let level = self.node(child).level + 1;
        let rect = self.node(child).bbox.clone().expect("orphan subtree is non-empty");
        let target = self.choose_node(&rect, level);
        self.node_mut(child).parent = Some(target);
        match &mut self.node_mut(target).entries {
            Entries::Children(cs) => cs.push(child),
            Entries::Points(_) => unreachable!("subtree target is internal"),
        }
        self.adjust_upwards(target, influenced);
    }

    /// Splits overflowing nodes and refreshes boxes from `start` to the root.
    fn adjust_upwards(&mut self, start: NodeId, influenced: &mut BTreeSet<NodeId>) {
        let mut n = start;
        loop {
            influenced.insert(n);
            if self.node(n).len() > self.max_entries {
                let sibling = self.split(n);
                influenced.insert(sibling);
                match self.node(n).parent {
                    Some(p) => {
                        self.node_mut(sibling).parent = Some(p);
                        match &mut self.node_mut(p).entries {
                            Entries::Children(cs) => cs.push(sibling),
                            Entries::Points(_) => unreachable!(),
                        }
                    }
                    None => {
                        let level = self.node(n).level + 1;
                        let root = self.alloc(Node {
                            parent: None,
                            level,
                            bbox: None,
                            entries: Entries::Children(vec![n, sibling]),
                        });
                        self.node_mut(n).parent = Some(root);
                        self.node_mut(sibling).parent = Some(root);
                        self.root = root;
                        self.recompute_bbox(root);
                        influenced.insert(root);
                        return;
                    }
                }
            } else {
                self.recompute_bbox(n);
            }
            match self.node(n).parent {
                Some(p) => n = p,
                None => return,
            }
        }
    }

    /// Quadratic split of an overflowing node; returns the new sibling.
    fn split(&mut self, id: NodeId) -> NodeId {
        let level = self.node(id).level;
        let parent = self.node(id).parent;
        let entries = std::mem::replace(&mut self.node_mut(id).entries, Entries::Children(Vec::new()));
        let (keep, moved) = match entries {
            Entries::Points(ps) => {
                let rects: Vec<Rect<T>> = ps.iter().map(|p| Rect::point(&p.coords)).collect();
                let (a, b) = quadratic_split(&rects, self.min_entries);
                let mut slots: Vec<Option<ReducedPoint<T>>> = ps.into_iter().map(Some).collect();
                let ga: Vec<_> = a.iter().map(|i| slots[*i].take().unwrap()).collect();
                let gb: Vec<_> = b.iter().map(|i| slots[*i].take().unwrap()).collect();
                (Entries::Points(ga), Entries::Points(gb))
            }
            Entries::Children(cs) => {
                let rects: Vec<Rect<T>> = cs
                    .iter()
                    .map(|c| self.node(*c).bbox.clone().expect("non-empty child"))
                    .collect();
                let (a, b) = quadratic_split(&rects, self.min_entries);
                (
                    Entries::Children(a.iter().map(|i| cs[*i]).collect()),
                    Entries::Children(b.iter().map(|i| cs[*i]).collect()),
                )
            }
        };
        self.node_mut(id).entries = keep;
        let sibling = self.alloc(Node {
            parent,
            level,
            bbox: None,
            entries: moved,
        });
        match &self.node(sibling).entries {
            Entries::Points(ps) => {
                let ids: Vec<PointId> = ps.iter().map(|p| p.id).collect();
                for pid in ids {
                    self.leaf_of.insert(pid, sibling);
                }
            }
            Entries::Children(cs) => {
                for c in cs.clone() {
                    self.node_mut(c).parent = Some(sibling);
                }
            }
        }
        self.recompute_bbox(id);
        self.recompute_bbox(sibling);
        sibling
    }

    /// Removes a point. Underfull nodes on the path are dissolved and
    /// their entries reinserted at their original level. Returns the
    /// affected nodes, including dissolved ones.
    pub fn delete(&mut self, id: PointId) -> Result<BTreeSet<NodeId>> {
        let leaf = self.leaf_of.remove(&id).ok_or(Error::UnknownPoint(id))?;
        match &mut self.node_mut(leaf).entries {
            Entries::Points(ps) => ps.retain(|p| p.id != id),
            Entries::Children(_) => unreachable!(),
        }
        let mut influenced = BTreeSet::new();
        let mut orphans: Vec<Orphan<T>> = Vec::new();
        let mut n = leaf;
        while let Some(parent) = self.node(n).parent {
            influenced.insert(n);
            if self.node(n).len() < self.min_entries {
                match &mut self.node_mut(parent).entries {
                    Entries::Children(cs) => cs.retain(|c| *c != n),
                    Entries::Points(_) => unreachable!(),
                }
                let dead = self.release(n);
                match dead.entries {
                    Entries::Points(ps) => orphans.extend(ps.into_iter().map(Orphan::Point)),
                    Entries::Children(cs) => orphans.extend(cs.into_iter().map(Orphan::Subtree)),
                }
            } else {
                self.recompute_bbox(n);
            }
            n = parent;
        }
        influenced.insert(self.root);
        self.recompute_bbox(self.root);

        // Higher subtrees first so lower ones find their level populated.
        orphans.sort_by_key(|o| match o {
            Orphan::Point(_) => 0,
            Orphan::Subtree(c) => self.node(*c).level + 1,
        });
        while let Some(orphan) = orphans.pop() {
            match orphan {
                Orphan::Point(p) => self.insert_point(p, &mut influenced),
                Orphan::Subtree(c) => self.insert_subtree(c, &mut influenced),
            }
        }

        loop {
            let root = self.node(self.root);
            match &root.entries {
                Entries::Children(cs) if cs.len() == 1 => {
                    let child = cs[0];
                    let old = self.root;
                    self.release(old);
                    self.node_mut(child).parent = None;
                    self.root = child;
                }
                Entries::Children(cs) if cs.is_empty() => {
                    let r = self.root;
                    let node = self.node_mut(r);
                    node.level = 0;
                    node.entries = Entries::Points(Vec::new());
                    node.bbox = None;
                }
                _ => break,
            }
        }
        Ok(influenced)
    }

    /// Node ids at `depth` (root is depth 0), ascending.
    pub fn nodes_at_depth(&self, depth: usize) -> Vec<NodeId> {
        match self.height().checked_sub(depth + 1) {
            Some(level) => self.nodes_at_level(level),
            None => Vec::new(),
        }
    }

    pub fn nodes_at_level(&self, level: usize) -> Vec<NodeId> {
        let mut frontier = vec![self.root];
        let mut current = self.node(self.root).level;
        if level > current {
            return Vec::new();
        }
        while current > level {
            frontier = frontier
                .iter()
                .flat_map(|n| match &self.node(*n).entries {
                    Entries::Children(cs) => cs.clone(),
                    Entries::Points(_) => Vec::new(),
                })
                .collect();
            current -= 1;
        }
        frontier.sort_unstable();
        frontier
    }

    pub fn node_counts_per_depth(&self) -> Vec<usize> {
        (0..self.height()).map(|d| self.nodes_at_depth(d).len()).collect()
    }

    /// All point ids under `node`.
    pub fn members(&self, node: NodeId) -> BTreeSet<PointId> {
        let mut out = BTreeSet::new();
        let mut stack = vec![node];
        while let Some(n) = stack.pop() {
            match &self.node(n).entries {
                Entries::Points(ps) => out.extend(ps.iter().map(|p| p.id)),
                Entries::Children(cs) => stack.extend(cs),
            }
        }
        out
    }

    pub fn children(&self, node: NodeId) -> Vec<NodeId> {
        match &self.node(node).entries {
            Entries::Children(cs) => cs.clone(),
            Entries::Points(_) => Vec::new(),
        }
    }

    /// Checks balance, fanout, box tightness and back-pointers.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let root = self.node(self.root);
        if root.parent.is_some() {
            return Err("root has a parent".into());
        }
        if let Entries::Children(cs) = &root.entries {
            if cs.len() < 2 {
                return Err(format!("internal root has {} children", cs.len()));
            }
        }
        let mut seen_points = 0usize;
        let mut stack = vec![self.root];
        while let Some(n) = stack.pop() {
            let node = self.node(n);
            if n != self.root && (node.len() < self.min_entries || node.len() > self.max_entries) {
                return Err(format!("node {n} has {} entries", node.len()));
            }
            if node.len() > self.max_entries {
                return Err(format!("root has {} entries", node.len()));
            }
            let expected: Option<Rect<T>> = match &node.entries {
                Entries::Points(ps) => {
                    if node.level != 0 {
                        return Err(format!("leaf {n} at level {}", node.level));
                    }
                    for p in ps {
                        seen_points += 1;
                        if self.leaf_of.get(&p.id) != Some(&n) {
                            return Err(format!("point {} not mapped to leaf {n}", p.id));
                        }
                    }
                    ps.iter().map(|p| Rect::point(&p.coords)).reduce(|a, b| a.union(&b))
                }
                Entries::Children(cs) => {
                    for c in cs {
                        let child = self.node(*c);
                        if child.parent != Some(n) {
                            return Err(format!("child {c} of {n} has parent {:?}", child.parent));
                        }
                        if child.level + 1 != node.level {
                            return Err(format!("unbalanced: child {c} of {n}"));
                        }
                        stack.push(*c);
                    }
                    cs.iter()
                        .filter_map(|c| self.node(*c).bbox.clone())
                        .reduce(|a, b| a.union(&b))
                }
            };
            if expected != node.bbox {
                return Err(format!("node {n} bounding box is not tight"));
            }
        }
        if seen_points != self.leaf_of.len() {
            return Err("point index out of sync".into());
        }
        Ok(())
    }

    /// Versioned text encoding; parsing it reproduces the tree exactly,
    /// including node ids and the free list.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "rtree v1");
        let _ = writeln!(
            out,
            "dims {} min {} max {} root {} slots {}",
            self.dims,
            self.min_entries,
            self.max_entries,
            self.root,
            self.nodes.len()
        );
        let _ = write!(out, "free");
        for f in &self.free {
            let _ = write!(out, " {f}");
        }
        out.push('\n');
        for (id, node) in self.nodes.iter().enumerate() {
            let Some(node) = node else { continue };
            let parent = node.parent.map_or("-".to_owned(), |p| p.to_string());
            match &node.entries {
                Entries::Points(ps) => {
                    let _ = writeln!(out, "L {id} {parent} {}", ps.len());
                    for p in ps {
                        let _ = write!(out, "p {}", p.id);
                        for c in &p.coords {
                            let _ = write!(out, " {c}");
                        }
                        out.push('\n');
                    }
                }
                Entries::Children(cs) => {
                    let _ = write!(out, "I {id} {parent} {}", node.level);
                    for c in cs {
                        let _ = write!(out, " {c}");
                    }
                    out.push('\n');
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: usize, why: &str| Error::Invalid(format!("rtree line {line}: {why}"));
        let lines: Vec<&str> = text.lines().collect();
        if lines.first() != Some(&"rtree v1") {
            return Err(bad(1, "missing `rtree v1` header"));
        }
        let h: Vec<&str> = lines
            .get(1)
            .ok_or_else(|| bad(2, "missing header"))?
            .split(' ')
            .collect();
        if h.len() != 10 || h[0] != "dims" || h[2] != "min" || h[4] != "max" || h[6] != "root" || h[8] != "slots" {
            return Err(bad(2, "malformed header"));
        }
        let num = |s: &str, line: usize| s.parse::<usize>().map_err(|_| bad(line, "expected integer"));
        let dims = num(h[1], 2)?;
        let mut tree = RTree::new(dims, num(h[3], 2)?, num(h[5], 2)?)?;
        let root = num(h[7], 2)?;
        let slots = num(h[9], 2)?;
        let free_line = lines.get(2).ok_or_else(|| bad(3, "missing free list"))?;
        let mut free_fields = free_line.split(' ');
        if free_fields.next() != Some("free") {
            return Err(bad(3, "expected free list"));
        }
        tree.free = free_fields.map(|f| num(f, 3)).collect::<Result<_>>()?;
        tree.nodes = vec![None; slots];
        tree.root = root;
        let parse_parent = |s: &str, line: usize| -> Result<Option<NodeId>> {
            if s == "-" {
                Ok(None)
            } else {
                num(s, line).map(Some)
            }
        };
        let mut i = 3;
        while i < lines.len() {
            let lineno = i + 1;
            let f: Vec<&str> = lines[i].split(' ').collect();
            match f.first() {
                Some(&"L") if f.len() == 4 => {
                    let id = num(f[1], lineno)?;
                    let parent = parse_parent(f[2], lineno)?;
                    let count = num(f[3], lineno)?;
                    let mut ps = Vec::with_capacity(count);
                    for k in 0..count {
                        let pl = i + 1 + k;
                        let pf: Vec<&str> = lines
                            .get(pl)
                            .ok_or_else(|| bad(pl + 1, "missing point"))?
                            .split(' ')
                            .collect();
                        if pf.len() != dims + 2 || pf[0] != "p" {
                            return Err(bad(pl + 1, "malformed point"));
                        }
                        let pid: PointId = pf[1].parse().map_err(|_| bad(pl + 1, "point id"))?;
                        let coords = pf[2..]
                            .iter()
                            .map(|c| c.parse::<T>().map_err(|_| bad(pl + 1, "coordinate")))
                            .collect::<Result<Vec<T>>>()?;
                        tree.leaf_of.insert(pid, id);
                        ps.push(ReducedPoint { id: pid, coords });
                    }
                    if id >= slots {
                        return Err(bad(lineno, "node id out of range"));
                    }
                    tree.nodes[id] = Some(Node {
                        parent,
                        level: 0,
                        bbox: None,
                        entries: Entries::Points(ps),
                    });
                    i += 1 + count;
                }
                Some(&"I") if f.len() >= 4 => {
                    let id = num(f[1], lineno)?;
                    let parent = parse_parent(f[2], lineno)?;
                    let level = num(f[3], lineno)?;
                    let cs = f[4..].iter().map(|c| num(c, lineno)).collect::<Result<Vec<_>>>()?;
                    if id >= slots {
                        return Err(bad(lineno, "node id out of range"));
                    }
                    tree.nodes[id] = Some(Node {
                        parent,
                        level,
                        bbox: None,
                        entries: Entries::Children(cs),
                    });
                    i += 1;
                }
                _ => return Err(bad(lineno, "unknown record")),
            }
        }
        if !tree.node_exists(root) {
            return Err(Error::Invalid("rtree: root node missing".into()));
        }
        // Boxes bottom-up by level.
        let mut live: Vec<NodeId> = (0..slots).filter(|n| tree.node_exists(*n)).collect();
        live.sort_by_key(|n| tree.node(*n).level);
        for n in live {
            if let Entries::Children(cs) = &tree.node(n).entries {
                if cs.iter().any(|c| !tree.node_exists(*c)) {
                    return Err(Error::Invalid(format!("rtree: node {n} references a missing child")));
                }
            }
            tree.recompute_bbox(n);
        }
        tree.check_invariants()
            .map_err(|e| Error::Invalid(format!("rtree: {e}")))?;
        Ok(tree)
    }
}

/// Guttman's quadratic split over entry boxes; returns index groups.
fn quadratic_split<T: Scalar>(rects: &[Rect<T>], min_entries: usize) -> (Vec<usize>, Vec<usize>) {
    let n = rects.len();
    let mut seeds = (0, 1);
    let mut worst: Option<(T, T)> = None;
    for i in 0..n {
        for j in (i + 1)..n {
            let u = rects[i].union(&rects[j]);
            let waste = (
                u.area() - rects[i].area() - rects[j].area(),
                u.margin() - rects[i].margin() - rects[j].margin(),
            );
            if worst.is_none_or(|w| cmp_pair(waste, w).is_gt()) {
                worst = Some(waste);
                seeds = (i, j);
            }
        }
    }
    let mut ga = vec![seeds.0];
    let mut gb = vec![seeds.1];
    let mut ba = rects[seeds.0].clone();
    let mut bb = rects[seeds.1].clone();
    let mut rest: Vec<usize> = (0..n).filter(|i| *i != seeds.0 && *i != seeds.1).collect();
    while !rest.is_empty() {
        if ga.len() + rest.len() == min_entries {
            ga.append(&mut rest);
            break;
        }
        if gb.len() + rest.len() == min_entries {
            gb.append(&mut rest);
            break;
        }
        let mut pick = 0;
        let mut best_diff: Option<(T, T)> = None;
        for (k, &e) in rest.iter().enumerate() {
            let da = ba.growth(&rects[e]);
            let db = bb.growth(&rects[e]);
            let diff = ((da.0 - db.0).abs(), (da.1 - db.1).abs());
            if best_diff.is_none_or(|b| cmp_pair(diff, b).is_gt()) {
                best_diff = Some(diff);
                pick = k;
            }
        }
        let e = rest.remove(pick);
        let da = ba.growth(&rects[e]);
        let db = bb.growth(&rects[e]);
        let to_a = cmp_pair(da, db)
            .then_with(|| cmp_pair((ba.area(), ba.margin()), (bb.area(), bb.margin())))
            .then_with(|| ga.len().cmp(&gb.len()))
            .is_le();
        if to_a {
            ga.push(e);
            ba.expand(&rects[e]);
        } else {
            gb.push(e);
            bb.expand(&rects[e]);
        }
    }
    ga.sort_unstable();
    gb.sort_unstable();
    (ga, gb)
}

/// Builds a tree by inserting the points in ascending id order.
pub fn build<T: Scalar>(points: Vec<ReducedPoint<T>>, min_entries: usize, max_entries: usize) -> Result<RTree<T>> {
    let dims = points
        .first()
        .map(|p| p.coords.len())
        .ok_or_else(|| Error::Invalid("cannot build an R-tree without points".into()))?;
    let mut tree = RTree::new(dims, min_entries, max_entries)?;
    let mut points = points;
    points.sort_by_key(|p| p.id);
    for p in points {
        tree.insert(p)?;
    }
    Ok(tree)
}

/// Deepest depth whose node count is at most `subset_size / ratio`;
/// 0 when no depth qualifies.
pub fn select_depth<T: Scalar>(tree: &RTree<T>, subset_size: usize, compression_ratio: f64) -> usize {
    let bound = subset_size as f64 / compression_ratio;
    tree.node_counts_per_depth()
        .iter()
        .enumerate()
        .filter(|(_, count)| **count as f64 <= bound)
        .map(|(d, _)| d)
        .next_back()
        .unwrap_or(0)
}

/// Aggregated point id: the id of the tree node it was taken from.
pub type AggId = NodeId;

/// Mapping from aggregated points to the original points they summarize.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IndexFile {
    pub depth: usize,
    pub entries: BTreeMap<AggId, BTreeSet<PointId>>,
}

impl IndexFile {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn members(&self, agg: AggId) -> Option<&BTreeSet<PointId>> {
        self.entries.get(&agg)
    }

    /// Reverse map from point to aggregated point.
    pub fn owner_map(&self) -> BTreeMap<PointId, AggId> {
        self.entries
            .iter()
            .flat_map(|(agg, ms)| ms.iter().map(move |m| (*m, *agg)))
            .collect()
    }

    /// Entries are nonempty, pairwise disjoint and cover exactly `universe`.
    pub fn is_partition_of(&self, universe: &BTreeSet<PointId>) -> bool {
        let mut seen = BTreeSet::new();
        for ms in self.entries.values() {
            if ms.is_empty() {
                return false;
            }
            for m in ms {
                if !seen.insert(*m) {
                    return false;
                }
            }
        }
        &seen == universe
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("agg_id,member_id\n");
        for (agg, ms) in &self.entries {
            for m in ms {
                let _ = writeln!(out, "{agg},{m}");
            }
        }
        out
    }

    pub fn from_csv(text: &str, depth: usize) -> Result<Self> {
        let mut entries: BTreeMap<AggId, BTreeSet<PointId>> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if i == 0 && line == "agg_id,member_id" {
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let (a, m) = line
                .split_once(',')
                .ok_or_else(|| Error::Invalid(format!("index line {}: expected `agg_id,member_id`", i + 1)))?;
            let agg: AggId = a
                .parse()
                .map_err(|_| Error::Invalid(format!("index line {}: agg id", i + 1)))?;
            let member: PointId = m
                .parse()
                .map_err(|_| Error::Invalid(format!("index line {}: member id", i + 1)))?;
            if !entries.entry(agg).or_default().insert(member) {
                return Err(Error::Duplicate(format!("index pair ({agg},{member})")));
            }
        }
        Ok(IndexFile { depth, entries })
    }
}

pub fn index_at_depth<T: Scalar>(tree: &RTree<T>, depth: usize) -> Result<IndexFile> {
    if depth >= tree.height() {
        return Err(Error::Invalid(format!(
            "depth {depth} out of range for tree of height {}",
            tree.height()
        )));
    }
    let entries = tree
        .nodes_at_depth(depth)
        .into_iter()
        .map(|n| (n, tree.members(n)))
        .filter(|(_, ms)| !ms.is_empty())
        .collect();
    Ok(IndexFile { depth, entries })
}
