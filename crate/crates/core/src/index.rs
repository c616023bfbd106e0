//! Exact and approximate nearest-neighbor search over descriptor collections.
//!
//! Exact mode is a linear scan and returns the true k-nearest set under
//! Euclidean distance. Approximate mode uses randomized kd-trees with a
//! shared best-bin-first priority search bounded by a leaf budget; its
//! accuracy contract is measured recall against exact mode, not a fixed
//! structure. Both modes break distance ties by ascending point index so
//! results are reproducible bit for bit.
//!
//! Point order equals the dataset's canonical order, which anchors every
//! deterministic reduction built on top of the index.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};
use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::model::{ClassBy, DatasetView};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexMode {
    Exact,
    Approximate,
}

/// Which feature kind of each subject feeds the index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexedFeatures {
    Keypoints,
    Vectors,
}

/// Parameters of the randomized-tree approximate search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxParams {
    /// Number of randomized trees searched in parallel.
    pub trees: usize,
    /// Maximum points per leaf.
    pub leaf_size: usize,
    /// Leaf budget per query, shared across trees.
    pub max_checked_leaves: usize,
    /// Seed for the randomized dimension choices; fixed seed means a rebuild
    /// reproduces the same trees and therefore the same query results.
    pub seed: u64,
}

impl Default for ApproxParams {
    fn default() -> Self {
        Self {
            trees: 4,
            leaf_size: 16,
            max_checked_leaves: 48,
            seed: 0x6d64_7831,
        }
    }
}

/// One search result. `distance` is Euclidean; hits come back sorted by
/// ascending distance with ties broken by ascending `point_index`.
#[derive(Debug, Clone)]
pub struct NeighborHit {
    pub point_index: usize,
    pub distance: f64,
    pub subject_id: Arc<str>,
    pub instance_label: Arc<str>,
    pub group_label: Arc<str>,
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: u32,
        len: u32,
    },
    Split {
        dim: u32,
        cut: f64,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone)]
struct KdTree {
    nodes: Vec<Node>,
    ids: Vec<u32>,
}

/// Per-class bookkeeping for one labeling of the points.
#[derive(Debug, Clone)]
struct ClassTable {
    labels: Vec<Arc<str>>,
    slot_by_label: HashMap<Arc<str>, u32>,
    /// subject slot -> class slot
    subject_class: Vec<u32>,
    /// class slot -> total point count
    totals: Vec<usize>,
}

impl ClassTable {
    fn slot(&self, label: &str) -> Option<u32> {
        self.slot_by_label.get(label).copied()
    }
}

/// An immutable nearest-neighbor index over the descriptors of a dataset
/// view. Queries are safe from any number of threads.
#[derive(Debug, Clone)]
pub struct DescriptorIndex {
    dim: usize,
    which: IndexedFeatures,
    mode: IndexMode,
    params: ApproxParams,
    /// Row-major point storage, canonical order.
    points: Vec<f64>,
    /// point -> subject slot
    owner: Vec<u32>,
    subject_ids: Vec<Arc<str>>,
    instance_labels: Vec<Arc<str>>,
    group_labels: Vec<Arc<str>>,
    /// subject slot -> number of points owned
    subject_points: Vec<usize>,
    class_tables: [ClassTable; 3],
    trees: Vec<KdTree>,
}

fn class_table_ix(class_by: ClassBy) -> usize {
    match class_by {
        ClassBy::Subject => 0,
        ClassBy::Instance => 1,
        ClassBy::Group => 2,
    }
}

#[inline]
fn dist2(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

/// Candidate ordered by (distance², point id); the id tie-break keeps equal
/// distances deterministic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Cand {
    pub(crate) d2: f64,
    pub(crate) id: u32,
}

impl Eq for Cand {}

impl Ord for Cand {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2
            .total_cmp(&other.d2)
            .then_with(|| self.id.cmp(&other.id))
    }
}

impl PartialOrd for Cand {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Pending tree node in the priority search, ordered by lower-bound distance.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Pending {
    bound: f64,
    tree: u32,
    node: u32,
}

impl Eq for Pending {}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| self.tree.cmp(&other.tree))
            .then_with(|| self.node.cmp(&other.node))
    }
}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const SPLIT_SAMPLE: usize = 100;
const DIM_CANDIDATES: usize = 5;

fn build_tree(
    points: &[f64],
    dim: usize,
    n: usize,
    leaf_size: usize,
    rng: &mut ChaCha12Rng,
) -> KdTree {
    let mut ids: Vec<u32> = (0..n as u32).collect();
    let mut nodes = Vec::new();
    nodes.push(Node::Leaf { start: 0, len: 0 }); // placeholder root
    build_node(points, dim, leaf_size, rng, &mut ids, &mut nodes, 0, 0, n);
    KdTree { nodes, ids }
}

#[allow(clippy::too_many_arguments)]
fn build_node(
    points: &[f64],
    dim: usize,
    leaf_size: usize,
    rng: &mut ChaCha12Rng,
    ids: &mut Vec<u32>,
    nodes: &mut Vec<Node>,
    node_ix: usize,
    lo: usize,
    hi: usize,
) {
    let len = hi - lo;
    if len <= leaf_size.max(1) {
        nodes[node_ix] = Node::Leaf {
            start: lo as u32,
            len: len as u32,
        };
        return;
    }

    // Estimate per-dimension mean and variance on a leading sample, then pick
    // the split dimension at random among the highest-variance candidates.
    let sample = len.min(SPLIT_SAMPLE);
    let mut mean = vec![0.0f64; dim];
    let mut m2 = vec![0.0f64; dim];
    for &id in &ids[lo..lo + sample] {
        let p = &points[id as usize * dim..(id as usize + 1) * dim];
        for (d, &v) in p.iter().enumerate() {
            mean[d] += v;
            m2[d] += v * v;
        }
    }
    let inv = 1.0 / sample as f64;
    let mut var: Vec<(f64, usize)> = (0..dim)
        .map(|d| {
            mean[d] *= inv;
            (m2[d] * inv - mean[d] * mean[d], d)
        })
        .collect();
    let n_cand = dim.min(DIM_CANDIDATES);
    var.sort_unstable_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    let pick = rng.random_range(0..n_cand);
    let split_dim = var[pick].1;
    let cut = mean[split_dim];

    // Two-pointer partition on value < cut; deterministic for a fixed id order.
    let mut i = lo;
    for j in lo..hi {
        if points[ids[j] as usize * dim + split_dim] < cut {
            ids.swap(i, j);
            i += 1;
        }
    }
    let mut pos = i - lo;
    let mut cut = cut;
    if pos == 0 || pos == len {
        // Degenerate mean split (heavily duplicated values); fall back to the
        // median of the range.
        ids[lo..hi].sort_unstable_by(|&a, &b| {
            points[a as usize * dim + split_dim]
                .total_cmp(&points[b as usize * dim + split_dim])
                .then_with(|| a.cmp(&b))
        });
        pos = len / 2;
        let lo_v = points[ids[lo + pos - 1] as usize * dim + split_dim];
        let hi_v = points[ids[lo + pos] as usize * dim + split_dim];
        cut = 0.5 * (lo_v + hi_v);
    }

    let left = nodes.len();
    nodes.push(Node::Leaf { start: 0, len: 0 });
    let right = nodes.len();
    nodes.push(Node::Leaf { start: 0, len: 0 });
    nodes[node_ix] = Node::Split {
        dim: split_dim as u32,
        cut,
        left: left as u32,
        right: right as u32,
    };
    build_node(points, dim, leaf_size, rng, ids, nodes, left, lo, lo + pos);
    build_node(points, dim, leaf_size, rng, ids, nodes, right, lo + pos, hi);
}

/// Build an index over one feature kind of a dataset view.
pub fn build_index(
    view: &DatasetView<'_>,
    which: IndexedFeatures,
    mode: IndexMode,
    params: ApproxParams,
) -> Result<DescriptorIndex> {
    let ds = view.dataset();
    let dim = match which {
        IndexedFeatures::Keypoints => ds.d_kp(),
        IndexedFeatures::Vectors => ds.d_dv(),
    };

    let mut points = Vec::new();
    let mut owner = Vec::new();
    let mut subject_ids = Vec::new();
    let mut instance_labels = Vec::new();
    let mut group_labels = Vec::new();
    let mut subject_points = Vec::new();

    for s in view.subjects() {
        let slot = subject_ids.len() as u32;
        let mut n_points = 0usize;
        match which {
            IndexedFeatures::Keypoints => {
                for kp in &s.keypoints {
                    points.extend_from_slice(&kp.descriptor);
                    owner.push(slot);
                    n_points += 1;
                }
            }
            IndexedFeatures::Vectors => {
                if let Some(v) = &s.deep_vector {
                    points.extend_from_slice(v.values());
                    owner.push(slot);
                    n_points += 1;
                }
            }
        }
        if n_points > 0 {
            subject_ids.push(Arc::<str>::from(s.subject_id.as_str()));
            instance_labels.push(Arc::<str>::from(s.instance_label.as_str()));
            group_labels.push(Arc::<str>::from(s.group_label.as_str()));
            subject_points.push(n_points);
        }
    }
    if owner.is_empty() {
        return Err(Error::EmptyDescriptorSet);
    }

    let n = owner.len();
    let class_tables = [
        build_class_table(&subject_ids, &subject_points),
        build_class_table(&instance_labels, &subject_points),
        build_class_table(&group_labels, &subject_points),
    ];

    let trees = match mode {
        IndexMode::Exact => Vec::new(),
        IndexMode::Approximate => (0..params.trees.max(1))
            .map(|t| {
                let mut rng = ChaCha12Rng::seed_from_u64(
                    params.seed ^ (t as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15),
                );
                build_tree(&points, dim, n, params.leaf_size, &mut rng)
            })
            .collect(),
    };

    Ok(DescriptorIndex {
        dim,
        which,
        mode,
        params,
        points,
        owner,
        subject_ids,
        instance_labels,
        group_labels,
        subject_points,
        class_tables,
        trees,
    })
}

fn build_class_table(subject_labels: &[Arc<str>], subject_points: &[usize]) -> ClassTable {
    let mut labels: Vec<Arc<str>> = Vec::new();
    let mut slot_by_label: HashMap<Arc<str>, u32> = HashMap::new();
    let mut subject_class = Vec::with_capacity(subject_labels.len());
    let mut totals: Vec<usize> = Vec::new();
    for (s, label) in subject_labels.iter().enumerate() {
        let slot = *slot_by_label.entry(label.clone()).or_insert_with(|| {
            labels.push(label.clone());
            totals.push(0);
            (labels.len() - 1) as u32
        });
        subject_class.push(slot);
        totals[slot as usize] += subject_points[s];
    }
    ClassTable {
        labels,
        slot_by_label,
        subject_class,
        totals,
    }
}

impl DescriptorIndex {
    pub fn len(&self) -> usize {
        self.owner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.owner.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mode(&self) -> IndexMode {
        self.mode
    }

    pub fn which(&self) -> IndexedFeatures {
        self.which
    }

    pub fn params(&self) -> &ApproxParams {
        &self.params
    }

    pub fn point(&self, ix: usize) -> &[f64] {
        &self.points[ix * self.dim..(ix + 1) * self.dim]
    }

    fn subject_slot(&self, subject_id: &str) -> Option<u32> {
        // Subject count is the dataset size; linear probe would be O(n) per
        // query, so reuse the subject-level class table (one class per id).
        self.class_tables[0].slot(subject_id)
    }

    /// Class labels under `class_by`, in canonical (first-appearance) order.
    pub fn class_labels(&self, class_by: ClassBy) -> &[Arc<str>] {
        &self.class_tables[class_table_ix(class_by)].labels
    }

    pub fn class_slot(&self, class_by: ClassBy, label: &str) -> Option<usize> {
        self.class_tables[class_table_ix(class_by)]
            .slot(label)
            .map(|s| s as usize)
    }

    pub(crate) fn class_slot_of_point(&self, class_by: ClassBy, point: usize) -> usize {
        let table = &self.class_tables[class_table_ix(class_by)];
        table.subject_class[self.owner[point] as usize] as usize
    }

    pub fn n_classes(&self, class_by: ClassBy) -> usize {
        self.class_tables[class_table_ix(class_by)].labels.len()
    }

    /// Number of indexed points of class `label`, optionally with one subject
    /// excluded. This is the N_k normalizer of the kernel likelihoods.
    pub fn class_point_count(
        &self,
        class_by: ClassBy,
        label: &str,
        exclude_subject: Option<&str>,
    ) -> usize {
        let table = &self.class_tables[class_table_ix(class_by)];
        let Some(slot) = table.slot(label) else {
            return 0;
        };
        let mut total = table.totals[slot as usize];
        if let Some(ex) = exclude_subject {
            if let Some(ex_slot) = self.subject_slot(ex) {
                if table.subject_class[ex_slot as usize] == slot {
                    total -= self.subject_points[ex_slot as usize];
                }
            }
        }
        total
    }

    /// Like [`Self::class_point_count`] but for a class slot, skipping the
    /// label lookup in inner loops.
    pub(crate) fn class_point_count_by_slot(
        &self,
        class_by: ClassBy,
        slot: usize,
        exclude_slot: Option<u32>,
    ) -> usize {
        let table = &self.class_tables[class_table_ix(class_by)];
        let mut total = table.totals[slot];
        if let Some(ex) = exclude_slot {
            if table.subject_class[ex as usize] == slot as u32 {
                total -= self.subject_points[ex as usize];
            }
        }
        total
    }

    pub(crate) fn exclude_slot(&self, exclude_subject: Option<&str>) -> Option<u32> {
        exclude_subject.and_then(|s| self.subject_slot(s))
    }

    /// k nearest neighbors of `query`, skipping points owned by
    /// `exclude_subject`.
    pub fn knn(
        &self,
        query: &[f64],
        k: usize,
        exclude_subject: Option<&str>,
    ) -> Result<Vec<NeighborHit>> {
        self.check_dim(query)?;
        let exclude = self.exclude_slot(exclude_subject);
        let mut raw = Vec::new();
        self.knn_raw(query, k, exclude, &mut raw);
        Ok(raw
            .into_iter()
            .map(|c| {
                let owner = self.owner[c.id as usize] as usize;
                NeighborHit {
                    point_index: c.id as usize,
                    distance: c.d2.sqrt(),
                    subject_id: self.subject_ids[owner].clone(),
                    instance_label: self.instance_labels[owner].clone(),
                    group_label: self.group_labels[owner].clone(),
                }
            })
            .collect())
    }

    /// Exact nearest-neighbor distance regardless of index mode. Used when an
    /// adaptive bandwidth must be exact on an approximate index.
    pub fn nearest_distance_exact(
        &self,
        query: &[f64],
        exclude_subject: Option<&str>,
    ) -> Result<Option<f64>> {
        self.check_dim(query)?;
        let exclude = self.exclude_slot(exclude_subject);
        let mut best: Option<Cand> = None;
        for id in 0..self.owner.len() as u32 {
            if Some(self.owner[id as usize]) == exclude {
                continue;
            }
            let d2 = dist2(query, self.point(id as usize));
            let cand = Cand { d2, id };
            if best.is_none_or(|b| cand < b) {
                best = Some(cand);
            }
        }
        Ok(best.map(|c| c.d2.sqrt()))
    }

    fn check_dim(&self, query: &[f64]) -> Result<()> {
        if query.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "query descriptor".into(),
                expected: self.dim,
                got: query.len(),
            });
        }
        Ok(())
    }

    /// Raw k-NN: (distance², point id) pairs sorted ascending with the id
    /// tie-break, exclusion already applied.
    pub(crate) fn knn_raw(
        &self,
        query: &[f64],
        k: usize,
        exclude: Option<u32>,
        out: &mut Vec<Cand>,
    ) {
        out.clear();
        if k == 0 {
            return;
        }
        match self.mode {
            IndexMode::Exact => self.knn_exact(query, k, exclude, out),
            IndexMode::Approximate => self.knn_approx(query, k, exclude, out),
        }
    }

    fn knn_exact(&self, query: &[f64], k: usize, exclude: Option<u32>, out: &mut Vec<Cand>) {
        let n = self.owner.len();
        if k >= n {
            for id in 0..n as u32 {
                if Some(self.owner[id as usize]) == exclude {
                    continue;
                }
                out.push(Cand {
                    d2: dist2(query, self.point(id as usize)),
                    id,
                });
            }
            out.sort_unstable();
            return;
        }
        let mut heap: BinaryHeap<Cand> = BinaryHeap::with_capacity(k + 1);
        for id in 0..n as u32 {
            if Some(self.owner[id as usize]) == exclude {
                continue;
            }
            let cand = Cand {
                d2: dist2(query, self.point(id as usize)),
                id,
            };
            if heap.len() < k {
                heap.push(cand);
            } else if cand < *heap.peek().expect("non-empty heap") {
                heap.push(cand);
                heap.pop();
            }
        }
        out.extend(heap);
        out.sort_unstable();
    }

    fn knn_approx(&self, query: &[f64], k: usize, exclude: Option<u32>, out: &mut Vec<Cand>) {
        let n = self.owner.len();
        let k = k.min(n);
        let mut visited = vec![false; n];
        let mut best: BinaryHeap<Cand> = BinaryHeap::with_capacity(k + 1);
        let mut pending: BinaryHeap<Reverse<Pending>> = BinaryHeap::new();
        for t in 0..self.trees.len() as u32 {
            pending.push(Reverse(Pending {
                bound: 0.0,
                tree: t,
                node: 0,
            }));
        }
        let mut leaves_checked = 0usize;
        'search: while let Some(Reverse(p)) = pending.pop() {
            if best.len() == k {
                let worst = best.peek().expect("best non-empty").d2;
                if p.bound >= worst {
                    // Every remaining cell is at least this far; with the
                    // additive bound this is conservative, never optimistic.
                    break;
                }
            }
            let tree = &self.trees[p.tree as usize];
            let mut node_ix = p.node;
            let bound = p.bound;
            loop {
                match &tree.nodes[node_ix as usize] {
                    Node::Split {
                        dim,
                        cut,
                        left,
                        right,
                    } => {
                        let delta = query[*dim as usize] - cut;
                        let (near, far) = if delta < 0.0 {
                            (*left, *right)
                        } else {
                            (*right, *left)
                        };
                        pending.push(Reverse(Pending {
                            bound: bound + delta * delta,
                            tree: p.tree,
                            node: far,
                        }));
                        node_ix = near;
                    }
                    Node::Leaf { start, len } => {
                        for &id in &tree.ids[*start as usize..(*start + *len) as usize] {
                            if visited[id as usize] {
                                continue;
                            }
                            visited[id as usize] = true;
                            if Some(self.owner[id as usize]) == exclude {
                                continue;
                            }
                            let cand = Cand {
                                d2: dist2(query, self.point(id as usize)),
                                id,
                            };
                            if best.len() < k {
                                best.push(cand);
                            } else if cand < *best.peek().expect("non-empty heap") {
                                best.push(cand);
                                best.pop();
                            }
                        }
                        leaves_checked += 1;
                        if leaves_checked >= self.params.max_checked_leaves && best.len() >= k {
                            break 'search;
                        }
                        break;
                    }
                }
            }
        }
        out.extend(best);
        out.sort_unstable();
    }

    /// Per-class truncated kernel mass around `query`:
    /// sum over the `k_trunc` nearest admissible neighbors of
    /// exp(-distance² / bandwidth_sq), accumulated per class label in
    /// ascending point-index order.
    pub fn range_kernel_sums(
        &self,
        query: &[f64],
        bandwidth_sq: f64,
        k_trunc: usize,
        exclude_subject: Option<&str>,
        class_by: ClassBy,
    ) -> Result<HashMap<Arc<str>, f64>> {
        self.check_dim(query)?;
        if bandwidth_sq.is_nan() || bandwidth_sq <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "bandwidth_sq must be positive, got {bandwidth_sq}"
            )));
        }
        let exclude = self.exclude_slot(exclude_subject);
        let mut raw = Vec::new();
        self.knn_raw(query, k_trunc, exclude, &mut raw);
        raw.sort_unstable_by_key(|c| c.id);
        let table = &self.class_tables[class_table_ix(class_by)];
        let mut acc: HashMap<Arc<str>, f64> = HashMap::new();
        for c in &raw {
            let slot = table.subject_class[self.owner[c.id as usize] as usize] as usize;
            let mass = (-c.d2 / bandwidth_sq).exp();
            *acc.entry(table.labels[slot].clone()).or_insert(0.0) += mass;
        }
        Ok(acc)
    }

    /// Serialize to a versioned little-endian binary file so large corpora
    /// load without a rebuild.
    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut buf: Vec<u8> = Vec::new();
        buf.extend_from_slice(b"MDX1");
        buf.push(match self.mode {
            IndexMode::Exact => 0,
            IndexMode::Approximate => 1,
        });
        buf.push(match self.which {
            IndexedFeatures::Keypoints => 0,
            IndexedFeatures::Vectors => 1,
        });
        buf.extend_from_slice(&(self.dim as u32).to_le_bytes());
        buf.extend_from_slice(&(self.owner.len() as u64).to_le_bytes());
        buf.extend_from_slice(&(self.params.trees as u32).to_le_bytes());
        buf.extend_from_slice(&(self.params.leaf_size as u32).to_le_bytes());
        buf.extend_from_slice(&(self.params.max_checked_leaves as u32).to_le_bytes());
        buf.extend_from_slice(&self.params.seed.to_le_bytes());

        buf.extend_from_slice(&(self.subject_ids.len() as u32).to_le_bytes());
        for s in 0..self.subject_ids.len() {
            for label in [
                &self.subject_ids[s],
                &self.instance_labels[s],
                &self.group_labels[s],
            ] {
                let bytes = label.as_bytes();
                buf.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
                buf.extend_from_slice(bytes);
            }
        }
        for &o in &self.owner {
            buf.extend_from_slice(&o.to_le_bytes());
        }
        for &v in &self.points {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&(self.trees.len() as u32).to_le_bytes());
        for tree in &self.trees {
            buf.extend_from_slice(&(tree.nodes.len() as u32).to_le_bytes());
            for node in &tree.nodes {
                match node {
                    Node::Leaf { start, len } => {
                        buf.push(0);
                        buf.extend_from_slice(&start.to_le_bytes());
                        buf.extend_from_slice(&len.to_le_bytes());
                    }
                    Node::Split {
                        dim,
                        cut,
                        left,
                        right,
                    } => {
                        buf.push(1);
                        buf.extend_from_slice(&dim.to_le_bytes());
                        buf.extend_from_slice(&cut.to_le_bytes());
                        buf.extend_from_slice(&left.to_le_bytes());
                        buf.extend_from_slice(&right.to_le_bytes());
                    }
                }
            }
            buf.extend_from_slice(&(tree.ids.len() as u32).to_le_bytes());
            for &id in &tree.ids {
                buf.extend_from_slice(&id.to_le_bytes());
            }
        }
        crate::io::write_atomic(path, &buf)
    }

    pub fn read_from(path: &Path) -> Result<DescriptorIndex> {
        let mut file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut buf = Vec::new();
        file.read_to_end(&mut buf).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut rd = Cursor {
            buf: &buf,
            pos: 0,
            path,
        };
        let magic = rd.take(4)?;
        if magic != b"MDX1" {
            return Err(rd.err("bad magic, not an MDX1 index file"));
        }
        let mode = match rd.u8()? {
            0 => IndexMode::Exact,
            1 => IndexMode::Approximate,
            m => return Err(rd.err(&format!("unknown mode byte {m}"))),
        };
        let which = match rd.u8()? {
            0 => IndexedFeatures::Keypoints,
            1 => IndexedFeatures::Vectors,
            w => return Err(rd.err(&format!("unknown feature byte {w}"))),
        };
        let dim = rd.u32()? as usize;
        let count = rd.u64()? as usize;
        let params = ApproxParams {
            trees: rd.u32()? as usize,
            leaf_size: rd.u32()? as usize,
            max_checked_leaves: rd.u32()? as usize,
            seed: rd.u64()?,
        };
        let n_subjects = rd.u32()? as usize;
        let mut subject_ids = Vec::with_capacity(n_subjects);
        let mut instance_labels = Vec::with_capacity(n_subjects);
        let mut group_labels = Vec::with_capacity(n_subjects);
        for _ in 0..n_subjects {
            subject_ids.push(rd.string()?);
            instance_labels.push(rd.string()?);
            group_labels.push(rd.string()?);
        }
        let mut owner = Vec::with_capacity(count);
        let mut subject_points = vec![0usize; n_subjects];
        for _ in 0..count {
            let o = rd.u32()?;
            if o as usize >= n_subjects {
                return Err(rd.err("owner slot out of range"));
            }
            subject_points[o as usize] += 1;
            owner.push(o);
        }
        let mut points = Vec::with_capacity(count * dim);
        for _ in 0..count * dim {
            points.push(rd.f64()?);
        }
        let n_trees = rd.u32()? as usize;
        let mut trees = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            let n_nodes = rd.u32()? as usize;
            let mut nodes = Vec::with_capacity(n_nodes);
            for _ in 0..n_nodes {
                match rd.u8()? {
                    0 => nodes.push(Node::Leaf {
                        start: rd.u32()?,
                        len: rd.u32()?,
                    }),
                    1 => nodes.push(Node::Split {
                        dim: rd.u32()?,
                        cut: rd.f64()?,
                        left: rd.u32()?,
                        right: rd.u32()?,
                    }),
                    t => return Err(rd.err(&format!("unknown node tag {t}"))),
                }
            }
            let n_ids = rd.u32()? as usize;
            let mut ids = Vec::with_capacity(n_ids);
            for _ in 0..n_ids {
                ids.push(rd.u32()?);
            }
            trees.push(KdTree { nodes, ids });
        }

        let class_tables = [
            build_class_table(&subject_ids, &subject_points),
            build_class_table(&instance_labels, &subject_points),
            build_class_table(&group_labels, &subject_points),
        ];
        Ok(DescriptorIndex {
            dim,
            which,
            mode,
            params,
            points,
            owner,
            subject_ids,
            instance_labels,
            group_labels,
            subject_points,
            class_tables,
            trees,
        })
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line: 0,
            msg: format!("offset {}: {msg}", self.pos),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(self.err("unexpected end of file"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn string(&mut self) -> Result<Arc<str>> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        std::str::from_utf8(bytes)
            .map(Arc::<str>::from)
            .map_err(|_| self.err("invalid utf-8 in label"))
    }
}
