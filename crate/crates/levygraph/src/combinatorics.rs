//! Leg labels, subset/partition enumeration, Bell numbers, and the
//! multiplicity factors used by the one-dimensional fast path.
//!
//! Legs are flattened positions `0..n` over an ordered list of vertices;
//! [`LabelSet`] keeps the position -> (vertex, slot) correspondence.
//! Partitions are kept in a canonical form (each block ascending, blocks
//! ordered by least element) so that equality and hashing are structural.

use thiserror::Error;

/// Hard cap on subset enumeration (2^n subsets).
pub const MAX_SUBSET_LEGS: usize = 24;
/// Hard cap on set-partition enumeration (Bell(n) partitions).
pub const MAX_PARTITION_LEGS: usize = 14;
/// Largest index for which `bell_number` is served from the exact table.
pub const MAX_BELL_INDEX: usize = 25;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CombinatoricsError {
    #[error("bell number index {0} exceeds exact cap {MAX_BELL_INDEX}")]
    BellCap(usize),
    #[error("subset enumeration over {0} legs exceeds cap {MAX_SUBSET_LEGS}")]
    SubsetCap(usize),
    #[error("partition enumeration over {0} legs exceeds cap {MAX_PARTITION_LEGS}")]
    PartitionCap(usize),
    #[error("blocks must be disjoint, nonempty, and cover the ground set")]
    MalformedPartition,
    #[error("block sizes must be positive")]
    ZeroPart,
}

/// Flattened leg labels for an ordered list of vertices.
///
/// Vertex `q` with `leg_counts[q] = p` contributes positions
/// `offset(q) .. offset(q)+p`, each carrying the label `(q, s)` with slot
/// `s` in `0..p`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelSet {
    leg_counts: Vec<usize>,
    offsets: Vec<usize>,
    total: usize,
}

impl LabelSet {
    pub fn new(leg_counts: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(leg_counts.len());
        let mut total = 0;
        for &p in leg_counts {
            offsets.push(total);
            total += p;
        }
        LabelSet {
            leg_counts: leg_counts.to_vec(),
            offsets,
            total,
        }
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn n_vertices(&self) -> usize {
        self.leg_counts.len()
    }

    pub fn leg_counts(&self) -> &[usize] {
        &self.leg_counts
    }

    /// (vertex, slot) carried by a flattened position.
    pub fn label(&self, position: usize) -> (usize, usize) {
        let q = self.vertex_of(position);
        (q, position - self.offsets[q])
    }

    /// Vertex owning a flattened position.
    pub fn vertex_of(&self, position: usize) -> usize {
        debug_assert!(position < self.total);
        match self.offsets.binary_search(&position) {
            Ok(q) => {
                // Skip zero-leg vertices sharing the same offset.
                let mut q = q;
                while self.leg_counts[q] == 0 {
                    q += 1;
                }
                q
            }
            Err(ins) => ins - 1,
        }
    }

    /// Flattened position range of one vertex.
    pub fn positions_of(&self, vertex: usize) -> std::ops::Range<usize> {
        let start = self.offsets[vertex];
        start..start + self.leg_counts[vertex]
    }
}

/// Set partition in canonical form: blocks ascending internally, ordered by
/// least element. Constructors maintain the invariant.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    pub fn empty() -> Self {
        Partition { blocks: Vec::new() }
    }

    /// Canonicalize and validate `blocks` as a partition of exactly the
    /// elements in `ground` (order of `ground` irrelevant).
    pub fn try_new(blocks: Vec<Vec<usize>>, ground: &[usize]) -> Result<Self, CombinatoricsError> {
        let mut blocks: Vec<Vec<usize>> = blocks;
        let mut seen: Vec<usize> = Vec::new();
        for b in &mut blocks {
            if b.is_empty() {
                return Err(CombinatoricsError::MalformedPartition);
            }
            b.sort_unstable();
            if b.windows(2).any(|w| w[0] == w[1]) {
                return Err(CombinatoricsError::MalformedPartition);
            }
            seen.extend_from_slice(b);
        }
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(CombinatoricsError::MalformedPartition);
        }
        let mut want: Vec<usize> = ground.to_vec();
        want.sort_unstable();
        if seen != want {
            return Err(CombinatoricsError::MalformedPartition);
        }
        blocks.sort_by_key(|b| b[0]);
        Ok(Partition { blocks })
    }

    /// Construct from blocks already in canonical form (ascending blocks,
    /// ordered by least element). Enumeration hot paths use this to skip
    /// revalidation.
    pub(crate) fn from_canonical_blocks(blocks: Vec<Vec<usize>>) -> Self {
        debug_assert!(blocks.iter().all(|b| b.windows(2).all(|w| w[0] < w[1])));
        debug_assert!(blocks.windows(2).all(|w| w[0][0] < w[1][0]));
        Partition { blocks }
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.len()).collect()
    }
}

/// Iterator over all subsets of `0..n` in binary counting order (so the
/// empty set comes first and the full set last).
pub struct SubsetIter {
    n: usize,
    next_mask: u64,
    end: u64,
}

impl Iterator for SubsetIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.next_mask == self.end {
            return None;
        }
        let mask = self.next_mask;
        self.next_mask += 1;
        Some((0..self.n).filter(|i| mask >> i & 1 == 1).collect())
    }
}

pub fn enumerate_subsets(n: usize) -> Result<SubsetIter, CombinatoricsError> {
    if n > MAX_SUBSET_LEGS {
        return Err(CombinatoricsError::SubsetCap(n));
    }
    Ok(SubsetIter {
        n,
        next_mask: 0,
        end: 1u64 << n,
    })
}

/// Iterator over all set partitions of `0..n` via restricted-growth
/// strings. For `n = 0` it yields exactly the empty partition, matching
/// the convention that the empty set has one partition.
pub struct PartitionIter {
    rgs: Vec<usize>,
    fresh: bool,
    done: bool,
}

impl PartitionIter {
    fn emit(&self) -> Partition {
        let n_blocks = self.rgs.iter().copied().max().map_or(0, |m| m + 1);
        let mut blocks = vec![Vec::new(); n_blocks];
        for (i, &b) in self.rgs.iter().enumerate() {
            blocks[b].push(i);
        }
        // Restricted-growth numbering orders blocks by least element and
        // fills them ascending, so this is already canonical.
        Partition { blocks }
    }

    fn advance(&mut self) -> bool {
        let n = self.rgs.len();
        // Find the rightmost position (>= 1) that can be incremented:
        // rgs[i] may grow up to max(rgs[0..i]) + 1.
        for i in (1..n).rev() {
            let prefix_max = self.rgs[..i].iter().copied().max().unwrap_or(0);
            if self.rgs[i] <= prefix_max {
                self.rgs[i] += 1;
                for j in i + 1..n {
                    self.rgs[j] = 0;
                }
                return true;
            }
        }
        false
    }
}

impl Iterator for PartitionIter {
    type Item = Partition;

    fn next(&mut self) -> Option<Partition> {
        if self.done {
            return None;
        }
        if self.fresh {
            self.fresh = false;
            if self.rgs.is_empty() {
                self.done = true;
                return Some(Partition::empty());
            }
            return Some(self.emit());
        }
        if self.advance() {
            Some(self.emit())
        } else {
            self.done = true;
            None
        }
    }
}

pub fn enumerate_partitions(n: usize) -> Result<PartitionIter, CombinatoricsError> {
    if n > MAX_PARTITION_LEGS {
        return Err(CombinatoricsError::PartitionCap(n));
    }
    Ok(PartitionIter {
        rgs: vec![0; n],
        fresh: true,
        done: false,
    })
}

/// Exact Bell number via the Bell triangle.
pub fn bell_number(m: usize) -> Result<u128, CombinatoricsError> {
    if m > MAX_BELL_INDEX {
        return Err(CombinatoricsError::BellCap(m));
    }
    let mut row: Vec<u128> = vec![1];
    let mut bell = 1u128; // Bell(0)
    for _ in 0..m {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(*row.last().unwrap());
        for &v in &row {
            let last = *next.last().unwrap();
            next.push(last + v);
        }
        bell = next[0];
        row = next;
    }
    Ok(bell)
}

/// Solve `lambda * ln(lambda) = m` by Newton iteration (`m > 0`).
pub fn bell_lambda(m: f64) -> f64 {
    assert!(m > 0.0, "bell_lambda needs m > 0");
    let mut lam = (m / (m + 1.0).ln()).max(1.2);
    for _ in 0..200 {
        let f = lam * lam.ln() - m;
        let fp = lam.ln() + 1.0;
        let step = f / fp;
        lam -= step;
        if step.abs() <= 1e-14 * lam.max(1.0) {
            break;
        }
    }
    lam
}

/// Leading-order Bell asymptotic `m^{-1/2} lambda^{m+1/2} e^{lambda-m-1}`
/// with `lambda ln lambda = m`. Overestimates the exact value by a slowly
/// decreasing factor (about 28% at m = 10, 22% at m = 20).
pub fn bell_asymptotic(m: f64) -> f64 {
    let lam = bell_lambda(m);
    let log = -0.5 * m.ln() + (m + 0.5) * lam.ln() + (lam - m - 1.0);
    log.exp()
}

/// Number of unordered set partitions of `sum(parts)` labeled items into
/// blocks of the given sizes: `P! / (prod l_i! * prod_v mult_v!)` where
/// `mult_v` counts repeated sizes. The empty list yields 1.
pub fn h_factor(parts: &[usize]) -> Result<u128, CombinatoricsError> {
    if parts.contains(&0) {
        return Err(CombinatoricsError::ZeroPart);
    }
    let total: usize = parts.iter().sum();
    if total > 20 {
        // 21! overflows the intermediate multinomial comfort zone.
        return Err(CombinatoricsError::PartitionCap(total));
    }
    // Stepwise multinomial: prod over parts of C(consumed + l, l).
    let mut result: u128 = 1;
    let mut consumed = 0usize;
    for &l in parts {
        result *= binomial(consumed + l, l);
        consumed += l;
    }
    // Divide by mult! over repeated sizes (exact: the quotient counts
    // unordered partitions).
    let mut sorted = parts.to_vec();
    sorted.sort_unstable();
    let mut denom = 1u128;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        denom *= factorial((j - i) as u128);
        i = j;
    }
    debug_assert_eq!(result % denom, 0);
    Ok(result / denom)
}

pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

fn factorial(n: u128) -> u128 {
    (1..=n).product::<u128>().max(1)
}

/// All integer partitions of `n` as descending part lists (the partition
/// of 0 is the empty list). Materialized: partition counts stay small for
/// the leg totals the caps allow (p(24) = 1575).
pub fn integer_partitions(n: usize) -> Vec<Vec<usize>> {
    fn rec(remaining: usize, max_part: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if remaining == 0 {
            out.push(prefix.clone());
            return;
        }
        for part in (1..=remaining.min(max_part)).rev() {
            prefix.push(part);
            rec(remaining - part, part, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, n, &mut Vec::new(), &mut out);
    out
}

/// Connectivity of the bipartite-style structure in which each vertex of
/// `legs` is a node, each block of `partition` is a node joined to the
/// vertices its legs belong to, and `k` legs hang off their own vertex
/// (degree-one attachments never affect connectivity).
///
/// `k` and the blocks of `partition` must together partition all of
/// `legs`. The empty structure (no vertices) counts as disconnected so
/// that sums over connected structures start at one vertex.
pub fn is_connected_pair(
    legs: &LabelSet,
    k: &[usize],
    partition: &Partition,
) -> Result<bool, CombinatoricsError> {
    let n = legs.len();
    let mut covered = vec![false; n];
    let mut mark = |pos: usize| -> Result<(), CombinatoricsError> {
        if pos >= n || covered[pos] {
            return Err(CombinatoricsError::MalformedPartition);
        }
        covered[pos] = true;
        Ok(())
    };
    for &pos in k {
        mark(pos)?;
    }
    for b in partition.blocks() {
        for &pos in b {
            mark(pos)?;
        }
    }
    if covered.iter().any(|&c| !c) {
        return Err(CombinatoricsError::MalformedPartition);
    }

    let m = legs.n_vertices();
    if m == 0 {
        return Ok(false);
    }
    let mut uf = UnionFind::new(m + partition.n_blocks());
    for (j, b) in partition.blocks().iter().enumerate() {
        for &pos in b {
            uf.union(m + j, legs.vertex_of(pos));
        }
    }
    let root0 = uf.find(0);
    Ok((1..m + partition.n_blocks()).all(|i| uf.find(i) == root0))
}

/// Advance a mixed-radix odometer (last position fastest); `limits[i]` is
/// the exclusive bound of `idx[i]`. Returns false when exhausted.
pub(crate) fn advance_odometer(idx: &mut [usize], limits: &[usize]) -> bool {
    for pos in (0..idx.len()).rev() {
        if idx[pos] + 1 < limits[pos] {
            idx[pos] += 1;
            for slot in idx.iter_mut().skip(pos + 1) {
                *slot = 0;
            }
            return true;
        }
    }
    false
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}
