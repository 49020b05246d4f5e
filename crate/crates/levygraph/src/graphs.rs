//! Generalized amputated graphs: enumeration of `(K, I)` wiring pairs over
//! vertex leg sets, canonical labeling, topological grouping, and the
//! quadratic-potential specialization.
//!
//! A graph at order `m` consists of `m` full vertices whose leg counts are
//! drawn from the nonzero degrees of the potential; a subset `K` of the
//! flattened legs is wired to external degree-one attachments, and the
//! complement is partitioned into blocks, one per internal node. The count
//! of such pairs over a fixed quadratic leg set of size `2m` is
//! `Bell(2m + 1)`.

use crate::combinatorics::{
    advance_odometer, enumerate_partitions, enumerate_subsets, is_connected_pair,
    CombinatoricsError, LabelSet, Partition, PartitionIter, SubsetIter, MAX_PARTITION_LEGS,
};
use crate::model::{OperatorSymbol, Potential};
use std::collections::BTreeMap;
use std::collections::BTreeSet;
use thiserror::Error;

/// Cap on total vertex count (full + external + internal) for canonical
/// labeling; the minimization enumerates the full relabeling group.
pub const MAX_CANON_VERTICES: usize = 16;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error(transparent)]
    Combinatorics(#[from] CombinatoricsError),
    #[error("canonical labeling over {0} total vertices exceeds cap {MAX_CANON_VERTICES}")]
    CanonCap(usize),
    #[error("graph references leg position {0} beyond the leg set")]
    LegOutOfRange(usize),
    #[error("potential has no nonzero coefficient to place on vertices")]
    EmptyPotential,
}

/// One wiring pair `(K, I)` over an ordered list of full vertices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeynmanGraph {
    /// Leg count of each full vertex, in vertex order.
    pub leg_counts: Vec<usize>,
    /// Flattened leg positions wired to external attachments, ascending.
    pub k_legs: Vec<usize>,
    /// Partition blocks of the remaining legs (canonical form).
    pub blocks: Vec<Vec<usize>>,
    /// Whether full vertices and internal nodes form one component.
    pub connected: bool,
}

impl FeynmanGraph {
    pub fn order(&self) -> usize {
        self.leg_counts.len()
    }

    pub fn total_legs(&self) -> usize {
        self.leg_counts.iter().sum()
    }

    /// Total vertex count: full vertices, external attachments, internal
    /// nodes.
    pub fn total_vertices(&self) -> usize {
        self.order() + self.k_legs.len() + self.blocks.len()
    }

    /// One-line debug form, stable across runs:
    /// `p=(2,2) K={0,3} I=[{1,2}] connected=1 key=<hex>`.
    pub fn dump(&self) -> String {
        let p = self
            .leg_counts
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let k = self
            .k_legs
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                format!(
                    "{{{}}}",
                    b.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
                )
            })
            .collect::<Vec<_>>()
            .join(",");
        let key = match canonical_key(self) {
            Ok(bytes) => bytes.iter().map(|b| format!("{b:02x}")).collect::<String>(),
            Err(_) => "unavailable".to_string(),
        };
        format!(
            "p=({p}) K={{{k}}} I=[{blocks}] connected={} key={key}",
            u8::from(self.connected)
        )
    }
}

/// Validate raw `(K, I)` data against a leg set and build the graph.
pub fn pair_to_graph(
    leg_counts: Vec<usize>,
    k_legs: Vec<usize>,
    blocks: Vec<Vec<usize>>,
) -> Result<FeynmanGraph, GraphError> {
    let labels = LabelSet::new(&leg_counts);
    let n = labels.len();
    if k_legs.iter().chain(blocks.iter().flatten()).any(|&i| i >= n) {
        let bad = *k_legs
            .iter()
            .chain(blocks.iter().flatten())
            .find(|&&i| i >= n)
            .unwrap();
        return Err(GraphError::LegOutOfRange(bad));
    }
    let mut k_sorted = k_legs;
    k_sorted.sort_unstable();
    let rest: Vec<usize> = (0..n).filter(|i| k_sorted.binary_search(i).is_err()).collect();
    let partition = Partition::try_new(blocks, &rest)?;
    let connected = is_connected_pair(&labels, &k_sorted, &partition)?;
    Ok(FeynmanGraph {
        leg_counts,
        k_legs: k_sorted,
        blocks: partition.blocks().to_vec(),
        connected,
    })
}

/// Inverse of [`pair_to_graph`]: the underlying `(K, I)` data.
pub fn graph_to_pair(g: &FeynmanGraph) -> (&[usize], &[usize], &[Vec<usize>]) {
    (&g.leg_counts, &g.k_legs, &g.blocks)
}

/// Block sizes whose contribution vanishes identically, used to skip
/// graphs during enumeration.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PruneRules {
    pub zero_cumulant_orders: BTreeSet<usize>,
}

impl PruneRules {
    pub fn none() -> Self {
        PruneRules::default()
    }

    /// Prune block sizes whose symbol coefficient tensor is identically
    /// zero (for a centered process that includes singletons).
    pub fn from_symbol(sym: &OperatorSymbol) -> Self {
        let zero_cumulant_orders = (1..=sym.max_order())
            .filter(|&n| sym.order_is_zero(n))
            .collect();
        PruneRules { zero_cumulant_orders }
    }

    pub fn allows(&self, partition: &Partition) -> bool {
        partition
            .blocks()
            .iter()
            .all(|b| !self.zero_cumulant_orders.contains(&b.len()))
    }
}

/// Streaming enumeration of all order-`m` graphs over the nonzero degrees
/// of a potential: ordered degree tuples, then every `(K, I)` pair, with
/// pruned partitions skipped. Nothing is materialized.
pub struct GraphStream {
    degrees: Vec<usize>,
    m: usize,
    prune: PruneRules,
    state: Option<TupleState>,
    empty_emitted: bool,
}

struct TupleState {
    /// Index into `degrees` per vertex; odometer, least significant last.
    tuple: Vec<usize>,
    labels: LabelSet,
    subsets: SubsetIter,
    current: Option<KState>,
}

struct KState {
    k: Vec<usize>,
    rest: Vec<usize>,
    parts: PartitionIter,
}

/// Enumerate order-`m` graphs for the given potential. Fails fast when the
/// largest possible leg set would exceed the partition cap.
pub fn enumerate_graphs(
    m: usize,
    potential: &Potential,
    prune: &PruneRules,
) -> Result<GraphStream, GraphError> {
    let degrees = potential.nonzero_degrees();
    if degrees.is_empty() && m > 0 {
        return Err(GraphError::EmptyPotential);
    }
    let worst = m * degrees.iter().copied().max().unwrap_or(0);
    if worst > MAX_PARTITION_LEGS {
        return Err(GraphError::Combinatorics(CombinatoricsError::PartitionCap(
            worst,
        )));
    }
    let state = if m == 0 {
        None
    } else {
        let tuple = vec![0usize; m];
        Some(TupleState::new(tuple, &degrees))
    };
    Ok(GraphStream {
        degrees,
        m,
        prune: prune.clone(),
        state,
        empty_emitted: false,
    })
}

impl TupleState {
    fn new(tuple: Vec<usize>, degrees: &[usize]) -> Self {
        let leg_counts: Vec<usize> = tuple.iter().map(|&i| degrees[i]).collect();
        let labels = LabelSet::new(&leg_counts);
        let subsets = enumerate_subsets(labels.len()).expect("leg cap checked at construction");
        TupleState {
            tuple,
            labels,
            subsets,
            current: None,
        }
    }
}

impl Iterator for GraphStream {
    type Item = FeynmanGraph;

    fn next(&mut self) -> Option<FeynmanGraph> {
        if self.m == 0 {
            if self.empty_emitted {
                return None;
            }
            self.empty_emitted = true;
            return Some(FeynmanGraph {
                leg_counts: Vec::new(),
                k_legs: Vec::new(),
                blocks: Vec::new(),
                connected: false,
            });
        }
        loop {
            let st = self.state.as_mut()?;
            if let Some(ks) = st.current.as_mut() {
                for p in ks.parts.by_ref() {
                    if !self.prune.allows(&p) {
                        continue;
                    }
                    // `rest` ascending keeps mapped blocks canonical.
                    let blocks: Vec<Vec<usize>> = p
                        .blocks()
                        .iter()
                        .map(|b| b.iter().map(|&i| ks.rest[i]).collect())
                        .collect();
                    let mapped = Partition::from_canonical_blocks(blocks.clone());
                    let connected = is_connected_pair(&st.labels, &ks.k, &mapped)
                        .expect("stream invariant: K and blocks cover the legs");
                    return Some(FeynmanGraph {
                        leg_counts: st.labels.leg_counts().to_vec(),
                        k_legs: ks.k.clone(),
                        blocks,
                        connected,
                    });
                }
                st.current = None;
            }
            if let Some(k) = st.subsets.next() {
                let n = st.labels.len();
                let rest: Vec<usize> =
                    (0..n).filter(|i| k.binary_search(i).is_err()).collect();
                let parts =
                    enumerate_partitions(rest.len()).expect("leg cap checked at construction");
                st.current = Some(KState { k, rest, parts });
                continue;
            }
            // Advance the degree tuple odometer (last vertex fastest).
            let mut tuple = std::mem::take(&mut st.tuple);
            let limits = vec![self.degrees.len(); self.m];
            if !advance_odometer(&mut tuple, &limits) {
                self.state = None;
                return None;
            }
            *st = TupleState::new(tuple, &self.degrees);
        }
    }
}

/// Canonical byte key, minimal over vertex relabelings (restricted to
/// vertices of equal leg count, after sorting vertices by leg count) and
/// leg-slot relabelings within each vertex. Graphs with the same key have
/// identical evaluation.
pub fn canonical_key(g: &FeynmanGraph) -> Result<Vec<u8>, GraphError> {
    let total = g.total_vertices();
    if total > MAX_CANON_VERTICES {
        return Err(GraphError::CanonCap(total));
    }
    let m = g.order();
    // Stable order of vertices by ascending leg count.
    let mut vorder: Vec<usize> = (0..m).collect();
    vorder.sort_by_key(|&q| g.leg_counts[q]);
    let sorted_counts: Vec<usize> = vorder.iter().map(|&q| g.leg_counts[q]).collect();
    let mut slot_of: Vec<usize> = vec![0; m];
    for (slot, &q) in vorder.iter().enumerate() {
        slot_of[q] = slot;
    }
    let mut new_offsets = Vec::with_capacity(m);
    let mut acc = 0;
    for &c in &sorted_counts {
        new_offsets.push(acc);
        acc += c;
    }
    let old_labels = LabelSet::new(&g.leg_counts);

    // Equal-count classes over the sorted slots.
    let mut classes: Vec<(usize, usize)> = Vec::new(); // (start, len)
    let mut i = 0;
    while i < m {
        let mut j = i;
        while j < m && sorted_counts[j] == sorted_counts[i] {
            j += 1;
        }
        classes.push((i, j - i));
        i = j;
    }
    let class_perms: Vec<Vec<Vec<usize>>> = classes
        .iter()
        .map(|&(_, len)| permutations(len))
        .collect();
    let leg_perms: Vec<Vec<Vec<usize>>> =
        g.leg_counts.iter().map(|&p| permutations(p)).collect();

    let class_limits: Vec<usize> = class_perms.iter().map(Vec::len).collect();
    let leg_limits: Vec<usize> = leg_perms.iter().map(Vec::len).collect();
    let mut best: Option<Vec<u8>> = None;
    let mut class_idx = vec![0usize; classes.len()];
    loop {
        // sigma: new slot -> new slot, composed from class permutations.
        let mut sigma: Vec<usize> = (0..m).collect();
        for (c, &(start, _)) in classes.iter().enumerate() {
            let perm = &class_perms[c][class_idx[c]];
            for (offset, &target) in perm.iter().enumerate() {
                sigma[start + offset] = start + target;
            }
        }
        // Iterate leg permutations with an odometer over vertices.
        let mut leg_idx = vec![0usize; m];
        loop {
            let map_pos = |pos: usize| -> usize {
                let (q, s) = old_labels.label(pos);
                let slot = sigma[slot_of[q]];
                new_offsets[slot] + leg_perms[q][leg_idx[q]][s]
            };
            let candidate = serialize_candidate(g, &sorted_counts, &map_pos);
            if best.as_ref().is_none_or(|b| candidate < *b) {
                best = Some(candidate);
            }
            if !advance_odometer(&mut leg_idx, &leg_limits) {
                break;
            }
        }
        if !advance_odometer(&mut class_idx, &class_limits) {
            break;
        }
    }
    Ok(best.expect("at least the identity labeling is serialized"))
}

fn serialize_candidate(
    g: &FeynmanGraph,
    sorted_counts: &[usize],
    map_pos: &dyn Fn(usize) -> usize,
) -> Vec<u8> {
    let mut out = Vec::with_capacity(2 + g.total_legs() * 2);
    out.push(g.order() as u8);
    out.extend(sorted_counts.iter().map(|&c| c as u8));
    out.push(0xFF);
    let mut k: Vec<u8> = g.k_legs.iter().map(|&i| map_pos(i) as u8).collect();
    k.sort_unstable();
    out.extend_from_slice(&k);
    out.push(0xFE);
    let mut blocks: Vec<Vec<u8>> = g
        .blocks
        .iter()
        .map(|b| {
            let mut bb: Vec<u8> = b.iter().map(|&i| map_pos(i) as u8).collect();
            bb.sort_unstable();
            bb
        })
        .collect();
    blocks.sort();
    for b in blocks {
        out.extend_from_slice(&b);
        out.push(0xFD);
    }
    out
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    heap_permute(&mut cur, k, &mut out);
    out
}

fn heap_permute(arr: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k <= 1 {
        out.push(arr.clone());
        return;
    }
    for i in 0..k {
        heap_permute(arr, k - 1, out);
        if k.is_multiple_of(2) {
            arr.swap(i, k - 1);
        } else {
            arr.swap(0, k - 1);
        }
    }
}

/// One topology class: canonical key, a representative, and how many raw
/// graphs mapped onto it.
#[derive(Clone, Debug)]
pub struct TopoClass {
    pub key: Vec<u8>,
    pub representative: FeynmanGraph,
    pub multiplicity: u64,
}

/// Group a graph stream by canonical key; classes come back sorted by key,
/// so the result is reproducible bit for bit.
pub fn group_by_topology<I>(graphs: I) -> Result<Vec<TopoClass>, GraphError>
where
    I: IntoIterator<Item = FeynmanGraph>,
{
    let mut map: BTreeMap<Vec<u8>, TopoClass> = BTreeMap::new();
    for g in graphs {
        let key = canonical_key(&g)?;
        map.entry(key.clone())
            .and_modify(|c| c.multiplicity += 1)
            .or_insert(TopoClass {
                key,
                representative: g,
                multiplicity: 1,
            });
    }
    Ok(map.into_values().collect())
}

/// Quadratic-potential graph: `m` two-leg vertices seen as edges with
/// endpoints `2j` and `2j + 1`. Evaluation assigns one coordinate per
/// edge, an independent route from the per-leg evaluation of
/// [`FeynmanGraph`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuadGraph {
    pub m: usize,
    pub k_legs: Vec<usize>,
    pub blocks: Vec<Vec<usize>>,
    pub connected: bool,
}

impl QuadGraph {
    /// Edge owning an endpoint.
    pub fn edge_of(endpoint: usize) -> usize {
        endpoint / 2
    }
}

pub struct QuadStream {
    m: usize,
    labels: LabelSet,
    subsets: SubsetIter,
    current: Option<KState>,
    empty_emitted: bool,
}

/// Enumerate all `(K, I)` pairs over the `2m` edge endpoints.
pub fn enumerate_quad_graphs(m: usize) -> Result<QuadStream, GraphError> {
    let n = 2 * m;
    if n > MAX_PARTITION_LEGS {
        return Err(GraphError::Combinatorics(CombinatoricsError::PartitionCap(n)));
    }
    let labels = LabelSet::new(&vec![2; m]);
    let subsets = enumerate_subsets(n)?;
    Ok(QuadStream {
        m,
        labels,
        subsets,
        current: None,
        empty_emitted: false,
    })
}

impl Iterator for QuadStream {
    type Item = QuadGraph;

    fn next(&mut self) -> Option<QuadGraph> {
        if self.m == 0 {
            if self.empty_emitted {
                return None;
            }
            self.empty_emitted = true;
            return Some(QuadGraph {
                m: 0,
                k_legs: Vec::new(),
                blocks: Vec::new(),
                connected: false,
            });
        }
        loop {
            if let Some(ks) = self.current.as_mut() {
                if let Some(p) = ks.parts.next() {
                    let blocks: Vec<Vec<usize>> = p
                        .blocks()
                        .iter()
                        .map(|b| b.iter().map(|&i| ks.rest[i]).collect())
                        .collect();
                    let mapped = Partition::from_canonical_blocks(blocks.clone());
                    let connected = is_connected_pair(&self.labels, &ks.k, &mapped)
                        .expect("stream invariant: cover holds");
                    return Some(QuadGraph {
                        m: self.m,
                        k_legs: ks.k.clone(),
                        blocks,
                        connected,
                    });
                }
                self.current = None;
            }
            let k = self.subsets.next()?;
            let n = 2 * self.m;
            let rest: Vec<usize> = (0..n).filter(|i| k.binary_search(i).is_err()).collect();
            let parts = enumerate_partitions(rest.len()).expect("cap checked at construction");
            self.current = Some(KState { k, rest, parts });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::bell_number;
    use crate::model::{levy_to_symbol, LevyJumpSpec, SymTensor};

    fn quadratic(dim: usize) -> Potential {
        Potential::isotropic_quadratic(dim)
    }

    #[test]
    fn census_matches_bell() {
        for m in 1..=3usize {
            let count = enumerate_graphs(m, &quadratic(1), &PruneRules::none())
                .unwrap()
                .count() as u128;
            assert_eq!(count, bell_number(2 * m + 1).unwrap(), "m = {m}");
        }
    }

    #[test]
    fn empty_order_yields_single_empty_graph() {
        let graphs: Vec<_> = enumerate_graphs(0, &quadratic(1), &PruneRules::none())
            .unwrap()
            .collect();
        assert_eq!(graphs.len(), 1);
        assert_eq!(graphs[0].total_legs(), 0);
        assert!(!graphs[0].connected);
    }

    #[test]
    fn mixed_degree_census() {
        // Degrees {0, 2}: tuples (0), (2) at order 1 give 1 + 5 pairs.
        let mut pot_coeffs = vec![
            SymTensor::from_entries(1, 0, &[(vec![], 0.3)]).unwrap(),
            SymTensor::zeros(1, 1),
            SymTensor::from_entries(1, 2, &[(vec![0, 0], 1.0)]).unwrap(),
        ];
        let pot = Potential::new(1, std::mem::take(&mut pot_coeffs)).unwrap();
        let count = enumerate_graphs(1, &pot, &PruneRules::none()).unwrap().count();
        assert_eq!(count, 6);
        // Order 2: tuples (0,0), (0,2), (2,0), (2,2): 1 + 5 + 5 + 52.
        let count2 = enumerate_graphs(2, &pot, &PruneRules::none()).unwrap().count();
        assert_eq!(count2, 63);
    }

    #[test]
    fn pruned_census_drops_singleton_blocks() {
        // A centered symbol (zero first-order coefficient) prunes all
        // partitions containing singleton blocks.
        let spec = LevyJumpSpec {
            dim: 1,
            drift: vec![-2.0],
            diffusion: vec![vec![0.0]],
            activity: 2.0,
            jump_moments: (1..=4)
                .map(|n| {
                    (
                        n,
                        SymTensor::from_entries(1, n, &[(vec![0; n], 1.0)]).unwrap(),
                    )
                })
                .collect(),
        };
        let sym = levy_to_symbol(&spec, 4).unwrap();
        let prune = PruneRules::from_symbol(&sym);
        assert_eq!(
            prune.zero_cumulant_orders,
            std::iter::once(1).collect::<BTreeSet<_>>()
        );
        let count1 = enumerate_graphs(1, &quadratic(1), &prune).unwrap().count();
        assert_eq!(count1, 2);
        let count2 = enumerate_graphs(2, &quadratic(1), &prune).unwrap().count();
        assert_eq!(count2, 15);
    }

    #[test]
    fn order2_topology_classes() {
        // Pruned: 7 classes with multiplicities [1,1,1,2,2,4,4], of which
        // the connected ones carry [1,2,4,4].
        let prune = PruneRules {
            zero_cumulant_orders: std::iter::once(1).collect(),
        };
        let classes = group_by_topology(
            enumerate_graphs(2, &quadratic(1), &prune).unwrap(),
        )
        .unwrap();
        assert_eq!(classes.len(), 7);
        let mut mults: Vec<u64> = classes.iter().map(|c| c.multiplicity).collect();
        mults.sort_unstable();
        assert_eq!(mults, vec![1, 1, 1, 2, 2, 4, 4]);
        assert_eq!(classes.iter().map(|c| c.multiplicity).sum::<u64>(), 15);
        let mut conn: Vec<u64> = classes
            .iter()
            .filter(|c| c.representative.connected)
            .map(|c| c.multiplicity)
            .collect();
        conn.sort_unstable();
        assert_eq!(conn, vec![1, 2, 4, 4]);

        // Unpruned: 17 classes summing to 52.
        let all = group_by_topology(
            enumerate_graphs(2, &quadratic(1), &PruneRules::none()).unwrap(),
        )
        .unwrap();
        assert_eq!(all.len(), 17);
        assert_eq!(all.iter().map(|c| c.multiplicity).sum::<u64>(), 52);
        let mut conn_all: Vec<u64> = all
            .iter()
            .filter(|c| c.representative.connected)
            .map(|c| c.multiplicity)
            .collect();
        conn_all.sort_unstable();
        assert_eq!(conn_all, vec![1, 2, 4, 4, 4, 4, 8]);
    }

    #[test]
    fn order3_topology_classes() {
        let classes = group_by_topology(
            enumerate_graphs(3, &quadratic(1), &PruneRules::none()).unwrap(),
        )
        .unwrap();
        assert_eq!(classes.len(), 69);
        assert_eq!(classes.iter().map(|c| c.multiplicity).sum::<u64>(), 877);
    }

    #[test]
    fn canonical_key_invariant_under_relabeling() {
        // Same topology written with vertices swapped and slots permuted.
        let a = pair_to_graph(vec![2, 2], vec![0], vec![vec![1, 2], vec![3]]).unwrap();
        let b = pair_to_graph(vec![2, 2], vec![2], vec![vec![0, 3], vec![1]]).unwrap();
        assert_eq!(canonical_key(&a).unwrap(), canonical_key(&b).unwrap());
        // Different topology differs.
        let c = pair_to_graph(vec![2, 2], vec![0], vec![vec![1], vec![2, 3]]).unwrap();
        assert_ne!(canonical_key(&a).unwrap(), canonical_key(&c).unwrap());
    }

    #[test]
    fn canonical_key_merges_vertex_order() {
        // Leg-count tuples (2, 4) and (4, 2) describe the same topology.
        let a = pair_to_graph(vec![2, 4], vec![0], vec![vec![1, 2], vec![3, 4, 5]]).unwrap();
        let b = pair_to_graph(vec![4, 2], vec![4], vec![vec![5, 0], vec![1, 2, 3]]).unwrap();
        assert_eq!(canonical_key(&a).unwrap(), canonical_key(&b).unwrap());
    }

    #[test]
    fn canon_cap_enforced() {
        // 6 quadratic vertices, all 12 legs external: 6 + 12 = 18 > 16.
        let g = pair_to_graph(vec![2; 6], (0..12).collect(), vec![]).unwrap();
        assert!(matches!(canonical_key(&g), Err(GraphError::CanonCap(18))));
    }

    #[test]
    fn pair_validation_errors() {
        assert!(matches!(
            pair_to_graph(vec![2], vec![5], vec![vec![0, 1]]),
            Err(GraphError::LegOutOfRange(5))
        ));
        // Overlapping K and block.
        assert!(pair_to_graph(vec![2], vec![0], vec![vec![0, 1]]).is_err());
        // Uncovered leg.
        assert!(pair_to_graph(vec![2], vec![0], vec![]).is_err());
    }

    #[test]
    fn dump_format() {
        let g = pair_to_graph(vec![2, 2], vec![0, 3], vec![vec![1, 2]]).unwrap();
        let s = g.dump();
        assert!(s.starts_with("p=(2,2) K={0,3} I=[{1,2}] connected=1 key="));
        assert!(!s.ends_with("key=unavailable"));
    }

    #[test]
    fn quad_census_and_structure() {
        for m in 1..=3usize {
            let count = enumerate_quad_graphs(m).unwrap().count() as u128;
            assert_eq!(count, bell_number(2 * m + 1).unwrap());
        }
        // Enumeration of (K, I) pairs agrees one-to-one with the general
        // stream over a quadratic potential.
        let quads: Vec<QuadGraph> = enumerate_quad_graphs(2).unwrap().collect();
        let gens: Vec<FeynmanGraph> =
            enumerate_graphs(2, &quadratic(1), &PruneRules::none())
                .unwrap()
                .collect();
        assert_eq!(quads.len(), gens.len());
        for (q, g) in quads.iter().zip(&gens) {
            assert_eq!(q.k_legs, g.k_legs);
            assert_eq!(q.blocks, g.blocks);
            assert_eq!(q.connected, g.connected);
        }
        assert_eq!(QuadGraph::edge_of(0), 0);
        assert_eq!(QuadGraph::edge_of(5), 2);
    }

    #[test]
    fn connectivity_flag_matches_recomputation() {
        for g in enumerate_graphs(2, &quadratic(1), &PruneRules::none()).unwrap() {
            let labels = LabelSet::new(&g.leg_counts);
            let p = Partition::try_new(
                g.blocks.clone(),
                &(0..g.total_legs())
                    .filter(|i| g.k_legs.binary_search(i).is_err())
                    .collect::<Vec<_>>(),
            )
            .unwrap();
            assert_eq!(
                g.connected,
                is_connected_pair(&labels, &g.k_legs, &p).unwrap()
            );
        }
    }

    proptest::proptest! {
        #[test]
        fn canonical_key_stable_under_random_relabeling(seed in 0u64..500) {
            // Pick a graph from the order-2 census and relabel it randomly.
            let graphs: Vec<FeynmanGraph> =
                enumerate_graphs(2, &quadratic(1), &PruneRules::none()).unwrap().collect();
            let g = &graphs[(seed as usize * 7919) % graphs.len()];
            // Relabel: swap the two vertices (both quadratic) and flip slots
            // driven by seed bits.
            let mut map: Vec<usize> = (0..4).collect();
            if seed & 1 == 1 { map.swap(0, 2); map.swap(1, 3); }
            if seed & 2 == 2 { map.swap(0, 1); }
            if seed & 4 == 4 { map.swap(2, 3); }
            let k2: Vec<usize> = g.k_legs.iter().map(|&i| map[i]).collect();
            let blocks2: Vec<Vec<usize>> = g.blocks.iter()
                .map(|b| b.iter().map(|&i| map[i]).collect()).collect();
            let g2 = pair_to_graph(vec![2, 2], k2, blocks2).unwrap();
            proptest::prop_assert_eq!(canonical_key(g).unwrap(), canonical_key(&g2).unwrap());
            proptest::prop_assert_eq!(g.connected, g2.connected);
        }
    }
}
