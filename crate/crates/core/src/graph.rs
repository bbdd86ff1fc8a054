//! Temporal contact networks: generation, neighborhood summaries, and the
//! second-order dependency closure used by the latent variance estimator.
//!
//! Networks are undirected and simple (no self-loops, no multi-edges). A
//! [`TemporalNetwork`] is an ordered list of per-step snapshots over a shared
//! node set; generators return a single base snapshot and the simulator
//! produces the realized per-step sequence.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::seed;

// ---------------------------------------------------------------------------
// adjacency structure
// ---------------------------------------------------------------------------

/// Undirected simple graph stored as sorted neighbor lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    n: usize,
    neighbors: Vec<Vec<usize>>,
    n_edges: usize,
}

impl Adjacency {
    pub fn empty(n: usize) -> Self {
        Adjacency {
            n,
            neighbors: vec![Vec::new(); n],
            n_edges: 0,
        }
    }

    /// Builds from an undirected edge list; rejects self-loops, duplicate
    /// edges, and out-of-range endpoints.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = Adjacency::empty(n);
        for &(i, j) in edges {
            adj.add_edge(i, j)?;
        }
        Ok(adj)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && self.neighbors[i].binary_search(&j).is_ok()
    }

    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<()> {
        if i >= self.n || j >= self.n {
            return Err(Error::argument(format!(
                "edge ({i}, {j}) out of range for {} nodes",
                self.n
            )));
        }
        if i == j {
            return Err(Error::argument(format!("self-loop at node {i}")));
        }
        match self.neighbors[i].binary_search(&j) {
            Ok(_) => Err(Error::argument(format!("duplicate edge ({i}, {j})"))),
            Err(pos) => {
                self.neighbors[i].insert(pos, j);
                let pos_j = self.neighbors[j].binary_search(&i).unwrap_err();
                self.neighbors[j].insert(pos_j, i);
                self.n_edges += 1;
                Ok(())
            }
        }
    }

    /// Iterates each undirected edge once, as `(i, j)` with `i < j`, in
    /// ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, nbrs)| nbrs.iter().filter(move |&&j| i < j).map(move |&j| (i, j)))
    }

    /// Copy with every edge incident to a masked node removed.
    pub fn without_nodes(&self, masked: &[bool]) -> Adjacency {
        assert_eq!(masked.len(), self.n);
        let mut neighbors = Vec::with_capacity(self.n);
        let mut n_edges = 0;
        for (i, nbrs) in self.neighbors.iter().enumerate() {
            if masked[i] {
                neighbors.push(Vec::new());
            } else {
                let kept: Vec<usize> = nbrs.iter().copied().filter(|&j| !masked[j]).collect();
                n_edges += kept.iter().filter(|&&j| i < j).count();
                neighbors.push(kept);
            }
        }
        Adjacency {
            n: self.n,
            neighbors,
            n_edges,
        }
    }
}

// ---------------------------------------------------------------------------
// temporal network
// ---------------------------------------------------------------------------

/// Snapshot sequence over a fixed node set; index `t` runs `0..=time_horizon`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemporalNetwork {
    snapshots: Vec<Adjacency>,
}

impl TemporalNetwork {
    pub fn from_snapshots(snapshots: Vec<Adjacency>) -> Result<Self> {
        let first_n = match snapshots.first() {
            Some(s) => s.n(),
            None => return Err(Error::argument("temporal network needs at least one snapshot")),
        };
        if snapshots.iter().any(|s| s.n() != first_n) {
            return Err(Error::argument("snapshots disagree on node count"));
        }
        Ok(TemporalNetwork { snapshots })
    }

    /// Static network: one base snapshot (time horizon 0).
    pub fn single(base: Adjacency) -> Self {
        TemporalNetwork {
            snapshots: vec![base],
        }
    }

    pub fn n(&self) -> usize {
        self.snapshots[0].n()
    }

    /// Largest valid snapshot index `T`.
    pub fn time_horizon(&self) -> usize {
        self.snapshots.len() - 1
    }

    pub fn snapshot(&self, t: usize) -> &Adjacency {
        &self.snapshots[t]
    }

    pub fn snapshots(&self) -> &[Adjacency] {
        &self.snapshots
    }

    /// Contact structure in effect at step `t`; static networks repeat their
    /// final snapshot indefinitely.
    pub fn base_at(&self, t: usize) -> &Adjacency {
        let idx = t.min(self.time_horizon());
        &self.snapshots[idx]
    }

    /// Union of all snapshots: an edge is present if it ever appears.
    pub fn union(&self) -> Adjacency {
        let mut seen: HashSet<(usize, usize)> = HashSet::new();
        let mut union = Adjacency::empty(self.n());
        for snap in &self.snapshots {
            for (i, j) in snap.edges() {
                if seen.insert((i, j)) {
                    union.add_edge(i, j).expect("snapshot edges are simple");
                }
            }
        }
        union
    }
}

// ---------------------------------------------------------------------------
// degree-bounded generator
// ---------------------------------------------------------------------------

const MAX_GENERATION_RETRIES: usize = 100;

/// Random graph with every degree drawn uniformly from `d_min..=d_max`,
/// realized exactly by stub pairing with local repair. Self-loops and
/// multi-edges are rejected during pairing, so the drawn degree sequence is
/// met exactly whenever the attempt succeeds.
pub fn generate_uniform(
    n: usize,
    d_min: usize,
    d_max: usize,
    seed_value: u64,
) -> Result<TemporalNetwork> {
    if n < 2 {
        return Err(Error::argument("need at least two nodes"));
    }
    if d_min < 1 || d_min > d_max || d_max >= n {
        return Err(Error::argument(format!(
            "degree bounds [{d_min}, {d_max}] invalid for {n} nodes"
        )));
    }
    let mut rng = seed::rng(seed_value);
    for _ in 0..MAX_GENERATION_RETRIES {
        let degrees: Vec<usize> = (0..n).map(|_| rng.random_range(d_min..=d_max)).collect();
        if degrees.iter().sum::<usize>() % 2 != 0 {
            continue;
        }
        if let Some(edges) = pair_stubs(&degrees, &mut rng) {
            let adj = Adjacency::from_edges(n, &edges)?;
            debug_assert!((0..n).all(|i| adj.degree(i) == degrees[i]));
            return Ok(TemporalNetwork::single(adj));
        }
    }
    Err(Error::Generation(format!(
        "no simple graph with degrees in [{d_min}, {d_max}] on {n} nodes \
         realized within {MAX_GENERATION_RETRIES} attempts"
    )))
}

/// Configuration-model pairing. Walks a shuffled stub list two at a time;
/// when the next pair would form a self-loop or duplicate edge it swaps in a
/// random later stub, falling back to a linear scan, and gives up (returns
/// `None`) only when no later stub can complete the pair.
fn pair_stubs<G: Rng>(degrees: &[usize], rng: &mut G) -> Option<Vec<(usize, usize)>> {
    let mut stubs: Vec<usize> = degrees
        .iter()
        .enumerate()
        .flat_map(|(i, &d)| std::iter::repeat_n(i, d))
        .collect();
    stubs.shuffle(rng);

    let mut edges = Vec::with_capacity(stubs.len() / 2);
    let mut used: HashSet<(usize, usize)> = HashSet::with_capacity(stubs.len() / 2);
    let key = |a: usize, b: usize| if a < b { (a, b) } else { (b, a) };

    let mut pos = 0;
    while pos + 1 < stubs.len() {
        let a = stubs[pos];
        let valid = |b: usize, used: &HashSet<(usize, usize)>| b != a && !used.contains(&key(a, b));
        if !valid(stubs[pos + 1], &used) {
            let mut fixed = false;
            for _ in 0..32 {
                let swap = rng.random_range(pos + 1..stubs.len());
                if valid(stubs[swap], &used) {
                    stubs.swap(pos + 1, swap);
                    fixed = true;
                    break;
                }
            }
            if !fixed {
                // exhaustive fallback keeps feasible sequences alive
                let k = (pos + 1..stubs.len()).find(|&k| valid(stubs[k], &used))?;
                stubs.swap(pos + 1, k);
            }
        }
        let b = stubs[pos + 1];
        used.insert(key(a, b));
        edges.push((a, b));
        pos += 2;
    }
    Some(edges)
}

// ---------------------------------------------------------------------------
// clustered heavy-tailed generator
// ---------------------------------------------------------------------------

/// Knobs for [`generate_power_law_clustered`].
#[derive(Debug, Clone, PartialEq)]
pub struct PowerLawConfig {
    /// Number of independently grown communities.
    pub n_subgraphs: usize,
    /// Target tail exponent of the degree distribution (must exceed 1).
    pub exponent: f64,
    /// Bernoulli probability for each cross-community node pair.
    pub inter_edge_prob: f64,
    /// Edges attached per arriving node inside a community.
    pub attachment_edges: usize,
    /// Probability an attachment closes a triangle instead of following
    /// preferential attachment.
    pub triangle_prob: f64,
}

impl Default for PowerLawConfig {
    fn default() -> Self {
        PowerLawConfig {
            n_subgraphs: 5,
            exponent: 2.5,
            inter_edge_prob: 0.001,
            attachment_edges: 2,
            triangle_prob: 0.1,
        }
    }
}

/// Heavy-tailed clustered network: communities grown by preferential
/// attachment with occasional triangle closure, then sparse independent
/// edges between communities.
///
/// The attachment weight is `degree + m·(exponent − 3)`; the shifted-linear
/// kernel steers the asymptotic tail exponent toward the requested value
/// (pure proportional attachment at exponent 3).
pub fn generate_power_law_clustered(
    n: usize,
    cfg: &PowerLawConfig,
    seed_value: u64,
) -> Result<TemporalNetwork> {
    if cfg.n_subgraphs < 1 {
        return Err(Error::argument("need at least one subgraph"));
    }
    if cfg.exponent <= 1.0 {
        return Err(Error::argument("power-law exponent must exceed 1"));
    }
    if !(0.0..=1.0).contains(&cfg.inter_edge_prob) || !(0.0..=1.0).contains(&cfg.triangle_prob) {
        return Err(Error::argument("probabilities must lie in [0, 1]"));
    }
    let m = cfg.attachment_edges.max(1);
    if n < cfg.n_subgraphs * (m + 1) {
        return Err(Error::argument(format!(
            "{n} nodes cannot host {} subgraphs of at least {} nodes",
            cfg.n_subgraphs,
            m + 1
        )));
    }

    let mut rng = seed::rng(seed_value);
    let mut adj = Adjacency::empty(n);

    // near-equal community sizes; the first `n % k` communities get one extra
    let k = cfg.n_subgraphs;
    let (base_size, remainder) = (n / k, n % k);
    let mut start = 0;
    let mut ranges = Vec::with_capacity(k);
    for s in 0..k {
        let size = base_size + usize::from(s < remainder);
        ranges.push(start..start + size);
        start += size;
    }

    let shift = m as f64 * (cfg.exponent - 3.0);
    for range in &ranges {
        grow_community(&mut adj, range.clone(), m, cfg.triangle_prob, shift, &mut rng)?;
    }

    // sparse ties between communities, fixed iteration order for determinism
    if cfg.inter_edge_prob > 0.0 {
        for a in 0..k {
            for b in (a + 1)..k {
                for u in ranges[a].clone() {
                    for v in ranges[b].clone() {
                        if rng.random::<f64>() < cfg.inter_edge_prob {
                            adj.add_edge(u, v)?;
                        }
                    }
                }
            }
        }
    }
    Ok(TemporalNetwork::single(adj))
}

/// Grows one community over the node id range by shifted preferential
/// attachment with triangle closure.
fn grow_community<G: Rng>(
    adj: &mut Adjacency,
    range: std::ops::Range<usize>,
    m: usize,
    triangle_prob: f64,
    shift: f64,
    rng: &mut G,
) -> Result<()> {
    let lo = range.start;
    let size = range.len();
    debug_assert!(size > m);

    // seed clique on the first m + 1 nodes
    for i in 0..=m {
        for j in (i + 1)..=m {
            adj.add_edge(lo + i, lo + j)?;
        }
    }

    for v_off in (m + 1)..size {
        let v = lo + v_off;
        let existing = lo..lo + v_off;
        let mut targets: Vec<usize> = Vec::with_capacity(m);
        let mut last_target: Option<usize> = None;
        while targets.len() < m {
            let close_triangle = last_target.is_some() && rng.random::<f64>() < triangle_prob;
            let candidate = if close_triangle {
                // neighbor of the previous target, if any remain usable
                let anchor = last_target.expect("guarded by close_triangle");
                let options: Vec<usize> = adj
                    .neighbors(anchor)
                    .iter()
                    .copied()
                    .filter(|&u| existing.contains(&u) && u != v && !targets.contains(&u))
                    .collect();
                if options.is_empty() {
                    preferential_pick(adj, existing.clone(), &targets, shift, rng)
                } else {
                    options[rng.random_range(0..options.len())]
                }
            } else {
                preferential_pick(adj, existing.clone(), &targets, shift, rng)
            };
            targets.push(candidate);
            last_target = Some(candidate);
        }
        for &t in &targets {
            adj.add_edge(v, t)?;
        }
    }
    Ok(())
}

/// Samples an attachment target with weight `max(degree + shift, 0)`,
/// falling back to uniform when the total weight vanishes.
fn preferential_pick<G: Rng>(
    adj: &Adjacency,
    existing: std::ops::Range<usize>,
    exclude: &[usize],
    shift: f64,
    rng: &mut G,
) -> usize {
    let candidates: Vec<usize> = existing.filter(|u| !exclude.contains(u)).collect();
    debug_assert!(!candidates.is_empty());
    let weights: Vec<f64> = candidates
        .iter()
        .map(|&u| (adj.degree(u) as f64 + shift).max(0.0))
        .collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return candidates[rng.random_range(0..candidates.len())];
    }
    let mut draw = rng.random::<f64>() * total;
    for (u, w) in candidates.iter().zip(&weights) {
        draw -= w;
        if draw <= 0.0 {
            return *u;
        }
    }
    *candidates.last().expect("non-empty candidate set")
}

// ---------------------------------------------------------------------------
// neighborhood summaries
// ---------------------------------------------------------------------------

/// How a neighbor-level summary aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SummaryMeasure {
    Sum,
    Mean,
}

/// Per-node count of exposed neighbors under the given snapshot.
pub fn summary_exposure(snapshot: &Adjacency, exposed: &[bool]) -> Vec<u32> {
    assert_eq!(exposed.len(), snapshot.n(), "exposure vector length mismatch");
    (0..snapshot.n())
        .map(|i| snapshot.neighbors(i).iter().filter(|&&j| exposed[j]).count() as u32)
        .collect()
}

/// Per-node aggregate of a node-level value over neighbors; isolated nodes
/// map to zero.
pub fn summary_covariate<R: Real>(
    snapshot: &Adjacency,
    values: &[R],
    measure: SummaryMeasure,
) -> Vec<R> {
    assert_eq!(values.len(), snapshot.n(), "value vector length mismatch");
    (0..snapshot.n())
        .map(|i| {
            let nbrs = snapshot.neighbors(i);
            if nbrs.is_empty() {
                return R::zero();
            }
            let total: R = nbrs.iter().map(|&j| values[j]).sum();
            match measure {
                SummaryMeasure::Sum => total,
                SummaryMeasure::Mean => total / R::of_usize(nbrs.len()),
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// second-order dependency closure
// ---------------------------------------------------------------------------

/// Symmetric reachability-within-two-hops indicator over the union of all
/// snapshots, with an all-ones diagonal. Row `i` lists every `j` whose
/// residual can co-vary with `i`'s in the latent variance estimator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecondOrderClosure {
    n: usize,
    reach: Vec<Vec<usize>>,
}

impl SecondOrderClosure {
    /// Diagonal-only closure (no cross terms); turns the latent variance
    /// into the direct one.
    pub fn identity(n: usize) -> Self {
        SecondOrderClosure {
            n,
            reach: (0..n).map(|i| vec![i]).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.reach[i].binary_search(&j).is_ok()
    }

    /// Sorted list of nodes within two hops of `i` (including `i`).
    pub fn reach(&self, i: usize) -> &[usize] {
        &self.reach[i]
    }
}

/// Builds the two-hop closure of the union network.
pub fn second_order_closure(network: &TemporalNetwork) -> SecondOrderClosure {
    let union = network.union();
    let n = union.n();
    let reach = (0..n)
        .map(|i| {
            let mut set: Vec<usize> = vec![i];
            set.extend_from_slice(union.neighbors(i));
            for &j in union.neighbors(i) {
                set.extend_from_slice(union.neighbors(j));
            }
            set.sort_unstable();
            set.dedup();
            set
        })
        .collect();
    SecondOrderClosure { n, reach }
}

// ---------------------------------------------------------------------------
// edge-list serialization
// ---------------------------------------------------------------------------

/// Writes the whitespace-delimited snapshot edge list: a `n=<N> T=<T>` header
/// followed by one `t i j` line per edge (`i < j`), ascending.
pub fn write_edge_list<W: Write>(network: &TemporalNetwork, writer: W) -> Result<()> {
    let mut out = BufWriter::new(writer);
    writeln!(out, "n={} T={}", network.n(), network.time_horizon())?;
    for (t, snap) in network.snapshots().iter().enumerate() {
        for (i, j) in snap.edges() {
            writeln!(out, "{t} {i} {j}")?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Parses the edge-list format written by [`write_edge_list`].
pub fn read_edge_list<R: Read>(reader: R) -> Result<TemporalNetwork> {
    let mut lines = BufReader::new(reader).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse("empty edge list"))??;
    let (n, t_max) = parse_edge_header(header.trim())?;
    let mut snapshots = vec![Adjacency::empty(n); t_max + 1];
    for (line_no, line) in lines.enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut parts = trimmed.split_whitespace();
        let mut field = |name: &str| -> Result<usize> {
            parts
                .next()
                .ok_or_else(|| Error::parse(format!("line {}: missing {name}", line_no + 2)))?
                .parse::<usize>()
                .map_err(|_| Error::parse(format!("line {}: bad {name}", line_no + 2)))
        };
        let (t, i, j) = (field("t")?, field("i")?, field("j")?);
        if parts.next().is_some() {
            return Err(Error::parse(format!("line {}: trailing fields", line_no + 2)));
        }
        if t > t_max {
            return Err(Error::parse(format!(
                "line {}: snapshot {t} exceeds horizon {t_max}",
                line_no + 2
            )));
        }
        snapshots[t]
            .add_edge(i, j)
            .map_err(|e| Error::parse(format!("line {}: {e}", line_no + 2)))?;
    }
    TemporalNetwork::from_snapshots(snapshots)
}

fn parse_edge_header(header: &str) -> Result<(usize, usize)> {
    let mut n = None;
    let mut t = None;
    for token in header.split_whitespace() {
        if let Some(v) = token.strip_prefix("n=") {
            n = v.parse::<usize>().ok();
        } else if let Some(v) = token.strip_prefix("T=") {
            t = v.parse::<usize>().ok();
        } else {
            return Err(Error::parse(format!("unexpected header token `{token}`")));
        }
    }
    match (n, t) {
        (Some(n), Some(t)) if n > 0 => Ok((n, t)),
        _ => Err(Error::parse("header must be `n=<N> T=<T>` with N > 0")),
    }
}

/// Convenience wrapper over [`write_edge_list`] for a filesystem path.
pub fn save_edge_list(network: &TemporalNetwork, path: &Path) -> Result<()> {
    write_edge_list(network, std::fs::File::create(path)?)
}

/// Convenience wrapper over [`read_edge_list`] for a filesystem path.
pub fn load_edge_list(path: &Path) -> Result<TemporalNetwork> {
    read_edge_list(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_degrees_stay_in_bounds() {
        let net = generate_uniform(500, 1, 6, 7).unwrap();
        let snap = net.snapshot(0);
        assert!((0..500).all(|i| (1..=6).contains(&snap.degree(i))));
        assert_eq!(net.time_horizon(), 0);
    }

    #[test]
    fn uniform_is_reproducible() {
        let a = generate_uniform(200, 1, 6, 11).unwrap();
        let b = generate_uniform(200, 1, 6, 11).unwrap();
        assert_eq!(a, b);
        let c = generate_uniform(200, 1, 6, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn smallest_feasible_case() {
        let net = generate_uniform(2, 1, 1, 0).unwrap();
        assert!(net.snapshot(0).has_edge(0, 1));
        assert_eq!(net.snapshot(0).n_edges(), 1);
    }

    #[test]
    fn degree_bounds_validated() {
        assert!(matches!(generate_uniform(10, 3, 2, 0), Err(Error::Argument(_))));
        assert!(matches!(generate_uniform(10, 1, 10, 0), Err(Error::Argument(_))));
    }

    #[test]
    fn power_law_grows_hubs() {
        let cfg = PowerLawConfig::default();
        let net = generate_power_law_clustered(500, &cfg, 3).unwrap();
        let max_deg = (0..500).map(|i| net.snapshot(0).degree(i)).max().unwrap();
        assert!(max_deg > 6, "expected a hub, max degree {max_deg}");
    }

    #[test]
    fn power_law_is_reproducible_and_validated() {
        let cfg = PowerLawConfig::default();
        let a = generate_power_law_clustered(300, &cfg, 5).unwrap();
        let b = generate_power_law_clustered(300, &cfg, 5).unwrap();
        assert_eq!(a, b);

        let bad = PowerLawConfig {
            exponent: 0.9,
            ..PowerLawConfig::default()
        };
        assert!(matches!(
            generate_power_law_clustered(300, &bad, 5),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn summary_exposure_counts_neighbors() {
        // star: center 0 with leaves 1..=4, two leaves exposed
        let star = Adjacency::from_edges(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap();
        let exposed = [false, true, true, false, false];
        let counts = summary_exposure(&star, &exposed);
        assert_eq!(counts, vec![2, 0, 0, 0, 0]);
    }

    #[test]
    fn summary_covariate_handles_isolated_nodes() {
        let mut g = Adjacency::empty(3);
        g.add_edge(0, 1).unwrap();
        let values = [2.0, 4.0, 9.0];
        let means = summary_covariate(&g, &values, SummaryMeasure::Mean);
        assert_eq!(means, vec![4.0, 2.0, 0.0]);
        let sums = summary_covariate(&g, &values, SummaryMeasure::Sum);
        assert_eq!(sums, vec![4.0, 2.0, 0.0]);
    }

    #[test]
    fn closure_matches_boolean_matrix_power() {
        // brute-force oracle: reach = I | U | U^2 over the union graph
        let net = generate_uniform(40, 1, 4, 9).unwrap();
        let closure = second_order_closure(&net);
        let union = net.union();
        let n = union.n();
        let mut direct = vec![vec![false; n]; n];
        for (i, j) in union.edges() {
            direct[i][j] = true;
            direct[j][i] = true;
        }
        for i in 0..n {
            for j in 0..n {
                let mut expect = i == j || direct[i][j];
                if !expect {
                    expect = (0..n).any(|k| direct[i][k] && direct[k][j]);
                }
                assert_eq!(closure.contains(i, j), expect, "pair ({i}, {j})");
            }
        }
    }

    #[test]
    fn closure_is_symmetric_with_unit_diagonal() {
        let net = generate_uniform(60, 1, 5, 13).unwrap();
        let closure = second_order_closure(&net);
        for i in 0..closure.n() {
            assert!(closure.contains(i, i));
            for &j in closure.reach(i) {
                assert!(closure.contains(j, i));
            }
        }
    }

    #[test]
    fn edge_list_roundtrip() {
        let net = generate_uniform(50, 1, 4, 21).unwrap();
        let mut buf = Vec::new();
        write_edge_list(&net, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("n=50 T=0\n"));
        let back = read_edge_list(buf.as_slice()).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn edge_list_rejects_malformed_input() {
        let missing_header = "0 1 2\n";
        assert!(read_edge_list(missing_header.as_bytes()).is_err());
        let bad_snapshot = "n=3 T=0\n1 0 1\n";
        assert!(read_edge_list(bad_snapshot.as_bytes()).is_err());
        let self_loop = "n=3 T=0\n0 1 1\n";
        assert!(read_edge_list(self_loop.as_bytes()).is_err());
        let out_of_range = "n=3 T=0\n0 0 7\n";
        assert!(read_edge_list(out_of_range.as_bytes()).is_err());
    }
}
