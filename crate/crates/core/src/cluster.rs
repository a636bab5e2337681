//! Grouping hidden neurons whose outputs agree over a dataset.
//!
//! Each neuron is represented by its activation profile (one entry per
//! sample); the Euclidean distance between profiles is the clustering metric,
//! so k-means on the profiles minimises the within-cluster spread of neuron
//! outputs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Mlp;
use crate::seed::derive_indexed;

/// Per hidden layer, a partition of its neurons. `layers[0]` is hidden layer 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub layers: Vec<Vec<Vec<usize>>>,
}

impl Partition {
    /// Every hidden neuron in its own cluster.
    pub fn singletons(hidden_sizes: &[usize]) -> Self {
        Partition {
            layers: hidden_sizes
                .iter()
                .map(|&n| (0..n).map(|i| vec![i]).collect())
                .collect(),
        }
    }

    /// Number of clusters per hidden layer.
    pub fn counts(&self) -> Vec<usize> {
        self.layers.iter().map(Vec::len).collect()
    }

    /// Clusters of hidden layer `l` (1-based).
    pub fn layer(&self, l: usize) -> &[Vec<usize>] {
        &self.layers[l - 1]
    }

    /// Check that each layer is a true partition of `0..hidden_sizes[l]`.
    pub fn validate(&self, hidden_sizes: &[usize]) -> Result<()> {
        if self.layers.len() != hidden_sizes.len() {
            return Err(Error::InconsistentPartition(format!(
                "{} clustered layers for {} hidden layers",
                self.layers.len(),
                hidden_sizes.len()
            )));
        }
        for (l, (clusters, &n)) in self.layers.iter().zip(hidden_sizes).enumerate() {
            if clusters.is_empty() || clusters.len() > n {
                return Err(Error::InconsistentPartition(format!(
                    "layer {}: {} clusters for {n} neurons",
                    l + 1,
                    clusters.len()
                )));
            }
            let mut seen = vec![false; n];
            for c in clusters {
                if c.is_empty() {
                    return Err(Error::InconsistentPartition(format!("layer {}: empty cluster", l + 1)));
                }
                for &i in c {
                    if i >= n || std::mem::replace(&mut seen[i], true) {
                        return Err(Error::InconsistentPartition(format!(
                            "layer {}: neuron {i} out of range or repeated",
                            l + 1
                        )));
                    }
                }
            }
            if let Some(missing) = seen.iter().position(|s| !s) {
                return Err(Error::InconsistentPartition(format!(
                    "layer {}: neuron {missing} not assigned",
                    l + 1
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Euclidean distance between two activation profiles.
pub fn neuron_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(squared_distance(a, b).sqrt())
}

#[inline]
fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansConfig {
    pub max_iters: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            max_iters: 300,
            restarts: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    /// Sorted index sets, ordered by their smallest member.
    pub clusters: Vec<Vec<usize>>,
    /// Within-cluster sum of squared distances to the cluster means.
    pub sse: f64,
    /// Objective after every Lloyd iteration and refinement pass.
    pub history: Vec<f64>,
}

/// Within-cluster sum of squares of `clusters` around their means.
pub fn within_cluster_sse(points: &[Vec<f64>], clusters: &[Vec<usize>]) -> f64 {
    clusters
        .iter()
        .map(|c| {
            let centroid = mean_of(points, c);
            c.iter().map(|&i| squared_distance(&points[i], &centroid)).sum::<f64>()
        })
        .sum()
}

fn mean_of(points: &[Vec<f64>], members: &[usize]) -> Vec<f64> {
    let dim = points[members[0]].len();
    let mut m = vec![0.0; dim];
    for &i in members {
        for (acc, v) in m.iter_mut().zip(&points[i]) {
            *acc += v;
        }
    }
    let n = members.len() as f64;
    m.iter_mut().for_each(|v| *v /= n);
    m
}

fn check_points(points: &[Vec<f64>], k: usize) -> Result<()> {
    if k == 0 || k > points.len() {
        return Err(Error::InvalidClusterCount {
            k,
            points: points.len(),
        });
    }
    let dim = points[0].len();
    if let Some(bad) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::LengthMismatch {
            expected: dim,
            got: bad.len(),
        });
    }
    Ok(())
}

fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = points.iter().map(|p| squared_distance(p, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave `target` past the last partial sum.
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(squared_distance(p, &points[next]));
        }
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}

fn nearest(p: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, center) in centers.iter().enumerate() {
        let d = squared_distance(p, center);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

/// Give every empty cluster the point farthest from its centre, taken from a
/// cluster that has more than one member.
fn repair_empty(points: &[Vec<f64>], assign: &mut [usize], centers: &mut [Vec<f64>]) {
    let k = centers.len();
    loop {
        let mut sizes = vec![0usize; k];
        for &a in assign.iter() {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let mut far = None;
        let mut far_d = f64::NEG_INFINITY;
        for (i, p) in points.iter().enumerate() {
            if sizes[assign[i]] < 2 {
                continue;
            }
            let d = squared_distance(p, &centers[assign[i]]);
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        let far = far.expect("k <= n guarantees a cluster with two members");
        assign[far] = empty;
        centers[empty] = points[far].clone();
    }
}

fn collect_clusters(assign: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut clusters = vec![Vec::new(); k];
    for (i, &a) in assign.iter().enumerate() {
        clusters[a].push(i);
    }
    clusters.sort_by_key(|c| c[0]);
    clusters
}

/// Single-point moves that strictly lower the objective: point `x` leaves
/// cluster `A` for `B` when `|B|/(|B|+1)·‖x−c_B‖² < |A|/(|A|−1)·‖x−c_A‖²`,
/// which is the exact change in within-cluster SSE. Lloyd's step only looks
/// at `‖x−c‖²` and stalls in poor optima when `k` is close to the number of
/// points, as happens at low compression ratios.
fn refine_single_moves(points: &[Vec<f64>], assign: &mut [usize], k: usize, max_passes: usize, history: &mut Vec<f64>) {
    let dim = points[0].len();
    let mut sizes = vec![0usize; k];
    let mut sums = vec![vec![0.0; dim]; k];
    for (p, &a) in points.iter().zip(assign.iter()) {
        sizes[a] += 1;
        sums[a].iter_mut().zip(p).for_each(|(s, v)| *s += v);
    }
    let center = |sums: &[Vec<f64>], sizes: &[usize], c: usize| -> Vec<f64> {
        sums[c].iter().map(|s| s / sizes[c] as f64).collect()
    };
    let mut centers: Vec<Vec<f64>> = (0..k).map(|c| center(&sums, &sizes, c)).collect();
    for _ in 0..max_passes {
        let mut moved = false;
        for (i, p) in points.iter().enumerate() {
            let a = assign[i];
            if sizes[a] < 2 {
                continue;
            }
            let na = sizes[a] as f64;
            let remove = na / (na - 1.0) * squared_distance(p, &centers[a]);
            let mut best = None;
            let mut best_add = remove;
            for (b, cb) in centers.iter().enumerate() {
                if b == a {
                    continue;
                }
                let nb = sizes[b] as f64;
                let add = nb / (nb + 1.0) * squared_distance(p, cb);
                if add < best_add {
                    best_add = add;
                    best = Some(b);
                }
            }
            // Ignore gains at rounding level so the loop terminates.
            let Some(b) = best.filter(|_| remove - best_add > 1e-12 * remove.max(1e-300)) else {
                continue;
            };
            sizes[a] -= 1;
            sizes[b] += 1;
            sums[a].iter_mut().zip(p).for_each(|(s, v)| *s -= v);
            sums[b].iter_mut().zip(p).for_each(|(s, v)| *s += v);
            centers[a] = center(&sums, &sizes, a);
            centers[b] = center(&sums, &sizes, b);
            assign[i] = b;
            moved = true;
        }
        if !moved {
            break;
        }
        history.push(within_cluster_sse(points, &collect_clusters(assign, k)));
    }
}

/// One seeded run of k-means++ initialisation, Lloyd iterations, and a final
/// pass of objective-decreasing single-point moves.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, max_iters: usize) -> Result<KMeansFit> {
    check_points(points, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = plus_plus_init(points, k, &mut rng);
    let mut assign: Vec<usize> = points.iter().map(|p| nearest(p, &centers)).collect();
    repair_empty(points, &mut assign, &mut centers);
    let mut history = Vec::new();
    for _ in 0..max_iters.max(1) {
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<usize> = (0..points.len()).filter(|&i| assign[i] == c).collect();
            *center = mean_of(points, &members);
        }
        history.push(
            points
                .iter()
                .zip(&assign)
                .map(|(p, &a)| squared_distance(p, &centers[a]))
                .sum(),
        );
        let mut next: Vec<usize> = points.iter().map(|p| nearest(p, &centers)).collect();
        repair_empty(points, &mut next, &mut centers);
        if next == assign {
            break;
        }
        assign = next;
    }
    refine_single_moves(points, &mut assign, k, max_iters.max(1), &mut history);
    let clusters = collect_clusters(&assign, k);
    let sse = within_cluster_sse(points, &clusters);
    Ok(KMeansFit { clusters, sse, history })
}

/// Best of `restarts` seeded runs by objective; ties go to the earliest run.
pub fn kmeans_restarts(points: &[Vec<f64>], k: usize, config: &KMeansConfig) -> Result<KMeansFit> {
    check_points(points, k)?;
    let run = |r: usize| {
        kmeans(
            points,
            k,
            derive_indexed(config.seed, "restart", r as u64),
            config.max_iters,
        )
    };
    let restarts = config.restarts.max(1);
    #[cfg(feature = "parallel")]
    let fits: Vec<Result<KMeansFit>> = {
        use rayon::prelude::*;
        (0..restarts).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let fits: Vec<Result<KMeansFit>> = (0..restarts).map(run).collect();

    let mut best: Option<KMeansFit> = None;
    for fit in fits {
        let fit = fit?;
        if best.as_ref().is_none_or(|b| fit.sse < b.sse) {
            best = Some(fit);
        }
    }
    Ok(best.unwrap())
}

/// `K_l = max(1, round((1 − ratio) · |V_l|))` for each hidden layer.
pub fn cluster_counts_from_ratio(hidden_sizes: &[usize], ratio: f64) -> Result<Vec<usize>> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::Config(format!(
            "compression ratio must lie in [0, 1), got {ratio}"
        )));
    }
    Ok(hidden_sizes
        .iter()
        .map(|&n| (((1.0 - ratio) * n as f64).round() as usize).clamp(1, n.max(1)))
        .collect())
}

/// Cluster each hidden layer of `mlp` by activation profiles over `rows`.
pub fn partition_mlp(mlp: &Mlp, rows: &[Vec<f64>], counts: &[usize], config: &KMeansConfig) -> Result<Partition> {
    let d = mlp.depth();
    if counts.len() != d {
        return Err(Error::InconsistentPartition(format!(
            "{} cluster counts for {d} hidden layers",
            counts.len()
        )));
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let sizes = mlp.layer_sizes();
    let mut layers = Vec::with_capacity(d);
    for l in 1..=d {
        let k = counts[l - 1];
        if k == 0 || k > sizes[l] {
            return Err(Error::InvalidClusterCount { k, points: sizes[l] });
        }
        if k == sizes[l] {
            layers.push((0..k).map(|i| vec![i]).collect());
            continue;
        }
        let profiles = mlp.activation_matrix(rows, l)?;
        let layer_cfg = KMeansConfig {
            seed: derive_indexed(config.seed, "layer", l as u64),
            ..*config
        };
        layers.push(kmeans_restarts(&profiles, k, &layer_cfg)?.clusters);
    }
    Ok(Partition { layers })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{xor_inputs, xor_net};
    use proptest::prelude::*;

    fn xor_profiles() -> Vec<Vec<f64>> {
        vec![
            vec![0.0, 1.7, 0.0, 0.0],
            vec![0.0, 0.0, 2.3, 0.0],
            vec![0.0, 1.8, 0.0, 0.0],
            vec![0.0, 0.0, 1.5, 0.0],
        ]
    }

    #[test]
    fn distances_on_xor_profiles() {
        let p = xor_profiles();
        assert_eq!(neuron_distance(&p[0], &p[0]).unwrap(), 0.0);
        assert!((neuron_distance(&p[0], &p[2]).unwrap() - 0.1).abs() < 1e-12);
        let cross = neuron_distance(&p[0], &p[1]).unwrap();
        assert!((cross - (1.7f64.powi(2) + 2.3f64.powi(2)).sqrt()).abs() < 1e-12);
        assert!(neuron_distance(&p[0], &[1.0]).is_err());
    }

    #[test]
    fn forced_cluster_counts() {
        let p = xor_profiles();
        let all = kmeans(&p, 4, 1, 100).unwrap();
        assert_eq!(all.clusters, vec![vec![0], vec![1], vec![2], vec![3]]);
        assert_eq!(all.sse, 0.0);
        let one = kmeans(&p, 1, 1, 100).unwrap();
        assert_eq!(one.clusters, vec![vec![0, 1, 2, 3]]);
        assert!(kmeans(&p, 5, 1, 100).is_err());
        assert!(kmeans(&p, 0, 1, 100).is_err());
    }

    #[test]
    fn xor_two_clusters() {
        let fit = kmeans_restarts(&xor_profiles(), 2, &KMeansConfig::default()).unwrap();
        assert_eq!(fit.clusters, vec![vec![0, 2], vec![1, 3]]);
        let part = partition_mlp(&xor_net(), &xor_inputs(), &[2], &KMeansConfig::default()).unwrap();
        assert_eq!(part.layers, vec![vec![vec![0, 2], vec![1, 3]]]);
    }

    #[test]
    fn duplicate_points_never_leave_empty_clusters() {
        let pts = vec![vec![0.0, 0.0]; 6];
        let fit = kmeans(&pts, 4, 3, 50).unwrap();
        assert_eq!(fit.clusters.len(), 4);
        assert!(fit.clusters.iter().all(|c| !c.is_empty()));
    }

    #[test]
    fn counts_from_ratio() {
        assert_eq!(cluster_counts_from_ratio(&[7, 50], 0.0).unwrap(), vec![7, 50]);
        assert_eq!(cluster_counts_from_ratio(&[20], 0.85).unwrap(), vec![3]);
        assert_eq!(cluster_counts_from_ratio(&[50], 0.5).unwrap(), vec![25]);
        assert_eq!(cluster_counts_from_ratio(&[10], 0.75).unwrap(), vec![3]);
        assert_eq!(cluster_counts_from_ratio(&[2], 0.99).unwrap(), vec![1]);
        assert!(cluster_counts_from_ratio(&[2], 1.0).is_err());
        assert!(cluster_counts_from_ratio(&[2], -0.1).is_err());
    }

    #[test]
    fn partition_identity_and_single_neuron() {
        let net = xor_net();
        let p = partition_mlp(&net, &xor_inputs(), &[4], &KMeansConfig::default()).unwrap();
        assert_eq!(p, Partition::singletons(&[4]));
        let tiny = crate::model::Mlp::zeros(&[2, 1, 1], crate::Activation::Relu, crate::OutputHead::SameAsHidden);
        let p = partition_mlp(&tiny, &xor_inputs(), &[1], &KMeansConfig::default()).unwrap();
        assert_eq!(p.layers, vec![vec![vec![0]]]);
    }

    #[test]
    fn validate_rejects_broken_partitions() {
        let ok = Partition {
            layers: vec![vec![vec![0, 2], vec![1]]],
        };
        assert!(ok.validate(&[3]).is_ok());
        let overlap = Partition {
            layers: vec![vec![vec![0, 1], vec![1, 2]]],
        };
        assert!(overlap.validate(&[3]).is_err());
        let missing = Partition {
            layers: vec![vec![vec![0], vec![1]]],
        };
        assert!(missing.validate(&[3]).is_err());
        let empty = Partition {
            layers: vec![vec![vec![0, 1, 2], vec![]]],
        };
        assert!(empty.validate(&[3]).is_err());
    }

    #[test]
    fn json_shape() {
        let p = Partition {
            layers: vec![vec![vec![0, 2], vec![1]]],
        };
        assert_eq!(p.to_json().unwrap(), r#"{"layers":[[[0,2],[1]]]}"#);
        assert_eq!(Partition::from_json(&p.to_json().unwrap()).unwrap(), p);
    }

    #[test]
    fn single_moves_escape_lloyd_fixed_point() {
        // {0, 2} | {3} is stable under Lloyd (2 is equidistant from both
        // means) but moving 2 across lowers the SSE from 2 to 0.5.
        let points = vec![vec![0.0], vec![2.0], vec![3.0]];
        let mut assign = vec![0, 0, 1];
        let mut history = Vec::new();
        refine_single_moves(&points, &mut assign, 2, 10, &mut history);
        assert_eq!(collect_clusters(&assign, 2), vec![vec![0], vec![1, 2]]);
        assert!((within_cluster_sse(&points, &collect_clusters(&assign, 2)) - 0.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn single_moves_never_raise_sse(
            points in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 2), 3..20),
            seed in any::<u64>(),
        ) {
            let k = 1 + (seed as usize) % points.len();
            let mut assign: Vec<usize> = (0..points.len()).map(|i| if i < k { i } else { (seed as usize >> 3).wrapping_add(i * 7) % k }).collect();
            let before = within_cluster_sse(&points, &collect_clusters(&assign, k));
            let mut history = Vec::new();
            refine_single_moves(&points, &mut assign, k, 100, &mut history);
            let clusters = collect_clusters(&assign, k);
            prop_assert!(clusters.iter().all(|c| !c.is_empty()));
            prop_assert!(within_cluster_sse(&points, &clusters) <= before + 1e-9);
        }

        #[test]
        fn lloyd_objective_never_increases(
            pts in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 3), 3..30),
            k in 1usize..4,
            seed in any::<u64>(),
        ) {
            prop_assume!(k <= pts.len());
            let fit = kmeans(&pts, k, seed, 100).unwrap();
            for w in fit.history.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9 * (1.0 + w[0].abs()));
            }
            let total: usize = fit.clusters.iter().map(Vec::len).sum();
            prop_assert_eq!(total, pts.len());
            prop_assert!(fit.clusters.iter().all(|c| !c.is_empty()));
            prop_assert!((fit.sse - within_cluster_sse(&pts, &fit.clusters)).abs() < 1e-9);
        }
    }
}
