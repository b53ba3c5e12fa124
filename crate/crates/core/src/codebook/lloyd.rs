use ndarray::{Array2, ArrayView2};
use rand::Rng;

use crate::codebook::book::{nearest_codeword, Codebook, PseudoCodebook};
use crate::error::{RecastError, Result};
use crate::scalar::Scalar;

pub const DEFAULT_LLOYD_MAX_ITERS: usize = 50;

/// Patch-to-cluster membership, stored as one label per patch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub labels: Vec<usize>,
    pub counts: Vec<usize>,
}

impl Assignment {
    pub fn from_labels(labels: Vec<usize>, k: usize) -> Self {
        let mut counts = vec![0; k];
        for &l in &labels {
            counts[l] += 1;
        }
        Self { labels, counts }
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    /// Dense `n × K` binary indicator matrix with exactly one 1 per row.
    pub fn indicator<T: Scalar>(&self) -> Array2<T> {
        let mut m = Array2::zeros((self.labels.len(), self.k()));
        for (i, &l) in self.labels.iter().enumerate() {
            m[[i, l]] = T::one();
        }
        m
    }
}

#[derive(Debug, Clone)]
pub struct ClusterResult<T> {
    pub pseudo: PseudoCodebook<T>,
    pub assignment: Assignment,
    /// Clustering energy after each center update.
    pub energy_trace: Vec<T>,
    pub iterations: usize,
    /// Whether labels stopped changing before `max_iters`.
    pub converged: bool,
}

fn squared_distance<T: Scalar>(a: ndarray::ArrayView1<'_, T>, b: ndarray::ArrayView1<'_, T>) -> T {
    a.iter().zip(b.iter()).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

pub fn assign_labels<T: Scalar>(patches: ArrayView2<'_, T>, centers: ArrayView2<'_, T>) -> Vec<usize> {
    patches.outer_iter().map(|p| nearest_codeword(centers, p)).collect()
}

/// Sum of squared distances from each patch to its assigned center.
pub fn clustering_energy<T: Scalar>(patches: ArrayView2<'_, T>, labels: &[usize], centers: ArrayView2<'_, T>) -> T {
    patches
        .outer_iter()
        .zip(labels)
        .map(|(p, &l)| squared_distance(p, centers.row(l)))
        .sum()
}

/// Per-cluster arithmetic mean of the assigned patches. Clusters without
/// members keep their `previous` center.
pub fn update_centers<T: Scalar>(
    patches: ArrayView2<'_, T>,
    labels: &[usize],
    previous: ArrayView2<'_, T>,
) -> (Array2<T>, Vec<usize>) {
    let k = previous.nrows();
    let mut sums = Array2::<T>::zeros(previous.dim());
    let mut counts = vec![0usize; k];
    for (p, &l) in patches.outer_iter().zip(labels) {
        let mut row = sums.row_mut(l);
        row += &p;
        counts[l] += 1;
    }
    for (c, mut row) in sums.outer_iter_mut().enumerate() {
        if counts[c] == 0 {
            row.assign(&previous.row(c));
        } else {
            let n = T::from_usize_lossy(counts[c]);
            row.mapv_inplace(|v| v / n);
        }
    }
    (sums, counts)
}

/// Moves each empty cluster's center onto the patch farthest from its own center.
fn reseed_empty<T: Scalar>(patches: ArrayView2<'_, T>, labels: &[usize], counts: &[usize], centers: &mut Array2<T>) {
    let mut used = vec![false; patches.nrows()];
    for cluster in 0..counts.len() {
        if counts[cluster] > 0 {
            continue;
        }
        let mut best: Option<(usize, T)> = None;
        for (i, p) in patches.outer_iter().enumerate() {
            if used[i] {
                continue;
            }
            let d = squared_distance(p, centers.row(labels[i]));
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        if let Some((i, _)) = best {
            used[i] = true;
            centers.row_mut(cluster).assign(&patches.row(i));
        }
    }
}

/// k-means++ seeding.
pub fn kmeans_plus_plus<T: Scalar, R: Rng + ?Sized>(patches: ArrayView2<'_, T>, k: usize, rng: &mut R) -> Result<Array2<T>> {
    check_inputs(patches, k)?;
    let n = patches.nrows();
    let mut centers = Array2::zeros((k, patches.ncols()));
    let first = rng.random_range(0..n);
    centers.row_mut(0).assign(&patches.row(first));
    let mut d2: Vec<f64> = patches
        .outer_iter()
        .map(|p| squared_distance(p, centers.row(0)).as_f64())
        .collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            // rounding can leave the cursor past the last positive weight
            if d2[chosen] == 0.0 {
                chosen = d2.iter().rposition(|&d| d > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(c).assign(&patches.row(pick));
        for (i, p) in patches.outer_iter().enumerate() {
            d2[i] = d2[i].min(squared_distance(p, centers.row(c)).as_f64());
        }
    }
    Ok(centers)
}

/// Initial centers for this epoch's clustering: the previous codebook when one
/// exists, so that cluster `k` keeps tracking codeword `k`; k-means++ otherwise.
pub fn alignment_warm_start<T: Scalar, R: Rng + ?Sized>(
    previous: Option<&Codebook<T>>,
    patches: ArrayView2<'_, T>,
    k: usize,
    rng: &mut R,
) -> Result<Array2<T>> {
    match previous {
        Some(book) => {
            if book.k() != k || book.dim() != patches.ncols() {
                return Err(RecastError::Shape {
                    context: "warm start",
                    left: vec![k, patches.ncols()],
                    right: book.codewords.shape().to_vec(),
                });
            }
            Ok(book.codewords.clone())
        }
        None => kmeans_plus_plus(patches, k, rng),
    }
}

fn check_inputs<T: Scalar>(patches: ArrayView2<'_, T>, k: usize) -> Result<()> {
    if patches.nrows() == 0 || patches.ncols() == 0 {
        return Err(RecastError::data("clustering needs at least one non-empty patch"));
    }
    if k == 0 {
        return Err(RecastError::config("clustering needs K ≥ 1"));
    }
    if patches.nrows() < k {
        return Err(RecastError::data(format!(
            "{} patches cannot form {k} clusters",
            patches.nrows()
        )));
    }
    Ok(())
}

/// Lloyd iterations from `init`: nearest-center assignment alternating with
/// per-cluster mean updates, until labels stop changing or `max_iters`.
pub fn lloyd_cluster<T: Scalar>(
    patches: ArrayView2<'_, T>,
    k: usize,
    init: ArrayView2<'_, T>,
    max_iters: usize,
    epoch: usize,
) -> Result<ClusterResult<T>> {
    check_inputs(patches, k)?;
    if init.dim() != (k, patches.ncols()) {
        return Err(RecastError::Shape {
            context: "lloyd init",
            left: vec![k, patches.ncols()],
            right: init.shape().to_vec(),
        });
    }
    let mut centers = init.to_owned();
    let mut labels = assign_labels(patches, centers.view());
    let mut energy_trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters.max(1) {
        iterations += 1;
        let (mut next, counts) = update_centers(patches, &labels, centers.view());
        reseed_empty(patches, &labels, &counts, &mut next);
        centers = next;
        energy_trace.push(clustering_energy(patches, &labels, centers.view()));
        let relabeled = assign_labels(patches, centers.view());
        if relabeled == labels {
            converged = true;
            break;
        }
        labels = relabeled;
    }
    Ok(ClusterResult {
        pseudo: PseudoCodebook { centers, epoch },
        assignment: Assignment::from_labels(labels, k),
        energy_trace,
        iterations,
        converged,
    })
}
