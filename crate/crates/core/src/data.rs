//! Synthetic classification data, non-i.i.d. client partitioning and
//! per-client mini-batch streams.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{config_err, dim_err, Error, Result};
use crate::numcore::DenseMatrix;
use crate::rng::{self, Purpose, SimRng};

/// Attempts made by [`dirichlet_partition`] before giving up on drawing a
/// partition with every client nonempty.
pub const PARTITION_RETRIES: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: DenseMatrix,
    labels: Vec<usize>,
    num_classes: usize,
}

impl Dataset {
    pub fn new(inputs: DenseMatrix, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if labels.len() != inputs.rows() {
            return Err(dim_err!("{} labels for {} rows", labels.len(), inputs.rows()));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(config_err!("label {bad} out of range for {num_classes} classes"));
        }
        Ok(Self {
            inputs,
            labels,
            num_classes,
        })
    }

    pub fn inputs(&self) -> &DenseMatrix {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn gather(&self, indices: &[usize]) -> (DenseMatrix, Vec<usize>) {
        (
            self.inputs.select_rows(indices),
            indices.iter().map(|&i| self.labels[i]).collect(),
        )
    }

    /// First `n` rows and the rest.
    pub fn split_at(&self, n: usize) -> Result<(Dataset, Dataset)> {
        if n > self.len() {
            return Err(config_err!("cannot take {n} rows from a dataset of {}", self.len()));
        }
        let head: Vec<usize> = (0..n).collect();
        let tail: Vec<usize> = (n..self.len()).collect();
        let (hx, hy) = self.gather(&head);
        let (tx, ty) = self.gather(&tail);
        Ok((
            Dataset::new(hx, hy, self.num_classes)?,
            Dataset::new(tx, ty, self.num_classes)?,
        ))
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }
}

/// `C` Gaussian blobs with unit covariance, centered on points of the sphere
/// of radius `separation`. Example `i` has label `i mod C`.
pub fn gen_gaussian_mixture(n: usize, d: usize, classes: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if classes == 0 || d == 0 {
        return Err(config_err!("need at least one class and one feature"));
    }
    if n < classes {
        return Err(config_err!("n = {n} is smaller than the number of classes {classes}"));
    }
    if !separation.is_finite() || separation <= 0.0 {
        return Err(config_err!("separation must be positive, got {separation}"));
    }
    let mut mean_rng = rng::stream(seed, Purpose::DatasetMeans, 0);
    let mut means = Vec::with_capacity(classes * d);
    for _ in 0..classes {
        let dir = loop {
            let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut mean_rng)).collect();
            let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
            if norm > 1e-12 {
                break v.into_iter().map(|x| x * separation / norm).collect::<Vec<_>>();
            }
        };
        means.extend(dir);
    }
    let mut sample_rng = rng::stream(seed, Purpose::DatasetSamples, 0);
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % classes;
        labels.push(c);
        for j in 0..d {
            let noise: f64 = StandardNormal.sample(&mut sample_rng);
            data.push(means[c * d + j] + noise);
        }
    }
    Dataset::new(DenseMatrix::from_vec(n, d, data)?, labels, classes)
}

/// The indices of a parent dataset owned by one client.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shard {
    pub client: usize,
    pub indices: Vec<usize>,
}

impl Shard {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Fraction of this shard's examples in each class.
    pub fn class_proportions(&self, labels: &[usize], classes: usize) -> Vec<f64> {
        let mut counts = vec![0usize; classes];
        for &i in &self.indices {
            counts[labels[i]] += 1;
        }
        let n = self.indices.len().max(1) as f64;
        counts.into_iter().map(|c| c as f64 / n).collect()
    }
}

fn check_client_count(n: usize, m: usize) -> Result<()> {
    if m == 0 {
        return Err(config_err!("need at least one client"));
    }
    if m > n {
        return Err(config_err!("{m} clients cannot share {n} examples"));
    }
    Ok(())
}

/// Per class, a Dirichlet(α·1) draw decides what fraction of that class
/// each client receives. Redraws the whole partition if any client ends up
/// empty, at most [`PARTITION_RETRIES`] times.
pub fn dirichlet_partition(labels: &[usize], m: usize, alpha: f64, seed: u64) -> Result<Vec<Shard>> {
    check_client_count(labels.len(), m)?;
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(config_err!("dirichlet alpha must be positive, got {alpha}"));
    }
    let classes = labels.iter().copied().max().map_or(0, |c| c + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    let gamma = Gamma::new(alpha, 1.0).map_err(|_| config_err!("invalid dirichlet alpha {alpha}"))?;

    'attempt: for attempt in 0..PARTITION_RETRIES {
        let mut rng = rng::stream(seed, Purpose::Partition, attempt as u64);
        let mut owned: Vec<Vec<usize>> = vec![Vec::new(); m];
        for members in &by_class {
            let mut members = members.clone();
            members.shuffle(&mut rng);
            let draws: Vec<f64> = (0..m).map(|_| gamma.sample(&mut rng)).collect();
            let total: f64 = draws.iter().sum();
            if !total.is_finite() || total <= 0.0 {
                continue 'attempt;
            }
            let nc = members.len() as f64;
            let mut cum = 0.0;
            let mut start = 0usize;
            for (client, &g) in draws.iter().enumerate() {
                cum += g / total;
                let end = if client + 1 == m {
                    members.len()
                } else {
                    (libm::round(cum * nc) as usize).clamp(start, members.len())
                };
                owned[client].extend_from_slice(&members[start..end]);
                start = end;
            }
        }
        if owned.iter().all(|o| !o.is_empty()) {
            return Ok(owned
                .into_iter()
                .enumerate()
                .map(|(client, mut indices)| {
                    indices.sort_unstable();
                    Shard { client, indices }
                })
                .collect());
        }
    }
    Err(Error::PartitionRetriesExhausted {
        attempts: PARTITION_RETRIES,
    })
}

/// Uniformly shuffled, near-equal split.
pub fn iid_partition(n: usize, m: usize, seed: u64) -> Result<Vec<Shard>> {
    check_client_count(n, m)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, Purpose::Partition, 0));
    Ok((0..m)
        .map(|client| {
            let lo = client * n / m;
            let hi = (client + 1) * n / m;
            let mut indices = order[lo..hi].to_vec();
            indices.sort_unstable();
            Shard { client, indices }
        })
        .collect())
}

/// Epoch-based sampling without replacement over one shard. The tail of an
/// epoch shorter than the batch size is dropped and a new epoch begins.
#[derive(Debug, Clone)]
pub struct BatchStream {
    rng: SimRng,
    order: Vec<usize>,
    cursor: usize,
}

impl BatchStream {
    pub fn new(seed: u64, client: usize) -> Self {
        Self {
            rng: rng::stream(seed, Purpose::ClientStream, client as u64),
            order: Vec::new(),
            cursor: 0,
        }
    }

    /// Dataset indices of the next batch.
    pub fn next_indices(&mut self, shard: &Shard, batch_size: usize) -> Result<Vec<usize>> {
        if batch_size == 0 {
            return Err(Error::EmptyBatch);
        }
        if batch_size > shard.len() {
            return Err(config_err!(
                "batch size {batch_size} exceeds shard size {} of client {}",
                shard.len(),
                shard.client
            ));
        }
        if self.order.len() != shard.len() || self.cursor + batch_size > self.order.len() {
            self.order = (0..shard.len()).collect();
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let batch = self.order[self.cursor..self.cursor + batch_size]
            .iter()
            .map(|&p| shard.indices[p])
            .collect();
        self.cursor += batch_size;
        Ok(batch)
    }

    pub fn sample_batch(
        &mut self,
        shard: &Shard,
        dataset: &Dataset,
        batch_size: usize,
    ) -> Result<(DenseMatrix, Vec<usize>)> {
        let idx = self.next_indices(shard, batch_size)?;
        Ok(dataset.gather(&idx))
    }
}
