use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::error::{dim_err, Result};
use crate::numcore::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecordOrigin {
    pub client: usize,
    pub round: usize,
    pub local_step: usize,
}

/// One uplink: cut-layer activations and the labels of the same batch.
#[derive(Debug, Clone, PartialEq)]
pub struct SmashedRecord {
    pub z_f: DenseMatrix,
    pub labels: Vec<usize>,
    pub origin: RecordOrigin,
}

impl SmashedRecord {
    pub fn new(z_f: DenseMatrix, labels: Vec<usize>, origin: RecordOrigin) -> Result<Self> {
        if z_f.rows() != labels.len() {
            return Err(dim_err!("{} labels for {} smashed rows", labels.len(), z_f.rows()));
        }
        Ok(Self { z_f, labels, origin })
    }

    /// Scalars on the wire: activations plus one per label.
    pub fn wire_scalars(&self) -> u64 {
        (self.z_f.rows() * self.z_f.cols() + self.labels.len()) as u64
    }
}

/// Per-client archive of smashed data kept at the S-server for alignment.
/// Only `(z_f, y)` is kept; backward targets are recomputed when aligning.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AlignmentStore {
    records: VecDeque<SmashedRecord>,
    capacity: Option<usize>,
}

impl AlignmentStore {
    pub fn new(capacity: Option<usize>) -> Self {
        Self {
            records: VecDeque::new(),
            capacity,
        }
    }

    /// Appends, evicting the oldest record when full.
    pub fn push(&mut self, record: SmashedRecord) {
        if let Some(cap) = self.capacity {
            while self.records.len() >= cap.max(1) {
                self.records.pop_front();
            }
        }
        self.records.push_back(record);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn capacity(&self) -> Option<usize> {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &SmashedRecord> {
        self.records.iter()
    }
}
