use alloc::vec;
use alloc::vec::Vec;

use super::matrix::DenseMatrix;
use crate::error::{dim_err, Result};

/// Shape of one parameter block, `(rows, cols)`.
pub type BlockShape = (usize, usize);

/// Flat parameter vector plus the shapes of the blocks it concatenates.
///
/// For an MLP the manifest alternates weight `(in, out)` and bias `(1, out)`
/// blocks, layer by layer.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParamVector {
    data: Vec<f64>,
    manifest: Vec<BlockShape>,
}

fn manifest_len(manifest: &[BlockShape]) -> usize {
    manifest.iter().map(|(r, c)| r * c).sum()
}

impl ParamVector {
    pub fn zeros(manifest: Vec<BlockShape>) -> Self {
        let n = manifest_len(&manifest);
        Self {
            data: vec![0.0; n],
            manifest,
        }
    }

    pub fn from_parts(manifest: Vec<BlockShape>, data: Vec<f64>) -> Result<Self> {
        let n = manifest_len(&manifest);
        if n != data.len() {
            return Err(dim_err!("manifest describes {n} scalars, data has {}", data.len()));
        }
        Ok(Self { data, manifest })
    }

    /// Concatenates blocks into one vector; inverse of [`ParamVector::unflatten`].
    pub fn flatten(blocks: &[DenseMatrix]) -> Self {
        let manifest = blocks.iter().map(DenseMatrix::shape).collect();
        let data = blocks.iter().flat_map(|b| b.as_slice().iter().copied()).collect();
        Self { data, manifest }
    }

    pub fn unflatten(&self) -> Vec<DenseMatrix> {
        let mut out = Vec::with_capacity(self.manifest.len());
        let mut offset = 0;
        for &(r, c) in &self.manifest {
            let n = r * c;
            out.push(DenseMatrix::from_raw(r, c, self.data[offset..offset + n].to_vec()));
            offset += n;
        }
        out
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn manifest(&self) -> &[BlockShape] {
        &self.manifest
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Offset of block `index` within the flat data.
    pub(crate) fn block_offset(&self, index: usize) -> usize {
        manifest_len(&self.manifest[..index])
    }

    pub(crate) fn block(&self, index: usize) -> &[f64] {
        let start = self.block_offset(index);
        let (r, c) = self.manifest[index];
        &self.data[start..start + r * c]
    }

    pub fn same_layout(&self, other: &Self) -> bool {
        self.manifest == other.manifest
    }

    pub(crate) fn check_layout(&self, other: &Self, op: &str) -> Result<()> {
        if !self.same_layout(other) {
            return Err(dim_err!(
                "{op}: parameter manifests differ ({} vs {} blocks, {} vs {} scalars)",
                self.manifest.len(),
                other.manifest.len(),
                self.len(),
                other.len()
            ));
        }
        Ok(())
    }

    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_layout(other, "dot")?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_layout(other, "sub")?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self {
            data,
            manifest: self.manifest.clone(),
        })
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Self) -> Result<()> {
        self.check_layout(other, "axpy")?;
        for (s, o) in self.data.iter_mut().zip(&other.data) {
            *s += alpha * o;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    /// Appends `tail`'s blocks after `self`'s.
    pub fn concat(&self, tail: &Self) -> Self {
        let mut data = self.data.clone();
        data.extend_from_slice(&tail.data);
        let mut manifest = self.manifest.clone();
        manifest.extend_from_slice(&tail.manifest);
        Self { data, manifest }
    }

    /// Splits after the first `head_blocks` blocks.
    pub fn split_blocks(&self, head_blocks: usize) -> Result<(Self, Self)> {
        if head_blocks > self.manifest.len() {
            return Err(dim_err!(
                "cannot split {} blocks after block {head_blocks}",
                self.manifest.len()
            ));
        }
        let at = self.block_offset(head_blocks);
        Ok((
            Self {
                data: self.data[..at].to_vec(),
                manifest: self.manifest[..head_blocks].to_vec(),
            },
            Self {
                data: self.data[at..].to_vec(),
                manifest: self.manifest[head_blocks..].to_vec(),
            },
        ))
    }
}
