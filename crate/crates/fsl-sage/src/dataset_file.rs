//! Flat binary datasets: `n`, `d`, `C` as little-endian `u64`, then the
//! `n × d` inputs row-major as little-endian `f64`, then `n` labels as
//! little-endian `u64`.

use std::fs;
use std::path::Path;

use fsl_sage_core::data::Dataset;
use fsl_sage_core::numcore::DenseMatrix;

use crate::error::{io_err, Error, Result};

pub fn encode(dataset: &Dataset) -> Vec<u8> {
    let (n, d) = (dataset.len(), dataset.dim());
    let mut out = Vec::with_capacity(24 + 8 * n * (d + 1));
    for v in [n, d, dataset.num_classes()] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for v in dataset.inputs().as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &y in dataset.labels() {
        out.extend_from_slice(&(y as u64).to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> std::result::Result<Dataset, String> {
    let word = |i: usize| -> [u8; 8] { bytes[8 * i..8 * i + 8].try_into().expect("eight bytes") };
    if bytes.len() < 24 || !bytes.len().is_multiple_of(8) {
        return Err(format!("truncated header or ragged length ({} bytes)", bytes.len()));
    }
    let header: Vec<usize> = (0..3)
        .map(|i| usize::try_from(u64::from_le_bytes(word(i))).map_err(|_| "header value too large".to_string()))
        .collect::<std::result::Result<_, _>>()?;
    let (n, d, classes) = (header[0], header[1], header[2]);
    let words = n
        .checked_mul(d + 1)
        .and_then(|w| w.checked_add(3))
        .ok_or("header sizes overflow")?;
    if bytes.len() / 8 != words {
        return Err(format!(
            "expected {} bytes for n = {n}, d = {d}, found {}",
            8 * words,
            bytes.len()
        ));
    }
    let inputs: Vec<f64> = (0..n * d).map(|i| f64::from_le_bytes(word(3 + i))).collect();
    let labels: Vec<usize> = (0..n)
        .map(|i| u64::from_le_bytes(word(3 + n * d + i)) as usize)
        .collect();
    let inputs = DenseMatrix::from_vec(n, d, inputs).map_err(|e| e.to_string())?;
    Dataset::new(inputs, labels, classes).map_err(|e| e.to_string())
}

pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    fs::write(path, encode(dataset)).map_err(io_err(path))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    decode(&bytes).map_err(|message| Error::Dataset {
        path: path.to_owned(),
        message,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use fsl_sage_core::data::gen_gaussian_mixture;

    #[test]
    fn round_trip_is_exact() {
        let d = gen_gaussian_mixture(37, 4, 3, 1.5, 2).unwrap();
        let bytes = encode(&d);
        assert_eq!(bytes.len(), 24 + 8 * 37 * 5);
        assert_eq!(&bytes[..8], &37u64.to_le_bytes());
        assert_eq!(decode(&bytes).unwrap(), d);
    }

    #[test]
    fn rejects_damaged_files() {
        let d = gen_gaussian_mixture(10, 2, 2, 1.0, 0).unwrap();
        let bytes = encode(&d);
        assert!(decode(&bytes[..bytes.len() - 8]).is_err());
        assert!(decode(&bytes[..5]).is_err());
        let mut bad_label = bytes.clone();
        let last = bad_label.len() - 8;
        bad_label[last..].copy_from_slice(&7u64.to_le_bytes());
        assert!(decode(&bad_label).is_err());
        let mut nan = bytes;
        nan[24..32].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(decode(&nan).is_err());
    }
}
