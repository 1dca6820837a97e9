//! Flat-index bookkeeping for tensor-factored spaces. Leftmost factor is the
//! slowest-varying index.

use super::QStateError;

/// `strides[k] = prod(dims[k+1..])`, so `flat = sum_k i_k * strides[k]`.
pub fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

pub fn compose(indices: &[usize], strides: &[usize]) -> usize {
    indices.iter().zip(strides.iter()).map(|(i, s)| i * s).sum()
}

/// Precomputed flat offsets for contracting a subset of factors: every flat
/// index splits as `kept_offset + traced_offset`.
pub struct ContractionPlan {
    kept_dims: Vec<usize>,
    kept_offsets: Vec<usize>,
    traced_offsets: Vec<usize>,
}

impl ContractionPlan {
    pub fn new(dims: &[usize], keep: &[usize]) -> Result<Self, QStateError> {
        let nfactors = dims.len();
        let mut keep_sorted: Vec<usize> = keep.to_vec();
        keep_sorted.sort_unstable();
        keep_sorted.dedup();
        let valid = !keep_sorted.is_empty()
            && keep_sorted.len() == keep.len()
            && *keep_sorted.last().unwrap() < nfactors;
        if !valid {
            return Err(QStateError::InvalidKeep { nfactors });
        }
        let full = strides(dims);
        let kept_dims: Vec<usize> = keep_sorted.iter().map(|&k| dims[k]).collect();
        let traced: Vec<usize> = (0..nfactors).filter(|k| !keep_sorted.contains(k)).collect();
        let traced_dims: Vec<usize> = traced.iter().map(|&k| dims[k]).collect();

        let kept_offsets = enumerate_offsets(&kept_dims, &keep_sorted, &full);
        let traced_offsets = enumerate_offsets(&traced_dims, &traced, &full);
        Ok(Self {
            kept_dims,
            kept_offsets,
            traced_offsets,
        })
    }

    pub fn kept_dims(&self) -> &[usize] {
        &self.kept_dims
    }

    pub fn kept_dim(&self) -> usize {
        self.kept_offsets.len()
    }

    pub fn kept_offsets(&self) -> &[usize] {
        &self.kept_offsets
    }

    pub fn traced_offsets(&self) -> &[usize] {
        &self.traced_offsets
    }
}

/// Flat full-space offsets of every multi-index over `sub_dims`, where factor
/// `sub_dims[k]` sits at original position `positions[k]` with stride
/// `full_strides[positions[k]]`.
fn enumerate_offsets(
    sub_dims: &[usize],
    positions: &[usize],
    full_strides: &[usize],
) -> Vec<usize> {
    let count: usize = sub_dims.iter().product();
    let sub_strides = strides(sub_dims);
    let mut out = Vec::with_capacity(count.max(1));
    if sub_dims.is_empty() {
        out.push(0);
        return out;
    }
    for flat in 0..count {
        let mut offset = 0usize;
        for (k, (&d, &s)) in sub_dims.iter().zip(sub_strides.iter()).enumerate() {
            let idx = (flat / s) % d;
            offset += idx * full_strides[positions[k]];
        }
        out.push(offset);
    }
    out
}
