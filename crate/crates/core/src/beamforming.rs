//! SVD precoder/combiner construction with equal power split.

use num_complex::Complex64;

use crate::channel::ChannelRealization;
use crate::linalg::complete_orthonormal;
use crate::{CMatrix, Error, Result};

/// Relative threshold under which a singular value counts as zero.
const RANK_TOL: f64 = 1e-12;

/// Channel split into its dominant `n`-dimensional singular subspace and the
/// remainder: `H = left * diag(singular) * right^H + rest`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdPartition {
    pub left: CMatrix,
    pub singular: Vec<f64>,
    pub right: CMatrix,
    pub left_rest: CMatrix,
    pub singular_rest: Vec<f64>,
    pub right_rest: CMatrix,
    /// The channel was identically zero; bases are arbitrary.
    pub degenerate: bool,
}

impl SvdPartition {
    pub fn num_streams(&self) -> usize {
        self.singular.len()
    }

    /// `left * diag(singular) * right^H` plus the same for the remainder.
    pub fn reconstruct(&self) -> CMatrix {
        let block = |u: &CMatrix, s: &[f64], v: &CMatrix| {
            let mut us = u.clone();
            for (i, &si) in s.iter().enumerate() {
                us.column_mut(i).scale_mut(si);
            }
            us * v.adjoint()
        };
        block(&self.left, &self.singular, &self.right)
            + block(&self.left_rest, &self.singular_rest, &self.right_rest)
    }
}

/// Thin SVD of `channel` sorted by non-increasing singular value, split after
/// the first `num_streams` components.
///
/// The first entry of each left singular vector with non-negligible magnitude
/// is made real and non-negative. Directions with (numerically) zero gain get
/// orthonormal completions so that both bases stay orthonormal.
pub fn svd_partition(channel: &CMatrix, num_streams: usize) -> Result<SvdPartition> {
    let (rows, cols) = channel.shape();
    let rank_cap = rows.min(cols);
    if num_streams == 0 || num_streams > rank_cap {
        return Err(Error::invalid(format!(
            "num_streams {num_streams} must lie in 1..={rank_cap} for a {rows}x{cols} channel"
        )));
    }
    if channel
        .iter()
        .any(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(Error::invalid("channel contains non-finite entries"));
    }

    let svd = channel.clone().svd(true, true);
    let u = svd
        .u
        .ok_or_else(|| Error::internal("SVD did not return U"))?;
    let v = svd
        .v_t
        .ok_or_else(|| Error::internal("SVD did not return V^H"))?
        .adjoint();

    let mut order: Vec<usize> = (0..rank_cap).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut left = CMatrix::zeros(rows, rank_cap);
    let mut right = CMatrix::zeros(cols, rank_cap);
    let mut singular = Vec::with_capacity(rank_cap);
    for (dst, &src) in order.iter().enumerate() {
        left.set_column(dst, &u.column(src));
        right.set_column(dst, &v.column(src));
        singular.push(svd.singular_values[src]);
    }

    let top = singular[0];
    let degenerate = top == 0.0;
    let null: Vec<usize> = (0..rank_cap)
        .filter(|&i| degenerate || singular[i] <= RANK_TOL * top)
        .collect();
    if !null.is_empty() {
        for &i in &null {
            singular[i] = 0.0;
        }
        complete_orthonormal(&mut left, &null);
        complete_orthonormal(&mut right, &null);
    }

    for i in 0..rank_cap {
        let col = left.column(i);
        let peak = col.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        if let Some(lead) = col.iter().find(|z| z.norm() > 1e-9 * peak) {
            let rot = Complex64::from_polar(1.0, -lead.arg());
            for z in left.column_mut(i).iter_mut() {
                *z *= rot;
            }
            for z in right.column_mut(i).iter_mut() {
                *z *= rot;
            }
        }
    }

    let rest = rank_cap - num_streams;
    Ok(SvdPartition {
        left: left.columns(0, num_streams).into_owned(),
        singular: singular[..num_streams].to_vec(),
        right: right.columns(0, num_streams).into_owned(),
        left_rest: left.columns(num_streams, rest).into_owned(),
        singular_rest: singular[num_streams..].to_vec(),
        right_rest: right.columns(num_streams, rest).into_owned(),
        degenerate,
    })
}

/// Precoder `F` (`M x n`, power scaled) and combiner `W` (`N x n`, orthonormal).
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerPair {
    pub precoder: CMatrix,
    pub combiner: CMatrix,
    pub num_streams: usize,
    pub per_user_power: f64,
}

impl BeamformerPair {
    /// `W = left`, `F = sqrt(P / n) * right`.
    pub fn from_partition(partition: &SvdPartition, per_user_power: f64) -> Result<Self> {
        if !(per_user_power > 0.0) || !per_user_power.is_finite() {
            return Err(Error::invalid("per-user power must be positive"));
        }
        let n = partition.num_streams();
        let scale = (per_user_power / n as f64).sqrt();
        Ok(Self {
            precoder: &partition.right * Complex64::new(scale, 0.0),
            combiner: partition.left.clone(),
            num_streams: n,
            per_user_power,
        })
    }

    /// `trace(F^H F)`, the transmit power spent on this user.
    pub fn transmit_power(&self) -> f64 {
        self.precoder.iter().map(|z| z.norm_sqr()).sum()
    }
}

pub fn make_beamformers(
    channel: &ChannelRealization,
    num_streams: usize,
    per_user_power: f64,
) -> Result<BeamformerPair> {
    make_beamformers_for(&channel.matrix, num_streams, per_user_power)
}

/// [`make_beamformers`] on a bare matrix.
pub fn make_beamformers_for(
    channel: &CMatrix,
    num_streams: usize,
    per_user_power: f64,
) -> Result<BeamformerPair> {
    if !(per_user_power > 0.0) || !per_user_power.is_finite() {
        return Err(Error::invalid("per-user power must be positive"));
    }
    let part = svd_partition(channel, num_streams)?;
    BeamformerPair::from_partition(&part, per_user_power)
}
