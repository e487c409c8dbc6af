//! Association-dependent instantaneous rates and slot utilities.
//!
//! Rates are spectral efficiencies in bits/s/Hz. For UE `k` served by BS `j`
//! with combiner `W` and precoder `F`, the rate is
//! `log2 det(I + Y^-1 W^H H F F^H H^H W)` where `Y` collects intra-cell
//! interference, inter-cell interference from every active link, and noise.
//! It is evaluated as `log2 det(Y + S) - log2 det(Y)` with both determinants
//! taken through Cholesky factors.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::association::ActivationVector;
use crate::beamforming::{svd_partition, BeamformerPair, SvdPartition};
use crate::linalg::{log2_det_hpd, log2_det_hpd_in_place};
use crate::{CMatrix, Error, Result};

/// Thermal noise description. Noise power is `N0 * B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub psd_dbm_per_hz: f64,
    pub bandwidth_hz: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            psd_dbm_per_hz: -174.0,
            bandwidth_hz: 1e9,
        }
    }
}

impl NoiseModel {
    pub fn power_w(&self) -> f64 {
        10f64.powf((self.psd_dbm_per_hz + 10.0 * self.bandwidth_hz.log10() - 30.0) / 10.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_hz > 0.0) || !self.bandwidth_hz.is_finite() {
            return Err(Error::invalid("bandwidth must be positive"));
        }
        if !self.psd_dbm_per_hz.is_finite() {
            return Err(Error::invalid("noise PSD must be finite"));
        }
        Ok(())
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// All `K x J` channel matrices of one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotChannels {
    num_ues: usize,
    num_bss: usize,
    matrices: Vec<CMatrix>,
}

impl SlotChannels {
    /// `matrices[k * J + j]` is `H_{k,j}`.
    pub fn new(num_ues: usize, num_bss: usize, matrices: Vec<CMatrix>) -> Result<Self> {
        if matrices.len() != num_ues * num_bss {
            return Err(Error::invalid(format!(
                "expected {} channel matrices, got {}",
                num_ues * num_bss,
                matrices.len()
            )));
        }
        Ok(Self {
            num_ues,
            num_bss,
            matrices,
        })
    }

    pub fn num_ues(&self) -> usize {
        self.num_ues
    }

    pub fn num_bss(&self) -> usize {
        self.num_bss
    }

    pub fn get(&self, ue: usize, bs: usize) -> &CMatrix {
        &self.matrices[ue * self.num_bss + bs]
    }

    pub fn try_get(&self, ue: usize, bs: usize) -> Result<&CMatrix> {
        if ue >= self.num_ues || bs >= self.num_bss {
            return Err(Error::internal(format!("no channel for link ({ue}, {bs})")));
        }
        Ok(self.get(ue, bs))
    }

    pub fn iter(&self) -> impl Iterator<Item = &CMatrix> {
        self.matrices.iter()
    }
}

/// Read-only state needed to evaluate any activation in one slot.
#[derive(Debug, Clone)]
pub struct SlotContext {
    pub channels: SlotChannels,
    /// Transmit power per BS in watts.
    pub bs_power_w: Vec<f64>,
    pub noise: NoiseModel,
}

impl SlotContext {
    pub fn new(channels: SlotChannels, bs_power_w: Vec<f64>, noise: NoiseModel) -> Result<Self> {
        if bs_power_w.len() != channels.num_bss() {
            return Err(Error::invalid("one transmit power per BS required"));
        }
        if bs_power_w.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::invalid("BS transmit powers must be positive"));
        }
        noise.validate()?;
        Ok(Self {
            channels,
            bs_power_w,
            noise,
        })
    }

    pub fn num_ues(&self) -> usize {
        self.channels.num_ues()
    }

    pub fn num_bss(&self) -> usize {
        self.channels.num_bss()
    }

    pub fn noise_power_w(&self) -> f64 {
        self.noise.power_w()
    }
}

/// Beamformers of every active `(user, serving BS)` pair in a slot.
#[derive(Debug, Clone)]
pub struct BeamformerSet {
    num_bss: usize,
    pairs: Vec<Option<BeamformerPair>>,
}

impl BeamformerSet {
    /// SVD beamformers for each served user with `n_k = streams[k]` and
    /// per-user power `P_j / Q_j`.
    pub fn for_activation(
        ctx: &SlotContext,
        activation: &ActivationVector,
        streams: &[usize],
    ) -> Result<Self> {
        let (k_total, j_total) = (ctx.num_ues(), ctx.num_bss());
        check_dims(activation, streams, k_total)?;
        let loads = activation.loads(j_total)?;
        let mut pairs = vec![None; k_total * j_total];
        for (k, bs) in activation.served() {
            let power = ctx.bs_power_w[bs] / loads[bs] as f64;
            let part = svd_partition(ctx.channels.get(k, bs), streams[k])?;
            pairs[k * j_total + bs] = Some(BeamformerPair::from_partition(&part, power)?);
        }
        Ok(Self {
            num_bss: j_total,
            pairs,
        })
    }

    pub fn get(&self, ue: usize, bs: usize) -> Option<&BeamformerPair> {
        self.pairs
            .get(ue * self.num_bss + bs)
            .and_then(Option::as_ref)
    }

    fn require(&self, ue: usize, bs: usize) -> Result<&BeamformerPair> {
        self.get(ue, bs)
            .ok_or_else(|| Error::internal(format!("no beamformer for active pair ({ue}, {bs})")))
    }
}

fn check_dims(activation: &ActivationVector, streams: &[usize], num_ues: usize) -> Result<()> {
    if activation.num_ues() != num_ues || streams.len() != num_ues {
        return Err(Error::invalid(format!(
            "activation ({}) / stream ({}) dimensions do not match {num_ues} users",
            activation.num_ues(),
            streams.len()
        )));
    }
    Ok(())
}

/// The three additive parts of the interference-plus-noise covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceParts {
    pub intra_cell: CMatrix,
    pub inter_cell: CMatrix,
    pub noise: CMatrix,
}

impl CovarianceParts {
    pub fn total(&self) -> CMatrix {
        &self.intra_cell + &self.inter_cell + &self.noise
    }
}

/// `W^H H F F^H H^H W`, the covariance a precoder `F` induces after combining.
fn projected_covariance(combiner: &CMatrix, channel: &CMatrix, precoder: &CMatrix) -> CMatrix {
    let g = combiner.adjoint() * channel * precoder;
    &g * g.adjoint()
}

/// Intra-cell, inter-cell and noise terms of `Y_{k,j}` for user `ue` served
/// by `bs`, seen through `combiner`.
pub fn covariance_parts(
    ue: usize,
    bs: usize,
    activation: &ActivationVector,
    ctx: &SlotContext,
    beamformers: &BeamformerSet,
    combiner: &CMatrix,
) -> Result<CovarianceParts> {
    let n = combiner.ncols();
    let mut intra = CMatrix::zeros(n, n);
    let mut inter = CMatrix::zeros(n, n);
    let h_serving = ctx.channels.try_get(ue, bs)?;
    for (l, other_bs) in activation.served() {
        if other_bs == bs {
            if l == ue {
                continue;
            }
            let f = &beamformers.require(l, bs)?.precoder;
            intra += projected_covariance(combiner, h_serving, f);
        } else {
            let f = &beamformers.require(l, other_bs)?.precoder;
            let h = ctx.channels.try_get(ue, other_bs)?;
            inter += projected_covariance(combiner, h, f);
        }
    }
    let noise = combiner.adjoint() * combiner * Complex64::new(ctx.noise_power_w(), 0.0);
    Ok(CovarianceParts {
        intra_cell: intra,
        inter_cell: inter,
        noise,
    })
}

/// Interference-plus-noise covariance `Y_{k,j}` (`n_k x n_k`).
pub fn interference_covariance(
    ue: usize,
    bs: usize,
    activation: &ActivationVector,
    ctx: &SlotContext,
    beamformers: &BeamformerSet,
    combiner: &CMatrix,
) -> Result<CMatrix> {
    Ok(covariance_parts(ue, bs, activation, ctx, beamformers, combiner)?.total())
}

/// `log2 det(I + Y^-1 S)` for Hermitian `S >= 0` and `Y > 0`.
pub fn log_det_rate(signal: &CMatrix, interference: &CMatrix) -> Result<f64> {
    let with_signal = log2_det_hpd(&(signal + interference)).ok_or_else(|| {
        Error::internal("signal-plus-interference covariance not positive definite")
    })?;
    let without = log2_det_hpd(interference)
        .ok_or_else(|| Error::internal("interference covariance not positive definite"))?;
    Ok((with_signal - without).max(0.0))
}

/// Instantaneous rate `R_{k,j}(t)` of user `ue` served by `bs`.
pub fn instantaneous_rate(
    ue: usize,
    bs: usize,
    activation: &ActivationVector,
    ctx: &SlotContext,
    beamformers: &BeamformerSet,
) -> Result<f64> {
    let pair = beamformers.require(ue, bs)?;
    let y = interference_covariance(ue, bs, activation, ctx, beamformers, &pair.combiner)?;
    let s = projected_covariance(
        &pair.combiner,
        ctx.channels.try_get(ue, bs)?,
        &pair.precoder,
    );
    log_det_rate(&s, &y)
}

/// Per-user rates and sum utility of one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRates {
    pub per_user_rate: Vec<f64>,
    pub utility: f64,
    /// `K x J`, row-major; `None` for pairs that were not evaluated.
    pub per_pair_rate: Vec<Option<f64>>,
}

/// Rates of every served user under `activation`, with `streams[k]` streams
/// for user `k`; unserved users get rate 0.
pub fn slot_throughputs(
    activation: &ActivationVector,
    ctx: &SlotContext,
    streams: &[usize],
) -> Result<SlotRates> {
    let (k_total, j_total) = (ctx.num_ues(), ctx.num_bss());
    let beamformers = BeamformerSet::for_activation(ctx, activation, streams)?;
    let mut per_user_rate = vec![0.0; k_total];
    let mut per_pair_rate = vec![None; k_total * j_total];
    for (k, bs) in activation.served() {
        let r = instantaneous_rate(k, bs, activation, ctx, &beamformers)?;
        per_user_rate[k] = r;
        per_pair_rate[k * j_total + bs] = Some(r);
    }
    let utility = per_user_rate.iter().sum();
    Ok(SlotRates {
        per_user_rate,
        utility,
        per_pair_rate,
    })
}

/// Time-averaged per-user throughput over the given slots.
pub fn average_throughputs(slots: &[SlotRates]) -> Result<Vec<f64>> {
    let first = slots
        .first()
        .ok_or_else(|| Error::invalid("need at least one slot to average"))?;
    let k_total = first.per_user_rate.len();
    let mut acc = vec![0.0; k_total];
    for s in slots {
        if s.per_user_rate.len() != k_total {
            return Err(Error::invalid("inconsistent user count across slots"));
        }
        for (a, r) in acc.iter_mut().zip(&s.per_user_rate) {
            *a += r;
        }
    }
    let t = slots.len() as f64;
    Ok(acc.into_iter().map(|a| a / t).collect())
}

/// Association-independent reference rate of `ue` on `bs`: the serving link
/// uses SVD beamformers at the full BS power split over `num_streams`, and
/// every other BS radiates spatially white power `P_i / M_i` per antenna.
pub fn full_interference_rate(
    ue: usize,
    bs: usize,
    ctx: &SlotContext,
    num_streams: usize,
) -> Result<f64> {
    let h = ctx.channels.try_get(ue, bs)?;
    let part = svd_partition(h, num_streams)?;
    full_interference_rate_with(ue, bs, ctx, &part)
}

fn full_interference_rate_with(
    ue: usize,
    bs: usize,
    ctx: &SlotContext,
    part: &SvdPartition,
) -> Result<f64> {
    let pair = BeamformerPair::from_partition(part, ctx.bs_power_w[bs])?;
    let w = &pair.combiner;
    let n = w.ncols();
    let mut y = w.adjoint() * w * Complex64::new(ctx.noise_power_w(), 0.0);
    for i in (0..ctx.num_bss()).filter(|&i| i != bs) {
        let h = ctx.channels.try_get(ue, i)?;
        let wh = w.adjoint() * h;
        let per_antenna = ctx.bs_power_w[i] / h.ncols() as f64;
        y += &wh * wh.adjoint() * Complex64::new(per_antenna, 0.0);
    }
    debug_assert_eq!(y.nrows(), n);
    let s = projected_covariance(w, ctx.channels.get(ue, bs), &pair.precoder);
    log_det_rate(&s, &y)
}

/// `K x J` table of [`full_interference_rate`] values, row-major by user.
pub fn full_interference_table(ctx: &SlotContext, streams: &[usize]) -> Result<Vec<Vec<f64>>> {
    (0..ctx.num_ues())
        .map(|k| {
            (0..ctx.num_bss())
                .map(|j| full_interference_rate(k, j, ctx, streams[k]))
                .collect()
        })
        .collect()
}

/// Projected-gain cache for fast utility evaluation of many activations in
/// one slot with fixed per-user stream counts.
///
/// Beamforming directions depend only on the direct channel, so for every
/// receiving user `k`, candidate serving BS `j`, transmitting BS `i` and
/// co-scheduled user `l` the matrix `G G^H` with `G = W_{k,j}^H H_{k,i}
/// Gamma_{l,i}` is computed once; a candidate activation only rescales these
/// by `P_i / (Q_i n_l)`.
#[derive(Debug, Clone)]
pub struct UtilityEvaluator {
    num_ues: usize,
    num_bss: usize,
    streams: Vec<usize>,
    bs_power_w: Vec<f64>,
    /// Offset of block `(k, j, i, l)` in `gains`.
    offsets: Vec<usize>,
    gains: Vec<Complex64>,
    /// `N0 W_{k,j}^H W_{k,j}` per `(k, j)`.
    noise_offsets: Vec<usize>,
    noise_gram: Vec<Complex64>,
}

impl UtilityEvaluator {
    pub fn new(ctx: &SlotContext, streams: &[usize]) -> Result<Self> {
        let (k_total, j_total) = (ctx.num_ues(), ctx.num_bss());
        if streams.len() != k_total {
            return Err(Error::invalid("one stream count per user required"));
        }
        let mut partitions = Vec::with_capacity(k_total * j_total);
        for (k, &n) in streams.iter().enumerate() {
            for j in 0..j_total {
                partitions.push(svd_partition(ctx.channels.get(k, j), n)?);
            }
        }
        let part = |k: usize, j: usize| &partitions[k * j_total + j];

        let noise = Complex64::new(ctx.noise_power_w(), 0.0);
        let mut offsets = Vec::with_capacity(k_total * j_total * j_total * k_total);
        let mut gains = Vec::new();
        let mut noise_offsets = Vec::with_capacity(k_total * j_total);
        let mut noise_gram = Vec::new();
        for k in 0..k_total {
            for j in 0..j_total {
                let w = &part(k, j).left;
                noise_offsets.push(noise_gram.len());
                noise_gram.extend((w.adjoint() * w * noise).iter().copied());
                for i in 0..j_total {
                    let wh = w.adjoint() * ctx.channels.get(k, i);
                    for l in 0..k_total {
                        let g = &wh * &part(l, i).right;
                        offsets.push(gains.len());
                        gains.extend((&g * g.adjoint()).iter().copied());
                    }
                }
            }
        }
        Ok(Self {
            num_ues: k_total,
            num_bss: j_total,
            streams: streams.to_vec(),
            bs_power_w: ctx.bs_power_w.clone(),
            offsets,
            gains,
            noise_offsets,
            noise_gram,
        })
    }

    pub fn num_ues(&self) -> usize {
        self.num_ues
    }

    pub fn num_bss(&self) -> usize {
        self.num_bss
    }

    pub fn streams(&self) -> &[usize] {
        &self.streams
    }

    fn block(&self, k: usize, j: usize, i: usize, l: usize) -> &[Complex64] {
        let idx = ((k * self.num_bss + j) * self.num_bss + i) * self.num_ues + l;
        let n = self.streams[k];
        &self.gains[self.offsets[idx]..self.offsets[idx] + n * n]
    }

    /// Per-user rates for an assignment where `assignment[k]` is the serving
    /// BS of user `k` or `None` if unserved. Writes into `rates`.
    pub fn rates_into(&self, assignment: &[Option<usize>], rates: &mut [f64]) -> Result<()> {
        debug_assert_eq!(assignment.len(), self.num_ues);
        let mut loads = vec![0usize; self.num_bss];
        for &b in assignment.iter().flatten() {
            if b >= self.num_bss {
                return Err(Error::invalid(format!("BS index {b} out of range")));
            }
            loads[b] += 1;
        }
        // Per-stream transmit power of each served user's precoder.
        let stream_power: Vec<f64> = assignment
            .iter()
            .enumerate()
            .map(|(l, b)| match b {
                Some(b) => self.bs_power_w[*b] / loads[*b] as f64 / self.streams[l] as f64,
                None => 0.0,
            })
            .collect();

        let mut y = Vec::new();
        let mut ys = Vec::new();
        for (k, &serving) in assignment.iter().enumerate() {
            let Some(j) = serving else {
                rates[k] = 0.0;
                continue;
            };
            let n = self.streams[k];
            let off = self.noise_offsets[k * self.num_bss + j];
            y.clear();
            y.extend_from_slice(&self.noise_gram[off..off + n * n]);
            for (l, &other) in assignment.iter().enumerate() {
                let Some(i) = other else { continue };
                if l == k {
                    continue;
                }
                let p = stream_power[l];
                for (acc, g) in y.iter_mut().zip(self.block(k, j, i, l)) {
                    *acc += g * p;
                }
            }
            ys.clear();
            let p = stream_power[k];
            ys.extend(y.iter().zip(self.block(k, j, j, k)).map(|(a, g)| a + g * p));
            let with_signal = log2_det_hpd_in_place(&mut ys, n).ok_or_else(|| {
                Error::internal("signal-plus-interference covariance not positive definite")
            })?;
            let without = log2_det_hpd_in_place(&mut y, n)
                .ok_or_else(|| Error::internal("interference covariance not positive definite"))?;
            rates[k] = (with_signal - without).max(0.0);
        }
        Ok(())
    }

    pub fn rates(&self, assignment: &[Option<usize>]) -> Result<Vec<f64>> {
        let mut rates = vec![0.0; self.num_ues];
        self.rates_into(assignment, &mut rates)?;
        Ok(rates)
    }

    /// Sum-rate utility of an assignment.
    pub fn utility(&self, assignment: &[Option<usize>]) -> Result<f64> {
        Ok(self.rates(assignment)?.iter().sum())
    }

    /// Utility of an assignment that serves every user.
    pub fn utility_full(&self, assignment: &[usize]) -> Result<f64> {
        let a: Vec<Option<usize>> = assignment.iter().map(|&b| Some(b)).collect();
        self.utility(&a)
    }
}
