//! Experiment orchestration: deployments, multi-slot runs over association
//! schemes, transmit-power sweeps and result files.

mod output;
mod scenario;

pub use output::{
    emit_results, emit_sweep, render_config, render_slot_utilities, render_sweep_summary,
    sweep_point_dir, SWEEP_SUMMARY_HEADER,
};
pub use scenario::{sample_deployment, ArrayDims, Deployment, Scenario, Scheme, UePlacement};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::association::{
    self, association_matrix, feasible, ActivationMatrix, ActivationVector, AssociationMatrix,
    LoadBalanceSolver, SchemeAssignment,
};
use crate::channel::{sample_channel_seeded, ChannelModel};
use crate::ga::{GaConfig, SlotProblem};
use crate::rate::{full_interference_table, slot_throughputs, SlotChannels, SlotContext};
use crate::rng::{stream_id, StreamTag};
use crate::{Error, Result};

/// Label attached to the load-balancing baseline in every output.
pub const LB_FI_LABEL: &str =
    "capacity-constrained sum of full-interference rates (proxy for convex fractional load balancing)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub software_version: String,
    pub master_seed: u64,
    pub scenario: Scenario,
    pub deployment: Deployment,
    /// One checksum per slot over every `K x J` channel matrix.
    pub channel_checksums: Vec<u64>,
    pub lb_fi_label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeResult {
    pub scheme: Scheme,
    pub association: AssociationMatrix,
    /// Served BS per UE per slot (`None` = dropped).
    pub activations: Vec<Vec<Option<usize>>>,
    /// Streams each UE is served with (static across slots).
    pub streams: Vec<usize>,
    pub slot_utilities: Vec<f64>,
    pub slot_user_rates: Vec<Vec<f64>>,
    pub mean_sum_rate_bpshz: f64,
    pub mean_sum_rate_bps: f64,
    /// Half-width of the normal 95% interval on the mean, bits/s/Hz.
    pub ci95_bpshz: f64,
    pub per_user_mean_rate_bpshz: Vec<f64>,
    /// Dropped users per slot.
    pub dropped_per_slot: Vec<usize>,
    /// Slots whose activation violated a stream budget; always 0 when emitted.
    pub capacity_violations: usize,
    /// Checksums of the channels this scheme was evaluated on.
    pub channel_checksums: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ga_generations: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub metadata: Metadata,
    pub schemes: Vec<SchemeResult>,
}

impl ExperimentResult {
    pub fn scheme(&self, scheme: Scheme) -> Option<&SchemeResult> {
        self.schemes.iter().find(|s| s.scheme == scheme)
    }

    pub fn tx_power_dbm(&self) -> f64 {
        self.metadata.scenario.tx_power_dbm
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Serde(e.to_string()))
    }
}

/// Mean and normal-approximation 95% half-width (`1.96 s / sqrt(T)`).
pub fn mean_ci95(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * (var / n as f64).sqrt())
}

/// FNV-1a over the bit patterns of every channel entry.
pub fn channel_checksum(channels: &SlotChannels) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for m in channels.iter() {
        for z in m.iter() {
            for bits in [z.re.to_bits(), z.im.to_bits()] {
                for byte in bits.to_le_bytes() {
                    h ^= byte as u64;
                    h = h.wrapping_mul(0x0000_0100_0000_01b3);
                }
            }
        }
    }
    h
}

/// All `K x J` channels of slot `t`.
pub fn slot_channels(
    deployment: &Deployment,
    model: &ChannelModel,
    seed: u64,
    slot: usize,
) -> Result<SlotChannels> {
    let cache = &deployment.large_scale;
    let mut matrices = Vec::with_capacity(cache.num_ues * cache.num_bss);
    for k in 0..cache.num_ues {
        for j in 0..cache.num_bss {
            matrices.push(sample_channel_seeded(k, j, slot, cache, model, seed)?.matrix);
        }
    }
    SlotChannels::new(cache.num_ues, cache.num_bss, matrices)
}

fn slot_context(
    scenario: &Scenario,
    deployment: &Deployment,
    model: &ChannelModel,
    t: usize,
) -> Result<SlotContext> {
    let channels = slot_channels(deployment, model, scenario.master_seed, t)?;
    SlotContext::new(channels, scenario.bs_power_w(), scenario.noise)
}

/// GA settings for slot `t`, seeded from `(master_seed, Genetic, t)`.
pub fn slot_ga_config(scenario: &Scenario, t: usize) -> GaConfig {
    scenario.ga.with_seed(stream_id(
        scenario.master_seed,
        StreamTag::Genetic,
        &[t as u64],
    ))
}

/// Static association of a baseline scheme.
fn static_assignment(
    scheme: Scheme,
    scenario: &Scenario,
    deployment: &Deployment,
    lb_fi_table: Option<&[Vec<f64>]>,
) -> Result<SchemeAssignment> {
    let powers = scenario.bs_power_w();
    let noise = scenario.noise.power_w();
    let demands = scenario.stream_demands();
    let caps = scenario.capacities();
    let cache = &deployment.large_scale;
    match scheme {
        Scheme::MaxSinrDrop => {
            association::associate_max_sinr_drop(cache, &powers, noise, &demands, &caps)
        }
        Scheme::MaxSinrShareDrop => {
            association::associate_max_sinr_share_drop(cache, &powers, noise, &demands, &caps)
        }
        Scheme::LbFi => {
            let table =
                lb_fi_table.ok_or_else(|| Error::internal("missing full-interference table"))?;
            let solver = LoadBalanceSolver {
                enumeration_cap: scenario.enumeration_cap,
                ga: scenario.ga.clone(),
            };
            let activation =
                association::associate_load_balanced_fi(table, &demands, &caps, &solver)?;
            Ok(SchemeAssignment {
                activation,
                streams: demands,
            })
        }
        Scheme::Tfa => Err(Error::internal("TFA has no static assignment")),
    }
}

/// Full-interference rates averaged over all slots of the run.
fn averaged_fi_table(
    scenario: &Scenario,
    deployment: &Deployment,
    model: &ChannelModel,
) -> Result<Vec<Vec<f64>>> {
    let demands = scenario.stream_demands();
    let tables: Vec<Vec<Vec<f64>>> = (0..scenario.num_slots)
        .into_par_iter()
        .map(|t| {
            let ctx = slot_context(scenario, deployment, model, t)?;
            full_interference_table(&ctx, &demands)
                .map_err(|e| e.context(format!("slot {t}, scheme lb-fi")))
        })
        .collect::<Result<_>>()?;
    let (k_total, j_total) = (scenario.num_ues, scenario.num_bss());
    let mut avg = vec![vec![0.0; j_total]; k_total];
    for table in &tables {
        for (row, trow) in avg.iter_mut().zip(table) {
            for (a, v) in row.iter_mut().zip(trow) {
                *a += v;
            }
        }
    }
    let t = scenario.num_slots as f64;
    for row in &mut avg {
        for a in row {
            *a /= t;
        }
    }
    Ok(avg)
}

struct SlotOutcome {
    checksum: u64,
    /// Per requested scheme: activation, per-user rates, GA generations.
    per_scheme: Vec<(ActivationVector, Vec<f64>, Option<usize>)>,
}

fn run_slot(
    t: usize,
    scenario: &Scenario,
    deployment: &Deployment,
    model: &ChannelModel,
    schemes: &[Scheme],
    statics: &[Option<SchemeAssignment>],
) -> Result<SlotOutcome> {
    let ctx = slot_context(scenario, deployment, model, t)?;
    let checksum = channel_checksum(&ctx.channels);
    let mut per_scheme = Vec::with_capacity(schemes.len());
    for (scheme, fixed) in schemes.iter().zip(statics) {
        let wrap = |e: Error| e.context(format!("slot {t}, scheme {scheme}"));
        let (activation, streams, generations) = match fixed {
            Some(a) => {
                let mut act = a.activation.clone();
                act.slot_index = t;
                (act, a.streams.clone(), None)
            }
            None => {
                let demands = scenario.stream_demands();
                let problem =
                    SlotProblem::new(&ctx, &demands, &scenario.capacities()).map_err(wrap)?;
                let res = problem
                    .solve(&slot_ga_config(scenario, t), t)
                    .map_err(wrap)?;
                (res.best_activation, demands, Some(res.generations_run))
            }
        };
        let rates = slot_throughputs(&activation, &ctx, &streams).map_err(wrap)?;
        per_scheme.push((activation, rates.per_user_rate, generations));
    }
    Ok(SlotOutcome {
        checksum,
        per_scheme,
    })
}

/// Simulates `scenario.num_slots` slots of one deployment for each scheme on
/// shared channel realizations.
pub fn run_experiment(scenario: &Scenario, schemes: &[Scheme]) -> Result<ExperimentResult> {
    scenario.validate()?;
    let mut unique = Vec::new();
    for &s in schemes {
        if !unique.contains(&s) {
            unique.push(s);
        }
    }
    let schemes = unique;
    let needs_full = schemes
        .iter()
        .any(|s| matches!(s, Scheme::Tfa | Scheme::LbFi));
    if needs_full && !scenario.capacity_suffices() {
        let demand = scenario.num_ues * scenario.streams_per_ue;
        let capacity = scenario.num_bss() * scenario.streams_per_bs;
        return Err(Error::InfeasibleCapacity {
            demand,
            capacity,
            shortfall: demand - capacity,
        });
    }
    let deployment = sample_deployment(scenario)?;
    let model = scenario.channel_model()?;

    let lb_fi_table = if schemes.contains(&Scheme::LbFi) {
        Some(averaged_fi_table(scenario, &deployment, &model)?)
    } else {
        None
    };
    let statics: Vec<Option<SchemeAssignment>> = schemes
        .iter()
        .map(|&s| match s {
            Scheme::Tfa => Ok(None),
            _ => static_assignment(s, scenario, &deployment, lb_fi_table.as_deref())
                .map(Some)
                .map_err(|e| e.context(format!("scheme {s}"))),
        })
        .collect::<Result<_>>()?;

    let outcomes: Vec<SlotOutcome> = (0..scenario.num_slots)
        .into_par_iter()
        .map(|t| run_slot(t, scenario, &deployment, &model, &schemes, &statics))
        .collect::<Result<_>>()?;

    let checksums: Vec<u64> = outcomes.iter().map(|o| o.checksum).collect();
    let caps = scenario.capacities();
    let bandwidth = scenario.noise.bandwidth_hz;
    let mut results = Vec::with_capacity(schemes.len());
    for (i, &scheme) in schemes.iter().enumerate() {
        let streams = match &statics[i] {
            Some(a) => a.streams.clone(),
            None => scenario.stream_demands(),
        };
        let columns: Vec<ActivationVector> =
            outcomes.iter().map(|o| o.per_scheme[i].0.clone()).collect();
        let mut violations = 0;
        for col in &columns {
            if !feasible(col, &streams, &caps)?.feasible {
                violations += 1;
            }
        }
        if violations > 0 {
            return Err(Error::internal(format!(
                "scheme {scheme} produced {violations} activations over the stream budget"
            )));
        }
        let slot_user_rates: Vec<Vec<f64>> =
            outcomes.iter().map(|o| o.per_scheme[i].1.clone()).collect();
        let slot_utilities: Vec<f64> = slot_user_rates.iter().map(|r| r.iter().sum()).collect();
        let (mean, ci95) = mean_ci95(&slot_utilities);
        let t = slot_utilities.len() as f64;
        let per_user_mean_rate_bpshz = (0..scenario.num_ues)
            .map(|k| slot_user_rates.iter().map(|r| r[k]).sum::<f64>() / t)
            .collect();
        let dropped_per_slot = columns
            .iter()
            .map(|c| c.num_ues() - c.num_served())
            .collect();
        let ga_generations = match scheme {
            Scheme::Tfa => Some(outcomes.iter().filter_map(|o| o.per_scheme[i].2).collect()),
            _ => None,
        };
        let matrix = ActivationMatrix::new(columns)?;
        results.push(SchemeResult {
            scheme,
            association: association_matrix(&matrix, scenario.num_bss())?,
            activations: matrix.columns.into_iter().map(|c| c.assignment).collect(),
            streams,
            slot_utilities,
            slot_user_rates,
            mean_sum_rate_bpshz: mean,
            mean_sum_rate_bps: mean * bandwidth,
            ci95_bpshz: ci95,
            per_user_mean_rate_bpshz,
            dropped_per_slot,
            capacity_violations: violations,
            channel_checksums: checksums.clone(),
            ga_generations,
        });
    }
    Ok(ExperimentResult {
        metadata: Metadata {
            software_version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed: scenario.master_seed,
            scenario: scenario.clone(),
            deployment,
            channel_checksums: checksums,
            lb_fi_label: LB_FI_LABEL.to_string(),
        },
        schemes: results,
    })
}

/// Reruns the experiment at every transmit power with the same seed, so all
/// powers and schemes share deployments and channel draws.
pub fn power_sweep(
    scenario: &Scenario,
    schemes: &[Scheme],
    power_grid_dbm: &[f64],
) -> Result<Vec<ExperimentResult>> {
    if power_grid_dbm.is_empty() {
        return Err(Error::invalid("power grid must not be empty"));
    }
    power_grid_dbm
        .iter()
        .map(|&p| {
            let s = Scenario {
                tx_power_dbm: p,
                bs_tx_power_dbm: None,
                ..scenario.clone()
            };
            run_experiment(&s, schemes).map_err(|e| e.context(format!("power {p} dBm")))
        })
        .collect()
}

/// GA against exhaustive search on one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRecord {
    pub slot: usize,
    pub ga_utility: f64,
    pub oracle_utility: f64,
    /// GA incumbent re-evaluated through the direct rate path.
    pub ga_utility_direct: f64,
    pub ga_assignment: Vec<Option<usize>>,
    pub oracle_assignment: Vec<Option<usize>>,
    pub generations_run: usize,
    pub evaluations: usize,
    pub utility_trace: Vec<f64>,
}

impl OracleRecord {
    pub fn abs_gap(&self) -> f64 {
        self.oracle_utility - self.ga_utility
    }

    pub fn rel_gap(&self) -> f64 {
        self.abs_gap() / self.oracle_utility.abs().max(f64::MIN_POSITIVE)
    }
}

/// Solves slots `0..num_slots` of the scenario's deployment both with the GA
/// and exhaustively.
pub fn oracle_check(scenario: &Scenario, num_slots: usize) -> Result<Vec<OracleRecord>> {
    scenario.validate()?;
    let deployment = sample_deployment(scenario)?;
    let model = scenario.channel_model()?;
    let demands = scenario.stream_demands();
    let caps = scenario.capacities();
    (0..num_slots)
        .into_par_iter()
        .map(|t| {
            let wrap = |e: Error| e.context(format!("slot {t}, oracle check"));
            let ctx = slot_context(scenario, &deployment, &model, t).map_err(wrap)?;
            let problem = SlotProblem::new(&ctx, &demands, &caps).map_err(wrap)?;
            let ga = problem
                .solve(&slot_ga_config(scenario, t), t)
                .map_err(wrap)?;
            let (oracle_utility, oracle) = problem
                .brute_force(scenario.enumeration_cap, t)
                .map_err(wrap)?;
            let direct = slot_throughputs(&ga.best_activation, &ctx, &demands).map_err(wrap)?;
            Ok(OracleRecord {
                slot: t,
                ga_utility: ga.best_utility,
                oracle_utility,
                ga_utility_direct: direct.utility,
                ga_assignment: ga.best_activation.assignment,
                oracle_assignment: oracle.assignment,
                generations_run: ga.generations_run,
                evaluations: ga.evaluations,
                utility_trace: ga.utility_trace,
            })
        })
        .collect()
}

/// Monte Carlo summary of the channel model under a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub draws: usize,
    /// Sample mean of the small-scale `||H||_F^2`.
    pub mean_frobenius_sq: f64,
    /// `N M`.
    pub expected_frobenius_sq: f64,
    /// `(distance, LoS probability)` pairs.
    pub los_probability: Vec<(f64, f64)>,
    /// `(distance, LoS path loss, NLoS path loss)` at zero shadowing, dB.
    pub path_loss_db: Vec<(f64, f64, f64)>,
}

impl ChannelStats {
    pub fn relative_error(&self) -> f64 {
        (self.mean_frobenius_sq - self.expected_frobenius_sq).abs() / self.expected_frobenius_sq
    }
}

pub fn channel_stats(
    scenario: &Scenario,
    draws: usize,
    distances_m: &[f64],
) -> Result<ChannelStats> {
    use crate::channel::{los_probability, path_loss_db, sample_small_scale, LinkState};
    if draws == 0 {
        return Err(Error::invalid("need at least one draw"));
    }
    let model = scenario.channel_model()?;
    let wavelength = model.large_scale.wavelength();
    let sums: Vec<f64> = (0..draws)
        .into_par_iter()
        .map(|i| {
            let mut rng =
                crate::rng::stream(scenario.master_seed, StreamTag::Auxiliary, &[i as u64]);
            let h = sample_small_scale(
                &model.clusters,
                &model.ue_array,
                &model.bs_array,
                wavelength,
                &mut rng,
            )?;
            Ok(crate::linalg::frobenius_sq(&h))
        })
        .collect::<Result<_>>()?;
    let los = distances_m
        .iter()
        .map(|&d| Ok((d, los_probability(d, &model.large_scale)?)))
        .collect::<Result<_>>()?;
    let pl = distances_m
        .iter()
        .map(|&d| {
            Ok((
                d,
                path_loss_db(d, LinkState::Los, &model.large_scale, 0.0)?.db,
                path_loss_db(d, LinkState::Nlos, &model.large_scale, 0.0)?.db,
            ))
        })
        .collect::<Result<_>>()?;
    Ok(ChannelStats {
        draws,
        mean_frobenius_sq: sums.iter().sum::<f64>() / draws as f64,
        expected_frobenius_sq: (model.ue_array.num_elements() * model.bs_array.num_elements())
            as f64,
        los_probability: los,
        path_loss_db: pl,
    })
}
