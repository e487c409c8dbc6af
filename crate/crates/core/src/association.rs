//! Activation and association structures, feasibility checks and the static
//! baseline association schemes.
//!
//! BS and UE indices are zero-based in memory. `None` in an assignment marks
//! an unserved (dropped) user.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::channel::LargeScaleCache;
use crate::ga::{self, AdditiveObjective, AssignmentProblem, GaConfig};
use crate::{Error, Result};

/// Per-slot UE-to-BS assignment.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActivationVector {
    pub assignment: Vec<Option<usize>>,
    pub slot_index: usize,
}

impl ActivationVector {
    pub fn new(assignment: Vec<Option<usize>>, slot_index: usize) -> Self {
        Self {
            assignment,
            slot_index,
        }
    }

    /// Every user served, `assignment[k]` is the BS of user `k`.
    pub fn full(assignment: &[usize], slot_index: usize) -> Self {
        Self::new(assignment.iter().map(|&b| Some(b)).collect(), slot_index)
    }

    pub fn unserved(num_ues: usize, slot_index: usize) -> Self {
        Self::new(vec![None; num_ues], slot_index)
    }

    pub fn num_ues(&self) -> usize {
        self.assignment.len()
    }

    /// `(ue, bs)` for every served user in UE order.
    pub fn served(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter_map(|(k, b)| b.map(|b| (k, b)))
    }

    pub fn num_served(&self) -> usize {
        self.assignment.iter().flatten().count()
    }

    /// Number of users attached to each BS (`Q_j`).
    pub fn loads(&self, num_bss: usize) -> Result<Vec<usize>> {
        let mut loads = vec![0; num_bss];
        for (k, b) in self.served() {
            *loads.get_mut(b).ok_or_else(|| {
                Error::invalid(format!("user {k} assigned to BS {b}, only {num_bss} BSs"))
            })? += 1;
        }
        Ok(loads)
    }
}

/// Overload of a single BS.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Overload {
    pub bs: usize,
    pub demand: usize,
    pub capacity: usize,
    pub overflow: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub overloads: Vec<Overload>,
}

/// Stream demand placed on every BS by `activation`.
pub fn stream_loads(
    activation: &ActivationVector,
    stream_demands: &[usize],
    num_bss: usize,
) -> Result<Vec<usize>> {
    if stream_demands.len() != activation.num_ues() {
        return Err(Error::invalid("one stream demand per user required"));
    }
    let mut demand = vec![0usize; num_bss];
    for (k, b) in activation.served() {
        *demand
            .get_mut(b)
            .ok_or_else(|| Error::invalid(format!("BS index {b} out of range")))? +=
            stream_demands[k];
    }
    Ok(demand)
}

/// Checks the per-BS stream capacities. Per-user uniqueness is structural.
pub fn feasible(
    activation: &ActivationVector,
    stream_demands: &[usize],
    capacities: &[usize],
) -> Result<FeasibilityReport> {
    let demand = stream_loads(activation, stream_demands, capacities.len())?;
    let overloads: Vec<Overload> = demand
        .iter()
        .zip(capacities)
        .enumerate()
        .filter(|(_, (d, c))| d > c)
        .map(|(bs, (&d, &c))| Overload {
            bs,
            demand: d,
            capacity: c,
            overflow: d - c,
        })
        .collect();
    Ok(FeasibilityReport {
        feasible: overloads.is_empty(),
        overloads,
    })
}

/// Users served by one BS in one slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivationSet {
    pub bs_index: usize,
    /// Sorted UE indices.
    pub members: Vec<usize>,
    pub slot_index: usize,
}

pub fn activation_sets(
    activation: &ActivationVector,
    num_bss: usize,
) -> Result<Vec<ActivationSet>> {
    let mut sets: Vec<ActivationSet> = (0..num_bss)
        .map(|bs_index| ActivationSet {
            bs_index,
            members: Vec::new(),
            slot_index: activation.slot_index,
        })
        .collect();
    for (k, b) in activation.served() {
        sets.get_mut(b)
            .ok_or_else(|| Error::invalid(format!("BS index {b} out of range")))?
            .members
            .push(k);
    }
    Ok(sets)
}

/// Activation vectors of `T` consecutive slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationMatrix {
    pub columns: Vec<ActivationVector>,
}

impl ActivationMatrix {
    pub fn new(columns: Vec<ActivationVector>) -> Result<Self> {
        if let Some(first) = columns.first() {
            let k = first.num_ues();
            if columns.iter().any(|c| c.num_ues() != k) {
                return Err(Error::invalid(
                    "activation vectors have inconsistent user counts",
                ));
            }
        }
        Ok(Self { columns })
    }

    pub fn horizon(&self) -> usize {
        self.columns.len()
    }
}

/// Fraction of slots each UE spent on each BS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationMatrix {
    pub num_ues: usize,
    pub num_bss: usize,
    pub horizon: usize,
    /// Row-major slot counts; coefficients are `counts / horizon`.
    pub counts: Vec<usize>,
    pub coefficients: Vec<f64>,
}

impl AssociationMatrix {
    pub fn coefficient(&self, ue: usize, bs: usize) -> f64 {
        self.coefficients[ue * self.num_bss + bs]
    }

    pub fn row(&self, ue: usize) -> &[f64] {
        &self.coefficients[ue * self.num_bss..(ue + 1) * self.num_bss]
    }

    /// Fraction of slots `ue` was served, from the integer counts (so a user
    /// served in every slot gives exactly 1).
    pub fn row_sum(&self, ue: usize) -> f64 {
        let served: usize = self.counts[ue * self.num_bss..(ue + 1) * self.num_bss]
            .iter()
            .sum();
        served as f64 / self.horizon as f64
    }

    /// CSV with one row per UE and one column per BS (1-based labels).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("ue");
        for j in 0..self.num_bss {
            let _ = write!(out, ",bs{}", j + 1);
        }
        out.push('\n');
        for k in 0..self.num_ues {
            let _ = write!(out, "{}", k + 1);
            for c in self.row(k) {
                let _ = write!(out, ",{c}");
            }
            out.push('\n');
        }
        out
    }
}

pub fn association_matrix(
    activations: &ActivationMatrix,
    num_bss: usize,
) -> Result<AssociationMatrix> {
    let horizon = activations.horizon();
    if horizon == 0 {
        return Err(Error::invalid("association matrix needs at least one slot"));
    }
    let num_ues = activations.columns[0].num_ues();
    let mut counts = vec![0usize; num_ues * num_bss];
    for col in &activations.columns {
        for (k, b) in col.served() {
            if b >= num_bss {
                return Err(Error::invalid(format!("BS index {b} out of range")));
            }
            counts[k * num_bss + b] += 1;
        }
    }
    let coefficients = counts.iter().map(|&c| c as f64 / horizon as f64).collect();
    Ok(AssociationMatrix {
        num_ues,
        num_bss,
        horizon,
        counts,
        coefficients,
    })
}

/// Long-term SINR of `ue` towards every BS from large-scale gains only.
pub fn max_sinr_metric(
    ue: usize,
    cache: &LargeScaleCache,
    bs_power_w: &[f64],
    noise_power_w: f64,
) -> Result<Vec<f64>> {
    let j_total = cache.num_bss;
    if bs_power_w.len() != j_total {
        return Err(Error::invalid("one transmit power per BS required"));
    }
    let rx: Vec<f64> = (0..j_total)
        .map(|j| Ok(cache.get(ue, j)?.power_gain() * bs_power_w[j]))
        .collect::<Result<_>>()?;
    let total: f64 = rx.iter().sum();
    Ok(rx
        .iter()
        .map(|&s| s / ((total - s).max(0.0) + noise_power_w))
        .collect())
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Max-SINR attachment of every user: `(serving BS, SINR to it)` per user.
fn max_sinr_attach(
    cache: &LargeScaleCache,
    bs_power_w: &[f64],
    noise_power_w: f64,
) -> Result<Vec<(usize, f64)>> {
    (0..cache.num_ues)
        .map(|k| {
            let sinr = max_sinr_metric(k, cache, bs_power_w, noise_power_w)?;
            let j = argmax(&sinr);
            Ok((j, sinr[j]))
        })
        .collect()
}

/// Users attached to `bs`, strongest first; ties by lower UE index.
fn ranked_members(attach: &[(usize, f64)], bs: usize) -> Vec<usize> {
    let mut members: Vec<usize> = (0..attach.len()).filter(|&k| attach[k].0 == bs).collect();
    members.sort_by(|&a, &b| {
        attach[b]
            .1
            .partial_cmp(&attach[a].1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    members
}

/// Outcome of a baseline scheme: activation plus the stream count each user
/// is actually served with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemeAssignment {
    pub activation: ActivationVector,
    pub streams: Vec<usize>,
}

impl SchemeAssignment {
    pub fn num_dropped(&self) -> usize {
        self.activation.num_ues() - self.activation.num_served()
    }
}

fn check_baseline_inputs(
    cache: &LargeScaleCache,
    streams: &[usize],
    capacities: &[usize],
) -> Result<()> {
    if streams.len() != cache.num_ues || capacities.len() != cache.num_bss {
        return Err(Error::invalid(
            "stream demands / capacities do not match the deployment",
        ));
    }
    Ok(())
}

/// Max-SINR attachment; overloaded BSs keep their strongest users that fit
/// and drop the rest.
pub fn associate_max_sinr_drop(
    cache: &LargeScaleCache,
    bs_power_w: &[f64],
    noise_power_w: f64,
    stream_demands: &[usize],
    capacities: &[usize],
) -> Result<SchemeAssignment> {
    check_baseline_inputs(cache, stream_demands, capacities)?;
    let attach = max_sinr_attach(cache, bs_power_w, noise_power_w)?;
    let mut assignment = vec![None; cache.num_ues];
    for (bs, &cap) in capacities.iter().enumerate() {
        let mut used = 0;
        for k in ranked_members(&attach, bs) {
            if used + stream_demands[k] <= cap {
                used += stream_demands[k];
                assignment[k] = Some(bs);
            }
        }
    }
    Ok(SchemeAssignment {
        activation: ActivationVector::new(assignment, 0),
        streams: stream_demands.to_vec(),
    })
}

/// Max-SINR attachment; an overloaded BS with `A` attached users serves its
/// `min(A, D)` strongest users with `max(1, D / min(A, D))` streams each and
/// drops the rest.
pub fn associate_max_sinr_share_drop(
    cache: &LargeScaleCache,
    bs_power_w: &[f64],
    noise_power_w: f64,
    stream_demands: &[usize],
    capacities: &[usize],
) -> Result<SchemeAssignment> {
    check_baseline_inputs(cache, stream_demands, capacities)?;
    let attach = max_sinr_attach(cache, bs_power_w, noise_power_w)?;
    let mut assignment = vec![None; cache.num_ues];
    let mut streams = stream_demands.to_vec();
    for (bs, &cap) in capacities.iter().enumerate() {
        let members = ranked_members(&attach, bs);
        let demand: usize = members.iter().map(|&k| stream_demands[k]).sum();
        if demand <= cap {
            for k in members {
                assignment[k] = Some(bs);
            }
            continue;
        }
        let served = members.len().min(cap);
        if served == 0 {
            continue;
        }
        let share = (cap / served).max(1);
        for &k in &members[..served] {
            assignment[k] = Some(bs);
            streams[k] = share.min(stream_demands[k]);
        }
    }
    Ok(SchemeAssignment {
        activation: ActivationVector::new(assignment, 0),
        streams,
    })
}

/// How the load-balancing baseline solves its assignment problem.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadBalanceSolver {
    /// Exhaustive search when `J^K` is at most this many assignments.
    pub enumeration_cap: f64,
    /// Genetic solver settings above the cap.
    pub ga: GaConfig,
}

impl Default for LoadBalanceSolver {
    fn default() -> Self {
        Self {
            enumeration_cap: ga::DEFAULT_ENUMERATION_CAP,
            ga: GaConfig::default(),
        }
    }
}

/// Capacity-constrained maximization of the summed full-interference rates
/// `fi_rates[k][j]`; every user is served.
pub fn associate_load_balanced_fi(
    fi_rates: &[Vec<f64>],
    stream_demands: &[usize],
    capacities: &[usize],
    solver: &LoadBalanceSolver,
) -> Result<ActivationVector> {
    let problem = AssignmentProblem::new(stream_demands, capacities, fi_rates)?;
    let objective = AdditiveObjective::new(fi_rates);
    let best = if problem.search_space_size() <= solver.enumeration_cap {
        ga::enumerate(&problem, &objective, solver.enumeration_cap)?.1
    } else {
        ga::evolve(&problem, &objective, &solver.ga)?.best
    };
    Ok(ActivationVector::full(&best, 0))
}
