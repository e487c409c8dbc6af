//! Scenario configuration and deployment sampling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{
    ArrayGeometry, ChannelModel, ClusterConfig, LargeScaleCache, LargeScaleParams,
};
use crate::ga::{GaConfig, DEFAULT_ENUMERATION_CAP};
use crate::rate::{dbm_to_watts, NoiseModel};
use crate::rng::{self, StreamTag};
use crate::{Error, Result};

/// Association schemes compared by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    /// Per-slot time-fractional association (genetic search).
    #[serde(rename = "tfa")]
    Tfa,
    #[serde(rename = "maxsinr-drop")]
    MaxSinrDrop,
    #[serde(rename = "maxsinr-share-drop")]
    MaxSinrShareDrop,
    /// Capacity-constrained full-interference load balancing.
    #[serde(rename = "lb-fi")]
    LbFi,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::Tfa,
        Scheme::MaxSinrDrop,
        Scheme::MaxSinrShareDrop,
        Scheme::LbFi,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Tfa => "tfa",
            Scheme::MaxSinrDrop => "maxsinr-drop",
            Scheme::MaxSinrShareDrop => "maxsinr-share-drop",
            Scheme::LbFi => "lb-fi",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown scheme '{s}' (expected tfa, maxsinr-drop, maxsinr-share-drop or lb-fi)"
                ))
            })
    }
}

/// UE drop model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UePlacement {
    UniformRandom,
    /// `count` UEs uniformly in an annulus around BS `bs`, the rest uniform.
    Congested {
        bs: usize,
        count: usize,
        min_radius_m: f64,
        max_radius_m: f64,
    },
    /// Fixed ground positions `[x, y]` in meters.
    Explicit {
        positions: Vec<[f64; 2]>,
    },
}

impl UePlacement {
    /// Five UEs around the central BS.
    pub fn congested() -> Self {
        UePlacement::Congested {
            bs: 0,
            count: 5,
            min_radius_m: 20.0,
            max_radius_m: 60.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayDims {
    pub rows: usize,
    pub cols: usize,
    /// Element spacing in meters; half the carrier wavelength when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing_m: Option<f64>,
}

impl ArrayDims {
    pub fn square(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            spacing_m: None,
        }
    }

    pub fn geometry(&self, wavelength: f64) -> Result<ArrayGeometry> {
        ArrayGeometry::new(
            self.rows,
            self.cols,
            self.spacing_m.unwrap_or(wavelength / 2.0),
        )
    }
}

/// Complete description of one simulated network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    /// Width and depth of the deployment area in meters.
    pub area_m: [f64; 2],
    /// BS positions `[x, y, height]` in meters.
    pub bs_positions: Vec<[f64; 3]>,
    pub num_ues: usize,
    pub ue_height_m: f64,
    pub ue_placement: UePlacement,
    pub bs_array: ArrayDims,
    pub ue_array: ArrayDims,
    pub streams_per_ue: usize,
    pub streams_per_bs: usize,
    /// Common BS transmit power.
    pub tx_power_dbm: f64,
    /// Optional per-BS override of `tx_power_dbm`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bs_tx_power_dbm: Option<Vec<f64>>,
    pub large_scale: LargeScaleParams,
    pub noise: NoiseModel,
    pub clusters: ClusterConfig,
    pub num_slots: usize,
    /// Slots per point of a transmit-power sweep.
    pub sweep_num_slots: usize,
    /// Transmit powers of a sweep, dBm.
    pub sweep_powers_dbm: Vec<f64>,
    pub master_seed: u64,
    pub ga: GaConfig,
    /// Largest `J^K` solved exactly by the load-balancing baseline.
    pub enumeration_cap: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            area_m: [300.0, 300.0],
            bs_positions: vec![
                [150.0, 150.0, 10.0],
                [75.0, 75.0, 10.0],
                [225.0, 75.0, 10.0],
                [150.0, 240.0, 10.0],
            ],
            num_ues: 8,
            ue_height_m: 1.5,
            ue_placement: UePlacement::UniformRandom,
            bs_array: ArrayDims::square(8),
            ue_array: ArrayDims::square(2),
            streams_per_ue: 2,
            streams_per_bs: 4,
            tx_power_dbm: 30.0,
            bs_tx_power_dbm: None,
            large_scale: LargeScaleParams::default(),
            noise: NoiseModel::default(),
            clusters: ClusterConfig::default(),
            num_slots: 1000,
            sweep_num_slots: 200,
            sweep_powers_dbm: vec![10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0],
            master_seed: 1,
            ga: GaConfig::default(),
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

impl Scenario {
    pub fn num_bss(&self) -> usize {
        self.bs_positions.len()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(s)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn channel_model(&self) -> Result<ChannelModel> {
        let wavelength = self.large_scale.wavelength();
        Ok(ChannelModel {
            large_scale: self.large_scale,
            clusters: self.clusters,
            ue_array: self.ue_array.geometry(wavelength)?,
            bs_array: self.bs_array.geometry(wavelength)?,
        })
    }

    pub fn bs_power_w(&self) -> Vec<f64> {
        match &self.bs_tx_power_dbm {
            Some(p) => p.iter().copied().map(dbm_to_watts).collect(),
            None => vec![dbm_to_watts(self.tx_power_dbm); self.num_bss()],
        }
    }

    pub fn stream_demands(&self) -> Vec<usize> {
        vec![self.streams_per_ue; self.num_ues]
    }

    pub fn capacities(&self) -> Vec<usize> {
        vec![self.streams_per_bs; self.num_bss()]
    }

    pub fn validate(&self) -> Result<()> {
        let [w, d] = self.area_m;
        if !(w > 0.0 && d > 0.0) {
            return Err(Error::invalid("area dimensions must be positive"));
        }
        if self.bs_positions.is_empty() || self.num_ues == 0 {
            return Err(Error::invalid("need at least one BS and one UE"));
        }
        for p in &self.bs_positions {
            if !(0.0..=w).contains(&p[0]) || !(0.0..=d).contains(&p[1]) || !(p[2] >= 0.0) {
                return Err(Error::invalid(format!(
                    "BS position {p:?} outside the area"
                )));
            }
        }
        if !(self.ue_height_m >= 0.0) {
            return Err(Error::invalid("UE height must be non-negative"));
        }
        if let Some(p) = &self.bs_tx_power_dbm {
            if p.len() != self.num_bss() {
                return Err(Error::invalid("bs_tx_power_dbm needs one entry per BS"));
            }
        }
        if self.bs_power_w().iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("transmit powers must be finite"));
        }
        match &self.ue_placement {
            UePlacement::UniformRandom => {}
            UePlacement::Congested {
                bs,
                count,
                min_radius_m,
                max_radius_m,
            } => {
                if *bs >= self.num_bss() || *count > self.num_ues {
                    return Err(Error::invalid(
                        "congested placement refers to a missing BS or too many UEs",
                    ));
                }
                if !(*min_radius_m >= 0.0 && max_radius_m >= min_radius_m) {
                    return Err(Error::invalid(
                        "congested placement radii must satisfy 0 <= min <= max",
                    ));
                }
            }
            UePlacement::Explicit { positions } => {
                if positions.len() != self.num_ues {
                    return Err(Error::invalid(
                        "explicit placement needs one position per UE",
                    ));
                }
                if positions
                    .iter()
                    .any(|p| !(0.0..=w).contains(&p[0]) || !(0.0..=d).contains(&p[1]))
                {
                    return Err(Error::invalid("explicit UE position outside the area"));
                }
            }
        }
        let model = self.channel_model()?;
        let n = model.ue_array.num_elements();
        let m = model.bs_array.num_elements();
        if self.streams_per_ue == 0 || self.streams_per_ue > n.min(m) {
            return Err(Error::invalid(format!(
                "streams_per_ue must lie in 1..={}",
                n.min(m)
            )));
        }
        if self.streams_per_bs == 0 {
            return Err(Error::invalid("streams_per_bs must be positive"));
        }
        self.large_scale.validate()?;
        self.clusters.validate()?;
        self.noise.validate()?;
        self.ga.validate()?;
        if self.num_slots == 0 || self.sweep_num_slots == 0 {
            return Err(Error::invalid("slot counts must be at least 1"));
        }
        if self.sweep_powers_dbm.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("sweep powers must be finite"));
        }
        Ok(())
    }

    /// Whether every UE can be served simultaneously.
    pub fn capacity_suffices(&self) -> bool {
        self.num_ues * self.streams_per_ue <= self.num_bss() * self.streams_per_bs
    }
}

/// One sampled placement of UEs with frozen large-scale link parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    /// UE positions `[x, y, height]`.
    pub ue_positions: Vec<[f64; 3]>,
    pub large_scale: LargeScaleCache,
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Draws UE positions from `(seed, UePlacement)` and link parameters from
/// `(seed, LargeScale, k, j)`.
pub fn sample_deployment(scenario: &Scenario) -> Result<Deployment> {
    scenario.validate()?;
    let [w, d] = scenario.area_m;
    let h = scenario.ue_height_m;
    let mut rng = rng::stream(scenario.master_seed, StreamTag::UePlacement, &[]);
    let uniform = |rng: &mut crate::rng::SimRng| -> [f64; 3] {
        [rng.random::<f64>() * w, rng.random::<f64>() * d, h]
    };
    let ue_positions: Vec<[f64; 3]> = match &scenario.ue_placement {
        UePlacement::UniformRandom => (0..scenario.num_ues).map(|_| uniform(&mut rng)).collect(),
        UePlacement::Congested {
            bs,
            count,
            min_radius_m,
            max_radius_m,
        } => {
            let center = scenario.bs_positions[*bs];
            let mut out = Vec::with_capacity(scenario.num_ues);
            for _ in 0..*count {
                // Uniform over the annulus area.
                let (r0, r1) = (min_radius_m.powi(2), max_radius_m.powi(2));
                let r = (r0 + (r1 - r0) * rng.random::<f64>()).sqrt();
                let phi = 2.0 * std::f64::consts::PI * rng.random::<f64>();
                out.push([
                    (center[0] + r * phi.cos()).clamp(0.0, w),
                    (center[1] + r * phi.sin()).clamp(0.0, d),
                    h,
                ]);
            }
            while out.len() < scenario.num_ues {
                out.push(uniform(&mut rng));
            }
            out
        }
        UePlacement::Explicit { positions } => positions.iter().map(|p| [p[0], p[1], h]).collect(),
    };
    let distances: Vec<Vec<f64>> = ue_positions
        .iter()
        .map(|&u| {
            scenario
                .bs_positions
                .iter()
                .map(|&b| distance(u, b))
                .collect()
        })
        .collect();
    let large_scale =
        LargeScaleCache::sample(&distances, &scenario.large_scale, scenario.master_seed)?;
    Ok(Deployment {
        ue_positions,
        large_scale,
    })
}
