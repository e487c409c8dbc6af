//! Clustered mmWave MIMO channel with LoS/NLoS large-scale fading.
//!
//! The small-scale part is a sum of `C x L` rank-one ray terms built from
//! uniform planar array responses; the large-scale part (link state, shadow
//! draw, path loss) is frozen per UE-BS link for a deployment and applied as a
//! separate amplitude factor.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::rng::{self, StreamTag};
use crate::{CMatrix, CVector, Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Uniform `U x V` planar array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub rows_u: usize,
    pub cols_v: usize,
    /// Inter-element spacing in meters.
    pub element_spacing: f64,
}

impl ArrayGeometry {
    pub fn new(rows_u: usize, cols_v: usize, element_spacing: f64) -> Result<Self> {
        let g = Self {
            rows_u,
            cols_v,
            element_spacing,
        };
        g.validate()?;
        Ok(g)
    }

    /// Array with half-wavelength spacing.
    pub fn half_wavelength(rows_u: usize, cols_v: usize, wavelength: f64) -> Result<Self> {
        Self::new(rows_u, cols_v, wavelength / 2.0)
    }

    pub fn num_elements(&self) -> usize {
        self.rows_u * self.cols_v
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows_u == 0 || self.cols_v == 0 {
            return Err(Error::invalid("array dimensions must be at least 1x1"));
        }
        if !(self.element_spacing > 0.0) || !self.element_spacing.is_finite() {
            return Err(Error::invalid("element spacing must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkState {
    Los,
    Nlos,
}

/// Large-scale propagation parameters; defaults are the 73 GHz values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LargeScaleParams {
    pub carrier_freq_hz: f64,
    pub ref_distance_m: f64,
    pub pathloss_exp_los: f64,
    pub pathloss_exp_nlos: f64,
    pub shadow_sigma_los_db: f64,
    pub shadow_sigma_nlos_db: f64,
    /// Distance below which the link is always LoS.
    pub breakpoint_m: f64,
    /// Decay length of the LoS probability beyond the breakpoint.
    pub decay_m: f64,
}

impl Default for LargeScaleParams {
    fn default() -> Self {
        Self {
            carrier_freq_hz: 73e9,
            ref_distance_m: 1.0,
            pathloss_exp_los: 2.0,
            pathloss_exp_nlos: 3.4,
            shadow_sigma_los_db: 4.8,
            shadow_sigma_nlos_db: 7.9,
            breakpoint_m: 27.0,
            decay_m: 71.0,
        }
    }
}

impl LargeScaleParams {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq_hz
    }

    pub fn exponent(&self, state: LinkState) -> f64 {
        match state {
            LinkState::Los => self.pathloss_exp_los,
            LinkState::Nlos => self.pathloss_exp_nlos,
        }
    }

    pub fn shadow_sigma_db(&self, state: LinkState) -> f64 {
        match state {
            LinkState::Los => self.shadow_sigma_los_db,
            LinkState::Nlos => self.shadow_sigma_nlos_db,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("carrier_freq_hz", self.carrier_freq_hz),
            ("ref_distance_m", self.ref_distance_m),
            ("breakpoint_m", self.breakpoint_m),
            ("decay_m", self.decay_m),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        let non_negative = [
            ("pathloss_exp_los", self.pathloss_exp_los),
            ("pathloss_exp_nlos", self.pathloss_exp_nlos),
            ("shadow_sigma_los_db", self.shadow_sigma_los_db),
            ("shadow_sigma_nlos_db", self.shadow_sigma_nlos_db),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be non-negative")));
            }
        }
        Ok(())
    }
}

/// Cluster structure of the small-scale channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub num_clusters: usize,
    pub rays_per_cluster: usize,
    /// Intra-cluster azimuth spread (standard deviation of the Laplacian offsets), radians.
    pub azimuth_spread_rad: f64,
    /// Intra-cluster elevation spread, radians.
    pub elevation_spread_rad: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            num_clusters: 5,
            rays_per_cluster: 10,
            azimuth_spread_rad: 5f64.to_radians(),
            elevation_spread_rad: 2.5f64.to_radians(),
        }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_clusters == 0 || self.rays_per_cluster == 0 {
            return Err(Error::invalid("need at least one cluster and one ray"));
        }
        for v in [self.azimuth_spread_rad, self.elevation_spread_rad] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid("angle spreads must be non-negative"));
            }
        }
        Ok(())
    }
}

/// Unit-norm UPA response for azimuth `azimuth` and elevation `elevation`.
///
/// Element `(u, v)` sits at flat index `u * V + v` and carries phase
/// `2 pi / lambda * d * (u sin(az) sin(el) + v cos(el))`.
pub fn array_response(
    azimuth: f64,
    elevation: f64,
    geometry: &ArrayGeometry,
    wavelength: f64,
) -> Result<CVector> {
    if !azimuth.is_finite() || !elevation.is_finite() {
        return Err(Error::invalid("array response angles must be finite"));
    }
    if !(wavelength > 0.0) {
        return Err(Error::invalid("wavelength must be positive"));
    }
    geometry.validate()?;
    Ok(array_response_unchecked(
        azimuth, elevation, geometry, wavelength,
    ))
}

fn array_response_unchecked(
    azimuth: f64,
    elevation: f64,
    geometry: &ArrayGeometry,
    wavelength: f64,
) -> CVector {
    let k = 2.0 * PI / wavelength * geometry.element_spacing;
    let du = k * azimuth.sin() * elevation.sin();
    let dv = k * elevation.cos();
    let scale = 1.0 / (geometry.num_elements() as f64).sqrt();
    CVector::from_iterator(
        geometry.num_elements(),
        (0..geometry.rows_u).flat_map(|u| {
            (0..geometry.cols_v)
                .map(move |v| Complex64::from_polar(scale, u as f64 * du + v as f64 * dv))
        }),
    )
}

fn check_distance(distance_3d: f64) -> Result<()> {
    if !(distance_3d > 0.0) || !distance_3d.is_finite() {
        return Err(Error::invalid(format!(
            "distance must be positive and finite, got {distance_3d}"
        )));
    }
    Ok(())
}

/// LoS probability at 3D distance `distance_3d`.
pub fn los_probability(distance_3d: f64, params: &LargeScaleParams) -> Result<f64> {
    check_distance(distance_3d)?;
    let decay = (-distance_3d / params.decay_m).exp();
    let near = (params.breakpoint_m / distance_3d).min(1.0);
    let p = (near * (1.0 - decay) + decay).powi(2);
    Ok(p.clamp(0.0, 1.0))
}

/// Complement of [`los_probability`].
pub fn nlos_probability(distance_3d: f64, params: &LargeScaleParams) -> Result<f64> {
    Ok(1.0 - los_probability(distance_3d, params)?)
}

pub fn sample_link_state<R: Rng + ?Sized>(
    distance_3d: f64,
    params: &LargeScaleParams,
    rng: &mut R,
) -> Result<LinkState> {
    let p = los_probability(distance_3d, params)?;
    Ok(if rng.random::<f64>() < p {
        LinkState::Los
    } else {
        LinkState::Nlos
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLoss {
    pub db: f64,
    /// Set when the distance was below the reference distance and got clamped.
    pub clamped: bool,
}

/// Close-in path loss with a supplied shadow term (dB).
pub fn path_loss_db(
    distance_3d: f64,
    state: LinkState,
    params: &LargeScaleParams,
    shadow_db: f64,
) -> Result<PathLoss> {
    if distance_3d.is_nan() || !shadow_db.is_finite() {
        return Err(Error::invalid("path loss inputs must be finite"));
    }
    let d0 = params.ref_distance_m;
    let clamped = distance_3d < d0;
    let d = distance_3d.max(d0);
    let fspl = 20.0 * (4.0 * PI * d0 / params.wavelength()).log10();
    let db = fspl + 10.0 * params.exponent(state) * (d / d0).log10() + shadow_db;
    Ok(PathLoss { db, clamped })
}

/// Zero-mean Laplacian draw with standard deviation `std`.
fn laplacian<R: Rng + ?Sized>(rng: &mut R, std: f64) -> f64 {
    if std == 0.0 {
        return 0.0;
    }
    let b = std / std::f64::consts::SQRT_2;
    let u: f64 = rng.random::<f64>() - 0.5;
    -b * u.signum() * (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE).ln()
}

/// Cluster powers: i.i.d. unit exponentials normalized to sum to `C`.
pub fn sample_cluster_gains<R: Rng + ?Sized>(num_clusters: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..num_clusters)
        .map(|_| Exp1.sample(rng))
        .map(|x: f64| x.max(f64::MIN_POSITIVE))
        .collect();
    let total: f64 = raw.iter().sum();
    raw.iter()
        .map(|g| g * num_clusters as f64 / total)
        .collect()
}

/// Small-scale `N x M` channel with `E ||H||_F^2 = N M`.
///
/// Each ray carries an independent uniform phase so that distinct rays add
/// incoherently on average.
pub fn sample_small_scale<R: Rng + ?Sized>(
    cluster_cfg: &ClusterConfig,
    ue_geom: &ArrayGeometry,
    bs_geom: &ArrayGeometry,
    wavelength: f64,
    rng: &mut R,
) -> Result<CMatrix> {
    cluster_cfg.validate()?;
    ue_geom.validate()?;
    bs_geom.validate()?;
    if !(wavelength > 0.0) {
        return Err(Error::invalid("wavelength must be positive"));
    }
    let n = ue_geom.num_elements();
    let m = bs_geom.num_elements();
    let (c, l) = (cluster_cfg.num_clusters, cluster_cfg.rays_per_cluster);
    let gains = sample_cluster_gains(c, rng);
    let amplitude = ((n * m) as f64 / (c * l) as f64).sqrt();

    let mut h = CMatrix::zeros(n, m);
    let uniform_az = |rng: &mut R| -PI + 2.0 * PI * rng.random::<f64>();
    let uniform_el = |rng: &mut R| PI / 3.0 + PI / 3.0 * rng.random::<f64>();
    for gain in gains {
        let (aoa, eoa) = (uniform_az(rng), uniform_el(rng));
        let (aod, eod) = (uniform_az(rng), uniform_el(rng));
        for _ in 0..l {
            let az_ue = aoa + laplacian(rng, cluster_cfg.azimuth_spread_rad);
            let el_ue = eoa + laplacian(rng, cluster_cfg.elevation_spread_rad);
            let az_bs = aod + laplacian(rng, cluster_cfg.azimuth_spread_rad);
            let el_bs = eod + laplacian(rng, cluster_cfg.elevation_spread_rad);
            let phase = 2.0 * PI * rng.random::<f64>();
            let a_ue = array_response_unchecked(az_ue, el_ue, ue_geom, wavelength);
            let a_bs = array_response_unchecked(az_bs, el_bs, bs_geom, wavelength);
            let coef = Complex64::from_polar(amplitude * gain.sqrt(), phase);
            h.gerc(coef, &a_ue, &a_bs, Complex64::new(1.0, 0.0));
        }
    }
    Ok(h)
}

/// Frozen large-scale parameters of one UE-BS link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkLargeScale {
    pub ue_index: usize,
    pub bs_index: usize,
    pub distance_3d: f64,
    pub link_state: LinkState,
    pub shadow_db: f64,
    pub pathloss_db: f64,
    pub clamped: bool,
}

impl LinkLargeScale {
    /// Linear large-scale power gain `10^(-PL/10)`.
    pub fn power_gain(&self) -> f64 {
        10f64.powf(-self.pathloss_db / 10.0)
    }
}

/// Per-deployment large-scale state for all `K x J` links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LargeScaleCache {
    pub num_ues: usize,
    pub num_bss: usize,
    /// Row-major by UE: entry `k * J + j`.
    pub links: Vec<LinkLargeScale>,
}

impl LargeScaleCache {
    /// Draws link state and shadowing per link from the stream
    /// `(seed, LargeScale, k, j)`. `distances[k][j]` is the 3D distance.
    pub fn sample(distances: &[Vec<f64>], params: &LargeScaleParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let num_ues = distances.len();
        let num_bss = distances.first().map_or(0, Vec::len);
        let mut links = Vec::with_capacity(num_ues * num_bss);
        for (k, row) in distances.iter().enumerate() {
            if row.len() != num_bss {
                return Err(Error::invalid("ragged distance table"));
            }
            for (j, &d) in row.iter().enumerate() {
                let mut rng = rng::stream(seed, StreamTag::LargeScale, &[k as u64, j as u64]);
                // A co-located UE still gets a valid draw at the reference distance.
                let d_eval = d.max(params.ref_distance_m);
                let link_state = sample_link_state(d_eval, params, &mut rng)?;
                let z: f64 = StandardNormal.sample(&mut rng);
                let shadow_db = z * params.shadow_sigma_db(link_state);
                let pl = path_loss_db(d, link_state, params, shadow_db)?;
                links.push(LinkLargeScale {
                    ue_index: k,
                    bs_index: j,
                    distance_3d: d,
                    link_state,
                    shadow_db,
                    pathloss_db: pl.db,
                    clamped: pl.clamped,
                });
            }
        }
        Ok(Self {
            num_ues,
            num_bss,
            links,
        })
    }

    pub fn get(&self, ue: usize, bs: usize) -> Result<&LinkLargeScale> {
        if ue >= self.num_ues || bs >= self.num_bss {
            return Err(Error::internal(format!(
                "no large-scale entry for link (ue {ue}, bs {bs})"
            )));
        }
        Ok(&self.links[ue * self.num_bss + bs])
    }

    /// Whether any link had its distance clamped to the reference distance.
    pub fn any_clamped(&self) -> bool {
        self.links.iter().any(|l| l.clamped)
    }
}

/// Static description of the link-level model shared by all links.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub large_scale: LargeScaleParams,
    pub clusters: ClusterConfig,
    pub ue_array: ArrayGeometry,
    pub bs_array: ArrayGeometry,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// `N x M` channel including the large-scale amplitude.
    pub matrix: CMatrix,
    pub link_state: LinkState,
    pub pathloss_db: f64,
    pub ue_index: usize,
    pub bs_index: usize,
    pub slot_index: usize,
}

/// Channel of link `(ue, bs)` in slot `slot`: cached large-scale attenuation
/// times a fresh small-scale draw from `rng`.
pub fn sample_channel<R: Rng + ?Sized>(
    ue: usize,
    bs: usize,
    slot: usize,
    cache: &LargeScaleCache,
    model: &ChannelModel,
    rng: &mut R,
) -> Result<ChannelRealization> {
    let link = cache.get(ue, bs)?;
    let small = sample_small_scale(
        &model.clusters,
        &model.ue_array,
        &model.bs_array,
        model.large_scale.wavelength(),
        rng,
    )?;
    let amplitude = 10f64.powf(-link.pathloss_db / 20.0);
    let matrix = small * Complex64::new(amplitude, 0.0);
    if matrix
        .iter()
        .any(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(Error::internal("non-finite channel entry"));
    }
    Ok(ChannelRealization {
        matrix,
        link_state: link.link_state,
        pathloss_db: link.pathloss_db,
        ue_index: ue,
        bs_index: bs,
        slot_index: slot,
    })
}

/// [`sample_channel`] using the per-link stream `(seed, SmallScale, k, j, t)`.
pub fn sample_channel_seeded(
    ue: usize,
    bs: usize,
    slot: usize,
    cache: &LargeScaleCache,
    model: &ChannelModel,
    seed: u64,
) -> Result<ChannelRealization> {
    let mut rng = rng::stream(
        seed,
        StreamTag::SmallScale,
        &[ue as u64, bs as u64, slot as u64],
    );
    sample_channel(ue, bs, slot, cache, model, &mut rng)
}
