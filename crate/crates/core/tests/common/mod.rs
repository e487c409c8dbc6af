#![allow(dead_code)]

use mmwave_tfa::rate::{NoiseModel, SlotChannels, SlotContext};
use mmwave_tfa::CMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// `N x M` matrix of i.i.d. circular Gaussian entries with variance `scale^2`.
pub fn gaussian_channel<R: Rng>(rng: &mut R, n: usize, m: usize, scale: f64) -> CMatrix {
    CMatrix::from_fn(n, m, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im) * (scale / std::f64::consts::SQRT_2)
    })
}

/// Slot with Gaussian channels at path-loss-like amplitudes between -90 and
/// -120 dB, 1 W per BS and the default noise model.
pub fn random_slot<R: Rng>(rng: &mut R, k: usize, j: usize, n: usize, m: usize) -> SlotContext {
    let matrices = (0..k * j)
        .map(|_| {
            let db: f64 = rng.random_range(90.0..120.0);
            gaussian_channel(rng, n, m, 10f64.powf(-db / 20.0))
        })
        .collect();
    let channels = SlotChannels::new(k, j, matrices).unwrap();
    SlotContext::new(channels, vec![1.0; j], NoiseModel::default()).unwrap()
}
