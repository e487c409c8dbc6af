//! Acceptance suite: runs every criterion, prints one PASS/FAIL line each and
//! fails if any criterion fails.

mod common;

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use mmwave_tfa::association::{argmax, max_sinr_metric, ActivationVector};
use mmwave_tfa::beamforming::svd_partition;
use mmwave_tfa::channel::{
    los_probability, path_loss_db, sample_small_scale, LargeScaleParams, LinkState,
};
use mmwave_tfa::harness::{
    oracle_check, power_sweep, run_experiment, sample_deployment, Scenario, Scheme, UePlacement,
};
use mmwave_tfa::rate::{log_det_rate, slot_throughputs};
use mmwave_tfa::rng::{stream, StreamTag};
use mmwave_tfa::CMatrix;
use num_complex::Complex64;
use rand::Rng;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn congested() -> Scenario {
    Scenario {
        ue_placement: UePlacement::congested(),
        ..Scenario::default()
    }
}

fn ga_optimality() -> Outcome {
    let scenario = Scenario::default();
    let started = Instant::now();
    let records = oracle_check(&scenario, 100).expect("oracle check");
    let per_slot = started.elapsed().as_secs_f64() / records.len() as f64;
    let exact = records.iter().filter(|r| r.abs_gap().abs() <= 1e-9).count();
    let within = records.iter().filter(|r| r.rel_gap() <= 0.01).count();
    let worst = records.iter().map(|r| r.rel_gap()).fold(0.0, f64::max);
    outcome(
        exact >= 95 && within == 100 && per_slot < 60.0,
        format!("exact {exact}/100, within 1% {within}/100, worst gap {worst:.2e}, {per_slot:.3} s/slot"),
    )
}

fn sum_rate_ordering() -> Outcome {
    let base = congested();
    let scenario = Scenario {
        num_slots: base.sweep_num_slots,
        ..base
    };
    let grid = scenario.sweep_powers_dbm.clone();
    let results = power_sweep(&scenario, &Scheme::ALL, &grid).expect("power sweep");
    let mut tfa_first = true;
    let mut lb_last = true;
    let mut lines = Vec::new();
    for r in &results {
        let m = |s: Scheme| r.scheme(s).unwrap();
        let (tfa, drop, share, lb) = (
            m(Scheme::Tfa),
            m(Scheme::MaxSinrDrop),
            m(Scheme::MaxSinrShareDrop),
            m(Scheme::LbFi),
        );
        let top = tfa.mean_sum_rate_bpshz;
        tfa_first &= [drop, share, lb]
            .iter()
            .all(|s| top > s.mean_sum_rate_bpshz);
        lb_last &= lb.mean_sum_rate_bpshz <= drop.mean_sum_rate_bpshz
            && lb.mean_sum_rate_bpshz <= share.mean_sum_rate_bpshz;
        lines.push(format!(
            "{} dBm: tfa {:.2}±{:.2}, drop {:.2}±{:.2}, share {:.2}±{:.2}, lb-fi {:.2}±{:.2}",
            r.tx_power_dbm(),
            tfa.mean_sum_rate_bpshz,
            tfa.ci95_bpshz,
            drop.mean_sum_rate_bpshz,
            drop.ci95_bpshz,
            share.mean_sum_rate_bpshz,
            share.ci95_bpshz,
            lb.mean_sum_rate_bpshz,
            lb.ci95_bpshz
        ));
    }
    outcome(
        grid.len() >= 6 && scenario.num_slots >= 200 && tfa_first && lb_last,
        format!(
            "TFA above all baselines at every point: {tfa_first}; LB-FI at or below both max-SINR variants: {lb_last}\n    {}",
            lines.join("\n    ")
        ),
    )
}

fn load_balancing() -> Outcome {
    let scenario = congested();
    let deployment = sample_deployment(&scenario).expect("deployment");
    let noise = scenario.noise.power_w();
    let on_bs1 = (0..scenario.num_ues)
        .filter(|&k| {
            let sinr =
                max_sinr_metric(k, &deployment.large_scale, &scenario.bs_power_w(), noise).unwrap();
            argmax(&sinr) == 0
        })
        .count();
    let r = run_experiment(&scenario, &[Scheme::Tfa]).expect("experiment");
    let tfa = r.scheme(Scheme::Tfa).unwrap();
    let balanced = tfa
        .activations
        .iter()
        .filter(|col| ActivationVector::new(col.to_vec(), 0).loads(4).unwrap() == vec![2, 2, 2, 2])
        .count();
    let rows_exact = (0..scenario.num_ues).all(|k| tfa.association.row_sum(k) == 1.0);
    let float_dev = (0..scenario.num_ues)
        .map(|k| (tfa.association.row(k).iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    let capacity_users = scenario.streams_per_bs / scenario.streams_per_ue;
    outcome(
        balanced == scenario.num_slots && on_bs1 >= 3 && on_bs1 > capacity_users && rows_exact,
        format!(
            "TFA balanced in {balanced}/{} slots; max-SINR puts {on_bs1} UEs on BS 1 (capacity {capacity_users}); rows sum to 1: {rows_exact} (largest rounding deviation of the float coefficients {float_dev:.1e})",
            scenario.num_slots
        ),
    )
}

fn channel_checks() -> Outcome {
    let p = LargeScaleParams::default();
    let los71 = los_probability(71.0, &p).unwrap();
    let near = (1..=2700).all(|i| los_probability(i as f64 * 0.01, &p).unwrap() == 1.0);
    let pl = path_loss_db(100.0, LinkState::Los, &p, 0.0).unwrap().db;
    let s = Scenario::default();
    let model = s.channel_model().unwrap();
    let lambda = p.wavelength();
    let draws = 10_000;
    let mean = (0..draws)
        .map(|i| {
            let mut rng = stream(2024, StreamTag::Auxiliary, &[i]);
            sample_small_scale(
                &model.clusters,
                &model.ue_array,
                &model.bs_array,
                lambda,
                &mut rng,
            )
            .unwrap()
            .norm_squared()
        })
        .sum::<f64>()
        / draws as f64;
    let rel = (mean / 256.0 - 1.0).abs();
    outcome(
        (los71 - 0.369986).abs() <= 1e-5 && near && (pl - 109.71).abs() <= 0.02 && rel <= 0.05,
        format!("p_LoS(71) = {los71:.7}, p_LoS = 1 up to 27 m: {near}, PL(100 m) = {pl:.4} dB, E||H||^2 = {mean:.2} (rel. err {rel:.4})"),
    )
}

fn rate_oracle() -> Outcome {
    let mut rng = stream(77, StreamTag::Auxiliary, &[]);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let ctx = common::random_slot(&mut rng, 1, 1, 4, 64);
        let n = rng.random_range(1..=4);
        let sigma = svd_partition(ctx.channels.get(0, 0), n).unwrap().singular;
        let snr = ctx.bs_power_w[0] / n as f64 / ctx.noise_power_w();
        let closed: f64 = sigma.iter().map(|s| (1.0 + snr * s * s).log2()).sum();
        let r = slot_throughputs(&ActivationVector::full(&[0], 0), &ctx, &[n])
            .unwrap()
            .utility;
        worst = worst.max((r - closed).abs());
    }
    let mut monotone = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=4);
        let g = common::gaussian_channel(&mut rng, n, n + 1, 1.0);
        let signal = &g * g.adjoint();
        let noise = CMatrix::identity(n, n) * Complex64::new(rng.random_range(0.01..1.0), 0.0);
        let (hs, cols, es) = (
            rng.random_range(0.0..2.0),
            rng.random_range(1..=n),
            rng.random_range(0.0..2.0),
        );
        let h = common::gaussian_channel(&mut rng, n, n, hs);
        let y = &h * h.adjoint() + noise;
        let e = common::gaussian_channel(&mut rng, n, cols, es);
        let extra = &e * e.adjoint();
        if log_det_rate(&signal, &(&y + extra)).unwrap()
            <= log_det_rate(&signal, &y).unwrap() + 1e-9
        {
            monotone += 1;
        }
    }
    outcome(
        worst <= 1e-9 && monotone == 1000,
        format!("closed-form max error {worst:.2e} over 1000 channels; monotone in {monotone}/1000 trials"),
    )
}

fn files_identical(a: &Path, b: &Path) -> Result<usize, String> {
    let mut count = 0;
    let mut names: Vec<_> = fs::read_dir(a)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().path())
        .collect();
    names.sort();
    for p in names {
        let q = b.join(p.file_name().unwrap());
        if p.is_dir() {
            count += files_identical(&p, &q)?;
        } else {
            if fs::read(&p).map_err(|e| e.to_string())?
                != fs::read(&q).map_err(|e| format!("{}: {e}", q.display()))?
            {
                return Err(format!("{} differs", p.display()));
            }
            count += 1;
        }
    }
    Ok(count)
}

fn determinism() -> Outcome {
    let exe = env!("CARGO_BIN_EXE_tfa-sim");
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenario.toml");
    fs::write(
        &cfg,
        "master_seed = 31\nsweep_num_slots = 20\nsweep_powers_dbm = [10.0, 25.0, 40.0]\n[ue_placement]\nkind = \"congested\"\nbs = 0\ncount = 5\nmin_radius_m = 20.0\nmax_radius_m = 60.0\n",
    )
    .unwrap();
    for name in ["a", "b"] {
        let out = Command::new(exe)
            .args(["--config", cfg.to_str().unwrap(), "sweep", "--out"])
            .arg(dir.path().join(name))
            .output()
            .unwrap();
        if !out.status.success() {
            return outcome(
                false,
                format!("sweep failed: {}", String::from_utf8_lossy(&out.stderr)),
            );
        }
    }
    match files_identical(&dir.path().join("a"), &dir.path().join("b")) {
        Ok(n) => outcome(
            n > 0,
            format!("{n} files byte-identical across two sweep runs"),
        ),
        Err(e) => outcome(false, e),
    }
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 6] = [
        ("1 GA optimality at desk scale", ga_optimality),
        (
            "2 sum-rate ordering over the power sweep",
            sum_rate_ordering,
        ),
        ("3 load balancing in the congested scenario", load_balancing),
        ("4 channel model checks", channel_checks),
        ("5 rate-formula oracle", rate_oracle),
        ("6 determinism of sweep outputs", determinism),
    ];
    let mut failed = Vec::new();
    for (name, run) in criteria {
        let o = run();
        println!(
            "{} criterion {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !o.pass {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
