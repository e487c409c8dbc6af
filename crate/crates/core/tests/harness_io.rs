use std::fs;
use std::path::Path;
use std::process::Command;

use mmwave_tfa::association::ActivationVector;
use mmwave_tfa::ga::{GaConfig, SlotProblem};
use mmwave_tfa::harness::{
    emit_results, emit_sweep, power_sweep, render_config, render_slot_utilities,
    render_sweep_summary, run_experiment, sample_deployment, slot_channels, sweep_point_dir,
    ExperimentResult, Scenario, Scheme, UePlacement, SWEEP_SUMMARY_HEADER,
};
use mmwave_tfa::rate::{slot_throughputs, SlotContext};

fn quick(num_slots: usize) -> Scenario {
    Scenario {
        num_slots,
        ue_placement: UePlacement::congested(),
        ga: GaConfig {
            population_size: 40,
            max_generations: 60,
            stall_generations: 15,
            ..GaConfig::default()
        },
        ..Scenario::default()
    }
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap()
}

fn assert_rerenders(dir: &Path) {
    let r = ExperimentResult::from_json(&read(&dir.join("result.json"))).unwrap();
    assert_eq!(
        read(&dir.join("config.resolved")),
        render_config(&r.metadata.scenario).unwrap()
    );
    assert_eq!(
        read(&dir.join("sweep_summary.csv")),
        render_sweep_summary(std::slice::from_ref(&r))
    );
    let bw = r.metadata.scenario.noise.bandwidth_hz;
    for s in &r.schemes {
        assert_eq!(
            read(&dir.join(format!("association_coeffs_{}.csv", s.scheme))),
            s.association.to_csv()
        );
        assert_eq!(
            read(&dir.join(format!("slot_utilities_{}.csv", s.scheme))),
            render_slot_utilities(s, bw)
        );
    }
    assert_eq!(read(&dir.join("result.json")), r.to_json().unwrap());
}

#[test]
fn emitted_files_are_deterministic_and_rerender_from_json() {
    let s = quick(8);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let paths = emit_results(&run_experiment(&s, &Scheme::ALL).unwrap(), a.path()).unwrap();
    emit_results(&run_experiment(&s, &Scheme::ALL).unwrap(), b.path()).unwrap();
    assert_eq!(paths.len(), 11);
    for p in &paths {
        let name = p.file_name().unwrap();
        assert_eq!(
            fs::read(p).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name:?}"
        );
    }
    assert_rerenders(a.path());
    let reloaded = ExperimentResult::from_json(&read(&a.path().join("result.json"))).unwrap();
    assert_eq!(reloaded, run_experiment(&s, &Scheme::ALL).unwrap());
}

#[test]
fn empty_scheme_set_gives_header_only_summary() {
    let r = run_experiment(&quick(1), &[]).unwrap();
    assert_eq!(
        render_sweep_summary(&[r]),
        format!("{SWEEP_SUMMARY_HEADER}\n")
    );
}

#[test]
fn sweep_layout_and_monotone_tfa() {
    let s = quick(20);
    let grid = [0.0, 10.0, 20.0];
    let results = power_sweep(&s, &[Scheme::Tfa], &grid).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_sweep(&s, &results, dir.path()).unwrap();
    assert_eq!(
        read(&dir.path().join("sweep_summary.csv")),
        render_sweep_summary(&results)
    );
    for p in grid {
        assert_rerenders(&dir.path().join(sweep_point_dir(p)));
    }
    for w in results.windows(2) {
        let (a, b) = (&w[0].schemes[0], &w[1].schemes[0]);
        assert!(b.mean_sum_rate_bpshz >= a.mean_sum_rate_bpshz - (a.ci95_bpshz + b.ci95_bpshz));
    }
    let checks: Vec<_> = results
        .iter()
        .map(|r| r.metadata.channel_checksums.clone())
        .collect();
    assert!(checks.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn tfa_balances_load_and_aggregates_reproduce() {
    let s = Scenario {
        num_slots: 100,
        ..quick(100)
    };
    let r = run_experiment(&s, &[Scheme::Tfa, Scheme::LbFi]).unwrap();
    let tfa = r.scheme(Scheme::Tfa).unwrap();
    for col in &tfa.activations {
        let loads = ActivationVector::new(col.clone(), 0).loads(4).unwrap();
        assert_eq!(loads, vec![2, 2, 2, 2]);
    }
    for s in &r.schemes {
        let t = s.slot_utilities.len() as f64;
        let mean = s.slot_utilities.iter().sum::<f64>() / t;
        assert!((mean - s.mean_sum_rate_bpshz).abs() <= 1e-12 * mean);
        for (u, rates) in s.slot_utilities.iter().zip(&s.slot_user_rates) {
            assert!((u - rates.iter().sum::<f64>()).abs() <= 1e-12 * u.max(1.0));
        }
        for k in 0..8 {
            let m = s.slot_user_rates.iter().map(|r| r[k]).sum::<f64>() / t;
            assert!((m - s.per_user_mean_rate_bpshz[k]).abs() <= 1e-12 * m.max(1.0));
            assert_eq!(s.association.row_sum(k), 1.0);
        }
    }
}

#[test]
fn tfa_dominates_the_full_interference_balancer_slot_by_slot() {
    let s = quick(30);
    let r = run_experiment(&s, &[Scheme::Tfa, Scheme::LbFi]).unwrap();
    let deployment = sample_deployment(&s).unwrap();
    let model = s.channel_model().unwrap();
    let lb = r.scheme(Scheme::LbFi).unwrap();
    let tfa = r.scheme(Scheme::Tfa).unwrap();
    for t in 0..s.num_slots {
        let channels = slot_channels(&deployment, &model, s.master_seed, t).unwrap();
        let ctx = SlotContext::new(channels, s.bs_power_w(), s.noise).unwrap();
        let problem = SlotProblem::new(&ctx, &s.stream_demands(), &s.capacities()).unwrap();
        let (best, _) = problem.brute_force(s.enumeration_cap, t).unwrap();
        let lb_act = ActivationVector::new(lb.activations[t].clone(), t);
        let lb_u = slot_throughputs(&lb_act, &ctx, &lb.streams)
            .unwrap()
            .utility;
        assert!(best >= lb_u - 1e-9);
        assert!(tfa.slot_utilities[t] <= best + 1e-9);
        assert!(tfa.slot_utilities[t] >= 0.99 * best);
    }
}

#[test]
fn cli_runs_and_rejects_bad_input() {
    let exe = env!("CARGO_BIN_EXE_tfa-sim");
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenario.toml");
    fs::write(
        &cfg,
        "num_slots = 3\nmaster_seed = 5\n[ga]\npopulation_size = 20\n",
    )
    .unwrap();
    let out = dir.path().join("run");
    let status = Command::new(exe)
        .args([
            "--config",
            cfg.to_str().unwrap(),
            "run",
            "--schemes",
            "tfa,maxsinr-drop",
            "--out",
        ])
        .arg(&out)
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    let r = ExperimentResult::from_json(&read(&out.join("result.json"))).unwrap();
    assert_eq!(r.metadata.scenario.num_slots, 3);
    assert_eq!(r.metadata.scenario.ga.population_size, 20);
    assert_eq!(r.schemes.len(), 2);

    fs::write(&cfg, "no_such_key = 1\n").unwrap();
    let bad = Command::new(exe)
        .args(["--config", cfg.to_str().unwrap(), "run"])
        .output()
        .unwrap();
    assert!(!bad.status.success());
    let bad = Command::new(exe)
        .args(["run", "--schemes", "nope"])
        .output()
        .unwrap();
    assert!(!bad.status.success());
    let bad = Command::new(exe)
        .args(["run", "--streams-per-bs", "3", "--schemes", "tfa", "--out"])
        .arg(dir.path().join("x"))
        .output()
        .unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("infeasible capacity"));
}
