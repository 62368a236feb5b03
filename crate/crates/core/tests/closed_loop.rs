use crossreg::control_loop::{run_closed_loop, Controller, LoopConfig, WeightVector};
use crossreg::fuzzy::PidGains;
use crossreg::optim::{Algorithm, Execution, PsoConfig};
use crossreg::plant::{derive_default_params, DisturbanceEvent};
use crossreg::scenario::{builtin_scenarios, compare_methods, time_response, Method, WeightSource, BASELINE_LABEL};
use crossreg::tuning::reduced_case;

fn final_errors(k: [f64; 3]) -> [f64; 3] {
    let p = derive_default_params();
    let tr = run_closed_loop(&p, &WeightVector::new(k).unwrap(), &Controller::default_fuzzy(), &[], &LoopConfig::default(), 28.0)
        .unwrap();
    let refs = p.references();
    let w = tr.window(18e-3, 20e-3);
    let mut e = [0.0; 3];
    for r in 0..3 {
        let mean = w.iter().map(|s| s.v_out[r]).sum::<f64>() / w.len() as f64;
        e[r] = (mean - refs[r]).abs() / refs[r].abs();
    }
    e
}

#[test]
fn uniform_weights_settle_every_rail() {
    let p = derive_default_params();
    let tr = run_closed_loop(&p, &WeightVector::uniform(), &Controller::default_fuzzy(), &[], &LoopConfig::default(), 28.0)
        .unwrap();
    for rail in 1..=3 {
        let m = time_response(&tr, rail, p.references()[rail - 1], 0.0, 2e-3).unwrap();
        assert!(m.settled && m.settling_time < 6e-3, "rail {rail}: {m:?}");
        assert!(m.ss_error < 1.5, "rail {rail}: {m:?}");
    }
    assert!(final_errors([1.0 / 3.0; 3]).iter().all(|e| *e < 0.02));
}

#[test]
fn single_rail_weight_serves_that_rail() {
    for r in 0..3 {
        let mut k = [0.0; 3];
        k[r] = 1.0;
        let e = final_errors(k);
        assert!((0..3).all(|j| e[r] <= e[j]), "K = {k:?}: {e:?}");
    }
}

#[test]
fn runs_are_bit_identical_and_duty_stays_clamped() {
    let p = derive_default_params();
    let cfg = LoopConfig { duty_max: 0.4, ..LoopConfig::default() };
    let ev = [DisturbanceEvent::load_scale(5e-3, 2, 1.5), DisturbanceEvent::input_step(8e-3, 18.0)];
    for c in [Controller::default_fuzzy(), Controller::Pid(PidGains::default())] {
        let a = run_closed_loop(&p, &WeightVector::uniform(), &c, &ev, &cfg, 28.0).unwrap();
        let b = run_closed_loop(&p, &WeightVector::uniform(), &c, &ev, &cfg, 28.0).unwrap();
        assert_eq!(a, b);
        assert!(a.samples.iter().all(|s| (cfg.duty_min..=cfg.duty_max).contains(&s.duty)));
        assert!(a.samples.windows(2).all(|w| w[1].t > w[0].t));
    }
}

#[test]
fn pid_baseline_settles() {
    let p = derive_default_params();
    let tr = run_closed_loop(&p, &WeightVector::uniform(), &Controller::Pid(PidGains::default()), &[], &LoopConfig::default(), 28.0)
        .unwrap();
    for rail in 1..=3 {
        let m = time_response(&tr, rail, p.references()[rail - 1], 0.0, 2e-3).unwrap();
        assert!(m.settled && m.ss_error < 2.0, "rail {rail}: {m:?}");
    }
}

#[test]
fn disturbance_produces_transient_then_recovers() {
    let p = derive_default_params();
    let sc = &builtin_scenarios()[0];
    let tr = sc.simulate(&p, &WeightVector::uniform(), &Controller::default_fuzzy(), &LoopConfig::default(), None).unwrap();
    let before = tr.window(9.9e-3, 10e-3)[0].v_out[0];
    let peak = tr.window(10e-3, 12e-3).iter().map(|s| s.v_out[0]).fold(0.0, f64::max);
    assert!(peak > before * 1.02, "{before} -> {peak}");
    let reg = sc.regulation(&tr, &p.references()).unwrap();
    assert!(reg[1].rails[0] < 2.0, "{reg:?}");
}

fn methods() -> Vec<Method> {
    let pso = Algorithm::Pso(PsoConfig { pop_size: 6, max_iter: 3, seed: 2, ..PsoConfig::default() });
    vec![
        Method { label: "pso".into(), weights: WeightSource::Tuned(pso), controller: Controller::default_fuzzy() },
        Method { label: "rail1".into(), weights: WeightSource::Fixed(WeightVector::new([1.0, 0.0, 0.0]).unwrap()), controller: Controller::default_fuzzy() },
    ]
}

#[test]
fn comparison_rows_and_baseline() {
    let (p, sc, cfg) = reduced_case();
    let report = compare_methods(&methods(), std::slice::from_ref(&sc), &p, &cfg, Execution::Parallel).unwrap();
    let labels: Vec<&str> = report.results.iter().map(|r| r.method.as_str()).collect();
    assert_eq!(labels, [BASELINE_LABEL, "pso", "rail1"]);
    assert_eq!(report.regulation_rows().len(), 3 * 2 * 3);
    for r in &report.results {
        for s in &r.snapshots {
            assert!(s.rails.iter().all(|v| *v >= 0.0));
            assert!((s.total - s.rails.iter().sum::<f64>()).abs() < 1e-9);
        }
    }
    let base = report.get(BASELINE_LABEL, "fast_load5").unwrap();
    let tuned = report.get("pso", "fast_load5").unwrap();
    assert!(tuned.final_total() <= base.final_total());
    assert!(tuned.convergence_iter.is_some() && base.convergence_iter.is_none());
    assert!((tuned.fitness.unwrap() * 100.0 - tuned.final_total()).abs() < 1e-9);

    let mut reversed = methods();
    reversed.reverse();
    let again = compare_methods(&reversed, std::slice::from_ref(&sc), &p, &cfg, Execution::Serial).unwrap();
    assert_eq!(report, again);

    let mut csv = Vec::new();
    report.write_regulation_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().next(), Some("method,scenario,snapshot_ms,rail,regulation_pct"));
    assert_eq!(text.lines().count(), 19);
    let mut csv = Vec::new();
    report.write_convergence_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.lines().any(|l| l.starts_with("constant,fast_load5,,")));
}
