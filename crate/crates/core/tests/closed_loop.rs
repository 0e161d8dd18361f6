use formctl_core::analysis::detect_convergence;
use formctl_core::cbt::Block;
use formctl_core::config::{preset_head_on, preset_paper_scenario};
use formctl_core::sim::{integrate_step, run_scenario, Scheme, Simulation};
use formctl_core::smc::switching;
use formctl_core::Error;
use nalgebra::DVector;

#[test]
fn recorded_rows_follow_step_count_and_stride() {
    let mut cfg = preset_paper_scenario();
    cfg.integrator.step = 0.01;
    cfg.integrator.duration = 1.0;
    let r = run_scenario(&cfg).unwrap();
    assert_eq!(r.samples.len(), 101);
    assert_eq!(r.blocks.len(), 101);
    assert!((r.final_sample().t - 1.0).abs() < 1e-12);

    cfg.integrator.record_stride = 7;
    let r = run_scenario(&cfg).unwrap();
    // 0, 7, ..., 98 and the final step 100
    assert_eq!(r.samples.len(), 16);
    assert_eq!(r.blocks.len(), 101);
}

fn final_positions(h: f64) -> DVector<f64> {
    let mut cfg = preset_paper_scenario();
    cfg.integrator.step = h;
    cfg.integrator.duration = 0.5;
    let r = run_scenario(&cfg).unwrap();
    DVector::from_iterator(18, r.final_sample().states.iter().flat_map(|s| [s.position.x, s.position.y]))
}

#[test]
fn held_torques_make_the_loop_first_order() {
    let x = [1e-3, 5e-4, 2.5e-4, 1.25e-4].map(final_positions);
    let d: Vec<f64> = x.windows(2).map(|w| (&w[0] - &w[1]).amax()).collect();
    for w in d.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.6..2.5).contains(&ratio), "successive differences {d:?}");
    }
}

#[test]
fn surface_rate_equals_reaching_law_with_avoidance_active() {
    let mut cfg = preset_head_on();
    cfg.collision.enabled = true;
    cfg.integrator.duration = 1.5;
    let sim = Simulation::new(&cfg).unwrap();
    let states = sim.run(&cfg.initial_states().unwrap()).unwrap().final_sample().states.clone();
    let t0 = 1.5;
    let ctl = &sim.controller;
    let out0 = ctl.evaluate(t0, &states).unwrap();
    assert!(out0.potential.as_ref().unwrap().stacked.amax() > 0.1, "robots should be interacting");
    let s0 = out0.sliding.stacked();
    let expected = DVector::from_iterator(
        s0.len(),
        Block::ALL.iter().flat_map(|&b| {
            let k = cfg.gains.effective_reach(b);
            out0.sliding
                .block(b)
                .iter()
                .map(move |&v| -k * switching(v, cfg.gains.boundary_layer))
                .collect::<Vec<_>>()
        }),
    );
    let mismatch = |h: f64| {
        let next = integrate_step(&states, &ctl.params, &out0.torques, h, Scheme::Rk4);
        let s1 = ctl.evaluate(t0 + h, &next).unwrap().sliding.stacked();
        ((s1 - &s0) / h - &expected).amax()
    };
    let (a, b) = (mismatch(1e-5), mismatch(5e-6));
    assert!(a < 1e-2 * expected.amax().max(1.0), "{a}");
    assert!((1.7..2.3).contains(&(a / b)), "{a} {b}");
}

#[test]
fn runs_are_deterministic() {
    let mut cfg = preset_paper_scenario();
    cfg.integrator.duration = 2.0;
    cfg.seed = 99;
    assert_eq!(run_scenario(&cfg).unwrap(), run_scenario(&cfg).unwrap());
}

#[test]
fn wrong_number_of_initial_states_is_rejected() {
    let cfg = preset_paper_scenario();
    let sim = Simulation::new(&cfg).unwrap();
    let states = cfg.initial_states().unwrap();
    assert!(matches!(
        sim.run(&states[..8]),
        Err(Error::Dimension { expected: 9, actual: 8 })
    ));
}

#[test]
fn collision_mode_refuses_weak_gains_unless_overridden() {
    let mut cfg = preset_head_on();
    cfg.collision.enabled = true;
    cfg.gains.reach.inter = 1.0;
    let err = Simulation::new(&cfg).unwrap_err();
    assert!(err.to_string().contains("gains.reach.inter"), "{err}");
    assert_eq!(err.exit_code(), 2);
    cfg.collision.override_gain_check = true;
    assert!(Simulation::new(&cfg).is_ok());
}

#[test]
fn collision_run_reports_rate_bound_status() {
    let mut cfg = preset_head_on();
    cfg.collision.enabled = true;
    let r = run_scenario(&cfg).unwrap();
    let rep = detect_convergence(&r, &cfg.convergence);
    assert_eq!(rep.flags.rate_bound_respected, Some(true), "{:?} vs {:?}", rep.max_potential_rate, rep.potential_rate_bound);
    assert!(rep.max_potential_rate.inter > 0.0);
    assert!(rep.collision_bound_linear.inter > rep.collision_bound_sqrt.inter);
}
