use num_bigint::BigUint;
use qpc_core::cocycle::{le_sequence, QuadratureSpec};
use qpc_core::freq::{cf_convergents, classify_frequency, construct_omega_eta, Frequency};
use qpc_core::gevrey::MatrixFunction;
use qpc_core::scheme::*;

fn golden_at(q: u64) -> qpc_core::freq::Convergent {
    Frequency::golden().convergents().find(|c| c.q == BigUint::from(q)).unwrap()
}

#[test]
fn almost_mathieu_stays_above_ln_lambda() {
    // L = ln(lambda) on the spectrum and L_N >= L at every scale
    let a = MatrixFunction::almost_mathieu(3.0, 0.0, 1.5, 0.2).unwrap();
    let ls = le_sequence(&a, &Frequency::golden(), &[8, 64, 512], &QuadratureSpec::with_grid(1024).unwrap()).unwrap();
    for l in &ls {
        assert!(l.value >= 3f64.ln() - 1e-9, "N = {}: {}", l.n, l.value);
    }
    assert!(ls.windows(2).all(|w| w[1].value <= w[0].value + 1e-9));
}

#[test]
fn constructed_frequency_classifies_as_omega() {
    let f = construct_omega_eta(0.5, 1.0, 5, 0).unwrap();
    let convs = cf_convergents(&f, 6).unwrap();
    let r = classify_frequency(&convs, 0.5, 2.0).unwrap();
    assert!(r.omega.holds);
    assert!(r.omega.witness <= 1.0 + 1e-12, "{}", r.omega.witness);
}

#[test]
fn initial_scale_feeds_schedule_and_extrapolation() {
    let a = MatrixFunction::almost_mathieu(3.0, 0.0, 1.5, 0.2).unwrap();
    let f = Frequency::golden();
    let spec = QuadratureSpec::with_grid(256).unwrap();
    let b = select_parameters(1.1, 0.1, 0.001, &SigmaSearch::default()).unwrap().with_zeta(1.25).unwrap();
    let c = golden_at(34);
    let init = find_initial_scale(&a, &f, &c, &b, &spec).unwrap();
    let (lo, hi) = window_range(&b, &c.q).unwrap().unwrap();
    assert!(lo <= init.n0 && init.n0 <= hi);
    let s = build_schedule(&f, &b, c.n, 1, &BigUint::from(init.n0), SchedulePolicy::Record).unwrap();
    let r = extrapolation_error(&a, &f, &s, 1, &spec, 1 << 28).unwrap();
    assert_eq!(r.n0, init.n0);
    assert_eq!(r.steps.len(), 1);
    let back: ExtrapolationReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
    assert_eq!(back, r);
}
