use std::path::{Path, PathBuf};

use mgale_core::montecarlo::{SimConfig, SimVerdict};
use mgale_core::pipeline::{analyze, parse_assignments, validate, AnalysisRequest};

fn program(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../programs").join(name)
}

fn check(name: &str, params: Option<&str>, trials: u64) {
    let a = analyze(&AnalysisRequest::from_file(&program(name)).unwrap()).unwrap();
    let params = match params {
        Some(p) => parse_assignments(p).unwrap(),
        None => a.sim_params().unwrap().unwrap_or_default(),
    };
    let cfg = SimConfig { trials, seed: 42, ..Default::default() };
    let (r, v) = validate(&a, params, cfg).unwrap();
    assert_eq!(r.censored, 0);
    assert_eq!(v.verdict, SimVerdict::Pass, "{name}\n{v}");
}

#[test]
fn shipped_programs_validate() {
    for name in ["geom.spp", "gamble.spp", "gamble2.spp", "momentum.spp", "miniabra.spp"] {
        let t = std::time::Instant::now();
        check(name, None, 20_000);
        eprintln!("{name}: {:?}", t.elapsed());
    }
}

#[test]
fn fullabra_at_a_small_alphabet() {
    // E[tau] = 5 + 5^4 + 5^11 is far too long to simulate; the pipeline only
    // needs L in range, so check a shortened run reaches the step limit.
    let a = analyze(&AnalysisRequest::from_file(&program("fullabra.spp")).unwrap()).unwrap();
    let cfg = SimConfig { trials: 20, max_steps: 1000, ..Default::default() };
    let (r, v) = validate(&a, parse_assignments("L = 5").unwrap(), cfg).unwrap();
    assert!(r.censored > 0);
    assert!(matches!(v.verdict, SimVerdict::Aborted(_)));
}

#[test]
fn gambler_one_step_is_exact() {
    let a = analyze(&AnalysisRequest::from_file(&program("gamble.spp")).unwrap()).unwrap();
    let cfg = SimConfig { trials: 2000, ..Default::default() };
    let (r, v) = validate(&a, parse_assignments("a = 1, b = 2").unwrap(), cfg).unwrap();
    assert_eq!(r.tau.mean(), 1.0);
    assert_eq!(r.tau.stderr(), 0.0);
    assert_eq!(v.verdict, SimVerdict::Pass, "{v}");
}
