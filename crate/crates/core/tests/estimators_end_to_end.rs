use ergoshift::estimators::{mc_estimate, shift_estimate, FunctionModel};
use ergoshift::markov::{gamblers_ruin, ruin_expected_duration, ChainConsumption, RuinParams, RuinPayoff};
use ergoshift::tape::Tape;
use ergoshift::transport::{transport_model, TransportParams};

fn ruin_model(n: u64, start: u64, p: f64) -> ChainConsumption {
    let (chain, spec) = gamblers_ruin(RuinParams::new(n, start, p), RuinPayoff::Duration).unwrap();
    ChainConsumption::new(chain, spec)
}

#[test]
fn asymmetric_ruin_matches_closed_form() {
    let model = ruin_model(6, 2, 0.4);
    let exact = ruin_expected_duration(6, 2, 0.4);
    for report in [
        mc_estimate(&model, 200_000, &mut Tape::new(7)).unwrap(),
        shift_estimate(&model, 200_000, &mut Tape::new(8)).unwrap(),
    ] {
        let z = (report.mean("duration").unwrap() - exact) / report.stderr("duration").unwrap();
        assert!(z.abs() < 4.0, "{} z = {z}", report.method);
    }
}

#[test]
fn shift_reads_far_fewer_cells_than_mc() {
    let model = transport_model(TransportParams::new(0.94).unwrap());
    let mc = mc_estimate(&model, 20_000, &mut Tape::new(1)).unwrap();
    let shift = shift_estimate(&model, 20_000, &mut Tape::new(2)).unwrap();
    assert!(mc.calls_per_sample() > 4.0 * shift.calls_per_sample());
    assert!(shift.cache_hit_rate().unwrap() > 0.5);
}

#[test]
fn identical_tapes_give_identical_reports() {
    let model = FunctionModel::new("xy", 2, |x: &[f64]| x[0] * x[1]);
    let a = shift_estimate(&model, 10_000, &mut Tape::new(3)).unwrap();
    let b = shift_estimate(&model, 10_000, &mut Tape::new(3).with_memo(false)).unwrap();
    assert_eq!(a.mean("xy").unwrap().to_bits(), b.mean("xy").unwrap().to_bits());
    assert_eq!(a.rng_calls, b.rng_calls);
    assert!((a.mean("xy").unwrap() - 0.25).abs() < 0.01);
}
