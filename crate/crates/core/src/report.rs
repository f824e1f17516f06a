//! JSON and CSV rendering of estimator reports.
//!
//! Every real number is printed with 17 significant digits (C `%.17g`), which
//! round-trips IEEE doubles, so identical runs give identical bytes.

use serde_json::{Map, Number, Value};

use crate::estimators::EstimatorReport;

/// Fields excluded from byte-level determinism checks.
pub const TIMING_FIELDS: [&str; 2] = ["elapsed_ms", "duration_ratio"];

/// How `rng_calls` is counted.
pub const CALL_COUNTING: &str = "materialized_cells";

/// Formats `x` like C's `%.17g`.
pub fn g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    const P: i32 = 17;
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..P).contains(&exp) {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (P - 1 - exp) as usize;
        strip_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// A JSON number carrying exactly the `g17` digits; `null` when not finite.
pub fn json_real(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    Value::Number(g17(x).parse::<Number>().expect("g17 output is a JSON number"))
}

pub fn json_opt_real(x: Option<f64>) -> Value {
    x.map_or(Value::Null, json_real)
}

fn csv_opt(x: Option<f64>) -> String {
    x.filter(|v| v.is_finite()).map(g17).unwrap_or_default()
}

fn elapsed_ms(r: &EstimatorReport) -> f64 {
    r.elapsed.as_secs_f64() * 1e3
}

/// The report as an ordered JSON object.
pub fn report_json(r: &EstimatorReport) -> Value {
    let mut o = Map::new();
    o.insert("method".into(), r.method.as_str().into());
    o.insert(
        "seed".into(),
        r.seed.map_or(Value::Null, |s| Value::Number(s.into())),
    );
    o.insert("n_samples".into(), r.n_samples.into());
    let params: Map<String, Value> = r
        .params
        .iter()
        .map(|(k, v)| (k.clone(), Value::String(v.clone())))
        .collect();
    o.insert("params".into(), Value::Object(params));
    let mut est = Map::new();
    for (e, s) in r.estimates.iter().zip(&r.stats) {
        let mut m = Map::new();
        m.insert("mean".into(), json_real(e.mean));
        m.insert("stderr".into(), json_opt_real(e.stderr));
        m.insert("variance".into(), json_opt_real(e.variance));
        m.insert("batch_means_variance".into(), json_opt_real(e.batch_variance));
        m.insert(
            "lil_band".into(),
            json_opt_real(crate::estimators::lil_band(s).ok()),
        );
        est.insert(e.name.clone(), Value::Object(m));
    }
    o.insert("estimates".into(), Value::Object(est));
    o.insert("rng_calls".into(), r.rng_calls.into());
    o.insert("call_counting".into(), CALL_COUNTING.into());
    o.insert("calls_per_sample".into(), json_real(r.calls_per_sample()));
    o.insert("cache_hits".into(), r.cache_hits.into());
    o.insert("cache_misses".into(), r.cache_misses.into());
    o.insert("cache_hit_rate".into(), json_opt_real(r.cache_hit_rate()));
    o.insert("truncated_count".into(), r.truncated_count.into());
    o.insert("elapsed_ms".into(), json_real(elapsed_ms(r)));
    Value::Object(o)
}

pub const CSV_HEADER: &str = "method,seed,n_samples,payoff,mean,stderr,variance,batch_means_variance,lil_band,rng_calls,calls_per_sample,cache_hits,cache_misses,cache_hit_rate,truncated_count,elapsed_ms";

/// One CSV row per payoff, with [`CSV_HEADER`] columns.
pub fn report_csv_rows(r: &EstimatorReport) -> Vec<String> {
    r.estimates
        .iter()
        .zip(&r.stats)
        .map(|(e, s)| {
            [
                r.method.as_str().to_string(),
                r.seed.map(|s| s.to_string()).unwrap_or_default(),
                r.n_samples.to_string(),
                e.name.clone(),
                g17(e.mean),
                csv_opt(e.stderr),
                csv_opt(e.variance),
                csv_opt(e.batch_variance),
                csv_opt(crate::estimators::lil_band(s).ok()),
                r.rng_calls.to_string(),
                g17(r.calls_per_sample()),
                r.cache_hits.to_string(),
                r.cache_misses.to_string(),
                csv_opt(r.cache_hit_rate()),
                r.truncated_count.to_string(),
                g17(elapsed_ms(r)),
            ]
            .join(",")
        })
        .collect()
}

pub fn report_csv(r: &EstimatorReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in report_csv_rows(r) {
        out.push_str(&row);
        out.push('\n');
    }
    out
}

/// Serializes with stable key order and no trailing whitespace.
pub fn to_json_string(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON values always serialize")
}
