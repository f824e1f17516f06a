//! Subcommand implementations. Each returns the exact bytes to print on
//! stdout together with an exit status, so tests can drive them in-process.

use std::fmt::Write as _;

use ergoshift::estimators::{permuted, run_on_tape, CoordinatePermutation, EstimatorReport, FunctionModel, Method};
use ergoshift::lowdisc::{koksma_hlawka_bound, star_discrepancy_1d, HaltonSequence};
use ergoshift::markov::{
    gamblers_ruin, ruin_expected_duration, ruin_hit_top_probability, ChainConsumption, RuinParams, RuinPayoff,
};
use ergoshift::report::{g17, json_real, report_csv_rows, report_json, to_json_string, CSV_HEADER};
use ergoshift::rng::{derive_seed, Uniforms};
use ergoshift::tape::Tape;
use ergoshift::transport::{transport_model, FreePathLaw, TransportParams};
use ergoshift::ConsumptionModel;
use serde_json::{Map, Value};

use crate::functions;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug)]
pub struct Common {
    pub seed: u64,
    pub samples: u64,
    pub format: Format,
    pub memo: bool,
    pub batch_size: Option<usize>,
}

impl Default for Common {
    fn default() -> Self {
        Self {
            seed: 42,
            samples: 500_000,
            format: Format::Json,
            memo: true,
            batch_size: None,
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    TruncationExceeded,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::TruncationExceeded => 3,
        }
    }
}

#[derive(Debug)]
pub struct Output {
    pub text: String,
    pub status: Status,
}

impl Output {
    fn ok(text: String) -> Self {
        Self {
            text,
            status: Status::Ok,
        }
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

/// Tape seed of a method's stream; MC and shift never share a tape.
pub fn tape_seed(base: u64, method: Method) -> u64 {
    match method {
        Method::Mc => derive_seed(base, 0),
        Method::Shift => derive_seed(base, 1),
        Method::Qmc => base,
    }
}

/// Runs `model` with `method` on a fresh tape for `common`.
pub fn estimate<M: ConsumptionModel + ?Sized>(
    model: &M,
    method: Method,
    common: &Common,
) -> Result<EstimatorReport, CliError> {
    if method == Method::Qmc {
        return Err(CliError::Usage("qmc applies to `integrate` only".into()));
    }
    if common.samples == 0 {
        return Err(CliError::Usage("--samples must be at least 1".into()));
    }
    let seed = tape_seed(common.seed, method);
    let mut tape = Tape::new(seed).with_memo(common.memo);
    let mut report =
        run_on_tape(method, model, common.samples, &mut tape, common.batch_size, |_, _| {}).map_err(runtime)?;
    report.seed = Some(common.seed);
    Ok(report
        .with_param("tape_seed", seed)
        .with_param("memo", if common.memo { "on" } else { "off" }))
}

fn render_single(report: &EstimatorReport, extra: Map<String, Value>, format: Format) -> String {
    match format {
        Format::Json => {
            let mut v = report_json(report);
            if let Value::Object(o) = &mut v {
                o.extend(extra);
            }
            let mut s = to_json_string(&v);
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut s = String::from(CSV_HEADER);
            s.push('\n');
            for row in report_csv_rows(report) {
                s.push_str(&row);
                s.push('\n');
            }
            s
        }
    }
}

fn truncation_status(report: &EstimatorReport, limit: f64) -> Status {
    if report.truncated_count as f64 > limit * report.n_samples as f64 {
        Status::TruncationExceeded
    } else {
        Status::Ok
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TransportArgs {
    pub lambda: f64,
    pub law: FreePathLaw,
    pub method: Method,
    pub max_depth: u32,
    pub max_particles: u64,
    /// Exit with status 3 when more than this fraction of trees is truncated.
    pub max_truncated_fraction: f64,
}

impl TransportArgs {
    pub fn new(lambda: f64, method: Method) -> Self {
        Self {
            lambda,
            law: FreePathLaw::default(),
            method,
            max_depth: 64,
            max_particles: 1_000_000,
            max_truncated_fraction: 0.01,
        }
    }

    pub fn params(&self) -> Result<TransportParams, CliError> {
        TransportParams::new(self.lambda)
            .and_then(|p| p.with_caps(self.max_depth, self.max_particles))
            .map(|p| p.with_law(self.law))
            .map_err(usage)
    }
}

pub fn transport_report(args: &TransportArgs, common: &Common) -> Result<EstimatorReport, CliError> {
    let params = args.params()?;
    let report = estimate(&transport_model(params), args.method, common)?;
    Ok(report
        .with_param("lambda", args.lambda)
        .with_param("lambda_law", args.law.as_str())
        .with_param("max_depth", args.max_depth)
        .with_param("max_particles", args.max_particles))
}

pub fn cmd_transport(args: &TransportArgs, common: &Common) -> Result<Output, CliError> {
    let report = transport_report(args, common)?;
    Ok(Output {
        text: render_single(&report, Map::new(), common.format),
        status: truncation_status(&report, args.max_truncated_fraction),
    })
}

/// One λ column of the comparison table.
#[derive(Clone, Debug)]
pub struct TableColumn {
    pub lambda: f64,
    pub mc: EstimatorReport,
    pub shift: EstimatorReport,
}

impl TableColumn {
    /// Measured wall-time ratio MC / shift.
    pub fn duration_ratio(&self) -> f64 {
        self.mc.elapsed.as_secs_f64() / self.shift.elapsed.as_secs_f64()
    }
}

pub const TABLE_ROWS: [&str; 4] = ["mean_splittings", "mean_right_exits", "calls_per_sample", "duration_ratio"];

/// Runs MC and shift at every λ, columns ordered by λ descending.
pub fn run_table(lambdas: &[f64], law: FreePathLaw, common: &Common) -> Result<Vec<TableColumn>, CliError> {
    if lambdas.is_empty() {
        return Err(CliError::Usage("need at least one lambda".into()));
    }
    let mut sorted = lambdas.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted
        .into_iter()
        .map(|lambda| {
            let mut args = TransportArgs::new(lambda, Method::Mc);
            args.law = law;
            let mc = transport_report(&args, common)?;
            args.method = Method::Shift;
            let shift = transport_report(&args, common)?;
            Ok(TableColumn { lambda, mc, shift })
        })
        .collect()
}

fn table_cells(c: &TableColumn) -> [[Option<f64>; 2]; 4] {
    let ratio = c.duration_ratio();
    [
        [c.mc.mean("splittings"), c.shift.mean("splittings")],
        [c.mc.mean("right_exits"), c.shift.mean("right_exits")],
        [Some(c.mc.calls_per_sample()), Some(c.shift.calls_per_sample())],
        [Some(ratio), None],
    ]
}

pub fn render_table(columns: &[TableColumn], law: FreePathLaw, common: &Common) -> String {
    match common.format {
        Format::Csv => {
            let mut s = String::from("quantity");
            for c in columns {
                let _ = write!(s, ",mc_{},shift_{}", c.lambda, c.lambda);
            }
            s.push('\n');
            let cells: Vec<_> = columns.iter().map(table_cells).collect();
            for (row, name) in TABLE_ROWS.iter().enumerate() {
                s.push_str(name);
                for c in &cells {
                    for v in c[row] {
                        s.push(',');
                        if let Some(v) = v {
                            s.push_str(&g17(v));
                        }
                    }
                }
                s.push('\n');
            }
            s
        }
        Format::Json => {
            let mut o = Map::new();
            o.insert("seed".into(), common.seed.into());
            o.insert("n_samples".into(), common.samples.into());
            o.insert("lambda_law".into(), law.as_str().into());
            o.insert("memo".into(), (if common.memo { "on" } else { "off" }).into());
            let cols: Vec<Value> = columns
                .iter()
                .map(|c| {
                    let mut m = Map::new();
                    m.insert("lambda".into(), json_real(c.lambda));
                    m.insert("mc".into(), report_json(&c.mc));
                    m.insert("shift".into(), report_json(&c.shift));
                    m.insert("duration_ratio".into(), json_real(c.duration_ratio()));
                    Value::Object(m)
                })
                .collect();
            o.insert("columns".into(), Value::Array(cols));
            let mut s = to_json_string(&Value::Object(o));
            s.push('\n');
            s
        }
    }
}

pub fn cmd_table(lambdas: &[f64], law: FreePathLaw, common: &Common) -> Result<Output, CliError> {
    let columns = run_table(lambdas, law, common)?;
    Ok(Output::ok(render_table(&columns, law, common)))
}

#[derive(Clone, Copy, Debug)]
pub struct RuinArgs {
    pub n_states: u64,
    pub start: u64,
    pub p_up: f64,
    pub method: Method,
    pub cap: u64,
    pub max_truncated_fraction: f64,
}

pub fn cmd_markov_ruin(args: &RuinArgs, common: &Common) -> Result<Output, CliError> {
    let mut params = RuinParams::new(args.n_states, args.start, args.p_up);
    params.cap = args.cap;
    params.memoize_step = common.memo;
    let (chain, spec) = gamblers_ruin(params, RuinPayoff::Both).map_err(usage)?;
    let report = estimate(&ChainConsumption::new(chain, spec), args.method, common)?;
    let report = report
        .with_param("n_states", args.n_states)
        .with_param("start", args.start)
        .with_param("p_up", args.p_up)
        .with_param("cap", args.cap);
    let mut exact = Map::new();
    exact.insert(
        "duration".into(),
        json_real(ruin_expected_duration(args.n_states, args.start, args.p_up)),
    );
    exact.insert(
        "hit_top".into(),
        json_real(ruin_hit_top_probability(args.n_states, args.start, args.p_up)),
    );
    let mut extra = Map::new();
    extra.insert("exact".into(), Value::Object(exact));
    Ok(Output {
        text: render_single(&report, extra, common.format),
        status: truncation_status(&report, args.max_truncated_fraction),
    })
}

#[derive(Clone, Debug)]
pub struct IntegrateArgs {
    pub function: String,
    pub dim: Option<usize>,
    pub method: Method,
    pub perm: Option<CoordinatePermutation>,
}

/// Result of `integrate`: the report plus the certificate for qmc.
#[derive(Clone, Debug)]
pub struct Integration {
    pub report: EstimatorReport,
    pub exact: f64,
    pub d_star: Option<f64>,
    pub bound: Option<f64>,
}

pub fn integrate(args: &IntegrateArgs, common: &Common) -> Result<Integration, CliError> {
    let spec = functions::lookup(&args.function).ok_or_else(|| {
        CliError::Usage(format!(
            "unknown function {:?}; available: {}",
            args.function,
            functions::names().join(", ")
        ))
    })?;
    let dim = args.dim.unwrap_or(spec.default_dim);
    if let Some(fixed) = spec.dim {
        if fixed != dim {
            return Err(CliError::Usage(format!("{} is defined on dimension {fixed}, not {dim}", spec.name)));
        }
    }
    if dim == 0 || dim > ergoshift::estimators::MAX_FIXED_DIM {
        return Err(CliError::Usage(format!("dimension {dim} out of range")));
    }
    let sigma = match &args.perm {
        Some(p) if p.dim() != dim => {
            return Err(CliError::Usage(format!("permutation {p} does not act on dimension {dim}")))
        }
        Some(p) => p.clone(),
        None => CoordinatePermutation::identity(dim),
    };
    let f = permuted(spec.f, &sigma);
    let exact = (spec.exact)(dim);

    match args.method {
        Method::Qmc => {
            let seq = HaltonSequence::new(dim).map_err(usage)?;
            let report = ergoshift::qmc_estimate(&f, dim, common.samples, &seq)
                .map_err(runtime)?
                .with_param("function", spec.name)
                .with_param("dim", dim)
                .with_param("perm", &sigma);
            let (d_star, bound) = if dim == 1 {
                let nodes: Vec<f64> = seq.nodes(common.samples as usize).map(|p| p[0]).collect();
                let d = star_discrepancy_1d(&nodes).map_err(runtime)?.d_star;
                (Some(d), spec.variation.map(|v| koksma_hlawka_bound(v, d)))
            } else {
                (None, None)
            };
            Ok(Integration {
                report,
                exact,
                d_star,
                bound,
            })
        }
        method => {
            let model = FunctionModel::new(spec.name, dim, f);
            let report = estimate(&model, method, common)?;
            Ok(Integration {
                report: report
                    .with_param("function", spec.name)
                    .with_param("dim", dim)
                    .with_param("perm", &sigma),
                exact,
                d_star: None,
                bound: None,
            })
        }
    }
}

pub fn cmd_integrate(args: &IntegrateArgs, common: &Common) -> Result<Output, CliError> {
    let r = integrate(args, common)?;
    let mean = r.report.estimates[0].mean;
    let text = match common.format {
        Format::Json => {
            let mut extra = Map::new();
            extra.insert("exact".into(), json_real(r.exact));
            extra.insert("abs_error".into(), json_real((mean - r.exact).abs()));
            if let Some(d) = r.d_star {
                let mut cert = Map::new();
                cert.insert("d_star".into(), json_real(d));
                cert.insert("bound".into(), r.bound.map_or(Value::Null, json_real));
                cert.insert(
                    "holds".into(),
                    r.bound.map_or(Value::Null, |b| Value::Bool((mean - r.exact).abs() <= b)),
                );
                extra.insert("certificate".into(), Value::Object(cert));
            }
            render_single(&r.report, extra, Format::Json)
        }
        Format::Csv => {
            let opt = |x: Option<f64>| x.map(g17).unwrap_or_default();
            let mut s = format!("{CSV_HEADER},exact,abs_error,d_star,kh_bound\n");
            for row in report_csv_rows(&r.report) {
                let _ = writeln!(
                    s,
                    "{row},{},{},{},{}",
                    g17(r.exact),
                    g17((mean - r.exact).abs()),
                    opt(r.d_star),
                    opt(r.bound)
                );
            }
            s
        }
    };
    Ok(Output::ok(text))
}

pub fn cmd_rng_test(seed: u64, count: usize) -> Result<Output, CliError> {
    if count == 0 {
        return Err(CliError::Usage("--count must be at least 1".into()));
    }
    let mut s = String::new();
    for u in Uniforms::new(seed).take(count) {
        s.push_str(&g17(u));
        s.push('\n');
    }
    Ok(Output::ok(s))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(samples: u64) -> Common {
        Common {
            samples,
            ..Common::default()
        }
    }

    #[test]
    fn rng_test_lines() {
        let out = cmd_rng_test(42, 3).unwrap().text;
        assert_eq!(out, "0.032021373280929688\n0.029273180728959458\n0.048065755359955942\n");
        assert!(cmd_rng_test(42, 0).is_err());
    }

    #[test]
    fn transport_rejects_qmc_and_bad_lambda() {
        let c = small(10);
        assert!(matches!(
            cmd_transport(&TransportArgs::new(0.98, Method::Qmc), &c),
            Err(CliError::Usage(_))
        ));
        assert!(matches!(
            cmd_transport(&TransportArgs::new(-1.0, Method::Mc), &c),
            Err(CliError::Usage(_))
        ));
    }

    #[test]
    fn truncation_exit_status() {
        let mut args = TransportArgs::new(0.05, Method::Mc);
        args.max_depth = 2;
        let out = cmd_transport(&args, &small(200)).unwrap();
        assert_eq!(out.status, Status::TruncationExceeded);
        assert_eq!(out.status.exit_code(), 3);
    }

    #[test]
    fn table_orders_columns_descending() {
        let cols = run_table(&[0.9, 0.98, 0.94], FreePathLaw::Mean, &small(100)).unwrap();
        let lambdas: Vec<f64> = cols.iter().map(|c| c.lambda).collect();
        assert_eq!(lambdas, vec![0.98, 0.94, 0.9]);
        for c in &cols {
            assert!(c.mc.mean("splittings").unwrap().is_finite());
            assert!(c.shift.mean("right_exits").unwrap().is_finite());
        }
        let csv = render_table(&cols, FreePathLaw::Mean, &Common { format: Format::Csv, ..small(100) });
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[0].starts_with("quantity,mc_0.98,shift_0.98,mc_0.94"));
        assert!(lines[4].starts_with("duration_ratio,"));
        assert!(run_table(&[], FreePathLaw::Mean, &small(10)).is_err());
    }

    #[test]
    fn ruin_two_states_exact() {
        for method in [Method::Mc, Method::Shift] {
            let args = RuinArgs {
                n_states: 2,
                start: 1,
                p_up: 0.3,
                method,
                cap: 100,
                max_truncated_fraction: 0.0,
            };
            let text = cmd_markov_ruin(&args, &small(1000)).unwrap().text;
            let v: Value = serde_json::from_str(&text).unwrap();
            assert_eq!(v["estimates"]["duration"]["mean"].as_f64(), Some(1.0));
        }
    }

    #[test]
    fn integrate_errors_and_const() {
        let c = small(100);
        let mut args = IntegrateArgs {
            function: "nope".into(),
            dim: None,
            method: Method::Shift,
            perm: None,
        };
        assert!(matches!(integrate(&args, &c), Err(CliError::Usage(_))));
        args.function = "linear3".into();
        args.dim = Some(2);
        assert!(integrate(&args, &c).is_err());
        args.dim = None;
        args.perm = Some("2,1".parse().unwrap());
        assert!(integrate(&args, &c).is_err());

        for method in [Method::Mc, Method::Shift, Method::Qmc] {
            let args = IntegrateArgs {
                function: "const".into(),
                dim: Some(4),
                method,
                perm: None,
            };
            let r = integrate(&args, &small(37)).unwrap();
            assert_eq!(r.report.estimates[0].mean, 0.75);
        }
    }

    #[test]
    fn integrate_square_qmc_certificate() {
        let args = IntegrateArgs {
            function: "square".into(),
            dim: None,
            method: Method::Qmc,
            perm: None,
        };
        let r = integrate(&args, &small(1024)).unwrap();
        let err = (r.report.estimates[0].mean - 1.0 / 3.0).abs();
        assert!(err <= r.bound.unwrap());
        assert_eq!(r.d_star, Some(1.0 / 1024.0));
    }
}
