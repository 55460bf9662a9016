//! Command implementations behind the `epconc` binary: seeded runs and
//! Monte-Carlo sweeps, the self-verification suites, and netlist export.
//! Everything here is a plain function so the behavior is testable
//! without spawning the binary.

use crate::analysis::{self, YieldRow, YieldTable};
use crate::circuits::{
    build_cascade_network, build_hamming_network, build_perm_network, PermDirection,
};
use crate::combinat::{self, binomial, binomial_expansion, rank, unrank, Rank};
use crate::oracle;
use crate::protocol::{self, Engine, PairParams};
use crate::statevec::FIDELITY_TOL;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Environment variable naming the default directory for `--output`
/// paths that are relative.
pub const OUTPUT_DIR_ENV: &str = "EPCONC_OUTPUT_DIR";

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or out-of-range parameters; exit code 1.
    #[error("{0}")]
    Validation(String),
    #[error("write failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed table: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

fn validation(err: impl std::fmt::Display) -> CliError {
    CliError::Validation(err.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Table,
    Csv,
    Json,
}

/// Everything a `run` invocation needs.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub alpha: f64,
    pub n: usize,
    pub trials: u64,
    pub seed: u64,
    pub engine: Engine,
    pub format: OutputFormat,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            alpha: std::f64::consts::FRAC_1_SQRT_2,
            n: 3,
            trials: 1000,
            seed: 1,
            engine: Engine::Mirrored,
            format: OutputFormat::Table,
            output: None,
        }
    }
}

/// Result of a `run` invocation: the aggregated table plus its
/// rendering in the requested format.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub table: YieldTable,
    pub rendered: String,
    pub written_to: Option<PathBuf>,
}

/// Resolve an output path against the default output directory.
pub fn resolve_output_path(path: &Path) -> PathBuf {
    if path.is_relative() {
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
            return PathBuf::from(dir).join(path);
        }
    }
    path.to_path_buf()
}

/// Run the protocol `trials` times and render the yield table.
pub fn cmd_run(config: &RunConfig) -> Result<RunReport> {
    if config.trials == 0 {
        return Err(CliError::Validation("need at least one trial".into()));
    }
    let params = PairParams::new(config.alpha, config.n).map_err(validation)?;
    if config.engine == Engine::Full && config.n > protocol::FULL_RUN_MAX_PAIRS {
        return Err(CliError::Validation(format!(
            "full engine handles at most n = {} pairs; use --engine mirrored for n = {}",
            protocol::FULL_RUN_MAX_PAIRS,
            config.n
        )));
    }
    let table = protocol::run_trials(&params, config.trials, config.seed, config.engine)
        .map_err(validation)?;
    let rendered = match config.format {
        OutputFormat::Table => render_table(&table),
        OutputFormat::Csv => yield_table_to_csv(&table),
        OutputFormat::Json => yield_table_to_json(&table)?,
    };
    let written_to = match &config.output {
        Some(path) => {
            let full = resolve_output_path(path);
            if let Some(parent) = full.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            std::fs::write(&full, &rendered)?;
            Some(full)
        }
        None => None,
    };
    Ok(RunReport { table, rendered, written_to })
}

/// Fixed-column CSV, one row per weight.
pub fn yield_table_to_csv(table: &YieldTable) -> String {
    let mut out =
        String::from("j,prob_j,k,expected_pairs_exact,lower_bound_k_minus_2,empirical_mean,trials\n");
    for r in &table.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.j, r.prob_j, r.k, r.expected_pairs_exact, r.lower_bound_k_minus_2, r.empirical_mean,
            r.trials
        )
        .expect("writing to a string cannot fail");
    }
    out
}

/// Parse the rows back out of the CSV emitted by [`yield_table_to_csv`].
pub fn yield_rows_from_csv(text: &str) -> Result<Vec<YieldRow>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| CliError::Parse("empty input".into()))?;
    if header != "j,prob_j,k,expected_pairs_exact,lower_bound_k_minus_2,empirical_mean,trials" {
        return Err(CliError::Parse(format!("unexpected header: {header}")));
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(CliError::Parse(format!("line {}: expected 7 fields", lineno + 2)));
        }
        let bad = |what: &str| CliError::Parse(format!("line {}: bad {what}", lineno + 2));
        rows.push(YieldRow {
            j: fields[0].parse().map_err(|_| bad("j"))?,
            prob_j: fields[1].parse().map_err(|_| bad("prob_j"))?,
            k: fields[2].parse().map_err(|_| bad("k"))?,
            expected_pairs_exact: fields[3].parse().map_err(|_| bad("expected_pairs_exact"))?,
            lower_bound_k_minus_2: fields[4].parse().map_err(|_| bad("lower_bound_k_minus_2"))?,
            empirical_mean: fields[5].parse().map_err(|_| bad("empirical_mean"))?,
            trials: fields[6].parse().map_err(|_| bad("trials"))?,
        });
    }
    Ok(rows)
}

pub fn yield_table_to_json(table: &YieldTable) -> Result<String> {
    serde_json::to_string_pretty(table).map_err(|e| CliError::Parse(e.to_string()))
}

pub fn yield_table_from_json(text: &str) -> Result<YieldTable> {
    serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
}

fn render_table(table: &YieldTable) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "alpha = {:.10}  n = {}  trials = {}  seed = {}  engine = {}",
        table.alpha, table.n, table.totals.trials, table.seed, table.engine
    )
    .unwrap();
    writeln!(
        out,
        "{:>3} {:>12} {:>3} {:>12} {:>6} {:>12} {:>8}",
        "j", "P(j)", "k", "E[pairs|j]", "k-2", "empirical", "trials"
    )
    .unwrap();
    for r in &table.rows {
        writeln!(
            out,
            "{:>3} {:>12.8} {:>3} {:>12.8} {:>6} {:>12.6} {:>8}",
            r.j,
            r.prob_j,
            r.k,
            r.expected_pairs_exact,
            r.lower_bound_k_minus_2,
            r.empirical_mean,
            r.trials
        )
        .unwrap();
    }
    let t = &table.totals;
    writeln!(out, "expected pairs      {:>12.8}   empirical mean {:.6} (variance {:.6})",
        t.expected_pairs, t.empirical_mean, t.empirical_variance).unwrap();
    writeln!(out, "floor-log bound     {:>12.8}   clamped {:.8}", t.lower_bound, t.lower_bound_clamped)
        .unwrap();
    writeln!(out, "entropy ceiling nH  {:>12.8}   concentrated entropy {:.8}",
        t.entropy_ceiling, t.expected_entropy).unwrap();
    out
}

// ---------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyScope {
    All,
    Combinat,
    Circuits,
    Protocol,
    Analysis,
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            if c.passed {
                writeln!(out, "PASS {}", c.name).unwrap();
            } else {
                writeln!(out, "FAIL {}: {}", c.name, c.detail).unwrap();
            }
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        writeln!(out, "{} checks, {} failed", self.checks.len(), failed).unwrap();
        out
    }

    fn record(&mut self, name: &str, result: std::result::Result<(), String>) {
        match result {
            Ok(()) => self.checks.push(CheckResult {
                name: name.into(),
                passed: true,
                detail: String::new(),
            }),
            Err(detail) => self.checks.push(CheckResult {
                name: name.into(),
                passed: false,
                detail,
            }),
        }
    }
}

/// Run the exhaustive and statistical self-checks for one scope.
pub fn cmd_verify(scope: VerifyScope) -> VerifyReport {
    let mut report = VerifyReport::default();
    if matches!(scope, VerifyScope::All | VerifyScope::Combinat) {
        verify_combinat(&mut report);
    }
    if matches!(scope, VerifyScope::All | VerifyScope::Circuits) {
        verify_circuits(&mut report);
    }
    if matches!(scope, VerifyScope::All | VerifyScope::Analysis) {
        verify_analysis(&mut report);
    }
    if matches!(scope, VerifyScope::All | VerifyScope::Protocol) {
        verify_protocol(&mut report);
    }
    report
}

fn verify_combinat(report: &mut VerifyReport) {
    report.record("ranking bijection and order, n <= 12", {
        (|| {
            for n in 1..=12usize {
                for j in 0..=n {
                    let count = binomial(n, j).map_err(|e| e.to_string())?;
                    let mut prev: Option<u64> = None;
                    for y in 0..count {
                        let s = unrank(Rank(y), n, j).map_err(|e| e.to_string())?;
                        if combinat::hamming_weight(&s) != j {
                            return Err(format!("weight off at n={n} j={j} y={y}"));
                        }
                        if rank(&s, j).map_err(|e| e.to_string())? != Rank(y) {
                            return Err(format!("roundtrip off at n={n} j={j} y={y}"));
                        }
                        if let Some(p) = prev {
                            if p >= s.value() {
                                return Err(format!("order violated at n={n} j={j} y={y}"));
                            }
                        }
                        prev = Some(s.value());
                    }
                }
            }
            Ok(())
        })()
    });
    report.record("Pascal identity, n <= 30", {
        (|| {
            for n in 2..=30usize {
                for j in 1..n {
                    let lhs = binomial(n, j).map_err(|e| e.to_string())?;
                    let rhs = binomial(n - 1, j).map_err(|e| e.to_string())?
                        + binomial(n - 1, j - 1).map_err(|e| e.to_string())?;
                    if lhs != rhs {
                        return Err(format!("C({n},{j}) = {lhs} but sum is {rhs}"));
                    }
                }
            }
            Ok(())
        })()
    });
    report.record("expansions well formed, n <= 16", {
        (|| {
            for n in 0..=16usize {
                for j in 0..=n {
                    let e = binomial_expansion(n, j).map_err(|e| e.to_string())?;
                    if !e.bits.bit(0) || e.bits.value() != e.value {
                        return Err(format!("expansion malformed at n={n} j={j}"));
                    }
                }
            }
            Ok(())
        })()
    });
}

fn verify_circuits(report: &mut VerifyReport) {
    report.record("ranking network equals unrank, n <= 8", {
        (|| {
            for n in 1..=8usize {
                for j in 0..=n {
                    let circuit = build_perm_network(n, j, PermDirection::InverseF)
                        .map_err(|e| e.to_string())?;
                    let order = circuit.all_labels();
                    let eval = circuit.classical(&order).map_err(|e| e.to_string())?;
                    let wn = circuit.register("len").map_err(|e| e.to_string())?.len();
                    let wj = circuit.register("weight").map_err(|e| e.to_string())?.len();
                    for y in 0..binomial(n, j).map_err(|e| e.to_string())? {
                        let input = (((((y << wn) | n as u64) << wj) | j as u64) << n) | 0;
                        let out = eval.apply(input);
                        let expect = unrank(Rank(y), n, j).map_err(|e| e.to_string())?.value();
                        if out & ((1 << n) - 1) != expect || out >> n != 0 {
                            return Err(format!("mismatch at n={n} j={j} y={y}"));
                        }
                    }
                }
            }
            Ok(())
        })()
    });
    report.record("weight counter network, n <= 8", {
        (|| {
            for n in 1..=8usize {
                let circuit = build_hamming_network(n);
                let w = crate::circuits::counter_width(n);
                let eval = circuit.classical(&circuit.all_labels()).map_err(|e| e.to_string())?;
                for x in 0..1u64 << n {
                    let out = eval.apply(x << w);
                    if out >> w != x || out & ((1 << w) - 1) != x.count_ones() as u64 {
                        return Err(format!("mismatch at n={n} x={x}"));
                    }
                }
            }
            Ok(())
        })()
    });
    report.record("cascade matches enumerated stop rule, n <= 16", {
        (|| {
            for n in 1..=16usize {
                for j in 0..=n {
                    let e = binomial_expansion(n, j).map_err(|e| e.to_string())?;
                    if e.value == 1 {
                        continue;
                    }
                    let k = e.k;
                    let circuit = build_cascade_network(k);
                    let eval =
                        circuit.classical(&circuit.all_labels()).map_err(|x| x.to_string())?;
                    let wm = crate::circuits::counter_width(k - 1) + 1;
                    let reference = oracle::brute_force_cascade(e.value);
                    let mut counts = std::collections::BTreeMap::new();
                    for y in 0..e.value {
                        let input =
                            (((((y << k) | e.value) << k) | ((1 << k) - 1)) << wm) | (k as u64 - 1);
                        let out = eval.apply(input);
                        if (out >> wm) & ((1 << k) - 1) != (1 << k) - 1 {
                            return Err(format!("flags not restored at n={n} j={j} y={y}"));
                        }
                        *counts.entry((out & ((1 << wm) - 1)) as usize).or_insert(0i128) += 1;
                    }
                    for (&pairs, &count) in &counts {
                        if reference.probability(pairs)
                            != num_rational::Ratio::new(count, e.value as i128)
                        {
                            return Err(format!("distribution off at n={n} j={j}"));
                        }
                    }
                }
            }
            Ok(())
        })()
    });
    report.record("networks invert exactly, width <= 14", {
        (|| {
            let cases: Vec<crate::circuits::Circuit> = vec![
                build_perm_network(4, 2, PermDirection::InverseF).map_err(|e| e.to_string())?,
                build_cascade_network(3),
                build_hamming_network(5),
            ];
            for circuit in cases {
                let order = circuit.all_labels();
                if order.len() > 14 {
                    continue;
                }
                let forward = circuit.classical(&order).map_err(|e| e.to_string())?;
                let backward = circuit.inverse().classical(&order).map_err(|e| e.to_string())?;
                for input in 0..1u64 << order.len() {
                    if backward.apply(forward.apply(input)) != input {
                        return Err(format!("inverse failed at input {input}"));
                    }
                }
            }
            Ok(())
        })()
    });
}

fn verify_analysis(report: &mut VerifyReport) {
    report.record("conditional means equal cascade enumeration, n <= 16", {
        (|| {
            for n in 0..=16usize {
                for j in 0..=n {
                    let c = binomial(n, j).map_err(|e| e.to_string())?;
                    let mean = analysis::expected_pairs_given_j(n, j).map_err(|e| e.to_string())?;
                    if mean != oracle::brute_force_cascade(c).mean() {
                        return Err(format!("mean differs at n={n} j={j}"));
                    }
                    if c > 1 {
                        let k = binomial_expansion(n, j).map_err(|e| e.to_string())?.k as i128;
                        if mean < num_rational::Ratio::from_integer(k - 2) {
                            return Err(format!("bound k-2 fails at n={n} j={j}"));
                        }
                    }
                }
            }
            Ok(())
        })()
    });
    report.record("yield bounded by entropy ceiling", {
        (|| {
            for n in 2..=16usize {
                for a2 in [0.2f64, 0.5, 0.8] {
                    let alpha = a2.sqrt();
                    let y = analysis::expected_pairs_total(alpha, n).map_err(|e| e.to_string())?;
                    let entropy =
                        analysis::expected_concentrated_entropy(alpha, n).map_err(|e| e.to_string())?;
                    if y.expected_pairs > y.entropy_ceiling + 1e-9
                        || y.expected_pairs < y.lower_bound - 1e-12
                        || y.expected_pairs > entropy + 1e-9
                    {
                        return Err(format!("bounds fail at n={n} a2={a2}"));
                    }
                }
            }
            Ok(())
        })()
    });
    report.record("entropy identities", {
        (|| {
            if analysis::binary_entropy(0.5).map_err(|e| e.to_string())? != 1.0 {
                return Err("H(1/2) is not exactly 1".into());
            }
            for a2 in [0.1f64, 0.25, 0.5, 0.9] {
                let h = analysis::binary_entropy(a2).map_err(|e| e.to_string())?;
                let o = oracle::von_neumann_entropy(&[a2, 1.0 - a2]);
                if (h - o).abs() > 1e-12 {
                    return Err(format!("entropy mismatch at {a2}"));
                }
            }
            Ok(())
        })()
    });
}

fn verify_protocol(report: &mut VerifyReport) {
    report.record("perfect outputs over the seed grid", {
        (|| {
            for a2 in [0.25f64, 0.5, 0.75] {
                let alpha = a2.sqrt();
                for n in 1..=10usize {
                    let p = PairParams::new(alpha, n).map_err(|e| e.to_string())?;
                    for seed in 0..25u64 {
                        let o = protocol::run_protocol(&p, seed, Engine::Mirrored)
                            .map_err(|e| e.to_string())?;
                        if o.fidelity_vs_ideal < 1.0 - FIDELITY_TOL {
                            return Err(format!(
                                "fidelity {} at n={n} a2={a2} seed={seed} (mirrored)",
                                o.fidelity_vs_ideal
                            ));
                        }
                        if n <= 5 {
                            let o = protocol::run_protocol(&p, seed, Engine::Full)
                                .map_err(|e| e.to_string())?;
                            if o.fidelity_vs_ideal < 1.0 - FIDELITY_TOL {
                                return Err(format!(
                                    "fidelity {} at n={n} a2={a2} seed={seed} (full)",
                                    o.fidelity_vs_ideal
                                ));
                            }
                        }
                    }
                }
            }
            Ok(())
        })()
    });
    report.record("engines agree on exact branch tables, n <= 4", {
        (|| {
            for n in 1..=4usize {
                let p = PairParams::new(0.6, n).map_err(|e| e.to_string())?;
                let full =
                    protocol::enumerate_outcomes(&p, Engine::Full).map_err(|e| e.to_string())?;
                let mirrored = protocol::enumerate_outcomes(&p, Engine::Mirrored)
                    .map_err(|e| e.to_string())?;
                if full.len() != mirrored.len() {
                    return Err(format!("branch counts differ at n={n}"));
                }
                for (f, m) in full.iter().zip(mirrored.iter()) {
                    if (f.j, f.pairs) != (m.j, m.pairs)
                        || (f.probability - m.probability).abs() > 1e-10
                    {
                        return Err(format!("branch differs at n={n}: {f:?} vs {m:?}"));
                    }
                }
            }
            Ok(())
        })()
    });
    report.record("trial streams reproduce single runs", {
        (|| {
            let p = PairParams::new(std::f64::consts::FRAC_1_SQRT_2, 3).map_err(|e| e.to_string())?;
            let single = protocol::run_protocol(&p, 42, Engine::Mirrored).map_err(|e| e.to_string())?;
            let table =
                protocol::run_trials(&p, 1, 42, Engine::Mirrored).map_err(|e| e.to_string())?;
            if table.rows[single.j].trials != 1 {
                return Err("trial 0 diverged from the single run".into());
            }
            Ok(())
        })()
    });
}

// ---------------------------------------------------------------------
// export
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetworkKind {
    Hamming,
    Perm,
    Cascade,
}

/// Render the requested network as a text netlist.
pub fn cmd_export(
    kind: NetworkKind,
    n: usize,
    j: Option<usize>,
    direction: PermDirection,
) -> Result<String> {
    if n == 0 {
        return Err(CliError::Validation("need n >= 1".into()));
    }
    match kind {
        NetworkKind::Hamming => Ok(build_hamming_network(n).to_netlist()),
        NetworkKind::Perm => {
            let j = j.ok_or_else(|| CliError::Validation("perm export needs --j".into()))?;
            let circuit = build_perm_network(n, j, direction).map_err(validation)?;
            Ok(circuit.to_netlist())
        }
        NetworkKind::Cascade => {
            let j = j.ok_or_else(|| CliError::Validation("cascade export needs --j".into()))?;
            let expansion = binomial_expansion(n, j).map_err(validation)?;
            Ok(build_cascade_network(expansion.k).to_netlist())
        }
    }
}
