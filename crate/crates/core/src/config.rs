//! Run configuration and command dispatch.
//!
//! One JSON file describes a problem; every command reads it and writes its
//! artifacts into an output directory together with `manifest.json`, which
//! lists each CSV with its header and row count.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::estimates::{
    contraction_threshold, empirical_d, lemma_bound_report, memory_decay_exponent,
    memory_decay_window, solvability_ratio, LambdaGrid,
};
use crate::kernel::{validate_terms, KernelSpec, KernelTerm, DEFAULT_BOUNDARY_TOL};
use crate::numeric::linspace;
use crate::operator::{
    ExpPolyTerm, ForcingSpec, ModeVector, OperatorModel, OperatorSpec, SampledForcing,
};
use crate::oracle::{integrate_mode, Trace};
use crate::series::{
    eval_series, eval_series_complex, evaluate_physical, full_series, series_norm_bounds,
};
use crate::spectrum::{full_spectrum, write_spectrum_csv};
use crate::symbol::ModeSymbol;

/// Agreement required of `compare` between series and oracle.
pub const COMPARE_TOL: f64 = 1e-6;

/// Line number (1-based) where the `index`-th element of the array stored
/// under `key` starts.
pub fn locate_array_element(text: &str, key: &str, index: usize) -> Option<usize> {
    let needle = format!("\"{key}\"");
    let start = text.find(&needle)? + needle.len();
    let bytes = text.as_bytes();
    let mut i = start;
    while i < bytes.len() && bytes[i] != b'[' {
        i += 1;
    }
    i += 1;
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    let mut seen = 0usize;
    let mut expecting = true;
    while i < bytes.len() {
        let c = bytes[i];
        if in_string {
            if escaped {
                escaped = false;
            } else if c == b'\\' {
                escaped = true;
            } else if c == b'"' {
                in_string = false;
            }
            i += 1;
            continue;
        }
        if depth == 0 && expecting && !c.is_ascii_whitespace() && c != b']' {
            if seen == index {
                return Some(text[..i].matches('\n').count() + 1);
            }
            seen += 1;
            expecting = false;
        }
        match c {
            b'"' => in_string = true,
            b'{' | b'[' => depth += 1,
            b'}' => depth = depth.saturating_sub(1),
            b']' if depth == 0 => return None,
            b']' => depth -= 1,
            b',' if depth == 0 => expecting = true,
            _ => {}
        }
        i += 1;
    }
    None
}

fn locate_key(text: &str, key: &str) -> usize {
    text.find(&format!("\"{key}\""))
        .map(|i| text[..i].matches('\n').count() + 1)
        .unwrap_or(0)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKernel {
    terms: Vec<KernelTerm>,
    #[serde(default)]
    truncated: bool,
}

#[derive(Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
enum RawOperator {
    #[serde(rename = "dirichlet_1d")]
    Dirichlet1d { n_max: usize },
    Explicit {
        a: Vec<f64>,
        #[serde(default)]
        b: Option<Vec<f64>>,
        #[serde(default = "default_kappa")]
        kappa: f64,
    },
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum RawForcing {
    ExpPoly(Vec<Vec<ExpPolyTerm>>),
    /// The same terms on every mode.
    Uniform(Vec<ExpPolyTerm>),
    Sampled(SampledForcing),
}

fn default_kappa() -> f64 {
    0.5
}
fn default_horizon() -> f64 {
    5.0
}
fn default_dt() -> f64 {
    1e-3
}
fn default_step() -> f64 {
    0.01
}
fn default_samples() -> usize {
    101
}
fn default_problems() -> usize {
    50
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kernel: RawKernel,
    operator: RawOperator,
    #[serde(default)]
    phi0: Vec<f64>,
    #[serde(default)]
    phi1: Vec<f64>,
    #[serde(default)]
    forcing: Option<RawForcing>,
    #[serde(default)]
    gamma: Option<f64>,
    #[serde(default = "default_horizon")]
    horizon: f64,
    #[serde(default = "default_dt")]
    dt: f64,
    #[serde(default = "default_step")]
    step: f64,
    #[serde(default = "default_samples")]
    samples: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_problems")]
    problems: usize,
}

/// Kernel, operator, data and run settings of one problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub kernel: KernelSpec,
    pub operator: OperatorSpec,
    pub phi0: ModeVector,
    pub phi1: ModeVector,
    pub forcing: ForcingSpec,
    /// Exponential weight; the contraction threshold plus one when absent.
    pub gamma: Option<f64>,
    pub horizon: f64,
    /// Oracle time step.
    pub dt: f64,
    /// Quadrature step of the weighted norms.
    pub step: f64,
    /// Output time samples on `[0, horizon]`.
    pub samples: usize,
    pub seed: u64,
    /// Size of the randomized family in `estimates`.
    pub problems: usize,
}

impl ProblemInstance {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| Error::Config {
            line: e.line(),
            message: e.to_string(),
        })?;
        if let Err((j, message)) = validate_terms(&raw.kernel.terms) {
            let line = locate_array_element(text, "terms", j).unwrap_or(0);
            return Err(Error::Config { line, message });
        }
        let mut kernel = KernelSpec::new(raw.kernel.terms).map_err(|e| Error::Config {
            line: locate_key(text, "kernel"),
            message: e.to_string(),
        })?;
        if raw.kernel.truncated {
            kernel = kernel.into_truncated();
        }
        let op_line = locate_key(text, "operator");
        let operator = match raw.operator {
            RawOperator::Dirichlet1d { n_max } => {
                if n_max == 0 {
                    return Err(Error::Config {
                        line: op_line,
                        message: "n_max must be at least 1".into(),
                    });
                }
                OperatorSpec::dirichlet_laplacian_1d(n_max)
            }
            RawOperator::Explicit { a, b, kappa } => {
                let b = b.unwrap_or_else(|| vec![0.0; a.len()]);
                OperatorSpec::explicit(&a, &b, kappa).map_err(|e| Error::Config {
                    line: op_line,
                    message: e.to_string(),
                })?
            }
        };
        let n_max = operator.n_max();
        let forcing = match raw.forcing {
            None => ForcingSpec::zero(),
            Some(RawForcing::ExpPoly(modes)) => ForcingSpec::ExpPoly(modes),
            Some(RawForcing::Uniform(terms)) => ForcingSpec::ExpPoly(vec![terms; n_max]),
            Some(RawForcing::Sampled(s)) => ForcingSpec::Sampled(s),
        };
        forcing.validate().map_err(|e| Error::Config {
            line: locate_key(text, "forcing"),
            message: e.to_string(),
        })?;
        for (key, v) in [("phi0", &raw.phi0), ("phi1", &raw.phi1)] {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config {
                    line: locate_key(text, key),
                    message: format!("{key} has non-finite entries"),
                });
            }
            if operator.model() == OperatorModel::Explicit && v.len() > n_max {
                return Err(Error::Config {
                    line: locate_key(text, key),
                    message: format!(
                        "{key} has {} entries but the operator has {n_max} modes",
                        v.len()
                    ),
                });
            }
        }
        let positive = [("horizon", raw.horizon), ("dt", raw.dt), ("step", raw.step)];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config {
                    line: locate_key(text, key),
                    message: format!("{key} must be positive, got {v}"),
                });
            }
        }
        if let Some(g) = raw.gamma {
            if !(g >= 0.0) {
                return Err(Error::Config {
                    line: locate_key(text, "gamma"),
                    message: format!("gamma must be nonnegative, got {g}"),
                });
            }
        }
        if raw.samples < 2 {
            return Err(Error::Config {
                line: locate_key(text, "samples"),
                message: "samples must be at least 2".into(),
            });
        }
        Ok(Self {
            kernel,
            operator,
            phi0: ModeVector(raw.phi0),
            phi1: ModeVector(raw.phi1),
            forcing,
            gamma: raw.gamma,
            horizon: raw.horizon,
            dt: raw.dt,
            step: raw.step,
            samples: raw.samples,
            seed: raw.seed,
            problems: raw.problems,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    /// Data restricted to the resolved modes.
    pub fn resolved_data(&self) -> (ModeVector, ModeVector) {
        let n = self.operator.n_max();
        (self.phi0.resized(n), self.phi1.resized(n))
    }

    /// `||A^2 phi0||` plus `||A phi1||` over the modes beyond `n_max`
    /// (Dirichlet model, `a_n = n`).
    pub fn discarded_tail_norm(&self) -> f64 {
        let n_max = self.operator.n_max();
        let part = |v: &ModeVector, power: i32| -> f64 {
            v.0.iter()
                .enumerate()
                .skip(n_max)
                .map(|(i, x)| ((i + 1) as f64).powi(2 * power) * x * x)
                .fold(0.0, |acc, v| acc + v)
                .sqrt()
        };
        part(&self.phi0, 2) + part(&self.phi1, 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Spectrum,
    Solve,
    Oracle,
    Compare,
    Estimates,
    Stability,
}

impl Command {
    pub fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "spectrum" => Command::Spectrum,
            "solve" => Command::Solve,
            "oracle" => Command::Oracle,
            "compare" => Command::Compare,
            "estimates" => Command::Estimates,
            "stability" => Command::Stability,
            _ => return None,
        })
    }
}

/// What a command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// JSON printed on stdout.
    pub stdout: serde_json::Value,
    /// A verification inside the command failed.
    pub assertion_failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ManifestEntry {
    path: String,
    header: String,
    rows: usize,
}

struct Emitter {
    dir: PathBuf,
    csv: Vec<ManifestEntry>,
    json: Vec<String>,
}

impl Emitter {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            csv: Vec::new(),
            json: Vec::new(),
        })
    }

    fn csv<F>(&mut self, name: &str, header: &str, body: F) -> Result<()>
    where
        F: FnOnce(&mut dyn Write) -> std::io::Result<usize>,
    {
        let mut w = BufWriter::new(fs::File::create(self.dir.join(name))?);
        let rows = body(&mut w)?;
        w.flush()?;
        self.csv.push(ManifestEntry {
            path: name.into(),
            header: header.into(),
            rows,
        });
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(self.dir.join(name), text)?;
        self.json.push(name.into());
        Ok(())
    }

    fn finish(self, command: &str) -> Result<()> {
        let manifest = json!({
            "command": command,
            "csv": self.csv,
            "json": self.json,
        });
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.dir.join("manifest.json"), text)?;
        Ok(())
    }
}

fn sample_times(p: &ProblemInstance) -> Vec<f64> {
    linspace(0.0, p.horizon, p.samples)
}

fn run_stability(p: &ProblemInstance, out: &mut Emitter) -> Result<Outcome> {
    let d = p.kernel.diagnostics(DEFAULT_BOUNDARY_TOL);
    let value = json!({
        "classification": d.classification,
        "index": d.stability_index,
    });
    out.json("stability.json", &d)?;
    Ok(Outcome {
        stdout: value,
        assertion_failed: false,
    })
}

fn run_spectrum(p: &ProblemInstance, out: &mut Emitter) -> Result<Outcome> {
    let report = full_spectrum(&p.operator, &p.kernel)?;
    out.csv("spectrum.csv", "n,kind,re,im", |w| {
        write_spectrum_csv(&report.spectra, w)
    })?;
    out.json("spectrum_report.json", &report.aggregate)?;
    let agg = &report.aggregate;
    Ok(Outcome {
        stdout: json!({
            "modes": report.spectra.len(),
            "max_re": agg.verdict.max_re,
            "left_half_plane": agg.verdict.left_half_plane,
            "violations": agg.violations.len(),
        }),
        assertion_failed: !agg.violations.is_empty(),
    })
}

fn run_solve(p: &ProblemInstance, out: &mut Emitter) -> Result<Outcome> {
    let report = full_spectrum(&p.operator, &p.kernel)?;
    let (phi0, phi1) = p.resolved_data();
    let s = full_series(&report, &phi0, &phi1, &p.forcing)?;
    let times = sample_times(p);
    let mut max_imag: f64 = 0.0;
    let mut rows = Vec::with_capacity(times.len());
    for &t in &times {
        let u = eval_series(&s, t, 0)?;
        let v = eval_series(&s, t, 1)?;
        let a = match eval_series(&s, t, 2) {
            Ok(a) => Some(a),
            Err(Error::DomainRestriction(_)) => None,
            Err(e) => return Err(e),
        };
        for z in eval_series_complex(&s, t, 0)? {
            max_imag = max_imag.max(z.im.abs() / (1.0 + z.re.abs()));
        }
        rows.push((t, u, v, a));
    }
    out.csv("solution.csv", "t,n,u,u_t,u_tt", |w| {
        writeln!(w, "t,n,u,u_t,u_tt")?;
        let mut count = 0;
        for (t, u, v, a) in &rows {
            for n in 1..=u.len() {
                match a {
                    Some(a) => writeln!(w, "{t},{n},{},{},{}", u.get(n), v.get(n), a.get(n))?,
                    None => writeln!(w, "{t},{n},{},{},nan", u.get(n), v.get(n))?,
                }
                count += 1;
            }
        }
        Ok(count)
    })?;
    if p.operator.model() == OperatorModel::Dirichlet1d {
        let xs = linspace(0.0, std::f64::consts::PI, 65);
        let mut fields = Vec::with_capacity(times.len());
        for &t in &times {
            fields.push(evaluate_physical(&s, &xs, t)?);
        }
        out.csv("field.csv", "x,t,u", |w| {
            writeln!(w, "x,t,u")?;
            let mut count = 0;
            for (t, field) in times.iter().zip(&fields) {
                for (x, u) in xs.iter().zip(field) {
                    writeln!(w, "{x},{t},{u}")?;
                    count += 1;
                }
            }
            Ok(count)
        })?;
    }
    let grid: Vec<f64> = times.iter().copied().filter(|&t| t > 0.0).collect();
    let gamma = p.gamma.unwrap_or(1.0);
    let bounds = (0..=2)
        .map(|k| series_norm_bounds(&s, &grid, gamma, k))
        .collect::<Result<Vec<_>>>()?;
    let summary = json!({
        "modes": s.modes.len(),
        "samples": times.len(),
        "max_relative_imaginary_part": max_imag,
        "discarded_tail_norm": p.discarded_tail_norm(),
        "norm_bounds": bounds,
    });
    out.json("solve_report.json", &summary)?;
    Ok(Outcome {
        stdout: json!({
            "modes": s.modes.len(),
            "max_relative_imaginary_part": max_imag,
            "discarded_tail_norm": p.discarded_tail_norm(),
        }),
        assertion_failed: max_imag > 1e-10,
    })
}

fn oracle_traces(p: &ProblemInstance) -> Result<Vec<Trace>> {
    use rayon::prelude::*;
    let (phi0, phi1) = p.resolved_data();
    (1..=p.operator.n_max())
        .into_par_iter()
        .map(|n| {
            let sym = ModeSymbol::for_mode(&p.operator, n, &p.kernel);
            integrate_mode(&sym, phi0.get(n), phi1.get(n), &p.forcing, p.horizon, p.dt)
                .map_err(|e| e.at_mode(n))
        })
        .collect()
}

/// Indices of the trace nearest to each output sample time.
fn sample_indices(trace: &Trace, times: &[f64]) -> Vec<usize> {
    let h = trace.step();
    times
        .iter()
        .map(|t| ((t / h).round() as usize).min(trace.len() - 1))
        .collect()
}

fn run_oracle(p: &ProblemInstance, out: &mut Emitter, dump_state: bool) -> Result<Outcome> {
    let traces = oracle_traces(p)?;
    let times = sample_times(p);
    out.csv("oracle.csv", "t,n,u,u_t", |w| {
        writeln!(w, "t,n,u,u_t")?;
        let mut count = 0;
        for (k, _) in times.iter().enumerate() {
            for tr in &traces {
                let i = sample_indices(tr, &times)[k];
                writeln!(w, "{},{},{},{}", tr.t[i], tr.n, tr.u[i], tr.v[i])?;
                count += 1;
            }
        }
        Ok(count)
    })?;
    if dump_state {
        for tr in &traces {
            let mut header = String::from("t,u,v");
            for k in 1..=tr.w.len() {
                header.push_str(&format!(",w_{k}"));
            }
            out.csv(&format!("state_n{}.csv", tr.n), &header, |w| {
                tr.write_csv(w)
            })?;
        }
    }
    Ok(Outcome {
        stdout: json!({
            "modes": traces.len(),
            "steps": traces.first().map_or(0, |t| t.len() - 1),
        }),
        assertion_failed: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ModeDiff {
    n: usize,
    max_abs_diff: f64,
    argmax_t: f64,
}

fn run_compare(p: &ProblemInstance, out: &mut Emitter, dump_state: bool) -> Result<Outcome> {
    let report = full_spectrum(&p.operator, &p.kernel)?;
    let (phi0, phi1) = p.resolved_data();
    let s = full_series(&report, &phi0, &phi1, &p.forcing)?;
    let traces = oracle_traces(p)?;
    let per_mode = traces
        .iter()
        .zip(&s.modes)
        .map(|(tr, m)| {
            let mut diff = ModeDiff {
                n: tr.n,
                max_abs_diff: 0.0,
                argmax_t: 0.0,
            };
            for (&t, &u) in tr.t.iter().zip(&tr.u) {
                let d = (m.eval_complex(t, 0)?.re - u).abs();
                if d > diff.max_abs_diff {
                    diff.max_abs_diff = d;
                    diff.argmax_t = t;
                }
            }
            Ok(diff)
        })
        .collect::<Result<Vec<_>>>()?;
    let max_abs_diff = per_mode.iter().map(|d| d.max_abs_diff).fold(0.0, f64::max);
    let pass = max_abs_diff <= COMPARE_TOL;
    out.json(
        "compare_report.json",
        &json!({
            "dt": p.dt,
            "horizon": p.horizon,
            "tolerance": COMPARE_TOL,
            "max_abs_diff": max_abs_diff,
            "pass": pass,
            "per_mode": per_mode,
        }),
    )?;
    if dump_state {
        for tr in &traces {
            let mut header = String::from("t,u,v");
            for k in 1..=tr.w.len() {
                header.push_str(&format!(",w_{k}"));
            }
            out.csv(&format!("state_n{}.csv", tr.n), &header, |w| {
                tr.write_csv(w)
            })?;
        }
    }
    Ok(Outcome {
        stdout: json!({ "max_abs_diff": max_abs_diff, "pass": pass }),
        assertion_failed: !pass,
    })
}

fn run_estimates(p: &ProblemInstance, out: &mut Emitter) -> Result<Outcome> {
    let gamma_star = contraction_threshold(&p.kernel, &p.operator)?;
    let gamma = p.gamma.unwrap_or(gamma_star + 1.0);
    let grid = LambdaGrid::standard(gamma, 101, 101);
    let lemma = lemma_bound_report(&p.kernel, &p.operator, &grid, gamma)?;
    let window = memory_decay_window(&p.kernel, &p.operator);
    let decay = if p.kernel.is_empty() {
        None
    } else {
        Some(memory_decay_exponent(&p.kernel, &p.operator, window, 9))
    };
    let ratio = solvability_ratio(p, gamma)?;
    let family = empirical_d(
        &p.kernel,
        &p.operator,
        gamma,
        p.problems,
        p.seed,
        p.horizon.max(10.0),
        p.step,
    )?;
    let pass = lemma.hard_bounds_hold();
    let report = json!({
        "gamma_star": gamma_star,
        "gamma": gamma,
        "bounds": {
            "resolvent": lemma.resolvent,
            "smoothing": lemma.smoothing,
            "kernel_k": lemma.kernel_k,
            "kernel_q": lemma.kernel_q,
            "decay_rates": lemma.decay_rates,
            "memory_operator": lemma.memory_operator,
        },
        "memory_contraction_re": lemma.memory_contraction_re,
        "first_violation": lemma.first_violation,
        "memory_decay": { "window": [window.0, window.1], "exponent": decay },
        "solvability": ratio,
        "empirical_d": {
            "count": family.count,
            "max_ratio": family.max_ratio,
            "mean_ratio": family.mean_ratio,
        },
    });
    out.json("estimates_report.json", &report)?;
    out.csv("solvability_family.csv", "problem,ratio", |w| {
        writeln!(w, "problem,ratio")?;
        for (i, r) in family.ratios.iter().enumerate() {
            writeln!(w, "{i},{r}")?;
        }
        Ok(family.ratios.len())
    })?;
    Ok(Outcome {
        stdout: json!({
            "gamma_star": gamma_star,
            "gamma": gamma,
            "hard_bounds_hold": pass,
            "empirical_d": family.max_ratio,
        }),
        assertion_failed: !pass,
    })
}

/// Runs `command` on the problem in `config`, writing into `out_dir`.
pub fn execute(
    command: Command,
    config: &Path,
    out_dir: &Path,
    dump_state: bool,
) -> Result<Outcome> {
    let p = ProblemInstance::load(config)?;
    let mut out = Emitter::new(out_dir)?;
    let (name, outcome) = match command {
        Command::Stability => ("stability", run_stability(&p, &mut out)?),
        Command::Spectrum => ("spectrum", run_spectrum(&p, &mut out)?),
        Command::Solve => ("solve", run_solve(&p, &mut out)?),
        Command::Oracle => ("oracle", run_oracle(&p, &mut out, dump_state)?),
        Command::Compare => ("compare", run_compare(&p, &mut out, dump_state)?),
        Command::Estimates => ("estimates", run_estimates(&p, &mut out)?),
    };
    out.finish(name)?;
    Ok(outcome)
}

/// Exit code for a failed run: 1 for bad input, 2 for failed checks.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. }
        | Error::Json(_)
        | Error::Io(_)
        | Error::InvalidKernel(_)
        | Error::InvalidOperator(_)
        | Error::InvalidForcing(_)
        | Error::RequiresZeroB(_)
        | Error::InadmissibleProblem(_)
        | Error::DimensionMismatch { .. }
        | Error::ModelMismatch
        | Error::StepSizeTooLarge { .. } => 1,
        _ => 2,
    }
}

/// Machine-readable error record for stderr.
pub fn error_json(err: &Error) -> serde_json::Value {
    let mut v = json!({
        "error": err.kind(),
        "message": err.to_string(),
        "exit_code": exit_code(err),
    });
    if let Error::Config { line, .. } = err {
        v["line"] = json!(line);
    }
    v
}
