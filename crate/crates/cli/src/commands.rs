use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use serde::Serialize;
use serde_json::json;

use proctensor::instrument::{self, dual_frame, validate, Instrument, SamplingMeasure};
use proctensor::linalg::{eigvalsh, fidelity};
use proctensor::memory::{memory_strength, process_cmi, projective_survey, quantum_cmi, MemoryReport};
use proctensor::process::{check_causality, cp_divisibility_check, non_markovianity};
use proctensor::recovery::{deviation_scan, noisy_replay, recover, NoiseModel, ScanConvention, ScanGrid, ScanResult};
use proctensor::tomo::{self, bootstrap, reconstruct, simulate_counts, CountsTable, Settings, Statistic};
use proctensor::walk::{self, circuits, WalkCircuit};
use proctensor::ComplexMatrix;

use crate::catalog::{aggregate_refs, event_refs, ProcessName};
use crate::report::{qr, Check, Quantity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Rendered command output plus the tolerance checks it carries.
pub struct Emitted {
    pub body: String,
    pub checks: Vec<Check>,
}

impl Emitted {
    pub fn json<T: Serialize>(value: &T) -> Result<Self> {
        Ok(Self { body: serde_json::to_string_pretty(value)? + "\n", checks: Vec::new() })
    }

    pub fn csv(body: String) -> Self {
        Self { body, checks: Vec::new() }
    }

    pub fn with_checks(mut self, checks: Vec<Check>) -> Self {
        self.checks = checks;
        self
    }
}

fn json_only(format: Option<Format>, what: &str) -> Result<()> {
    if format == Some(Format::Csv) {
        bail!("{what} has no tabular form; use --format json");
    }
    Ok(())
}

pub fn csv_table<R: Serialize>(rows: impl IntoIterator<Item = R>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Built-in name or a JSON file `{"dim": d, "elements": [matrix, ...]}`.
pub fn load_instrument(name: Option<&str>, file: Option<&Path>) -> Result<(String, Instrument)> {
    match (name, file) {
        (Some(n), None) => Ok((n.to_string(), instrument::by_name(n)?)),
        (None, Some(f)) => {
            let inst: Instrument = serde_json::from_str(&read_text(f)?).context("parsing instrument JSON")?;
            Ok((f.display().to_string(), inst))
        }
        (None, None) => bail!("give --name or --file"),
        (Some(_), Some(_)) => bail!("--name and --file are mutually exclusive"),
    }
}

// ---- process ----

pub fn process_build(p: ProcessName, include_matrix: bool, format: Option<Format>) -> Result<Emitted> {
    json_only(format, "process build")?;
    let t = p.tensor()?;
    let spectrum = eigvalsh(t.matrix())?;
    #[derive(Serialize)]
    struct Out<'a> {
        process: ProcessName,
        layout: &'a proctensor::LegLayout,
        trace: f64,
        min_eigenvalue: f64,
        causality: proctensor::process::CausalityReport,
        cp_divisibility: proctensor::process::CpDivisibilityReport,
        non_markovianity: Quantity,
        #[serde(skip_serializing_if = "Option::is_none")]
        matrix: Option<&'a ComplexMatrix>,
    }
    Emitted::json(&Out {
        process: p,
        layout: t.layout(),
        trace: t.matrix().trace().re,
        min_eigenvalue: *spectrum.last().unwrap_or(&0.0),
        causality: check_causality(&t)?,
        cp_divisibility: cp_divisibility_check(&t)?,
        non_markovianity: qr(non_markovianity(&t)?, p.non_markovianity_refs()),
        matrix: include_matrix.then(|| t.matrix()),
    })
}

// ---- instrument ----

pub fn instrument_show(name: &str, inst: &Instrument, format: Option<Format>) -> Result<Emitted> {
    json_only(format, "instrument show")?;
    #[derive(Serialize)]
    struct El<'a> {
        label: &'a str,
        matrix: &'a ComplexMatrix,
    }
    let elements: Vec<El> = inst.elements().iter().map(|e| El { label: &e.label, matrix: &e.matrix }).collect();
    Emitted::json(&json!({ "instrument": name, "dim": inst.dim(), "elements": elements }))
}

pub fn instrument_validate(name: &str, inst: &Instrument, format: Option<Format>) -> Result<(Emitted, bool)> {
    json_only(format, "instrument validate")?;
    let report = validate(inst)?;
    let span = instrument::span_rank(inst)?;
    let valid = report.pass;
    let e = Emitted::json(&json!({ "instrument": name, "report": report, "span_rank": span }))?;
    Ok((e, valid))
}

pub fn instrument_dual(name: &str, inst: &Instrument, format: Option<Format>) -> Result<Emitted> {
    json_only(format, "instrument dual")?;
    let d = dual_frame(inst)?;
    Emitted::json(&json!({ "instrument": name, "gram_condition": d.gram_condition, "duals": d.duals }))
}

// ---- memory ----

#[derive(Serialize)]
pub struct EventOut {
    pub event: usize,
    pub probability: f64,
    pub mutual_information: Quantity,
    pub product_residual: f64,
}

#[derive(Serialize)]
pub struct MemoryOut {
    pub process: ProcessName,
    pub instrument: String,
    pub events: Vec<EventOut>,
    pub aggregate_uniform: Quantity,
    pub aggregate_weighted: f64,
    pub max_event: f64,
}

pub fn memory_report(p: ProcessName, inst_name: &str, inst: &Instrument) -> Result<(MemoryOut, MemoryReport)> {
    let r = memory_strength(&p.tensor()?, inst)?;
    let events = r
        .per_event
        .iter()
        .enumerate()
        .map(|(i, e)| EventOut {
            event: i,
            probability: e.probability,
            mutual_information: qr(e.mutual_information, event_refs(p, inst_name, i)),
            product_residual: e.product_residual,
        })
        .collect();
    let out = MemoryOut {
        process: p,
        instrument: inst_name.to_string(),
        events,
        aggregate_uniform: qr(r.aggregate_uniform, aggregate_refs(p, inst_name)),
        aggregate_weighted: r.aggregate_weighted,
        max_event: r.max_event,
    };
    Ok((out, r))
}

pub fn memory_strength_cmd(p: ProcessName, inst_name: &str, inst: &Instrument, format: Option<Format>) -> Result<Emitted> {
    let (out, _) = memory_report(p, inst_name, inst)?;
    match format.unwrap_or(Format::Json) {
        Format::Json => Emitted::json(&out),
        Format::Csv => {
            #[derive(Serialize)]
            struct Row {
                event: usize,
                probability: f64,
                mutual_information: f64,
                product_residual: f64,
            }
            let rows = out.events.iter().map(|e| Row {
                event: e.event,
                probability: e.probability,
                mutual_information: e.mutual_information.value,
                product_residual: e.product_residual,
            });
            Ok(Emitted::csv(csv_table(rows)?))
        }
    }
}

#[derive(Serialize)]
pub struct SurveyOut {
    pub process: ProcessName,
    pub measure: SamplingMeasure,
    pub cutoff: f64,
    pub samples: usize,
    pub seed: u64,
    pub below: usize,
    pub fraction: Quantity,
}

pub fn survey(p: ProcessName, cutoff: f64, samples: usize, seed: u64, measure: SamplingMeasure) -> Result<SurveyOut> {
    let r = projective_survey(&p.tensor()?, cutoff, samples, seed, measure)?;
    let refs = if p == ProcessName::Lambda && measure == SamplingMeasure::Haar {
        vec![crate::report::theory(0.288)]
    } else {
        Vec::new()
    };
    Ok(SurveyOut { process: p, measure, cutoff, samples, seed, below: r.below, fraction: qr(r.fraction, refs) })
}

// ---- states ----

pub fn states_emit(p: ProcessName, format: Option<Format>) -> Result<Emitted> {
    let rho = p.state();
    match format.unwrap_or(Format::Json) {
        Format::Json => Emitted::json(&json!({ "state": p, "dims": p.input_dims(), "matrix": rho })),
        Format::Csv => {
            #[derive(Serialize)]
            struct Row {
                row: usize,
                col: usize,
                re: f64,
                im: f64,
            }
            let n = rho.rows();
            let rows = (0..n * n).map(|k| {
                let z = rho[(k / n, k % n)];
                Row { row: k / n, col: k % n, re: z.re, im: z.im }
            });
            Ok(Emitted::csv(csv_table(rows)?))
        }
    }
}

// ---- recover ----

pub fn recover_build(p: ProcessName, inst_name: &str, inst: &Instrument, format: Option<Format>) -> Result<Emitted> {
    json_only(format, "recover build")?;
    let rec = recover(&p.tensor()?, inst)?;
    let closed = (inst_name == p.blocking_instrument_name())
        .then(|| fidelity(rec.state(), &p.recovered_closed_form()))
        .transpose()?;
    Emitted::json(&json!({
        "process": p,
        "instrument": inst_name,
        "probabilities": rec.probabilities(),
        "duals": rec.dual().duals,
        "state": rec.state(),
        "fidelity_to_closed_form": closed.map(|f| qr(f, p.recovered_fidelity_refs())),
    }))
}

pub struct ScanRequest {
    pub process: ProcessName,
    pub instrument: String,
    pub convention: ScanConvention,
    pub grid: usize,
    pub phi: f64,
    pub psi: f64,
    pub noise: Option<NoiseModel>,
    pub seed: u64,
}

pub fn run_scan(req: &ScanRequest) -> Result<ScanResult> {
    let p = req.process;
    let inst = instrument::by_name(&req.instrument)?;
    let grid = ScanGrid::angles(req.grid, req.phi, req.psi);
    match req.noise {
        None => {
            let t = p.tensor()?;
            let rec = recover(&t, &inst)?;
            Ok(deviation_scan(&t, &rec, &grid, req.convention)?)
        }
        Some(n) => {
            let dims = p.input_dims();
            let gt = noisy_replay(&p.state(), &dims, n, req.seed)?;
            let gr = noisy_replay(&p.state(), &dims, n, req.seed.wrapping_add(1))?;
            let rec = recover(&p.build_from(&gr)?, &inst)?;
            Ok(deviation_scan(&p.build_from(&gt)?, &rec, &grid, req.convention)?)
        }
    }
}

pub fn recover_scan(req: &ScanRequest, format: Option<Format>) -> Result<Emitted> {
    let r = run_scan(req)?;
    match format.unwrap_or(Format::Csv) {
        Format::Csv => Ok(Emitted::csv(csv_table(r.points.iter())?)),
        Format::Json => {
            let at = r.points[r.argmax];
            Emitted::json(&json!({
                "process": req.process,
                "instrument": req.instrument,
                "convention": r.convention,
                "grid": req.grid,
                "noise": req.noise,
                "max_abs_diff": qr(r.max_abs_diff, req.process.scan_max_refs()),
                "argmax": at,
            }))
        }
    }
}

// ---- walk ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CircuitName {
    Theta,
    Tetra,
    ThetaTabulated,
    TetraTabulated,
    Trivial,
}

impl CircuitName {
    pub fn key(self) -> &'static str {
        match self {
            Self::Theta => "theta",
            Self::Tetra => "tetra",
            Self::ThetaTabulated => "theta-tabulated",
            Self::TetraTabulated => "tetra-tabulated",
            Self::Trivial => "trivial",
        }
    }
}

pub fn load_circuit(name: Option<CircuitName>, file: Option<&Path>) -> Result<(String, WalkCircuit)> {
    match (name, file) {
        (Some(n), None) => Ok((n.key().to_string(), circuits::by_name(n.key())?)),
        (None, Some(f)) => Ok((f.display().to_string(), WalkCircuit::from_json(&read_text(f)?)?)),
        (None, None) => bail!("give --circuit or --circuit-file"),
        (Some(_), Some(_)) => bail!("--circuit and --circuit-file are mutually exclusive"),
    }
}

pub fn walk_verify(circuit: &str, c: &WalkCircuit, target: &str, inputs: usize, seed: u64) -> Result<(serde_json::Value, bool)> {
    let t = instrument::by_name(target)?;
    let v = walk::verify(c, &t, inputs, seed)?;
    let pass = v.pass;
    Ok((json!({ "circuit": circuit, "target": target, "seed": seed, "verification": v }), pass))
}

// ---- tomo ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SettingFamily {
    /// Mutually unbiased bases (Paulis on qubits).
    Mub,
    /// Basis pairs, 7 per qutrit.
    Pairs,
}

pub fn settings_for(family: SettingFamily, dims: &[usize]) -> Settings {
    match family {
        SettingFamily::Mub => Settings::standard(dims),
        SettingFamily::Pairs => Settings::pairs(dims),
    }
}

pub fn counts_from(p: ProcessName, counts: Option<&Path>, shots: u64, seed: u64, family: SettingFamily) -> Result<CountsTable> {
    match counts {
        Some(path) => Ok(CountsTable::from_csv(&p.input_dims(), &read_text(path)?)?),
        None => Ok(simulate_counts(&p.state(), &settings_for(family, &p.input_dims()), shots, seed)?),
    }
}

pub fn tomo_simulate(counts: &CountsTable, format: Option<Format>) -> Result<Emitted> {
    match format.unwrap_or(Format::Csv) {
        Format::Csv => Ok(Emitted::csv(counts.to_csv())),
        Format::Json => Emitted::json(counts),
    }
}

pub fn tomo_reconstruct(p: ProcessName, counts: &CountsTable, format: Option<Format>) -> Result<Emitted> {
    json_only(format, "tomo reconstruct")?;
    let rho = reconstruct(counts)?;
    let f = fidelity(&rho, &p.state())?;
    Emitted::json(&json!({
        "state": p,
        "total_shots": counts.total_shots(),
        "settings": counts.labels.len(),
        "fidelity": qr(f, p.tomography_fidelity_refs()),
        "non_markovianity": qr(Statistic::NonMarkovianity.evaluate(&rho, &counts.dims)?, p.non_markovianity_refs()),
        "matrix": rho,
    }))
}

pub fn statistic_for(name: &str, p: ProcessName) -> Result<Statistic> {
    let reference = p.state();
    Ok(Statistic::by_name(name, Some(&reference))?)
}

pub fn tomo_bootstrap(
    p: ProcessName,
    counts: &CountsTable,
    statistic: &str,
    resamples: usize,
    seed: u64,
    format: Option<Format>,
) -> Result<Emitted> {
    json_only(format, "tomo bootstrap")?;
    let stat = statistic_for(statistic, p)?;
    let b = bootstrap(counts, resamples, &stat, seed)?;
    let refs = if statistic == "non-markovianity" { p.non_markovianity_refs() } else { Vec::new() };
    Emitted::json(&json!({
        "state": p,
        "statistic": statistic,
        "total_shots": counts.total_shots(),
        "resamples": b.resamples,
        "seed": seed,
        "estimate": qr(b.estimate, refs),
        "mean": b.mean,
        "stderr": b.stderr,
    }))
}

// ---- shared by presets ----

pub fn cmi_pair(p: ProcessName) -> Result<(f64, f64)> {
    Ok((quantum_cmi(&p.state(), p.input_dims())?, process_cmi(&p.tensor()?)?))
}

pub fn tomo_fidelity(p: ProcessName, shots: u64, seed: u64) -> Result<(CountsTable, f64)> {
    let c = simulate_counts(&p.state(), &Settings::standard(&p.input_dims()), shots, seed)?;
    let f = fidelity(&tomo::reconstruct(&c)?, &p.state())?;
    Ok((c, f))
}
