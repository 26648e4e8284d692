//! File formats: instance documents, solve results and convergence traces.
//!
//! Instances are JSON objects mirroring [`InstanceData`] with an optional
//! `parking` member carrying the generator inputs, so a parking instance can
//! be re-evaluated under the continuous model. Floats are written in shortest
//! round-trip form and parsed exactly, so write-then-read is bit-identical.
//!
//! Result documents are JSON with every float at 17 significant digits.
//! Traces are whitespace-separated text with one header row.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bnb::{SolveReport, TracePoint};
use crate::error::{Error, Result};
use crate::instances::{CustomerProfile, ParkingParams};
use crate::model::{Alternative, InstanceData, LinearConstraints, MixedLogitInstance, PriceVector};

/// Generator inputs of a parking instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParkingSource {
    pub params: ParkingParams,
    pub profiles: Vec<CustomerProfile>,
    pub n_grid: usize,
}

/// A loaded instance document.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceFile {
    pub instance: MixedLogitInstance,
    pub parking: Option<ParkingSource>,
}

impl From<MixedLogitInstance> for InstanceFile {
    fn from(instance: MixedLogitInstance) -> Self {
        Self { instance, parking: None }
    }
}

// Field-for-field copy of `InstanceData` so parse errors keep their position.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDocument {
    alternatives: Vec<Alternative>,
    customers: usize,
    classes: usize,
    price_coef: Vec<f64>,
    exo_utility: Vec<f64>,
    class_weight: Vec<f64>,
    price_lb: Vec<f64>,
    price_ub: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    constraints: Option<LinearConstraints>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    parking: Option<ParkingSource>,
}

fn parse_error(e: serde_json::Error) -> Error {
    let msg = e.to_string();
    // serde_json appends its own " at line X column Y".
    let msg = msg.split(" at line ").next().unwrap_or(&msg);
    Error::Parse(format!("line {}, column {}: {msg}", e.line(), e.column()))
}

pub fn parse_instance(text: &str) -> Result<InstanceFile> {
    let doc: InstanceDocument = serde_json::from_str(text).map_err(parse_error)?;
    let instance = MixedLogitInstance::new(InstanceData {
        alternatives: doc.alternatives,
        customers: doc.customers,
        classes: doc.classes,
        price_coef: doc.price_coef,
        exo_utility: doc.exo_utility,
        class_weight: doc.class_weight,
        price_lb: doc.price_lb,
        price_ub: doc.price_ub,
        constraints: doc.constraints,
    })?;
    Ok(InstanceFile {
        instance,
        parking: doc.parking,
    })
}

pub fn instance_to_string(file: &InstanceFile) -> String {
    let d = file.instance.data().clone();
    let doc = InstanceDocument {
        alternatives: d.alternatives,
        customers: d.customers,
        classes: d.classes,
        price_coef: d.price_coef,
        exo_utility: d.exo_utility,
        class_weight: d.class_weight,
        price_lb: d.price_lb,
        price_ub: d.price_ub,
        constraints: d.constraints,
        parking: file.parking.clone(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("instance documents always serialize");
    s.push('\n');
    s
}

pub fn read_instance(path: &Path) -> Result<InstanceFile> {
    let text = fs::read_to_string(path)?;
    parse_instance(&text).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn write_instance(file: &InstanceFile, path: &Path) -> Result<()> {
    fs::write(path, instance_to_string(file))?;
    Ok(())
}

/// JSON formatter writing floats at 17 significant digits.
struct FullPrecision;

impl serde_json::ser::Formatter for FullPrecision {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

/// Serializes `value` as JSON with full-precision floats. Non-finite floats
/// become `null`.
pub fn to_json_full_precision<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("result documents always serialize");
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FullPrecision);
    v.serialize(&mut ser).expect("writing to a Vec cannot fail");
    let mut s = String::from_utf8(out).expect("JSON is UTF-8");
    s.push('\n');
    s
}

/// Named price of one priced alternative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedPrice {
    pub alternative: String,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionEntry {
    pub prices: Vec<f64>,
    pub value: f64,
}

/// Result document of a global solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: String,
    pub prices: Vec<NamedPrice>,
    pub value: f64,
    pub upper_bound: f64,
    pub gap: f64,
    pub nodes_processed: usize,
    pub nodes_explored_per_iteration: Vec<usize>,
    pub solutions: Vec<SolutionEntry>,
}

fn named_prices(inst: &MixedLogitInstance, p: &PriceVector) -> Vec<NamedPrice> {
    inst.priced_alternatives()
        .iter()
        .zip(p.iter())
        .map(|(&i, &price)| NamedPrice {
            alternative: inst.alternatives()[i].name.clone(),
            price,
        })
        .collect()
}

impl SolveResult {
    pub fn from_report(inst: &MixedLogitInstance, report: &SolveReport) -> Self {
        Self {
            status: report.status.as_str().to_string(),
            prices: named_prices(inst, &report.incumbent),
            value: report.incumbent_value,
            upper_bound: report.global_upper_bound,
            gap: report.gap,
            nodes_processed: report.nodes_processed,
            nodes_explored_per_iteration: report.nodes_explored_per_iteration.clone(),
            solutions: report
                .solutions
                .iter()
                .map(|(p, v)| SolutionEntry {
                    prices: p.0.clone(),
                    value: *v,
                })
                .collect(),
        }
    }
}

/// Result document of a multi-start local search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalResult {
    pub prices: Vec<NamedPrice>,
    pub value: f64,
    /// Value reached from each start, in start order.
    pub start_values: Vec<f64>,
}

impl LocalResult {
    pub fn new(inst: &MixedLogitInstance, best: &PriceVector, value: f64, start_values: Vec<f64>) -> Self {
        Self {
            prices: named_prices(inst, best),
            value,
            start_values,
        }
    }
}

pub const TRACE_HEADER: &str = "wall_time incumbent_value global_upper_bound open_nodes max_box_radius";

/// Renders a trace. With `zero_times` the time column is written as zero,
/// which makes traces of identical runs byte-identical.
pub fn trace_to_string(trace: &[TracePoint], zero_times: bool) -> String {
    let mut s = String::with_capacity(96 * (trace.len() + 1));
    s.push_str(TRACE_HEADER);
    s.push('\n');
    for t in trace {
        let time = if zero_times { 0.0 } else { t.wall_time };
        writeln!(
            s,
            "{time:.16e} {:.16e} {:.16e} {} {:.16e}",
            t.incumbent_value, t.global_upper_bound, t.open_nodes, t.max_box_radius
        )
        .expect("writing to a String cannot fail");
    }
    s
}

pub fn parse_trace(text: &str) -> Result<Vec<TracePoint>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == TRACE_HEADER => {}
        _ => return Err(Error::Parse("line 1: missing trace header".into())),
    }
    let mut out = Vec::new();
    for (k, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |what: &str| Error::Parse(format!("line {}: {what}", k + 1));
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 5 {
            return Err(bad("expected 5 columns"));
        }
        let num = |c: &str| c.parse::<f64>().map_err(|_| bad("malformed number"));
        out.push(TracePoint {
            wall_time: num(cols[0])?,
            incumbent_value: num(cols[1])?,
            global_upper_bound: num(cols[2])?,
            open_nodes: cols[3].parse().map_err(|_| bad("malformed node count"))?,
            max_box_radius: num(cols[4])?,
        });
    }
    Ok(out)
}

pub const SURFACE_HEADER: &str = "p1 p2 revenue";

/// Revenue on a `resolution x resolution` grid over the box of a
/// two-product instance, as text rows `p1 p2 revenue`. Points violating the
/// linear constraints are skipped.
pub fn surface_to_string(inst: &MixedLogitInstance, resolution: usize) -> Result<String> {
    if inst.num_priced() != 2 {
        return Err(Error::Config(format!(
            "surface needs exactly 2 priced alternatives, instance has {}",
            inst.num_priced()
        )));
    }
    if resolution < 2 {
        return Err(Error::Config("surface resolution must be at least 2".into()));
    }
    let (lb, ub) = (inst.price_lb(), inst.price_ub());
    let at = |j: usize, k: usize| {
        if k + 1 == resolution {
            ub[j]
        } else {
            lb[j] + (ub[j] - lb[j]) * k as f64 / (resolution - 1) as f64
        }
    };
    let mut s = String::new();
    s.push_str(SURFACE_HEADER);
    s.push('\n');
    for a in 0..resolution {
        for b in 0..resolution {
            let p = [at(0, a), at(1, b)];
            if !inst.is_feasible(&p, 0.0) {
                continue;
            }
            let v = inst.expected_revenue(&p)?;
            writeln!(s, "{:.16e} {:.16e} {v:.16e}", p[0], p[1]).expect("writing to a String cannot fail");
        }
    }
    Ok(s)
}
