//! Instance and result files.
//!
//! Instances are UTF-8 JSON objects discriminated by `"kind"`; every array
//! is flat row-major. Results are written as canonical JSON (sorted keys,
//! floats as `%.17g`) so reruns are byte-identical. Plot data goes to CSV.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::arrays::{InteractionArray, LayeredInteraction, LayeredRArray, RArray};
use crate::csp::{Constraint, Formula};
use crate::error::{ensure, Error, Result};
use crate::homdensity::{DecoratedTemplate, TemplateEdge};
use crate::qap::{CostFunction, Norm};
use crate::sampling::{Coordinate, FullStepGraphon, StepKernel};

/// Interaction over `[q]^r`: real `values`, or with `color_set` one row of
/// `values` per cell giving the coefficient at each color.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color_set: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layers: Option<Vec<InteractionFile>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerFile {
    pub label: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayFile {
    pub r: usize,
    pub k: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelFile {
    pub r: usize,
    pub masses: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostFile {
    Step { r: usize, masses: Vec<f64>, values: Vec<f64> },
    Triangular,
    Geometric { points: Vec<Vec<f64>>, norm: Norm },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateFile {
    pub k: usize,
    pub r: usize,
    pub edges: Vec<TemplateEdge>,
}

/// Raw instance file, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceFile {
    Rarray {
        r: usize,
        k: usize,
        values: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        interaction: Option<InteractionFile>,
    },
    Layered {
        r: usize,
        k: usize,
        layers: Vec<LayerFile>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        interaction: Option<InteractionFile>,
    },
    StepKernel {
        r: usize,
        masses: Vec<f64>,
        values: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        interaction: Option<InteractionFile>,
    },
    FullGraphon {
        r: usize,
        coordinates: Vec<Coordinate>,
        values: Vec<f64>,
    },
    Formula {
        n: usize,
        r: usize,
        q: usize,
        d: f64,
        constraints: Vec<Constraint>,
    },
    Qap {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        g: Option<ArrayFile>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        kernel: Option<KernelFile>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        j: Option<ArrayFile>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cost: Option<CostFile>,
    },
    Template {
        template: TemplateFile,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        graph: Option<ArrayFile>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        kernel: Option<KernelFile>,
    },
}

/// Validated instance.
#[derive(Debug, Clone, PartialEq)]
pub enum Instance {
    /// `rarray` and `layered` files.
    Array {
        w: LayeredRArray,
        j: Option<LayeredInteraction>,
    },
    Kernel {
        w: StepKernel,
        j: Option<InteractionArray>,
    },
    FullGraphon(FullStepGraphon),
    Formula(Formula),
    Qap {
        g: Option<RArray>,
        kernel: Option<StepKernel>,
        j: Option<RArray>,
        cost: Option<CostFunction>,
    },
    Template {
        f: DecoratedTemplate,
        graph: Option<RArray>,
        kernel: Option<StepKernel>,
    },
}

impl Instance {
    pub fn kind(&self) -> &'static str {
        match self {
            Instance::Array { .. } => "array",
            Instance::Kernel { .. } => "step_kernel",
            Instance::FullGraphon(_) => "full_graphon",
            Instance::Formula(_) => "formula",
            Instance::Qap { .. } => "qap",
            Instance::Template { .. } => "template",
        }
    }
}

fn interaction(file: &InteractionFile, r: usize) -> Result<InteractionArray> {
    ensure!(file.layers.is_none(), Argument, "nested interaction layers are not allowed");
    let q = file.q.ok_or_else(|| Error::Argument("interaction needs \"q\"".into()))?;
    let values = file.values.clone().ok_or_else(|| Error::Argument("interaction needs \"values\"".into()))?;
    match &file.color_set {
        None => InteractionArray::real(q, r, values),
        Some(colors) => InteractionArray::color_table(q, r, colors.clone(), values),
    }
}

fn layered_interaction(file: &InteractionFile, labels: &[String], r: usize) -> Result<LayeredInteraction> {
    match &file.layers {
        None => {
            ensure!(labels.len() == 1, Dimension, "{} array layers but a single interaction", labels.len());
            LayeredInteraction::new(labels.to_vec(), vec![interaction(file, r)?])
        }
        Some(layers) => {
            let q = file.q;
            let mut out = Vec::with_capacity(layers.len());
            let mut names = Vec::with_capacity(layers.len());
            for l in layers {
                let mut l = l.clone();
                if l.q.is_none() {
                    l.q = q;
                }
                names.push(l.label.clone().ok_or_else(|| Error::Argument("interaction layer needs \"label\"".into()))?);
                l.label = None;
                out.push(interaction(&l, r)?);
            }
            LayeredInteraction::new(names, out)
        }
    }
}

fn array(f: &ArrayFile) -> Result<RArray> {
    RArray::new(f.r, f.k, f.values.clone())
}

fn kernel(f: &KernelFile) -> Result<StepKernel> {
    StepKernel::new(f.r, f.masses.clone(), f.values.clone())
}

impl InstanceFile {
    pub fn validate(&self) -> Result<Instance> {
        Ok(match self {
            InstanceFile::Rarray { r, k, values, interaction: i } => {
                let w = LayeredRArray::single(RArray::new(*r, *k, values.clone())?);
                let j = i.as_ref().map(|i| layered_interaction(i, w.labels(), *r)).transpose()?;
                Instance::Array { w, j }
            }
            InstanceFile::Layered { r, k, layers, interaction: i } => {
                let labels = layers.iter().map(|l| l.label.clone()).collect();
                let arrays = layers.iter().map(|l| RArray::new(*r, *k, l.values.clone())).collect::<Result<_>>()?;
                let w = LayeredRArray::new(labels, arrays)?;
                let j = i.as_ref().map(|i| layered_interaction(i, w.labels(), *r)).transpose()?;
                Instance::Array { w, j }
            }
            InstanceFile::StepKernel { r, masses, values, interaction: i } => Instance::Kernel {
                w: StepKernel::new(*r, masses.clone(), values.clone())?,
                j: i.as_ref().map(|i| interaction(i, *r)).transpose()?,
            },
            InstanceFile::FullGraphon { r, coordinates, values } => {
                Instance::FullGraphon(FullStepGraphon::new(*r, coordinates.clone(), values.clone())?)
            }
            InstanceFile::Formula { n, r, q, d, constraints } => {
                Instance::Formula(Formula::new(*n, *r, *q, *d, constraints.clone())?)
            }
            InstanceFile::Qap { g, kernel: kf, j, cost } => Instance::Qap {
                g: g.as_ref().map(array).transpose()?,
                kernel: kf.as_ref().map(kernel).transpose()?,
                j: j.as_ref().map(array).transpose()?,
                cost: cost
                    .as_ref()
                    .map(|c| -> Result<CostFunction> {
                        Ok(match c {
                            CostFile::Step { r, masses, values } => {
                                CostFunction::Step(StepKernel::new(*r, masses.clone(), values.clone())?)
                            }
                            CostFile::Triangular => CostFunction::Triangular,
                            CostFile::Geometric { points, norm } => {
                                let cf = CostFunction::Geometric { points: points.clone(), norm: *norm };
                                cf.as_step_kernel()?;
                                cf
                            }
                        })
                    })
                    .transpose()?,
            },
            InstanceFile::Template { template, graph, kernel: kf } => {
                ensure!(
                    graph.is_some() != kf.is_some(),
                    Argument,
                    "template instance needs exactly one host: \"graph\" or \"kernel\""
                );
                Instance::Template {
                    f: DecoratedTemplate::new(template.k, template.r, template.edges.clone())?,
                    graph: graph.as_ref().map(array).transpose()?,
                    kernel: kf.as_ref().map(kernel).transpose()?,
                }
            }
        })
    }
}

pub fn parse_instance(text: &str) -> Result<Instance> {
    serde_json::from_str::<InstanceFile>(text)?.validate()
}

pub fn read_instance(path: &Path) -> Result<Instance> {
    let text = std::fs::read_to_string(path)?;
    parse_instance(&text)
}

/// `%.17g`: shortest of fixed and scientific notation with 17 significant
/// digits, trailing zeros removed.
pub fn format_g17(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    let strip = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-4..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        strip(&format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", strip(mantissa), exp.abs())
    }
}

/// Canonical JSON: object keys sorted, no whitespace, floats as `%.17g`,
/// non-finite floats as `null`.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&v, &mut out);
    out.push('\n');
    Ok(out)
}

fn write_value(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else {
                out.push_str(&format_g17(n.as_f64().unwrap()));
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).unwrap()),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(key).unwrap());
                out.push(':');
                write_value(&map[key], out);
            }
            out.push('}');
        }
    }
}

pub fn write_canonical<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_canonical_json(value)?)?;
    Ok(())
}

/// A CSV table; floats are written as `%.17g`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<CsvCell>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CsvCell {
    Int(i64),
    Float(f64),
    Text(String),
    Empty,
}

impl CsvCell {
    fn render(&self) -> String {
        match self {
            CsvCell::Int(i) => i.to_string(),
            CsvCell::Float(x) => format_g17(*x),
            CsvCell::Text(s) => s.clone(),
            CsvCell::Empty => String::new(),
        }
    }
}

impl CsvTable {
    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(&self.header).map_err(csv_err)?;
        for row in &self.rows {
            ensure!(
                row.len() == self.header.len(),
                Dimension,
                "CSV row has {} cells, header {}",
                row.len(),
                self.header.len()
            );
            w.write_record(row.iter().map(CsvCell::render)).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()?)?;
        Ok(())
    }
}
