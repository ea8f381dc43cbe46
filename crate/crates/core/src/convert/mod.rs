//! Corpus ingestion: source formats to unified mechanism records.
//!
//! Supported inputs:
//! * `flower`: CSV of mapped elementary reactions `R>>P`, rows grouped by a
//!   reaction id column; arrows are inferred per row.
//! * `mech-uspto`: JSONL of mapped reactants plus one flat arrow list per
//!   reaction; the list is segmented into stable steps.
//! * `pmechdb`: CSV of `R>>P` SMIRKS plus an arrow code per elementary step;
//!   the product side is only used as a cross-check.

mod emit;
mod infer;
mod sources;

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::Engine;
use crate::mechanism::{Mechanism, MechanismRecord};
use crate::par::{self, Exec};

pub use emit::{write_flower, write_mech_uspto, write_pmechdb};
pub use infer::{chain_order, infer_arrows, segment_arrows, InferOptions, Inferred};
pub use sources::{from_smirks_arrowcode, parse_arrow_code, ArrowKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceFormat {
    Flower,
    MechUspto,
    Pmechdb,
}

impl SourceFormat {
    pub fn name(self) -> &'static str {
        match self {
            SourceFormat::Flower => "flower",
            SourceFormat::MechUspto => "mech-uspto",
            SourceFormat::Pmechdb => "pmechdb",
        }
    }
}

impl std::str::FromStr for SourceFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<SourceFormat, String> {
        match s {
            "flower" | "mapped-pair" => Ok(SourceFormat::Flower),
            "mech-uspto" | "reactant-plus-arrows" => Ok(SourceFormat::MechUspto),
            "pmechdb" | "smirks-plus-arrowcode" => Ok(SourceFormat::Pmechdb),
            other => Err(format!("unknown source format `{other}`")),
        }
    }
}

/// Column and field names for one source format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdapterConfig {
    pub format: SourceFormat,
    /// CSV column or JSON field with the reaction id (rows without one get
    /// `line-N`).
    pub id_field: String,
    /// Mapped reaction SMILES (`flower`) or SMIRKS (`pmechdb`).
    pub reaction_field: String,
    /// Mapped reactant SMILES (`mech-uspto`).
    pub reactants_field: String,
    /// Arrow list (`mech-uspto`) or arrow code (`pmechdb`).
    pub arrows_field: String,
    /// Optional product SMILES used as a cross-check (`mech-uspto`).
    pub products_field: String,
    /// Source arrow type names (`mech-uspto` objects).
    pub arrow_types: BTreeMap<String, ArrowKind>,
    pub infer: InferSettings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct InferSettings {
    pub max_arrows: usize,
    pub max_pool: usize,
}

impl Default for InferSettings {
    fn default() -> Self {
        let d = InferOptions::default();
        InferSettings {
            max_arrows: d.max_arrows,
            max_pool: d.max_pool,
        }
    }
}

impl Default for AdapterConfig {
    fn default() -> Self {
        AdapterConfig::for_format(SourceFormat::Flower)
    }
}

impl AdapterConfig {
    pub fn for_format(format: SourceFormat) -> AdapterConfig {
        let arrow_types = [
            ("attack", ArrowKind::Attack),
            ("nucleophilic_attack", ArrowKind::Attack),
            ("lone_pair_attack", ArrowKind::Attack),
            ("ionize", ArrowKind::Ionize),
            ("ionization", ArrowKind::Ionize),
            ("bond_cleavage", ArrowKind::Ionize),
            ("heterolysis", ArrowKind::Ionize),
            ("bond_attack", ArrowKind::BondAttack),
            ("pi_bond_attack", ArrowKind::BondAttack),
            ("sigma_bond_attack", ArrowKind::BondAttack),
            ("bond_shift", ArrowKind::BondAttack),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        let (id, reaction, arrows) = match format {
            SourceFormat::Flower => ("reaction_id", "rxn_smiles", ""),
            SourceFormat::MechUspto => ("id", "", "arrows"),
            SourceFormat::Pmechdb => ("reaction_id", "smirks", "arrow_code"),
        };
        AdapterConfig {
            format,
            id_field: id.into(),
            reaction_field: reaction.into(),
            reactants_field: "reactants".into(),
            arrows_field: arrows.into(),
            products_field: "products".into(),
            arrow_types,
            infer: InferSettings::default(),
        }
    }

    pub fn infer_options(&self) -> InferOptions {
        InferOptions {
            max_arrows: self.infer.max_arrows,
            max_pool: self.infer.max_pool,
            ..Default::default()
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConvertError {
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("SMILES: {0}")]
    Smiles(String),
    #[error("graph: {0}")]
    Graph(String),
    #[error("unmapped {element} on the {side} side")]
    UnmappedAtom { side: &'static str, element: String },
    #[error("reactant and product heavy-atom maps differ")]
    MapMismatch,
    #[error("map {map} changes element")]
    ElementMismatch { map: u32 },
    #[error("hydrogen count differs ({reactant} vs {product})")]
    HydrogenImbalance { reactant: usize, product: usize },
    #[error("no arrow set of size <= {bound} reproduces the product")]
    NoArrowSet { bound: usize },
    #[error("no stable prefix from arrow {offset}")]
    Segmentation { offset: usize },
    #[error("arrow references map {map}, which is not on the reactant side")]
    DanglingMap { map: u32 },
    #[error("unknown arrow type `{0}`")]
    UnknownArrowType(String),
    #[error("malformed arrow code `{0}`")]
    ArrowCode(String),
    #[error("step {step}: {reason}")]
    Apply { step: usize, reason: String },
    #[error("step {step} changes nothing")]
    NoOpStep { step: usize },
    #[error("products differ: expected {expected}, got {got}")]
    CrossCheck { expected: String, got: String },
}

impl ConvertError {
    /// Short machine-readable reason code.
    pub fn code(&self) -> &'static str {
        match self {
            ConvertError::Malformed(_) => "malformed",
            ConvertError::MissingField(_) => "missing_field",
            ConvertError::Smiles(_) => "smiles",
            ConvertError::Graph(_) => "graph",
            ConvertError::UnmappedAtom { .. } => "unmapped_atom",
            ConvertError::MapMismatch => "map_mismatch",
            ConvertError::ElementMismatch { .. } => "element_mismatch",
            ConvertError::HydrogenImbalance { .. } => "hydrogen_imbalance",
            ConvertError::NoArrowSet { .. } => "no_arrow_set",
            ConvertError::Segmentation { .. } => "segmentation",
            ConvertError::DanglingMap { .. } => "dangling_map",
            ConvertError::UnknownArrowType(_) => "unknown_arrow_type",
            ConvertError::ArrowCode(_) => "arrow_code",
            ConvertError::Apply { .. } => "apply",
            ConvertError::NoOpStep { .. } => "no_op_step",
            ConvertError::CrossCheck { .. } => "cross_check",
        }
    }
}

/// One input record (a CSV row or a JSONL line).
#[derive(Debug, Clone, PartialEq)]
pub struct SourceRecord {
    pub line: usize,
    pub reaction_id: String,
    pub fields: BTreeMap<String, serde_json::Value>,
}

impl SourceRecord {
    pub fn text(&self, field: &str) -> Result<&str, ConvertError> {
        self.fields
            .get(field)
            .and_then(serde_json::Value::as_str)
            .ok_or_else(|| ConvertError::MissingField(field.to_string()))
    }
}

/// A converted mechanism plus the source text length of each step.
#[derive(Debug, Clone, PartialEq)]
pub struct Converted {
    pub mechanism: Mechanism,
    pub source_lengths: Vec<usize>,
}

impl Converted {
    pub fn record(&self, format: SourceFormat) -> MechanismRecord {
        let mut rec = self.mechanism.to_record(format.name());
        if let serde_json::Value::Object(meta) = &mut rec.meta {
            meta.insert(
                "source_lengths".into(),
                serde_json::json!(self.source_lengths),
            );
        }
        rec
    }
}

/// Sidecar entry for a record that could not be converted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub line: usize,
    pub reaction_id: String,
    pub reason: String,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversionSummary {
    pub records: usize,
    pub converted: usize,
    pub rejected: usize,
    pub steps: usize,
    pub reasons: BTreeMap<String, usize>,
}

impl ConversionSummary {
    pub fn yield_fraction(&self) -> f64 {
        if self.records == 0 {
            0.0
        } else {
            self.converted as f64 / self.records as f64
        }
    }
}

/// Converts one group of rows sharing a reaction id.
pub fn convert_group(
    engine: &Engine,
    config: &AdapterConfig,
    group: &[SourceRecord],
) -> Result<Converted, ConvertError> {
    match config.format {
        SourceFormat::Flower => sources::convert_flower(engine, config, group),
        SourceFormat::MechUspto => sources::convert_mech_uspto(engine, config, group),
        SourceFormat::Pmechdb => sources::convert_pmechdb(engine, config, group),
    }
}

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("I/O: {0}")]
    Io(#[from] io::Error),
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: {reason}")]
    Json { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy)]
pub struct StreamOptions {
    /// Reactions converted per parallel batch.
    pub chunk: usize,
    pub exec: Exec,
}

impl Default for StreamOptions {
    fn default() -> Self {
        StreamOptions {
            chunk: 1024,
            exec: Exec::default(),
        }
    }
}

/// Reads every record of `input` and groups consecutive rows by id.
/// `pmechdb` rows are never grouped: each one is an elementary step.
pub fn read_groups(
    config: &AdapterConfig,
    input: impl BufRead,
) -> Result<Vec<Vec<SourceRecord>>, StreamError> {
    let records = match config.format {
        SourceFormat::MechUspto => sources::read_jsonl(config, input)?,
        SourceFormat::Flower | SourceFormat::Pmechdb => sources::read_csv(config, input)?,
    };
    let mut groups: Vec<Vec<SourceRecord>> = Vec::new();
    for rec in records {
        let join = config.format == SourceFormat::Flower
            && groups
                .last()
                .is_some_and(|g| g[0].reaction_id == rec.reaction_id);
        if join {
            groups.last_mut().expect("checked").push(rec);
        } else {
            groups.push(vec![rec]);
        }
    }
    Ok(groups)
}

/// Converts `input` to unified JSONL on `output`, writing rejects to
/// `rejects`. Output order follows input order.
pub fn convert_stream(
    engine: &Engine,
    config: &AdapterConfig,
    input: impl BufRead,
    mut output: impl Write,
    mut rejects: impl Write,
    opts: &StreamOptions,
) -> Result<ConversionSummary, StreamError> {
    let groups = read_groups(config, input)?;
    let mut summary = ConversionSummary::default();
    for chunk in groups.chunks(opts.chunk.max(1)) {
        let results = par::map(opts.exec, chunk, |g| convert_group(engine, config, g));
        for (group, result) in chunk.iter().zip(results) {
            summary.records += 1;
            match result {
                Ok(conv) => {
                    summary.converted += 1;
                    summary.steps += conv.mechanism.steps.len();
                    let line = serde_json::to_string(&conv.record(config.format))
                        .expect("record serializes");
                    writeln!(output, "{line}")?;
                }
                Err(err) => {
                    summary.rejected += 1;
                    *summary.reasons.entry(err.code().to_string()).or_insert(0) += 1;
                    let reject = Reject {
                        line: group[0].line,
                        reaction_id: group[0].reaction_id.clone(),
                        reason: err.code().to_string(),
                        detail: err.to_string(),
                    };
                    writeln!(
                        rejects,
                        "{}",
                        serde_json::to_string(&reject).expect("reject serializes")
                    )?;
                }
            }
        }
    }
    output.flush()?;
    rejects.flush()?;
    Ok(summary)
}

/// Reads unified JSONL records.
pub fn read_records(input: impl BufRead) -> Result<Vec<MechanismRecord>, StreamError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| StreamError::Json {
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}
