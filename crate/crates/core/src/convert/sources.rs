//! Per-format readers and converters.

use std::collections::{BTreeMap, HashSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{AdapterConfig, ConvertError, Converted, SourceRecord, StreamError};
use crate::engine::{Engine, State};
use crate::mechanism::{step_on, Mechanism};
use crate::mechsmiles::{Arrow, MechStep};
use crate::molgraph::{canonical_form, MolGraph};
use crate::smiles::parse_smiles;

/// Arrow categories a source type name can map onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrowKind {
    Attack,
    Ionize,
    BondAttack,
}

pub(super) fn read_csv(
    config: &AdapterConfig,
    input: impl BufRead,
) -> Result<Vec<SourceRecord>, StreamError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let headers = reader.headers()?.clone();
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let fields: BTreeMap<String, Value> = headers
            .iter()
            .zip(row.iter())
            .map(|(h, v)| (h.to_string(), Value::String(v.to_string())))
            .collect();
        let reaction_id = fields
            .get(&config.id_field)
            .and_then(Value::as_str)
            .filter(|s| !s.is_empty())
            .map_or_else(|| format!("line-{line}"), str::to_string);
        out.push(SourceRecord {
            line,
            reaction_id,
            fields,
        });
    }
    Ok(out)
}

pub(super) fn read_jsonl(
    config: &AdapterConfig,
    input: impl BufRead,
) -> Result<Vec<SourceRecord>, StreamError> {
    let mut out = Vec::new();
    for (i, text) in input.lines().enumerate() {
        let text = text?;
        let line = i + 1;
        if text.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&text).map_err(|e| StreamError::Json {
            line,
            reason: e.to_string(),
        })?;
        let Value::Object(obj) = value else {
            return Err(StreamError::Json {
                line,
                reason: "expected a JSON object".into(),
            });
        };
        let fields: BTreeMap<String, Value> = obj.into_iter().collect();
        let reaction_id = match fields.get(&config.id_field) {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => format!("line-{line}"),
        };
        out.push(SourceRecord {
            line,
            reaction_id,
            fields,
        });
    }
    Ok(out)
}

fn smiles(s: &str) -> Result<MolGraph, ConvertError> {
    parse_smiles(s).map_err(|e| ConvertError::Smiles(e.to_string()))
}

/// `R>>P` or `R>A>P`; agents are added to both sides.
fn split_reaction(text: &str) -> Result<(String, String), ConvertError> {
    let parts: Vec<&str> = text.trim().split('>').collect();
    let [r, a, p] = parts[..] else {
        return Err(ConvertError::Malformed(format!(
            "expected `R>>P`, got `{text}`"
        )));
    };
    let join = |x: &str| {
        if a.is_empty() {
            x.to_string()
        } else {
            format!("{x}.{a}")
        }
    };
    Ok((join(r), join(p)))
}

fn keys(g: &MolGraph) -> Vec<String> {
    let mut k: Vec<String> = g.split_components().iter().map(canonical_form).collect();
    k.sort();
    k
}

/// True when every key of `part` occurs in `whole` at least as often.
fn contains_all(whole: &[String], part: &[String]) -> bool {
    let mut pool = whole.to_vec();
    part.iter().all(|k| match pool.iter().position(|w| w == k) {
        Some(i) => {
            pool.swap_remove(i);
            true
        }
        None => false,
    })
}

pub(super) fn convert_flower(
    engine: &Engine,
    config: &AdapterConfig,
    group: &[SourceRecord],
) -> Result<Converted, ConvertError> {
    let opts = config.infer_options();
    let mut initial: Option<State> = None;
    let mut cur: Option<State> = None;
    let mut written: Vec<MechStep> = Vec::new();
    let mut lengths = Vec::new();
    let mut last_product = Vec::new();
    for (k, row) in group.iter().enumerate() {
        let rxn = row.text(&config.reaction_field)?;
        let (r, p) = split_reaction(rxn)?;
        let pg = smiles(&p)?;
        let inferred = super::infer_arrows(engine, &smiles(&r)?, &pg, &opts)?;
        if inferred.arrows.is_empty() {
            return Err(ConvertError::NoOpStep { step: k });
        }
        let state = cur.get_or_insert_with(|| inferred.reactant.clone());
        initial.get_or_insert_with(|| inferred.reactant.clone());
        let step = step_on(&inferred.reactant, &inferred.arrows);
        let (next, _) = engine
            .apply_step(state, &step)
            .map_err(|e| ConvertError::Apply {
                step: k,
                reason: e.to_string(),
            })?;
        *state = next;
        written.push(step);
        lengths.push(rxn.len());
        last_product = keys(&pg);
    }
    let initial = initial.ok_or_else(|| ConvertError::Malformed("empty reaction group".into()))?;
    let mechanism = Mechanism::replay(engine, group[0].reaction_id.clone(), initial, &written)
        .map_err(|e| ConvertError::Apply {
            step: 0,
            reason: e.to_string(),
        })?;
    let got = mechanism.goal().component_keys();
    if !contains_all(&got, &last_product) {
        return Err(ConvertError::CrossCheck {
            expected: last_product.join("."),
            got: got.join("."),
        });
    }
    Ok(Converted {
        mechanism,
        source_lengths: lengths,
    })
}

fn arrow_from_value(config: &AdapterConfig, v: &Value) -> Result<Arrow, ConvertError> {
    match v {
        Value::String(s) => s
            .parse()
            .map_err(|e: crate::mechsmiles::MechError| ConvertError::Malformed(e.to_string())),
        Value::Object(o) => {
            let ty = o
                .get("type")
                .and_then(Value::as_str)
                .ok_or_else(|| ConvertError::MissingField("type".into()))?;
            let kind = config
                .arrow_types
                .get(&ty.to_ascii_lowercase())
                .ok_or_else(|| ConvertError::UnknownArrowType(ty.to_string()))?;
            let atoms: Vec<u32> = o
                .get("atoms")
                .and_then(Value::as_array)
                .ok_or_else(|| ConvertError::MissingField("atoms".into()))?
                .iter()
                .map(|x| x.as_u64().and_then(|n| u32::try_from(n).ok()))
                .collect::<Option<_>>()
                .ok_or_else(|| ConvertError::Malformed("atoms must be map numbers".into()))?;
            match (kind, &atoms[..]) {
                (ArrowKind::Attack, [a, b]) => Ok(Arrow::Attack(*a, *b)),
                (ArrowKind::Ionize, [a, b]) => Ok(Arrow::Ionize(*a, *b)),
                (ArrowKind::BondAttack, [a, b, c]) => Ok(Arrow::BondAttack(*a, *b, *c)),
                _ => Err(ConvertError::Malformed(format!(
                    "{ty} with {} atoms",
                    atoms.len()
                ))),
            }
        }
        other => Err(ConvertError::Malformed(format!(
            "arrow must be a string or object, got {other}"
        ))),
    }
}

fn check_maps(g: &MolGraph, arrows: &[Arrow]) -> Result<(), ConvertError> {
    let known: HashSet<u32> = g.atoms().iter().filter_map(|a| a.map).collect();
    for a in arrows {
        for m in a.maps() {
            if !known.contains(&m) {
                return Err(ConvertError::DanglingMap { map: m });
            }
        }
    }
    Ok(())
}

pub(super) fn convert_mech_uspto(
    engine: &Engine,
    config: &AdapterConfig,
    group: &[SourceRecord],
) -> Result<Converted, ConvertError> {
    let row = &group[0];
    let g = smiles(row.text(&config.reactants_field)?)?;
    let arrows: Vec<Arrow> = row
        .fields
        .get(&config.arrows_field)
        .and_then(Value::as_array)
        .ok_or_else(|| ConvertError::MissingField(config.arrows_field.clone()))?
        .iter()
        .map(|v| arrow_from_value(config, v))
        .collect::<Result<_, _>>()?;
    check_maps(&g, &arrows)?;
    let initial = State::from_graph(&g).map_err(|e| ConvertError::Graph(e.to_string()))?;
    let sets = super::segment_arrows(engine, &initial, &arrows)?;
    let mechanism = Mechanism::from_arrows(engine, row.reaction_id.clone(), initial, &sets)
        .map_err(|e| ConvertError::Apply {
            step: 0,
            reason: e.to_string(),
        })?;
    if let Some(p) = row
        .fields
        .get(&config.products_field)
        .and_then(Value::as_str)
    {
        let want = keys(&smiles(p)?);
        let got = mechanism.goal().component_keys();
        if !contains_all(&got, &want) {
            return Err(ConvertError::CrossCheck {
                expected: want.join("."),
                got: got.join("."),
            });
        }
    }
    Ok(Converted {
        mechanism,
        source_lengths: Vec::new(),
    })
}

/// Parses an arrow code: `;`-separated `source=target` items where a single
/// atom is a lone pair and `a,b` is a bond. `a=a,b` is an attack, `a,b=b`
/// an ionization and `a,b=b,c` a bond attack.
pub fn parse_arrow_code(code: &str) -> Result<Vec<Arrow>, ConvertError> {
    let bad = || ConvertError::ArrowCode(code.to_string());
    let nums = |s: &str| -> Result<Vec<u32>, ConvertError> {
        s.split(',')
            .map(|x| x.trim().parse::<u32>().map_err(|_| bad()))
            .collect()
    };
    let mut out = Vec::new();
    for item in code.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let (l, r) = item.split_once('=').ok_or_else(bad)?;
        let (l, r) = (nums(l)?, nums(r)?);
        let arrow = match (&l[..], &r[..]) {
            ([a], [x, y]) if x == a && y != a => Arrow::Attack(*a, *y),
            ([a], [x, y]) if y == a && x != a => Arrow::Attack(*a, *x),
            ([a, b], [x]) if x == b && a != b => Arrow::Ionize(*a, *b),
            ([a, b], [x]) if x == a && a != b => Arrow::Ionize(*b, *a),
            ([a, b], [x, y]) => {
                let shared: Vec<u32> = [*x, *y].into_iter().filter(|v| v == a || v == b).collect();
                let [s] = shared[..] else {
                    return Err(bad());
                };
                let from = if s == *a { *b } else { *a };
                let to = if s == *x { *y } else { *x };
                Arrow::BondAttack(from, s, to)
            }
            _ => return Err(bad()),
        };
        out.push(arrow);
    }
    Ok(out)
}

/// Inverse of [`parse_arrow_code`].
pub fn write_arrow_code(arrows: &[Arrow]) -> String {
    arrows
        .iter()
        .map(|a| match *a {
            Arrow::Attack(a, b) => format!("{a}={a},{b}"),
            Arrow::Ionize(a, b) => format!("{a},{b}={b}"),
            Arrow::BondAttack(a, b, c) => format!("{a},{b}={b},{c}"),
        })
        .collect::<Vec<_>>()
        .join(";")
}

/// Reactant state and arrows of a SMIRKS-plus-arrow-code step, after
/// checking that the arrows reproduce the stated products.
pub fn from_smirks_arrowcode(
    engine: &Engine,
    smirks: &str,
    code: &str,
) -> Result<(State, Vec<Arrow>), ConvertError> {
    let (r, p) = split_reaction(smirks)?;
    let g = smiles(&r)?;
    let arrows = parse_arrow_code(code)?;
    check_maps(&g, &arrows)?;
    let state = State::from_graph(&g).map_err(|e| ConvertError::Graph(e.to_string()))?;
    let next = engine
        .apply(&state, &arrows)
        .map_err(|e| ConvertError::Apply {
            step: 0,
            reason: e.to_string(),
        })?;
    let want = keys(&smiles(&p)?);
    let got = next.component_keys();
    if want != got {
        return Err(ConvertError::CrossCheck {
            expected: want.join("."),
            got: got.join("."),
        });
    }
    if next == state {
        return Err(ConvertError::NoOpStep { step: 0 });
    }
    Ok((state, arrows))
}

pub(super) fn convert_pmechdb(
    engine: &Engine,
    config: &AdapterConfig,
    group: &[SourceRecord],
) -> Result<Converted, ConvertError> {
    let row = &group[0];
    let smirks = row.text(&config.reaction_field)?;
    let code = row.text(&config.arrows_field)?;
    let (state, arrows) = from_smirks_arrowcode(engine, smirks, code)?;
    let mechanism = Mechanism::from_arrows(engine, row.reaction_id.clone(), state, &[arrows])
        .map_err(|e| ConvertError::Apply {
            step: 0,
            reason: e.to_string(),
        })?;
    Ok(Converted {
        mechanism,
        source_lengths: vec![smirks.len() + 1 + code.len()],
    })
}
