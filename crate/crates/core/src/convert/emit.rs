//! Writers producing source-format files from mechanisms.

use std::collections::BTreeSet;
use std::io::{self, Write};

use serde_json::{json, Value};

use super::infer::chain_order;
use super::sources::write_arrow_code;
use crate::engine::{Engine, State};
use crate::mechanism::Mechanism;
use crate::mechsmiles::Arrow;
use crate::molgraph::MolGraph;
use crate::smiles::{write_smiles, MapMode};

/// Maps of heavy atoms plus `extra`; other hydrogens are written implicitly.
fn heavy_mode(g: &MolGraph, extra: impl IntoIterator<Item = u32>) -> MapMode {
    let mut keep: BTreeSet<u32> = g
        .atoms()
        .iter()
        .filter(|a| !a.element.is_hydrogen())
        .filter_map(|a| a.map)
        .collect();
    keep.extend(extra);
    MapMode::Minimal(keep)
}

fn csv_err(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

/// One CSV row per elementary step: `reaction_id,rxn_smiles`.
pub fn write_flower(mechs: &[Mechanism], out: impl Write) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["reaction_id", "rxn_smiles"])
        .map_err(csv_err)?;
    for m in mechs {
        let states = m.states();
        for (pair, step) in states.windows(2).zip(&m.steps) {
            let mode = heavy_mode(pair[0].graph(), step.arrows.iter().flat_map(Arrow::maps));
            let rxn = format!("{}>>{}", pair[0].smiles(&mode), pair[1].smiles(&mode));
            w.write_record([m.reaction_id.as_str(), rxn.as_str()])
                .map_err(csv_err)?;
        }
    }
    w.flush()
}

/// One JSON line per mechanism with the flattened arrow list. Every other
/// record spells arrows as typed objects instead of strings.
pub fn write_mech_uspto(mechs: &[Mechanism], mut out: impl Write) -> io::Result<()> {
    for (i, m) in mechs.iter().enumerate() {
        let arrows: Vec<Arrow> = m
            .steps
            .iter()
            .flat_map(|s| chain_order(&s.arrows))
            .collect();
        let refs: Vec<u32> = arrows.iter().flat_map(Arrow::maps).collect();
        let reactants = m.initial.smiles(&heavy_mode(m.initial.graph(), refs));
        let arrow_values: Vec<Value> = arrows
            .iter()
            .map(|a| {
                if i % 2 == 0 {
                    Value::String(a.to_string())
                } else {
                    let ty = match a {
                        Arrow::Attack(..) => "attack",
                        Arrow::Ionize(..) => "ionization",
                        Arrow::BondAttack(..) => "bond_attack",
                    };
                    json!({"type": ty, "atoms": a.maps()})
                }
            })
            .collect();
        let rec = json!({
            "id": m.reaction_id,
            "reactants": reactants,
            "arrows": arrow_values,
            "products": m.goal().smiles(&MapMode::None),
        });
        writeln!(out, "{rec}")?;
    }
    out.flush()
}

/// One CSV row per step: `reaction_id,smirks,arrow_code`, with only the
/// species the step touches.
pub fn write_pmechdb(engine: &Engine, mechs: &[Mechanism], out: impl Write) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["reaction_id", "smirks", "arrow_code"])
        .map_err(csv_err)?;
    for m in mechs {
        for (k, step) in m.steps.iter().enumerate() {
            let host = State::from_graph(&step.host).map_err(io::Error::other)?;
            let product = engine
                .apply(&host, &step.arrows)
                .map_err(io::Error::other)?;
            let arrows = chain_order(&step.arrows);
            let mode = heavy_mode(&step.host, arrows.iter().flat_map(Arrow::maps));
            let smirks = format!(
                "{}>>{}",
                write_smiles(host.graph(), &mode),
                write_smiles(product.graph(), &mode)
            );
            let id = format!("{}-{}", m.reaction_id, k + 1);
            w.write_record([
                id.as_str(),
                smirks.as_str(),
                write_arrow_code(&arrows).as_str(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()
}
