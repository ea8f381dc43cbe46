use std::fmt::Display;
use std::fs;
use std::io::{self, Write};

use anyhow::anyhow;
use arrowpush::applications::{classify_roles, derive_atom_map, extract_template, Radius};
use arrowpush::convert::{
    convert_stream, write_flower, write_mech_uspto, write_pmechdb, AdapterConfig, SourceFormat, StreamOptions,
};
use arrowpush::corpus::{self, SynthOptions};
use arrowpush::engine::{EnumOptions, Engine, State};
use arrowpush::mechanism::{step_on, Mechanism, MechanismRecord};
use arrowpush::mechsmiles::{parse_arrows, parse_mechsmiles, step_lengths, CharStats, MechError, MeanStd, Scope};
use arrowpush::molgraph::validate;
use arrowpush::par::{self, Exec};
use arrowpush::search::{
    beam_pathways, best_first_search, evaluate, evaluate_replay, validate_reaction, EvalConfig, Goal, GoalTest, Policy,
    SearchConfig,
};
use arrowpush::smiles::{parse_smiles, MapMode, SmilesError};
use arrowpush::taskgen::{build_corpus, Task, Variants};
use arrowpush_service::{build_policy, Config, PolicyBackend};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::io::{for_each_chunk, input, output};
use crate::{ApplyArgs, Command, ConvertArgs, EvaluateArgs, SearchArgs, ServeArgs, SynthArgs, TasksArgs};

const CHUNK: usize = 1024;

pub struct Ctx {
    pub json: bool,
    pub seed: u64,
    pub jobs: usize,
}

impl Ctx {
    fn exec(&self) -> Exec {
        if self.jobs == 1 {
            Exec::Sequential
        } else {
            Exec::Parallel
        }
    }
}

#[derive(Debug)]
pub struct Fail {
    code: u8,
    error: anyhow::Error,
}

impl Fail {
    pub fn usage(e: impl Display) -> Fail {
        Fail { code: 2, error: anyhow!("{e}") }
    }

    pub fn domain(e: impl Display) -> Fail {
        Fail { code: 1, error: anyhow!("{e}") }
    }

    pub fn code(&self) -> u8 {
        self.code
    }

    pub fn message(&self) -> String {
        format!("error: {:#}", self.error)
    }
}

impl From<io::Error> for Fail {
    fn from(e: io::Error) -> Fail {
        Fail { code: 1, error: e.into() }
    }
}

/// Error text followed by the input with a caret under `offset`.
fn pointed(text: &str, offset: Option<usize>, err: impl Display) -> Fail {
    let mut msg = err.to_string();
    if let Some(o) = offset {
        let col = text.get(..o.min(text.len())).map_or(0, |s| s.chars().count());
        msg += &format!("\n  {text}\n  {}^", " ".repeat(col));
    }
    Fail::usage(msg)
}

fn mech_offset(e: &MechError) -> Option<usize> {
    match e {
        MechError::MalformedArrow { offset, .. } | MechError::DanglingMap { offset, .. } => Some(*offset),
        MechError::Smiles(s) => s.offset(),
        _ => None,
    }
}

fn smiles_error(text: &str, e: SmilesError) -> Fail {
    pointed(text, e.offset(), e)
}

fn mech_error(text: &str, e: MechError) -> Fail {
    pointed(text, mech_offset(&e), e)
}

fn state_from(text: &str) -> Result<State, Fail> {
    let g = parse_smiles(text).map_err(|e| smiles_error(text, e))?;
    State::from_graph(&g).map_err(Fail::usage)
}

fn print_json(v: &impl serde::Serialize) -> Result<(), Fail> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v).map_err(Fail::domain)?;
    writeln!(out)?;
    Ok(())
}

fn json_line(out: &mut dyn Write, v: &impl serde::Serialize) -> Result<(), Fail> {
    serde_json::to_writer(&mut *out, v).map_err(Fail::domain)?;
    writeln!(out)?;
    Ok(())
}

pub fn run(ctx: &Ctx, command: Command) -> Result<(), Fail> {
    if let Command::Serve(args) = command {
        return serve(args);
    }
    par::with_threads(ctx.jobs, || {
        let engine = Engine::default();
        match command {
            Command::Parse { input } => parse(ctx, &engine, &input),
            Command::Apply(args) => apply(ctx, &engine, args),
            Command::Enumerate { state, max_arrows, limit, sample } => {
                enumerate(ctx, &engine, &state, max_arrows, limit, sample)
            }
            Command::Convert(args) => convert(ctx, &engine, args),
            Command::Synth(args) => synth(ctx, &engine, args),
            Command::Stats { records } => stats(ctx, &records),
            Command::Tasks(args) => tasks(ctx, &engine, args),
            Command::Search(args) => search(ctx, &engine, args),
            Command::Validate(args) => validate_cmd(ctx, &engine, args),
            Command::Map { records } => map(ctx, &engine, &records),
            Command::Template { records, radius } => template(ctx, &engine, &records, &radius),
            Command::Evaluate(args) => evaluate_cmd(ctx, &engine, args),
            Command::Serve(_) => unreachable!("handled above"),
        }
    })
}

fn parse(ctx: &Ctx, engine: &Engine, text: &str) -> Result<(), Fail> {
    if text.contains('|') {
        let step = parse_mechsmiles(text).map_err(|e| mech_error(text, e))?;
        let host = State::from_graph(&step.host).map_err(Fail::usage)?;
        let product = engine.apply_step(&host, &step).map(|(s, _)| s);
        if ctx.json {
            return print_json(&json!({
                "kind": "mechsmiles",
                "scope": step.scope(),
                "arrows": step.arrows,
                "minimal": step.serialize(Scope::Minimal),
                "equilibrated": step.serialize(Scope::Equilibrated),
                "product": product.as_ref().ok().map(State::component_keys),
                "product_error": product.as_ref().err().map(ToString::to_string),
            }));
        }
        let arrows: Vec<String> = step.arrows.iter().map(ToString::to_string).collect();
        println!("scope         {}", serde_json::to_value(step.scope()).map_err(Fail::domain)?.as_str().unwrap_or(""));
        println!("arrows        {}", arrows.join(" "));
        println!("minimal       {}", step.serialize(Scope::Minimal));
        println!("equilibrated  {}", step.serialize(Scope::Equilibrated));
        match product {
            Ok(s) => println!("product       {}", s.canonical()),
            Err(e) => println!("product       none ({e})"),
        }
        return Ok(());
    }
    let state = state_from(text)?;
    let report = validate(state.graph(), &engine.table).map_err(Fail::usage)?;
    if ctx.json {
        return print_json(&json!({
            "kind": "smiles",
            "canonical": state.canonical(),
            "mapped": state.smiles(&MapMode::All),
            "components": state.component_keys(),
            "formula": state.formula().to_string(),
            "total_charge": state.graph().total_charge(),
            "stable": report.is_stable(),
            "violations": report.violations,
        }));
    }
    println!("canonical  {}", state.canonical());
    println!("mapped     {}", state.smiles(&MapMode::All));
    println!("formula    {}", state.formula());
    println!("charge     {}", state.graph().total_charge());
    if report.is_stable() {
        println!("stable     yes");
    } else {
        println!("stable     no");
        for v in &report.violations {
            println!("  {v}");
        }
    }
    Ok(())
}

fn apply(ctx: &Ctx, engine: &Engine, args: ApplyArgs) -> Result<(), Fail> {
    let (state, arrows, next) = match (&args.mechsmiles, &args.arrows) {
        (Some(text), None) => {
            let step = parse_mechsmiles(text).map_err(|e| mech_error(text, e))?;
            let state = match &args.state {
                Some(s) => state_from(s)?,
                None => State::from_graph(&step.host).map_err(Fail::usage)?,
            };
            let (next, arrows) = engine.apply_step(&state, &step).map_err(Fail::domain)?;
            (state, arrows, next)
        }
        (None, Some(text)) => {
            let state = state_from(args.state.as_deref().unwrap_or_default())?;
            let arrows: Vec<_> = parse_arrows(text, 0)
                .map_err(|e| mech_error(text, e))?
                .into_iter()
                .map(|(a, _)| a)
                .collect();
            let next = engine.apply(&state, &arrows).map_err(Fail::domain)?;
            (state, arrows, next)
        }
        _ => return Err(Fail::usage("give a MechSMILES step or --state with --arrows")),
    };
    if ctx.json {
        return print_json(&json!({
            "state": next.smiles(&MapMode::All),
            "canonical": next.canonical(),
            "components": next.component_keys(),
            "arrows": arrows,
            "mechsmiles": step_on(&state, &arrows).to_minimal(),
        }));
    }
    println!("{}", next.canonical());
    Ok(())
}

fn enumerate(
    ctx: &Ctx,
    engine: &Engine,
    text: &str,
    max_arrows: usize,
    limit: Option<usize>,
    sample: Option<usize>,
) -> Result<(), Fail> {
    if !(1..=4).contains(&max_arrows) {
        return Err(Fail::usage("--max-arrows must be between 1 and 4"));
    }
    let state = state_from(text)?;
    let moves = match sample {
        Some(n) => {
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
            (0..n).filter_map(|_| engine.sample_move(&state, max_arrows, 1000, &mut rng)).collect()
        }
        None => engine.enumerate(&state, &EnumOptions { max_arrows, exec: ctx.exec() }),
    };
    let shown = &moves[..limit.unwrap_or(moves.len()).min(moves.len())];
    let rows: Vec<(String, Option<String>)> = par::map(ctx.exec(), shown, |m| {
        let product = engine.apply(&state, &m.arrows).ok().map(|s| s.canonical());
        (step_on(&state, &m.arrows).to_minimal(), product)
    });
    if ctx.json {
        let listed: Vec<Value> = shown
            .iter()
            .zip(&rows)
            .map(|(m, (mech, product))| json!({"arrows": m.arrows, "mechsmiles": mech, "product": product}))
            .collect();
        return print_json(&json!({"total": moves.len(), "moves": listed}));
    }
    let mut out = output(None)?;
    for (mech, product) in &rows {
        writeln!(out, "{mech}\t{}", product.as_deref().unwrap_or("-"))?;
    }
    out.flush()?;
    eprintln!("{} moves", moves.len());
    Ok(())
}

fn convert(ctx: &Ctx, engine: &Engine, args: ConvertArgs) -> Result<(), Fail> {
    let format: SourceFormat = args.format.parse().map_err(Fail::usage)?;
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Fail::usage(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Fail::usage(format!("{}: {e}", path.display())))?
        }
        None => AdapterConfig::for_format(format),
    };
    config.format = format;
    let to_file = args.output.is_some();
    let out = output(args.output.as_ref())?;
    let rejects: Box<dyn Write> = match &args.rejects {
        Some(_) => output(args.rejects.as_ref())?,
        None => Box::new(io::sink()),
    };
    let opts = StreamOptions { chunk: CHUNK, exec: ctx.exec() };
    let summary = convert_stream(engine, &config, input(&args.input)?, out, rejects, &opts).map_err(Fail::usage)?;
    let text = if ctx.json {
        serde_json::to_string(&summary).map_err(Fail::domain)?
    } else {
        let mut s = format!(
            "{} reactions, {} steps ({} of {} records converted, {:.1}%)",
            summary.converted,
            summary.steps,
            summary.converted,
            summary.records,
            100.0 * summary.yield_fraction()
        );
        for (reason, n) in &summary.reasons {
            s += &format!("\n  rejected {reason}: {n}");
        }
        s
    };
    if to_file {
        println!("{text}");
    } else {
        eprintln!("{text}");
    }
    Ok(())
}

fn synth(ctx: &Ctx, engine: &Engine, args: SynthArgs) -> Result<(), Fail> {
    let (mechs, tag) = if args.curated {
        (corpus::curated(engine), "curated")
    } else {
        let opts = SynthOptions {
            count: args.count,
            max_steps: args.max_steps,
            max_arrows: args.max_arrows,
            seed: ctx.seed,
            exec: ctx.exec(),
        };
        (corpus::synthesize(engine, &opts), "synthetic")
    };
    let mut out = output(args.output.as_ref())?;
    match args.format.as_str() {
        "unified" => {
            for m in &mechs {
                json_line(&mut out, &m.to_record(tag))?;
            }
        }
        other => match other.parse::<SourceFormat>().map_err(Fail::usage)? {
            SourceFormat::Flower => write_flower(&mechs, &mut out)?,
            SourceFormat::MechUspto => write_mech_uspto(&mechs, &mut out)?,
            SourceFormat::Pmechdb => write_pmechdb(engine, &mechs, &mut out)?,
        },
    }
    out.flush()?;
    Ok(())
}

fn source_lengths(rec: &MechanismRecord) -> Vec<usize> {
    rec.meta
        .get("source_lengths")
        .and_then(Value::as_array)
        .map(|a| a.iter().filter_map(Value::as_u64).map(|n| n as usize).collect())
        .unwrap_or_default()
}

fn stats(ctx: &Ctx, path: &std::path::Path) -> Result<(), Fail> {
    let (mut minimal, mut equilibrated, mut source, mut per_reaction) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for_each_chunk(path, CHUNK, |batch| {
        let parsed = par::map(ctx.exec(), batch, |(line, rec)| {
            rec.steps
                .iter()
                .map(|s| parse_mechsmiles(s).map(|step| step_lengths(&step)))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| Fail::domain(format!("line {line} ({}): {e}", rec.reaction_id)))
        });
        for ((_, rec), lengths) in batch.iter().zip(parsed) {
            let lengths = lengths?;
            per_reaction.push(lengths.len());
            for (m, e) in lengths {
                minimal.push(m);
                equilibrated.push(e);
            }
            source.extend(source_lengths(rec));
        }
        Ok(())
    })?;
    let chars = CharStats::from_lengths(&minimal, &equilibrated, &source).map_err(Fail::domain)?;
    let steps = MeanStd::of(&per_reaction);
    if ctx.json {
        return print_json(&json!({
            "reactions": per_reaction.len(),
            "steps": minimal.len(),
            "steps_per_reaction": steps,
            "chars": chars,
        }));
    }
    let mut out = output(None)?;
    writeln!(out, "measure\tcount\tmean\tstd")?;
    writeln!(out, "reactions\t{}\t\t", per_reaction.len())?;
    let rows = [
        ("steps_per_reaction", steps),
        ("minimal_chars", Some(chars.minimal)),
        ("equilibrated_chars", Some(chars.equilibrated)),
        ("source_chars", chars.source),
    ];
    for (name, m) in rows {
        if let Some(m) = m {
            writeln!(out, "{name}\t{}\t{:.2}\t{:.2}", m.count, m.mean, m.std)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn mechanisms(ctx: &Ctx, engine: &Engine, batch: &[(usize, MechanismRecord)]) -> Result<Vec<Mechanism>, Fail> {
    par::map(ctx.exec(), batch, |(line, rec)| {
        rec.to_mechanism(engine)
            .map_err(|e| Fail::domain(format!("line {line} ({}): {e}", rec.reaction_id)))
    })
    .into_iter()
    .collect()
}

fn tasks(ctx: &Ctx, engine: &Engine, args: TasksArgs) -> Result<(), Fail> {
    let numbers = if args.tasks.is_empty() { vec![1, 2, 3, 4] } else { args.tasks.clone() };
    let tasks = numbers
        .iter()
        .map(|&n| Task::from_number(n).ok_or_else(|| Fail::usage(format!("no task {n}; tasks are 1-4"))))
        .collect::<Result<Vec<_>, _>>()?;
    let variants = Variants { retro: !args.no_retro, forward: !args.no_forward, no_product: !args.no_product_free };
    let mut out = output(args.output.as_ref())?;
    let (mut mechs, mut samples) = (0, 0);
    for_each_chunk(&args.records, CHUNK, |batch| {
        let chunk = mechanisms(ctx, engine, batch)?;
        mechs += chunk.len();
        for s in build_corpus(&chunk, &tasks, &variants, ctx.exec()) {
            json_line(&mut out, &s)?;
            samples += 1;
        }
        Ok(())
    })?;
    out.flush()?;
    if ctx.json {
        eprintln!("{}", json!({"mechanisms": mechs, "samples": samples}));
    } else {
        eprintln!("{samples} samples from {mechs} mechanisms");
    }
    Ok(())
}

fn backend(name: &str) -> Result<PolicyBackend, Fail> {
    Ok(if name == "heuristic" {
        PolicyBackend::Heuristic
    } else if name.starts_with("http://") || name.starts_with("https://") {
        PolicyBackend::Http(name.to_string())
    } else if let Some(cmd) = name.strip_prefix("cmd:") {
        PolicyBackend::Command(cmd.to_string())
    } else {
        return Err(Fail::usage(format!("unknown policy `{name}`")));
    })
}

fn policy(name: &str) -> Result<std::sync::Arc<dyn Policy>, Fail> {
    build_policy(&backend(name)?).map_err(Fail::usage)
}

fn search_config(args: &SearchArgs) -> Result<SearchConfig, Fail> {
    let d = SearchConfig::default();
    let cfg = SearchConfig {
        budget: args.budget.unwrap_or(d.budget),
        top_k: args.top_k.unwrap_or(d.top_k),
        max_children: args.max_children.unwrap_or(d.max_children),
        beam_width: args.beam.unwrap_or(d.beam_width),
        max_depth: args.max_depth.unwrap_or(d.max_depth),
        task: d.task,
    };
    cfg.check().map_err(Fail::usage)?;
    Ok(cfg)
}

fn search(ctx: &Ctx, engine: &Engine, args: SearchArgs) -> Result<(), Fail> {
    let cfg = search_config(&args)?;
    let initial = state_from(&args.reactants)?;
    let test = if args.exact { GoalTest::Exact } else { GoalTest::Subset };
    let goal = Goal::from_smiles(&args.product, test).map_err(Fail::usage)?;
    let policy = policy(&args.policy.policy)?;
    if args.beam.is_some() {
        let found = beam_pathways(engine, policy.as_ref(), &initial, &goal, &cfg).map_err(Fail::domain)?;
        if ctx.json {
            let paths: Vec<Value> = found
                .iter()
                .map(|p| {
                    json!({
                        "cum_score": p.cum_score,
                        "steps": p.steps.iter().map(|s| s.to_minimal()).collect::<Vec<_>>(),
                        "states": p.states.iter().map(State::canonical).collect::<Vec<_>>(),
                    })
                })
                .collect();
            print_json(&json!({"solved": !found.is_empty(), "pathways": paths}))?;
        } else {
            for (i, p) in found.iter().enumerate() {
                println!("# pathway {} score {:.3}", i + 1, p.cum_score);
                for s in &p.steps {
                    println!("{}", s.to_minimal());
                }
            }
        }
        if found.is_empty() {
            return Err(Fail::domain("no pathway reached the product"));
        }
        return Ok(());
    }
    let out = best_first_search(engine, policy.as_ref(), &initial, &goal, &cfg).map_err(Fail::domain)?;
    if ctx.json {
        print_json(&json!({
            "report": out.report,
            "states": out.pathway.states.iter().map(State::canonical).collect::<Vec<_>>(),
        }))?;
    } else {
        for s in &out.report.steps {
            println!("{s}");
        }
        eprintln!(
            "{} after {} expansions ({} invalid proposals)",
            if out.report.solved { "solved" } else { "not solved" },
            out.report.expansions,
            out.report.invalid_proposals
        );
    }
    if !out.report.solved {
        let why = out.report.preflight.clone().unwrap_or_else(|| "search budget exhausted".into());
        return Err(Fail::domain(format!("no mechanism found: {why}")));
    }
    Ok(())
}

fn validate_cmd(ctx: &Ctx, engine: &Engine, args: SearchArgs) -> Result<(), Fail> {
    let cfg = search_config(&args)?;
    let initial = state_from(&args.reactants)?;
    let product = parse_smiles(&args.product).map_err(|e| smiles_error(&args.product, e))?;
    let policy = policy(&args.policy.policy)?;
    let v = validate_reaction(engine, &initial, &product, policy.as_ref(), &cfg).map_err(Fail::domain)?;
    let steps: Vec<String> = v.mechanism.iter().flat_map(|m| m.steps.iter().map(|s| s.to_minimal())).collect();
    if ctx.json {
        print_json(&json!({"validated": v.validated, "steps": steps, "report": v.report}))?;
    } else if v.validated {
        println!("validated in {} steps", steps.len());
        for s in &steps {
            println!("{s}");
        }
    }
    if !v.validated {
        let why = v.report.preflight.unwrap_or_else(|| format!("nothing found in {} expansions", v.report.expansions));
        return Err(Fail::domain(format!("not validated: {why}")));
    }
    Ok(())
}

fn map(ctx: &Ctx, engine: &Engine, path: &std::path::Path) -> Result<(), Fail> {
    let mut out = output(None)?;
    for_each_chunk(path, CHUNK, |batch| {
        let mechs = mechanisms(ctx, engine, batch)?;
        let maps = par::map(ctx.exec(), &mechs, |m| derive_atom_map(engine, m).map(|a| (a, classify_roles(m))));
        for (m, r) in mechs.iter().zip(maps) {
            let (atom_map, roles) = r.map_err(|e| Fail::domain(format!("{}: {e}", m.reaction_id)))?;
            if ctx.json {
                let v = json!({
                    "reaction_id": m.reaction_id,
                    "reaction_smiles": atom_map.reaction_smiles,
                    "pairs": atom_map.pairs,
                    "roles": roles.initial,
                });
                json_line(&mut out, &v)?;
            } else {
                writeln!(out, "{}\t{}", m.reaction_id, atom_map.reaction_smiles)?;
            }
        }
        Ok(())
    })?;
    out.flush()?;
    Ok(())
}

fn template(ctx: &Ctx, engine: &Engine, path: &std::path::Path, radius: &str) -> Result<(), Fail> {
    let radius: Radius = radius.parse().map_err(Fail::usage)?;
    let mut out = output(None)?;
    for_each_chunk(path, CHUNK, |batch| {
        let mechs = mechanisms(ctx, engine, batch)?;
        let templates = par::map(ctx.exec(), &mechs, |m| extract_template(m, radius));
        for (m, t) in mechs.iter().zip(templates) {
            if ctx.json {
                json_line(&mut out, &json!({"reaction_id": m.reaction_id, "template": t}))?;
            } else {
                writeln!(out, "{}\t{}", m.reaction_id, t.text())?;
            }
        }
        Ok(())
    })?;
    out.flush()?;
    Ok(())
}

fn evaluate_cmd(ctx: &Ctx, engine: &Engine, args: EvaluateArgs) -> Result<(), Fail> {
    let task = Task::from_number(args.task).ok_or_else(|| Fail::usage(format!("no task {}", args.task)))?;
    if args.ks.is_empty() || args.ks.contains(&0) || args.widths.contains(&0) {
        return Err(Fail::usage("k and beam widths must be positive"));
    }
    let mut mechs = Vec::new();
    for_each_chunk(&args.records, CHUNK, |batch| {
        mechs.extend(mechanisms(ctx, engine, batch)?);
        Ok(())
    })?;
    let cfg = EvalConfig {
        ks: args.ks.clone(),
        widths: args.widths.clone(),
        search: SearchConfig { task, ..SearchConfig::default() },
        exec: ctx.exec(),
    };
    let metrics = if args.policy.policy == "replay" {
        evaluate_replay(engine, &mechs, &cfg)
    } else {
        evaluate(engine, &mechs, policy(&args.policy.policy)?.as_ref(), &cfg)
    };
    if ctx.json {
        print_json(&metrics)
    } else {
        print!("{}", metrics.table());
        if metrics.policy_errors > 0 {
            println!("policy errors {}", metrics.policy_errors);
        }
        Ok(())
    }
}

fn serve(args: ServeArgs) -> Result<(), Fail> {
    let mut config = Config::from_env().map_err(Fail::usage)?;
    if let Some(addr) = &args.addr {
        config.addr = addr.parse().map_err(|e| Fail::usage(format!("--addr: {e}")))?;
    }
    if let Some(dir) = args.sessions {
        config.session_dir = dir;
    }
    if let Some(name) = &args.policy {
        config.policy = backend(name)?;
    }
    eprintln!("serving on http://{} (sessions in {})", config.addr, config.session_dir.display());
    arrowpush_service::serve(config).map_err(Fail::domain)
}
