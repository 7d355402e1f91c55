//! One handler per subcommand. Handlers only read inputs, delegate to
//! `relate_core` and write outputs.

use std::fs;
use std::path::{Path, PathBuf};

use relate_core::attacks::{AttackKind, AttackSpec};
use relate_core::dataset::{generate_synthetic_dataset, read_dataset, write_dataset, SynthSpec};
use relate_core::group::{extract_group_features, predict_group};
use relate_core::pipeline::scenario::{
    benchmark_datasets, default_zoo, make_arrival, parse_pattern, read_arrival, sibling_arrival, untuned,
    write_arrival, ArrivalRecord,
};
use relate_core::pipeline::{
    build_pbd, eval_baselines as core_eval_baselines, run_pipeline, select as core_select, Condition, PbdConfig,
    RecordTable, SelectionResult, PBD_FILE, RANDOM_DRAWS,
};
use relate_core::{Arrival, Dataset, DetectorPair, Pbd};
use serde::Serialize;

use crate::config::Settings;
use crate::error::{CliError, Result};
use crate::{AttackArgs, DataArgs, EvalArgs, PbdBuildArgs, ReportArgs, RunArgs, SynthArgs};

fn write_json<V: Serialize>(path: &Path, value: &V) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(relate_core::Error::from)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, text + "\n").map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn condition(kind: Option<AttackKind>, pattern: Option<&str>, epsilon: f64) -> Result<Condition> {
    Ok(match (kind, pattern) {
        (Some(k), _) => Condition::Attack(AttackSpec::new(k, epsilon)),
        (None, Some(p)) => Condition::Pattern(parse_pattern(p, epsilon)?),
        (None, None) => Condition::Clean,
    })
}

fn load_pbd(s: &Settings) -> Result<Pbd> {
    Ok(Pbd::load(&s.pbd)?)
}

fn pbd_config(s: &Settings, epochs: Option<usize>) -> PbdConfig {
    let mut config = PbdConfig::with_epsilon(s.epsilon);
    config.percentile = s.percentile;
    if let Some(e) = epochs {
        config.grid.epochs = e;
    }
    config
}

pub fn synth(s: &Settings, a: SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        name: a.name,
        classes: a.classes,
        channels: a.channels,
        length: a.length,
        per_class: a.per_class,
        seed: s.seed,
        variant: a.variant,
        noise: a.noise,
    };
    let ds: Dataset = generate_synthetic_dataset(&spec)?;
    let out = s.out_or("synthetic");
    write_dataset(&ds, &out)?;
    println!(
        "wrote {} ({} train, {} val, {} test) to {}",
        ds.name,
        ds.train.len(),
        ds.val.len(),
        ds.test.len(),
        out.display()
    );
    Ok(())
}

pub fn attack(s: &Settings, a: AttackArgs) -> Result<()> {
    if a.kind.is_none() && a.pattern.is_none() {
        return Err(CliError::Usage("attack needs --kind or --pattern".into()));
    }
    let cond = condition(a.kind, a.pattern.as_deref(), s.epsilon)?;
    cond.check()?;
    let ds: Dataset = read_dataset(&a.data)?;
    let attacker = untuned(a.model);
    let record = ArrivalRecord {
        condition: cond.clone(),
        seed: s.seed,
        source: ds.name.clone(),
        attacker: attacker.clone(),
    };
    let arrival = make_arrival(ds, cond, &attacker, s.seed)?;
    let out = s.out_or("arrival");
    write_arrival(&arrival, &record, &out)?;
    println!("wrote {} observed samples to {}", arrival.observed.len(), out.display());
    Ok(())
}

pub fn pbd_build(s: &Settings, a: PbdBuildArgs) -> Result<()> {
    let datasets: Vec<Dataset> = if a.data.is_empty() {
        benchmark_datasets(a.datasets, s.seed)?
    } else {
        a.data
            .iter()
            .map(|d| read_dataset(d))
            .collect::<relate_core::Result<_>>()?
    };
    let pbd = build_pbd(datasets, &pbd_config(s, Some(a.epochs)), s.seed)?;
    pbd.save(&s.pbd)?;
    println!(
        "wrote {} datasets, {} records to {}",
        pbd.datasets.len(),
        pbd.records.len(),
        s.pbd.display()
    );
    Ok(())
}

pub fn detect(s: &Settings, a: DataArgs) -> Result<()> {
    let arrival: Arrival = read_arrival(&a.data)?;
    let detectors = DetectorPair::fit(&arrival.dataset.train, s.percentile)?;
    let report = detectors.report(&arrival.observed, s.threshold)?;
    print!("{report}");
    if let Some(out) = &s.out {
        write_json(out, &report)?;
    }
    Ok(())
}

pub fn classify_attack(s: &Settings, a: DataArgs) -> Result<()> {
    let pbd = load_pbd(s)?;
    let arrival: Arrival = read_arrival(&a.data)?;
    let clean = extract_group_features(&arrival.dataset.train)?;
    let (group, confidence) = predict_group(&pbd.group_classifier, &arrival.observed, &clean)?;
    println!("group: {group}");
    println!("confidence: {confidence:.4}");
    if let Some(out) = &s.out {
        write_json(out, &relate_core::pipeline::GroupPrediction { group, confidence })?;
    }
    Ok(())
}

pub fn select(s: &Settings, a: DataArgs) -> Result<()> {
    let cfg = s.run_config()?;
    let pbd = load_pbd(s)?;
    let arrival: Arrival = read_arrival(&a.data)?;
    let selection = core_select(&arrival, &pbd, &cfg)?;
    print!("{selection}");
    if let Some(out) = &s.out {
        write_json(out, &selection)?;
    }
    Ok(())
}

/// Loads the PBD at `--pbd`, building and saving a synthetic one first if
/// the directory holds none.
fn load_or_build(s: &Settings, datasets: usize) -> Result<Pbd> {
    if s.pbd.join(PBD_FILE).exists() {
        return load_pbd(s);
    }
    eprintln!(
        "no PBD at {}, building one from {datasets} synthetic datasets",
        s.pbd.display()
    );
    let pbd = build_pbd(benchmark_datasets(datasets, s.seed)?, &pbd_config(s, None), s.seed)?;
    pbd.save(&s.pbd)?;
    Ok(pbd)
}

fn overhead_path(out: &Path) -> PathBuf {
    out.with_extension("overhead.json")
}

pub fn run(s: &Settings, a: RunArgs) -> Result<()> {
    let cfg = s.run_config()?;
    let pbd = load_or_build(s, a.datasets)?;
    let arrival: Arrival = match &a.data {
        Some(dir) => read_arrival(dir)?,
        None => {
            let cond = condition(a.attack, a.pattern.as_deref(), s.epsilon)?;
            sibling_arrival(&pbd, a.source, cond, s.seed)?
        }
    };
    let result = run_pipeline(&arrival, &pbd, &cfg)?;
    print!("{result}");
    println!();
    print!("{}", result.overhead);
    let out = s.out_or("result.json");
    write_json(&out, &result)?;
    write_json(&overhead_path(&out), &result.overhead)?;
    Ok(())
}

pub fn eval_baselines(s: &Settings, a: EvalArgs) -> Result<()> {
    let arrival: Arrival = read_arrival(&a.data)?;
    let specs = match &a.dataset {
        Some(name) => load_pbd(s)?.dataset(name)?.specs.clone(),
        None => default_zoo(),
    };
    let objective = a.objective.unwrap_or_else(|| arrival.condition.objective());
    let report = core_eval_baselines(&arrival, &specs, objective, RANDOM_DRAWS, s.seed)?;
    print!("{report}");
    if let Some(out) = &s.out {
        write_json(out, &report)?;
    }
    Ok(())
}

pub fn report(s: &Settings, a: ReportArgs) -> Result<()> {
    if let Some(path) = &a.result {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        let result: SelectionResult = serde_json::from_str(&text).map_err(|e| relate_core::Error::Parse {
            path: path.clone(),
            line: e.line(),
            msg: e.to_string(),
        })?;
        print!("{result}");
        return Ok(());
    }
    let pbd = load_pbd(s)?;
    let rows: Vec<_> = match &a.dataset {
        Some(name) => pbd.rows(name).cloned().collect(),
        None => pbd.records.clone(),
    };
    print!("{}", RecordTable(&rows));
    Ok(())
}
