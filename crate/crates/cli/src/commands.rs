//! Subcommand implementations. Each loads its inputs, runs the library
//! pipeline, and writes results plus a manifest into the output directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use adr_core::eval::{self, AucResult, KnownAdeSet};
use adr_core::ingest;
use adr_core::model::{DrugId, EventCode, EventKey};
use adr_core::signal::{self, Method, SignalRanking, ZeroPolicy};
use adr_core::synth::{self, SynthConfig};
use adr_core::windowing::{self, AssociationSet, WindowConfig};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::manifest::{write_json, RunManifest};
use crate::suggest;
use crate::{
    CliError, CompareArgs, InputArgs, MethodArg, RocArgs, SignalArgs, Source, SynthArgs,
    ZeroPolicyArg,
};

impl From<MethodArg> for Method {
    fn from(value: MethodArg) -> Self {
        match value {
            MethodArg::Ror => Method::Ror,
            MethodArg::Prr => Method::Prr,
        }
    }
}

impl From<ZeroPolicyArg> for ZeroPolicy {
    fn from(value: ZeroPolicyArg) -> Self {
        match value {
            ZeroPolicyArg::Strict => ZeroPolicy::Strict,
            ZeroPolicyArg::Haldane => ZeroPolicy::Haldane,
        }
    }
}

fn ensure_out_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", path.display())))
}

pub fn run_synth(args: &SynthArgs) -> Result<(), CliError> {
    let raw = fs::read_to_string(&args.config)
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.config.display())))?;
    let mut cfg: SynthConfig = serde_json::from_str(&raw)
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.config.display())))?;
    if let Some(n) = args.patients {
        cfg.n_patients = n;
    }
    let (gp, srs, truth) = synth::generate(&cfg).map_err(CliError::usage)?;

    ensure_out_dir(&args.out)?;
    let patients = args.out.join("patients.csv");
    let prescriptions = args.out.join("prescriptions.csv");
    let events = args.out.join("events.csv");
    let reports = args.out.join("srs_reports.csv");
    ingest::write_gp(&gp, &patients, &prescriptions, &events).map_err(CliError::data)?;
    ingest::write_srs(&srs, &reports).map_err(CliError::data)?;
    write_json(&args.out.join("ground_truth.json"), &truth)?;

    let manifest = RunManifest::new(
        &[args.config.as_path()],
        serde_json::to_value(&cfg).expect("config serialises"),
    )?;
    manifest.write(&args.out)?;

    println!(
        "generated {} patients, {} prescriptions, {} events, {} reports -> {}",
        gp.patients.len(),
        gp.prescriptions.len(),
        gp.events.len(),
        srs.reports.len(),
        args.out.display()
    );
    Ok(())
}

/// Everything the signal and roc commands share: the loaded association set
/// plus the resolved query.
struct Analysis {
    assoc: AssociationSet,
    ranking: SignalRanking,
    drug: DrugId,
    input_paths: Vec<PathBuf>,
    /// "60"/"inf" for GP sources, absent for SRS.
    tcrit: Option<String>,
}

fn load_association(input: &InputArgs) -> Result<(AssociationSet, Vec<PathBuf>, Option<String>), CliError> {
    match input.source {
        Source::Gp => {
            let patients = input.patients.as_ref().expect("clap enforces gp paths");
            let prescriptions = input.prescriptions.as_ref().expect("clap enforces gp paths");
            let events = input.events.as_ref().expect("clap enforces gp paths");
            let tcrit_token = input.tcrit.as_ref().expect("clap enforces --tcrit for gp");
            let window = WindowConfig::parse(tcrit_token).map_err(CliError::usage)?;
            let dataset =
                ingest::load_gp(patients, prescriptions, events).map_err(CliError::data)?;
            println!(
                "loaded {} patients, {} prescriptions, {} events",
                dataset.patients.len(),
                dataset.prescriptions.len(),
                dataset.events.len()
            );
            let assoc = windowing::associate_gp(&dataset, window);
            Ok((
                assoc,
                vec![patients.clone(), prescriptions.clone(), events.clone()],
                Some(window.to_string()),
            ))
        }
        Source::Srs => {
            if input.tcrit.is_some() {
                return Err(CliError::Usage(
                    "--tcrit applies to GP sources only; spontaneous reports carry their own links".into(),
                ));
            }
            let reports = input.reports.as_ref().expect("clap enforces srs path");
            let dataset = ingest::load_srs(reports).map_err(CliError::data)?;
            println!(
                "loaded {} reports (any optional field missing: {:.1}%)",
                dataset.reports.len(),
                dataset.missingness.any * 100.0
            );
            if dataset.rejected_rows > 0 {
                eprintln!(
                    "warning: skipped {} unusable report rows",
                    dataset.rejected_rows
                );
            }
            let assoc = windowing::associate_srs(&dataset);
            Ok((assoc, vec![reports.clone()], None))
        }
    }
}

fn resolve_drug(assoc: &AssociationSet, raw: &str) -> Result<DrugId, CliError> {
    let drug = DrugId::new(raw).map_err(CliError::usage)?;
    if assoc.universe_drugs().contains(&drug) {
        return Ok(drug);
    }
    let suggestions = suggest::nearest(
        drug.as_str(),
        assoc.universe_drugs().iter().map(|d| d.as_str()),
        3,
    );
    Err(CliError::Usage(format!(
        "unknown drug id {raw:?}; nearest known ids: {}",
        suggestions.join(", ")
    )))
}

fn analyse(args: &SignalArgs) -> Result<Analysis, CliError> {
    let (assoc, input_paths, tcrit) = load_association(&args.input)?;
    let drug = resolve_drug(&assoc, &args.drug)?;
    let ranking = signal::rank_signals(&assoc, &drug, args.method.into(), args.zero_policy.into())
        .map_err(CliError::data)?;
    Ok(Analysis {
        assoc,
        ranking,
        drug,
        input_paths,
        tcrit,
    })
}

fn signal_parameters(args: &SignalArgs, analysis: &Analysis) -> serde_json::Value {
    json!({
        "source": match args.input.source { Source::Gp => "gp", Source::Srs => "srs" },
        "drug": analysis.drug.as_str(),
        "method": analysis.ranking.method.name(),
        "zero_policy": match args.zero_policy { ZeroPolicyArg::Strict => "strict", ZeroPolicyArg::Haldane => "haldane" },
        "tcrit": analysis.tcrit,
        "triples": analysis.assoc.len(),
        "universe_events": analysis.assoc.universe_events().len(),
        "universe_drugs": analysis.assoc.universe_drugs().len(),
    })
}

fn create_file(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn run_signal(args: &SignalArgs) -> Result<(), CliError> {
    let analysis = analyse(args)?;
    ensure_out_dir(&args.out)?;

    let signals_path = args.out.join("signals.csv");
    analysis
        .ranking
        .write_csv(create_file(&signals_path)?)
        .map_err(CliError::data)?;
    if !analysis.ranking.undefined.is_empty() {
        let undefined_path = args.out.join("undefined.csv");
        analysis
            .ranking
            .write_undefined_csv(create_file(&undefined_path)?)
            .map_err(CliError::data)?;
        eprintln!(
            "warning: {} events have undefined estimates (zero cells); see {}",
            analysis.ranking.undefined.len(),
            undefined_path.display()
        );
    }

    let inputs: Vec<&Path> = analysis.input_paths.iter().map(PathBuf::as_path).collect();
    RunManifest::new(&inputs, signal_parameters(args, &analysis))?.write(&args.out)?;

    let signaled = analysis.ranking.signaled_events().count();
    println!(
        "ranked {} events for drug {} ({}, {} undefined, {} signaled) -> {}",
        analysis.ranking.ranked.len(),
        analysis.drug,
        analysis.ranking.method.name(),
        analysis.ranking.undefined.len(),
        signaled,
        args.out.display()
    );
    Ok(())
}

/// The AUC result file written by `roc` and read back by `compare`.
#[derive(Debug, Serialize, Deserialize)]
pub struct AucReport {
    pub source: String,
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tcrit: Option<String>,
    pub drug: String,
    pub auc: f64,
    pub se: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fpr_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partial_auc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partial_se: Option<f64>,
}

fn load_known_sets(
    path: &Path,
    source: Source,
) -> Result<Vec<KnownAdeSet>, CliError> {
    let raw = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    // BTreeMap keeps the evaluation order independent of file order
    let parsed: BTreeMap<String, Vec<String>> = serde_json::from_str(&raw)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut sets = Vec::with_capacity(parsed.len());
    for (name, codes) in parsed {
        let mut keys = BTreeSet::new();
        for code in codes {
            let key = match source {
                Source::Gp => EventKey::Code(
                    EventCode::parse(&code)
                        .map_err(|e| CliError::Data(format!("known set {name:?}: {e}")))?,
                ),
                Source::Srs => EventKey::name(&code)
                    .map_err(|e| CliError::Data(format!("known set {name:?}: {e}")))?,
            };
            keys.insert(key);
        }
        sets.push(KnownAdeSet::new(name, keys).map_err(CliError::data)?);
    }
    Ok(sets)
}

fn write_detection_csv(
    path: &Path,
    known: &[KnownAdeSet],
    signaled: &BTreeSet<&EventKey>,
) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    let err = |e: csv::Error| CliError::Data(format!("{}: {e}", path.display()));
    w.write_record(["ade", "signaled"]).map_err(err)?;
    for set in known {
        let hit = set.codes().iter().any(|k| signaled.contains(k));
        w.write_record([set.name(), if hit { "true" } else { "false" }])
            .map_err(err)?;
    }
    w.flush()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, CliError> {
    Ok(csv::Writer::from_writer(create_file(path)?))
}

pub fn run_roc(args: &RocArgs) -> Result<(), CliError> {
    let analysis = analyse(&args.signal)?;
    let known = load_known_sets(&args.known, args.signal.input.source)?;

    let scores = analysis.ranking.scores();
    let universe = analysis.assoc.universe_events();
    let curve = eval::roc_curve(&scores, &known, universe).map_err(CliError::data)?;
    let result = AucResult::from_curve(&curve).map_err(CliError::data)?;

    let (fpr_max, partial, partial_se) = match args.fpr_max {
        Some(limit) => {
            let partial = eval::partial_auc(&curve, limit).map_err(CliError::usage)?;
            // SE via the same machinery on the segment, normalised to [0, 1]
            // and scaled back; a caveat documented in the README.
            let se = limit
                * eval::auc_se(partial / limit, curve.n_pos(), curve.n_neg())
                    .map_err(CliError::data)?;
            (Some(limit), Some(partial), Some(se))
        }
        None => (None, None, None),
    };

    ensure_out_dir(&args.signal.out)?;
    let out = &args.signal.out;
    let roc_path = out.join("roc.tsv");
    curve
        .write_tsv(create_file(&roc_path)?)
        .map_err(|e| CliError::Data(format!("{}: {e}", roc_path.display())))?;

    let report = AucReport {
        source: match args.signal.input.source {
            Source::Gp => "gp".into(),
            Source::Srs => "srs".into(),
        },
        method: analysis.ranking.method.name().into(),
        tcrit: analysis.tcrit.clone(),
        drug: analysis.drug.as_str().into(),
        auc: result.auc,
        se: result.se,
        n_pos: result.n_pos,
        n_neg: result.n_neg,
        fpr_max,
        partial_auc: partial,
        partial_se,
    };
    write_json(&out.join("auc.json"), &report)?;

    let signaled: BTreeSet<&EventKey> = analysis.ranking.signaled_events().collect();
    write_detection_csv(&out.join("detection.csv"), &known, &signaled)?;

    let mut inputs: Vec<&Path> = analysis.input_paths.iter().map(PathBuf::as_path).collect();
    inputs.push(args.known.as_path());
    let mut parameters = signal_parameters(&args.signal, &analysis);
    parameters["known_sets"] = json!(known.len());
    parameters["fpr_max"] = json!(args.fpr_max);
    RunManifest::new(&inputs, parameters)?.write(out)?;

    match (partial, fpr_max) {
        (Some(p), Some(limit)) => println!(
            "auc {:.4} (se {:.4}); partial auc {:.6} at fpr <= {} -> {}",
            result.auc,
            result.se,
            p,
            limit,
            out.display()
        ),
        _ => println!(
            "auc {:.4} (se {:.4}) over {} known sets, {} other events -> {}",
            result.auc,
            result.se,
            curve.n_pos(),
            curve.n_neg(),
            out.display()
        ),
    }
    Ok(())
}

/// Segment (partial-AUC) comparison block of the comparison report.
#[derive(Debug, Serialize, Deserialize)]
pub struct SegmentComparison {
    pub fpr_max: f64,
    pub auc1: f64,
    pub se1: f64,
    pub auc2: f64,
    pub se2: f64,
    pub z: f64,
    pub p: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub auc1: f64,
    pub se1: f64,
    pub auc2: f64,
    pub se2: f64,
    pub r: f64,
    pub z: f64,
    pub p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub segment: Option<SegmentComparison>,
}

fn read_auc_report(path: &Path) -> Result<AucReport, CliError> {
    let raw = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&raw).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn run_compare(args: &CompareArgs) -> Result<(), CliError> {
    let first = read_auc_report(&args.first)?;
    let second = read_auc_report(&args.second)?;

    let a1 = AucResult {
        auc: first.auc,
        se: first.se,
        n_pos: first.n_pos,
        n_neg: first.n_neg,
    };
    let a2 = AucResult {
        auc: second.auc,
        se: second.se,
        n_pos: second.n_pos,
        n_neg: second.n_neg,
    };
    let full = eval::compare_auc(&a1, &a2, args.r).map_err(CliError::usage)?;

    let segment = match (first.fpr_max, second.fpr_max) {
        (None, None) => None,
        (Some(x), Some(y)) if x == y => {
            let (Some(p1), Some(s1), Some(p2), Some(s2)) = (
                first.partial_auc,
                first.partial_se,
                second.partial_auc,
                second.partial_se,
            ) else {
                return Err(CliError::Data(
                    "partial AUC fields missing from an input with fpr_max set".into(),
                ));
            };
            let b1 = AucResult { auc: p1, se: s1, n_pos: first.n_pos, n_neg: first.n_neg };
            let b2 = AucResult { auc: p2, se: s2, n_pos: second.n_pos, n_neg: second.n_neg };
            // ZeroVariance here means both segments are degenerate; surface it
            let cmp = eval::compare_auc(&b1, &b2, args.r).map_err(CliError::data)?;
            Some(SegmentComparison {
                fpr_max: x,
                auc1: p1,
                se1: s1,
                auc2: p2,
                se2: s2,
                z: cmp.z,
                p: cmp.p,
            })
        }
        (x, y) => {
            return Err(CliError::Usage(format!(
                "mismatched fpr-max between inputs: {:?} vs {:?}",
                x, y
            )));
        }
    };

    let report = ComparisonReport {
        auc1: full.auc1,
        se1: full.se1,
        auc2: full.auc2,
        se2: full.se2,
        r: full.r,
        z: full.z,
        p: full.p,
        segment,
    };

    ensure_out_dir(&args.out)?;
    write_json(&args.out.join("comparison.json"), &report)?;
    RunManifest::new(
        &[args.first.as_path(), args.second.as_path()],
        json!({ "r": args.r }),
    )?
    .write(&args.out)?;

    println!(
        "auc {:.4} vs {:.4}: z = {:.4}, p = {:.4} -> {}",
        report.auc1,
        report.auc2,
        report.z,
        report.p,
        args.out.display()
    );
    Ok(())
}
