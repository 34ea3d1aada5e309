use std::path::Path;

use nary_schema::baseline::hardclust;
use nary_schema::corpus::{
    build_4mode_tensor, build_backoff_tensors, filter_top_relations, parse_tuples, split_five_tuples, ParseOptions,
};
use nary_schema::factorization::factorize;
use nary_schema::io::{
    read_backoff_jsonl, read_factors_bin, read_factors_json, read_schema_rows, render_rows, write_backoff_jsonl,
    write_factors_bin, write_schema_rows, write_tuples_tsv, SchemaRow,
};
use nary_schema::model_selection::{cell_seed, grid_search, GridResult};
use nary_schema::schema_miner::induce_schemata;
use nary_schema::synth::{generate, SyntheticSpec};
use nary_schema::{
    BackoffTensors, Error, FactorSet, FitReport, Ranks, Regularizers, Result, SolverOptions, TupleRecord,
};
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::output::{Artifacts, Input};

struct Prepared {
    records: Vec<TupleRecord>,
    parsed: usize,
    malformed: usize,
    dropped_without_other: usize,
    after_split: usize,
    relations_seen: usize,
}

fn prepare(input: &Input, cfg: &RunConfig) -> Result<Prepared> {
    let opts = ParseOptions { lowercase: cfg.lowercase, strict: cfg.strict };
    let parsed = parse_tuples(&input.bytes[..], opts)?;
    for issue in &parsed.issues {
        log::warn!("{}:{}: {}", input.path.display(), issue.line, issue.reason);
    }
    let n_parsed = parsed.records.len();
    let (split, dropped) = split_five_tuples(parsed.records);
    let after_split = split.len();
    let relations_seen = split.iter().map(|r| r.relation.as_str()).collect::<std::collections::HashSet<_>>().len();
    let records = filter_top_relations(split, cfg.top_relations)?;
    if records.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(Prepared {
        records,
        parsed: n_parsed,
        malformed: parsed.issues.len(),
        dropped_without_other: dropped,
        after_split,
        relations_seen,
    })
}

fn parse_settings(cfg: &RunConfig) -> serde_json::Value {
    json!({ "top_relations": cfg.top_relations, "lowercase": cfg.lowercase, "strict": cfg.strict })
}

fn dims(shape: [usize; 3]) -> String {
    format!("{}×{}×{}", shape[0], shape[1], shape[2])
}

#[derive(Debug, Serialize)]
struct VocabularySizes {
    subjects: usize,
    objects: usize,
    others: usize,
    relations: usize,
}

#[derive(Debug, Serialize)]
struct TensorSummary {
    /// `rows×cols×relations`.
    shape: String,
    nnz: usize,
}

#[derive(Debug, Serialize)]
struct FourModeSummary {
    shape: [usize; 4],
    nnz: usize,
    sparsity_ratio: f64,
}

#[derive(Debug, Serialize)]
struct IngestReport {
    records_parsed: usize,
    malformed_lines: usize,
    dropped_without_other: usize,
    records_after_split: usize,
    relations_seen: usize,
    relations_kept: usize,
    records_kept: usize,
    total_count: u64,
    vocabulary: VocabularySizes,
    x1: TensorSummary,
    x2: TensorSummary,
    x3: TensorSummary,
    four_mode: FourModeSummary,
}

pub fn ingest(cfg: &RunConfig) -> Result<()> {
    let input = Input::read(cfg.input()?)?;
    let out_dir = cfg.out_dir()?;
    let prep = prepare(&input, cfg)?;
    let t = build_backoff_tensors(&prep.records)?;
    let four = build_4mode_tensor(&prep.records)?;
    let (n1, n2, n3, m) = t.vocab.sizes();
    let report = IngestReport {
        records_parsed: prep.parsed,
        malformed_lines: prep.malformed,
        dropped_without_other: prep.dropped_without_other,
        records_after_split: prep.after_split,
        relations_seen: prep.relations_seen,
        relations_kept: m,
        records_kept: prep.records.len(),
        total_count: prep.records.iter().map(|r| r.count).sum(),
        vocabulary: VocabularySizes { subjects: n1, objects: n2, others: n3, relations: m },
        x1: TensorSummary { shape: dims(t.x1.shape()), nnz: t.x1.nnz() },
        x2: TensorSummary { shape: dims(t.x2.shape()), nnz: t.x2.nnz() },
        x3: TensorSummary { shape: dims(t.x3.shape()), nnz: t.x3.nnz() },
        four_mode: FourModeSummary { shape: four.shape, nnz: four.nnz(), sparsity_ratio: four.sparsity_ratio() },
    };
    println!(
        "X1 {}  X2 {}  X3 {}  4-mode sparsity {}",
        report.x1.shape, report.x2.shape, report.x3.shape, report.four_mode.sparsity_ratio
    );

    let mut backoff = Vec::new();
    write_backoff_jsonl(&mut backoff, &t)?;
    let mut out = Artifacts::new("ingest");
    out.add("backoff.jsonl", backoff);
    out.add_json("ingest_report.json", &report)?;
    out.commit(out_dir, None, parse_settings(cfg), &[&input])
}

fn load_tensors(path: &Path) -> Result<(Input, BackoffTensors)> {
    let input = Input::read(path)?;
    let t = read_backoff_jsonl(&input.bytes[..])?;
    Ok((input, t))
}

fn load_factors(path: &Path) -> Result<(Input, FactorSet)> {
    let input = Input::read(path)?;
    let f = if path.extension().is_some_and(|e| e == "json") {
        read_factors_json(&input.bytes[..])?
    } else {
        read_factors_bin(&input.bytes[..])?
    };
    Ok((input, f))
}

#[derive(Debug, Serialize)]
struct FitSummary {
    ranks: Ranks,
    reg: Regularizers,
    seed: u64,
    report: FitReport,
}

fn factor_artifacts(out: &mut Artifacts, f: &FactorSet, summary: &FitSummary) -> Result<()> {
    let mut bin = Vec::new();
    write_factors_bin(&mut bin, f)?;
    out.add("factors.bin", bin);
    out.add_json("fit_report.json", summary)
}

fn print_fit(summary: &FitSummary) {
    let r = &summary.report;
    println!(
        "ranks ({}, {}, {})  FIT {} {} {}  AvgFIT {}  after {} sweeps",
        summary.ranks.r1, summary.ranks.r2, summary.ranks.r3, r.fit1, r.fit2, r.fit3, r.avg_fit, r.iterations_run
    );
}

/// Fits one fixed configuration. The seed is derived exactly as for cell 0
/// of a grid, so a one-cell grid search reproduces this output.
pub fn factorize_cmd(cfg: &RunConfig) -> Result<()> {
    let ranks = cfg
        .ranks
        .ok_or_else(|| Error::Config("factorize needs fixed ranks (--ranks r1,r2,r3)".into()))?;
    let out_dir = cfg.out_dir()?;
    let (input, t) = load_tensors(&cfg.tensors_path()?)?;
    let (n1, n2, n3, _) = t.vocab.sizes();
    ranks.validate(n1, n2, n3)?;
    let opts = SolverOptions { seed: cell_seed(cfg.solver.seed, 0), ..cfg.solver };
    let (f, report) = factorize(&t, ranks, cfg.reg, &opts)?;
    let summary = FitSummary { ranks, reg: cfg.reg, seed: opts.seed, report };
    print_fit(&summary);

    let mut out = Artifacts::new("factorize");
    factor_artifacts(&mut out, &f, &summary)?;
    let settings = json!({ "ranks": ranks, "reg": cfg.reg, "solver": cfg.solver });
    out.commit(out_dir, Some(cfg.solver.seed), settings, &[&input])
}

fn grid_csv(result: &GridResult, timings: bool) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "index", "r1", "r2", "r3", "lambda_a", "lambda_b", "lambda_c", "seed", "fit1", "fit2", "fit3", "avg_fit",
        "objective", "iterations", "winner",
    ];
    if timings {
        header.push("seconds");
    }
    let csv_err = |e: csv::Error| Error::Artifact(e.to_string());
    w.write_record(&header).map_err(csv_err)?;
    for (pos, e) in result.entries.iter().enumerate() {
        let mut row = vec![
            e.index.to_string(),
            e.ranks.r1.to_string(),
            e.ranks.r2.to_string(),
            e.ranks.r3.to_string(),
            e.reg.lambda_a.to_string(),
            e.reg.lambda_b.to_string(),
            e.reg.lambda_c.to_string(),
            e.seed.to_string(),
            e.report.fit1.to_string(),
            e.report.fit2.to_string(),
            e.report.fit3.to_string(),
            e.report.avg_fit.to_string(),
            e.report.objective.to_string(),
            e.report.iterations_run.to_string(),
            (pos == result.winner).to_string(),
        ];
        if timings {
            row.push(e.elapsed.as_secs_f64().to_string());
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Artifact(e.to_string()))
}

pub fn gridsearch(cfg: &RunConfig) -> Result<()> {
    if cfg.ranks.is_some() {
        return Err(Error::Config("gridsearch takes a grid, not fixed ranks".into()));
    }
    let spec = cfg.grid.clone().unwrap_or_default();
    spec.validate()?;
    let out_dir = cfg.out_dir()?;
    let (input, t) = load_tensors(&cfg.tensors_path()?)?;
    let result = grid_search(&t, &spec, &cfg.solver)?;
    for s in &result.skipped {
        log::warn!("skipped cell {}: {}", s.index, s.reason);
    }
    let best = result.best();
    let opts = SolverOptions { seed: best.seed, ..cfg.solver };
    let (f, report) = factorize(&t, best.ranks, best.reg, &opts)?;
    if report != best.report {
        return Err(Error::Artifact("refitting the winning cell did not reproduce its report".into()));
    }
    let summary = FitSummary { ranks: best.ranks, reg: best.reg, seed: best.seed, report };
    println!("{} cells, {} skipped; winner cell {}", result.entries.len(), result.skipped.len(), best.index);
    print_fit(&summary);

    let mut out = Artifacts::new("gridsearch");
    out.add("grid.csv", grid_csv(&result, cfg.timings)?);
    out.add_json("grid.json", &result)?;
    factor_artifacts(&mut out, &f, &summary)?;
    let settings = json!({ "grid": spec, "solver": cfg.solver });
    out.commit(out_dir, Some(cfg.solver.seed), settings, &[&input])
}

fn schema_artifacts(out: &mut Artifacts, stem: &str, rows: &[SchemaRow]) -> Result<()> {
    let mut jsonl = Vec::new();
    write_schema_rows(&mut jsonl, rows)?;
    out.add(&format!("{stem}.jsonl"), jsonl);
    out.add(&format!("{stem}.txt"), render_rows(rows).into_bytes());
    Ok(())
}

pub fn mine(cfg: &RunConfig) -> Result<()> {
    let out_dir = cfg.out_dir()?;
    let (t_input, t) = load_tensors(&cfg.tensors_path()?)?;
    let (f_input, f) = load_factors(&cfg.factors_path()?)?;
    f.check_shapes(&t)?;
    let induced = induce_schemata(&f, &t.vocab, &cfg.miner)?;
    let rows: Vec<SchemaRow> = induced.iter().enumerate().map(|(i, s)| SchemaRow::from_induced(i + 1, s)).collect();
    println!("{} schemata", rows.len());

    let mut out = Artifacts::new("mine");
    schema_artifacts(&mut out, "schemata", &rows)?;
    out.commit(out_dir, None, json!({ "miner": cfg.miner }), &[&t_input, &f_input])
}

pub fn hardclust_cmd(cfg: &RunConfig) -> Result<()> {
    let input = Input::read(cfg.input()?)?;
    let out_dir = cfg.out_dir()?;
    let prep = prepare(&input, cfg)?;
    let schemata = hardclust(&prep.records, cfg.hardclust_k);
    let rows: Vec<SchemaRow> = schemata.iter().enumerate().map(|(i, s)| SchemaRow::from_hardclust(i + 1, s)).collect();
    println!("{} schemata", rows.len());

    let mut out = Artifacts::new("hardclust");
    schema_artifacts(&mut out, "hardclust", &rows)?;
    let mut settings = parse_settings(cfg);
    settings["k"] = json!(cfg.hardclust_k);
    out.commit(out_dir, None, settings, &[&input])
}

pub fn synth(cfg: &RunConfig) -> Result<()> {
    let spec = cfg.synth.clone().unwrap_or_else(|| SyntheticSpec::standard(0, 0.0));
    spec.validate()?;
    let out_dir = cfg.out_dir()?;
    let corpus = generate(&spec)?;
    println!(
        "{} planted and {} noise tuples over {} relations",
        corpus.planted_tuples, corpus.noise_tuples, spec.relations
    );
    let mut tsv = Vec::new();
    write_tuples_tsv(&mut tsv, &corpus.records)?;

    let mut out = Artifacts::new("synth");
    out.add("tuples.tsv", tsv);
    out.add_json("synth_spec.json", &spec)?;
    out.commit(out_dir, Some(spec.seed), json!({ "synth": spec }), &[])
}

/// Prints schema files as text tables, optionally truncated.
pub fn report(files: &[std::path::PathBuf], top: Option<usize>) -> Result<()> {
    if files.is_empty() {
        return Err(Error::Config("report needs at least one schemata file".into()));
    }
    for path in files {
        let input = Input::read(path)?;
        let mut rows = read_schema_rows(&input.bytes[..])?;
        if let Some(k) = top {
            rows.truncate(k);
        }
        if files.len() > 1 {
            println!("== {} ==", path.display());
        }
        print!("{}", render_rows(&rows));
    }
    Ok(())
}
