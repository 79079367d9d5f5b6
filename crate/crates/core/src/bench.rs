//! Corpus runs, per-run records and suite summaries.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use web_time::Instant;

use crate::engine::{solve, EngineConfig, VerdictKind};
use crate::objective::Ablation;
use crate::smt::{format_model, is_model, parse};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expected {
    Sat,
    Unsat,
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("soundness violation: {path} reported sat but is expected unsat\n{model}")]
    SoundnessViolation { path: String, model: String },
    #[error("model emitted for {path} fails validation\n{model}")]
    InvalidModel { path: String, model: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad expected status `{0}`")]
    BadStatus(String),
}

/// Verdict string of one run, including failures to parse or solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum RunVerdict {
    #[serde(rename = "sat")]
    Sat,
    #[serde(rename = "unsat-guess")]
    UnsatGuess,
    #[serde(rename = "timeout")]
    Timeout,
    #[serde(rename = "error")]
    Error,
}

impl RunVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunVerdict::Sat => "sat",
            RunVerdict::UnsatGuess => "unsat-guess",
            RunVerdict::Timeout => "timeout",
            RunVerdict::Error => "error",
        }
    }

    pub fn is_decided(&self) -> bool {
        matches!(self, RunVerdict::Sat | RunVerdict::UnsatGuess)
    }
}

impl From<VerdictKind> for RunVerdict {
    fn from(k: VerdictKind) -> Self {
        match k {
            VerdictKind::Sat => RunVerdict::Sat,
            VerdictKind::UnsatGuess => RunVerdict::UnsatGuess,
            VerdictKind::Timeout => RunVerdict::Timeout,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub path: String,
    pub run: usize,
    pub verdict: RunVerdict,
    /// Wall time in seconds; timeouts are recorded at the cap.
    pub time_s: f64,
    pub seed: u64,
    pub model: Option<String>,
    pub config_digest: String,
}

#[derive(Serialize)]
struct RunRow<'a> {
    path: &'a str,
    run: usize,
    verdict: &'a str,
    time: f64,
    seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteSummary {
    pub n: usize,
    pub n_sat: usize,
    pub n_unsat_guess: usize,
    pub n_timeout: usize,
    pub n_error: usize,
    /// Only when expected statuses were supplied.
    pub sat_recall: Option<f64>,
    pub timeout_rate: f64,
    pub mean_time_s: f64,
    pub median_time_s: f64,
}

pub const SUMMARY_FIELDS: [&str; 9] = [
    "n",
    "n_sat",
    "n_unsat_guess",
    "n_timeout",
    "n_error",
    "sat_recall",
    "timeout_rate",
    "mean_time_s",
    "median_time_s",
];

/// Per-instance outcome after folding repeats.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceOutcome {
    pub path: String,
    pub verdict: RunVerdict,
    pub time_s: f64,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub engine: EngineConfig,
    pub repeats: usize,
}

#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub records: Vec<RunRecord>,
    pub instances: Vec<InstanceOutcome>,
    pub summary: SuiteSummary,
    pub warnings: Vec<String>,
}

/// Lower-middle median: for an even count the smaller of the two middle
/// elements.
pub fn median_lower(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v[(v.len() - 1) / 2]
}

/// Short stable hash of a configuration, for telling runs apart.
pub fn config_digest(cfg: &EngineConfig) -> String {
    let text = format!("{cfg:?}");
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    format!("{h:016x}")
}

/// Any repeat that decides the instance decides it (sat before
/// unsat-guess); time is the mean over deciding repeats, or the mean over
/// all repeats when none decided.
pub fn fold_repeats(path: &str, runs: &[&RunRecord]) -> InstanceOutcome {
    let pick = |v: RunVerdict| runs.iter().any(|r| r.verdict == v);
    let verdict = [RunVerdict::Sat, RunVerdict::UnsatGuess, RunVerdict::Timeout]
        .into_iter()
        .find(|&v| pick(v))
        .unwrap_or(RunVerdict::Error);
    let decided: Vec<f64> = runs.iter().filter(|r| r.verdict.is_decided()).map(|r| r.time_s).collect();
    let times: Vec<f64> = if decided.is_empty() {
        runs.iter().map(|r| r.time_s).collect()
    } else {
        decided
    };
    let time_s = if times.is_empty() { 0.0 } else { times.iter().sum::<f64>() / times.len() as f64 };
    InstanceOutcome { path: path.to_string(), verdict, time_s }
}

pub fn summarize(instances: &[InstanceOutcome], expected: Option<&HashMap<String, Expected>>) -> SuiteSummary {
    let count = |v: RunVerdict| instances.iter().filter(|i| i.verdict == v).count();
    let n = instances.len();
    let times: Vec<f64> = instances.iter().map(|i| i.time_s).collect();
    let sat_recall = expected.map(|exp| {
        let truth_sat: Vec<&InstanceOutcome> =
            instances.iter().filter(|i| exp.get(&i.path) == Some(&Expected::Sat)).collect();
        if truth_sat.is_empty() {
            0.0
        } else {
            truth_sat.iter().filter(|i| i.verdict == RunVerdict::Sat).count() as f64 / truth_sat.len() as f64
        }
    });
    SuiteSummary {
        n,
        n_sat: count(RunVerdict::Sat),
        n_unsat_guess: count(RunVerdict::UnsatGuess),
        n_timeout: count(RunVerdict::Timeout),
        n_error: count(RunVerdict::Error),
        sat_recall,
        timeout_rate: if n == 0 { 0.0 } else { count(RunVerdict::Timeout) as f64 / n as f64 },
        mean_time_s: if n == 0 { 0.0 } else { times.iter().sum::<f64>() / n as f64 },
        median_time_s: median_lower(&times),
    }
}

/// Parses a `path,status` table with statuses `sat` or `unsat`.
pub fn parse_expected<R: Read>(input: R) -> Result<HashMap<String, Expected>, BenchError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut out = HashMap::new();
    for row in rdr.records() {
        let row = row?;
        let (Some(path), Some(status)) = (row.get(0), row.get(1)) else {
            continue;
        };
        let status = match status {
            "sat" => Expected::Sat,
            "unsat" => Expected::Unsat,
            other => return Err(BenchError::BadStatus(other.to_string())),
        };
        out.insert(path.to_string(), status);
    }
    Ok(out)
}

/// Solves every instance `repeats` times. A sat verdict on an instance
/// expected unsat, or a model that fails re-validation, aborts the suite.
pub fn run_suite(
    instances: &[(String, String)],
    expected: Option<&HashMap<String, Expected>>,
    cfg: &BenchConfig,
    mut progress: impl FnMut(&RunRecord),
) -> Result<SuiteOutcome, BenchError> {
    let digest = config_digest(&cfg.engine);
    let cap = cfg.engine.timeout.map(|d| d.as_secs_f64());
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    for (path, source) in instances {
        if let Some(exp) = expected {
            if !exp.contains_key(path) {
                warnings.push(format!("no expected status for {path}"));
            }
        }
        for run in 0..cfg.repeats.max(1) {
            let seed = cfg.engine.optimizer.rng_seed.wrapping_add(run as u64);
            let mut engine = cfg.engine.clone();
            engine.optimizer.rng_seed = seed;
            let started = Instant::now();
            let (verdict, model) = match parse(source) {
                Err(_) => (RunVerdict::Error, None),
                Ok(f) => {
                    let f = Arc::new(f);
                    match solve(&f, &engine) {
                        Err(_) => (RunVerdict::Error, None),
                        Ok(v) => {
                            let text = v.model.as_ref().map(|m| format_model(&f, m));
                            if let Some(m) = &v.model {
                                if !is_model(&f, m) {
                                    return Err(BenchError::InvalidModel {
                                        path: path.clone(),
                                        model: text.unwrap_or_default(),
                                    });
                                }
                                if expected.and_then(|e| e.get(path)) == Some(&Expected::Unsat) {
                                    return Err(BenchError::SoundnessViolation {
                                        path: path.clone(),
                                        model: text.unwrap_or_default(),
                                    });
                                }
                            }
                            (v.kind.into(), text)
                        }
                    }
                }
            };
            let mut time_s = started.elapsed().as_secs_f64();
            if verdict == RunVerdict::Timeout {
                if let Some(cap) = cap {
                    time_s = cap;
                }
            }
            let record = RunRecord {
                path: path.clone(),
                run,
                verdict,
                time_s,
                seed,
                model,
                config_digest: digest.clone(),
            };
            progress(&record);
            records.push(record);
        }
    }
    let outcomes: Vec<InstanceOutcome> = instances
        .iter()
        .map(|(path, _)| {
            let runs: Vec<&RunRecord> = records.iter().filter(|r| &r.path == path).collect();
            fold_repeats(path, &runs)
        })
        .collect();
    let covered = expected.map(|e| {
        e.iter()
            .filter(|(k, _)| instances.iter().any(|(p, _)| p == *k))
            .map(|(k, v)| (k.clone(), *v))
            .collect::<HashMap<_, _>>()
    });
    let summary = summarize(&outcomes, covered.as_ref());
    Ok(SuiteOutcome { records, instances: outcomes, summary, warnings })
}

/// One suite per ablation variant, full pipeline first.
pub fn run_ablation_study(
    instances: &[(String, String)],
    expected: Option<&HashMap<String, Expected>>,
    cfg: &BenchConfig,
    variants: &[(String, Ablation)],
    mut progress: impl FnMut(&str, &RunRecord),
) -> Result<Vec<(String, SuiteOutcome)>, BenchError> {
    let mut out = Vec::new();
    for (name, ablation) in variants {
        let mut c = cfg.clone();
        c.engine.ablation = *ablation;
        let outcome = run_suite(instances, expected, &c, |r| progress(name, r))?;
        out.push((name.clone(), outcome));
    }
    Ok(out)
}

pub fn write_runs<W: Write>(out: W, records: &[RunRecord]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(RunRow {
            path: &r.path,
            run: r.run,
            verdict: r.verdict.as_str(),
            time: r.time_s,
            seed: r.seed,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary<W: Write>(out: W, summary: &SuiteSummary) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    w.serialize(summary)?;
    w.flush()?;
    Ok(())
}

/// One summary row per variant, with a leading `variant` column.
pub fn write_ablation<W: Write>(out: W, rows: &[(String, SuiteOutcome)]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(std::iter::once("variant").chain(SUMMARY_FIELDS))?;
    for (name, o) in rows {
        let s = &o.summary;
        w.write_record([
            name.clone(),
            s.n.to_string(),
            s.n_sat.to_string(),
            s.n_unsat_guess.to_string(),
            s.n_timeout.to_string(),
            s.n_error.to_string(),
            s.sat_recall.map(|r| r.to_string()).unwrap_or_default(),
            s.timeout_rate.to_string(),
            s.mean_time_s.to_string(),
            s.median_time_s.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Duration;

    fn rec(path: &str, run: usize, verdict: RunVerdict, t: f64) -> RunRecord {
        RunRecord {
            path: path.into(),
            run,
            verdict,
            time_s: t,
            seed: 0,
            model: None,
            config_digest: String::new(),
        }
    }

    #[test]
    fn lower_middle_median() {
        assert_eq!(median_lower(&[4.0, 1.0, 3.0, 2.0]), 2.0);
        assert_eq!(median_lower(&[5.0, 1.0, 3.0]), 3.0);
        assert_eq!(median_lower(&[]), 0.0);
    }

    #[test]
    fn repeats_fold_to_any_decision() {
        let a = rec("a", 0, RunVerdict::Timeout, 1200.0);
        let b = rec("a", 1, RunVerdict::Sat, 2.0);
        let c = rec("a", 2, RunVerdict::UnsatGuess, 4.0);
        let o = fold_repeats("a", &[&a, &b, &c]);
        assert_eq!(o.verdict, RunVerdict::Sat);
        assert_eq!(o.time_s, 3.0);
        let o = fold_repeats("a", &[&a, &a]);
        assert_eq!((o.verdict, o.time_s), (RunVerdict::Timeout, 1200.0));
    }

    #[test]
    fn timeout_rate_and_cap_in_mean() {
        let mut inst: Vec<InstanceOutcome> = (0..45)
            .map(|i| InstanceOutcome { path: format!("s{i}"), verdict: RunVerdict::Sat, time_s: 1.0 })
            .collect();
        for i in 0..4 {
            inst.push(InstanceOutcome { path: format!("t{i}"), verdict: RunVerdict::Timeout, time_s: 1200.0 });
        }
        let s = summarize(&inst, None);
        assert_eq!(s.n, 49);
        assert!((s.timeout_rate - 4.0 / 49.0).abs() < 1e-15);
        assert!((s.timeout_rate * 100.0 - 8.2).abs() < 0.05);
        assert!((s.mean_time_s - (45.0 + 4800.0) / 49.0).abs() < 1e-9);
        assert_eq!(s.sat_recall, None);
        assert_eq!(s.n_sat + s.n_unsat_guess + s.n_timeout + s.n_error, s.n);
    }

    #[test]
    fn recall_over_expected_sat() {
        let inst = vec![
            InstanceOutcome { path: "a".into(), verdict: RunVerdict::Sat, time_s: 1.0 },
            InstanceOutcome { path: "b".into(), verdict: RunVerdict::UnsatGuess, time_s: 1.0 },
            InstanceOutcome { path: "c".into(), verdict: RunVerdict::UnsatGuess, time_s: 1.0 },
        ];
        let exp: HashMap<String, Expected> =
            [("a".into(), Expected::Sat), ("b".into(), Expected::Sat), ("c".into(), Expected::Unsat)].into();
        assert_eq!(summarize(&inst, Some(&exp)).sat_recall, Some(0.5));
    }

    #[test]
    fn summary_csv_has_the_fixed_schema() {
        let s = summarize(&[], None);
        let mut buf = Vec::new();
        write_summary(&mut buf, &s).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), SUMMARY_FIELDS.join(","));
    }

    #[test]
    fn expected_table_parses() {
        let e = parse_expected("path,status\na.smt2, sat\nb.smt2,unsat\n".as_bytes()).unwrap();
        assert_eq!(e["a.smt2"], Expected::Sat);
        assert_eq!(e["b.smt2"], Expected::Unsat);
        assert!(parse_expected("path,status\na,maybe\n".as_bytes()).is_err());
    }

    #[test]
    fn suite_flags_unsound_ground_truth() {
        let toy = crate::corpus::source("toy.smt2").unwrap().to_string();
        let inst = vec![("toy.smt2".to_string(), toy)];
        let exp: HashMap<String, Expected> = [("toy.smt2".to_string(), Expected::Unsat)].into();
        let cfg = BenchConfig {
            engine: EngineConfig { timeout: Some(Duration::from_secs(10)), ..EngineConfig::default() },
            repeats: 1,
        };
        assert!(matches!(
            run_suite(&inst, Some(&exp), &cfg, |_| {}),
            Err(BenchError::SoundnessViolation { .. })
        ));
        let ok = run_suite(&inst, None, &cfg, |_| {}).unwrap();
        assert_eq!(ok.summary.n_sat, 1);
        let mut buf = Vec::new();
        write_runs(&mut buf, &ok.records).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("path,run,verdict,time,seed\ntoy.smt2,0,sat,"));
    }

    #[test]
    fn unparsable_instances_are_errors() {
        let inst = vec![("bad.smt2".to_string(), "(assert".to_string())];
        let cfg = BenchConfig { engine: EngineConfig::default(), repeats: 2 };
        let o = run_suite(&inst, None, &cfg, |_| {}).unwrap();
        assert_eq!(o.summary.n_error, 1);
        assert_eq!(o.records.len(), 2);
    }
}
