//! Significance comparison of two curves files.
//!
//! Pairs runs across files on (seed, fold) and t-tests each round; the
//! last round (the post-loop evaluation) is the "final" verdict.

use crate::CliError;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;
use wavefuse_core::stats::paired_t_test;

#[derive(Debug, Clone, PartialEq)]
pub struct RoundComparison {
    pub round: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub t: f64,
    pub p: f64,
    pub significant: bool,
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub method_a: String,
    pub method_b: String,
    pub metric: String,
    pub n_pairs: usize,
    pub rounds: Vec<RoundComparison>,
}

impl ComparisonReport {
    pub fn final_round(&self) -> &RoundComparison {
        self.rounds.last().expect("at least one round")
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "paired t-test: {} vs {} on {} ({} paired runs)",
            self.method_a, self.method_b, self.metric, self.n_pairs
        );
        let _ = writeln!(
            out,
            "{:>6} {:>12} {:>12} {:>10} {:>10}  sig",
            "round", "mean_a", "mean_b", "t", "p"
        );
        for row in &self.rounds {
            let _ = writeln!(
                out,
                "{:>6} {:>12.6} {:>12.6} {:>10.4} {:>10.6}  {}",
                row.round,
                row.mean_a,
                row.mean_b,
                row.t,
                row.p,
                if row.significant { "*" } else { "-" }
            );
        }
        let last = self.final_round();
        let _ = writeln!(
            out,
            "final round {}: p = {:.6} -> {}",
            last.round,
            last.p,
            if last.significant {
                "significant (p < 0.05)"
            } else {
                "not significant"
            }
        );
        out
    }
}

type CurveKey = (u64, usize, usize); // (seed, fold, round)

struct CurveFile {
    method: String,
    values: BTreeMap<CurveKey, f64>,
}

fn parse_curves(path: &Path, metric: &str) -> Result<CurveFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Run(format!("{}: empty file", path.display())))?;
    if header != "method,seed,fold,round,n_labeled,metric,value" {
        return Err(CliError::Run(format!(
            "{}: not a curves file",
            path.display()
        )));
    }
    let mut methods = BTreeSet::new();
    let mut values = BTreeMap::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(CliError::Run(format!(
                "{}: malformed row {}",
                path.display(),
                lineno + 2
            )));
        }
        if fields[5] != metric {
            continue;
        }
        methods.insert(fields[0].to_string());
        let parse = |what: &str, s: &str| -> Result<u64, CliError> {
            s.parse().map_err(|_| {
                CliError::Run(format!(
                    "{}: bad {what} in row {}",
                    path.display(),
                    lineno + 2
                ))
            })
        };
        let seed = parse("seed", fields[1])?;
        let fold = parse("fold", fields[2])? as usize;
        let round = parse("round", fields[3])? as usize;
        let value: f64 = fields[6].parse().map_err(|_| {
            CliError::Run(format!(
                "{}: bad value in row {}",
                path.display(),
                lineno + 2
            ))
        })?;
        values.insert((seed, fold, round), value);
    }
    if values.is_empty() {
        return Err(CliError::Run(format!(
            "{}: no rows for metric {metric}",
            path.display()
        )));
    }
    if methods.len() != 1 {
        return Err(CliError::Run(format!(
            "{}: expected exactly one method per file, found {:?}",
            path.display(),
            methods
        )));
    }
    Ok(CurveFile {
        method: methods.into_iter().next().unwrap(),
        values,
    })
}

/// Compares two single-method curves files on a metric.
pub fn compare_files(
    path_a: &Path,
    path_b: &Path,
    metric: &str,
) -> Result<ComparisonReport, CliError> {
    let a = parse_curves(path_a, metric)?;
    let b = parse_curves(path_b, metric)?;

    let run_ids = |f: &CurveFile| -> BTreeSet<(u64, usize)> {
        f.values.keys().map(|&(s, f, _)| (s, f)).collect()
    };
    let ids_a = run_ids(&a);
    let ids_b = run_ids(&b);
    if ids_a != ids_b {
        return Err(CliError::Run(format!(
            "seed/fold mismatch: {ids_a:?} vs {ids_b:?}"
        )));
    }
    let rounds_of =
        |f: &CurveFile| -> BTreeSet<usize> { f.values.keys().map(|&(_, _, r)| r).collect() };
    let rounds_a = rounds_of(&a);
    if rounds_a != rounds_of(&b) {
        return Err(CliError::Run("round mismatch between files".into()));
    }

    let pairs: Vec<(u64, usize)> = ids_a.into_iter().collect();
    if pairs.len() < 2 {
        return Err(CliError::Run(
            "need at least 2 paired runs for a t-test".into(),
        ));
    }
    let mut rounds = Vec::new();
    for &round in &rounds_a {
        let va: Vec<f64> = pairs
            .iter()
            .map(|&(s, f)| a.values[&(s, f, round)])
            .collect();
        let vb: Vec<f64> = pairs
            .iter()
            .map(|&(s, f)| b.values[&(s, f, round)])
            .collect();
        let test = paired_t_test(&va, &vb).map_err(|e| CliError::Run(e.to_string()))?;
        rounds.push(RoundComparison {
            round,
            mean_a: va.iter().sum::<f64>() / va.len() as f64,
            mean_b: vb.iter().sum::<f64>() / vb.len() as f64,
            t: test.t,
            p: test.p,
            significant: test.p < 0.05,
        });
    }
    Ok(ComparisonReport {
        method_a: a.method,
        method_b: b.method,
        metric: metric.to_string(),
        n_pairs: pairs.len(),
        rounds,
    })
}
