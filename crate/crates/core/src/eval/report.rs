use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{answer_recall, exact_match, EvalError, QaExample};
use crate::orchestrator::{ConfigSnapshot, ItrgTrace};

/// How predictions and documents were matched against gold answers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchingRules {
    pub normalization: String,
    pub exact_match: String,
    pub answer_recall: String,
}

impl Default for MatchingRules {
    fn default() -> Self {
        Self {
            normalization: "lowercase; unicode P* punctuation -> space; drop articles a/an/the; collapse whitespace".into(),
            exact_match: "normalized equality with any gold answer".into(),
            answer_recall: "normalized token-boundary containment of any gold answer in the generated document".into(),
        }
    }
}

/// Per-iteration aggregate metrics over one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_examples: usize,
    pub iterations: usize,
    pub per_iteration_em: Vec<f64>,
    pub per_iteration_answer_recall: Vec<f64>,
    pub em_hits: Vec<usize>,
    pub answer_recall_hits: Vec<usize>,
    pub matching: MatchingRules,
    pub config_snapshot: Option<ConfigSnapshot>,
    /// Example ids whose traces failed and were left out.
    #[serde(default)]
    pub failed_examples: Vec<String>,
}

impl EvalReport {
    /// Plain-text table: one column per iteration, EM and answer recall as
    /// percentages with one decimal.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        if let Some(snap) = &self.config_snapshot {
            let _ = writeln!(
                out,
                "mode: {}  shots: {}  top-k: {}  examples: {}",
                snap.mode, snap.shots, snap.config.top_k, self.n_examples
            );
        } else {
            let _ = writeln!(out, "examples: {}", self.n_examples);
        }
        let row = |label: &str, cells: Vec<String>| {
            let mut line = format!("{label:<14}");
            for c in cells {
                let _ = write!(line, "{c:>7}");
            }
            line
        };
        let pct = |v: &[f64]| v.iter().map(|x| format!("{:.1}", x * 100.0)).collect();
        let _ = writeln!(out, "{}", row("Iteration", (1..=self.iterations).map(|t| t.to_string()).collect()));
        let _ = writeln!(out, "{}", row("EM", pct(&self.per_iteration_em)));
        let _ = writeln!(out, "{}", row("Answer recall", pct(&self.per_iteration_answer_recall)));
        if !self.failed_examples.is_empty() {
            let _ = writeln!(out, "failed: {}", self.failed_examples.join(", "));
        }
        out
    }
}

/// Scores every trace against its example (matched by id). All traces must
/// have the same number of iterations and every example exactly one trace.
pub fn evaluate(traces: &[ItrgTrace], examples: &[QaExample]) -> Result<EvalReport, EvalError> {
    let first = traces.first().ok_or(EvalError::NoTraces)?;
    let iterations = first.states.len();
    if iterations == 0 {
        return Err(EvalError::InconsistentIterations {
            example_id: first.example_id.clone(),
            expected: 1,
            found: 0,
        });
    }
    if traces.len() != examples.len() {
        return Err(EvalError::Misaligned(format!(
            "{} traces for {} examples",
            traces.len(),
            examples.len()
        )));
    }
    let by_id: HashMap<&str, &QaExample> =
        examples.iter().map(|e| (e.example_id.as_str(), e)).collect();
    if by_id.len() != examples.len() {
        return Err(EvalError::Misaligned("duplicate example ids".into()));
    }

    let mut em_hits = vec![0usize; iterations];
    let mut recall_hits = vec![0usize; iterations];
    let mut seen = HashMap::with_capacity(traces.len());
    for trace in traces {
        if trace.states.len() != iterations {
            return Err(EvalError::InconsistentIterations {
                example_id: trace.example_id.clone(),
                expected: iterations,
                found: trace.states.len(),
            });
        }
        let example = by_id.get(trace.example_id.as_str()).ok_or_else(|| {
            EvalError::Misaligned(format!("no example with id {:?}", trace.example_id))
        })?;
        if seen.insert(trace.example_id.as_str(), ()).is_some() {
            return Err(EvalError::Misaligned(format!(
                "two traces for example {:?}",
                trace.example_id
            )));
        }
        for (t, state) in trace.states.iter().enumerate() {
            if exact_match(&state.answer, &example.gold_answers)? {
                em_hits[t] += 1;
            }
            if answer_recall(&state.generated_doc, &example.gold_answers)? {
                recall_hits[t] += 1;
            }
        }
    }

    let n = traces.len();
    let rate = |hits: &[usize]| hits.iter().map(|&h| h as f64 / n as f64).collect();
    let config_snapshot = traces
        .iter()
        .min_by(|a, b| a.example_id.cmp(&b.example_id))
        .map(|t| t.config_snapshot.clone());
    Ok(EvalReport {
        n_examples: n,
        iterations,
        per_iteration_em: rate(&em_hits),
        per_iteration_answer_recall: rate(&recall_hits),
        em_hits,
        answer_recall_hits: recall_hits,
        matching: MatchingRules::default(),
        config_snapshot,
        failed_examples: Vec::new(),
    })
}

/// [`evaluate`] using the gold answers recorded in the traces themselves.
pub fn evaluate_traces(traces: &[ItrgTrace]) -> Result<EvalReport, EvalError> {
    let examples: Vec<QaExample> = traces
        .iter()
        .map(|t| QaExample {
            example_id: t.example_id.clone(),
            question: t.question.clone(),
            gold_answers: t.gold_answers.clone(),
        })
        .collect();
    evaluate(traces, &examples)
}
