//! Exact match, answer recall, dataset sampling, and per-iteration reports.

mod metrics;
mod report;

pub use metrics::{answer_recall, exact_match, is_punctuation, normalize_answer};
pub use report::{evaluate, evaluate_traces, EvalReport, MatchingRules};

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::generator::Demonstration;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("gold answer list is empty")]
    EmptyGolds,
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record on line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("duplicate example id {id:?} on lines {first_line} and {second_line}")]
    DuplicateId {
        id: String,
        first_line: usize,
        second_line: usize,
    },
    #[error("example on line {line} has {problem}")]
    InvalidExample { line: usize, problem: &'static str },
    #[error("cannot sample {requested} examples from {available}")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("{requested} demonstrations requested but only {available} examples are outside the evaluation slice")]
    InsufficientDemonstrations { requested: usize, available: usize },
    #[error("no traces to evaluate")]
    NoTraces,
    #[error("trace {example_id:?} has {found} iterations, expected {expected}")]
    InconsistentIterations {
        example_id: String,
        expected: usize,
        found: usize,
    },
    #[error("traces and examples are not aligned: {0}")]
    Misaligned(String),
}

/// One question with its accepted answers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaExample {
    #[serde(rename = "id")]
    pub example_id: String,
    pub question: String,
    #[serde(rename = "answers")]
    pub gold_answers: Vec<String>,
}

impl QaExample {
    pub fn new<S: Into<String>>(
        example_id: impl Into<String>,
        question: impl Into<String>,
        gold_answers: impl IntoIterator<Item = S>,
    ) -> Self {
        Self {
            example_id: example_id.into(),
            question: question.into(),
            gold_answers: gold_answers.into_iter().map(Into::into).collect(),
        }
    }

    /// Question/answer demonstration without a passage; the first gold answer
    /// is used.
    pub fn to_demonstration(&self) -> Demonstration {
        Demonstration {
            question: self.question.clone(),
            context: None,
            answer: self.gold_answers.first().cloned().unwrap_or_default(),
        }
    }
}

/// Loads a JSON Lines dataset of `{"id", "question", "answers"}` records.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<QaExample>, EvalError> {
    let path = path.as_ref();
    let raw = fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_dataset(&raw)
}

pub fn parse_dataset(raw: &str) -> Result<Vec<QaExample>, EvalError> {
    let mut out = Vec::new();
    let mut first_seen: HashMap<String, usize> = HashMap::new();
    for (idx, line) in raw.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let ex: QaExample = serde_json::from_str(line).map_err(|e| EvalError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        let problem = if ex.example_id.is_empty() {
            Some("an empty id")
        } else if ex.question.trim().is_empty() {
            Some("an empty question")
        } else if ex.gold_answers.is_empty() {
            Some("no gold answers")
        } else {
            None
        };
        if let Some(problem) = problem {
            return Err(EvalError::InvalidExample {
                line: line_no,
                problem,
            });
        }
        if let Some(&first_line) = first_seen.get(&ex.example_id) {
            return Err(EvalError::DuplicateId {
                id: ex.example_id,
                first_line,
                second_line: line_no,
            });
        }
        first_seen.insert(ex.example_id.clone(), line_no);
        out.push(ex);
    }
    Ok(out)
}

/// Sorted sample of `n` distinct positions out of `len`.
fn sample_positions(len: usize, n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, len, n).into_vec();
    picked.sort_unstable();
    picked
}

/// `n` examples drawn without replacement under `seed`, in their original
/// relative order.
pub fn subsample(dataset: &[QaExample], n: usize, seed: u64) -> Result<Vec<QaExample>, EvalError> {
    if n > dataset.len() {
        return Err(EvalError::SampleTooLarge {
            requested: n,
            available: dataset.len(),
        });
    }
    Ok(sample_positions(dataset.len(), n, seed)
        .into_iter()
        .map(|i| dataset[i].clone())
        .collect())
}

/// `n_shots` examples not in `eval_slice` (compared by id), drawn under
/// `seed` and kept in dataset order.
pub fn sample_demonstrations(
    dataset: &[QaExample],
    eval_slice: &[QaExample],
    n_shots: usize,
    seed: u64,
) -> Result<Vec<QaExample>, EvalError> {
    let held_out: HashSet<&str> = eval_slice.iter().map(|e| e.example_id.as_str()).collect();
    let pool: Vec<&QaExample> = dataset
        .iter()
        .filter(|e| !held_out.contains(e.example_id.as_str()))
        .collect();
    if n_shots > pool.len() {
        return Err(EvalError::InsufficientDemonstrations {
            requested: n_shots,
            available: pool.len(),
        });
    }
    if n_shots == 0 {
        return Ok(Vec::new());
    }
    Ok(sample_positions(pool.len(), n_shots, seed)
        .into_iter()
        .map(|i| pool[i].clone())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(n: usize) -> Vec<QaExample> {
        (0..n)
            .map(|i| QaExample::new(format!("q{i}"), format!("question {i}"), [format!("a{i}")]))
            .collect()
    }

    #[test]
    fn subsample_full_size_is_identity() {
        let d = dataset(20);
        assert_eq!(subsample(&d, 20, 7).unwrap(), d);
        assert!(matches!(subsample(&d, 21, 7), Err(EvalError::SampleTooLarge { .. })));
    }

    #[test]
    fn subsample_is_deterministic_and_ordered() {
        let d = dataset(10_000);
        let a = subsample(&d, 500, 42).unwrap();
        assert_eq!(a, subsample(&d, 500, 42).unwrap());
        let pos: Vec<usize> = a.iter().map(|e| e.example_id[1..].parse().unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        let b = subsample(&d, 500, 43).unwrap();
        assert!(a.iter().zip(&b).any(|(x, y)| x.example_id != y.example_id));
    }

    #[test]
    fn demonstrations_are_disjoint_from_eval() {
        let d = dataset(50);
        let eval = subsample(&d, 44, 1).unwrap();
        let demos = sample_demonstrations(&d, &eval, 5, 1).unwrap();
        assert_eq!(demos.len(), 5);
        let eval_ids: HashSet<_> = eval.iter().map(|e| &e.example_id).collect();
        assert!(demos.iter().all(|e| !eval_ids.contains(&e.example_id)));
        assert!(sample_demonstrations(&d, &eval, 0, 1).unwrap().is_empty());
        assert!(matches!(
            sample_demonstrations(&d, &eval, 7, 1),
            Err(EvalError::InsufficientDemonstrations { requested: 7, available: 6 })
        ));
    }

    #[test]
    fn dataset_parsing_validates() {
        let ok = "{\"id\":\"a\",\"question\":\"Q?\",\"answers\":[\"x\",\"y\"]}\n\n{\"id\":\"b\",\"question\":\"R?\",\"answers\":[\"z\"]}\n";
        let d = parse_dataset(ok).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].gold_answers, ["x", "y"]);

        let dup = "{\"id\":\"a\",\"question\":\"Q\",\"answers\":[\"x\"]}\n{\"id\":\"a\",\"question\":\"Q\",\"answers\":[\"x\"]}";
        assert!(matches!(
            parse_dataset(dup),
            Err(EvalError::DuplicateId { first_line: 1, second_line: 2, .. })
        ));
        let empty = "{\"id\":\"a\",\"question\":\"Q\",\"answers\":[]}";
        assert!(matches!(parse_dataset(empty), Err(EvalError::InvalidExample { line: 1, .. })));
        assert!(matches!(parse_dataset("nope"), Err(EvalError::Malformed { line: 1, .. })));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn demonstrations_never_overlap_eval(
                n in 1usize..60,
                eval_frac in 0.0f64..1.0,
                shots in 0usize..6,
                seed in any::<u64>(),
            ) {
                let d = dataset(n);
                let m = ((n as f64) * eval_frac) as usize;
                let eval = subsample(&d, m, seed).unwrap();
                match sample_demonstrations(&d, &eval, shots, seed) {
                    Ok(demos) => {
                        prop_assert_eq!(demos.len(), shots);
                        for e in &demos {
                            prop_assert!(!eval.iter().any(|x| x.example_id == e.example_id));
                        }
                    }
                    Err(EvalError::InsufficientDemonstrations { available, .. }) => {
                        prop_assert!(available < shots);
                        prop_assert_eq!(available, n - m);
                    }
                    Err(e) => prop_assert!(false, "unexpected {e}"),
                }
            }
        }
    }
}
