use super::*;
use crate::corpus::Document;
use crate::generator::mock::{EchoBackend, ExtractiveBackend, MapBackend, RecordingBackend};
use crate::generator::{render_refresh_prompt, DecodingParams};
use crate::retriever::{build_index, HashingEmbedder, ScoredDoc, SearchBackend};

fn result(ids: &[&str]) -> RetrievalResult {
    RetrievalResult {
        k: ids.len().max(1),
        backend: SearchBackend::Exact,
        entries: ids
            .iter()
            .enumerate()
            .map(|(i, id)| ScoredDoc {
                doc_id: id.to_string(),
                score: 1.0 - i as f64 * 0.1,
            })
            .collect(),
    }
}

fn small_corpus() -> Corpus {
    Corpus::from_documents(
        vec![
            Document::new("a", "", "Alpha text about rivers."),
            Document::new("b", "", "Bravo text about mountains."),
            Document::new("c", "", "Charlie text about lakes."),
            Document::new("d", "", "Delta text about deserts."),
        ],
        "small",
    )
    .unwrap()
}

#[test]
fn form_query_rules() {
    assert_eq!(form_query("who is X", None, 1, 4096).unwrap(), "who is X");
    assert_eq!(form_query("Q", Some("Y"), 2, 4096).unwrap(), "Q Y");
    let long = "y".repeat(5000);
    let q = form_query("Q", Some(&long), 3, 128).unwrap();
    assert_eq!(q.chars().count(), 128);
    assert!(q.starts_with("Q "));
    assert_eq!(form_query("Q", None, 2, 10), Err(QueryError::MissingPrevious(2)));
    assert_eq!(form_query("Q", None, 0, 10), Err(QueryError::ZeroIteration));
    assert_eq!(form_query("Q", Some("Y"), 1, 10), Err(QueryError::UnexpectedPrevious));
}

#[test]
fn form_query_never_cuts_the_question() {
    assert_eq!(form_query("a long question", Some("doc"), 2, 5).unwrap(), "a long question");
    // Budget counts characters, not bytes.
    let q = form_query("é", Some("ééééé"), 2, 4).unwrap();
    assert_eq!(q, "é éé");
}

#[test]
fn update_set_keeps_current_rank_order() {
    let now = result(&["c", "a", "b"]);
    let prev = result(&["b", "c", "d"]);
    let ids: Vec<&str> = update_set(&now, &prev).iter().map(|e| e.doc_id.as_str()).collect();
    assert_eq!(ids, ["a"]);
    let all: Vec<&str> = update_set(&now, &RetrievalResult::empty(3))
        .iter()
        .map(|e| e.doc_id.as_str())
        .collect();
    assert_eq!(all, ["c", "a", "b"]);
}

#[test]
fn refine_with_identical_retrieval_skips_the_backend() {
    let corpus = small_corpus();
    let backend = MapBackend::default();
    let r = result(&["a", "b"]);
    let (doc, regen) = rag_refine(
        "Q?",
        "previous doc",
        &r,
        &r,
        &backend,
        &corpus,
        &TemplateSet::default(),
        &DecodingParams::document(),
    )
    .unwrap();
    assert_eq!((doc.as_str(), regen), ("previous doc", false));
    assert_eq!(backend.calls(), 0);
}

#[test]
fn refine_prompts_with_new_docs_only() {
    let corpus = small_corpus();
    let backend = RecordingBackend::new(MapBackend::default().with_fallback("new doc"));
    let (doc, regen) = rag_refine(
        "Q?",
        "old doc",
        &result(&["a", "b", "c"]),
        &result(&["b", "c", "d"]),
        &backend,
        &corpus,
        &TemplateSet::default(),
        &DecodingParams::document(),
    )
    .unwrap();
    assert_eq!((doc.as_str(), regen), ("new doc", true));
    let prompt = &backend.prompts()[0];
    assert!(prompt.contains("Alpha text about rivers."));
    assert!(!prompt.contains("Bravo"));
    assert!(prompt.contains("old doc"));
}

#[test]
fn refresh_uses_the_rendered_prompt() {
    let corpus = small_corpus();
    let docs = [corpus.get_document("b").unwrap(), corpus.get_document("a").unwrap()];
    let prompt = render_refresh_prompt("Q?", &docs).unwrap();
    let backend = MapBackend::new([(prompt, "configured document")]);
    let out = rag_refresh(
        "Q?",
        &result(&["b", "a"]),
        &backend,
        &corpus,
        &TemplateSet::default(),
        &DecodingParams::document(),
    )
    .unwrap();
    assert_eq!(out, "configured document");
    assert!(matches!(
        rag_refresh(
            "Q?",
            &RetrievalResult::empty(5),
            &backend,
            &corpus,
            &TemplateSet::default(),
            &DecodingParams::document()
        ),
        Err(StepError::NothingRetrieved)
    ));
}

#[test]
fn refresh_with_extractive_mock_copies_answer_sentence() {
    let corpus = small_corpus();
    let backend = ExtractiveBackend::new(["lakes"]);
    let out = rag_refresh(
        "Q?",
        &result(&["a", "c"]),
        &backend,
        &corpus,
        &TemplateSet::default(),
        &DecodingParams::document(),
    )
    .unwrap();
    assert_eq!(out, "Charlie text about lakes.");
}

struct Fixture {
    corpus: Corpus,
    index: DenseIndex,
    embedder: HashingEmbedder,
    templates: TemplateSet,
}

fn fixture() -> Fixture {
    let corpus = small_corpus();
    let embedder = HashingEmbedder::new(256);
    let index = build_index(&corpus, &embedder).unwrap();
    Fixture {
        corpus,
        index,
        embedder,
        templates: TemplateSet::default(),
    }
}

impl Fixture {
    fn pipeline<'a>(&'a self, backend: &'a dyn CompletionBackend) -> Pipeline<'a> {
        Pipeline::new(&self.corpus, &self.index, &self.embedder, backend, &self.templates)
    }
}

#[test]
fn single_iteration_trace() {
    let f = fixture();
    let backend = MapBackend::default().with_fallback("Some doc.");
    let trace = f
        .pipeline(&backend)
        .run_itrg("what about rivers?", &ItrgConfig::default().with_iterations(1), &[])
        .unwrap();
    assert_eq!(trace.iterations(), 1);
    assert_eq!(trace.states[0].query, "what about rivers?");
    assert_eq!(trace.states[0].t, 1);
}

// Hand simulation with k = 5 over a 4-document corpus: every iteration
// retrieves all four documents, so R_2 = R_1 and R_3 = R_2. Refine at t = 1
// falls back to refresh (one document call); at t = 2 and t = 3 the update
// set is empty, so y_3 = y_2 = y_1 = "Frozen doc." and no further document
// calls happen. Answers are requested at every iteration: 3 answer calls.
#[test]
fn refine_with_static_retrieval_generates_once() {
    let f = fixture();
    let backend = RecordingBackend::new(MapBackend::default().with_fallback("Frozen doc."));
    let config = ItrgConfig::default()
        .with_strategy(RagStrategy::Refine)
        .with_iterations(3);
    let trace = f.pipeline(&backend).run_itrg("rivers?", &config, &[]).unwrap();

    let regen: Vec<bool> = trace.states.iter().map(|s| s.doc_regenerated).collect();
    assert_eq!(regen, [true, false, false]);
    assert!(trace.states.iter().all(|s| s.generated_doc == "Frozen doc."));
    assert_eq!(backend.calls_ending_with("Document:"), 1);
    assert_eq!(backend.calls_ending_with("Answer:"), 3);
    assert_eq!(trace.states[1].query, "rivers? Frozen doc.");
    assert_eq!(trace.config_snapshot.refine_first_step.as_deref(), Some("refresh"));
}

#[test]
fn refine_and_refresh_agree_at_first_iteration() {
    let f = fixture();
    let backend = EchoBackend;
    let p = f.pipeline(&backend);
    let one = ItrgConfig::default().with_iterations(1);
    let a = p.run_itrg("Q?", &one.clone().with_strategy(RagStrategy::Refine), &[]).unwrap();
    let b = p.run_itrg("Q?", &one.with_strategy(RagStrategy::Refresh), &[]).unwrap();
    assert_eq!(a.states[0].generated_doc, b.states[0].generated_doc);
}

#[test]
fn failures_carry_iteration_and_stage() {
    let f = fixture();
    // No configured outputs: the first document call fails.
    let backend = MapBackend::default();
    let err = f
        .pipeline(&backend)
        .run_itrg("Q?", &ItrgConfig::default(), &[])
        .unwrap_err();
    assert_eq!((err.t, err.stage), (1, Stage::Generate));
    assert!(err.is_backend_failure());

    let err = f
        .pipeline(&backend)
        .run_itrg("Q?", &ItrgConfig::default().with_top_k(0), &[])
        .unwrap_err();
    assert_eq!(err.stage, Stage::Config);
}

#[test]
fn baselines_have_mode_specific_shapes() {
    let f = fixture();
    let backend = MapBackend::default().with_fallback("x");
    let p = f.pipeline(&backend);
    let config = ItrgConfig::default();

    let v = p.run_baseline("Q?", Mode::Vanilla, &config, &[]).unwrap();
    assert_eq!(v.states.len(), 1);
    assert_eq!(v.states[0].answer, "x");
    assert!(v.states[0].retrieved.is_empty());
    assert!(v.states[0].generated_doc.is_empty());

    let r = p.run_baseline("rivers", Mode::RetrieveThenRead, &config.clone().with_top_k(3), &[]).unwrap();
    assert_eq!(r.states[0].retrieved.len(), 3);
    assert!(r.states[0].generated_doc.is_empty());

    let g = p.run_baseline("Q?", Mode::GenerateThenRead, &config, &[]).unwrap();
    assert!(g.states[0].retrieved.is_empty());
    assert_eq!(g.states[0].generated_doc, "x");
    assert_eq!(g.config_snapshot.config.iterations, 1);
}

#[test]
fn answer_context_switch_includes_retrieved_passages() {
    let f = fixture();
    let backend = RecordingBackend::new(MapBackend::default().with_fallback("doc"));
    let mut config = ItrgConfig::default().with_iterations(1).with_top_k(1);
    config.answer_context = AnswerContext::GeneratedAndRetrieved;
    f.pipeline(&backend).run_itrg("rivers", &config, &[]).unwrap();
    let answer_prompt = backend.prompts().pop().unwrap();
    assert_eq!(
        answer_prompt,
        "Passage: Alpha text about rivers.\ndoc\nQuestion: rivers\nAnswer:"
    );
}

#[test]
fn batch_results_keep_input_order() {
    let f = fixture();
    let backend = EchoBackend;
    let examples: Vec<QaExample> = (0..20)
        .map(|i| QaExample::new(format!("e{i}"), format!("question {i}"), ["x"]))
        .collect();
    let out = f.pipeline(&backend).run_examples(
        &examples,
        Mode::Refresh,
        &ItrgConfig::default().with_iterations(2),
        &[],
        4,
    );
    let ids: Vec<String> = out.into_iter().map(|r| r.unwrap().example_id).collect();
    let expected: Vec<String> = (0..20).map(|i| format!("e{i}")).collect();
    assert_eq!(ids, expected);
}
