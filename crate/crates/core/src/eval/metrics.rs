use unicode_general_category::{get_general_category, GeneralCategory};

use super::EvalError;

const ARTICLES: [&str; 3] = ["a", "an", "the"];

/// Unicode general category `P*`.
pub fn is_punctuation(c: char) -> bool {
    matches!(
        get_general_category(c),
        GeneralCategory::ConnectorPunctuation
            | GeneralCategory::DashPunctuation
            | GeneralCategory::OpenPunctuation
            | GeneralCategory::ClosePunctuation
            | GeneralCategory::InitialPunctuation
            | GeneralCategory::FinalPunctuation
            | GeneralCategory::OtherPunctuation
    )
}

/// Lowercases, replaces punctuation with spaces, drops the articles
/// "a", "an" and "the" as whole tokens, and collapses whitespace.
///
/// Punctuation is removed before articles, so `"the-end"` becomes `"end"`.
pub fn normalize_answer(s: &str) -> String {
    let spaced: String = s
        .to_lowercase()
        .chars()
        .map(|c| if is_punctuation(c) { ' ' } else { c })
        .collect();
    spaced
        .split_whitespace()
        .filter(|tok| !ARTICLES.contains(tok))
        .collect::<Vec<_>>()
        .join(" ")
}

/// True if the normalized prediction equals any normalized gold answer.
pub fn exact_match(prediction: &str, golds: &[String]) -> Result<bool, EvalError> {
    if golds.is_empty() {
        return Err(EvalError::EmptyGolds);
    }
    let pred = normalize_answer(prediction);
    Ok(golds.iter().any(|g| normalize_answer(g) == pred))
}

/// True if some normalized gold answer occurs in the normalized document as
/// a contiguous run of whole tokens. Golds that normalize to nothing never
/// match.
pub fn answer_recall(document: &str, golds: &[String]) -> Result<bool, EvalError> {
    if golds.is_empty() {
        return Err(EvalError::EmptyGolds);
    }
    let doc = normalize_answer(document);
    let doc_tokens: Vec<&str> = doc.split(' ').filter(|t| !t.is_empty()).collect();
    Ok(golds.iter().any(|g| {
        let gold = normalize_answer(g);
        let gold_tokens: Vec<&str> = gold.split(' ').filter(|t| !t.is_empty()).collect();
        !gold_tokens.is_empty()
            && doc_tokens
                .windows(gold_tokens.len())
                .any(|w| w == gold_tokens.as_slice())
    }))
}
