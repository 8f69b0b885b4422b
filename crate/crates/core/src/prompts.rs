//! Prompt templates and rendering.
//!
//! Decomposition and logic-formulation prompts share one layout: the
//! instruction, then one `### Example n` block per in-context exemplar,
//! then the `### Input` block the model is expected to complete.

use crate::decomposition::{Exemplar, QuestionSet};
use crate::qa::ChatTurn;

/// Bumped whenever any rendering below changes; recorded fixtures are
/// only valid for the version they were captured with.
pub const TEMPLATE_VERSION: &str = "v1";

pub const DECOMPOSITION_INSTRUCTION: &str =
    include_str!("../assets/templates/v1/decomposition_instruction.txt");
pub const LOGIC_INSTRUCTION: &str = include_str!("../assets/templates/v1/logic_instruction.txt");
pub const STATEMENT_TEMPLATE: &str = include_str!("../assets/templates/v1/statement.txt");
pub const FILTER_TEMPLATE: &str = include_str!("../assets/templates/v1/filter.txt");

pub const INPUT_HEADER: &str = "### Input";
pub const EXPRESSION_LABEL: &str = "Expression:";
pub const CANDIDATE_LABEL: &str = "Candidate Question:";
pub const STATEMENT_QUESTION_LABEL: &str = "Question:";

/// The fields of a case that prompts are built from.
#[derive(Debug, Clone, Copy)]
pub struct PromptCase<'a> {
    pub policy: &'a str,
    pub question: &'a str,
    pub history: &'a [ChatTurn],
}

fn push_header(out: &mut String, policy: &str, question: &str) {
    out.push_str("Policy: ");
    out.push_str(policy.trim());
    out.push_str("\nUser Question: ");
    out.push_str(question.trim());
    out.push('\n');
}

pub fn render_history(history: &[ChatTurn]) -> String {
    if history.is_empty() {
        return "None".to_owned();
    }
    history
        .iter()
        .enumerate()
        .map(|(i, turn)| format!("Q{i}: {} Answer: {}", turn.question.trim(), turn.answer))
        .collect::<Vec<_>>()
        .join("\n")
}

fn render_questions<'a>(out: &mut String, questions: impl Iterator<Item = (String, &'a str)>) {
    out.push_str("Questions:\n");
    for (id, text) in questions {
        out.push_str(&format!("{id}: {}\n", text.trim()));
    }
}

fn exemplar_questions(ex: &Exemplar) -> impl Iterator<Item = (String, &str)> {
    ex.questions
        .iter()
        .enumerate()
        .map(|(i, q)| (format!("Q{i}"), q.as_str()))
}

pub fn decomposition_prompt(case: PromptCase<'_>, exemplars: &[Exemplar]) -> String {
    let mut out = String::from(DECOMPOSITION_INSTRUCTION.trim());
    out.push_str("\n\n");
    for (n, ex) in exemplars.iter().enumerate() {
        out.push_str(&format!("### Example {}\n", n + 1));
        push_header(&mut out, &ex.policy, &ex.question);
        out.push_str("Chat History:\n");
        out.push_str(&render_history(&ex.history));
        out.push('\n');
        render_questions(&mut out, exemplar_questions(ex));
        out.push('\n');
    }
    out.push_str(INPUT_HEADER);
    out.push('\n');
    push_header(&mut out, case.policy, case.question);
    out.push_str("Chat History:\n");
    out.push_str(&render_history(case.history));
    out.push('\n');
    render_questions(
        &mut out,
        case.history
            .iter()
            .enumerate()
            .map(|(i, turn)| (format!("Q{i}"), turn.question.as_str())),
    );
    out
}

pub fn logic_prompt(policy: &str, question: &str, questions: &QuestionSet, exemplars: &[Exemplar]) -> String {
    let mut out = String::from(LOGIC_INSTRUCTION.trim());
    out.push_str("\n\n");
    for (n, ex) in exemplars.iter().enumerate() {
        out.push_str(&format!("### Example {}\n", n + 1));
        push_header(&mut out, &ex.policy, &ex.question);
        render_questions(&mut out, exemplar_questions(ex));
        out.push_str(&format!("{EXPRESSION_LABEL} {}\n\n", ex.expression.trim()));
    }
    out.push_str(INPUT_HEADER);
    out.push('\n');
    push_header(&mut out, policy, question);
    render_questions(
        &mut out,
        questions.iter().map(|q| (q.id.to_string(), q.text.as_str())),
    );
    out.push_str(EXPRESSION_LABEL);
    out
}

pub fn statement_prompt(question: &str) -> String {
    STATEMENT_TEMPLATE.replace("{question}", question.trim())
}

pub fn filter_prompt(case: PromptCase<'_>, candidate: &str) -> String {
    FILTER_TEMPLATE
        .replace("{policy}", case.policy.trim())
        .replace("{question}", case.question.trim())
        .replace("{history}", &render_history(case.history))
        .replace("{candidate}", candidate.trim())
}

/// Pulls the boolean expression out of a logic-formulation completion.
///
/// Handles code fences, a leading `Expression:` label, python-style
/// assignments (`result = ...`) and trailing punctuation; returns the
/// first non-empty candidate line.
pub fn extract_expression(completion: &str) -> String {
    for line in completion.lines() {
        let mut line = line.trim();
        if line.is_empty() || line.starts_with("```") {
            continue;
        }
        if let Some(rest) = line.strip_prefix(EXPRESSION_LABEL) {
            line = rest.trim();
            if line.is_empty() {
                continue;
            }
        }
        if let Some((lhs, rhs)) = line.split_once('=') {
            if crate::logic::VarId::new(lhs.trim()).is_ok() && !rhs.starts_with('=') {
                line = rhs.trim();
            }
        }
        let line = line.trim_end_matches(['.', ';', '`']).trim();
        let line = line.trim_start_matches('`').trim();
        if !line.is_empty() {
            return line.to_owned();
        }
    }
    String::new()
}

/// First non-empty line of a rewrite completion, minus labels and quotes.
pub fn extract_statement(completion: &str) -> String {
    completion
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .map(|l| l.strip_prefix("Statement:").unwrap_or(l).trim())
        .map(|l| l.trim_matches('"').trim().to_owned())
        .unwrap_or_default()
}
