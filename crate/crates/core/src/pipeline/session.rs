use serde::{Deserialize, Serialize};

use super::{CaseInput, Decision, DecisionKind, Engine, PipelineError};
use crate::qa::{ChatTurn, YesNo};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    AwaitingAnswer,
    Resolved,
    Irrelevant,
}

impl SessionStatus {
    fn of(decision: &Decision) -> Self {
        match decision.kind {
            DecisionKind::FollowUp => SessionStatus::AwaitingAnswer,
            DecisionKind::Irrelevant => SessionStatus::Irrelevant,
            DecisionKind::Yes | DecisionKind::No => SessionStatus::Resolved,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("session is {0:?}; no follow-up question is pending")]
    NotAwaiting(SessionStatus),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// A conversation about one case. `history` starts as the case's own
/// history and grows with every answered follow-up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub case: CaseInput,
    pub history: Vec<ChatTurn>,
    pub decision: Decision,
    pub status: SessionStatus,
}

impl Session {
    pub fn current_case(&self) -> CaseInput {
        CaseInput {
            history: self.history.clone(),
            ..self.case.clone()
        }
    }
}

impl Engine {
    pub fn start_session(&self, id: impl Into<String>, case: CaseInput) -> Result<Session, PipelineError> {
        let decision = self.decide(&case)?;
        Ok(Session {
            id: id.into(),
            history: case.history.clone(),
            case,
            status: SessionStatus::of(&decision),
            decision,
        })
    }

    /// Records the answer to the pending follow-up and decides again.
    pub fn answer_follow_up(&self, session: &Session, answer: YesNo) -> Result<Session, SessionError> {
        let pending = match (&session.status, &session.decision.follow_up) {
            (SessionStatus::AwaitingAnswer, Some(f)) => f,
            (status, _) => return Err(SessionError::NotAwaiting(*status)),
        };
        let turn = ChatTurn::new(pending.text.clone(), answer);
        let mut next = session.clone();
        next.history.push(turn.clone());

        let reused = if self.config.reuse_formula {
            self.reevaluate(&session.decision, &turn)?
        } else {
            None
        };
        next.decision = match reused {
            Some(decision) => decision,
            None => self.decide(&next.current_case())?,
        };
        next.status = SessionStatus::of(&next.decision);
        Ok(next)
    }
}

/// Every session reachable from `case` by answering follow-ups yes or no,
/// up to `max_turns` answers deep, in depth-first order (yes before no).
pub fn explore_session(
    engine: &Engine,
    id: &str,
    case: CaseInput,
    max_turns: usize,
) -> Result<Vec<Session>, SessionError> {
    let root = engine.start_session(id, case)?;
    let mut out = Vec::new();
    let mut stack = vec![(root, 0)];
    while let Some((session, depth)) = stack.pop() {
        if session.status == SessionStatus::AwaitingAnswer && depth < max_turns {
            let no = engine.answer_follow_up(&session, YesNo::No)?;
            let yes = engine.answer_follow_up(&session, YesNo::Yes)?;
            stack.push((no, depth + 1));
            stack.push((yes, depth + 1));
        }
        out.push(session);
    }
    Ok(out)
}
