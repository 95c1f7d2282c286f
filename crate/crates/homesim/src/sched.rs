//! Weekly cognitive-test scheduling.
//!
//! A test is due once a week at the subject's preferred slot. It starts only
//! after the tablet notices the subject and the subject confirms. A missed
//! attempt (nobody near the tablet within the presence window, or a declined
//! prompt) reschedules the test a day later; the third miss closes the week as
//! incomplete.

use chrono::Weekday;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Attempts allowed per week before the test counts as incomplete.
pub const MAX_ATTEMPTS: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TestState {
    Scheduled,
    AwaitingPresence,
    Prompted,
    Running,
    Completed(u8),
    /// Waiting for the next slot after `n` misses.
    Rescheduled(u8),
    IncompleteForWeek,
}

impl TestState {
    pub fn is_terminal(self) -> bool {
        matches!(self, TestState::Completed(_) | TestState::IncompleteForWeek)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TestInput {
    ScheduledTimeReached,
    PresenceDetected,
    PresenceWindowElapsed,
    ConfirmYes,
    ConfirmNo,
    /// Score in `0..=100`; larger values are clamped.
    TestFinished(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissReason {
    NoPresence,
    Declined,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("previous week has not reached a terminal state")]
    NonTerminalPreviousWeek,
}

/// One subject's test schedule for the current week.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TestSchedule {
    pub anchor: (Weekday, u32),
    pub state: TestState,
    /// Reason of every miss so far this week; its length is the number of
    /// attempts used.
    pub misses: Vec<MissReason>,
}

impl TestSchedule {
    pub fn new(anchor: (Weekday, u32)) -> Self {
        Self { anchor, state: TestState::Scheduled, misses: Vec::new() }
    }

    pub fn attempts_used(&self) -> u8 {
        self.misses.len() as u8
    }

    fn miss(&mut self, reason: MissReason) {
        self.misses.push(reason);
        let n = self.attempts_used();
        self.state = if n >= MAX_ATTEMPTS { TestState::IncompleteForWeek } else { TestState::Rescheduled(n) };
    }

    /// Advances the machine. Inputs that mean nothing in the current state
    /// are ignored. Returns the outcome `(compliant, score)` when the week
    /// reaches its terminal state on this input.
    pub fn tick(&mut self, input: TestInput) -> Option<(bool, Option<u8>)> {
        use TestInput::*;
        use TestState::*;
        match (self.state, input) {
            (Scheduled | Rescheduled(_), ScheduledTimeReached) => self.state = AwaitingPresence,
            (AwaitingPresence, PresenceDetected) => self.state = Prompted,
            (AwaitingPresence, PresenceWindowElapsed) => self.miss(MissReason::NoPresence),
            (Prompted, ConfirmYes) => self.state = Running,
            (Prompted, ConfirmNo) => self.miss(MissReason::Declined),
            (Running, TestFinished(score)) => {
                self.state = Completed(score.min(100));
            }
            _ => return None,
        }
        match self.state {
            Completed(score) => Some((true, Some(score))),
            IncompleteForWeek => Some((false, None)),
            _ => None,
        }
    }

    /// Starts a fresh week. The previous week must have ended.
    pub fn weekly_reset(&self, anchor: (Weekday, u32)) -> Result<Self, ScheduleError> {
        if self.state.is_terminal() {
            Ok(Self::new(anchor))
        } else {
            Err(ScheduleError::NonTerminalPreviousWeek)
        }
    }
}

/// Simulation parameters of the weekly test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TestPlan {
    pub weekday: Weekday,
    /// Local minute of the preferred slot.
    pub minute: u32,
    pub presence_window_minutes: u32,
    pub reschedule_minutes: u32,
    pub duration_minutes: u32,
    pub confirm_prob: f64,
    pub score_mean: f64,
    pub score_sd: f64,
}

impl Default for TestPlan {
    fn default() -> Self {
        Self {
            weekday: Weekday::Wed,
            minute: 16 * 60 + 45,
            presence_window_minutes: 120,
            reschedule_minutes: 24 * 60,
            duration_minutes: 12,
            confirm_prob: 0.85,
            score_mean: 78.0,
            score_sd: 6.0,
        }
    }
}

/// Outcome of [`model_check`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ModelCheckReport {
    /// Distinct (schedule, history) states visited.
    pub states: usize,
    /// Input sequences covered, counting every sequence of every length.
    pub sequences: u128,
    pub violations: Vec<String>,
}

/// Inputs the checker feeds at every step.
pub const CHECK_INPUTS: [TestInput; 7] = [
    TestInput::ScheduledTimeReached,
    TestInput::PresenceDetected,
    TestInput::PresenceWindowElapsed,
    TestInput::ConfirmYes,
    TestInput::ConfirmNo,
    TestInput::TestFinished(0),
    TestInput::TestFinished(100),
];

/// Explores every input sequence of length up to `max_len` from a fresh week
/// and checks the weekly rules after each step:
///
/// * at most three attempts are used,
/// * a week never records both a completion and an incomplete outcome, nor
///   more than one outcome,
/// * the week is incomplete exactly when three misses happened, counting a
///   miss for every window lapse while awaiting presence and every decline
///   while prompted.
///
/// Sequences reaching the same machine state with the same history counters
/// behave identically afterwards, so they are explored once.
pub fn model_check(max_len: usize) -> ModelCheckReport {
    use std::collections::HashMap;

    #[derive(Clone, PartialEq, Eq, Hash)]
    struct Node {
        sched: TestSchedule,
        misses: u8,
        completed: u8,
        incomplete: u8,
    }

    let mut report = ModelCheckReport::default();
    let start = Node { sched: TestSchedule::new((Weekday::Mon, 600)), misses: 0, completed: 0, incomplete: 0 };
    let mut frontier: HashMap<Node, u128> = HashMap::from([(start, 1)]);
    let mut seen = std::collections::HashSet::new();
    report.sequences = 1;
    for depth in 1..=max_len {
        let mut next: HashMap<Node, u128> = HashMap::new();
        for (node, count) in &frontier {
            seen.insert(node.clone());
            for input in CHECK_INPUTS {
                let mut n = node.clone();
                let missed = matches!(
                    (n.sched.state, input),
                    (TestState::AwaitingPresence, TestInput::PresenceWindowElapsed)
                        | (TestState::Prompted, TestInput::ConfirmNo)
                );
                n.misses += u8::from(missed);
                match n.sched.tick(input) {
                    Some((true, _)) => n.completed += 1,
                    Some((false, _)) => n.incomplete += 1,
                    None => {}
                }
                let mut fail = |msg: &str| {
                    if report.violations.len() < 20 {
                        report.violations.push(format!("depth {depth}, after {input:?}: {msg}"));
                    }
                };
                if n.sched.attempts_used() > MAX_ATTEMPTS {
                    fail("more than three attempts");
                }
                if n.completed + n.incomplete > 1 {
                    fail("more than one outcome in a week");
                }
                let incomplete = n.sched.state == TestState::IncompleteForWeek;
                if incomplete != (n.misses == MAX_ATTEMPTS) {
                    fail("incomplete state disagrees with the miss count");
                }
                if incomplete && n.sched.attempts_used() != MAX_ATTEMPTS {
                    fail("incomplete without three attempts used");
                }
                *next.entry(n).or_insert(0) += count;
            }
        }
        report.sequences += next.values().sum::<u128>();
        frontier = next;
    }
    seen.extend(frontier.into_keys());
    report.states = seen.len();
    report
}
