use carewatch_homesim::{model_check, MissReason, ScheduleError, TestInput, TestSchedule, TestState};
use chrono::Weekday;
use TestInput::*;

#[test]
fn model_check_up_to_twelve_inputs() {
    let report = model_check(12);
    assert!(report.violations.is_empty(), "{:#?}", report.violations);
    // 7 inputs: 1 + 7 + ... + 7^12 sequences.
    let expected: u128 = (0..=12).map(|k| 7u128.pow(k)).sum();
    assert_eq!(report.sequences, expected);
}

#[test]
fn presence_before_the_slot_is_ignored() {
    let mut s = TestSchedule::new((Weekday::Tue, 600));
    assert_eq!(s.tick(PresenceDetected), None);
    assert_eq!(s.state, TestState::Scheduled);
}

#[test]
fn absence_then_declines_close_the_week() {
    let mut s = TestSchedule::new((Weekday::Tue, 600));
    s.tick(ScheduledTimeReached);
    s.tick(PresenceWindowElapsed);
    assert_eq!(s.state, TestState::Rescheduled(1));
    for _ in 0..2 {
        s.tick(ScheduledTimeReached);
        s.tick(PresenceDetected);
        s.tick(ConfirmNo);
    }
    assert_eq!(s.state, TestState::IncompleteForWeek);
    assert_eq!(s.misses, [MissReason::NoPresence, MissReason::Declined, MissReason::Declined]);
    // Terminal states absorb everything.
    s.tick(ScheduledTimeReached);
    assert_eq!(s.state, TestState::IncompleteForWeek);
}

#[test]
fn completion_after_a_reschedule() {
    let mut s = TestSchedule::new((Weekday::Tue, 600));
    s.tick(ScheduledTimeReached);
    s.tick(PresenceDetected);
    s.tick(ConfirmNo);
    s.tick(ScheduledTimeReached);
    s.tick(PresenceDetected);
    s.tick(ConfirmYes);
    assert_eq!(s.tick(TestFinished(82)), Some((true, Some(82))));
    assert_eq!(s.attempts_used(), 1);
}

#[test]
fn weekly_reset_rules() {
    let mut s = TestSchedule::new((Weekday::Tue, 600));
    for input in [ScheduledTimeReached, PresenceDetected, ConfirmYes] {
        s.tick(input);
    }
    assert_eq!(s.weekly_reset((Weekday::Wed, 0)), Err(ScheduleError::NonTerminalPreviousWeek));
    s.tick(TestFinished(90));
    let fresh = s.weekly_reset((Weekday::Wed, 0)).unwrap();
    assert_eq!((fresh.state, fresh.attempts_used()), (TestState::Scheduled, 0));
}
