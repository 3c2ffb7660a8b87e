mod common;

use common::*;
use mindgames_core::analytics::*;
use mindgames_core::model::{utility_vector, KnownnessMask, Proposal};
use mindgames_core::session::Condition;
use mindgames_core::transcript::{read_jsonl, to_jsonl};

#[test]
fn replay_reference_cases() {
    let inst = instances(3, "moon", 1).remove(0);
    let silent = bot_game(inst.clone(), Condition::Hidden, &["CHAT hello"]);
    assert_eq!(rational_replay(&silent).unwrap(), (inst.p_init, false));

    let all = bot_game(inst.clone(), Condition::Hidden, &[&disclose_line(&inst, inst.hidden.cells())]);
    assert_eq!(rational_replay(&all).unwrap().0, inst.p_full);

    let win = bot_game(inst.clone(), Condition::Revealed, &[&disclose_line(&inst, inst.witness.cells())]);
    assert_eq!(rational_replay(&win).unwrap(), (inst.persuader_goal, true));
    assert_eq!(win.final_choice, inst.persuader_goal);
}

#[test]
fn replay_needs_classifications() {
    let inst = instances(3, "moon", 1).remove(0);
    let mut t = bot_game(inst, Condition::Hidden, &["ASK-VALUES"]);
    t.events[0].classification = None;
    assert!(matches!(rational_replay(&t), Err(AnalyticsError::MissingClassification(0))));
}

#[test]
fn move_counts() {
    let inst = instances(5, "ocean", 1).remove(0);
    let cells: Vec<_> = inst.hidden.cells().take(2).collect();
    let t = bot_game(
        inst.clone(),
        Condition::Hidden,
        &[&disclose_line(&inst, cells.iter().copied()), "ASK-VALUES"],
    );
    assert_eq!(
        count_moves(&t),
        MoveCounts { persuader_disclosures: 2, info_appeals: 0, motivational_appeals: 1, target_disclosures: 0 }
    );
    let t = bot_game(inst.clone(), Condition::Hidden, &[]);
    assert_eq!(count_moves(&t), MoveCounts::default());

    let h = human_game(inst.clone(), inst.p_init, &[("ASK-INFO", Some(&disclose_line(&inst, cells)))], inst.p_init);
    assert_eq!(count_moves(&h).target_disclosures, 2);
    assert_eq!(count_moves(&h).info_appeals, 1);
}

#[test]
fn utility_categories() {
    let pool = instances(17, "education", 60);
    let inst = pool[0].clone();
    let bot = bot_game(inst.clone(), Condition::Hidden, &["ASK-VALUES"]);
    assert_eq!(utility_category(&bot).unwrap(), UtilityCategory::Agree);

    // No disclosures, so the replay stays on p_init; p_full is strictly better with full information.
    let better = human_game(inst.clone(), inst.p_init, &[("CHAT hi", None)], inst.p_full);
    assert_eq!(utility_category(&better).unwrap(), UtilityCategory::Better);

    let full = |i: &mindgames_core::model::GameInstance| utility_vector(&i.matrix, &i.target_valence, &KnownnessMask::ALL_KNOWN);
    let tie = pool
        .iter()
        .find(|i| full(i)[i.persuader_goal.index()] == full(i)[i.p_init.index()])
        .expect("some instance ties goal and initial choice under full information");
    let t = human_game(tie.clone(), tie.p_init, &[("CHAT hi", None)], tie.persuader_goal);
    assert_eq!(utility_category(&t).unwrap(), UtilityCategory::AsGood);

    // Disclosing the witness puts the replay on the goal; the human keeps p_init instead.
    let worse = pool
        .iter()
        .find(|i| full(i)[i.p_init.index()] < full(i)[i.persuader_goal.index()])
        .expect("some instance has p_init below the goal under full information");
    let line = disclose_line(worse, worse.witness.cells());
    let t = human_game(worse.clone(), worse.p_init, &[(line.as_str(), None)], worse.p_init);
    assert_eq!(rational_replay(&t).unwrap().0, worse.persuader_goal);
    assert_eq!(utility_category(&t).unwrap(), UtilityCategory::Worse);
}

#[test]
fn exclusions() {
    let inst = instances(9, "lunch", 1).remove(0);
    let other = Proposal::ALL.into_iter().find(|p| *p != inst.p_init).unwrap();
    let good = human_game(inst.clone(), inst.p_init, &[], inst.p_init);
    let bad = human_game(inst.clone(), other, &[], inst.p_init);
    let mut missing = good.clone();
    missing.pre_choice = None;
    let bot = bot_game(inst.clone(), Condition::Hidden, &[]);

    let (kept, excluded) =
        exclusion_filter(vec![good.clone(), bad, missing, bot.clone()], ExclusionMode::Assigned);
    assert_eq!(kept, vec![good.clone(), bot]);
    assert_eq!(excluded.len(), 2);
    assert!(excluded[1].reason.contains("missing pre-choice"));

    let (kept, excluded) = exclusion_filter(vec![good.clone()], ExclusionMode::Inferred);
    assert!(kept.is_empty());
    assert!(excluded[0].reason.contains("inferred"));

    let mut inferred = good;
    inferred.config.inferred_valence = Some(inst.target_valence);
    assert_eq!(exclusion_filter(vec![inferred], ExclusionMode::Inferred).0.len(), 1);
}

#[test]
fn metrics_rows_and_csv() {
    let pool = instances(2, "llm", 4);
    let mut ts: Vec<_> = pool
        .iter()
        .map(|i| bot_game(i.clone(), Condition::Revealed, &[&disclose_line(i, i.witness.cells())]))
        .collect();
    ts.push(bot_game(pool[0].clone(), Condition::Hidden, &["CHAT hi"]));
    let text: String = ts.iter().map(to_jsonl).collect();
    let ts = read_jsonl(text.as_bytes()).unwrap();

    let rows = persuasion_success(&ts, &GroupField::DEFAULT, 500, 1).unwrap();
    assert_eq!(rows.len(), 2);
    let revealed = rows.iter().find(|r| r.group.contains("condition=revealed")).unwrap();
    assert_eq!(revealed.games, 4);
    assert_eq!(revealed.persuasion_success, 1.0);
    assert_eq!(revealed.rational_bot_success, 1.0);
    assert_eq!(revealed.persuasion_success_ci95, (1.0, 1.0));
    assert_eq!(revealed.mean_persuader_disclosures, 2.0);
    let hidden = rows.iter().find(|r| r.group.contains("condition=hidden")).unwrap();
    assert_eq!(hidden.persuasion_success, 0.0);

    let csv = metrics_csv(&rows).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with(&METRICS_HEADER.join(",")));
    assert_eq!(tidy_csv(&rows).unwrap().lines().count(), 1 + 2 * 6);
}

#[test]
fn participant_weighting_differs_from_game_weighting() {
    let pool = instances(6, "llm", 3);
    let mut ts = Vec::new();
    // p1 wins twice; p2 loses once.
    for (i, who) in [(0, "p1"), (1, "p1")] {
        let mut t = bot_game(pool[i].clone(), Condition::Revealed, &[&disclose_line(&pool[i], pool[i].witness.cells())]);
        t.config.participant = Some(who.into());
        ts.push(t);
    }
    let mut t = bot_game(pool[2].clone(), Condition::Revealed, &["CHAT hi"]);
    t.config.participant = Some("p2".into());
    ts.push(t);
    let rows = persuasion_success(&ts, &[], 200, 3).unwrap();
    assert_eq!(rows[0].participants, 2);
    assert!((rows[0].persuasion_success - 0.5).abs() < 1e-12);
    assert!((rows[0].persuasion_success_by_game - 2.0 / 3.0).abs() < 1e-12);
    let (lo, hi) = rows[0].persuasion_success_ci95;
    assert!(lo <= 0.5 && 0.5 <= hi);
}

#[test]
fn incomplete_games_are_counted_not_scored() {
    let inst = instances(4, "moon", 1).remove(0);
    let mut t = bot_game(inst, Condition::Hidden, &["CHAT hi"]);
    t.incomplete = Some("llm timeout".into());
    assert!(persuasion_success(&[t.clone()], &[], 10, 0).unwrap().is_empty());
    let ok = bot_game(t.config.instance.clone(), Condition::Hidden, &["CHAT hi"]);
    let rows = persuasion_success(&[t, ok], &[], 10, 0).unwrap();
    assert_eq!((rows[0].games, rows[0].incomplete), (1, 1));
}
