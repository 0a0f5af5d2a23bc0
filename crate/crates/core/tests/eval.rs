use std::sync::Arc;

use disambig::consolidate::{ClarificationItem, ClarificationSet, Source};
use disambig::diversify::CandidatePair;
use disambig::eval::{
    build_grounded_gold, dedup_and_sufficiency, error_quadrants, evaluate_query, g_f1, grounded_precision,
    grounded_recall, ungrounded_metrics, EvalConfig, GoldInterpretation, GoldSet, Judge, Matcher, Origin,
};
use disambig::llm::{Gateway, ScriptEntry, ScriptedBackend, TemplateId};
use proptest::prelude::*;

mod common;

use common::tables::{
    build, close, corpus, observed, oracle, text, universe, Fixture, TableJudge, PASSAGES, Q,
};

fn set(items: &[(&str, Option<&str>)]) -> ClarificationSet {
    ClarificationSet::new(
        Q,
        Source::Verdict,
        items
            .iter()
            .map(|(q, p)| ClarificationItem::new(*q, "answer", p.map(String::from)))
            .collect(),
    )
}

fn gold(items: &[(&str, Option<&str>)]) -> GoldSet {
    GoldSet {
        query: Q.into(),
        interpretations: items
            .iter()
            .map(|(q, p)| GoldInterpretation {
                q: q.to_string(),
                answers: vec![],
                passage_id: p.map(String::from),
            })
            .collect(),
    }
}

fn scripted(b: ScriptedBackend) -> Judge {
    Judge::new(Gateway::new(Arc::new(b)).with_retries(0))
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

#[test]
fn ungrounded_hand_count() {
    let predicted = strings(&["a1", "a2", "x1", "x2"]);
    let gold = strings(&["g1", "g2", "g3"]);
    let judge = scripted(ScriptedBackend::new("j").with(
        TemplateId::Match,
        Q,
        ScriptEntry::YesItems {
            yes_items: strings(&["a1", "a2", "g1", "g2"]),
        },
    ));
    let m = ungrounded_metrics(Q, &predicted, &gold, Matcher::Judge, &judge);
    assert_eq!(m.precision.value, 0.5);
    assert!((m.recall.value - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(judge.ledger().llm_call_count(), 2);

    let same = ungrounded_metrics(Q, &gold, &gold, Matcher::Judge, &scripted(ScriptedBackend::new("j").with(
        TemplateId::Match,
        Q,
        ScriptEntry::Classes { classes: vec![] },
    )));
    assert_eq!((same.precision.value, same.recall.value), (1.0, 1.0));

    let empty = ungrounded_metrics(Q, &[], &gold, Matcher::Judge, &judge);
    assert_eq!(empty.precision.value, 0.0);
    assert!(empty.precision.degenerate);
    assert_eq!(empty.recall.value, 0.0);
}

#[test]
fn bleu_matcher() {
    let predicted = strings(&["What exactly horsepower equal to in watts?", "Who wrote Harry Potter?"]);
    let gold = strings(&["What is one horsepower equal to in watts?"]);
    let judge = scripted(ScriptedBackend::new("j"));
    let m = ungrounded_metrics(Q, &predicted, &gold, Matcher::Bleu { tau: 0.5 }, &judge);
    assert_eq!((m.precision.value, m.recall.value), (0.5, 1.0));
    assert_eq!(judge.ledger().llm_call_count(), 0);
}

fn verify_yes(pairs: &[(&str, &str)]) -> ScriptedBackend {
    let mut b = ScriptedBackend::new("j").with_text(TemplateId::Verify, "*", "No");
    for (q, p) in pairs {
        b.insert(TemplateId::Verify, format!("{q}|{p}"), ScriptEntry::Text("Yes".into()));
    }
    b
}

#[test]
fn grounded_precision_three_of_four() {
    let c = corpus(4);
    let preds = set(&[("a", Some("p0")), ("b", Some("p1")), ("c", Some("p2")), ("d", Some("p3"))]);
    let judge = scripted(verify_yes(&[("a", "p0"), ("b", "p1"), ("d", "p3")]));
    let r = grounded_precision(&preds, &universe(&[]), &c, &judge);
    assert_eq!(r.value, 0.75);
    assert!(!r.degenerate);

    let all = scripted(ScriptedBackend::new("j").with_text(TemplateId::Verify, "*", "Yes"));
    assert_eq!(grounded_precision(&preds, &universe(&[]), &c, &all).value, 1.0);

    let empty = grounded_precision(&set(&[]), &universe(&[]), &c, &all);
    assert_eq!(empty.value, 0.0);
    assert!(empty.degenerate);
}

#[test]
fn absent_passage_searches_fallback_universe() {
    let c = corpus(4);
    let preds = set(&[("a", None), ("b", None)]);
    let judge = scripted(verify_yes(&[("a", "p2")]));
    let u = universe(&["p0", "p1", "p2"]);
    assert_eq!(grounded_precision(&preds, &u, &c, &judge).value, 0.5);
    // Each fallback passage is tried once per question.
    assert_eq!(judge.ledger().summary().template(TemplateId::Verify).calls, 6);
    assert_eq!(grounded_precision(&preds, &universe(&["p0", "p1"]), &c, &judge).value, 0.0);
}

#[test]
fn cited_passage_outside_corpus_is_unverified() {
    let c = corpus(2);
    let judge = scripted(ScriptedBackend::new("j").with_text(TemplateId::Verify, "*", "Yes"));
    let r = grounded_precision(&set(&[("a", Some("zz"))]), &universe(&[]), &c, &judge);
    assert_eq!(r.value, 0.0);
    assert_eq!(judge.ledger().llm_call_count(), 0);
}

const COMPANY: &str = "Who founded the company HP Inc.?";
const UNIT: &str = "How many watts is one horsepower?";
const WIZARD: &str = "Who wrote Harry Potter?";
const PRINTERS: &str = "Which printers does HP Inc. sell?";

#[test]
fn grounded_gold_drops_unverifiable_gold_and_adds_new_predictions() {
    let c = corpus(6);
    let u = universe(&["p0", "p1", "p2", "p3"]);
    let g = gold(&[(COMPANY, Some("p0")), (UNIT, None), (WIZARD, None)]);
    let backend = verify_yes(&[(COMPANY, "p0"), (UNIT, "p2"), ("Who started HP?", "p0"), (PRINTERS, "p3")])
        .with(
            TemplateId::Match,
            Q,
            ScriptEntry::Classes {
                classes: vec![vec![COMPANY.into(), "Who started HP?".into()]],
            },
        );

    let judge = scripted(backend.clone());
    let none = build_grounded_gold(&set(&[]), &g, &u, &c, &judge);
    assert_eq!(none.interpretations(), [COMPANY, UNIT]);
    assert_eq!(none.items[1].passage_id.as_deref(), Some("p2"));

    let preds = set(&[("Who started HP?", Some("p0")), (PRINTERS, Some("p3")), (WIZARD, Some("p1"))]);
    let judge = scripted(backend);
    let gg = build_grounded_gold(&preds, &g, &u, &c, &judge);
    assert_eq!(gg.interpretations(), [COMPANY, UNIT, PRINTERS]);
    assert_eq!(gg.items[2].origin, Origin::Prediction);
    assert_eq!(gg.len(), none.len() + 1);
}

#[test]
fn grounded_recall_two_of_three() {
    let c = corpus(6);
    let u = universe(&["p0", "p1", "p2"]);
    let g = gold(&[(COMPANY, Some("p0")), (UNIT, Some("p2")), (PRINTERS, Some("p3"))]);
    let backend = verify_yes(&[(COMPANY, "p0"), (UNIT, "p2"), (PRINTERS, "p3"), ("hp founders", "p0")]).with(
        TemplateId::Match,
        Q,
        ScriptEntry::Classes {
            classes: vec![
                vec![COMPANY.into(), "hp founders".into()],
                vec![PRINTERS.into(), "printer models".into()],
            ],
        },
    );
    // "printer models" matches but cites a passage that does not verify
    // PRINTERS; UNIT is covered verbatim.
    let preds = set(&[("hp founders", Some("p0")), (UNIT, Some("p2")), ("printer models", Some("p4"))]);
    let judge = scripted(backend.clone());
    let gg = build_grounded_gold(&preds, &g, &u, &c, &judge);
    assert_eq!(gg.len(), 3);
    let r = grounded_recall(&gg, &preds, &u, &c, &judge);
    assert!((r.value - 2.0 / 3.0).abs() < 1e-12);

    let full = set(&[("hp founders", Some("p0")), (UNIT, Some("p2")), ("printer models", Some("p3"))]);
    assert_eq!(grounded_recall(&gg, &full, &u, &c, &scripted(backend.clone())).value, 1.0);
    assert_eq!(grounded_recall(&gg, &set(&[]), &u, &c, &scripted(backend.clone())).value, 0.0);

    let empty = build_grounded_gold(&set(&[]), &gold(&[(WIZARD, None)]), &u, &c, &scripted(backend));
    let r = grounded_recall(&empty, &preds, &u, &c, &scripted(ScriptedBackend::new("j")));
    assert_eq!((r.value, r.degenerate), (1.0, true));
}

#[test]
fn dedup_counts_and_sufficiency() {
    let judge = scripted(ScriptedBackend::new("j").with(
        TemplateId::Dedup,
        Q,
        ScriptEntry::Classes {
            classes: vec![vec!["Who founded HP?".into(), "Who were HP's founders?".into()]],
        },
    ));
    let preds = strings(&["Who founded HP?", "Who were HP's founders?", UNIT, PRINTERS]);
    let g = gold(&[(COMPANY, None), (UNIT, None), (PRINTERS, None)]);
    let s = dedup_and_sufficiency(Q, &preds, &g, &judge);
    assert_eq!((s.unique_count, s.gold_unique, s.sufficient), (3, 3, true));

    let s = dedup_and_sufficiency(Q, &preds[..2], &g, &judge);
    assert_eq!((s.unique_count, s.sufficient), (1, false));

    let s = dedup_and_sufficiency(Q, &[], &g, &judge);
    assert_eq!((s.unique_count, s.sufficient), (0, false));
}

#[test]
fn dedup_unparseable_falls_back() {
    let judge = scripted(ScriptedBackend::new("j").with_text(TemplateId::Dedup, Q, ""));
    let preds = strings(&["a", "a", "b"]);
    let s = dedup_and_sufficiency(Q, &preds, &gold(&[("g", None)]), &judge);
    assert_eq!(s.unique_count, 2);
    assert!(judge.ledger().snapshot().warnings.iter().any(|w| w.contains("exact-string")));
}

fn pair(q: &str, pid: &str) -> CandidatePair {
    CandidatePair {
        interpretation: q.into(),
        answer: format!("answer to {q}"),
        passage_id: pid.into(),
        source_query: Q.into(),
        extraction_index: 0,
    }
}

#[test]
fn quadrants_match_hand_tabulation() {
    let c = corpus(6);
    let pairs = [
        pair("a", "p0"),
        pair("b", "p1"),
        pair("c", "p2"),
        pair("d", "p3"),
        pair("e", "p4"),
        pair("f", "p5"),
    ];
    // relevant: a b c e; answerable: a b d e; correct: a e; f fails.
    let mut b = verify_yes(&[("a", "p0"), ("b", "p1"), ("d", "p3"), ("e", "p4")])
        .with(
            TemplateId::Match,
            format!("relevance|{Q}"),
            ScriptEntry::YesItems {
                yes_items: strings(&["a", "b", "c", "e"]),
            },
        )
        .with(TemplateId::Verify, "correct|a|p0", ScriptEntry::Text("Yes".into()))
        .with(TemplateId::Verify, "correct|e|p4", ScriptEntry::Text("Yes".into()))
        .with(TemplateId::Verify, "correct|b|p1", ScriptEntry::Text("No".into()));
    b.insert(TemplateId::Verify, "f|p5", ScriptEntry::Error { error: "down".into() });
    let q = error_quadrants(Q, &pairs, &c, &scripted(b));
    assert_eq!(q.relevant_answerable, 3);
    assert_eq!(q.relevant_unanswerable, 1);
    assert_eq!(q.irrelevant_answerable, 1);
    assert_eq!(q.irrelevant_unanswerable, 0);
    assert_eq!(q.unknown, 1);
    assert_eq!(q.correct, 2);
    assert!((q.correct_rate.unwrap() - 2.0 / 3.0).abs() < 1e-12);

    let all = ScriptedBackend::new("j")
        .with_text(TemplateId::Verify, "*", "Yes")
        .with_text(TemplateId::Match, "*", "Yes");
    let q = error_quadrants(Q, &pairs, &c, &scripted(all));
    assert_eq!((q.relevant_answerable, q.correct_rate), (6, Some(1.0)));
}

#[test]
fn evaluation_is_deterministic() {
    let c = corpus(4);
    let u = universe(&["p0", "p1", "p2", "p3"]);
    let g = gold(&[(COMPANY, Some("p0")), (UNIT, Some("p2"))]);
    let preds = set(&[(COMPANY, Some("p0")), (WIZARD, Some("p1"))]);
    let run = || {
        let mut t = TableJudge::default();
        t.supports.insert((COMPANY.into(), "p0".into()));
        t.supports.insert((UNIT.into(), "p2".into()));
        let judge = Judge::new(Gateway::new(Arc::new(t)));
        let m = evaluate_query(&preds, &g, &u, None, &c, &judge, &EvalConfig::default());
        (serde_json::to_string(&m).unwrap(), judge.decisions())
    };
    let (a, da) = run();
    let (b, db) = run();
    assert_eq!(a, b);
    assert_eq!(da, db);
    let m: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(m["g_precision"]["value"], 0.5);
    assert_eq!(m["g_recall"]["value"], 0.5);
    assert_eq!(m["g_f1"], 0.5);
}

fn fixture() -> impl Strategy<Value = Fixture> {
    (1usize..=4, 0usize..=5).prop_flat_map(|(ng, np)| {
        let texts = ng + np;
        (
            prop::collection::vec(prop::option::of(0..PASSAGES), ng),
            prop::collection::vec((0..texts + 2, prop::option::of(0..PASSAGES)), np),
            prop::collection::vec((0..texts + 2, 0..texts + 2), 0..12),
            prop::collection::vec((0..texts + 2, 0..PASSAGES), 0..16),
        )
            .prop_map(move |(gp, pp, matches, supports)| {
                // Text pool: gold strings, then prediction strings, then two
                // strings shared between roles.
                Fixture {
                    gold: gp.into_iter().enumerate().map(|(i, p)| (text(i, ng), p)).collect(),
                    preds: pp.into_iter().map(|(t, p)| (text(t, ng), p)).collect(),
                    matches,
                    supports,
                }
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn metrics_equal_hand_counting(f in fixture()) {
        let built = build(&f);
        let want = oracle(&built);
        let check = build(&f).table;
        let (got, decisions) = observed(built);
        prop_assert!(close(got.precision, want.precision));
        prop_assert!(close(got.recall, want.recall));
        prop_assert!(close(got.g_precision, want.g_precision));
        prop_assert!(close(got.g_recall, want.g_recall));
        prop_assert_eq!(got.q_bar, want.q_bar);
        // Every logged verify verdict agrees with the support table.
        for d in decisions.iter().filter(|d| d.prompt_id == TemplateId::Verify) {
            prop_assert_eq!(d.verdict, Some(check.sup(&d.subject, &d.against)));
        }
    }

    #[test]
    fn grounded_metrics_ignore_prediction_order(f in fixture(), seed in any::<u64>()) {
        let mut shuffled = build(&f);
        let n = shuffled.preds.items.len();
        for i in (1..n).rev() {
            let j = (seed as usize).wrapping_mul(i + 7) % (i + 1);
            shuffled.preds.items.swap(i, j);
        }
        let (a, _) = observed(build(&f));
        let (b, _) = observed(shuffled);
        prop_assert!(close(a.g_precision, b.g_precision));
        prop_assert!(close(a.g_recall, b.g_recall));
        prop_assert!(close(a.precision, b.precision));
        prop_assert!(close(a.recall, b.recall));
    }

    #[test]
    fn verified_matching_prediction_never_lowers_recall(f in fixture(), pick in any::<prop::sample::Index>()) {
        let base = build(&f);
        let before = oracle(&base);
        prop_assume!(!before.q_bar.is_empty());
        let target = pick.get(&before.q_bar).clone();
        let (base_recall, _) = observed(base);

        // "~" sorts after every generated text, so Q̄ is settled before the
        // new prediction is considered.
        let mut more = build(&f);
        let extra = "~extra".to_string();
        more.table.matches.insert((target.clone(), extra.clone()));
        more.table.matches.insert((extra.clone(), target.clone()));
        more.table.supports.insert((extra.clone(), "p5".into()));
        more.preds.items.push(ClarificationItem::new(extra, "y", Some("p5".into())));
        let (after, _) = observed(more);
        prop_assert_eq!(&after.q_bar, &before.q_bar);
        prop_assert!(after.g_recall.0 >= base_recall.g_recall.0);
    }

    #[test]
    fn unverified_prediction_never_adds_to_precision(f in fixture()) {
        let base = build(&f);
        let n = base.preds.len() as f64;
        let (before, _) = observed(base);
        let mut more = build(&f);
        more.preds.items.push(ClarificationItem::new("~bad", "y", Some("p5".into())));
        let (after, _) = observed(more);
        let hits_before = (before.g_precision.0 * n).round();
        let hits_after = (after.g_precision.0 * (n + 1.0)).round();
        prop_assert_eq!(hits_before, hits_after);
    }

    #[test]
    fn f1_properties(p in 0.0f64..=1.0, r in 0.0f64..=1.0) {
        prop_assert_eq!(g_f1(p, r), g_f1(r, p));
        prop_assert!((g_f1(p, p) - p).abs() <= 1e-15);
        prop_assert!(g_f1(p, r) <= 2.0 * p.min(r) + 1e-15);
        prop_assert!(g_f1(p, r) <= p.max(r) + 1e-15);
        prop_assert!((0.0..=1.0).contains(&g_f1(p, r)));
    }
}
