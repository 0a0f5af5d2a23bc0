//! Randomized verdict tables and an independent count of every metric
//! over them.

use std::collections::BTreeSet;
use std::sync::Arc;

use disambig::consolidate::{ClarificationItem, ClarificationSet, Source};
use disambig::corpus::{Corpus, Passage};
use disambig::eval::{
    build_grounded_gold, grounded_precision, grounded_recall, ungrounded_metrics, GoldInterpretation, GoldSet,
    Judge, JudgeDecision, Matcher,
};
use disambig::llm::{Backend, Gateway, GenerationRequest, TemplateId};
use disambig::retrieval::{ScoredPassage, Universe, UniverseKind};
use disambig::{Error, Result};
use rand::Rng;

pub const Q: &str = "What is HP";

/// Judge answering from explicit truth tables: `matches` holds (item,
/// reference) pairs judged equivalent, `supports` holds (question, passage).
#[derive(Default)]
pub struct TableJudge {
    pub matches: BTreeSet<(String, String)>,
    pub supports: BTreeSet<(String, String)>,
}

impl TableJudge {
    pub fn rel(&self, x: &str, y: &str) -> bool {
        x == y || self.matches.contains(&(x.to_string(), y.to_string()))
    }

    pub fn sup(&self, q: &str, pid: &str) -> bool {
        self.supports.contains(&(q.to_string(), pid.to_string()))
    }
}

impl Backend for TableJudge {
    fn id(&self) -> &str {
        "table"
    }

    fn generate(&self, r: &GenerationRequest) -> Result<String> {
        let yn = |b: bool| if b { "Yes" } else { "No" };
        match r.template_id {
            TemplateId::Match => Ok(r
                .items
                .iter()
                .map(|i| yn(r.reference.iter().any(|x| self.rel(i, x))))
                .collect::<Vec<_>>()
                .join("\n")),
            TemplateId::Verify => {
                let q = r.keys.last().expect("question key");
                Ok(yn(self.sup(q, &r.items[0])).to_string())
            }
            TemplateId::Dedup => Ok(r.items.join("\n")),
            _ => Err(Error::NotFound("table judge".into())),
        }
    }
}

pub fn corpus(n: usize) -> Corpus {
    Corpus::from_passages(
        "t",
        (0..n).map(|i| Passage::new(format!("p{i}"), "", format!("passage {i}"))).collect(),
    )
    .unwrap()
}

pub fn universe(ids: &[&str]) -> Universe {
    Universe {
        query: Q.into(),
        entries: ids
            .iter()
            .enumerate()
            .map(|(i, id)| ScoredPassage {
                id: id.to_string(),
                index: i,
                score: 1.0 - i as f64 / 100.0,
            })
            .collect(),
        k: ids.len(),
        kind: UniverseKind::Query,
    }
}


#[derive(Debug, Clone)]
pub struct Fixture {
    pub gold: Vec<(String, Option<usize>)>,
    pub preds: Vec<(String, Option<usize>)>,
    pub matches: Vec<(usize, usize)>,
    pub supports: Vec<(usize, usize)>,
}

pub const PASSAGES: usize = 6;
pub const FALLBACK: [&str; 3] = ["p0", "p1", "p2"];

pub fn text(i: usize, ng: usize) -> String {
    if i < ng {
        format!("gold {i}")
    } else {
        format!("pred {}", i - ng)
    }
}

pub struct Built {
    pub table: TableJudge,
    pub gold: GoldSet,
    pub preds: ClarificationSet,
}

pub fn build(f: &Fixture) -> Built {
    let ng = f.gold.len();
    let mut table = TableJudge::default();
    for &(a, b) in &f.matches {
        table.matches.insert((text(a, ng), text(b, ng)));
    }
    for &(a, p) in &f.supports {
        table.supports.insert((text(a, ng), format!("p{p}")));
    }
    let gold = GoldSet {
        query: Q.into(),
        interpretations: f
            .gold
            .iter()
            .map(|(q, p)| GoldInterpretation {
                q: q.clone(),
                answers: vec![],
                passage_id: p.map(|p| format!("p{p}")),
            })
            .collect(),
    };
    let preds = ClarificationSet::new(
        Q,
        Source::Verdict,
        f.preds
            .iter()
            .map(|(q, p)| ClarificationItem::new(q.clone(), "y", p.map(|p| format!("p{p}"))))
            .collect(),
    );
    Built { table, gold, preds }
}

pub struct Expected {
    pub precision: (f64, bool),
    pub recall: (f64, bool),
    pub g_precision: (f64, bool),
    pub g_recall: (f64, bool),
    pub q_bar: Vec<String>,
}

pub fn mean(hits: &[bool]) -> (f64, bool) {
    if hits.is_empty() {
        (0.0, true)
    } else {
        (hits.iter().filter(|h| **h).count() as f64 / hits.len() as f64, false)
    }
}

pub fn oracle(b: &Built) -> Expected {
    let t = &b.table;
    let preds: Vec<(&str, Option<&str>)> = b
        .preds
        .items
        .iter()
        .map(|i| (i.interpretation.as_str(), i.passage_id.as_deref()))
        .collect();
    let gold: Vec<&str> = b.gold.interpretations.iter().map(|g| g.q.as_str()).collect();
    let sup = |q: &str, p: Option<&str>| match p {
        Some(p) => t.sup(q, p),
        None => FALLBACK.iter().any(|f| t.sup(q, f)),
    };
    let precision = mean(&preds.iter().map(|(x, _)| gold.iter().any(|y| t.rel(x, y))).collect::<Vec<_>>());
    let recall = mean(&gold.iter().map(|y| preds.iter().any(|(x, _)| t.rel(y, x))).collect::<Vec<_>>());
    let g_precision = mean(&preds.iter().map(|(x, p)| sup(x, *p)).collect::<Vec<_>>());

    let mut q_bar: Vec<String> = Vec::new();
    for g in &b.gold.interpretations {
        if sup(&g.q, g.passage_id.as_deref()) && !q_bar.contains(&g.q) {
            q_bar.push(g.q.clone());
        }
    }
    let mut sorted = preds.clone();
    sorted.sort();
    for (x, p) in sorted {
        if sup(x, p) && !q_bar.iter().any(|y| t.rel(x, y)) {
            q_bar.push(x.to_string());
        }
    }
    let g_recall = if q_bar.is_empty() {
        (1.0, true)
    } else {
        mean(
            &q_bar
                .iter()
                .map(|y| preds.iter().any(|(x, p)| t.rel(y, x) && sup(y, *p)))
                .collect::<Vec<_>>(),
        )
    };
    Expected {
        precision,
        recall,
        g_precision,
        g_recall,
        q_bar,
    }
}

pub fn observed(b: Built) -> (Expected, Vec<JudgeDecision>) {
    let c = corpus(PASSAGES);
    let u = universe(&FALLBACK);
    let gold_q = b.gold.questions();
    let predicted = b.preds.interpretations();
    let judge = Judge::new(Gateway::new(Arc::new(b.table)));
    let ung = ungrounded_metrics(Q, &predicted, &gold_q, Matcher::Judge, &judge);
    let gp = grounded_precision(&b.preds, &u, &c, &judge);
    let gg = build_grounded_gold(&b.preds, &b.gold, &u, &c, &judge);
    let gr = grounded_recall(&gg, &b.preds, &u, &c, &judge);
    (
        Expected {
            precision: (ung.precision.value, ung.precision.degenerate),
            recall: (ung.recall.value, ung.recall.degenerate),
            g_precision: (gp.value, gp.degenerate),
            g_recall: (gr.value, gr.degenerate),
            q_bar: gg.interpretations(),
        },
        judge.decisions(),
    )
}

pub fn close(a: (f64, bool), b: (f64, bool)) -> bool {
    (a.0 - b.0).abs() <= 1e-12 && a.1 == b.1
}

fn maybe_passage(rng: &mut impl Rng) -> Option<usize> {
    if rng.random_bool(0.3) {
        None
    } else {
        Some(rng.random_range(0..PASSAGES))
    }
}

/// Same shape as the proptest strategy in the eval suite, drawn from `rng`.
pub fn random_fixture(rng: &mut impl Rng) -> Fixture {
    let ng = rng.random_range(1..=4);
    let np = rng.random_range(0..=5);
    let texts = ng + np + 2;
    let gold = (0..ng).map(|i| (text(i, ng), maybe_passage(rng))).collect();
    let preds = (0..np)
        .map(|_| (text(rng.random_range(0..texts), ng), maybe_passage(rng)))
        .collect();
    let matches = (0..rng.random_range(0..12))
        .map(|_| (rng.random_range(0..texts), rng.random_range(0..texts)))
        .collect();
    let supports = (0..rng.random_range(0..16))
        .map(|_| (rng.random_range(0..texts), rng.random_range(0..PASSAGES)))
        .collect();
    Fixture {
        gold,
        preds,
        matches,
        supports,
    }
}
