#!/usr/bin/env python3
"""Writes the scripted fixtures under fixtures/.

Each fixture directory gets a corpus, a generator script, a judge script,
a gold file (where evaluated) and a run config. Scripts are keyed the way
the engine keys its requests:

  I_R  query                        I_E  "query|passage_id"
  I_P  query                        I_G  "method|query"
  I_V  "batch|interpretation" (DtV verifier), "question|passage_id" (judge)
  I_M / I_D  query (equivalence classes)

Usage: python3 scripts/gen_fixtures.py [--out fixtures]
"""

import argparse
import json
import random
from pathlib import Path

SEED = 20261015


def extraction(q, a):
    return f"Interpretation: {q}\nAnswer: {a}"


def generation(items):
    blocks = []
    for q, a, pids in items:
        blocks.append(f"Interpretation: {q}\nAnswer: {a}\nPassages: {', '.join(pids)}")
    return "\n\n".join(blocks)


def write_jsonl(path, rows):
    path.write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows))


def write_json(path, value):
    path.write_text(json.dumps(value, indent=2, ensure_ascii=False, sort_keys=True) + "\n")


def config(gold=True, final_k=None, dim=256):
    c = {
        "method": "verdict",
        "retrieval": {"k_first": 100, "k_final": 20, "rerank_enabled": True},
        "consolidation": {"mode": "default"},
        "baseline": {"per_interpretation_k": 5, "final_k": final_k},
        "backends": {
            "scripted-generator": {"kind": "scripted", "script": "generator.json"},
            "scripted-judge": {"kind": "scripted", "script": "judge.json"},
            "token-hash": {"kind": "token_hash", "dim": dim},
        },
        "roles": {
            "generator": "scripted-generator",
            "verifier": "scripted-judge",
            "judge": "scripted-judge",
            "embedder": "token-hash",
        },
        "seed": 7,
        "paths": {"corpus": "corpus.jsonl", "output": "runs"},
    }
    if gold:
        c["paths"]["gold"] = "gold.jsonl"
    return c


class Fixture:
    """Accumulates passages, topics and script entries for one corpus."""

    def __init__(self):
        self.passages = []
        self.gen = {k: {} for k in ["I_R", "I_E", "I_P", "I_G", "I_V"]}
        self.judge = {"I_V": {"*": "No"}, "I_M": {}, "I_D": {}}
        self.topics = {}

    def passage(self, pid, title, text):
        self.passages.append({"id": pid, "title": title, "text": text})

    def topic(self, query, name, interp, answer, pids, aliases=()):
        """Passages in `pids` answer `interp`; `aliases` are equivalent
        phrasings (gold or generated) the judge should accept."""
        self.topics.setdefault(query, []).append((name, interp, answer, pids, list(aliases)))
        for pid in pids:
            self.gen["I_E"][f"{query}|{pid}"] = extraction(interp, answer)
            for q in [interp, *aliases]:
                self.judge["I_V"][f"{q}|{pid}"] = "Yes"
                self.judge["I_V"][f"correct|{q}|{pid}"] = "Yes"
        classes = self.judge["I_M"].setdefault(query, {"classes": []})["classes"]
        classes.append([interp, *aliases])
        self.judge["I_D"][query] = {"classes": [list(c) for c in classes]}

    def relevance(self, query):
        interps = []
        for _, interp, _, _, aliases in self.topics.get(query, []):
            interps += [interp, *aliases]
        self.judge["I_M"][f"relevance|{query}"] = {"yes_items": interps}

    def write(self, out, gold_rows=None, final_k=None):
        out.mkdir(parents=True, exist_ok=True)
        self.gen["I_E"]["*"] = "null"
        write_jsonl(out / "corpus.jsonl", self.passages)
        write_json(out / "generator.json", self.gen)
        write_json(out / "judge.json", self.judge)
        if gold_rows is not None:
            write_jsonl(out / "gold.jsonl", gold_rows)
        write_json(out / "config.json", config(gold=gold_rows is not None, final_k=final_k))


def hp(out):
    f = Fixture()
    q = "What is HP?"
    company = [
        ("founders", "Who founded Hewlett-Packard?", "Bill Hewlett and David Packard", [
            ("hp-inc-01", "Hewlett-Packard", "Hewlett-Packard was founded by Bill Hewlett and David Packard, two Stanford graduates who started the company in a rented garage."),
            ("hp-inc-02", "Hewlett-Packard history", "Bill Hewlett and David Packard founded Hewlett-Packard; a coin toss decided the order of their names in the company name."),
            ("hp-inc-03", "HP garage", "The HP Garage is known as the birthplace of Silicon Valley because Bill Hewlett and David Packard founded their company there."),
        ], ["Who founded the company HP Inc.?"]),
        ("founding", "When and where was Hewlett-Packard founded?", "In 1939 in a garage in Palo Alto, California", [
            ("hp-inc-04", "Hewlett-Packard founding", "Hewlett-Packard was founded in 1939 in a one-car garage in Palo Alto, California."),
            ("hp-inc-05", "HP company timeline", "The company timeline of HP begins on January 1, 1939, when the partnership was formed in Palo Alto."),
        ], []),
        ("headquarters", "Where is HP Inc. headquartered?", "Palo Alto, California", [
            ("hp-inc-06", "HP Inc.", "HP Inc. is an American technology company headquartered in Palo Alto, California."),
            ("hp-inc-07", "HP Inc. offices", "HP Inc. keeps its company headquarters on Page Mill Road in Palo Alto, California."),
        ], []),
        ("split", "What happened to the Hewlett-Packard company in 2015?", "It split into HP Inc. and Hewlett Packard Enterprise", [
            ("hp-inc-08", "Hewlett-Packard separation", "In 2015 the Hewlett-Packard company split into two companies: HP Inc., which kept personal computers and printers, and Hewlett Packard Enterprise."),
            ("hp-inc-09", "Hewlett Packard Enterprise", "Hewlett Packard Enterprise was formed in November 2015 when Hewlett-Packard split its enterprise business from HP Inc."),
        ], []),
        ("products", "What products does HP Inc. sell?", "Personal computers, printers and related supplies", [
            ("hp-inc-10", "HP Inc. products", "HP Inc. develops personal computers, printers, and 3D printing products for consumers and businesses."),
            ("hp-inc-11", "HP printers", "HP Inc. is one of the largest makers of printers and sells ink and toner supplies for its printer line."),
        ], []),
    ]
    unit = [
        ("watts", "How many watts is one mechanical horsepower?", "About 745.7 watts", [
            ("horsepower-01", "Horsepower", "Horsepower (hp) is a unit of power; one mechanical horsepower equals about 745.7 watts."),
            ("horsepower-02", "Units of power", "The mechanical horsepower unit of power is defined as 550 foot-pounds per second, or roughly 745.7 watts."),
            ("horsepower-03", "hp conversion", "To convert horsepower to watts, multiply the power in hp by 745.7."),
        ], ["How many watts is one horsepower?"]),
        ("origin", "Who introduced horsepower as a unit of power?", "James Watt", [
            ("horsepower-04", "History of horsepower", "The horsepower unit was adopted in the late 18th century by Scottish engineer James Watt to compare steam engines with draft horses."),
            ("horsepower-05", "James Watt", "James Watt introduced horsepower as a unit of power when marketing his improved steam engine."),
        ], []),
        ("metric", "How is metric horsepower defined?", "The power to raise 75 kilograms by one metre in one second, about 735.5 watts", [
            ("horsepower-06", "Metric horsepower", "Metric horsepower (PS) is the power needed to raise 75 kilograms by one metre in one second, about 735.5 watts."),
            ("horsepower-07", "PS unit", "The metric horsepower unit, abbreviated PS, equals approximately 735.5 watts of power."),
        ], []),
        ("brake", "What does brake horsepower measure in an engine?", "Engine power measured at the crankshaft before drivetrain losses", [
            ("horsepower-08", "Brake horsepower", "Brake horsepower (bhp) is engine power measured at the crankshaft, before losses in the gearbox and drivetrain."),
            ("horsepower-09", "Engine ratings", "Car engine ratings often quote brake horsepower, the power an engine delivers at its crankshaft."),
        ], []),
    ]
    for name, interp, answer, rows, aliases in company + unit:
        for pid, title, text in rows:
            f.passage(pid, title, text)
        f.topic(q, name, interp, answer, [r[0] for r in rows], aliases)
    for i, (title, text) in enumerate([
        ("Sourdough bread", "Sourdough bread is leavened with a culture of wild yeast and lactic acid bacteria."),
        ("Monsoon", "A monsoon is a seasonal reversal of winds bringing heavy rainfall to South Asia."),
        ("Chess openings", "The Sicilian Defence is a popular chess opening beginning with 1.e4 c5."),
        ("Coral reefs", "Coral reefs are built by colonies of tiny animals that secrete calcium carbonate."),
        ("Violin making", "Antonio Stradivari crafted violins in Cremona during the 17th and 18th centuries."),
        ("Glaciers", "Glaciers form where accumulated snow compresses into thick ice masses over centuries."),
        ("Tea ceremony", "The Japanese tea ceremony is a ritual preparation of powdered green tea."),
        ("Basalt", "Basalt is a fine-grained volcanic rock formed from rapidly cooling lava."),
        ("Honeybees", "Honeybees communicate the location of flowers through a waggle dance."),
        ("Beatrix Potter", "Beatrix Potter wrote and illustrated The Tale of Peter Rabbit in 1902."),
    ]):
        f.passage(f"misc-{i + 1:02d}", title, text)
    f.relevance(q)
    f.gen["I_R"][q] = "HP Hewlett-Packard company HP Inc. horsepower hp unit of power watts engine"

    company_q = "What is HP, the technology company Hewlett-Packard?"
    unit_q = "What is hp, the horsepower unit of power?"
    wizard_q = "What is HP in Harry Potter?"
    f.gen["I_P"][q] = f"1. {company_q}\n2. {unit_q}\n3. {wizard_q}"
    company_ids = [r[0] for t in company for r in t[3]]
    unit_ids = [r[0] for t in unit for r in t[3]]
    f.judge["I_V"][f"batch|{company_q}"] = {"yes_items": company_ids}
    f.judge["I_V"][f"batch|{unit_q}"] = {"yes_items": unit_ids}
    f.judge["I_V"][f"batch|{wizard_q}"] = {"yes_items": []}
    founders = ("Who founded Hewlett-Packard?", "Bill Hewlett and David Packard", company_ids[:3])
    watts = ("How many watts is one mechanical horsepower?", "About 745.7 watts", unit_ids[:3])
    potter = ("Who wrote the Harry Potter books?", "J. K. Rowling", [])
    f.gen["I_G"][f"dtv|{q}"] = generation([founders, watts])
    f.gen["I_G"][f"dtv_noverify|{q}"] = generation([founders, watts, potter])
    f.gen["I_G"][f"rac|{q}"] = generation([
        founders,
        ("Where is HP Inc. headquartered?", "Palo Alto, California", company_ids[5:7]),
        watts,
        ("Who introduced horsepower as a unit of power?", "James Watt", unit_ids[3:5]),
    ])
    gold = [{
        "query": q,
        "interpretations": [
            {"q": "Who founded the company HP Inc.?", "answers": ["Bill Hewlett and David Packard"], "passage_id": "hp-inc-01"},
            {"q": "How many watts is one horsepower?", "answers": ["745.7 watts"], "passage_id": "horsepower-01"},
            {"q": "Who wrote the Harry Potter books?", "answers": ["J. K. Rowling"]},
        ],
    }]
    f.write(out, gold, final_k=None)


def insurance(out):
    f = Fixture()
    q = "rental cars"
    topics = [
        ("coverage", "Does my auto policy cover a rental car I drive on vacation?", "Yes, liability and collision coverage extend to a rental car used as a temporary substitute", [
            ("ins-01", "Rental vehicle coverage", "Your auto policy's liability and collision coverage extend to a rental car you drive as a temporary substitute, including on vacation."),
            ("ins-02", "Temporary substitute vehicles", "A rental car driven while on vacation is treated as a temporary substitute vehicle and is covered by your existing auto policy limits."),
        ]),
        ("reimbursement", "Will my policy pay for a rental car while my car is being repaired after a covered claim?", "Yes, rental reimbursement pays up to $40 per day for 30 days", [
            ("ins-03", "Rental reimbursement", "Rental reimbursement coverage pays up to $40 per day, for a maximum of 30 days, for a rental car while your vehicle is repaired after a covered claim."),
            ("ins-04", "Transportation expenses", "If your car is in the shop after a covered loss, rental reimbursement covers a rental car up to $40 per day for 30 days."),
        ]),
        ("waiver", "Do I need to buy the rental company's collision damage waiver?", "Usually not if you carry collision coverage, though the waiver avoids a deductible", [
            ("ins-05", "Collision damage waiver", "If you carry collision coverage you usually do not need the rental company's collision damage waiver, although the waiver avoids paying your deductible."),
        ]),
        ("abroad", "Am I covered when renting a car outside the United States?", "Only in Canada; rentals in other countries need local insurance", [
            ("ins-06", "Renting abroad", "Coverage applies to rental cars in the United States and Canada only; when renting a car in other countries, buy insurance from the rental company."),
        ]),
    ]
    for name, interp, answer, rows in topics:
        for pid, title, text in rows:
            f.passage(pid, title, text)
        f.topic(q, name, interp, answer, [r[0] for r in rows])
    for i, (title, text) in enumerate([
        ("Home insurance", "Homeowners insurance covers damage to your house from fire, wind and theft."),
        ("Life insurance", "Term life insurance pays a death benefit if the insured dies during the term."),
        ("Roadside assistance", "Roadside assistance covers towing, jump starts and flat tire changes."),
        ("Premium discounts", "Safe drivers can earn a discount on their auto premium after three claim-free years."),
    ]):
        f.passage(f"ins-misc-{i + 1:02d}", title, text)
    f.gen["I_R"][q] = "rental car coverage auto policy rental reimbursement collision damage waiver renting"
    f.relevance(q)
    f.write(out, None)


SENSES = [
    "river", "programming language", "board game", "chemical element", "football club",
    "opera", "mountain", "software company", "bird species", "festival", "novel", "airline",
    "constellation", "dance", "grape variety", "satellite", "font", "cheese", "planet", "ship",
]
ANSWER_WORDS = ["north", "copper", "seven", "amber", "winter", "delta", "harbor", "violet", "granite", "meadow"]


def synthetic(out):
    rng = random.Random(SEED)
    f = Fixture()
    gold_rows = []
    syllables = ["zor", "vel", "qua", "mir", "tal", "bex", "nor", "kip", "dra", "lum", "sef", "yon"]
    names = set()
    while len(names) < 20:
        names.add((rng.choice(syllables) + rng.choice(syllables)).capitalize())
    for qi, name in enumerate(sorted(names)):
        q = f"What is {name}?"
        senses = rng.sample(SENSES, rng.randint(2, 4))
        gold = []
        for si, sense in enumerate(senses):
            interp = f"What is {name} the {sense}?"
            answer = f"A {sense} known for {rng.choice(ANSWER_WORDS)} {rng.choice(ANSWER_WORDS)}"
            n_pass = rng.randint(1, 3)
            pids = []
            for pi in range(n_pass):
                pid = f"syn-{qi:02d}-{si}-{pi}"
                pids.append(pid)
                f.passage(pid, f"{name} ({sense})", f"{name} is a {sense}. {answer}. Entry {pi + 1} about the {name} {sense}.")
            alias = f"Which {sense} is called {name}?"
            f.topic(q, sense, interp, answer, pids, [alias])
            gold.append({"q": alias, "answers": [answer], "passage_id": pids[0]})
        # One gold reading the corpus never mentions.
        missing = rng.choice([s for s in SENSES if s not in senses])
        gold.append({"q": f"Which {missing} is called {name}?", "answers": ["unknown"]})
        gold_rows.append({"query": q, "interpretations": gold})
        f.relevance(q)
        f.gen["I_R"][q] = name

        topics = f.topics[q]
        pseudo = [f"What is {name} the {s}?" for s in senses[:2]] + [f"What is {name} the {missing}?"]
        f.gen["I_P"][q] = "\n".join(f"{i + 1}. {p}" for i, p in enumerate(pseudo))
        for p in pseudo:
            ids = next((t[3] for t in topics if t[1] == p), [])
            f.judge["I_V"][f"batch|{p}"] = {"yes_items": ids}
        grounded = [(t[1], t[2], t[3]) for t in topics[:2]]
        f.gen["I_G"][f"dtv|{q}"] = generation(grounded)
        f.gen["I_G"][f"dtv_noverify|{q}"] = generation(grounded + [(pseudo[2], "Unknown", [])])
        f.gen["I_G"][f"rac|{q}"] = generation([(t[1], t[2], t[3]) for t in topics])
    f.write(out, gold_rows, final_k=5)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "fixtures"))
    args = ap.parse_args()
    out = Path(args.out)
    hp(out / "hp")
    insurance(out / "insurance")
    synthetic(out / "synthetic")


if __name__ == "__main__":
    main()
