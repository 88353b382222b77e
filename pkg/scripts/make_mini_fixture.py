"""Regenerate the bundled miniature dataset in src/bidsim/data/mini/.

Eight papers and sixteen reviewer profiles in the released-dataset schema,
with two authors per paper, groups of size 4, 3, 2, 2 and five solo
reviewers.  Run from the repository root.
"""

import csv
import itertools
import json
import random
from pathlib import Path

OUT = Path("src/bidsim/data/mini")
TITLES = [
    "Auction Design with Budget-Constrained Bidders",
    "Computing Correlated Equilibria in Sparse Games",
    "Proportional Representation under Approval Voting",
    "Sharpness-Aware Training for Deep Networks",
    "Curriculum Schedules for Reinforcement Learning Agents",
    "Variational Inference for Hierarchical Bayesian Networks",
    "Bidirectional Heuristic Search Revisited",
    "Cutting Planes for Mixed Integer Programs",
]
PAPER_AREA = [6, 8, 3, 20, 21, 10, 14, 17]
# name, sas, authored paper, group ("" for solo), target paper or None
PROFILES = [
    ("r00", (6, 7, 3), 0, 1, None),
    ("r01", (8, 9, 6), 1, 1, None),
    ("r02", (3, 4, 6), 2, 1, None),
    ("r03", (20, 22, 7), 3, 1, None),
    ("r04", (21, 20, 23), 4, 2, None),
    ("r05", (10, 11, 21), 5, 2, None),
    ("r06", (14, 15, 20), 6, 2, None),
    ("r07", (17, 18, 10), 7, 3, None),
    ("r08", (6, 8, 17), 0, 3, None),
    ("r09", (8, 7, 5), 1, 4, None),
    ("r10", (3, 5, 0), 2, 4, None),
    ("r11", (20, 21, 12), 3, "", 4),
    ("r12", (21, 23, 14), 4, "", 6),
    ("r13", (10, 13, 17), 5, "", 7),
    ("r14", (14, 16, 6), 6, "", 0),
    ("r15", (17, 19, 3), 7, "", 2),
]
HONEST = ["r00", "r01", "r02", "r04", "r05", "r07", "r09", "r10", "r11", "r12", "r14", "r15"]
# strategy index per malicious responder: 0 Basic, 1 Negative-in-area, 2 Overlap, 3 Cycle, 4 Popularity, -1 none
MALICIOUS = {
    "r00": 0, "r01": 0, "r02": 1, "r03": 3,
    "r04": 2, "r05": 2, "r06": -1,
    "r07": 3,
    "r09": 1, "r10": 0,
    "r11": 4, "r13": 0,
}
DISCUSSED = {"r00": "Y", "r01": "Y", "r02": "N", "r03": "Y", "r04": "Y", "r05": "Y", "r06": "", "r07": "N",
             "r09": "Y", "r10": "Y", "r11": "N", "r13": ""}
LABEL = {-1: "Not willing to review", 0: "Indifferent", 1: "Eager to review"}

with open("src/bidsim/data/taxonomy.txt") as fh:
    TOPIC_OF = {}
    topics = []
    for i, line in enumerate(l for l in fh if l.strip()):
        t = line.split("::")[0].strip()
        if t not in topics:
            topics.append(t)
        TOPIC_OF[i] = topics.index(t)

rng = random.Random(20240601)
prof = {p[0]: p for p in PROFILES}


def in_topic(name, paper):
    return TOPIC_OF[PAPER_AREA[paper]] in {TOPIC_OF[a] for a in prof[name][1]}


def targets(name):
    _, _, own, group, target = prof[name]
    if target is not None:
        return {target}
    return {p[2] for p in PROFILES if p[3] == group and p[0] != name} - {own}


def honest_row(name):
    own = prof[name][2]
    row = []
    for p in range(8):
        if p == own:
            row.append(rng.choice([0, 1]))
        elif PAPER_AREA[p] in prof[name][1]:
            row.append(1)
        elif in_topic(name, p):
            row.append(rng.choice([0, 1, 0]))
        else:
            row.append(rng.choice([-1, 0, -1]))
    return row


def malicious_row(name):
    own, strategy = prof[name][2], MALICIOUS[name]
    tg = targets(name)
    row = []
    for p in range(8):
        if p == own:
            row.append(0)
        elif p in tg:
            row.append(1)
        elif strategy == 1 and in_topic(name, p):
            row.append(-1)
        else:
            row.append(rng.choice([0, 0, -1]))
    if strategy == 3:
        group = [q[0] for q in PROFILES if q[3] == prof[name][3]]
        nxt = group[(group.index(name) + 1) % len(group)]
        row = [0 if (p in tg and p != prof[nxt][2]) else v for p, v in enumerate(row)]
    if strategy == 2:
        row[3] = 1  # shared non-target positive for the Overlap pair
    if strategy in (4, -1):
        row[rng.randrange(8)] = 1 if rng.random() < 0.5 else row[0]
    return row


def write_bidding(path, rows, column_order, blank_cells=()):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["Name"] + [f"Q1_{p + 1}" for p in column_order] + ["Q2", "Q3"])
        w.writerow(["Name"] + [f'Bid - "{TITLES[p]}"' for p in column_order]
                   + ["Describe your bidding strategy.", "Anything else?"])
        for name, row in rows:
            cells = [LABEL[row[p]] for p in column_order]
            for (n, p) in blank_cells:
                if n == name and row[p] == 0:
                    cells[column_order.index(p)] = ""
            w.writerow([name] + cells + [f"strategy notes from {name}", ""])


OUT.mkdir(parents=True, exist_ok=True)
(OUT / "paper_titles.txt").write_text("".join(t + "\n" for t in TITLES))
(OUT / "subject_areas.txt").write_text(Path("src/bidsim/data/taxonomy.txt").read_text())
with open(OUT / "setup.csv", "w", newline="") as fh:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["name", "sas", "authored_sa", "authored_id", "target_sa", "target_id", "group"])
    for name, sas, own, group, target in PROFILES:
        w.writerow([name, " ".join(map(str, sas)), PAPER_AREA[own], own,
                    "" if target is None else PAPER_AREA[target], "" if target is None else target, group])

honest_rows = [(n, honest_row(n)) for n in HONEST]
malicious_rows = [(n, malicious_row(n)) for n in MALICIOUS]
write_bidding(OUT / "honest_bidding.csv", honest_rows, list(range(8)),
              blank_cells=[(n, p) for n, _ in honest_rows[:3] for p in range(8)])
shuffled = list(range(8))
rng.shuffle(shuffled)
write_bidding(OUT / "malicious_bidding.csv", malicious_rows, shuffled)
with open(OUT / "strategy_annotations.csv", "w", newline="") as fh:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["Name", "Strategy", "Discussed"])
    for name, s in MALICIOUS.items():
        w.writerow([name, s, DISCUSSED[name]])

# 8x8 assignment fixture: reviewers r00..r07 (authors of papers 0..7), unit loads.
assign_names = [f"r0{i}" for i in range(8)]
assign_rows = [(n, [rng.choice([-1, 0, 0, 1]) for _ in range(8)]) for n in assign_names]
write_bidding(OUT / "assign_bids.csv", assign_rows, list(range(8)))


def subject(name, p):
    if PAPER_AREA[p] in prof[name][1]:
        return 1.0
    return 0.5 if in_topic(name, p) else 0.0


sim = [[(1 + subject(n, p)) * 2.0 ** row[p] for p in range(8)] for n, row in assign_rows]
best = max(
    sum(sim[r][perm[r]] for r in range(8))
    for perm in itertools.permutations(range(8))
    if all(perm[r] != prof[assign_names[r]][2] for r in range(8))
)
(OUT / "assign_expected.json").write_text(json.dumps({"loads": [1, 1], "objective": best}, indent=2) + "\n")
print("brute-force objective", best)
