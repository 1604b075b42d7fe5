"""Regenerate the synthetic corpus in this directory.

Scores are deterministic: a SHA-256 jitter in [0, 0.35) plus a bonus for the
intended label. Some instances are deliberately steered to a wrong label and
one is an exact tie, so runs are neither perfect nor trivial.
"""

import hashlib
import json
from pathlib import Path

HERE = Path(__file__).parent
INVENTORY = "synthetic"

# offset, pos, lemmas, label, gloss
SENSES = [
    (10000001, "n", ["cell"], "Biology", "(biology) the smallest structural unit of a living organism"),
    (10000002, "n", ["cell"], "Computing", "one box of a spreadsheet grid holding a value"),
    (10000003, "n", ["cell"], "Computing", "a storage element of a memory chip"),
    (10000011, "n", ["virus"], "Biology", "(biology) an infectious agent that replicates inside living cells"),
    (10000012, "n", ["virus", "computer_virus"], "Computing", "(computing) a program that copies itself into other programs"),
    (10000021, "n", ["bug"], "Biology", "a small insect"),
    (10000022, "n", ["bug"], "Computing", "(computing) a fault in a program that causes wrong results"),
    (10000031, "n", ["score"], "Music", "a written form of a musical composition"),
    (10000032, "n", ["score"], "Computing", "a number produced by a benchmark program"),
    (10000041, "n", ["bass"], "Music", "(music) the lowest part in polyphonic music"),
    (10000042, "n", ["bass"], "Biology", "a freshwater fish with spiny fins"),
    (10000051, "n", ["mouse"], "Biology", "a small rodent with a long tail"),
    (10000052, "n", ["mouse"], "Computing", "a hand-operated pointing device"),
    (10000061, "n", ["organ"], "Music", "(music) a keyboard instrument with pipes"),
    (10000062, "n", ["organ"], "Biology", "(anatomy) a differentiated structure of an organism"),
    (10000071, "n", ["key"], "Music", "a set of related pitches forming a tonal centre"),
    (10000072, "n", ["key"], "Computing", "a button on a keyboard"),
    (10000073, "n", ["key"], "Computing", "a value used to look up a record"),
    (10000081, "n", ["membrane"], "Biology", "(biology) a thin layer of tissue covering a surface"),
    (10000091, "n", ["compiler"], "Computing", "a program that translates source code"),
    (10000101, "n", ["melody"], "Music", "a succession of notes forming a tune"),
    (10000111, "v", ["play"], "Music", "perform on a musical instrument"),
    (10000112, "v", ["play"], "Computing", "run a media file"),
    (10000121, "v", ["run"], "Computing", "execute a program"),
    (10000122, "v", ["run"], "Biology", "move fast on foot"),
    (10000131, "v", ["compose"], "Music", "write music"),
    (10000132, "v", ["compose"], "Computing", "combine functions into one"),
    (10000141, "v", ["digest"], "Biology", "break down food in the gut"),
    (10000151, "a", ["digital"], "Computing", "represented as discrete numbers"),
    (10000152, "a", ["digital"], "Music", "recorded as sampled audio"),
    (10000161, "a", ["cellular"], "Biology", "relating to living cells"),
    (10000162, "a", ["cellular"], "Computing", "relating to mobile phone networks"),
    (10000171, "a", ["harmonic"], "Music", "relating to harmony"),
    (10000181, "r", ["digitally"], "Computing", "by means of a computer"),
    (10000182, "r", ["digitally"], "Music", "by means of digital recording"),
    (10000191, "r", ["acoustically"], "Music", "without electronic amplification"),
]

# id, lemma, pos, context, target, gold offset, steer
# steer: "gold" favours the gold label, a label name favours that label,
# "tie" gives every candidate 0.5.
INSTANCES = [
    ("syn.001", "cell", "n", "The cell membrane controls what enters the organism.", "cell", 10000001, "gold"),
    ("syn.002", "cell", "n", "Type the formula into the cell next to the total.", "cell", 10000002, "gold"),
    ("syn.003", "cell", "n", "Each memory cell stores one bit.", "cell", 10000003, "Biology"),
    ("syn.004", "virus", "n", "The virus spread quickly through the population.", "virus", 10000011, "gold"),
    ("syn.005", "virus", "n", "The antivirus removed a virus from the laptop.", "virus", 10000012, "gold"),
    ("syn.006", "bug", "n", "A bug crawled across the leaf.", "bug", 10000021, "gold"),
    ("syn.007", "bug", "n", "The release was delayed by a bug in the parser.", "bug", 10000022, "gold"),
    ("syn.008", "score", "n", "The conductor studied the score before rehearsal.", "score", 10000031, "gold"),
    ("syn.009", "score", "n", "The benchmark score improved after the update.", "score", 10000032, "Music"),
    ("syn.010", "bass", "n", "The bass carried the harmony in the final chorus.", "bass", 10000041, "gold"),
    ("syn.011", "bass", "n", "He caught a bass in the lake.", "bass", 10000042, "tie"),
    ("syn.012", "mouse", "n", "The mouse hid behind the cupboard.", "mouse", 10000051, "gold"),
    ("syn.013", "mouse", "n", "Click the left mouse button twice.", "mouse", 10000052, "gold"),
    ("syn.014", "organ", "n", "The organ filled the cathedral with sound.", "organ", 10000061, "gold"),
    ("syn.015", "organ", "n", "The liver is the largest internal organ.", "organ", 10000062, "Music"),
    ("syn.016", "key", "n", "The sonata modulates to a minor key.", "key", 10000071, "gold"),
    ("syn.017", "key", "n", "Press any key to continue.", "key", 10000072, "gold"),
    ("syn.018", "membrane", "n", "A thin membrane lines the cavity.", "membrane", 10000081, "gold"),
    ("syn.019", "compiler", "n", "The compiler rejected the program.", "compiler", 10000091, "gold"),
    ("syn.020", "play", "v", "She will play the violin tonight.", "play", 10000111, "gold"),
    ("syn.021", "play", "v", "The app can play the file offline.", "play", 10000112, "gold"),
    ("syn.022", "run", "v", "Run the script with the debug flag.", "Run", 10000121, "gold"),
    ("syn.023", "run", "v", "Cheetahs run faster than any other animal.", "run", 10000122, "Computing"),
    ("syn.024", "compose", "v", "He likes to compose music for films.", "compose", 10000131, "gold"),
    ("syn.025", "digest", "v", "Cows digest grass slowly.", "digest", 10000141, "gold"),
    ("syn.026", "digital", "a", "The digital signal is sampled every millisecond.", "digital", 10000151, "gold"),
    ("syn.027", "cellular", "a", "Cellular respiration releases energy.", "Cellular", 10000161, "gold"),
    ("syn.028", "harmonic", "a", "The harmonic structure of the piece is simple.", "harmonic", 10000171, "gold"),
    ("syn.029", "digitally", "r", "The album was digitally remastered.", "digitally", 10000182, "Computing"),
    ("syn.030", "acoustically", "r", "The band performed acoustically.", "acoustically", 10000191, "gold"),
]

# offset, gold labels, steer (as above)
GLOSSES = [
    (10000001, ["Biology"], "gold"),
    (10000012, ["Computing"], "gold"),
    (10000022, ["Computing"], "gold"),
    (10000031, ["Music"], "gold"),
    (10000041, ["Music"], "gold"),
    (10000042, ["Biology"], "Music"),
    (10000052, ["Computing"], "gold"),
    (10000061, ["Music"], "gold"),
    (10000062, ["Biology"], "gold"),
    (10000081, ["Biology"], "gold"),
    (10000111, ["Music", "Computing"], "Computing"),
    (10000151, ["Computing"], "tie"),
]

LABELS = ["Biology", "Computing", "Music"]

TEMPLATES = {
    "wsd_word": "{label} is the domain of {word}.",
    "wsd_sentence": "The domain of the sentence is about {label}.",
    "dl_sentence": "The domain of the sentence is about {label}.",
}


def sid(offset, pos):
    return f"{offset:08d}-{pos}"


def jitter(premise, hypothesis):
    h = hashlib.sha256(f"{premise}\x00{hypothesis}".encode()).digest()
    return int.from_bytes(h[:8], "big") / 2**64 * 0.35


def score(premise, hypothesis, label, target, steer):
    if steer == "tie":
        return 0.5
    bonus = 0.6 if label == target else 0.0
    return round(jitter(premise, hypothesis) + bonus, 4)


def strip_hints(gloss):
    while gloss.startswith("("):
        end = gloss.find(")")
        inner = gloss[1:end]
        if end < 0 or not inner or any(c.isspace() or c == "(" for c in inner):
            break
        gloss = gloss[end + 1:].lstrip()
    return gloss


def main():
    by_offset = {s[0]: s for s in SENSES}
    lines = ["# synset\tlemmas\tgloss"]
    lines += [f"{sid(o, p)}\t{','.join(l)}\t{g}" for o, p, l, _, g in SENSES]
    (HERE / "lexicon.tsv").write_text("\n".join(lines) + "\n")
    (HERE / "inventory.tsv").write_text(
        "".join(f"{sid(o, p)}\t{lab}\n" for o, p, _, lab, _ in SENSES)
    )

    records, fixture = [], {}
    for iid, lemma, pos, context, target, gold, steer in INSTANCES:
        start = context.index(target)
        records.append({
            "id": iid, "lemma": lemma, "pos": pos, "context": context,
            "target_start": start, "target_end": start + len(target),
            "gold": [sid(gold, pos)],
        })
        cands = []
        for o, p, lemmas, lab, _ in SENSES:
            if p == pos and lemma in lemmas and lab not in cands:
                cands.append(lab)
        if len(cands) < 2:
            continue
        want = by_offset[gold][3] if steer == "gold" else steer
        for tid in ("wsd_word", "wsd_sentence"):
            for lab in cands:
                hyp = TEMPLATES[tid].format(label=lab, word=lemma.replace("_", " "))
                fixture[(context, hyp)] = score(context, hyp, lab, want, steer)
    (HERE / "wsd.jsonl").write_text(
        "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records)
    )

    gloss_rows = []
    for offset, gold, steer in GLOSSES:
        _, pos, _, _, gloss = by_offset[offset]
        gloss_rows.append({"synset": sid(offset, pos), "gloss": gloss, "gold": {INVENTORY: gold}})
        want = gold[0] if steer == "gold" else steer
        for premise in {gloss, strip_hints(gloss)}:
            for lab in LABELS:
                hyp = TEMPLATES["dl_sentence"].format(label=lab)
                # Hint-free premises get no bonus for hinted glosses, so the
                # two modes disagree on those.
                target = want if premise == gloss or premise == strip_hints(gloss) == gloss else None
                fixture[(premise, hyp)] = score(premise, hyp, lab, target, steer)
    (HERE / "gloss.jsonl").write_text(
        "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in gloss_rows)
    )

    (HERE / "scores.jsonl").write_text("".join(
        json.dumps({"premise": p, "hypothesis": h, "probability": v}, ensure_ascii=False) + "\n"
        for (p, h), v in sorted(fixture.items())
    ))


if __name__ == "__main__":
    main()
