"""Regenerate the bundled sample corpus and synonym map.

The corpus is template text in four news-like topics; it exists so the text
pipeline can run end to end without downloading a benchmark.

    python3 scripts/make_sample_corpus.py src/jointmatch/data
"""

import argparse
import csv
import os

import numpy as np

TOPICS = {
    "world": "government minister election border treaty embassy president parliament "
             "protest refugees ceasefire diplomat summit capital rebels".split(),
    "sports": "match team coach season league goal striker championship tournament "
              "stadium victory defeat playoff referee medal".split(),
    "business": "market shares profit investors quarter earnings bank merger stocks "
                "revenue company economy prices deal growth".split(),
    "sci_tech": "software internet researchers computer chip network launch users "
                "device data company growth deal prices space".split(),
}
FILLER = ("the a on in of for with after before today new report says said will "
          "over amid about as its their this week year").split()
SYNONYMS = {
    "government": ["administration", "cabinet"], "minister": ["secretary", "official"],
    "election": ["vote", "poll"], "president": ["leader"], "protest": ["rally", "demonstration"],
    "match": ["game", "fixture"], "team": ["squad", "side"], "coach": ["manager", "trainer"],
    "victory": ["win", "triumph"], "defeat": ["loss"], "goal": ["score"],
    "market": ["exchange"], "profit": ["gain", "earnings"], "shares": ["stock", "equity"],
    "company": ["firm", "corporation"], "deal": ["agreement", "pact"], "prices": ["costs"],
    "growth": ["expansion"], "software": ["program", "application"],
    "computer": ["machine", "pc"], "researchers": ["scientists"], "device": ["gadget"],
    "launch": ["release", "debut"], "users": ["customers"], "said": ["stated", "reported"],
    "new": ["fresh", "latest"], "report": ["story", "account"], "week": ["weekend"],
}


def sentence(rng, topic):
    words = list(rng.choice(TOPICS[topic], size=rng.integers(2, 5)))
    # off-topic words keep the task from being trivially separable
    if rng.random() < 0.4:
        other = rng.choice([t for t in TOPICS if t != topic])
        words += list(rng.choice(TOPICS[other], size=rng.integers(1, 3)))
    words += list(rng.choice(FILLER, size=rng.integers(4, 9)))
    rng.shuffle(words)
    return " ".join(words)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out_dir")
    ap.add_argument("--per-class", type=int, default=100)
    ap.add_argument("--seed", type=int, default=20231016)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    os.makedirs(args.out_dir, exist_ok=True)
    with open(os.path.join(args.out_dir, "sample_news.csv"), "w", newline="",
              encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["text", "label"])
        for _ in range(args.per_class):
            for topic in TOPICS:
                w.writerow([sentence(rng, topic), topic])
    with open(os.path.join(args.out_dir, "synonyms.tsv"), "w", encoding="utf-8") as fh:
        fh.write("# token<TAB>comma-separated synonyms\n")
        for word in sorted(SYNONYMS):
            fh.write(f"{word}\t{','.join(SYNONYMS[word])}\n")


if __name__ == "__main__":
    main()
