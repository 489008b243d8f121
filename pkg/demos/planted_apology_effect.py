"""Generate a synthetic community with a planted apology effect and recover it.

Run with ``python3 demos/planted_apology_effect.py [odds_ratio] [seed]``.
"""

import sys

from modtraj.ingest import CommentIndex, ParsedLog
from modtraj.pipeline import assemble_dataset, cohort_stage, cues_stage, stats_stage
from modtraj.synth import SynthConfig, generate


def main(odds_ratio=0.5, seed=1):
    corpus = generate(SynthConfig(n_users=2000, seed=seed, apology_recid_odds_ratio=odds_ratio))
    ds = assemble_dataset(ParsedLog(corpus.blocks, []), CommentIndex.from_events(corpus.comments))
    cs = cohort_stage(ds, corpus.config.cohort_config())
    flags = cues_stage(ds, cs)
    st = stats_stage(ds, cs, flags)

    labels = cs.labels.values()
    n = len(cs.cohort)
    print(f"cohort: {n} users")
    print(f"  departed within horizon {sum(l.departed_within_horizon for l in labels) / n:.1%}")
    print(f"  long-term recidivists   {sum(l.recidivist_long for l in labels) / n:.1%}")
    print()
    print(f"{'comparison':26s} {'present':>8s} {'absent':>8s} {'p':>10s}")
    for name, res in st.mosaics:
        if res is None:
            print(f"{name:26s} degenerate")
            continue
        print(f"{name:26s} {res.present_recid_ratio:8.3f} {res.absent_recid_ratio:8.3f} "
              f"{res.test.p_value:10.2e}")
    print()
    print("words most associated with recidivists:", ", ".join(r.word for r in st.fightin[:8]))
    print("words most associated with reformed users:", ", ".join(r.word for r in st.fightin[-8:]))


if __name__ == "__main__":
    args = sys.argv[1:]
    main(float(args[0]) if args else 0.5, int(args[1]) if len(args) > 1 else 1)
