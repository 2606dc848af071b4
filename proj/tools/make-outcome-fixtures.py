#!/usr/bin/env python3
# Copyright 2026 The llm-bisect Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Regenerates fixtures/outcomes/*.jsonl.

category-baseline / category-finetuned: 31 paired sessions whose per-category
success counts match the reference comparison. Step timings are placeholders.

synthetic-baseline / synthetic-candidate: 32 paired sessions with invented
timings, for exercising the signed-rank report. Labelled synthetic.
"""

import json
import random
import sys
from pathlib import Path

# (category, total, baseline successes, fine-tuned successes)
CATEGORY_ROWS = [
    ("display-output", 3, 3, 3),
    ("input-handling", 3, 3, 3),
    ("state-transition", 3, 3, 3),
    ("decision-rules", 4, 4, 4),
    ("structural-refactor", 4, 4, 4),
    ("robustness-error-handling", 4, 0, 2),
    ("flow-control", 3, 3, 3),
    ("runtime-launch-safeguard", 4, 0, 1),
    ("documentation-cosmetic", 3, 3, 3),
]
STEPS = 5


def header(system, synthetic, note):
    return {"type": "header", "format": "llm-bisect-outcomes", "version": 1,
            "system": system, "synthetic": synthetic, "note": note}


def outcome(sid, category, ok, step_time, steps=STEPS):
    verdicts = [True] * steps
    if not ok:
        verdicts[steps // 2] = False
    return {"type": "outcome", "session_id": sid, "category": category,
            "step_verdict_correct": verdicts, "wall_time": round(step_time * steps, 3),
            "steps": steps}


def write(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records))


def main(out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    note = "success counts per category follow the reference comparison; step timings are placeholders"
    base = [header("baseline", True, note)]
    tuned = [header("fine-tuned", True, note)]
    n = 0
    for cat, total, b_ok, t_ok in CATEGORY_ROWS:
        for i in range(total):
            n += 1
            sid = f"q{n:02d}"
            base.append(outcome(sid, cat, i < b_ok, 4.0))
            tuned.append(outcome(sid, cat, i < t_ok, 2.0))
    write(out / "category-baseline.jsonl", base)
    write(out / "category-finetuned.jsonl", tuned)

    rng = random.Random(20260101)
    note = "invented timings for exercising the signed-rank report"
    base = [header("baseline", True, note)]
    cand = [header("candidate", True, note)]
    cats = [row[0] for row in CATEGORY_ROWS]
    for k in range(32):
        sid = f"r{k + 1:02d}"
        cat = cats[k % len(cats)]
        b = round(rng.uniform(3.0, 6.0), 3)
        # 28 clear improvements, 4 small regressions
        c = round(b * rng.uniform(0.4, 0.7), 3) if k % 8 else round(b * rng.uniform(1.01, 1.1), 3)
        base.append(outcome(sid, cat, True, b))
        cand.append(outcome(sid, cat, True, c))
    write(out / "synthetic-baseline.jsonl", base)
    write(out / "synthetic-candidate.jsonl", cand)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "fixtures" / "outcomes")
