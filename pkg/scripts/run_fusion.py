"""Two-stage expert fusion and its ablations on the two-view fixture."""
import argparse
import json
from pathlib import Path

import numpy as np

from gir.fusion import ABLATIONS
from gir.harness import FusionConfig, records_csv, run_fusion


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--config", default="configs/fusion_two_view.json")
    p.add_argument("--variants", nargs="+", default=list(ABLATIONS))
    p.add_argument("--out", default="results/fusion.csv")
    args = p.parse_args()

    doc = json.loads(Path(args.config).read_text())
    doc["variants"] = args.variants
    cfg = FusionConfig.from_dict(doc)
    records = run_fusion(cfg).records
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(records_csv(records))

    def stat(variant, metric):
        vals = [r.metric_value for r in records if r.variant == variant and r.metric_name == metric]
        return np.mean(vals), np.std(vals, ddof=1) if len(vals) > 1 else 0.0

    print("| variant | accuracy | best expert | EC |")
    print("|---|---|---|---|")
    for v in args.variants:
        best = np.mean([max(r0.metric_value, r1.metric_value) for r0, r1 in zip(
            [r for r in records if r.variant == v and r.metric_name == "expert0_accuracy"],
            [r for r in records if r.variant == v and r.metric_name == "expert1_accuracy"])])
        acc, ec = stat(v, "accuracy"), stat(v, "ec")
        print(f"| {v} | {100 * acc[0]:.2f} ± {100 * acc[1]:.2f} | {100 * best:.2f} | "
              f"{100 * ec[0]:.2f} ± {100 * ec[1]:.2f} |")


if __name__ == "__main__":
    main()
