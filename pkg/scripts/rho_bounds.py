#!/usr/bin/env python3
"""Certified decay-rate bounds for the bundled models.

Writes one JSON report and one tidy CSV per model: the exact a_n/n table
(each entry an upper bound on the rate), the walk rate value Lambda(0),
and the linear-fractional closed form where it applies.
"""

import argparse
import json
import pathlib

from bpre.cli import emit_plot_data
from bpre.models import gw_binary, intermediate_model, strongly_model, weakly_model
from bpre.rates import rho_report


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="out/rho", type=pathlib.Path)
    ap.add_argument("--n-max", default=16, type=int)
    args = ap.parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)

    models = {
        "gw_binary": gw_binary(),
        "weakly": weakly_model(),
        "strongly": strongly_model(),
        "intermediate": intermediate_model(),
    }
    for name, model in models.items():
        n_max = min(args.n_max, 24 if len(model.states) == 1 else args.n_max)
        report = rho_report(model, n_max=n_max)
        doc = report.to_json()
        (args.out_dir / f"{name}.json").write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
        (args.out_dir / f"{name}.csv").write_text(emit_plot_data(doc))
        lf = "" if report.lf_closed_form is None else f" lf_rho={report.lf_closed_form:.6f}"
        print(
            f"{name}: z0={report.z0} fekete_upper={report.fekete_upper:.6f} "
            f"lambda0={report.lambda0:.6f}{lf}"
        )


if __name__ == "__main__":
    main()
