"""Two heuristics side by side on a small benchmark.

TS-MCWS fixes a number of stations, picks which ones with a tabu search and
routes with savings merges. SIGALNS relocates stations greedily and
improves routes with destroy-and-repair moves. The script runs both over three
suite instances and three seeds, writes the usual report files and prints
the per-cell Best with the gap in SIGALNS's favour.

    python demos/compare_heuristics.py [output-dir]
"""

import sys
import tempfile

from elrp.bench import default_suite, temperature_sweep


def main(out_dir):
    suite = default_suite([30, 45, 60])
    report = temperature_sweep(suite, ["tsmcws", "sigalns"], temps=[-10.0, 30.0],
                               reps=3, out_dir=out_dir)

    print(f"{'instance':>8} {'temp':>5} {'TS-MCWS':>9} {'SIGALNS':>9} {'gap %':>7}")
    for g in report.gaps:
        ts = report.row(g.instance, "tsmcws", g.temperature, g.charge_time)
        sig = report.row(g.instance, "sigalns", g.temperature, g.charge_time)
        print(f"{g.instance:>8} {g.temperature:+5.0f} {ts.best:>9.0f} {sig.best:>9.0f} "
              f"{g.gap_percent:>7.2f}")

    for temp in (-10.0, 30.0):
        summary = report.gap_summary(temp, 80.0)
        print(f"\nat {temp:+.0f} C: gap of means {summary['gap_of_means_percent']:.2f}%, "
              f"mean of gaps {summary['mean_of_gaps_percent']:.2f}%", end="")
    print(f"\n\nreport files written to {out_dir}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp(prefix="elrp-demo-"))
