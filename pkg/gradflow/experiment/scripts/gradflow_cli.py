# -*- coding: utf-8 -*-

# gradflow: continuous-time proportional-integral distributed optimization
#   (c) 2026-present : gradflow developers

import sys
from gradflow.experiment.cli import main

helptext = """
Command-line front-end of gradflow.

run --scenario FILE [--out DIR]: simulate the scenario and save trajectory.csv, metrics.csv, oracle.json and
manifest.json in DIR/<name>-<hash>.

table {table1|table2|table3} [--dt F] [--horizon F] [--workers N] [--out DIR]: run P with a constant gain,
P with a fading gain, I and PI on the line graph (table1), on the 20-agent ring with the full layout (table2) or
with the reduced layout (table3), and print the worst-case overshoot, settling times and percent error next to
the published values.

verify [--fault corrupt-gradient]: run the verification suite.

plotdata FILE [--variable J] [--agents LIST] [--output PATH]: long-format CSV (time, series, value) of a
saved trajectory, e.g. variable 10 across its trackers.

Exit codes: 0 success, 1 invalid input, 2 divergent integration, 3 failed verification.
"""

if __name__ == '__main__':
    sys.exit(main())
