# hazsurf/real_life_samples/rotterdam/prepare_rotterdam.py
"""
Prepare the Rotterdam breast cancer data for hazsurf.

Input is the ``rotterdam`` table of the R ``survival`` package exported to
CSV (columns pid, age, grade, rtime, recur, dtime, death, ...; times in days).
Output adds:

    rtimey, dtimey       times since surgery in years (days / 365.25)
    rage, dage           ages at recurrence and at death
    fetimey              time to the first event, min(rtimey, dtimey)
    first_event          "recurrence", "death" or "censored"
    first_event_any      1 when first_event is not "censored"
    event_recurrence,    0/1 indicators of each first event, for fitting the
    event_death          cause-specific models

43 women have recurrence censored before their recorded death. Whether
they died without recurrence is unknown, so they are censored for death
at the recurrence censoring time (death = 0, dtime = rtime). Year times are
computed before that correction and are left as computed.

Usage:
    python -m hazsurf.real_life_samples.rotterdam.prepare_rotterdam rotterdam.csv rotterdam_prepared.csv
"""

import argparse
import logging
import sys

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

DAYS_PER_YEAR = 365.25
REQUIRED = ["age", "grade", "rtime", "recur", "dtime", "death"]


def prepare_rotterdam(raw: pd.DataFrame) -> pd.DataFrame:
    missing = [c for c in REQUIRED if c not in raw.columns]
    if missing:
        raise ValueError(f"rotterdam table is missing column(s): {', '.join(missing)}")
    d = raw.copy()
    for col in ("age", "rtime", "recur", "dtime", "death"):
        d[col] = pd.to_numeric(d[col])

    d["rtimey"] = d["rtime"] / DAYS_PER_YEAR
    d["dtimey"] = d["dtime"] / DAYS_PER_YEAR
    d["rage"] = d["age"] + d["rtimey"]
    d["dage"] = d["age"] + d["dtimey"]

    unsure = (d["rtime"] < d["dtime"]) & (d["recur"] == 0)
    logger.info(f"Censoring {int(unsure.sum())} deaths at the recurrence censoring time")
    d.loc[unsure, "death"] = 0
    d.loc[unsure, "dtime"] = d.loc[unsure, "rtime"]

    d["fetimey"] = np.minimum(d["rtimey"], d["dtimey"])
    d["first_event"] = np.where(
        d["recur"] == 1, "recurrence",
        np.where(d["death"] == 1, "death", "censored"),
    )
    d["first_event_any"] = (d["first_event"] != "censored").astype(int)
    d["event_recurrence"] = (d["first_event"] == "recurrence").astype(int)
    d["event_death"] = (d["first_event"] == "death").astype(int)
    return d


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    parser.add_argument("input", help="rotterdam table as CSV")
    parser.add_argument("output", help="prepared CSV")
    args = parser.parse_args(argv)

    prepared = prepare_rotterdam(pd.read_csv(args.input))
    prepared.to_csv(args.output, index=False, float_format="%.17g", lineterminator="\n")
    counts = prepared["first_event"].value_counts().to_dict()
    logger.info(f"Wrote {len(prepared)} rows to {args.output}; first events: {counts}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
