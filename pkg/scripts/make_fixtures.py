"""Generate a demo Sanctuary input, replay fixtures and a detector report.

    python scripts/make_fixtures.py out/demo
"""

import argparse
from pathlib import Path

from verchain.stats import dump_reports
from verchain.synthetic import demo_world, record_fixtures, write_sanctuary


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("target", type=Path)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--lock-versions", type=int, default=101)
    args = parser.parse_args()

    world = demo_world(args.seed, args.lock_versions)
    write_sanctuary(world, args.target / "sanctuary")
    n = record_fixtures(world, args.target / "fixtures")
    (args.target / "vulns.json").write_text(dump_reports(world.reports))
    print(f"{len(world.seeds)} seeds, {n} fixture files, {len(world.reports)} reports -> {args.target}")


if __name__ == "__main__":
    main()
