"""Validate a run directory's report.json against the shipped schema and
check every listed artifact exists."""
import json
import pathlib
import sys

import jsonschema

schema_path, out_root = pathlib.Path(sys.argv[1]), pathlib.Path(sys.argv[2])
runs = sorted(out_root.glob("run_*/report.json"))
if not runs:
    sys.exit(f"no report.json under {out_root}")
schema = json.loads(schema_path.read_text())
for report_path in runs:
    report = json.loads(report_path.read_text())
    jsonschema.validate(report, schema)
    missing = [a for a in report["artifacts"] if not (report_path.parent / a).is_file()]
    if missing:
        sys.exit(f"{report_path}: missing artifacts {missing}")
    print(f"ok {report_path}")
