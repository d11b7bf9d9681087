"""Runs the full pipeline on a config and validates report.json against the shipped schema."""
import json
import shutil
import subprocess
import sys

import jsonschema


def main() -> int:
    cli, schema_path, config, out_dir = sys.argv[1:5]
    shutil.rmtree(out_dir, ignore_errors=True)
    subprocess.run([cli, "all", "--config", config, "--out", out_dir, "--seed", "11"], check=True,
                   stdout=subprocess.DEVNULL)
    with open(schema_path) as f:
        schema = json.load(f)
    with open(f"{out_dir}/report.json") as f:
        report = json.load(f)
    jsonschema.Draft202012Validator.check_schema(schema)
    errors = sorted(jsonschema.Draft202012Validator(schema).iter_errors(report), key=lambda e: list(e.path))
    for e in errors[:20]:
        print(f"{'/'.join(map(str, e.path))}: {e.message}")
    if errors:
        print(f"{len(errors)} schema violations")
        return 1
    broken = dict(report)
    del broken["meta"]
    broken["tests"] = dict(report["tests"], adf=[dict(report["tests"]["adf"][0], verdict="maybe")])
    if jsonschema.Draft202012Validator(schema).is_valid(broken):
        print("schema accepted a report with missing and malformed fields")
        return 1
    print("report.json conforms to the schema")
    return 0


if __name__ == "__main__":
    sys.exit(main())
