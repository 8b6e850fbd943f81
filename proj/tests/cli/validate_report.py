"""Validate a report.json produced by `sieveate estimate` against the schema."""
import json
import sys

import jsonschema


def main() -> int:
    schema_path, report_path = sys.argv[1], sys.argv[2]
    with open(schema_path, encoding="utf-8") as fh:
        schema = json.load(fh)
    with open(report_path, encoding="utf-8") as fh:
        report = json.load(fh)
    jsonschema.Draft202012Validator.check_schema(schema)
    jsonschema.validate(report, schema, cls=jsonschema.Draft202012Validator)
    print(f"{report_path}: valid")
    return 0


if __name__ == "__main__":
    sys.exit(main())
