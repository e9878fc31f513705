"""Validate a result document against docs/result.schema.json."""
import json
import sys

import jsonschema


def main() -> int:
    schema_path, doc_path, kind = sys.argv[1], sys.argv[2], sys.argv[3]
    with open(schema_path, encoding="utf-8") as f:
        schema = json.load(f)
    with open(doc_path, encoding="utf-8") as f:
        doc = json.load(f)
    jsonschema.Draft202012Validator.check_schema(schema)
    sub = dict(schema)
    sub.pop("oneOf")
    sub["$ref"] = f"#/$defs/{kind}"
    errors = list(jsonschema.Draft202012Validator(sub).iter_errors(doc))
    for e in errors:
        print(f"{doc_path}: {'/'.join(map(str, e.path))}: {e.message}")
    return 1 if errors else 0


if __name__ == "__main__":
    sys.exit(main())
