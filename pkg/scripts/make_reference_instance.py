"""Regenerate the bundled reference instance from its builder."""
import json
from pathlib import Path

from tankersched.instance import instance_from_dict, validate_instance
from tankersched.instances import build_reference_instance_dict

OUT = Path(__file__).resolve().parents[1] / "src" / "tankersched" / "data" / "reference_instance.json"


def main() -> None:
    doc = build_reference_instance_dict()
    rep = validate_instance(instance_from_dict(doc))
    if not rep.ok:
        raise SystemExit("\n".join(str(v) for v in rep.errors))
    OUT.write_text(json.dumps(doc, indent=1) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
