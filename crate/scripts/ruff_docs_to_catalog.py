#!/usr/bin/env python3
"""Convert locally installed ruff rule documentation into an idiom catalog.

Usage: ruff rule --all --output-format json | python3 scripts/ruff_docs_to_catalog.py > data/catalog/ruff_idioms.jsonl

Only reads `ruff rule` output; nothing is fetched over the network.
"""
import json
import re
import sys

TRAINING = (
    "F405 F501 F502 F601 F621 "
    "E402 E701 E721 E741 E743 "
    "N801 N802 N803 N804 N805 N806 N807 N811 N812 N813 "
    "UP001 UP003 UP004 UP005 UP006 UP007 UP008 UP009 UP010 UP011 "
    "UP040 UP044 UP045 UP046 UP047 "
    "B002 B003 B004 B005 B006 B007 B008 B009 B010 B012"
).split()
IN_DOMAIN = "ERA001 C901 I001 I002 BLE001".split()
NEAR = "F403 F406 F503 F602 F622 E401 E702 E722 E731 E742".split()
FAR = (
    "ANN001 ANN002 ANN003 ANN201 ANN202 ANN204 ANN205 ANN206 "
    "ASYNC100 ASYNC105 ASYNC109 ASYNC110 ASYNC115 ASYNC116 ASYNC210 ASYNC220 "
    "ASYNC221 ASYNC222 ASYNC230 ASYNC251 "
    "S102 S103 S104 S105 S106 S107 S108 S110 S112 S113 S201 S202 S301 S302 S303"
).split()


# Rules whose upstream docs lack a bad or good snippet.
OVERRIDES = {
    "F621": ("*a, b, c = range(1 << 24 + 1)", "a, b, c, *rest = values"),
    "ERA001": (None, "print(\"Hello, world!\")"),
    "F622": (None, "*foo, baz = (1, 2, 3)"),
    "S102": (None, "print('Hello World')"),
    "S202": (None, "import tarfile\nimport tempfile\n\ntar = tarfile.open(filename)\ntar.extractall(path=tempfile.mkdtemp(), filter=\"data\")\ntar.close()"),
}


def section(md, title):
    m = re.search(r"^## " + re.escape(title) + r"\n(.*?)(?=^## |\Z)", md, re.S | re.M)
    return m.group(1).strip() if m else ""


def fenced(text):
    return [b.rstrip("\n") for b in re.findall(r"```(?:python|py)?\n(.*?)```", text, re.S)]


def main():
    rules = {r["code"]: r for r in json.load(sys.stdin)}
    order = [(c, "training") for c in TRAINING]
    order += [(c, "in_domain") for c in IN_DOMAIN]
    order += [(c, "near_transfer") for c in NEAR]
    order += [(c, "far_transfer") for c in FAR]
    for code, category in order:
        r = rules[code]
        md = r["explanation"]
        example = section(md, "Example") or section(md, "Examples")
        blocks = fenced(example)
        bad, good = OVERRIDES.get(code, (None, None))
        bad = bad if bad is not None else (blocks[0] if blocks else "")
        good = good if good is not None else (blocks[1] if len(blocks) > 1 else "")
        record = {
            "code": code,
            "name": r["name"],
            "definition": section(md, "What it does"),
            "rationale": section(md, "Why is this bad?"),
            "bad_example": bad,
            "good_example": good,
            "source_linter": r["linter"],
            "category": category,
        }
        print(json.dumps(record, ensure_ascii=False))


if __name__ == "__main__":
    main()
