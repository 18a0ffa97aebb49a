#!/usr/bin/env python3
"""Regenerate tests/fixtures/jq_cases.json by running each case through libjq.

Requires the `jq` Python binding (pip install jq). Objects that get iterated
use sorted keys so that jq's insertion order matches the engine's order.
"""
import json
import pathlib
import sys

import jq

REPORT = {
    "data": [
        {
            "attributes": {
                "ip_traffic": [
                    {"destination_ip": "88.198.101.58", "destination_port": 443,
                     "transport_layer_protocol": "TCP"},
                    {"destination_ip": "10.0.0.1", "destination_port": 53,
                     "transport_layer_protocol": "UDP"},
                ],
                "files_dropped": [
                    {"path": "C:\\Users\\a\\AppData\\Local\\Temp\\qjfkhj.exe", "size": 4096},
                    {"path": "C:\\Windows\\notes.txt", "size": 12},
                ],
                "registry_keys_set": [
                    {"key": "HKCU\\Software\\Microsoft\\Windows\\CurrentVersion\\Run\\upd",
                     "value": "C:\\tmp\\upd.exe"},
                ],
                "command_executions": ["vssadmin delete shadows /all /quiet", "cmd /c dir"],
                "mutexes_created": ["Global\\zx81", "Local\\abc"],
            }
        },
        {"attributes": {"processes_tree": [{"name": "a.exe", "pid": 12}]}},
        {"note": 7},
    ]
}

MIXED = {"a": [1, "two", None, True, False, {"k": 1}, [1, 2], 3.5], "b": "Hello",
         "c": None, "d": {"x": 1, "y": [3, 4]}, "e": -2.5, "f": ""}

CASES = [
    # identity, literals
    ("def r: .;", {"a": 1}),
    ("def r: 42;", {}),
    ("def r: \"text\";", None),
    ("def r: null;", {}),
    ("def r: [true];", {}),
    ("def r: -3;", {}),
    # field access
    ("def r: .a;", {"a": {"b": 2}}),
    ("def r: .a.b;", {"a": {"b": 2}}),
    ("def r: .missing;", {"a": 1}),
    ("def r: .a.b;", {"a": None}),
    ("def r: .a.b;", {"a": 5}),
    ("def r: .a.b?;", {"a": 5}),
    ("def r: .\"weird key\";", {"weird key": [1]}),
    ("def r: .[\"a\"];", {"a": 3}),
    ("def r: .a?;", [1, 2]),
    ("def r: .a;", "str"),
    # indexing
    ("def r: .[0];", [5, 6, 7]),
    ("def r: .[-1];", [5, 6, 7]),
    ("def r: .[10];", [5, 6, 7]),
    ("def r: .[1.7];", [5, 6, 7]),
    ("def r: .a[1];", {"a": [5, 6]}),
    ("def r: .[0];", {"a": 1}),
    ("def r: .[0]?;", {"a": 1}),
    ("def r: .[.i];", {"i": "i"}),
    # iteration
    ("def r: [.[]];", [1, 2, 3]),
    ("def r: [.[]];", {"a": 1, "b": 2}),
    ("def r: [.a[]];", {"a": 5}),
    ("def r: [.a[]?];", {"a": 5}),
    ("def r: [.a[]?];", {}),
    ("def r: [.a[]];", {}),
    ("def r: [.data[]?.attributes?.ip_traffic[]?.destination_ip];", REPORT),
    ("def r: [.data[].attributes.processes_tree[]?.name];", REPORT),
    ("def r: [.[][]];", [[1, 2], [3]]),
    # pipe and collect
    ("def r: .a | .b;", {"a": {"b": [1]}}),
    ("def r: [.a[] | .k];", {"a": [{"k": 1}, {"k": 2}, {}]}),
    ("def r: [];", {}),
    ("def r: [[.a[]]];", {"a": []}),
    # select and comparisons
    ("def r: [.a[] | select(. > 1)];", {"a": [0, 1, 2, 3]}),
    ("def r: [.a[] | select(. != 2)];", {"a": [1, 2, 3]}),
    ("def r: [.a[] | select(. >= \"b\")];", {"a": ["a", "b", "c", 1]}),
    ("def r: [.a[] | select(. <= null)];", {"a": [None, False, 0]}),
    ("def r: [.a[] | select(. < true)];", {"a": [None, False, True, 1]}),
    ("def r: [.a[] == .b[]];", {"a": [1, 2], "b": [1, 3]}),
    ("def r: [.a == .b];", {"a": [1, {"x": 2}], "b": [1, {"x": 2}]}),
    ("def r: [.a < .b];", {"a": {"a": 2}, "b": {"b": 1}}),
    ("def r: [.a < .b];", {"a": [1, 2], "b": [1, 2, 0]}),
    ("def r: [1 == 1.0];", {}),
    ("def r: [.a[] | select(.)];", {"a": [0, None, False, "", [], True]}),
    ("def r: [.a[] | select(.x | .y)];", {"a": [{"x": {"y": 1}}, {"x": {}}]}),
    # boolean
    ("def r: [.a and .b];", {"a": 1, "b": None}),
    ("def r: [.a or .b];", {"a": False, "b": 0}),
    ("def r: [.a[] and .b[]];", {"a": [True, False], "b": [True, None]}),
    ("def r: [.a[] or .b[]];", {"a": [False, True], "b": [1, False]}),
    ("def r: [.a | not];", {"a": None}),
    ("def r: [.a[] | not];", {"a": [0, False]}),
    # alternative
    ("def r: .a // \"dflt\";", {}),
    ("def r: .a // \"dflt\";", {"a": False}),
    ("def r: .a // \"dflt\";", {"a": 0}),
    ("def r: [.a[] // 9];", {"a": [None, 1, False, 2]}),
    ("def r: [.a[] // 9];", {"a": [None, False]}),
    ("def r: (.a.b // 1);", {"a": 5}),
    ("def r: [.a.x // .b];", {"a": "s", "b": 3}),
    # object construction
    ("def r: {a: .x, b: 2};", {"x": 1}),
    ("def r: {\"k\": .x};", {"x": [1]}),
    ("def r: {x};", {"x": 1, "y": 2}),
    ("def r: {(.k): 1};", {"k": "dyn"}),
    ("def r: [{a: .x[], b: .y[]}];", {"x": [1, 2], "y": ["p", "q"]}),
    ("def r: {a: .x | length};", {"x": [1, 2, 3]}),
    # string builtins
    ("def r: [.a[] | select(test(\"[a-z]{5,10}\\\\.(exe|dll)\"))];", {"a": ["qjfkhj.exe", "x.pdf"]}),
    ("def r: [.a[] | test(\"^HKCU\"; \"i\")];", {"a": ["hkcu\\run", "HKLM"]}),
    ("def r: [.a[] | test(\"abc$\")];", {"a": ["xabc", "xabc\n", "abcx"]}),
    ("def r: [.a[] | test(\"a.c\")];", {"a": ["a\nc", "abc"]}),
    ("def r: [.a[] | test(\"a.c\"; \"p\")];", {"a": ["a\nc"]}),
    ("def r: [.a[] | test(\"x{,2}\")];", {"a": ["x{,2}", "xx"]}),
    ("def r: [.a[] | test(\"(?i)vssadmin\")];", {"a": ["VSSADMIN.exe", "vss"]}),
    ("def r: [.a[] | test(\"\\\\d+\\\\.\\\\d+\")];", {"a": ["v1.2", "v12"]}),
    ("def r: [.a[] | test(\"\\\\bshadows\\\\b\")];", {"a": ["delete shadows /all", "shadowsx"]}),
    ("def r: [.a[] | test(\"[[:upper:]]{3}\")];", {"a": ["abcDEF", "AbC"]}),
    ("def r: [.a[] | test(\"é\"; \"i\")];", {"a": ["CAFÉ"]}),
    ("def r: [.a[] | test(\"^(ab|cd)*$\")];", {"a": ["abcdab", "abc", ""]}),
    ("def r: [.a[] | test(\"[^a-z]\")];", {"a": ["abc", "ab1"]}),
    ("def r: .a | test(\"(\");", {"a": "x"}),
    ("def r: .a | test(\"x\");", {"a": 1}),
    ("def r: .a | test(\"x\"; \"q\");", {"a": "x"}),
    ("def r: [.a[] | contains(\"ell\")];", {"a": ["hello", "yellow", "x"]}),
    ("def r: [.a | contains({x: 1})];", {"a": {"x": 1, "y": 2}}),
    ("def r: [.a | contains([[2]])];", {"a": [1, [2, 3]]}),
    ("def r: [.a | contains([\"ab\"])];", {"a": ["xaby"]}),
    ("def r: .a | contains(1);", {"a": "x"}),
    ("def r: [.a | contains(false)];", {"a": True}),
    ("def r: [.a[] | startswith(\"C:\\\\\")];", {"a": ["C:\\x", "D:\\y"]}),
    ("def r: [.a[] | endswith(\".exe\")];", {"a": ["x.exe", "x.EXE"]}),
    ("def r: .a | startswith(\"x\");", {"a": 1}),
    ("def r: [.a | ascii_downcase];", {"a": "MiXéd"}),
    ("def r: .a | ascii_upcase;", {"a": "MiXéd"}),
    ("def r: .a | ascii_downcase;", {"a": 3}),
    ("def r: [.a[] | length];", {"a": ["héllo", [1, 2], {"k": 1}, None, -4, 2.5]}),
    ("def r: .a | length;", {"a": True}),
    ("def r: [.a[] | tostring];", {"a": [1, 1.0, 1.5, "s", None, True, [1, "x"], {"k": 2}]}),
    # type filters
    ("def r: [.a[] | strings];", MIXED),
    ("def r: [.a[] | numbers];", MIXED),
    ("def r: [.a[] | objects];", MIXED),
    ("def r: [.a[] | arrays];", MIXED),
    ("def r: [.a[] | type];", MIXED),
    ("def r: [.[] | type];", MIXED),
    # optional wrapping of arbitrary terms
    ("def r: [(.a | .b)?];", {"a": 1}),
    ("def r: [(.a[] | .b)?];", {"a": [{"b": 1}, 2, {"b": 3}]}),
    ("def r: [.a[] | (.b)?];", {"a": [{"b": 1}, 2, {"b": 3}]}),
    ("def r: [.a[]?.b?];", {"a": [{"b": 1}, 2, {"b": 3}]}),
    ("def r: [.a[].b];", {"a": [{"b": 1}, 2, {"b": 3}]}),
    # helpers
    ("def c2: .data[]?.attributes?.ip_traffic[]?; def r: [c2 | select(.destination_port == 53) | .destination_ip];", REPORT),
    ("def exe: select(endswith(\".exe\")); def r: [.data[]?.attributes?.files_dropped[]?.path | exe];", REPORT),
    # realistic rules
    ("""def rule_c2_known_ip:
  [.data[]?.attributes?.ip_traffic[]?
  | select(.destination_ip == "88.198.101.58")
  | {matched: true, ip: .destination_ip,
      port: .destination_port,
      protocol: .transport_layer_protocol}
  ];""", REPORT),
    ("def rule_run_key: [.data[]?.attributes?.registry_keys_set[]? | select(.key | test(\"currentversion\\\\\\\\run\"; \"i\")) | {matched: true, key: .key}];", REPORT),
    ("def rule_shadow: [.data[]?.attributes?.command_executions[]? | select(ascii_downcase | contains(\"delete shadows\"))];", REPORT),
    ("def rule_mutex: [.data[]?.attributes?.mutexes_created[]? | select(. == \"Global\\\\zx81\")];", REPORT),
    ("def rule_temp: [.data[]?.attributes?.files_dropped[]? | select((.path | test(\"\\\\\\\\Temp\\\\\\\\[a-z]+\\\\.exe$\"; \"i\")) and .size > 1000) | .path];", REPORT),
    ("def rule_none: [.data[]?.attributes?.dns_lookups[]? | select(.hostname | endswith(\".top\"))];", REPORT),
    ("def r: [.data[] | .attributes.ip_traffic[0].destination_port];", REPORT),
]

# Trailing call so that libjq has a main expression.
def entry_name(src):
    last = src.rstrip().rstrip(";")
    return last.split("def ")[-1].split(":")[0].strip()


def run(src, doc):
    prog = src + " " + entry_name(src)
    try:
        return {"values": jq.compile(prog).input_value(doc).all()}
    except ValueError as e:
        return {"error": str(e).splitlines()[0]}


def main():
    out = []
    for src, doc in CASES:
        case = {"filter": src, "input": doc}
        case.update(run(src, doc))
        out.append(case)
    dest = pathlib.Path(__file__).resolve().parent.parent / "fixtures" / "jq_cases.json"
    dest.write_text(json.dumps(out, indent=1, ensure_ascii=False, sort_keys=True) + "\n")
    print(f"wrote {len(out)} cases to {dest}", file=sys.stderr)


if __name__ == "__main__":
    main()
