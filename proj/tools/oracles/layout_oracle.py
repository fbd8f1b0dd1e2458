#!/usr/bin/env python3
"""Independent token counts for the bundled layout corpus.

Reimplements node counting, the raw uiautomator-style dump, pruning and the
simplified-HTML serialization from their written rules, and prints one JSON
object per fixture plus the corpus summary. Test expectations are frozen from
this output.
"""
import json
import pathlib
import sys

FLAGS = ["clickable", "editable", "scrollable", "long_clickable", "checkable"]


def node_count(n):
    return 1 + sum(node_count(c) for c in n.get("children", []))


def esc(s):
    return (s.replace("&", "&amp;").replace('"', "&quot;").replace("<", "&lt;").replace(">", "&gt;")
            .replace("\n", "&#10;").replace("\r", "&#13;").replace("\t", "&#9;"))


def raw_tokens(n):
    # <node class=".." resource-id=".." text=".." content-desc=".." clickable=".." editable=".."
    #       scrollable=".." long-clickable=".." checkable=".."/>   (or > ... </node>)
    fields = [n.get("class", ""), n.get("id", ""), n.get("text", ""), n.get("desc", "")]
    total = 1 + 4 + 5  # "<node", four string attributes, five flags
    for f in fields:
        total += len(esc(f).split()) - (1 if esc(f).split() else 0)
    if n.get("children"):
        total += 1  # "</node>"
        total += sum(raw_tokens(c) for c in n["children"])
    return total


def interactive(n):
    return any(n.get(f, False) for f in FLAGS)


def retained(n):
    kids = [retained(c) for c in n.get("children", [])]
    keep = interactive(n) or any(n.get(k, "").strip() for k in ("text", "desc", "id")) or any(k[0] for k in kids)
    return (keep, kids)


def tag(n):
    if n.get("editable"):
        return "input"
    if n.get("scrollable"):
        return "scroll"
    if n.get("clickable") or n.get("long_clickable"):
        return "button"
    if n.get("checkable"):
        return "checkbox"
    return "text" if (n.get("text", "").strip() or n.get("desc", "").strip()) else "layout"


def elements(n, mark, out):
    keep, kids = mark
    children = []
    for c, m in zip(n.get("children", []), kids):
        children.extend(elements(c, m, out))
    if not keep:
        return children
    attrs = []
    for key, name in (("id", "id"), ("text", "text"), ("desc", "description")):
        v = n.get(key, "").strip()
        if v:
            attrs.append((name, v))
    if not attrs:
        attrs.append(("class", n["class"].strip().rsplit(".", 1)[-1]))
    el = {"tag": tag(n), "attrs": attrs, "children": children}
    return [el]


def assign(el, counter, flat, parent=-1):
    el["index"] = counter[0]
    el["parent"] = parent
    flat.append(el)
    counter[0] += 1
    for c in el["children"]:
        assign(c, counter, flat, el["index"])


def flatten(path):
    root = json.loads(path.read_text())
    els = elements(root, retained(root), [])
    flat = []
    if els:
        assign(els[0], [0], flat)
    return flat


def diff(a, b):
    fa, fb = flatten(a), flatten(b)
    out = []
    for i in range(max(len(fa), len(fb))):
        if i >= len(fa) or i >= len(fb):
            out.append(i)
            continue
        x, y = fa[i], fb[i]
        if (x["tag"], x["attrs"], x["parent"]) != (y["tag"], y["attrs"], y["parent"]):
            out.append(i)
    return out


def pruned_tokens(el):
    total = 2  # "<tag" and "index=N" (plus the closing marker glued to the last token)
    for _, v in el["attrs"]:
        total += len(esc(v).split())
    if el["children"]:
        total += 1  # "</tag>"
        total += sum(pruned_tokens(c) for c in el["children"])
    return total


def analyse(path):
    root = json.loads(path.read_text())
    src = raw_tokens(root)
    els = elements(root, retained(root), [])
    flat = []
    if els:
        assign(els[0], [0], flat)
    pruned = pruned_tokens(els[0]) if els else 0
    ids = {}
    for e in flat:
        for k, v in e["attrs"]:
            if k == "id":
                ids.setdefault(v, e["index"])
    return {
        "fixture": path.name,
        "nodes": node_count(root),
        "elements": len(flat),
        "source_tokens": src,
        "pruned_tokens": pruned,
        "reduction": 0.0 if src == 0 else 1 - pruned / src,
        "first_index_of_id": ids,
    }


def main():
    if len(sys.argv) == 4 and sys.argv[1] == "--diff":
        print(json.dumps(diff(pathlib.Path(sys.argv[2]), pathlib.Path(sys.argv[3]))))
        return
    folder = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else pathlib.Path(__file__).resolve().parents[2] / "data" / "layouts")
    rows = [analyse(p) for p in sorted(folder.glob("*.json"))]
    eligible = [r for r in rows if r["source_tokens"] >= 20]
    for r in rows:
        print(json.dumps(r, sort_keys=True))
    print(json.dumps({"corpus_fixtures": len(rows), "eligible": len(eligible),
                      "average_reduction": sum(r["reduction"] for r in eligible) / len(eligible)}))


if __name__ == "__main__":
    main()
