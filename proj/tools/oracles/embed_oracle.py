#!/usr/bin/env python3
"""Independent bag-of-words hashing embedder and app ranking.

Usage: embed_oracle.py REGISTRY QUERY [QUERY...]
Prints, per query, the apps ordered by cosine similarity (desc, then id).
"""
import json
import math
import re
import sys

DIM = 1024


def fnv1a(s):
    h = 0xCBF29CE484222325
    for b in s.encode():
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def embed(text):
    v = [0.0] * DIM
    for w in re.findall(r"[A-Za-z0-9]+", text):
        v[fnv1a(w.lower()) % DIM] += 1.0
    return v


def cosine(a, b):
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(x * x for x in b))
    if na == 0 or nb == 0:
        return 0.0
    return sum(x * y for x, y in zip(a, b)) / (na * nb)


def main():
    registry = json.load(open(sys.argv[1]))
    for query in sys.argv[2:]:
        q = embed(query)
        scores = [(a["app_id"], cosine(q, embed(a["description"]))) for a in registry["apps"]]
        scores.sort(key=lambda p: (-p[1], p[0]))
        print(json.dumps({"query": query, "ranking": [[a, round(s, 12)] for a, s in scores]}))


if __name__ == "__main__":
    main()
