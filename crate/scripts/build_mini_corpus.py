#!/usr/bin/env python3
"""Convert the hand-annotated mini-corpus into DocumentRecord JSONL.

Usage: build_mini_corpus.py SOURCE.conllu OUT.jsonl
"""
import json
import sys


def parse_gold(raw):
    raw = raw.strip()
    if raw == "-":
        return {"is_sourced": False, "source_names": [], "channel": "NO_QUOTE"}
    names, channel = (part.strip() for part in raw.split("|"))
    return {
        "is_sourced": True,
        "source_names": [n.strip() for n in names.split(";")],
        "channel": channel,
    }


def finish_sentence(doc, sent):
    text = sent["text"]
    cursor = 0
    tokens = []
    for form, lemma, upos, head, deprel, tag in sent["rows"]:
        start = text.find(form, cursor)
        if start < 0:
            raise SystemExit(f"{doc['doc_id']}: token {form!r} not found in {text!r}")
        cursor = start + len(form)
        tokens.append({
            "form": form,
            "lemma": lemma,
            "upos": upos,
            "head": int(head) - 1 if int(head) > 0 else None,
            "deprel": deprel,
            "entity_tag": tag,
            "char_start": len(text[:start].encode()),
            "char_end": len(text[:cursor].encode()),
        })
    record = {"text": text, "tokens": tokens}
    if sent.get("gold") is not None:
        record["gold"] = parse_gold(sent["gold"])
    doc["sentences"].append(record)


def convert(lines):
    docs, doc, sent = [], None, None

    def flush():
        nonlocal sent
        if sent is not None:
            finish_sentence(doc, sent)
            sent = None

    for line in lines:
        line = line.rstrip("\n")
        if not line.strip():
            flush()
            continue
        if line.startswith("# newdoc id = "):
            flush()
            doc = {"doc_id": line.split("=", 1)[1].strip(), "version_id": 0, "sentences": []}
            docs.append(doc)
        elif line.startswith("# topic = "):
            doc["topic"] = line.split("=", 1)[1].strip()
        elif line.startswith("# text = "):
            flush()
            sent = {"text": line.split("= ", 1)[1], "rows": []}
        elif line.startswith("# gold = "):
            sent["gold"] = line.split("= ", 1)[1]
        elif line.startswith("#"):
            continue
        else:
            cols = line.split()
            if len(cols) != 7:
                raise SystemExit(f"bad token line: {line!r}")
            sent["rows"].append(cols[1:])
    flush()
    return docs


def main():
    src, out = sys.argv[1:3]
    with open(src, encoding="utf-8") as f:
        docs = convert(f)
    with open(out, "w", encoding="utf-8") as f:
        for d in docs:
            f.write(json.dumps(d, ensure_ascii=False) + "\n")
    print(f"{len(docs)} documents, {sum(len(d['sentences']) for d in docs)} sentences")


if __name__ == "__main__":
    main()
