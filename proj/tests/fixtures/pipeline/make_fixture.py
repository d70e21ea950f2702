#!/usr/bin/env python3
"""Regenerates the 20-sample synthetic pipeline fixture in this directory.

Outputs: manifest.jsonl, mock_llm.jsonl, frames.jsonl, words.jsonl,
responses.jsonl. Deterministic; rerunning rewrites identical files.
"""
import json
import os
import random

HERE = os.path.dirname(os.path.abspath(__file__))
SHIFT_MS = 20.0

# (id, language, source, operation, mock replies, answer override)
# The first valid reply decides the edit; a list with no valid reply makes
# the pipeline fall back to its rule-based edit.
SAMPLES = [
    ("s01", "en", "the cat sat on the mat", "none", [], None),
    ("s02", "en", "we walked home after the long meeting", "add",
     ["we walked slowly home after the long meeting"], None),
    ("s03", "en", "she bought fresh bread at the corner shop", "delete",
     ["she bought bread at the corner shop"], None),
    ("s04", "en", "the train leaves at seven every morning", "modify",
     ["the bus leaves at seven every morning"], None),
    ("s05", "en", "please close the window before you leave", "none", [], None),
    ("s06", "en", "my brother plays the piano very well", "add",
     ["my older brother plays the piano very well"], None),
    # first reply deletes the first word, second is fine
    ("s07", "en", "they finished the project two weeks early", "delete",
     ["finished the project two weeks early", "they finished the project early"], None),
    ("s08", "en", "the museum opens at nine on weekdays", "modify",
     ["the library opens at ten on weekdays", "the museum opens at noon on weekdays"], None),
    ("s09", "en", "he reads the newspaper every single day", "none", [], "Yes, single was added in the speech."),
    # never a valid reply: rule-based fallback
    ("s10", "en", "our team won the final match last night", "add",
     ["our team won the match", "our team won the final match last night",
      "the team won a final match last week", "our team won the final match last night",
      "our team lost the final game last night"], None),
    ("s11", "en", "the garden looks beautiful in the spring", "delete",
     ["the garden looks in the spring"], None),
    ("s12", "en", "i will call you when i arrive", "none", [], None),
    ("s13", "en", "the children played outside until dark", "modify",
     ["the children played inside until dark"], "The audio sounds fake."),
    ("s14", "en", "this road leads to the old castle", "add",
     ["this narrow road leads to the old castle"], None),
    ("s15", "en", "the doctor asked me to rest for a week", "delete",
     ["the doctor asked me to rest a week"], "Yes, for a was deleted in the speech."),
    ("s16", "en", "coffee tastes better with a little sugar", "none", [], None),
    ("s17", "zh", "今天天气很好", "add", ["今天天气非常很好"], None),
    ("s18", "en", "the meeting was moved to friday afternoon", "modify",
     ["the meeting was moved to monday afternoon"], None),
    ("s19", "en", "she sings in the choir every sunday", "none", [], None),
    ("s20", "en", "the storm knocked down several old trees", "delete",
     ["the storm knocked down old trees"], None),
]


# bona fide words the simulated detector wrongly flags
SPIKES = {"s16": 2}


def tokenize(text, lang):
    if lang == "zh":
        return [ch for ch in text if not ch.isspace()]
    return text.split()


def lcs_single_hunk(src, tgt):
    """Common prefix/suffix trim; the fixture only uses unambiguous edits."""
    p = 0
    while p < len(src) and p < len(tgt) and src[p] == tgt[p]:
        p += 1
    s = 0
    while s < len(src) - p and s < len(tgt) - p and src[-1 - s] == tgt[-1 - s]:
        s += 1
    return p, src[p:len(src) - s], tgt[p:len(tgt) - s]


def lcs(a, b):
    row = [0] * (len(b) + 1)
    for x in a:
        prev = 0
        for j, y in enumerate(b):
            cur = row[j + 1]
            row[j + 1] = prev + 1 if x == y else max(row[j + 1], row[j])
            prev = cur
    return row[-1]


def valid(op, src, tgt):
    if src == tgt:
        return None
    start, removed, inserted = lcs_single_hunk(src, tgt)
    # a longer common subsequence than prefix + suffix means several regions
    if lcs(src, tgt) != len(src) - len(removed):
        return None
    kind = "add" if not removed else "delete" if not inserted else "modify"
    if kind != op:
        return None
    if kind == "delete" and (start == 0 or start + len(removed) >= len(src)):
        return None
    if kind == "modify" and not (2 * len(inserted) >= len(removed) and len(inserted) <= 2 * len(removed)):
        return None
    return start, removed, inserted


def fallback(op, src):
    mid = len(src) // 2
    if op == "delete":
        return mid, [src[mid]], []
    if op == "add":
        return mid + 1, [], [src[mid]]
    return mid, [src[mid]], ["<unk>"]


def main():
    rng = random.Random(20240611)
    manifest, mock, frames, words, responses = [], [], [], [], []
    for sid, lang, source, op, replies, override in SAMPLES:
        manifest.append({"id": sid, "language": lang, "source_text": source, "operation": op})
        src = tokenize(source, lang)
        labels = [0] * len(src)
        edited = list(src)
        answer = "No evidence of speech editing was detected."
        if op != "none":
            mock.append({"id": sid, "replies": replies})
            plan = None
            for reply in replies:
                plan = valid(op, src, tokenize(reply, lang))
                if plan:
                    break
            if plan is None:
                plan = fallback(op, src)
            start, removed, inserted = plan
            edited = src[:start] + inserted + src[start + len(removed):]
            labels = [0] * len(edited)
            if op == "delete":
                for k in (start - 1, start):
                    labels[k] = 1
            else:
                for k in range(start, start + len(inserted)):
                    labels[k] = 1
            joiner = "" if lang == "zh" else " "
            reported = removed if op == "delete" else inserted
            kind = {"add": "added", "delete": "deleted", "modify": "modified"}[op]
            answer = "Yes, %s was %s in the speech." % (joiner.join(reported), kind)
        if override is not None:
            answer = override

        # frames: each word spans 3-6 frames, 0-2 silence frames in between
        probs, spans, t = [], [], 0
        for k, w in enumerate(edited):
            gap = rng.randint(0, 2)
            probs += [round(rng.uniform(0.0, 0.1), 3) for _ in range(gap)]
            t += gap
            n = rng.randint(3, 6)
            hi = labels[k] == 1 or SPIKES.get(sid) == k
            probs += [round(rng.uniform(0.55, 0.95) if hi else rng.uniform(0.02, 0.4), 3) for _ in range(n)]
            spans.append({"w": w, "start_s": round(t * SHIFT_MS / 1000, 3), "end_s": round((t + n) * SHIFT_MS / 1000, 3)})
            t += n
        frames.append({"id": sid, "frame_shift_ms": SHIFT_MS, "probs": probs})
        words.append({"id": sid, "words": spans})
        responses.append({"id": sid, "text": answer})

    for name, rows in [("manifest", manifest), ("mock_llm", mock), ("frames", frames),
                       ("words", words), ("responses", responses)]:
        with open(os.path.join(HERE, name + ".jsonl"), "w", encoding="utf-8", newline="\n") as f:
            for row in rows:
                f.write(json.dumps(row, ensure_ascii=False) + "\n")


if __name__ == "__main__":
    main()
