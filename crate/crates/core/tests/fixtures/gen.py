# Regenerates the .color files of the fixtures from their sources.
import hashlib, pathlib

def span(text, start_pat, end_pat=None, nth=0):
    i = -1
    for _ in range(nth + 1):
        i = text.index(start_pat, i + 1)
    if end_pat is None:
        return i, i + len(start_pat)
    j = text.index(end_pat, i) + len(end_pat)
    return i, j

def method(text, head):
    """Span of a method from its header to the matching closing brace."""
    i = text.index(head)
    j = text.index("{", i)
    depth = 0
    for k in range(j, len(text)):
        if text[k] == "{": depth += 1
        elif text[k] == "}":
            depth -= 1
            if depth == 0:
                return i, k + 1
    raise ValueError(head)

def write(root, rel, records, origin="manual"):
    src = (root / rel).read_text()
    h = hashlib.sha256(src.encode()).hexdigest()
    recs = sorted(records, key=lambda r: (r[0], r[1], r[2]))
    lines = [f'<annotations file="{rel}" hash="{h}">']
    for s, e, f in recs:
        lines.append(f'  <annotation feature="{f}" start="{s}" end="{e}" origin="{origin}"/>')
    lines.append("</annotations>")
    (root / rel).with_suffix(".color").write_text("\n".join(lines) + "\n")

here = pathlib.Path(__file__).parent
stack_src = (here / "stack/src/Stack.java").read_text()
t = stack_src
methods = {n: method(t, h) for n, h in [("push", "void push("), ("pop", "Object pop("), ("lock", "Lock lock("),
                                          ("unlock", "void unlock("), ("getLockVersion", "String getLockVersion(")]}
lock_class = method(t, "class Lock ")
pop_lock = span(t, "Lock l = lock();", nth=1)
pop_unlock = span(t, "unlock(l);", nth=1)
push_lock = span(t, "Lock l = lock();", nth=0)
push_unlock = span(t, "unlock(l);", nth=0)
lock_recs = [(*methods[m], "lock") for m in ("lock", "unlock", "getLockVersion")] + [(*lock_class, "lock")]

for name, extra in [("stack", [(*pop_lock, "lock"), (*pop_unlock, "lock")]),
                    ("stack-statements", [(*pop_lock, "lock"), (*pop_unlock, "lock"), (*push_lock, "lock"), (*push_unlock, "lock")]),
                    ("stack-methods", [])]:
    root = here / name
    (root / "src").mkdir(parents=True, exist_ok=True)
    if name != "stack":
        (root / "src/Stack.java").write_text(stack_src)
        for f in ("featuremodel.afm", "color.json"):
            (root / f).write_text((here / "stack" / f).read_text())
    write(root, "src/Stack.java", [(*methods["push"], "push"), (*methods["pop"], "pop")] + lock_recs + extra)

lang = here / "languages"
write(lang, "src/lang/Chinese.java", [(*method((lang / "src/lang/Chinese.java").read_text(), "class Chinese"), "f_CHN")])
write(lang, "src/lang/English.java", [(*method((lang / "src/lang/English.java").read_text(), "class English"), "f_GBR")])

off = here / "offline"
ot = (off / "src/Sync.java").read_text()
write(off, "src/Sync.java", [(*span(ot, "saveLocally(note);"), "offline"), (*span(ot, "upload(note);"), "online")])
