"""Assembles the nightly digest from job results."""

SECTION_ORDER = ("summary", "failures", "slow", "notes")


def bucket_results(results):
    buckets = {"ok": [], "failed": [], "slow": []}
    for name, seconds, ok in results:
        if not ok:
            buckets["failed"].append((name, seconds))
        elif seconds > 60:
            buckets["slow"].append((name, seconds))
        else:
            buckets["ok"].append((name, seconds))
    return buckets


def format_entry(name, seconds):
    return "- %s (%.1fs)" % (name, seconds)


def summary_section(buckets):
    counts = [len(buckets["ok"]), len(buckets["failed"]), len(buckets["slow"])]
    return "ok=%d failed=%d slow=%d" % tuple(counts)


def failure_section(buckets):
    lines = []
    for name, seconds in sorted(buckets["failed"]):
        lines.append(format_entry(name, seconds))
    return "\n".join(lines) if lines else "none"


def slow_section(buckets):
    ranked = sorted(buckets["slow"], key=lambda pair: -pair[1])
    return "\n".join(format_entry(name, seconds) for name, seconds in ranked)


def digest(results, notes):
    buckets = bucket_results(results)
    sections = {
        "summary": summary_section(buckets),
        "failures": failure_section(buckets),
        "slow": slow_section(buckets),
        "notes": notes or "none",
    }
    parts = []
    for key in SECTION_ORDER:
        parts.append("[%s]\n%s" % (key, sections[key]))
    return "\n\n".join(parts)
