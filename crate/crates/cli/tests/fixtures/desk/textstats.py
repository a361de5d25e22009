"""Word and line statistics for report generation."""


def split_words(text):
    words = []
    current = []
    for ch in text:
        if ch.isalnum() or ch == "_":
            current.append(ch)
        elif current:
            words.append("".join(current))
            current = []
    if current:
        words.append("".join(current))
    return words


def word_frequencies(text):
    counts = {}
    for word in split_words(text.lower()):
        counts[word] = counts.get(word, 0) + 1
    return counts


def top_words(counts, limit):
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:limit]


def line_lengths(text):
    return [len(line) for line in text.splitlines()]


def longest_line(text):
    best = ""
    for line in text.splitlines():
        if len(line) > len(best):
            best = line
    return best


def average_length(lengths):
    if not lengths:
        return 0.0
    return sum(lengths) / float(len(lengths))


def histogram(lengths, bucket):
    buckets = {}
    for value in lengths:
        key = value // bucket * bucket
        buckets[key] = buckets.get(key, 0) + 1
    return dict(sorted(buckets.items()))
