"""Interval scheduling with priorities and cancellation."""


def overlaps(first, second):
    return first[0] < second[1] and second[0] < first[1]


def insert_sorted(agenda, task):
    index = 0
    while index < len(agenda) and agenda[index][0] <= task[0]:
        index += 1
    agenda.insert(index, task)
    return agenda


def earliest_gap(agenda, duration, horizon):
    cursor = 0
    for start, end, _ in agenda:
        if start - cursor >= duration:
            return cursor
        cursor = max(cursor, end)
    if horizon - cursor >= duration:
        return cursor
    return None


def schedule(agenda, duration, priority, horizon):
    slot = earliest_gap(agenda, duration, horizon)
    if slot is None:
        return None
    task = (slot, slot + duration, priority)
    insert_sorted(agenda, task)
    return task


def cancel_below(agenda, cutoff):
    kept = [task for task in agenda if task[2] >= cutoff]
    removed = len(agenda) - len(kept)
    agenda[:] = kept
    return removed


def busy_time(agenda):
    total = 0
    for start, end, _ in agenda:
        total += end - start
    return total


def utilization(agenda, horizon):
    if horizon <= 0:
        return 0.0
    return busy_time(agenda) / float(horizon)
