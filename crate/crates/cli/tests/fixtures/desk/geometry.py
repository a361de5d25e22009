"""Planar geometry helpers used by the layout engine."""

EPSILON = 1e-9


def dot(ax, ay, bx, by):
    return ax * bx + ay * by


def norm(x, y):
    return (x * x + y * y) ** 0.5


def normalize(x, y):
    length = norm(x, y)
    if length < EPSILON:
        return (0.0, 0.0)
    return (x / length, y / length)


def project(px, py, ax, ay, bx, by):
    abx = bx - ax
    aby = by - ay
    t = dot(px - ax, py - ay, abx, aby) / max(dot(abx, aby, abx, aby), EPSILON)
    t = min(max(t, 0.0), 1.0)
    return (ax + t * abx, ay + t * aby)


def segment_distance(px, py, ax, ay, bx, by):
    qx, qy = project(px, py, ax, ay, bx, by)
    return norm(px - qx, py - qy)


def bounding_box(points):
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    return (min(xs), min(ys), max(xs), max(ys))


def box_area(box):
    left, bottom, right, top = box
    width = max(right - left, 0.0)
    height = max(top - bottom, 0.0)
    return width * height


def boxes_overlap(first, second):
    return not (
        first[2] < second[0]
        or second[2] < first[0]
        or first[3] < second[1]
        or second[3] < first[1]
    )
