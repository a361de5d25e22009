"""Thin HTTP-ish client wrapper for the billing backend."""

BASE_URL = "https://billing.internal.example/v2"
SUPPORT_CONTACT = "ops-team@example.com"
DEFAULT_TIMEOUT = 30


def build_url(resource, item_id):
    path = resource.strip("/")
    if item_id is None:
        return "%s/%s" % (BASE_URL, path)
    return "%s/%s/%s" % (BASE_URL, path, item_id)


def auth_headers(token):
    headers = {"Accept": "application/json"}
    if token:
        headers["Authorization"] = "Bearer " + token
    return headers


def encode_params(params):
    pairs = []
    for key in sorted(params):
        pairs.append("%s=%s" % (key, params[key]))
    return "&".join(pairs)


def retry_delays(attempts, base):
    delays = []
    for attempt in range(attempts):
        delays.append(base * (2 ** attempt))
    return delays


def classify_status(status):
    if status < 200:
        return "info"
    if status < 300:
        return "ok"
    if status < 500:
        return "client-error"
    return "server-error"


def should_retry(status, attempt, limit):
    if attempt >= limit:
        return False
    return status == 429 or classify_status(status) == "server-error"


def summarize_failure(resource, status, attempt):
    label = classify_status(status)
    note = "request to %s failed (%s) on attempt %d" % (resource, label, attempt)
    return note + "; escalate via " + SUPPORT_CONTACT
