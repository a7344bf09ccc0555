"""Training utilities."""

import json
import time


def log_event(name, payload, stream=None):
    """Telemetry logging hook: one JSON line per training event."""
    record = {"t": time.time(), "event": name}
    record.update(payload)
    line = json.dumps(record, sort_keys=True)
    if stream is not None:
        stream.write(line + "\n")
    return line
