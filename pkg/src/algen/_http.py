"""Shared HTTP plumbing: JSON POST with exponential-backoff retries."""

from __future__ import annotations

import time
from typing import Any

import requests

RETRYABLE_STATUSES = frozenset({429, 500, 502, 503, 504})


class TransportError(RuntimeError):
    """HTTP request failed after all retries; carries the last status if any."""

    def __init__(self, message: str, status: int | None = None, body: str | None = None):
        super().__init__(message)
        self.status = status
        self.body = body


def post_json(
    url: str,
    payload: Any,
    *,
    max_retries: int = 3,
    timeout: float = 30.0,
    backoff_base: float = 1.0,
    headers: dict[str, str] | None = None,
    retry_statuses: frozenset[int] = RETRYABLE_STATUSES,
) -> Any:
    """POST a JSON payload, retrying on 429/5xx/connection errors.

    Backoff is backoff_base * 2**attempt seconds. max_retries counts retries,
    so max_retries=2 means up to 3 attempts total. Non-retryable 4xx responses
    fail immediately.
    """
    attempts = max_retries + 1
    last: TransportError | None = None
    for attempt in range(attempts):
        try:
            resp = requests.post(url, json=payload, timeout=timeout, headers=headers)
        except requests.RequestException as exc:
            last = TransportError(f"POST {url} failed: {exc}")
        else:
            if resp.status_code < 300:
                try:
                    return resp.json()
                except ValueError:
                    raise TransportError(
                        f"POST {url} returned non-JSON body", status=resp.status_code, body=resp.text[:500]
                    ) from None
            last = TransportError(
                f"POST {url} returned {resp.status_code}", status=resp.status_code, body=resp.text[:500]
            )
            if resp.status_code not in retry_statuses:
                raise last
        if attempt + 1 < attempts:
            time.sleep(backoff_base * (2**attempt))
    assert last is not None
    raise last
