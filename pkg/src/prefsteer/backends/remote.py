"""HTTP client backend for a top-k next-token logprob service.

Wire contract:
    request  { "prompt": str, "top_logprobs": int, "seed": int? }
    response { "candidates": [ { "token_id": int, "token": str, "logprob": float } ] }

The server truncates to its top-k candidates; the returned support is
renormalized here so downstream code always sees a proper distribution.
Support alignment across the K+2 conditionals happens later, in
align_supports.
"""

from __future__ import annotations

import time
from typing import Callable

import requests

from ..distributions import LogDistribution, Vocab, normalize_log
from ..errors import BackendError, BackendUnavailable
from .base import BackendCapabilities, ConditioningContext, PolicyBackend

# Statuses worth retrying; other non-200s are treated as permanent.
RETRIABLE_STATUSES = frozenset({429, 500, 502, 503, 504})


class RemoteBackend(PolicyBackend):
    """Queries a remote logprob endpoint with retry and exponential backoff.

    The prompt sent upstream is the conditioning text when present (the
    caller renders preference or anchor templates into Conditioning.text),
    otherwise ``base_prompt_builder(query)``. The detokenized generated
    prefix is appended so the server continues the response in progress.
    """

    def __init__(
        self,
        endpoint: str,
        vocab: Vocab,
        top_k: int = 50,
        timeout: float = 10.0,
        max_attempts: int = 3,
        backoff: float = 0.5,
        auth_token: str | None = None,
        seed: int | None = None,
        base_prompt_builder: Callable[[str], str] | None = None,
        session: requests.Session | None = None,
    ):
        if top_k < 2:
            raise ValueError(f"top_k must be >= 2, got {top_k}")
        if max_attempts < 1:
            raise ValueError(f"max_attempts must be >= 1, got {max_attempts}")
        self.endpoint = endpoint
        self.vocab = vocab
        self.top_k = top_k
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff = backoff
        self.seed = seed
        self._base_prompt_builder = base_prompt_builder
        self._session = session if session is not None else requests.Session()
        self._headers = {"Content-Type": "application/json"}
        if auth_token:
            self._headers["Authorization"] = f"Bearer {auth_token}"
        self.capabilities = BackendCapabilities(
            full_vocab=False, max_candidates=top_k, supports_batch=False
        )

    def build_prompt(self, ctx: ConditioningContext) -> str:
        if ctx.conditioning is not None:
            head = ctx.conditioning.text
        elif self._base_prompt_builder is not None:
            head = self._base_prompt_builder(ctx.query)
        else:
            head = ctx.query
        if not ctx.prefix:
            return head
        return head + "\n" + self.vocab.detokenize(ctx.prefix, skip_eos=False)

    def _post(self, payload: dict) -> dict:
        last_status: int | None = None
        last_error = "no attempts made"
        for attempt in range(1, self.max_attempts + 1):
            try:
                resp = self._session.post(
                    self.endpoint, json=payload, headers=self._headers, timeout=self.timeout
                )
            except requests.RequestException as err:
                last_error = str(err)
            else:
                last_status = resp.status_code
                if resp.status_code == 200:
                    try:
                        return resp.json()
                    except ValueError as err:
                        raise BackendError(f"response is not valid JSON: {err}") from err
                last_error = f"HTTP {resp.status_code}"
                if resp.status_code not in RETRIABLE_STATUSES:
                    raise BackendUnavailable(
                        f"endpoint returned {last_error}",
                        attempts=attempt,
                        last_status=last_status,
                    )
            if attempt < self.max_attempts:
                time.sleep(self.backoff * (2 ** (attempt - 1)))
        raise BackendUnavailable(
            f"gave up after {self.max_attempts} attempts: {last_error}",
            attempts=self.max_attempts,
            last_status=last_status,
        )

    def _parse(self, body: dict) -> LogDistribution:
        candidates = body.get("candidates")
        if not isinstance(candidates, list) or not candidates:
            raise BackendError("response carries no candidates")
        pairs: dict[int, float] = {}
        for cand in candidates:
            try:
                tid = int(cand["token_id"])
                logp = float(cand["logprob"])
            except (KeyError, TypeError, ValueError) as err:
                raise BackendError(f"malformed candidate {cand!r}") from err
            if tid < 0 or tid >= len(self.vocab):
                raise BackendError(f"candidate token_id {tid} is outside the vocab")
            if tid in pairs:
                raise BackendError(f"duplicate candidate token_id {tid}")
            pairs[tid] = logp
        support = tuple(sorted(pairs))
        logp = [pairs[tid] for tid in support]
        return normalize_log(LogDistribution(support, logp))

    def next_token_logprobs(self, ctx: ConditioningContext) -> LogDistribution:
        payload: dict = {"prompt": self.build_prompt(ctx), "top_logprobs": self.top_k}
        if self.seed is not None:
            payload["seed"] = self.seed
        return self._parse(self._post(payload))
