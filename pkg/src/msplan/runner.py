"""Drive an OpenAI-compatible chat endpoint through PP, SOP and full MSP.

Ranked candidates come from sampling: ``num_samples`` completions are
parsed, identical structures are merged, and the unique structures are
ranked by how often they were sampled (first occurrence breaks ties).

The complete plan chains the two stages: the rank-1 precursor set from PP
(its types recomputed with the precursor-type rules) conditions an
explicit-mode SOP call, and every SOP candidate is paired with that set.
"""

from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
import json
import logging
import os
import re
import threading
import time

import httpx

from .corpus import CONTEXT_FIELDS, SynthesisContext
from .errors import (
    AllSamplesUnparseable,
    AuthError,
    EndpointError,
    EndpointTimeout,
    MalformedResponse,
    OutputParseError,
    PPFailed,
    RateLimited,
    ServerError,
)
from .formula import canonicalize
from .metrics import evaluate
from .promptkit import (
    default_templates,
    parse_pp_output,
    parse_sop_output,
    render_pp_prompt,
    render_sop_prompt,
)
from .taxonomy import PrecursorInfo, sorted_types

log = logging.getLogger(__name__)

API_KEY_ENV = "MSP_LLM_API_KEY"


@dataclass
class EndpointConfig:
    base_url: str
    model_id: str
    api_key: str = field(default="", repr=False)
    temperature: float = 0.7
    num_samples: int = 10
    max_concurrency: int = 4
    timeout: float = 60.0
    max_retries: int = 3
    backoff: float = 1.0

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.num_samples < 1 or self.max_concurrency < 1:
            raise ValueError("num_samples and max_concurrency must be >= 1")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    @classmethod
    def from_dict(cls, data, env=None):
        env = os.environ if env is None else env
        known = {f.name for f in fields(cls)}
        kwargs = {k: v for k, v in data.items() if k in known and k != "api_key"}
        # the key only ever comes from the environment
        kwargs["api_key"] = env.get(API_KEY_ENV, "")
        return cls(**kwargs)

    @classmethod
    def load(cls, path, env=None):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh), env)

    def snapshot(self):
        """Config as a dict with the API key redacted."""
        data = asdict(self)
        data["api_key"] = "<redacted>" if self.api_key else ""
        return data


class ChatClient:
    """Thread-safe chat client bounded by ``config.max_concurrency``."""

    def __init__(self, config, transport=None):
        self.config = config
        self._http = httpx.Client(timeout=config.timeout, transport=transport)
        self._slots = threading.BoundedSemaphore(config.max_concurrency)

    def close(self):
        self._http.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    @property
    def url(self):
        return self.config.base_url.rstrip("/") + "/v1/chat/completions"

    def _request(self, prompt, n, temperature):
        cfg = self.config
        body = {
            "model": cfg.model_id,
            "messages": [{"role": "user", "content": prompt}],
            "n": n,
            "temperature": temperature,
        }
        headers = {"Authorization": f"Bearer {cfg.api_key}"} if cfg.api_key else {}
        last = None
        for attempt in range(cfg.max_retries + 1):
            if attempt:
                delay = cfg.backoff * 2 ** (attempt - 1)
                log.info("retrying in %.2fs (attempt %d/%d): %s",
                         delay, attempt + 1, cfg.max_retries + 1, last)
                time.sleep(delay)
            try:
                with self._slots:
                    resp = self._http.post(self.url, json=body, headers=headers)
            except httpx.TimeoutException as exc:
                last = EndpointTimeout(f"request timed out after {cfg.timeout}s")
                last.__cause__ = exc
                continue
            except httpx.TransportError as exc:
                last = EndpointError(f"transport error: {exc}")
                continue
            status = resp.status_code
            if status in (401, 403):
                raise AuthError(f"endpoint rejected credentials (HTTP {status})")
            if status == 429:
                last = RateLimited("rate limited (HTTP 429)")
                continue
            if status >= 500:
                last = ServerError(f"server error (HTTP {status})")
                continue
            if status != 200:
                raise ServerError(f"unexpected HTTP {status}: {resp.text[:200]}")
            log.debug("chat completion succeeded after %d attempt(s)", attempt + 1)
            return _choices(resp)
        raise last

    def complete(self, prompt, n=None, temperature=None):
        """``n`` completions for a single-user-message chat, provider order."""
        n = self.config.num_samples if n is None else n
        if n < 1:
            raise ValueError("n must be >= 1")
        temperature = self.config.temperature if temperature is None else temperature
        out = []
        while len(out) < n:
            got = self._request(prompt, n - len(out), temperature)
            if not got:
                raise MalformedResponse("response contained no choices")
            out.extend(got)
        return out[:n]


def _choices(resp):
    try:
        payload = resp.json()
        return [str(c["message"]["content"] or "") for c in payload["choices"]]
    except (ValueError, KeyError, TypeError) as exc:
        raise MalformedResponse(f"not a chat completion: {resp.text[:200]!r}") from exc


def _client(config_or_client):
    if isinstance(config_or_client, ChatClient):
        return config_or_client, False
    return ChatClient(config_or_client), True


def chat_complete(config, prompt, n=1):
    client, owned = _client(config)
    try:
        return client.complete(prompt, n)
    finally:
        if owned:
            client.close()


# --- candidates -----------------------------------------------------------

@dataclass
class CandidateList:
    candidates: list = field(default_factory=list)  # ParsedModelOutput, best first
    counts: list = field(default_factory=list)
    completions: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    pcf_violations: int = 0

    def __len__(self):
        return len(self.candidates)

    @property
    def precursor_sets(self):
        return [list(c.precursors) for c in self.candidates]

    @property
    def operation_sequences(self):
        return [list(c.operations) for c in self.candidates]


def precursor_structure(parsed):
    return parsed.precursor_key()


def operation_structure(parsed):
    return parsed.operations


def generate_candidates(client, prompt, parser, k, key=None):
    """Sample, parse, merge identical structures, rank by sample frequency."""
    if k < 1:
        raise ValueError("k must be >= 1")
    client, owned = _client(client)
    try:
        completions = client.complete(prompt)
    finally:
        if owned:
            client.close()
    key = key or (operation_structure if parser is parse_sop_output else precursor_structure)

    result = CandidateList(completions=completions)
    counts = Counter()
    first = {}
    for i, text in enumerate(completions):
        try:
            parsed = parser(text)
        except OutputParseError as exc:
            result.diagnostics.append(f"sample {i}: {exc}")
            continue
        result.diagnostics.extend(f"sample {i}: {d}" for d in parsed.diagnostics)
        kk = key(parsed)
        counts[kk] += 1
        first.setdefault(kk, (i, parsed))
    if not counts:
        raise AllSamplesUnparseable(result.diagnostics, completions)
    ranked = sorted(counts, key=lambda kk: (-counts[kk], first[kk][0]))[:k]
    result.candidates = [first[kk][1] for kk in ranked]
    result.counts = [counts[kk] for kk in ranked]
    return result


def run_pp(client, record, k, templates=None):
    prompt = render_pp_prompt(record.target, record.context, templates or default_templates())
    return generate_candidates(client, prompt, parse_pp_output, k)


def _z_matches(parsed_z, z_in):
    if parsed_z is None:
        return False
    same_types = set(parsed_z.types) == set(z_in.types)
    same_precursors = {canonicalize(p) for p in parsed_z.precursors} == {
        canonicalize(p) for p in z_in.precursors
    }
    return same_types and same_precursors


def run_sop(client, record, z_in, mode, k, templates=None):
    """SOP candidates; explicit mode audits the restated Z against ``z_in``."""
    if mode == "target_only":
        z_in = None
    prompt = render_sop_prompt(record.target, record.context, z_in, mode,
                               templates or default_templates())
    result = generate_candidates(client, prompt, parse_sop_output, k)
    if mode == "explicit":
        for rank, cand in enumerate(result.candidates, 1):
            if not _z_matches(cand.z, z_in):
                result.pcf_violations += 1
                restated = (
                    f"types={sorted_types(cand.z.types)}, precursors={list(cand.z.precursors)}"
                    if cand.z else "nothing"
                )
                result.diagnostics.append(
                    f"PCF violation at rank {rank}: restated {restated}, expected "
                    f"types={sorted_types(z_in.types)}, precursors={list(z_in.precursors)}"
                )
    return result


@dataclass
class MSPResult:
    pairs: list  # (precursor list, operation list), best first
    pp: CandidateList
    sop: CandidateList
    conditioning: PrecursorInfo


def run_msp(pp_client, sop_client, record, k, pp_rank=1, templates=None):
    """PP then explicit SOP conditioned on the rank-``pp_rank`` precursor set."""
    try:
        pp = run_pp(pp_client, record, k, templates)
    except AllSamplesUnparseable as exc:
        raise PPFailed(exc.diagnostics) from exc
    if len(pp.candidates) < pp_rank:
        raise PPFailed(pp.diagnostics + [f"only {len(pp.candidates)} PP candidates, rank {pp_rank} requested"])
    chosen = pp.candidates[pp_rank - 1].precursors
    z = PrecursorInfo.from_precursors(chosen)
    sop = run_sop(sop_client, record, z, "explicit", k, templates)
    pairs = [(list(z.precursors), list(c.operations)) for c in sop.candidates]
    return MSPResult(pairs=pairs, pp=pp, sop=sop, conditioning=z)


# --- title contexts -------------------------------------------------------

_NULLISH = {"", "none", "null", "n/a", "na", "not mentioned", "unknown"}


def parse_context_json(text):
    """``(SynthesisContext, diagnostics)`` from a model's JSON answer."""
    diagnostics = []
    m = re.search(r"\{.*\}", text or "", re.DOTALL)
    data = None
    if m:
        try:
            data = json.loads(m.group())
        except ValueError:
            data = None
    if not isinstance(data, dict):
        diagnostics.append("MalformedContextJSON: completion is not a JSON object")
        return SynthesisContext(), diagnostics
    norm = {re.sub(r"[\s\-]+", "_", str(k).strip().lower()): v for k, v in data.items()}
    values = {}
    for name in CONTEXT_FIELDS:
        v = norm.get(name)
        if isinstance(v, list):
            v = ", ".join(str(x) for x in v if x is not None)
        if v is not None and not isinstance(v, str):
            v = str(v)
        if v is not None and v.strip().lower() in _NULLISH:
            v = None
        values[name] = v.strip() if v else None
    extra = set(norm) - set(CONTEXT_FIELDS)
    if extra:
        diagnostics.append(f"ignored keys: {sorted(extra)}")
    return SynthesisContext(**values), diagnostics


def extract_title_context(client, title, templates=None):
    """Ask the endpoint to fill the six title-context fields (null if absent)."""
    if not title or not title.strip():
        raise ValueError("title must be non-empty")
    prompt = (templates or default_templates()).render("context_extract", title=title.strip())
    client, owned = _client(client)
    try:
        completion = client.complete(prompt, n=1)[0]
    finally:
        if owned:
            client.close()
    return parse_context_json(completion)


# --- whole runs -----------------------------------------------------------

def _predict_one(task, record, k, mode, pp_client, sop_client, pp_rank, templates):
    entry = {"id": record.id, "status": "ok", "diagnostics": [], "completions": {}}
    candidates = []
    try:
        if task == "pp":
            res = run_pp(pp_client, record, k, templates)
            entry["completions"]["pp"] = res.completions
            entry["diagnostics"] = res.diagnostics
            entry["groups"] = [c.group for c in res.candidates]
            candidates = res.precursor_sets
        elif task == "sop":
            z = PrecursorInfo.from_precursors(record.precursors)
            res = run_sop(sop_client, record, z, mode, k, templates)
            entry["completions"]["sop"] = res.completions
            entry["diagnostics"] = res.diagnostics
            entry["pcf_violations"] = res.pcf_violations
            candidates = res.operation_sequences
        else:
            res = run_msp(pp_client, sop_client, record, k, pp_rank, templates)
            entry["completions"] = {"pp": res.pp.completions, "sop": res.sop.completions}
            entry["diagnostics"] = res.pp.diagnostics + res.sop.diagnostics
            entry["pcf_violations"] = res.sop.pcf_violations
            entry["groups"] = [c.group for c in res.pp.candidates]
            candidates = [tuple(p) for p in res.pairs]
    except PPFailed as exc:
        entry.update(status="PPFailed", diagnostics=exc.diagnostics)
    except AllSamplesUnparseable as exc:
        entry.update(status="AllSamplesUnparseable", diagnostics=exc.diagnostics,
                     completions={task: exc.completions})
    except AuthError:
        raise
    except EndpointError as exc:
        entry.update(status="EndpointError", diagnostics=[str(exc)])
    return candidates, entry


def run_task(task, records, pp_client=None, sop_client=None, k=10, mode="explicit",
             pp_rank=1, templates=None):
    """Predict every record; returns ``(predictions, manifest_entries)``.

    Output order follows ``records`` whatever order requests complete in.
    Failed records get an empty candidate list (a miss) and a status.
    """
    task = task.lower()
    if task not in ("pp", "sop", "msp"):
        raise ValueError(f"unknown task {task!r}")
    if task in ("pp", "msp") and pp_client is None:
        raise ValueError("PP endpoint required")
    if task in ("sop", "msp") and sop_client is None:
        raise ValueError("SOP endpoint required")
    workers = max(
        c.config.max_concurrency for c in (pp_client, sop_client) if isinstance(c, ChatClient)
    ) if any(isinstance(c, ChatClient) for c in (pp_client, sop_client)) else 1
    records = list(records)

    def one(rec):
        return _predict_one(task, rec, k, mode, pp_client, sop_client, pp_rank, templates)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(one, records))
    predictions = {rec.id: cands for rec, (cands, _) in zip(records, results)}
    manifest = [entry for _, entry in results]
    return predictions, manifest


def write_run(out_dir, task, records, predictions, manifest_entries, meta):
    """Write ``manifest.json``, ``predictions.jsonl``, ``report.csv`` and ``report.json``."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "predictions.jsonl"), "w", encoding="utf-8") as fh:
        for rec in records:
            cands = predictions.get(rec.id, [])
            if task == "msp":
                cands = [{"precursors": list(p), "operations": list(o)} for p, o in cands]
            fh.write(json.dumps({"id": rec.id, "candidates": cands}, ensure_ascii=False) + "\n")
    manifest = dict(meta, task=task, records=manifest_entries)
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, ensure_ascii=False)
        fh.write("\n")
    report = evaluate(predictions, records, task, metadata=meta)
    report.write(os.path.join(out_dir, "report.csv"), os.path.join(out_dir, "report.json"))
    return report
