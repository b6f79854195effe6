"""
Running PP, SOP and the chained task against a chat endpoint
============================================================

A local mock server stands in for an OpenAI-compatible endpoint.  Its
responder answers with the known precursors and operations, so the whole
pipeline can be exercised offline.  Point ``EndpointConfig.base_url`` at a
real server (and export ``MSP_LLM_API_KEY``) to run a model instead.
"""

import re
import tempfile

from msplan.corpus import ingest_records
from msplan.mockserver import MockChatServer
from msplan.promptkit import render_pp_target, render_sop_target
from msplan.runner import EndpointConfig, run_msp, run_task, write_run
from msplan.taxonomy import PrecursorInfo, classify_material_group

from _paths import SAMPLE_CORPUS

records, _ = ingest_records(str(SAMPLE_CORPUS))
records = list({r.target: r for r in records}.values())[:8]
by_target = {r.target: r for r in records}


def oracle(prompt, n, body):
    """Answer with the recorded truth for the target named in the prompt."""
    target = re.search(r"^Target material: (\S+)", prompt, re.M).group(1)
    rec = by_target[target]
    group = classify_material_group(rec.target)
    if "predict the precursors" in prompt:
        return [render_pp_target(group, rec.precursors)] * n
    mode = "explicit" if "Precursor types" in prompt else "implicit"
    z = PrecursorInfo.from_precursors(rec.precursors)
    return [render_sop_target(group, z, rec.operations, mode)] * n


with MockChatServer(responder=oracle) as server:
    config = EndpointConfig(base_url=server.base_url, model_id="mock", num_samples=3)
    result = run_msp(config, config, records[0], k=3)
    print("first pair:", result.pairs[0], "PCF violations:", result.sop.pcf_violations)

    predictions, entries = run_task("msp", records, pp_client=config, sop_client=config, k=3)
    print("requests served:", server.request_count)

with tempfile.TemporaryDirectory() as tmp:
    report = write_run(tmp, "msp", records, predictions, entries, {"config": config.snapshot()})
    print({k: v for k, v in report.means().items() if v is not None})
