"""
Prompts, targets and fine-tuning export
=======================================

Render the precursor-prediction (PP) and operation-prediction (SOP) inputs
for one record, parse free-form model answers back into structures, and
export a fine-tuning file.
"""

import json
import tempfile
from pathlib import Path

from msplan.corpus import ingest_records
from msplan.promptkit import (
    export_finetune_jsonl,
    parse_pp_output,
    parse_sop_output,
    pp_pair,
    sop_pair,
)

from _paths import SAMPLE_CORPUS

records, _ = ingest_records(str(SAMPLE_CORPUS))
rec = records[0]

pair = pp_pair(rec)
print(pair.input_text, "\n---\n" + pair.target_text, "\n")

for mode in ("explicit", "implicit", "target_only"):
    pair = sop_pair(rec, mode=mode)
    print(f"[{mode}]\n{pair.input_text}\n---\n{pair.target_text}\n")

# Model answers rarely follow the format exactly; the parsers are lenient.
parsed = parse_pp_output("Sure!\nMaterial group: silicate\nPrecursors: ZnO, LiNO3 and SiO2.")
print(parsed.precursors, parsed.diagnostics)
parsed = parse_sop_output("1. Ground the powders together\n2. Calcined at 900 C\n3. Quenched in water")
print(parsed.operations)

with tempfile.TemporaryDirectory() as tmp:
    out = Path(tmp) / "sop_explicit.jsonl"
    n = export_finetune_jsonl(records, "sop", "explicit", str(out))
    print(f"exported {n} lines, first line has keys",
          sorted(json.loads(out.read_text().splitlines()[0])))
