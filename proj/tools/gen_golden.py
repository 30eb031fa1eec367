#!/usr/bin/env python3
# Copyright 2026 The DynFed Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Writes the wire-format golden files and the mutated decoder corpus.

Written from the format description in protocol.md, without reference to the
C++ encoder, so the C++ tests can check their output against it.

    python3 tools/gen_golden.py tests/golden
"""

import base64
import json
import pathlib
import struct
import sys


def dfpv(segments, values):
    out = bytearray(b"DFPV")
    out += struct.pack(">II", 1, len(segments))
    offset = 0
    for name, length in segments:
        raw = name.encode("utf-8")
        out += struct.pack(">H", len(raw)) + raw + struct.pack(">QQ", offset, length)
        offset += length
    assert offset == len(values)
    for v in values:
        out += struct.pack(">d", v)
    return bytes(out)


def frame(payload):
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")
    return struct.pack(">I", len(text)) + text


def b64(data):
    return base64.b64encode(data).decode("ascii")


def bits(v):
    return struct.pack(">d", v).hex()


PARAMS = {
    "logistic": (
        [("layer0.weight", 4), ("layer0.bias", 2)],
        [0.5, -0.25, 1.0 / 3.0, -0.0, 5e-324, 1.7976931348623157e308],
    ),
    "mlp_padded": (
        [("layer0.weight", 6), ("layer0.bias", 3), ("layer1.weight", 6), ("layer1.bias", 2), ("padding", 4)],
        [i * 0.125 - 1.0 for i in range(21)],
    ),
    "utf8_name": ([("gewicht-ä", 3)], [1e-300, -2.5, 123456789.125]),
}


def frames(params):
    job = {
        "job_id": "job-7",
        "fusion_times": 30,
        "model_spec": {"kind": "logistic-regression", "input_dim": 2, "hidden_dims": [], "class_count": 2,
                       "padding": 0},
        "initial_model": b64(params["logistic"]),
        "hyperparameters": {"lr": 0.1, "batch_size": 32, "epochs": 90},
        "initial_waiting_time_ms": 9000,
        "mode": "DF_FL",
        "participation": "global-max",
        "dispatch": "all",
        "validation_ref": "memory:validation",
    }
    return {
        "register_client": {"type": "register_client", "job_id": "", "client_id": "client-1"},
        "register_client_utf8": {"type": "register_client", "job_id": "", "client_id": "klient-é"},
        "job_download_request": {"type": "job_download_request", "job_id": "", "client_id": "client-2"},
        "job_payload": {"type": "job_payload", "job_id": "job-7", "job": job},
        "training_time_report": {"type": "training_time_report", "job_id": "job-7", "client_id": "client-3",
                                 "round": 4, "training_time_ms": 4500},
        "max_acc_request": {"type": "max_acc_request", "job_id": "job-7", "client_id": "client-1", "round": 2},
        "max_acc_reply": {"type": "max_acc_reply", "job_id": "job-7", "round": 2, "max_acc": 0.8125},
        "upload_request": {"type": "upload_request", "job_id": "job-7", "client_id": "client-1", "round": 2,
                           "local_acc": 0.875},
        "upload_accept": {"type": "upload_accept", "job_id": "job-7", "round": 2},
        "upload_reject": {"type": "upload_reject", "job_id": "job-7", "round": 3, "reason": "round 3 is closed"},
        "model_upload": {"type": "model_upload", "job_id": "job-7", "client_id": "client-2", "round": 5,
                         "params": b64(params["logistic"]), "sample_count": 900, "local_acc": 0.9375,
                         "training_time_ms": 4500},
        "global_model_dispatch": {"type": "global_model_dispatch", "job_id": "job-7", "round": 6,
                                  "params": b64(params["mlp_padded"]), "max_acc": 0.96875},
        "job_complete": {"type": "job_complete", "job_id": "job-7", "round": 30},
    }


def corpus(params, frame_bytes):
    good = params["logistic"]
    # Byte positions in `good`: header 0..11, first entry name length at 12,
    # name 14..26, offset 27..34, length 35..42; second entry starts at 43.
    second_entry = 12 + 2 + len("layer0.weight") + 16
    second_offset = second_entry + 2 + len("layer0.bias")
    values_at = second_offset + 16
    cases = []

    def add(name, decoder, data, kind):
        cases.append((name, decoder, data, kind))

    add("magic_wrong_letter", "params", b"DFPX" + good[4:], "bad-magic")
    add("magic_lowercase", "params", b"dfpv" + good[4:], "bad-magic")
    add("version_two", "params", good[:4] + struct.pack(">I", 2) + good[8:], "unsupported-version")
    add("version_zero", "params", good[:4] + struct.pack(">I", 0) + good[8:], "unsupported-version")
    add("empty_file", "params", b"", "truncated")
    add("header_only_eight_bytes", "params", good[:8], "truncated")
    add("cut_inside_segment_name", "params", good[:20], "truncated")
    add("cut_inside_values", "params", good[:-3], "truncated")
    add("length_beyond_buffer", "params",
        good[:second_offset + 8] + struct.pack(">Q", 1 << 40) + good[second_offset + 16:], "truncated")
    add("offset_gap", "params", good[:second_offset] + struct.pack(">Q", 5) + good[second_offset + 8:], "bad-layout")
    add("segment_name_not_utf8", "params", good[:14] + b"\xff" + good[15:], "bad-layout")
    add("value_nan", "params", good[:values_at] + struct.pack(">d", float("nan")) + good[values_at + 8:],
        "non-finite")
    add("value_negative_infinity", "params",
        good[:values_at + 8] + struct.pack(">d", float("-inf")) + good[values_at + 16:], "non-finite")
    add("trailing_value", "params", good + struct.pack(">d", 1.0), "trailing-bytes")

    upload = frame_bytes["max_acc_request"]
    add("frame_short_prefix", "frame", upload[:2], "incomplete-frame")
    add("frame_cut_payload", "frame", upload[:-5], "incomplete-frame")
    add("frame_length_over_limit", "frame", struct.pack(">I", 0xFFFFFFFF) + upload[4:], "frame-too-large")
    add("frame_payload_not_json", "frame", frame_raw(b"{not json"), "malformed-payload")
    add("frame_unknown_type", "frame",
        frame({"type": "resign", "job_id": "job-7", "client_id": "client-1"}), "malformed-payload")
    add("frame_trailing_bytes", "frame", upload + b"\x00", "trailing-bytes")
    assert len(cases) == 20
    return cases


def frame_raw(payload):
    return struct.pack(">I", len(payload)) + payload


def main():
    root = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "tests/golden")
    (root / "params").mkdir(parents=True, exist_ok=True)
    (root / "frames").mkdir(parents=True, exist_ok=True)
    (root / "corrupt").mkdir(parents=True, exist_ok=True)

    params = {name: dfpv(segs, vals) for name, (segs, vals) in PARAMS.items()}
    manifest = {"params": [], "frames": [], "corrupt": []}
    for name, (segs, vals) in PARAMS.items():
        (root / "params" / f"{name}.dfpv").write_bytes(params[name])
        offset = 0
        layout = []
        for seg, length in segs:
            layout.append({"name": seg, "offset": offset, "length": length})
            offset += length
        manifest["params"].append({"file": f"params/{name}.dfpv", "segments": layout,
                                   "values_bits": [bits(v) for v in vals]})

    frame_bytes = {}
    for name, payload in frames(params).items():
        frame_bytes[name] = frame(payload)
        (root / "frames" / f"{name}.frame").write_bytes(frame_bytes[name])
        manifest["frames"].append({"file": f"frames/{name}.frame", "type": payload["type"]})

    for name, decoder, data, kind in corpus(params, frame_bytes):
        (root / "corrupt" / f"{name}.bin").write_bytes(data)
        manifest["corrupt"].append({"file": f"corrupt/{name}.bin", "decoder": decoder, "kind": kind})

    (root / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


if __name__ == "__main__":
    main()
