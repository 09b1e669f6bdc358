#!/usr/bin/env python3
"""Start a gateway with two pending borderline reviews for live console tests.

Prints ``PORT <n>`` once ready, then blocks until stdin closes.
"""

from __future__ import annotations

import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[2] / "src"))

from ringside.cli import default_engine_config
from ringside.fusion import FusionConfig
from ringside.gateway import GatewayCore, serve
from ringside.replay import SimConfig, generate_synthetic
from ringside.wire import event_to_dict

MATCH = "LIVE_TEST_0001"


def main() -> None:
    core = GatewayCore(default_engine_config(), audit_dir=tempfile.mkdtemp())
    server = serve(core, port=0)
    core.open_match(MATCH)
    fusion = FusionConfig(0.5, 0.3, 0.2, 100.0, {"default": 65.0})
    events = generate_synthetic(
        SimConfig(seed=404), 60.0, fusion, borderline_fraction=1.0, count=2, match_id=MATCH
    )
    for event in events:
        core.ingest(MATCH, event_to_dict(event))
    print(f"PORT {server.port}", flush=True)
    try:
        sys.stdin.read()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()


if __name__ == "__main__":
    main()
