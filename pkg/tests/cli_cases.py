"""Small-parameter invocations of every CLI command (shared by CLI and acceptance tests)."""

import json
from pathlib import Path

DATA = Path(__file__).resolve().parent / "data"
ROOF = str(DATA / "roof_1_golden.json")


def write_inputs(tmp: Path) -> dict:
    potential = tmp / "potential.json"
    potential.write_text(json.dumps({"depth": 2, "values": {"00": 0.3, "01": -0.2, "10": 0.1, "11": 0.5}}))
    system = tmp / "system.json"
    system.write_text(json.dumps({"alphabet_size": 2, "transition": [[1, 1], [1, 1]], "lambda": 0.5}))
    return {"potential": str(potential), "system": str(system)}


def cases(tmp: Path) -> list[tuple[str, list[str]]]:
    """(name, argv) pairs; fit-decay reads the correlate output, so order matters."""
    files = write_inputs(tmp)
    corr = str(tmp / "correlate.csv")
    return [
        ("spectrum", ["spectrum", "--potential", files["potential"], "--system", files["system"]]),
        ("temporal-range", ["temporal-range", "--roof", ROOF, "--window", "6"]),
        ("make-roof", ["make-roof", "--alpha", "1", "--beta", "1.6180339887", "--depth", "6"]),
        ("diophantine", ["diophantine", "--theta", "0.6180339887498949", "--Q", "1000"]),
        ("diophantine-scan", ["diophantine", "--alpha", "1", "--beta", "1.618033988749895", "--points", "8"]),
        ("certify", ["certify", "--roof", ROOF, "--points", "4", "--window", "6", "--Q", "1000"]),
        ("contraction", ["contraction", "--roof", ROOF, "--points", "2", "--b-max", "100", "--depth", "6",
                         "--window", "6"]),
        ("cancel", ["cancel", "--roof", ROOF, "--b", "20", "--window", "6"]),
        ("correlate", ["correlate", "--roof", ROOF, "--samples", "40000", "--t-max", "10", "--t-points", "41",
                       "--out", corr]),
        ("correlate-det", ["correlate", "--roof", ROOF, "--method", "deterministic", "--t-max", "2",
                           "--t-points", "5"]),
        ("fit-decay", ["fit-decay", "--input", corr, "--t-min", "0.5"]),
        ("count-orbits", ["count-orbits", "--roof", ROOF, "--T", "8"]),
        ("pot", ["pot", "--roof", ROOF, "--T-grid", "6,8,10,12", "--window", "6"]),
    ]
