#!/usr/bin/env python3
"""Regenerates data/studies/*.json.

Native kernel studies get |S|, |V| and the valid ratio by brute-force
enumeration with an evaluator written independently of the C++ parser.
Parity studies carry published benchmark properties as reported values.
"""

import itertools
import json
import math
import pathlib
import re
import sys

ROOT = pathlib.Path(__file__).resolve().parent.parent
OUT = ROOT / "data" / "studies"

FIDELITIES = [
    {"name": "iterations", "unit": "count", "min": 1, "max": 100, "default": 1},
    {"name": "repeats", "unit": "count", "min": 1, "max": 20, "default": 1},
    {"name": "wait_between_repeats", "unit": "ms", "min": 0, "max": 10000, "default": 0},
    {"name": "wait_after_evaluation", "unit": "ms", "min": 0, "max": 10000, "default": 0},
]

NATIVE_OBJECTIVES = [
    {"name": "runtime_seconds", "unit": "s", "direction": "minimize"},
    {"name": "memory_traffic_bytes", "unit": "B", "direction": "minimize"},
]

THREADS = {"name": "threads", "kind": "ordinal", "values": [1, 2, 4, 8]}
BOOL_UNROLL = {"name": "unroll", "kind": "categorical", "values": ["false", "true"]}
SCHEDULE_RULE = 'schedule == "static" || chunk != 0'

TRAFFIC = {
    "gemm": "8 * (passes * |X| + other operands), X = operand not indexed by the outermost loop, "
            "passes = ceil(dim_outer / r), r = outer tile when 8 * r * (sum of other dims) <= llc_bytes else 1",
    "stencil": "8 * (a * rows * cols + rows * cols), a = 1 when the three-row (or column) working set "
               "fits llc_bytes else 3 (i outer) or 8 (j outer)",
    "asum": "8 * n",
    "scal": "16 * n",
    "spmv": "12 * nnz + 8 * (rows + 1) + 8 * cols * threads + 8 * rows",
    "spmm": "CSR bytes (times j tiles when j is outermost) + B traffic (8 * inner * cols when resident, "
            "else 8 or 64 bytes per nonzero per column) + 8 * rows * cols",
    "sddmm": "CSR bytes + 8 * rows * inner + D traffic (8 * inner * cols when resident) + 8 * nnz",
    "kmeans": "per Lloyd iteration: 8 * points * dims + 8 * k * dims * threads + 8 * points",
}

NATIVE = {
    "gemm": {
        "parameters": [
            {"name": "tile_i", "kind": "ordinal", "values": [0, 4, 8, 16, 32, 64]},
            {"name": "tile_j", "kind": "ordinal", "values": [0, 4, 8, 16, 32, 64]},
            {"name": "tile_k", "kind": "ordinal", "values": [0, 4, 8, 16, 32, 64]},
            {"name": "loop_order", "kind": "permutation", "size": 3},
            THREADS,
            BOOL_UNROLL,
        ],
        "constraints": ["tile_i * tile_j <= 2048", "threads == 1 || at(loop_order, 0) != 2"],
        "presets": {"test": {"n": 72}, "small": {"n": 128}, "default": {"n": 256}, "large": {"n": 512}},
        "scratch": 512 * 1024,
    },
    "stencil": {
        "parameters": [
            {"name": "tile_i", "kind": "ordinal", "values": [0, 8, 16, 32, 64]},
            {"name": "tile_j", "kind": "ordinal", "values": [0, 8, 16, 32, 64]},
            {"name": "loop_order", "kind": "permutation", "size": 2},
            THREADS,
        ],
        "constraints": [
            "tile_i * tile_j <= 1024",
            "threads == 1 || (at(loop_order, 0) == 0 && tile_i != 0) || (at(loop_order, 0) == 1 && tile_j != 0)",
        ],
        "presets": {"test": {"rows": 150, "cols": 130}, "small": {"rows": 512, "cols": 512},
                    "default": {"rows": 2048, "cols": 2048}, "large": {"rows": 4096, "cols": 4096}},
        "scratch": 4096,
    },
    "asum": {
        "parameters": [
            THREADS,
            {"name": "chunk", "kind": "ordinal", "values": [0, 1024, 4096, 16384, 65536]},
            {"name": "schedule", "kind": "categorical", "values": ["static", "dynamic"]},
            {"name": "unroll", "kind": "ordinal", "values": [1, 2, 4, 8]},
        ],
        "constraints": [SCHEDULE_RULE, "threads * unroll <= 16"],
        "presets": {"test": {"n": 100003}, "small": {"n": 1048576}, "default": {"n": 4194304},
                    "large": {"n": 16777216}},
        "scratch": 0,
    },
    "scal": {
        "parameters": [
            THREADS,
            {"name": "chunk", "kind": "ordinal", "values": [0, 1024, 4096, 16384, 65536]},
            {"name": "schedule", "kind": "categorical", "values": ["static", "dynamic"]},
            {"name": "unroll", "kind": "ordinal", "values": [1, 2, 4, 8]},
        ],
        "constraints": [SCHEDULE_RULE, "threads * unroll <= 16"],
        "presets": {"test": {"n": 100003}, "small": {"n": 1048576}, "default": {"n": 4194304},
                    "large": {"n": 16777216}},
        "scratch": 0,
    },
    "spmv": {
        "parameters": [
            {"name": "chunk", "kind": "ordinal", "values": [0, 16, 64, 256, 1024]},
            {"name": "schedule", "kind": "categorical", "values": ["static", "dynamic", "guided"]},
            THREADS,
            {"name": "split", "kind": "permutation", "size": 2},
            BOOL_UNROLL,
        ],
        "constraints": [SCHEDULE_RULE, "at(split, 0) == 0 || chunk != 0"],
        "presets": {"test": {"rows": 2000, "cols": 1500, "density": 0.01},
                    "small": {"rows": 20000, "cols": 20000, "density": 0.002},
                    "default": {"rows": 100000, "cols": 100000, "density": 0.0005},
                    "large": {"rows": 400000, "cols": 400000, "density": 0.0001}},
        "scratch": 0,
    },
    "spmm": {
        "parameters": [
            THREADS,
            {"name": "chunk", "kind": "ordinal", "values": [0, 1, 4, 16, 64]},
            {"name": "schedule", "kind": "categorical", "values": ["static", "dynamic"]},
            {"name": "loop_order", "kind": "permutation", "size": 3},
            {"name": "tile_j", "kind": "ordinal", "values": [0, 8, 16, 32, 64]},
            BOOL_UNROLL,
        ],
        "constraints": [SCHEDULE_RULE, "precedes(loop_order, 0, 1)"],
        "presets": {"test": {"rows": 300, "inner": 280, "cols": 40, "density": 0.05},
                    "small": {"rows": 2000, "inner": 2000, "cols": 64, "density": 0.01},
                    "default": {"rows": 8000, "inner": 8000, "cols": 128, "density": 0.005},
                    "large": {"rows": 20000, "inner": 20000, "cols": 256, "density": 0.002}},
        "scratch": 0,
    },
    "sddmm": {
        "parameters": [
            THREADS,
            {"name": "chunk", "kind": "ordinal", "values": [0, 1, 4, 16, 64]},
            {"name": "schedule", "kind": "categorical", "values": ["static", "dynamic"]},
            {"name": "tile_k", "kind": "ordinal", "values": [0, 8, 16, 32, 64]},
            {"name": "loop_order", "kind": "permutation", "size": 2},
            BOOL_UNROLL,
        ],
        "constraints": [SCHEDULE_RULE, 'unroll == "false" || at(loop_order, 0) == 0'],
        "presets": {"test": {"rows": 200, "cols": 180, "inner": 37, "density": 0.05},
                    "small": {"rows": 2000, "cols": 2000, "inner": 64, "density": 0.01},
                    "default": {"rows": 8000, "cols": 8000, "inner": 128, "density": 0.005},
                    "large": {"rows": 20000, "cols": 20000, "inner": 256, "density": 0.002}},
        "scratch": 0,
    },
    "kmeans": {
        "parameters": [
            THREADS,
            {"name": "chunk", "kind": "ordinal", "values": [0, 16, 64, 256]},
            {"name": "schedule", "kind": "categorical", "values": ["static", "dynamic"]},
            {"name": "unroll", "kind": "ordinal", "values": [1, 2, 4]},
        ],
        "constraints": [SCHEDULE_RULE],
        "presets": {"test": {"points": 500, "dims": 8, "k": 6},
                    "small": {"points": 5000, "dims": 16, "k": 8},
                    "default": {"points": 50000, "dims": 16, "k": 16},
                    "large": {"points": 200000, "dims": 32, "k": 32}},
        "scratch": 0,
    },
}


# ---- independent constraint evaluator (Python translation) -------------------

def to_python(expr):
    out = expr.replace("&&", " and ").replace("||", " or ")
    out = re.sub(r"!(?!=)", " not ", out)
    out = re.sub(r"\bprecedes\(", "_precedes(", out)
    out = re.sub(r"\bat\(", "_at(", out)
    return out


def _at(perm, i):
    return perm[i] if 0 <= i < len(perm) else -1


def _precedes(perm, a, b):
    if a not in perm or b not in perm:
        return False
    return perm.index(a) < perm.index(b)


def domain(p):
    if p["kind"] == "permutation":
        return [tuple(x) for x in itertools.permutations(range(p["size"]))]
    return list(p["values"])


def count_valid(params, constraints):
    compiled = [compile(to_python(c), c, "eval") for c in constraints]
    names = [p["name"] for p in params]
    total = valid = 0
    for values in itertools.product(*(domain(p) for p in params)):
        total += 1
        env = dict(zip(names, values))
        env.update({"_at": _at, "_precedes": _precedes, "true": True, "false": False})
        if all(eval(c, {}, env) for c in compiled):
            valid += 1
    return total, valid


def cardinality(params):
    total = 1
    for p in params:
        total *= math.factorial(p["size"]) if p["kind"] == "permutation" else len(p["values"])
    return total


def native_study(kernel, layout):
    total, valid = count_valid(layout["parameters"], layout["constraints"])
    assert total == cardinality(layout["parameters"])
    return {
        "schema_version": 1,
        "study_id": f"{kernel}-cpu",
        "search_space": {"parameters": layout["parameters"], "known_constraints": layout["constraints"]},
        "objectives": NATIVE_OBJECTIVES,
        "fidelities": FIDELITIES,
        "backend": "kernel",
        "metadata": {
            "M": len(NATIVE_OBJECTIVES), "D": len(layout["parameters"]), "F": len(FIDELITIES),
            "cardinality": str(total), "valid_count": valid, "valid_ratio": valid / total,
            "hardware": "local-cpu", "valid_source": "computed",
        },
        "kernel": {
            "id": kernel,
            "size_presets": layout["presets"],
            "preset": "default",
            "operand_seed": 20240601,
            "scratch_budget_bytes": layout["scratch"],
            "llc_bytes": 8 * 1024 * 1024,
            "available_cores": 4,
            "oversubscription_factor": 1.0,
            "traffic_model": TRAFFIC[kernel],
        },
    }


# ---- parity studies ------------------------------------------------------------

def ordinal(name, values):
    return {"name": name, "kind": "ordinal", "values": values}


POW2 = [1 << e for e in range(17)]
RISE_OBJECTIVES = [
    {"name": "runtime_seconds", "unit": "s", "direction": "minimize"},
    {"name": "cpu_energy_joules", "unit": "J", "direction": "minimize"},
    {"name": "gpu_energy_joules", "unit": "J", "direction": "minimize"},
]
TACO_OBJECTIVES = [
    {"name": "runtime_seconds", "unit": "s", "direction": "minimize"},
    {"name": "cpu_energy_joules", "unit": "J", "direction": "minimize"},
]
TACO_FIDELITIES = FIDELITIES[:2]
TACO_COMMON = [
    ordinal("omp_num_threads", [1, 2, 4, 8, 16, 32]),
    ordinal("omp_chunk_size", [1, 2, 4, 8, 16, 32, 64, 128, 256]),
    {"name": "omp_scheduling_type", "kind": "categorical", "values": ["static", "dynamic", "guided"]},
    {"name": "omp_monotonic", "kind": "categorical", "values": ["false", "true"]},
]

PARITY = {
    "rise-gemm": ("RISE GEMM", "O", 10, 4, 156e6, 0.0134, "GPU", RISE_OBJECTIVES, FIDELITIES,
                  [ordinal(n, POW2[:10]) for n in ("ls0", "ls1", "gs0", "gs1", "tile_m", "tile_n",
                                                   "tile_k", "vec_width", "split_k", "unroll")],
                  ["gs0 % ls0 == 0", "gs1 % ls1 == 0", "ls0 * ls1 <= 1024", "tile_m * tile_n <= 1024"]),
    "rise-asum": ("RISE Asum", "O", 5, 4, 61.7e3, 0.048, "GPU", RISE_OBJECTIVES, FIDELITIES,
                  [ordinal(n, POW2) for n in ("ls0", "gs0", "split", "vec_width", "reduce_width")],
                  ["gs0 % ls0 == 0", "split <= gs0"]),
    "rise-kmeans": ("RISE Kmeans", "O", 4, 4, 3.62e3, 0.247, "GPU", RISE_OBJECTIVES, FIDELITIES,
                    [ordinal(n, POW2[:11]) for n in ("ls0", "ls1", "gs0", "gs1")],
                    ["gs0 % ls0 == 0", "gs1 % ls1 == 0"]),
    "rise-scal": ("RISE Scal", "O", 7, 4, 4.24e6, 0.107, "GPU", RISE_OBJECTIVES, FIDELITIES,
                  [ordinal(n, POW2[:12]) for n in ("ls0", "ls1", "gs0", "gs1", "split", "vec_width", "unroll")],
                  ["gs0 % ls0 == 0", "gs1 % ls1 == 0"]),
    "rise-stencil": ("RISE Stencil", "O", 4, 4, 3.64e3, 0.249, "GPU", RISE_OBJECTIVES, FIDELITIES,
                     [ordinal(n, POW2[:11]) for n in ("tuned_ls0", "tuned_ls1", "tuned_gs0", "tuned_gs1")],
                     ["tuned_gs0 % tuned_ls0 == 0", "tuned_gs1 % tuned_ls1 == 0"]),
    "taco-spmm": ("TACO SpMM", "OCP", 8, 2, 310e3, 0.054, "CPU", TACO_OBJECTIVES, TACO_FIDELITIES,
                  TACO_COMMON + [ordinal("chunk_size", [2, 4, 8, 16, 32, 64, 128, 256]),
                                 ordinal("unroll_factor", [1, 2, 4, 8]),
                                 {"name": "loop_order", "kind": "permutation", "size": 5},
                                 ordinal("vectorize", [0, 1])],
                  ["precedes(loop_order, 0, 1)", "omp_chunk_size <= chunk_size"]),
    "taco-spmv": ("TACO SpMV", "OCP", 9, 2, 14.2e6, 0.1069, "CPU", TACO_OBJECTIVES, TACO_FIDELITIES,
                  TACO_COMMON + [ordinal("chunk_size", [2, 4, 8, 16, 32, 64, 128, 256]),
                                 ordinal("chunk_size2", [2, 4, 8, 16, 32, 64, 128, 256]),
                                 ordinal("chunk_size3", [2, 4, 8, 16, 32, 64, 128, 256]),
                                 {"name": "loop_order", "kind": "permutation", "size": 7},
                                 ordinal("vectorize", [0, 1])],
                  ["precedes(loop_order, 0, 2)", "chunk_size2 <= chunk_size"]),
    "taco-sddmm": ("TACO SDDMM", "OCP", 8, 2, 576e6, 0.0371, "CPU", TACO_OBJECTIVES, TACO_FIDELITIES,
                   TACO_COMMON + [ordinal("chunk_size", POW2[1:17]),
                                  ordinal("unroll_factor", [1, 2, 4, 8]),
                                  {"name": "loop_order", "kind": "permutation", "size": 8},
                                  ordinal("vectorize", [0, 1])],
                   ["precedes(loop_order, 0, 1)", "precedes(loop_order, 2, 3)"]),
    "taco-ttv": ("TACO TTV", "OCP", 9, 2, 17.8e6, 0.212, "CPU", TACO_OBJECTIVES, TACO_FIDELITIES,
                 TACO_COMMON + [ordinal("chunk_size", [2, 4, 8, 16, 32, 64, 128, 256]),
                                ordinal("chunk_size2", [2, 4, 8, 16, 32, 64, 128, 256]),
                                ordinal("chunk_size3", [2, 4, 8, 16, 32, 64, 128, 256]),
                                {"name": "loop_order", "kind": "permutation", "size": 5},
                                ordinal("vectorize", [0, 1])],
                 ["precedes(loop_order, 0, 1)"]),
    "taco-mttkrp": ("TACO MTTKRP", "OCP", 8, 2, 5.87e6, 0.197, "CPU", TACO_OBJECTIVES, TACO_FIDELITIES,
                    TACO_COMMON + [ordinal("chunk_size", [2, 4, 8, 16, 32, 64, 128, 256]),
                                   ordinal("unroll_factor", [1, 2, 4, 8]),
                                   {"name": "loop_order", "kind": "permutation", "size": 6},
                                   ordinal("vectorize", [0, 1])],
                    ["precedes(loop_order, 0, 1)"]),
}


def parity_study(study_id, entry):
    (title, types, d, f, valid, ratio, hardware, objectives, fidelities, params, constraints) = entry
    assert len(params) == d and len(fidelities) == f
    return {
        "schema_version": 1,
        "study_id": study_id,
        "title": title,
        "parameter_types": types,
        "search_space": {"parameters": params, "known_constraints": constraints},
        "objectives": objectives,
        "fidelities": fidelities,
        "backend": "surrogate",
        "metadata": {
            "M": len(objectives), "D": d, "F": f,
            "cardinality": str(cardinality(params)),
            "valid_count": valid, "valid_ratio": ratio,
            "hardware": hardware, "valid_source": "reported",
        },
    }


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for kernel, layout in NATIVE.items():
        doc = native_study(kernel, layout)
        (OUT / f"{doc['study_id']}.json").write_text(json.dumps(doc, indent=2) + "\n")
    for study_id, entry in PARITY.items():
        doc = parity_study(study_id, entry)
        (OUT / f"{study_id}.json").write_text(json.dumps(doc, indent=2) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
