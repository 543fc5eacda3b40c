"""Fixtures: datasets are produced through the solver CLI, the external
interface this package consumes."""

import subprocess

import pytest


def generate(out_dir, task="mvc", size=12, count=20, seed=0, split="auto",
             with_optimal=True, extra=()):
    cmd = [
        "pdlab", "generate", "--task", task, "--size", str(size),
        "--count", str(count), "--seed", str(seed), "--out", str(out_dir),
        "--split", split, *extra,
    ]
    if with_optimal:
        cmd.append("--with-optimal")
    subprocess.run(cmd, check=True, capture_output=True, text=True)
    family = "ba" if task == "mvc" else "ba_bipartite"
    return out_dir / f"{task}_{family}_n{size}_{split}_s{seed}.jsonl"


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """50 labeled 12-node vertex-cover records with a train/val split."""
    out = tmp_path_factory.mktemp("data")
    generate(out, size=12, count=50, seed=3)
    return out


@pytest.fixture(scope="session")
def mhs_dataset(tmp_path_factory):
    """Uniform-rule hitting-set records (no labels)."""
    out = tmp_path_factory.mktemp("mhs")
    generate(out, task="mhs", size=12, count=20, seed=4, split="test", with_optimal=False)
    return out
