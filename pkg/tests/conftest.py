from __future__ import annotations

import glob
import os

import pytest

from mhub.frontend import Instantiator, build_class_tree, flatten
from mhub.syntax import lower, parse

FIXTURE_DIR = os.path.join(os.path.dirname(__file__), "fixtures", "modelica")

LISTING1_CSV = (b"subsystem,initial-mass,margin,budget-mass\n"
                b"Payload,18.2,7.8,26.0\n"
                b"Structure,16.1,6.9,23.0\n")

LISTING2_JSON = (b'[{"subsystem": "Payload", "initial-mass": 18.2, "margin": 7.8,'
                 b' "budget-mass": 26.0},'
                 b' {"subsystem": "Structure", "initial-mass": 16.1, "margin": 6.9,'
                 b' "budget-mass": 23.0}]')


def corpus_paths() -> list[str]:
    return sorted(glob.glob(os.path.join(FIXTURE_DIR, "*.mo")))


def load_units(*sources: str):
    units = []
    for i, src in enumerate(sources):
        uri = f"unit{i}.mo"
        tree, diags = parse(src, uri)
        assert not diags, f"fixture source does not parse: {diags}"
        stored, lower_diags = lower(tree, uri)
        assert not lower_diags, f"fixture source does not lower: {lower_diags}"
        units.append((stored, uri))
    return units


def compile_class(src: str, root: str):
    """parse -> class tree -> instantiate; returns (instantiator, instance tree)."""
    tree, diags = build_class_tree(load_units(src))
    assert not diags, diags
    inst = Instantiator(tree)
    itree = inst.instantiate(root)
    return inst, itree


def flatten_class(src: str, root: str):
    inst, itree = compile_class(src, root)
    assert not inst.diags, inst.diags
    flat, diags = flatten(itree)
    assert not diags, diags
    return flat


@pytest.fixture(scope="session")
def corpus() -> list[tuple[str, str]]:
    out = []
    for path in corpus_paths():
        with open(path, encoding="utf-8") as fh:
            out.append((os.path.basename(path), fh.read()))
    assert len(out) >= 40
    return out


@pytest.fixture(scope="module")
def broker():
    from mhub.mqtt import start_broker

    b = start_broker()
    yield b
    b.stop()
