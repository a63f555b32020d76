import copy
import itertools

import numpy as np
import pytest
import yaml
from hypothesis import given, strategies as st

from castr import grid_astar, search
from castr import scenario as scn
from castr.errors import CastrError, NoPlanExists, ParseError, ValidationError

OPTIONAL = {"name", "params", "kinematics.symmetric"}


def paths(doc, prefix=""):
    """Every mapping key path in a document, lists indexed numerically."""
    if isinstance(doc, dict):
        for k, v in doc.items():
            p = f"{prefix}.{k}" if prefix else k
            yield p
            yield from paths(v, p)
    elif isinstance(doc, list):
        for i, v in enumerate(doc):
            if isinstance(v, (dict, list)):
                yield from paths(v, f"{prefix}.{i}")


def parent_of(doc, path):
    *head, last = path.split(".")
    node = doc
    for part in head:
        node = node[int(part)] if isinstance(node, list) else node[part]
    return node, last


def optional(path):
    return path in OPTIONAL or path.startswith("params.")


# -- file format ------------------------------------------------------------

@pytest.mark.parametrize("name", scn.BUILTIN)
def test_round_trip_canonical(name, tmp_path):
    sc = scn.generate(name, seed=3)
    text = scn.dumps(sc)
    again = scn.loads(text)
    assert scn.dumps(again) == text
    f = tmp_path / "s.yaml"
    scn.save(sc, f)
    assert scn.dumps(scn.load(f)) == text
    assert len(again.surfaces) == len(sc.surfaces)
    assert again.params == sc.params


def test_nonconvex_surface_rejected():
    doc = scn.to_document(scn.flat(0))
    doc["surfaces"][0]["vertices"] = [[0, 0, 0], [2, 0, 0], [1, 0.5, 0], [2, 2, 0], [0, 2, 0]]
    with pytest.raises(ValidationError) as info:
        scn.loads(yaml.safe_dump(doc))
    assert info.value.invariant == "surface-convex"


def test_every_key_deletion():
    base = scn.to_document(scn.local_minima())
    seen = 0
    for path in paths(base):
        doc = copy.deepcopy(base)
        node, last = parent_of(doc, path)
        if isinstance(node, list):
            continue
        del node[last]
        text = yaml.safe_dump(doc)
        if optional(path):
            scn.loads(text)
        else:
            with pytest.raises(ParseError):
                scn.loads(text)
        seen += 1
    assert seen > 40


def test_parse_error_names_field_and_line():
    text = scn.dumps(scn.flat(0)).replace("first_moving: left", "first_moving: middle")
    with pytest.raises(ParseError) as info:
        scn.loads(text)
    assert info.value.field == "start.first_moving"
    line = text.splitlines()[info.value.line - 1]
    assert "first_moving" in line


def test_invalid_yaml_reports_line():
    with pytest.raises(ParseError) as info:
        scn.loads("version: 1\nsurfaces: [\n  {id: 0\n")
    assert info.value.line is not None


leaf = st.one_of(st.none(), st.booleans(), st.integers(-3, 3), st.floats(allow_nan=True), st.text(max_size=4),
                 st.lists(st.integers(), max_size=3))


@given(st.data())
def test_corrupted_leaves_never_crash(data):
    doc = scn.to_document(scn.narrow_passage())
    keys = [p for p in paths(doc)]
    path = data.draw(st.sampled_from(keys))
    node, last = parent_of(doc, path)
    node[int(last) if isinstance(node, list) else last] = data.draw(leaf)
    try:
        scn.loads(yaml.safe_dump(doc))
    except CastrError:
        pass


@pytest.mark.parametrize("mutate, invariant", [
    (lambda d: d["surfaces"].append(dict(d["surfaces"][0])), "surface-ids-unique"),
    (lambda d: d["surfaces"].append({"id": 99, "vertices": d["surfaces"][0]["vertices"]}), "surfaces-disjoint"),
    (lambda d: d["start"]["left"].update(pos=[50.0, 0.0, 0.0]), "start-on-surface"),
    (lambda d: d["goal"].update(point=[40.0, 0.0, 0.0]), "goal-in-bounds"),
    (lambda d: d["kinematics"].update(left_to_right=d["kinematics"]["right_to_left"]), "kinematics-symmetric"),
    (lambda d: d["params"].update(heuristic_weight=0.5), "params-valid"),
])
def test_invariant_violations_named(mutate, invariant):
    doc = scn.to_document(scn.stairs(treads=3))
    mutate(doc)
    with pytest.raises(ValidationError) as info:
        scn.loads(yaml.safe_dump(doc))
    assert info.value.invariant == invariant
    assert invariant in str(info.value)


# -- generators -------------------------------------------------------------

def test_stairs_surface_count():
    assert len(scn.stairs(treads=8).surfaces) == 9


@pytest.mark.parametrize("name", scn.BUILTIN)
def test_generators_deterministic(name):
    assert scn.dumps(scn.generate(name, seed=7)) == scn.dumps(scn.generate(name, seed=7))


def test_seeds_vary_random_worlds():
    assert scn.dumps(scn.flat(0)) != scn.dumps(scn.flat(1))
    assert scn.dumps(scn.small_world(0)) != scn.dumps(scn.small_world(1))


def test_generated_scenarios_valid():
    for name, seed in itertools.product(scn.BUILTIN, range(5)):
        scn.validate(scn.generate(name, seed=seed))
    for seed in range(40):
        sc = scn.small_world(seed)
        assert len(sc.surfaces) <= 5


def test_unknown_generator():
    with pytest.raises(CastrError):
        scn.generate("maze")


def test_narrow_passage_needs_rotation():
    sc = scn.narrow_passage(rotation=False)
    with pytest.raises(NoPlanExists):
        search.plan(sc.surfaces, sc.kinematics, sc.start, sc.goal, sc.params)
    # the strip is narrower than the closest the feet may stand side by side
    strip = sc.surfaces[1]
    lo, hi = strip.bounds()
    assert hi[1] - lo[1] < sc.kinematics.right_to_left.vertices[:, 1].min()


def test_local_minima_grid_expands_more():
    sc = scn.local_minima()
    a = search.plan(sc.surfaces, sc.kinematics, sc.start, sc.goal, sc.params)
    b = grid_astar.plan_discrete(sc.surfaces, grid_astar.discretize(sc.kinematics), sc.start, sc.goal, sc.params)
    assert b.stats.expanded >= 2 * a.stats.expanded


# -- kinematics -------------------------------------------------------------

def test_default_kinematics_mirrored():
    k = scn.default_kinematics()
    assert scn.mirrored(k.right_to_left, k.left_to_right)
    assert 12 <= len(k.right_to_left.vertices) <= 16


def test_default_kinematics_no_crossing():
    k = scn.default_kinematics()
    assert k.right_to_left.vertices[:, 1].min() >= 0.15 - 1e-12
    assert k.left_to_right.vertices[:, 1].max() <= -0.15 + 1e-12
    v = k.right_to_left.vertices
    assert v[:, 0].min() == pytest.approx(-0.30) and v[:, 0].max() == pytest.approx(0.35)
    assert v[:, 2].min() == pytest.approx(-0.25) and v[:, 2].max() == pytest.approx(0.25)


def test_max_stride_scan():
    k = scn.default_kinematics()
    best = 0.0
    for v in itertools.chain(k.right_to_left.vertices, k.left_to_right.vertices):
        best = max(best, float(np.sqrt(v @ v)))
    assert k.max_stride == best
