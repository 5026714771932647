import random

import pytest
from hypothesis import given, strategies as st

from compatlab.hiergen import shifted_zeta_window, zeta_window
from compatlab.percgrid import (
    MalformedPath,
    PercWindow,
    PermittedPath,
    c1_bound,
    check_buraco,
    check_c1_bounds,
    check_path,
    check_shift_invariance,
    check_st_bounds,
    extract_witness,
    find_permitted_path,
    is_heavy,
    is_open,
    is_permitted_vertex_path,
    reach_at,
    reach_from,
    reach_rows,
)
from compatlab.runword import WeightedWord, decode, translate_witness, ww_replay_agrees
from compatlab.seqcore import DELETE_ZERO, SECOND, InvalidOperand, prefix_compatible_oracle, replay_agrees
from oracles import permitted_reach, random_spaced_word, spaced_ref

from test_runword import _fix


def word(max_len=9, max_weight=3, min_len=0):
    return st.lists(st.integers(0, max_weight), min_size=min_len, max_size=max_len).map(_fix).map(WeightedWord)


def test_openness_examples():
    pw = PercWindow(WeightedWord((0, 1, 0, 0, 2)), WeightedWord((0, 2, 0)))
    assert is_open(pw, (0, 0))
    assert not is_open(pw, (0, 1)) and not is_open(pw, (1, 0))
    assert is_open(pw, (5, 1)) and is_open(pw, (1, 1))
    assert is_open(pw, (5, 2)) and not is_open(pw, (2, 2))
    assert is_heavy(pw, (3, 2)) and is_heavy(pw, (0, 0)) and not is_heavy(pw, (3, 1))
    with pytest.raises(InvalidOperand):
        is_open(pw, (6, 1))


@given(word(10, 3, 1), word(10, 3, 1))
def test_reach_matches_state_search(zeta, psi):
    pw = PercWindow(zeta, psi)
    ref = permitted_reach(zeta.weights, psi.weights)
    for y in range(len(psi) + 1):
        rs = reach_at(pw, y)
        got = {x for a, b in rs.intervals for x in range(a, b + 1)}
        assert got == ref[y], y
        assert rs.size <= y + 1 and (rs.empty or rs.right <= pw.width)


@given(word(10, 3, 1), word(10, 3, 1))
def test_path_exists_iff_top_reachable(zeta, psi):
    pw = PercWindow(zeta, psi)
    path = find_permitted_path(pw)
    top = permitted_reach(zeta.weights, psi.weights)[-1]
    assert (path is not None) == bool(top)
    if path is None:
        return
    check_path(pw, path)
    verts = list(path.vertices())
    assert is_permitted_vertex_path(pw, verts)
    assert path.end == (min(top), len(psi))  # leftmost end column
    xs = [x for x, _ in path.heavy_vertices()]
    assert xs == sorted(set(xs))
    assert PermittedPath.from_json(path.to_json()) == path


@given(word(9, 3, 1), word(9, 3, 1))
def test_witness_replays_and_oracle_agrees(zeta, psi):
    pw = PercWindow(zeta, psi)
    path = find_permitted_path(pw)
    if path is None:
        return
    s = extract_witness(path, pw)
    assert ww_replay_agrees(zeta, psi, s)
    b = translate_witness(s, zeta, psi)
    eta, xi = decode(zeta), decode(psi)
    assert replay_agrees(eta, xi, b)
    t = min(b.target_length, len(eta), len(xi))
    assert prefix_compatible_oracle(eta, xi, t) is not None


@given(word(12, 3, 1), word(8, 3, 1))
def test_wider_zeta_does_not_change_top_row(zeta, psi):
    """Columns beyond the height are never reached, so only ``zeta[:len(psi)]`` matters."""
    n = len(psi)
    full = PercWindow(zeta, psi)
    cut = PercWindow(zeta.prefix(n), psi)
    assert reach_at(full, n) == reach_at(cut, n)
    assert find_permitted_path(full) == find_permitted_path(cut)


def test_zero_psi_has_trivial_path():
    pw = PercWindow(zeta_window(2, 20), WeightedWord((0,) * 20))
    path = find_permitted_path(pw)
    assert path is not None and path.end[1] == 20
    assert extract_witness(path, pw).steps == ()


def test_first_row_too_heavy():
    pw = PercWindow(zeta_window(2, 8), WeightedWord((9, 0, 0)))
    assert reach_at(pw, 1).empty
    assert find_permitted_path(pw) is None


def test_single_heavy_vertex_schedule():
    # zeta[1] = 0 matches the heavy row weight, so only zero deletions appear
    zeta = WeightedWord((1, 0, 0, 0))
    psi = WeightedWord((0, 0, 1, 0))
    pw = PercWindow(zeta, psi)
    path = PermittedPath(((0, 0), (1, 3), (1, 4)), (True, True, False))
    check_path(pw, path)
    s = extract_witness(path, pw)
    assert [(st.side, st.op, st.index, st.count) for st in s.steps] == [(SECOND, DELETE_ZERO, 1, 2)]
    assert s.target_length == 1 and ww_replay_agrees(zeta, psi, s)


def test_malformed_paths():
    pw = PercWindow(zeta_window(2, 6), WeightedWord((0, 1, 0, 0, 1, 0)))
    good = find_permitted_path(pw)
    check_path(pw, good)
    with pytest.raises(MalformedPath):
        check_path(pw, PermittedPath(((1, 0),), (True,)))
    with pytest.raises(MalformedPath):  # heavy row 5 missing
        check_path(pw, PermittedPath(((0, 0), (2, 2), (3, 6)), (True, True, False)))
    with pytest.raises(MalformedPath):  # column 1 is closed on a weight-1 row
        check_path(pw, PermittedPath(((0, 0), (1, 2), (4, 5)), (True, True, True)))
    with pytest.raises(MalformedPath):
        extract_witness(PermittedPath(((0, 0), (3, 2)), (True, True)), pw)


def test_vertex_checker_rejects_bad_moves():
    pw = PercWindow(zeta_window(2, 4), WeightedWord((0, 0, 0)))
    assert is_permitted_vertex_path(pw, [(0, 0), (1, 1), (1, 2)])
    assert not is_permitted_vertex_path(pw, [(0, 0), (0, 1)])
    assert not is_permitted_vertex_path(pw, [(0, 0), (1, 1), (3, 2)])


def test_splice_at_heavy_vertex():
    """Two permitted pieces joined at a heavy vertex form a permitted path."""
    rng = random.Random(3)
    for _ in range(200):
        n = rng.randint(20, 200)
        psi = WeightedWord(random_spaced_word(rng, n, 3, 2))
        pw = PercWindow(zeta_window(2, n), psi)
        path = find_permitted_path(pw)
        if path is None:
            continue
        verts = list(path.vertices())
        marks = path.heavy_marks(pw)
        cut = verts[rng.choice(marks)]
        # second piece: leftmost continuation from the cut vertex
        tail = reach_from(pw, cut[1], [(cut[0], cut[0])], n)
        if cut[1] < n:
            assert not tail.empty
        head = [v for v in verts if v[1] <= cut[1]]
        assert is_permitted_vertex_path(pw, head + [v for v in verts if v[1] > cut[1]])


def test_reach_rows_cover_heavy_rows():
    pw = PercWindow(zeta_window(2, 40), WeightedWord(random_spaced_word(random.Random(0), 40, 3, 2)))
    rows = reach_rows(pw)
    assert [r.row for r in rows][:-1] == [int(r) for r in pw.heavy_rows]
    assert rows[-1].row == 40


def test_reach_from_matches_reach_at_from_origin():
    rng = random.Random(5)
    for _ in range(100):
        n = rng.randint(5, 60)
        pw = PercWindow(zeta_window(2, n), WeightedWord(random_spaced_word(rng, n, 3, 3)))
        y = rng.randint(0, n)
        assert reach_from(pw, 0, [(0, 0)], y) == reach_at(pw, y)


# -- segment bounds -------------------------------------------------------------


def test_c1_first_level_is_exact():
    for i1 in (9, 10, 40, 300):
        psi = WeightedWord((0,) * (i1 - 1) + (1,))
        r = check_c1_bounds(PercWindow(zeta_window(2, i1), psi), 1, 2)
        assert r.ok and r.segments == ((1, i1 - 1),) and r.bound == 1


def test_c1_bound_formula():
    assert c1_bound(1, 2, 9, 500) == 1
    assert c1_bound(2, 2, 9, 100) == 3 * 11
    assert c1_bound(3, 2, 9, 100) == 3 * 11 + 5 * 1


def test_c1_inapplicable_cases():
    pw = PercWindow(zeta_window(2, 10), WeightedWord((0, 0, 1) + (0,) * 7))
    assert not check_c1_bounds(pw, 1, 2).applicable  # not spaced
    pw = PercWindow(zeta_window(2, 10), WeightedWord((0,) * 10))
    assert not check_c1_bounds(pw, 1, 2).applicable  # no heavy entry
    pw = PercWindow(WeightedWord((0,) * 10), WeightedWord((0,) * 8 + (1, 0)))
    assert not check_c1_bounds(pw, 1, 2).applicable  # zeta is not hierarchical
    assert not check_c1_bounds(pw, 1, 2, M=5).applicable


@pytest.mark.parametrize("seed", range(3))
def test_c1_random_spaced_and_shifted(seed):
    rng = random.Random(seed)
    for _ in range(40):
        n = rng.randint(10, 1500)
        w = random_spaced_word(rng, n, 9, 3)
        assert spaced_ref(w, 9)
        for k in range(1, 4):
            if not any(x >= k for x in w):
                break
            off = rng.randint(0, 40) * 2**k
            r = check_c1_bounds(PercWindow(shifted_zeta_window(2, off, n), WeightedWord(w)), k, 2)
            assert r.ok, (k, off, r)


def test_st_degenerate_gap():
    # psi = 1 at 9 and 11 is not 9-spaced, so use M = 2 hypotheses via a manual M
    psi = WeightedWord((0,) * 8 + (1, 0) + (0,) * 8 + (1, 0))
    pw = PercWindow(zeta_window(2, 20), psi)
    r = check_st_bounds((2, 8), pw, 9, 19, L=2)
    assert r.applicable and r.ok
    assert check_st_bounds((2, 2), pw, 9, 19, L=2).applicable is False  # shorter than L^k
    assert check_st_bounds((2, 8), pw, 9, 18, L=2).applicable is False  # wrong next index


def test_st_minimum_segment():
    rng = random.Random(11)
    hits = 0
    for _ in range(150):
        n = rng.randint(100, 800)
        w = random_spaced_word(rng, n, 9, 2)
        pw = PercWindow(zeta_window(2, n), WeightedWord(w))
        heavy = [i + 1 for i, x in enumerate(w) if x]
        for j1 in heavy:
            k = w[j1 - 1]
            j2 = next((i for i in heavy if i > j1 and w[i - 1] >= k), None)
            if j2 is None:
                continue
            lo = rng.randint(1, max(1, j1 - 2**k))
            r = check_st_bounds((lo, lo + 2**k - 1), pw, j1, j2, L=2)
            if r.applicable:
                hits += 1
                assert r.ok, r
            break
    assert hits > 30


def test_shift_invariance():
    psi = WeightedWord((0,) * 8 + (1, 0))
    assert check_shift_invariance(psi, 1, 0, 0, L=2)
    assert check_shift_invariance(psi, 1, 0, 1, L=2)
    rng = random.Random(2)
    for _ in range(100):
        n = rng.randint(9, 400)
        w = random_spaced_word(rng, n, 9, 2)
        top = max(w)
        if top == 0:
            continue
        k = rng.randint(1, top)
        assert check_shift_invariance(WeightedWord(w), k, rng.randint(0, 50), rng.randint(0, 50), L=2)


def test_buraco():
    assert check_buraco(81, 2, 3, 9)
    assert check_buraco(9, 1, 3, 9)
    with pytest.raises(InvalidOperand):
        check_buraco(80, 2, 3, 9)
    with pytest.raises(InvalidOperand):
        check_buraco(100, 2, 4, 9)
