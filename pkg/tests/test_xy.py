import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qamp import corpus, linalg, qsat, walks, xy
from qamp.errors import BadSector, LayerOutOfRange

from oracles import brute_theta, dense_constraints, dense_count_projector

P11 = np.diag([0, 0, 0, 1]).astype(complex)


def system_on(graph, rank, seed, q=2):
    return corpus.random_edge_system(graph, rank, np.random.default_rng(seed), q)


def dense_apply(op_fn, dim):
    return np.column_stack([op_fn(col) for col in np.eye(dim, dtype=complex)])


def test_path_of_three_gives_one_pyramid():
    sys_ = qsat.QSatSystem((2, 2, 2), [qsat.Constraint((0, 1), P11), qsat.Constraint((1, 2), P11)]).with_layers()
    pyrs = xy.build_pyramids(sys_)
    assert len(pyrs) == 1
    assert pyrs[0].support == (0, 1, 2)
    assert pyrs[0].constraint_ids == (0, 1)


def test_far_apart_apexes_give_two_pyramids():
    sys_ = system_on(walks.Graph(6, [(0, 1), (1, 2), (3, 4), (4, 5)]), 1, 0)
    pyrs = xy.build_pyramids(sys_)
    assert len(pyrs) == 2
    assert set(pyrs[0].support).isdisjoint(pyrs[1].support)


@pytest.mark.parametrize("seed", range(4))
def test_pyramid_family_is_maximal_on_random_cubic(seed):
    g = walks.random_regular(14, 3, seed=seed)
    sys_ = system_on(g, 1, seed)
    for order in (None, tuple(reversed(range(sys_.g)))):
        pyrs = xy.build_pyramids(sys_, layer_order=order)
        top = pyrs[0].layer_order[0]
        used = set()
        for p in pyrs:
            assert used.isdisjoint(p.support)
            used.update(p.support)
        chosen = {p.apex for p in pyrs}
        for apex in sys_.layers[top]:
            if apex not in chosen:
                assert not used.isdisjoint(xy.build_pyramid(sys_, apex, pyrs[0].layer_order).support)


def test_pyramid_members_follow_closure_rule():
    sys_ = system_on(walks.cycle_graph(7), 1, 3)
    for apex in sys_.layers[0]:
        pyr = xy.build_pyramid(sys_, apex)
        covered = set(sys_.constraints[apex].support)
        for li, group in zip(pyr.layer_order[1:], pyr.members[1:]):
            want = {c for c in sys_.layers[li] if not covered.isdisjoint(sys_.constraints[c].support)}
            assert set(group) == want
            for c in group:
                covered.update(sys_.constraints[c].support)
        assert set(pyr.support) == covered


def test_bad_layer_order():
    sys_ = system_on(walks.path_graph(4), 1, 0)
    with pytest.raises(LayerOutOfRange):
        xy.build_pyramids(sys_, layer_order=(0, 5))


def test_diagonal_pyramid_has_empty_y():
    sys_ = system_on(walks.path_graph(4), 1, 0)
    sys_ = qsat.QSatSystem(sys_.dims, [qsat.Constraint(c.support, P11) for c in sys_.constraints]).with_layers()
    pyr = xy.build_pyramids(sys_)[0]
    xs, y = xy.xy_decompose(pyr, sys_)
    assert y.shape[1] == 0
    assert sum(b.shape[1] for b in xs.values()) == pyr.local_dim
    assert xy.compute_theta(pyr, sys_, y) == (0.0, True)


def test_zero_and_plus_have_no_common_eigenvectors():
    sys_ = corpus.angle_system(math.pi / 4)
    pyr = xy.build_pyramids(sys_)[0]
    xs, y = xy.xy_decompose(pyr, sys_)
    assert xs == {}
    assert y.shape[1] == 2


@pytest.mark.parametrize(
    "angle,expected",
    [(math.pi / 4, math.cos(math.pi / 4)), (math.pi / 3, math.cos(math.pi / 6)), (math.pi / 6, math.cos(math.pi / 6))],
)
def test_theta_single_qubit_pair(angle, expected):
    sys_ = corpus.angle_system(angle)
    dec = xy.decompose(sys_)
    pxy = dec.pyramids[0]
    oracle = brute_theta(xy.local_projectors(pxy.pyramid, sys_), pxy.p_y)
    assert pxy.theta == pytest.approx(expected, abs=1e-12)
    assert oracle == pytest.approx(expected, abs=1e-12)
    assert pxy.theta_exact


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**16), rank=st.integers(1, 3))
def test_xy_invariants_and_theta_against_brute_force(seed, rank):
    sys_ = system_on(walks.path_graph(4), rank, seed)
    dec = xy.decompose(sys_)
    for pxy in dec.pyramids:
        ops = xy.local_projectors(pxy.pyramid, sys_)
        eye = np.eye(pxy.pyramid.local_dim)
        xps = [pxy.x_projector(b) for b in pxy.x_spaces]
        assert np.linalg.norm(pxy.p_y + sum(xps, 0 * eye) - eye, 2) < 1e-8
        for q in ops:
            for p in xps + [pxy.p_y]:
                assert np.linalg.norm(q @ p - p @ q, 2) < 1e-8
        for bits, p in zip(pxy.x_spaces, xps):
            for q, b in zip(ops, bits):
                assert np.linalg.norm(q @ p - b * p, 2) < 1e-8
            for i, a in enumerate(ops):
                for c in ops[i + 1 :]:
                    assert np.linalg.norm(p @ (a @ c - c @ a) @ p, 2) < 1e-8
        assert pxy.theta == pytest.approx(brute_theta(ops, pxy.p_y), abs=1e-10)
        sampled, exact = xy.compute_theta(pxy.pyramid, sys_, pxy.y_space, "sampled", cap=200, seed=seed)
        assert not exact
        assert sampled <= pxy.theta + 1e-12
        for s in range(3):
            th, _ = xy.compute_theta(pxy.pyramid, sys_, pxy.y_space, order_seed=s)
            assert abs(th - pxy.theta) <= 1e-12


def test_theta_budget_falls_back_to_sampling():
    sys_ = system_on(walks.path_graph(5), 2, 1)
    dec = xy.decompose(sys_)
    pxy = max(dec.pyramids, key=lambda p: len(p.pyramid.constraint_ids))
    th, exact = xy.compute_theta(pxy.pyramid, sys_, pxy.y_space, cap=3)
    assert not exact
    assert th <= pxy.theta + 1e-12


def test_theta_product_count():
    assert xy.theta_product_count(3) == 48


def test_sectors_on_diagonal_system():
    sys_ = qsat.QSatSystem((2, 2, 2), [qsat.Constraint((0, 1), P11), qsat.Constraint((1, 2), P11)]).with_layers()
    dec = xy.decompose(sys_)
    labels = list(dec.sectors())
    assert all("Y" not in nu for nu in labels)
    # the (0, 0) sector is every basis state with neither |11> pattern
    p = dense_apply(dec.sector_projector(((0, 0),)), 8)
    want = np.zeros(8)
    for i in range(8):
        b = [(i >> k) & 1 for k in range(3)]
        want[i] = not (b[0] and b[1]) and not (b[1] and b[2])
    assert np.allclose(p, np.diag(want))
    psi = linalg.haar_state(8, np.random.default_rng(0))
    w = dec.coarse_weights(psi)
    assert w[0] == pytest.approx(1.0)
    with pytest.raises(BadSector):
        dec.sector_projector(((0,),))
    with pytest.raises(BadSector):
        dec.sector_projector(((0, 0), (0, 0)))


def test_single_pyramid_y_sector_is_p_y():
    sys_ = corpus.angle_system(0.7)
    dec = xy.decompose(sys_)
    assert np.allclose(dense_apply(dec.sector_projector(("Y",)), 2), dec.pyramids[0].p_y)
    psi = linalg.haar_state(2, np.random.default_rng(2))
    assert dec.coarse_weights(psi)[1] == pytest.approx(1.0)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**16), cyc=st.booleans())
def test_coarse_weights_match_fine_sum(seed, cyc):
    g = walks.cycle_graph(6) if cyc else walks.path_graph(6)
    sys_ = system_on(g, 2, seed)
    dec = xy.decompose(sys_)
    psi = linalg.haar_state(sys_.dim, np.random.default_rng(seed))
    fine = np.zeros(len(dec.pyramids) + 1)
    for nu in dec.sectors():
        v = dec.sector_projector(nu)(psi)
        fine[sum(label == "Y" for label in nu)] += np.vdot(v, v).real
    assert np.allclose(dec.coarse_weights(psi), fine, atol=1e-10)
    assert fine.sum() == pytest.approx(1.0, abs=1e-10)


def _dense_split(dec, layer, ell, dim):
    total = np.zeros((dim, dim), dtype=complex)
    for pyr_op, rest_op in xy.inside_outside_split(dec, layer, ell):
        total += dense_apply(lambda v: pyr_op(rest_op(v)), dim)
    return total


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**16), ell=st.integers(0, 2), cyc=st.booleans())
def test_inside_outside_split_identity(seed, ell, cyc):
    g = walks.cycle_graph(6) if cyc else walks.path_graph(6)
    sys_ = system_on(g, 1, seed)
    dec = xy.decompose(sys_)
    mats = dense_constraints(sys_)
    for layer, ids in enumerate(sys_.layers):
        want = dense_count_projector([mats[c] for c in ids], ell)
        assert np.linalg.norm(_dense_split(dec, layer, ell, sys_.dim) - want, 2) < 1e-9


def test_split_with_zero_ell_is_one_pair():
    sys_ = system_on(walks.path_graph(5), 1, 0)
    dec = xy.decompose(sys_)
    assert len(xy.inside_outside_split(dec, 1, 0)) == 1


def test_split_for_layer_without_pyramid_members():
    sys_ = system_on(walks.Graph(6, [(0, 1), (2, 3), (4, 5), (1, 2)]), 1, 0)
    dec = xy.decompose(sys_, apex_priority=())
    assert dec.inside(1) == ()
    pairs = xy.inside_outside_split(dec, 1, 1)
    assert len(pairs) == 1
    psi = linalg.haar_state(sys_.dim, np.random.default_rng(0))
    assert np.allclose(pairs[0][0](psi), psi)


@pytest.mark.parametrize("seed", range(3))
def test_pull_back_at_zero_on_two_layers(seed):
    # product of the two unviolated-layer projectors equals inside parts times outside parts
    sys_ = system_on(walks.path_graph(7), 1, seed)
    assert sys_.g == 2
    dec = xy.decompose(sys_)
    mats = dense_constraints(sys_)
    eye = np.eye(sys_.dim)

    def unviolated(ids):
        out = eye
        for c in ids:
            out = out @ (eye - mats[c])
        return out

    red, blue = 1, 0
    lhs = unviolated(sys_.layers[red]) @ unviolated(sys_.layers[blue])
    rhs = unviolated(dec.inside(red)) @ unviolated(dec.inside(blue)) @ unviolated(dec.outside(red)) @ unviolated(dec.outside(blue))
    assert np.linalg.norm(lhs - rhs, 2) < 1e-9


@pytest.mark.parametrize("ell", [0, 1, 2])
def test_general_pull_back_three_layers(ell):
    sys_ = system_on(walks.cycle_graph(5), 1, 7)
    assert sys_.g == 3
    dec = xy.decompose(sys_)
    mats = dense_constraints(sys_)
    lhs = np.eye(sys_.dim)
    rhs = np.eye(sys_.dim)
    for layer in dec.layer_order:
        lhs = dense_count_projector([mats[c] for c in sys_.layers[layer]], ell) @ lhs
        rhs = _dense_split(dec, layer, ell, sys_.dim) @ rhs
    assert np.linalg.norm(lhs - rhs, 2) < 1e-9
