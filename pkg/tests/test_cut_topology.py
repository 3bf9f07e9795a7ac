from dataclasses import replace

import numpy as np
import pytest

import config
from background_mesh import BoundingBox, build_structured_mesh
from cut_topology import (ElementClass, OpenChainError, TopologyError, build_cut_topology, build_patches,
                          classify_by_sign, classify_elements, collect_box_boundary_segments, collect_ghost_faces,
                          geometry_diagnostics, negative_polygon, omega_h_area,
                          patch_xi, reconstruct_interface, segment_in_triangle, snap_nodal_values,
                          subtriangulate_cut_element, trace_chains, triangle_areas)
from level_set_geometry import eval_phi, make_case


def _shoelace(polygon):
    x, y = polygon[:, 0], polygon[:, 1]
    return 0.5 * (np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _setup(case_id, n):
    case = make_case(case_id)
    mesh = build_structured_mesh(BoundingBox(*config.BOUNDING_BOXES[case_id]), n)
    return case, mesh, build_cut_topology(mesh, case)


def test_snap_moves_near_zero_values_inside():
    values = snap_nodal_values(np.array([0.0, 1e-20, 0.5, -0.5]), h=0.1)
    assert np.all(values[:2] < 0)
    assert values[2] == 0.5 and values[3] == -0.5


def test_classify_by_sign():
    classes = classify_by_sign(np.array([[-1, -1, -1], [1, 1, 1], [-1, 1, 1]]))
    assert list(classes) == [ElementClass.INSIDE, ElementClass.OUTSIDE, ElementClass.CUT]


def test_segment_normal_points_to_positive_side():
    points = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    values = np.array([-1.0, 1.0, -1.0])
    endpoints, normal, edges = segment_in_triangle(points, values)
    assert len(edges) == 2
    assert normal[0] > 0
    tangent = endpoints[1] - endpoints[0]
    assert np.allclose(normal, [tangent[1], -tangent[0]] / np.hypot(*tangent))


def test_subtriangulation_conserves_area():
    rng = np.random.default_rng(11)
    points = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    for _ in range(100):
        values = rng.uniform(-1, 1, size=3)
        if np.all(values < 0) or np.all(values > 0):
            continue
        tris = subtriangulate_cut_element(points, values)
        areas = triangle_areas(tris)
        assert np.all(areas > 0)
        assert areas.sum() == pytest.approx(_shoelace(negative_polygon(points, values)), abs=1e-14)


def test_circle_topology():
    case, mesh, topology = _setup('circle', 16)
    classes = topology.classes
    assert set(np.unique(classes)) == {ElementClass.INSIDE, ElementClass.OUTSIDE, ElementClass.CUT}
    assert len(topology.box_segments) == 0
    assert len(topology.segments) == len(topology.cut_elements)

    # ghost faces touch at least one cut element and only active ones
    t = mesh.face_triangles[topology.ghost_faces]
    assert np.all(classes[t] != ElementClass.OUTSIDE)
    assert np.all((classes[t] == ElementClass.CUT).any(axis=1))

    # outward normals on Gamma_h for a convex domain
    mid = topology.segments.points.mean(axis=1)
    assert np.all(np.einsum('ij,ij->i', mid, topology.segments.normals) > 0)


@pytest.mark.parametrize('n', [32, 64])
def test_circle_area_and_delta(n):
    case, mesh, topology = _setup('circle', n)
    diagnostics = geometry_diagnostics(mesh, topology, case)
    assert abs(diagnostics['area_omega_h'] - np.pi) <= 10 * mesh.h ** 2
    assert diagnostics['length_gamma_h'] == pytest.approx(2 * np.pi, rel=1e-2)
    assert 0 < diagnostics['delta_h'] <= mesh.h ** 2


def test_halfplane_is_resolved_exactly():
    case, mesh, topology = _setup('halfplane', 16)
    assert omega_h_area(mesh, topology) == pytest.approx(2.6 * 1.93, rel=1e-12)
    assert topology.segments.lengths.sum() == pytest.approx(2.6, rel=1e-12)
    assert topology.box_segments.lengths.sum() == pytest.approx(2.6 + 2 * 1.93, rel=1e-12)
    assert np.allclose(topology.segments.normals, [1.0, 0.0])
    with pytest.raises(OpenChainError):
        trace_chains(mesh, topology)


@pytest.mark.parametrize('case_id', ['circle', 'annulus'])
def test_chains_are_closed(case_id):
    case, mesh, topology = _setup(case_id, 32)
    chains = trace_chains(mesh, topology)
    assert sum(len(c) for c in chains) == len(topology.cut_elements)
    assert len(chains) == (2 if case_id == 'annulus' else 1)


@pytest.mark.parametrize('case_id', ['circle', 'flower'])
@pytest.mark.parametrize('n', [32, 64])
def test_patches_and_xi(case_id, n):
    case, mesh, topology = _setup(case_id, n)
    patches = build_patches(mesh, topology)
    covered = sorted(t for p in patches for t in p.core)
    assert covered == sorted(int(t) for t in topology.cut_elements)
    for patch in patches:
        assert len(patch.core) >= config.PATCH_CORE_SIZE or len(patches) == 1
        assert patch.gamma_length >= mesh.h or len(patches) == 1
    xi = [patch_xi(p, mesh, topology) for p in patches]
    assert min(xi) > 0


def test_invalid_core_size():
    case, mesh, topology = _setup('circle', 16)
    with pytest.raises(TopologyError):
        build_patches(mesh, topology, target_core_size=0)


def test_empty_domain_raises():
    mesh = build_structured_mesh(BoundingBox(2.0, 2.0, 3.0, 3.0), 8)
    with pytest.raises(TopologyError):
        build_cut_topology(mesh, make_case('circle'))


def test_classify_elements_matches_nodal_signs():
    case = make_case('circle')
    mesh = build_structured_mesh(BoundingBox(*config.BOUNDING_BOXES['circle']), 8)
    classes, values = classify_elements(mesh, case)
    assert np.array_equal(classes, classify_by_sign(values[mesh.triangles]))
    phi = eval_phi(case, mesh.vertices)
    far = np.abs(phi) > 1e-6
    assert np.array_equal(values[far], phi[far])
    assert not np.any(values == 0.0)


def test_degenerate_segments_are_reclassified(unit_mesh):
    values = np.ones(len(unit_mesh.vertices))
    values[0] = -1e-20
    classes = classify_by_sign(values[unit_mesh.triangles])
    assert (classes == ElementClass.CUT).sum() == 2
    segments = reconstruct_interface(unit_mesh, values, classes)
    assert len(segments) == 0
    assert np.all(classes == ElementClass.OUTSIDE)


def test_ghost_faces_need_a_cut_neighbour(unit_mesh):
    classes = np.full(unit_mesh.num_triangles, ElementClass.INSIDE, dtype=np.int8)
    assert len(collect_ghost_faces(unit_mesh, classes)) == 0

    classes[0] = ElementClass.CUT
    faces = collect_ghost_faces(unit_mesh, classes)
    assert len(faces) == 2
    assert np.all((unit_mesh.face_triangles[faces] == 0).any(axis=1))

    classes[1] = ElementClass.OUTSIDE
    assert len(collect_ghost_faces(unit_mesh, classes)) == 1


def test_box_segments_cover_the_inside_part_of_the_box(unit_mesh):
    values = unit_mesh.vertices[:, 0] - 0.6
    classes = classify_by_sign(values[unit_mesh.triangles])
    segments = collect_box_boundary_segments(unit_mesh, values, classes)
    assert segments.lengths.sum() == pytest.approx(0.6 + 0.6 + 1.0, rel=1e-12)
    assert np.all(segments.points[..., 0] <= 0.6 + 1e-12)
    mid = segments.points.mean(axis=1) - 0.5
    assert np.all(np.einsum('ij,ij->i', mid, segments.normals) > 0)
    tangent = segments.points[:, 1] - segments.points[:, 0]
    right_hand = np.stack([tangent[:, 1], -tangent[:, 0]], axis=1) / segments.lengths[:, None]
    assert np.allclose(right_hand, segments.normals)


def test_patch_lengths_partition_gamma_h():
    case, mesh, topology = _setup('circle', 64)
    patches = build_patches(mesh, topology)
    ratios = np.array([p.gamma_length / mesh.h for p in patches])
    assert np.all((ratios >= 1.0) & (ratios <= 10.0))
    total = sum(p.gamma_length for p in patches)
    assert total == pytest.approx(topology.segments.lengths.sum(), abs=1e-12)


def test_xi_is_linear_in_patch_values():
    case, mesh, topology = _setup('circle', 32)
    patch = build_patches(mesh, topology)[0]
    doubled = replace(patch, nodal_values={v: 2.0 * x for v, x in patch.nodal_values.items()})
    assert patch_xi(doubled, mesh, topology) == pytest.approx(2.0 * patch_xi(patch, mesh, topology), rel=1e-14)


def test_ghost_faces_match_exhaustive_search():
    case, mesh, topology = _setup('circle', 16)
    classes = topology.classes
    expected = set()
    for f in range(mesh.num_faces):
        t0, t1 = mesh.face_triangles[f]
        if t1 < 0:
            continue
        pair = (classes[t0], classes[t1])
        if ElementClass.OUTSIDE in pair or ElementClass.CUT not in pair:
            continue
        expected.add(f)
    assert set(int(f) for f in topology.ghost_faces) == expected


def test_circle_perimeter_n64():
    case, mesh, topology = _setup('circle', 64)
    assert abs(topology.segments.lengths.sum() - 2 * np.pi) <= 5e-3


def test_delta_h_is_second_order():
    deltas = []
    for n in (32, 64, 128):
        case, mesh, topology = _setup('circle', n)
        deltas.append(geometry_diagnostics(mesh, topology, case)['delta_h'])
    for coarse, fine in zip(deltas, deltas[1:]):
        assert 2.5 <= coarse / fine <= 6.0
