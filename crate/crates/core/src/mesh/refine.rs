use super::{Mesh, TaggedEdge, Topology};
use crate::error::{Error, Result};
use crate::field::{error_indicators, FieldSolution};

/// Bisects the triangles carrying the top `marker_fraction` of the energy
/// error indicator of `solution`, plus whatever closure conformity demands.
pub fn refine(mesh: &Mesh, solution: &FieldSolution, marker_fraction: f64) -> Result<Mesh> {
    if solution.mesh.triangles.len() != mesh.triangles.len() || solution.mesh.vertices.len() != mesh.vertices.len() {
        return Err(Error::invalid("solution was not computed on this mesh"));
    }
    let eta = error_indicators(solution);
    let marked = mark_top_fraction(&eta, marker_fraction)?;
    Ok(bisect_marked(mesh, &marked))
}

/// Splits every triangle into four.
pub fn refine_uniform(mesh: &Mesh) -> Mesh {
    bisect_marked(mesh, &vec![true; mesh.triangles.len()])
}

/// Marks the `ceil(fraction * n)` largest indicators. Ties keep the lower
/// element index first.
pub fn mark_top_fraction(indicators: &[f64], fraction: f64) -> Result<Vec<bool>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!("marker fraction must lie in (0, 1], got {fraction}")));
    }
    let n = indicators.len();
    let count = ((fraction * n as f64).ceil() as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| indicators[b].total_cmp(&indicators[a]));
    let mut marked = vec![false; n];
    for &t in &order[..count] {
        marked[t] = true;
    }
    Ok(marked)
}

/// Local index of the vertex opposite the longest edge of `tri`. Equal
/// lengths go to the edge with the lowest vertex pair.
fn longest_local(mesh: &Mesh, tri: [usize; 3]) -> usize {
    let key = |i: usize| {
        let (a, b) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
        (mesh.vertices[a].dist(mesh.vertices[b]), a.min(b), a.max(b))
    };
    (0..3)
        .max_by(|&i, &j| {
            let (li, ai, bi) = key(i);
            let (lj, aj, bj) = key(j);
            li.total_cmp(&lj).then_with(|| (aj, bj).cmp(&(ai, bi)))
        })
        .unwrap()
}

/// Newest-vertex style bisection of the marked triangles. Each marked
/// triangle has its longest edge bisected; neighbours sharing a bisected
/// edge are closed by further longest-edge bisections so the result is
/// conforming.
pub fn bisect_marked(mesh: &Mesh, marked: &[bool]) -> Mesh {
    let topo = Topology::new(&mesh.triangles);
    let longest: Vec<usize> = mesh
        .triangles
        .iter()
        .enumerate()
        .map(|(t, tri)| topo.tri_edges[t][longest_local(mesh, *tri)])
        .collect();

    let mut edge_marked = vec![false; topo.edges.len()];
    for (t, &m) in marked.iter().enumerate() {
        if m {
            for &e in &topo.tri_edges[t] {
                edge_marked[e] = true;
            }
        }
    }
    // Closure: any triangle with a bisected edge must bisect its longest edge.
    loop {
        let mut changed = false;
        for t in 0..mesh.triangles.len() {
            if !edge_marked[longest[t]] && topo.tri_edges[t].iter().any(|&e| edge_marked[e]) {
                edge_marked[longest[t]] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut vertices = mesh.vertices.clone();
    let mut vertex_electrode = mesh.vertex_electrode.clone();
    let mut midpoint = vec![usize::MAX; topo.edges.len()];
    let edge_electrode: std::collections::HashMap<(usize, usize), Option<usize>> =
        mesh.edges.iter().map(|e| ((e.a.min(e.b), e.a.max(e.b)), e.electrode)).collect();
    for (e, &(a, b)) in topo.edges.iter().enumerate() {
        if edge_marked[e] {
            midpoint[e] = vertices.len();
            vertices.push(mesh.vertices[a].midpoint(mesh.vertices[b]));
            vertex_electrode.push(edge_electrode.get(&(a, b)).copied().flatten());
        }
    }

    let mid_of = |a: usize, b: usize| -> Option<usize> {
        topo.edge(a, b).filter(|&e| edge_marked[e]).map(|e| midpoint[e])
    };

    let mut triangles = Vec::with_capacity(mesh.triangles.len() * 2);
    let mut regions = Vec::with_capacity(triangles.capacity());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let i = longest_local(mesh, *tri);
        let (v2, v0, v1) = (tri[i], tri[(i + 1) % 3], tri[(i + 2) % 3]);
        let Some(m) = mid_of(v0, v1) else {
            triangles.push(*tri);
            regions.push(mesh.regions[t]);
            continue;
        };
        // Children share the new vertex; each may split once more along the
        // original edge it inherits.
        for (child, outer) in [([v0, m, v2], (v2, v0)), ([m, v1, v2], (v1, v2))] {
            match mid_of(outer.0, outer.1) {
                Some(k) => {
                    let apex = child.iter().copied().find(|&v| v != outer.0 && v != outer.1).unwrap();
                    // outer is traversed counter-clockwise as (outer.0, outer.1) in the child.
                    triangles.push([outer.0, k, apex]);
                    triangles.push([k, outer.1, apex]);
                    regions.push(mesh.regions[t]);
                    regions.push(mesh.regions[t]);
                }
                None => {
                    triangles.push(child);
                    regions.push(mesh.regions[t]);
                }
            }
        }
    }

    let mut edges = Vec::with_capacity(mesh.edges.len() * 2);
    for e in &mesh.edges {
        match mid_of(e.a, e.b) {
            Some(m) => {
                edges.push(TaggedEdge { a: e.a.min(m), b: e.a.max(m), ..e.clone() });
                edges.push(TaggedEdge { a: m.min(e.b), b: m.max(e.b), ..e.clone() });
            }
            None => edges.push(e.clone()),
        }
    }
    edges.sort_by_key(|e| (e.a, e.b));

    Mesh {
        vertices,
        triangles,
        regions,
        edges,
        vertex_electrode,
        electrodes: mesh.electrodes.clone(),
        corners: mesh.corners.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{parallel_plate, Material};
    use crate::mesh::{generate_mesh, MeshControls};
    use crate::units::um;

    fn plate_mesh() -> Mesh {
        let layout = parallel_plate(um(10.0), &[(um(4.0), Material::Substrate), (um(4.0), Material::Vacuum)], um(1.0)).unwrap();
        generate_mesh(
            &layout,
            &MeshControls {
                h_max: um(2.0),
                corner_h_min: um(0.5),
                grading_ratio: 2.0,
                max_refine_passes: 0,
            },
        )
        .unwrap()
    }

    #[test]
    fn uniform_refinement_quadruples() {
        let mesh = plate_mesh();
        let fine = refine_uniform(&mesh);
        assert_eq!(fine.triangles.len(), 4 * mesh.triangles.len());
        assert!(fine.check().is_empty());
        assert_eq!(fine.edges.len(), 2 * mesh.edges.len());
        for m in [Material::Substrate, Material::Vacuum] {
            assert!((fine.area(m) - mesh.area(m)).abs() < 1e-9 * mesh.area(m));
        }
    }

    #[test]
    fn single_mark_stays_conforming() {
        let mesh = plate_mesh();
        for t in [0, mesh.triangles.len() / 2, mesh.triangles.len() - 1] {
            let mut marked = vec![false; mesh.triangles.len()];
            marked[t] = true;
            let fine = bisect_marked(&mesh, &marked);
            assert!(fine.check().is_empty(), "{:?}", fine.check());
            assert!(fine.triangles.len() > mesh.triangles.len());
        }
    }

    #[test]
    fn marking_breaks_ties_by_index() {
        let marked = mark_top_fraction(&[1.0, 2.0, 2.0, 2.0, 0.5], 0.4).unwrap();
        assert_eq!(marked, vec![false, true, true, false, false]);
        assert!(mark_top_fraction(&[1.0], 0.0).is_err());
        assert!(mark_top_fraction(&[1.0], 1.5).is_err());
    }
}
