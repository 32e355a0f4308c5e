//! Conforming triangulations of a layout.
//!
//! [`generate_mesh`] builds a constrained Delaunay triangulation whose
//! element size grows geometrically away from every conductor corner;
//! [`refine()`] bisects the elements with the largest energy error indicator.
//! Conductor interiors are not meshed: their boundaries carry Dirichlet data.

mod generate;
mod refine;

use std::collections::HashMap;
use std::fmt::Write as _;

pub use generate::{generate_mesh, SizeField};
pub use refine::{bisect_marked, mark_top_fraction, refine, refine_uniform};

use crate::error::{Error, Result};
use crate::geometry::{InterfaceTag, Material, Point};

/// Sizing controls for mesh generation and adaptive refinement. Lengths in
/// metres.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshControls {
    /// Largest element edge inside the electrode window. Outside the window
    /// the size keeps growing at the grading rate.
    pub h_max: f64,
    /// Element size at conductor corners.
    pub corner_h_min: f64,
    /// Ratio between the sizes of neighbouring elements along a ray from a corner.
    pub grading_ratio: f64,
    pub max_refine_passes: usize,
}

impl Default for MeshControls {
    fn default() -> Self {
        MeshControls {
            h_max: 5e-6,
            corner_h_min: 2e-9,
            grading_ratio: 1.3,
            max_refine_passes: 1,
        }
    }
}

impl MeshControls {
    pub fn validate(&self) -> Result<()> {
        if !(self.corner_h_min > 0.0 && self.corner_h_min < self.h_max && self.h_max.is_finite()) {
            return Err(Error::invalid(format!(
                "mesh sizes need 0 < corner_h_min ({}) < h_max ({})",
                self.corner_h_min, self.h_max
            )));
        }
        if !(self.grading_ratio > 1.0 && self.grading_ratio <= 3.0) {
            return Err(Error::invalid(format!(
                "grading_ratio must lie in (1, 3], got {}",
                self.grading_ratio
            )));
        }
        Ok(())
    }
}

/// A mesh edge lying on a tagged layout segment.
#[derive(Clone, Debug, PartialEq)]
pub struct TaggedEdge {
    pub a: usize,
    pub b: usize,
    pub tag: InterfaceTag,
    pub sidewall: bool,
    /// Index into [`Mesh::electrodes`] when the edge bounds a conductor.
    pub electrode: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    /// Material of each triangle (substrate or vacuum).
    pub regions: Vec<Material>,
    pub edges: Vec<TaggedEdge>,
    /// Conductor whose boundary the vertex lies on, if any.
    pub vertex_electrode: Vec<Option<usize>>,
    pub electrodes: Vec<String>,
    /// Conductor corners of the source layout.
    pub corners: Vec<Point>,
}

/// Edge numbering and adjacency derived from a triangle list.
#[derive(Clone, Debug)]
pub struct Topology {
    /// Vertex pairs, smaller index first, in order of first appearance.
    pub edges: Vec<(usize, usize)>,
    /// Triangles on each side of an edge; the second is `None` on the boundary.
    pub edge_triangles: Vec<(usize, Option<usize>)>,
    /// Edge index opposite to each local vertex: `tri_edges[t][i]` joins the
    /// two vertices other than `triangles[t][i]`.
    pub tri_edges: Vec<[usize; 3]>,
    /// Extra triangles beyond two sharing one edge (non-manifold input).
    pub overfull: Vec<usize>,
    lookup: HashMap<(usize, usize), usize>,
}

impl Topology {
    pub fn new(triangles: &[[usize; 3]]) -> Self {
        let mut edges = Vec::with_capacity(triangles.len() * 3 / 2 + 8);
        let mut edge_triangles: Vec<(usize, Option<usize>)> = Vec::with_capacity(edges.capacity());
        let mut tri_edges = Vec::with_capacity(triangles.len());
        let mut lookup = HashMap::with_capacity(edges.capacity());
        let mut overfull = Vec::new();
        for (t, tri) in triangles.iter().enumerate() {
            let mut te = [0usize; 3];
            for i in 0..3 {
                let (a, b) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
                let key = (a.min(b), a.max(b));
                let e = *lookup.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edge_triangles.push((t, None));
                    edges.len() - 1
                });
                if edge_triangles[e].0 != t {
                    if edge_triangles[e].1.is_none() {
                        edge_triangles[e].1 = Some(t);
                    } else {
                        overfull.push(e);
                    }
                }
                te[i] = e;
            }
            tri_edges.push(te);
        }
        Topology {
            edges,
            edge_triangles,
            tri_edges,
            overfull,
            lookup,
        }
    }

    pub fn edge(&self, a: usize, b: usize) -> Option<usize> {
        self.lookup.get(&(a.min(b), a.max(b))).copied()
    }
}

/// A broken mesh invariant.
#[derive(Clone, Debug, PartialEq)]
pub enum MeshViolation {
    NonPositiveArea { triangle: usize },
    /// A boundary edge of the triangulation that is not a tagged domain boundary.
    HangingEdge { a: usize, b: usize },
    NonManifoldEdge { a: usize, b: usize },
    TaggedEdgeMissing { a: usize, b: usize },
}

impl Mesh {
    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        0.5 * b.sub(a).cross(c.sub(a))
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangle_points(t);
        Point::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0)
    }

    pub fn longest_edge_length(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        a.dist(b).max(b.dist(c)).max(c.dist(a))
    }

    pub fn topology(&self) -> Topology {
        Topology::new(&self.triangles)
    }

    pub fn electrode_index(&self, name: &str) -> Option<usize> {
        self.electrodes.iter().position(|e| e == name)
    }

    /// Shortest mesh edge with an endpoint within `radius` of `p`.
    pub fn shortest_edge_near(&self, p: Point, radius: f64) -> Option<f64> {
        let topo = self.topology();
        topo.edges
            .iter()
            .filter(|&&(a, b)| {
                self.vertices[a].dist(p) <= radius || self.vertices[b].dist(p) <= radius
            })
            .map(|&(a, b)| self.vertices[a].dist(self.vertices[b]))
            .min_by(f64::total_cmp)
    }

    /// Lists broken invariants: orientation, conformity (every edge is shared
    /// by two triangles unless it is a tagged domain boundary) and manifoldness.
    pub fn check(&self) -> Vec<MeshViolation> {
        let mut out = Vec::new();
        for t in 0..self.triangles.len() {
            if !(self.signed_area(t) > 0.0) {
                out.push(MeshViolation::NonPositiveArea { triangle: t });
            }
        }
        let topo = self.topology();
        let boundary: std::collections::HashSet<(usize, usize)> = self
            .edges
            .iter()
            .filter(|e| e.tag == InterfaceTag::Outer || e.electrode.is_some())
            .map(|e| (e.a.min(e.b), e.a.max(e.b)))
            .collect();
        for (e, &(a, b)) in topo.edges.iter().enumerate() {
            if topo.edge_triangles[e].1.is_none() && !boundary.contains(&(a, b)) {
                out.push(MeshViolation::HangingEdge { a, b });
            }
        }
        for &e in &topo.overfull {
            let (a, b) = topo.edges[e];
            out.push(MeshViolation::NonManifoldEdge { a, b });
        }
        for te in &self.edges {
            if topo.edge(te.a, te.b).is_none() {
                out.push(MeshViolation::TaggedEdgeMissing { a: te.a, b: te.b });
            }
        }
        out
    }

    pub fn area(&self, material: Material) -> f64 {
        (0..self.triangles.len())
            .filter(|&t| self.regions[t] == material)
            .map(|t| self.signed_area(t))
            .sum()
    }

    /// Plain-text dump: vertex coordinates, then triangles with region names.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "vertices {}", self.vertices.len());
        for p in &self.vertices {
            let _ = writeln!(s, "{:.9e} {:.9e}", p.x, p.y);
        }
        let _ = writeln!(s, "triangles {}", self.triangles.len());
        for (t, tri) in self.triangles.iter().enumerate() {
            let _ = writeln!(s, "{} {} {} {}", tri[0], tri[1], tri[2], self.regions[t]);
        }
        let _ = writeln!(s, "edges {}", self.edges.len());
        for e in &self.edges {
            let tag = match e.tag {
                InterfaceTag::Sm => "SM",
                InterfaceTag::Sa => "SA",
                InterfaceTag::Ma => "MA",
                InterfaceTag::Outer => "outer",
            };
            let electrode = e
                .electrode
                .map(|i| self.electrodes[i].as_str())
                .unwrap_or("-");
            let _ = writeln!(s, "{} {} {} {}", e.a, e.b, tag, electrode);
        }
        s
    }
}
