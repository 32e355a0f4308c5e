use std::collections::HashMap;

use spade::handles::FixedVertexHandle;
use spade::{AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};

use super::{Mesh, MeshControls, TaggedEdge, Topology};
use crate::error::{Error, Result};
use crate::geometry::{
    point_segment_distance, split_at_vertices, validate, InterfaceTag, LayoutSpec, Material, Point, Rect,
};

/// Target element size as a function of position.
///
/// The size is `corner_h_min` at every feature vertex and grows linearly with
/// distance at slope `grading_ratio - 1`, which makes successive elements
/// along a ray grow geometrically. Inside the electrode window it is capped at
/// `h_max`; outside, the cap itself grows at the same rate.
#[derive(Clone, Debug)]
pub struct SizeField {
    anchors: Vec<Point>,
    h_min: f64,
    h_max: f64,
    slope: f64,
    window: Rect,
}

impl SizeField {
    pub fn new(layout: &LayoutSpec, controls: &MeshControls) -> Self {
        let anchors = layout.feature_vertices();
        let window = if anchors.is_empty() {
            layout.bbox
        } else {
            let mut min = anchors[0];
            let mut max = anchors[0];
            for p in &anchors {
                min = Point::new(min.x.min(p.x), min.y.min(p.y));
                max = Point::new(max.x.max(p.x), max.y.max(p.y));
            }
            Rect::new(min, max)
        };
        SizeField {
            anchors,
            h_min: controls.corner_h_min,
            h_max: controls.h_max,
            slope: controls.grading_ratio - 1.0,
            window,
        }
    }

    pub fn size(&self, p: Point) -> f64 {
        let mut h = self.h_max + self.slope * self.window.distance(p);
        for c in &self.anchors {
            h = h.min(self.h_min + self.slope * p.dist(*c));
        }
        h
    }
}

/// Spacing relative to the local target size used on constrained segments.
const BOUNDARY_DENSITY: f64 = 1.25;
/// Interior points closer than this fraction of their cell to a segment are dropped.
const BOUNDARY_CLEARANCE: f64 = 0.7;

/// Triangulates `layout` with geometric grading toward its corners.
pub fn generate_mesh(layout: &LayoutSpec, controls: &MeshControls) -> Result<Mesh> {
    controls.validate()?;
    let report = validate(layout);
    if !report.is_valid() {
        return Err(Error::invalid(format!("layout is invalid: {report}")));
    }
    let tol = layout.tolerance();

    let mut vertices: Vec<Point> = Vec::new();
    {
        let mut seen = std::collections::HashSet::new();
        for p in layout
            .regions
            .iter()
            .flat_map(|r| r.polygon.iter().copied())
            .chain(layout.segments.iter().flat_map(|s| [s.a, s.b]))
        {
            if seen.insert(p.key()) {
                vertices.push(p);
            }
        }
    }

    struct Piece {
        a: Point,
        b: Point,
        tag: InterfaceTag,
        sidewall: bool,
    }
    let mut pieces = Vec::new();
    for s in &layout.segments {
        for (a, b) in split_at_vertices(s.a, s.b, &vertices, tol) {
            pieces.push(Piece {
                a,
                b,
                tag: s.tag,
                sidewall: s.sidewall,
            });
        }
    }

    let min_feature = pieces
        .iter()
        .map(|p| p.a.dist(p.b))
        .fold(f64::INFINITY, f64::min);
    if controls.corner_h_min > min_feature {
        return Err(Error::MeshingFailure(format!(
            "corner_h_min {:.3e} m exceeds the smallest feature {:.3e} m",
            controls.corner_h_min, min_feature
        )));
    }

    let size = SizeField::new(layout, controls);

    let mut cdt: ConstrainedDelaunayTriangulation<Point2<f64>> = ConstrainedDelaunayTriangulation::new();
    let mut handles: HashMap<(i64, i64), FixedVertexHandle> = HashMap::new();
    let mut insert = |cdt: &mut ConstrainedDelaunayTriangulation<Point2<f64>>, p: Point| -> Result<FixedVertexHandle> {
        if let Some(&h) = handles.get(&p.key()) {
            return Ok(h);
        }
        let h = cdt
            .insert(Point2::new(p.x, p.y))
            .map_err(|e| Error::MeshingFailure(format!("vertex insertion failed: {e:?}")))?;
        handles.insert(p.key(), h);
        Ok(h)
    };

    for piece in &pieces {
        let pts = graded_points(piece.a, piece.b, &size);
        let mut prev = insert(&mut cdt, pts[0])?;
        for &p in &pts[1..] {
            let h = insert(&mut cdt, p)?;
            if h != prev && !cdt.add_constraint(prev, h) {
                // Already constrained: shared by two pieces.
            }
            prev = h;
        }
    }

    let conductors: Vec<&crate::geometry::Region> = layout.conductors().collect();
    let interior = interior_points(layout, &size, &pieces.iter().map(|p| (p.a, p.b)).collect::<Vec<_>>(), &conductors);
    for p in interior {
        insert(&mut cdt, p)?;
    }

    let budget = cdt.num_vertices();
    let result = cdt.refine(
        RefinementParameters::<f64>::new()
            .with_angle_limit(AngleLimit::from_deg(22.0))
            .with_max_additional_vertices(budget),
    );
    if !result.refinement_complete {
        log::warn!("mesh quality refinement stopped at its vertex budget");
    }

    // Keep the dielectric triangles.
    let positions: Vec<Point> = cdt
        .vertices()
        .map(|v| Point::new(v.position().x, v.position().y))
        .collect();
    let mut raw_triangles = Vec::new();
    let mut raw_regions = Vec::new();
    for face in cdt.inner_faces() {
        let vs = face.vertices().map(|v| v.fix().index());
        let [a, b, c] = vs.map(|i| positions[i]);
        let centroid = Point::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0);
        if conductors.iter().any(|r| r.contains(centroid)) {
            continue;
        }
        let material = match layout.region_at(centroid).map(|r| r.material) {
            Some(m @ (Material::Substrate | Material::Vacuum)) => m,
            _ => {
                return Err(Error::MeshingFailure(format!(
                    "triangle at ({:.3e}, {:.3e}) lies outside every region",
                    centroid.x, centroid.y
                )))
            }
        };
        let tri = if b.sub(a).cross(c.sub(a)) > 0.0 { vs } else { [vs[0], vs[2], vs[1]] };
        raw_triangles.push(tri);
        raw_regions.push(material);
    }

    let mut remap = vec![usize::MAX; positions.len()];
    for tri in &raw_triangles {
        for &v in tri {
            remap[v] = 0;
        }
    }
    let mut mesh_vertices = Vec::new();
    for (i, slot) in remap.iter_mut().enumerate() {
        if *slot == 0 {
            *slot = mesh_vertices.len();
            mesh_vertices.push(positions[i]);
        }
    }
    let triangles: Vec<[usize; 3]> = raw_triangles.iter().map(|t| t.map(|v| remap[v])).collect();

    let electrodes = layout.electrodes();
    let electrode_of = |name: &Option<String>| name.as_ref().and_then(|n| electrodes.iter().position(|e| e == n));
    let vertex_electrode: Vec<Option<usize>> = mesh_vertices
        .iter()
        .map(|&p| {
            conductors
                .iter()
                .find(|r| r.on_boundary(p, tol))
                .and_then(|r| electrode_of(&r.electrode))
        })
        .collect();

    let topo = Topology::new(&triangles);
    let mut edges = Vec::new();
    for e in cdt.undirected_edges() {
        if !e.is_constraint_edge() {
            continue;
        }
        let [va, vb] = e.vertices().map(|v| v.fix().index());
        let (a, b) = (remap[va], remap[vb]);
        if a == usize::MAX || b == usize::MAX || topo.edge(a, b).is_none() {
            continue;
        }
        let (pa, pb) = (mesh_vertices[a], mesh_vertices[b]);
        let piece = pieces
            .iter()
            .find(|s| point_segment_distance(pa, s.a, s.b) <= tol && point_segment_distance(pb, s.a, s.b) <= tol)
            .ok_or_else(|| Error::MeshingFailure("constraint edge off every layout segment".into()))?;
        let electrode = match piece.tag {
            InterfaceTag::Sm | InterfaceTag::Ma => {
                let mid = pa.midpoint(pb);
                conductors
                    .iter()
                    .find(|r| r.on_boundary(mid, tol))
                    .and_then(|r| electrode_of(&r.electrode))
            }
            _ => None,
        };
        edges.push(TaggedEdge {
            a: a.min(b),
            b: a.max(b),
            tag: piece.tag,
            sidewall: piece.sidewall,
            electrode,
        });
    }
    edges.sort_by_key(|e| (e.a, e.b));

    let mesh = Mesh {
        vertices: mesh_vertices,
        triangles,
        regions: raw_regions,
        edges,
        vertex_electrode,
        electrodes,
        corners: layout.conductor_corners(),
    };
    let problems = mesh.check();
    if !problems.is_empty() {
        return Err(Error::MeshingFailure(format!(
            "generated mesh violates {} invariants, first: {:?}",
            problems.len(),
            problems[0]
        )));
    }
    Ok(mesh)
}

/// Points along `a`-`b` (endpoints included) equidistributing `1/size`.
fn graded_points(a: Point, b: Point, size: &SizeField) -> Vec<Point> {
    let len = a.dist(b);
    let dir = b.sub(a).scale(1.0 / len);
    let at = |s: f64| a.add(dir.scale(s));

    // Sample parameters: uniform backbone plus geometric clusters around the
    // ends and around the projection of every nearby anchor.
    let mut anchors = vec![0.0, len];
    for c in &size.anchors {
        let s = c.sub(a).dot(dir);
        if s > 0.0 && s < len && point_segment_distance(*c, a, b) < len {
            anchors.push(s);
        }
    }
    let mut samples: Vec<f64> = (0..=256).map(|i| len * i as f64 / 256.0).collect();
    for &s0 in &anchors {
        let mut step = 0.25 * size.h_min;
        while step < len {
            for s in [s0 - step, s0 + step] {
                if s > 0.0 && s < len {
                    samples.push(s);
                }
            }
            step *= 1.2;
        }
    }
    samples.sort_by(f64::total_cmp);
    samples.dedup();

    let mut cumulative = Vec::with_capacity(samples.len());
    let mut total = 0.0;
    let mut prev_density = 1.0 / size.size(at(samples[0]));
    cumulative.push(0.0);
    for w in samples.windows(2) {
        let density = 1.0 / size.size(at(w[1]));
        total += 0.5 * (prev_density + density) * (w[1] - w[0]);
        cumulative.push(total);
        prev_density = density;
    }

    let n = (BOUNDARY_DENSITY * total).ceil().max(1.0) as usize;
    let mut out = Vec::with_capacity(n + 1);
    out.push(a);
    let mut j = 0;
    for k in 1..n {
        let target = total * k as f64 / n as f64;
        while cumulative[j + 1] < target {
            j += 1;
        }
        let frac = (target - cumulative[j]) / (cumulative[j + 1] - cumulative[j]);
        out.push(at(samples[j] + frac * (samples[j + 1] - samples[j])));
    }
    out.push(b);
    out
}

/// Leaf centres of a quadtree refined until each cell is no larger than the
/// local target size, minus points inside conductors or too close to a segment.
fn interior_points(
    layout: &LayoutSpec,
    size: &SizeField,
    segments: &[(Point, Point)],
    conductors: &[&crate::geometry::Region],
) -> Vec<Point> {
    let bbox = layout.bbox;
    let side = bbox.width().max(bbox.height());
    let root = Point::new(
        bbox.min.x + 0.5 * bbox.width(),
        bbox.min.y + 0.5 * bbox.height(),
    );
    let mut out = Vec::new();
    let mut stack = vec![(root, side)];
    while let Some((c, s)) = stack.pop() {
        let half = 0.5 * s;
        let cell = Rect::new(Point::new(c.x - half, c.y - half), Point::new(c.x + half, c.y + half));
        if cell.max.x <= bbox.min.x || cell.min.x >= bbox.max.x || cell.max.y <= bbox.min.y || cell.min.y >= bbox.max.y {
            continue;
        }
        if s > size.size(c) && s > 0.5 * size.h_min {
            let q = 0.25 * s;
            // Fixed child order keeps the point list deterministic.
            stack.push((Point::new(c.x + q, c.y + q), half));
            stack.push((Point::new(c.x - q, c.y + q), half));
            stack.push((Point::new(c.x + q, c.y - q), half));
            stack.push((Point::new(c.x - q, c.y - q), half));
            continue;
        }
        if !bbox.contains(c, 0.0) || conductors.iter().any(|r| r.contains(c)) {
            continue;
        }
        let clearance = BOUNDARY_CLEARANCE * s;
        let near = segments.iter().any(|&(a, b)| {
            // Cheap reject on the segment's bounding box first.
            let (lo_x, hi_x) = (a.x.min(b.x), a.x.max(b.x));
            let (lo_y, hi_y) = (a.y.min(b.y), a.y.max(b.y));
            if c.x < lo_x - clearance || c.x > hi_x + clearance || c.y < lo_y - clearance || c.y > hi_y + clearance {
                return false;
            }
            point_segment_distance(c, a, b) < clearance
        });
        if !near {
            out.push(c);
        }
    }
    out
}
