//! Interface and bulk participation.
//!
//! The contamination layers are not part of the solve. Their field is
//! reconstructed from the field of the dielectric next to each interface:
//! the tangential component is continuous and the normal component scales
//! with the permittivity ratio. The energy in a thin layer of thickness `t`
//! is then `t` times a line integral along the interface, so participations
//! are reported per unit thickness (m⁻¹).
//!
//! The field diverges at conductor corners and the line integral is only
//! logarithmically convergent there, so arc within a cutoff radius of every
//! corner is excluded.

use crate::error::{Error, Result};
use crate::field::{FieldSolution, MaterialStack};
use crate::geometry::{Interface, InterfaceTag, Material, PerInterface, Point};
use crate::units::EPSILON_0;

/// Largest `(p/t) * t` for which the thin-layer approximation is trusted.
pub const PERTURBATIVE_LIMIT: f64 = 0.05;
pub const DEFAULT_CUTOFF: f64 = 1e-9;

/// Field in a thin layer of permittivity `eps1` on an interface with unit
/// normal `n`, given the field `e2` in the adjacent dielectric `eps2`.
pub fn transform_field(e2: Point, n: Point, eps1: f64, eps2: f64) -> Result<Point> {
    if (n.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!("interface normal must be a unit vector, |n| = {}", n.norm())));
    }
    if !(eps1 >= 1.0 && eps2 >= 1.0) {
        return Err(Error::invalid(format!("permittivities must be at least 1, got {eps1} and {eps2}")));
    }
    let normal = n.scale((eps2 / eps1) * e2.dot(n));
    // -(E x n) x n in the plane.
    let c = e2.x * n.y - e2.y * n.x;
    let tangential = Point::new(c * n.y, -c * n.x);
    Ok(normal.add(tangential))
}

/// One quadrature point on an interface: the midpoint of a mesh edge.
#[derive(Clone, Debug, PartialEq)]
pub struct InterfaceSample {
    pub interface: Interface,
    pub position: Point,
    pub tangent: Point,
    /// Unit normal pointing out of the side-2 dielectric.
    pub normal: Point,
    /// Field in the side-2 dielectric next to the edge.
    pub e2: Point,
    pub side2_eps: f64,
    /// Edge length, metres.
    pub arc_weight: f64,
    pub sidewall: bool,
    /// Conductor bounded by the edge, for SM and MA.
    pub electrode: Option<usize>,
}

impl InterfaceSample {
    pub fn endpoints(&self) -> (Point, Point) {
        let h = self.tangent.scale(0.5 * self.arc_weight);
        (self.position.sub(h), self.position.add(h))
    }
}

/// Dielectric whose field is used for each interface: the substrate for SM
/// and SA, vacuum for MA.
pub fn side2_material(interface: Interface) -> Material {
    match interface {
        Interface::Sm | Interface::Sa => Material::Substrate,
        Interface::Ma => Material::Vacuum,
    }
}

/// Collects one sample per mesh edge tagged with `interface`.
pub fn interface_samples(sol: &FieldSolution, interface: Interface) -> Result<Vec<InterfaceSample>> {
    let mesh = &sol.mesh;
    let topo = mesh.topology();
    let want = side2_material(interface);
    let tag = InterfaceTag::from(interface);
    let mut out = Vec::new();
    for e in mesh.edges.iter().filter(|e| e.tag == tag) {
        let id = topo
            .edge(e.a, e.b)
            .ok_or_else(|| Error::invalid("tagged edge is not a mesh edge"))?;
        let (t1, t2) = topo.edge_triangles[id];
        let t = [Some(t1), t2]
            .into_iter()
            .flatten()
            .find(|&t| mesh.regions[t] == want)
            .ok_or_else(|| Error::invalid(format!("{interface} edge has no {want} neighbour")))?;
        let (pa, pb) = (mesh.vertices[e.a], mesh.vertices[e.b]);
        let len = pa.dist(pb);
        let tangent = pb.sub(pa).scale(1.0 / len);
        let mut normal = Point::new(tangent.y, -tangent.x);
        let mid = pa.midpoint(pb);
        if normal.dot(mesh.centroid(t).sub(mid)) > 0.0 {
            normal = normal.scale(-1.0);
        }
        out.push(InterfaceSample {
            interface,
            position: mid,
            tangent,
            normal,
            e2: sol.field[t],
            side2_eps: sol.eps_r[t],
            arc_weight: len,
            sidewall: e.sidewall,
            electrode: e.electrode,
        });
    }
    Ok(out)
}

/// Length of `a`-`b` lying farther than `radius` from every point in `corners`.
pub fn length_outside(a: Point, b: Point, corners: &[Point], radius: f64) -> f64 {
    let len = a.dist(b);
    if radius <= 0.0 || len == 0.0 {
        return len;
    }
    let u = b.sub(a).scale(1.0 / len);
    let mut cut: Vec<(f64, f64)> = Vec::new();
    for &c in corners {
        // |a + s u - c|^2 < r^2
        let w = a.sub(c);
        let p = w.dot(u);
        let q = w.dot(w) - radius * radius;
        let disc = p * p - q;
        if disc <= 0.0 {
            continue;
        }
        let root = disc.sqrt();
        let (s0, s1) = ((-p - root).max(0.0), (-p + root).min(len));
        if s1 > s0 {
            cut.push((s0, s1));
        }
    }
    cut.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut removed = 0.0;
    let mut reach = 0.0_f64;
    for (s0, s1) in cut {
        let start = s0.max(reach);
        if s1 > start {
            removed += s1 - start;
        }
        reach = reach.max(s1);
    }
    (len - removed).max(0.0)
}

/// Thin-layer participation per unit thickness (m⁻¹) of the samples, with
/// arc closer than `cutoff` to a conductor corner excluded.
///
/// An empty sample list gives zero and a logged warning.
pub fn surface_participation(samples: &[InterfaceSample], eps1: f64, sol: &FieldSolution, cutoff: f64) -> Result<f64> {
    if !(cutoff >= 0.0) {
        return Err(Error::invalid(format!("cutoff must be non-negative, got {cutoff}")));
    }
    if !(sol.total_energy > 0.0) {
        return Err(Error::UndefinedParticipation("total stored energy is zero".into()));
    }
    if samples.is_empty() {
        log::warn!("no interface samples; participation set to zero");
        return Ok(0.0);
    }
    let corners = &sol.mesh.corners;
    let mut sum = 0.0;
    for s in samples {
        let e1 = transform_field(s.e2, s.normal, eps1, s.side2_eps)?;
        let (a, b) = s.endpoints();
        let w = if cutoff > 0.0 { length_outside(a, b, corners, cutoff) } else { s.arc_weight };
        sum += 0.5 * EPSILON_0 * eps1 * e1.dot(e1) * w;
    }
    Ok(sum / sol.total_energy)
}

/// Fraction of the stored energy inside a bulk region.
pub fn bulk_participation(sol: &FieldSolution, region: Material) -> Result<f64> {
    if !(sol.total_energy > 0.0) {
        return Err(Error::UndefinedParticipation("total stored energy is zero".into()));
    }
    match region {
        Material::Substrate => Ok(sol.energy_substrate / sol.total_energy),
        Material::Vacuum => Ok(sol.energy_vacuum / sol.total_energy),
        Material::Conductor => Err(Error::invalid("conductors store no field energy")),
    }
}

/// Participation as a function of corner cutoff: `(cutoff, p/t)` rows in the
/// order given.
pub fn cutoff_sensitivity(
    sol: &FieldSolution,
    samples: &[InterfaceSample],
    eps1: f64,
    cutoffs: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if cutoffs.is_empty() {
        return Err(Error::invalid("at least one cutoff is required"));
    }
    cutoffs
        .iter()
        .map(|&c| Ok((c, surface_participation(samples, eps1, sol, c)?)))
        .collect()
}

/// How participations are extracted from a solution.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticipationOptions {
    /// Exclusion radius around conductor corners, metres.
    pub cutoff: f64,
    /// Count trench sidewalls as substrate-air interface.
    pub sa_sidewalls: bool,
}

impl Default for ParticipationOptions {
    fn default() -> Self {
        ParticipationOptions {
            cutoff: DEFAULT_CUTOFF,
            sa_sidewalls: true,
        }
    }
}

/// Relative change of each report entry over the last refinement pass.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Convergence {
    pub p_over_t: PerInterface<f64>,
    pub p_substrate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParticipationReport {
    /// Per-unit-thickness interface participation, m⁻¹.
    pub p_over_t: PerInterface<f64>,
    pub p_substrate: f64,
    pub p_vacuum: f64,
    pub cutoff: f64,
    pub mesh_convergence: Option<Convergence>,
    pub warnings: Vec<String>,
}

impl ParticipationReport {
    pub fn convergence_from(&self, previous: &ParticipationReport) -> Convergence {
        let rel = |new: f64, old: f64| if new == old { 0.0 } else { ((new - old) / new).abs() };
        Convergence {
            p_over_t: self.p_over_t.map(|i, &v| rel(v, *previous.p_over_t.get(i))),
            p_substrate: rel(self.p_substrate, previous.p_substrate),
        }
    }
}

/// Interface and bulk participations of a solution.
pub fn participation_report(
    sol: &FieldSolution,
    materials: &MaterialStack,
    options: &ParticipationOptions,
) -> Result<ParticipationReport> {
    let mut warnings = Vec::new();
    let p_over_t = PerInterface::splat(()).try_map(|i, _| {
        let mut samples = interface_samples(sol, i)?;
        if i == Interface::Sa && !options.sa_sidewalls {
            samples.retain(|s| !s.sidewall);
        }
        if samples.is_empty() {
            warnings.push(format!("no {i} interface in the layout; participation is zero"));
        }
        let p = surface_participation(&samples, *materials.eps_contamination.get(i), sol, options.cutoff)?;
        let t = *materials.layer_thickness.get(i);
        if p * t > PERTURBATIVE_LIMIT {
            let msg = format!(
                "{i} layer holds {:.1}% of the energy; the thin-layer approximation is doubtful",
                100.0 * p * t
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
        Ok(p)
    })?;
    Ok(ParticipationReport {
        p_over_t,
        p_substrate: bulk_participation(sol, Material::Substrate)?,
        p_vacuum: bulk_participation(sol, Material::Vacuum)?,
        cutoff: options.cutoff,
        mesh_convergence: None,
        warnings,
    })
}
