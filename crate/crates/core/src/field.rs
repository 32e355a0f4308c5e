//! Electrostatic field solve on a triangulated cross-section.
//!
//! The potential is piecewise linear; the field and energy density are
//! therefore constant on each triangle. Conductor boundaries carry Dirichlet
//! values and the outer box is a natural (zero normal flux) boundary.
//! Energies are per unit length out of the cross-section plane.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{Material, PerInterface, Point};
use crate::linalg::{solve_spd, SymmetricMatrix};
use crate::mesh::Mesh;
use crate::units::{ELEMENTARY_CHARGE, EPSILON_0, PLANCK};

/// Dielectric constants, contamination-layer thicknesses and loss tangents.
#[derive(Clone, Debug, PartialEq)]
pub struct MaterialStack {
    pub eps_substrate: f64,
    /// Relative permittivity of the hypothetical contamination layer at each interface.
    pub eps_contamination: PerInterface<f64>,
    /// Contamination-layer thickness in metres.
    pub layer_thickness: PerInterface<f64>,
    pub loss_tangent: PerInterface<f64>,
    pub loss_tangent_substrate: f64,
}

impl MaterialStack {
    pub const EPS_VACUUM: f64 = 1.0;
    pub const DEFAULT_EPS_SUBSTRATE: f64 = 11.45;
    pub const DEFAULT_EPS_CONTAMINATION: f64 = 5.0;
    pub const DEFAULT_LAYER_THICKNESS: f64 = 3e-9;

    pub fn validate(&self) -> Result<()> {
        let eps = [
            ("eps_substrate", self.eps_substrate),
            ("eps_sm", self.eps_contamination.sm),
            ("eps_sa", self.eps_contamination.sa),
            ("eps_ma", self.eps_contamination.ma),
        ];
        for (name, v) in eps {
            if !(v.is_finite() && v >= 1.0) {
                return Err(Error::invalid(format!("{name} must be at least 1, got {v}")));
            }
        }
        let nonneg = [
            ("t_sm", self.layer_thickness.sm),
            ("t_sa", self.layer_thickness.sa),
            ("t_ma", self.layer_thickness.ma),
            ("tan_sm", self.loss_tangent.sm),
            ("tan_sa", self.loss_tangent.sa),
            ("tan_ma", self.loss_tangent.ma),
            ("tan_substrate", self.loss_tangent_substrate),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }

    /// Relative permittivity of a meshed region.
    pub fn permittivity(&self, material: Material) -> f64 {
        match material {
            Material::Substrate => self.eps_substrate,
            Material::Vacuum | Material::Conductor => Self::EPS_VACUUM,
        }
    }
}

impl Default for MaterialStack {
    /// Silicon substrate, 3 nm contamination layers with the conventional
    /// permittivity of 5, and no loss.
    fn default() -> Self {
        MaterialStack {
            eps_substrate: Self::DEFAULT_EPS_SUBSTRATE,
            eps_contamination: PerInterface::splat(Self::DEFAULT_EPS_CONTAMINATION),
            layer_thickness: PerInterface::splat(Self::DEFAULT_LAYER_THICKNESS),
            loss_tangent: PerInterface::splat(0.0),
            loss_tangent_substrate: 0.0,
        }
    }
}

/// Potential and derived quantities of one solve.
#[derive(Clone, Debug)]
pub struct FieldSolution {
    pub mesh: Arc<Mesh>,
    /// Relative permittivity of each triangle.
    pub eps_r: Vec<f64>,
    /// Nodal potential, volts.
    pub potential: Vec<f64>,
    /// Electric field on each triangle, V/m.
    pub field: Vec<Point>,
    /// Stored energy per unit length in each triangle, J/m.
    pub element_energy: Vec<f64>,
    pub energy_substrate: f64,
    pub energy_vacuum: f64,
    pub total_energy: f64,
    /// Applied electrode voltages by name.
    pub voltages: BTreeMap<String, f64>,
    pub relative_residual: f64,
}

/// Shape-function gradients of a triangle: `(b_i, c_i) / (2A)`.
fn gradients(p: [Point; 3]) -> ([Point; 3], f64) {
    let area = 0.5 * p[1].sub(p[0]).cross(p[2].sub(p[0]));
    let inv = 1.0 / (2.0 * area);
    let g = |i: usize| {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        Point::new((p[j].y - p[k].y) * inv, (p[k].x - p[j].x) * inv)
    };
    ([g(0), g(1), g(2)], area)
}

/// Electrode voltage of every vertex, or `None` for free vertices.
fn dirichlet_values(mesh: &Mesh, voltages: &BTreeMap<String, f64>) -> Result<Vec<Option<f64>>> {
    for name in voltages.keys() {
        if mesh.electrode_index(name).is_none() {
            return Err(Error::invalid(format!("no electrode named `{name}` in the mesh")));
        }
    }
    let mut values = Vec::with_capacity(mesh.electrodes.len());
    for name in &mesh.electrodes {
        match voltages.get(name) {
            Some(&v) if v.is_finite() => values.push(v),
            Some(&v) => return Err(Error::invalid(format!("voltage of `{name}` is not finite: {v}"))),
            None => return Err(Error::invalid(format!("electrode `{name}` has no voltage assigned"))),
        }
    }
    Ok(mesh.vertex_electrode.iter().map(|e| e.map(|i| values[i])).collect())
}

/// Solves Laplace's equation with the given electrode voltages.
pub fn solve(mesh: impl Into<Arc<Mesh>>, materials: &MaterialStack, voltages: &BTreeMap<String, f64>) -> Result<FieldSolution> {
    let mesh: Arc<Mesh> = mesh.into();
    materials.validate()?;
    let fixed = dirichlet_values(&mesh, voltages)?;
    if fixed.iter().all(Option::is_none) {
        return Err(Error::solve("no conductor vertices: the potential has no reference"));
    }

    let mut free_index = vec![usize::MAX; mesh.vertices.len()];
    let mut n_free = 0;
    for (v, f) in fixed.iter().enumerate() {
        if f.is_none() {
            free_index[v] = n_free;
            n_free += 1;
        }
    }

    let eps_r: Vec<f64> = mesh.regions.iter().map(|&m| materials.permittivity(m)).collect();
    let mut entries = Vec::with_capacity(mesh.triangles.len() * 6);
    let mut rhs = vec![0.0; n_free];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let (g, area) = gradients(mesh.triangle_points(t));
        for i in 0..3 {
            let fi = free_index[tri[i]];
            if fi == usize::MAX {
                continue;
            }
            for j in 0..3 {
                let k = eps_r[t] * area * g[i].dot(g[j]);
                match fixed[tri[j]] {
                    Some(u) => rhs[fi] -= k * u,
                    None => {
                        let fj = free_index[tri[j]];
                        if fj <= fi {
                            entries.push((fi, fj, k));
                        }
                    }
                }
            }
        }
    }

    let matrix = SymmetricMatrix::from_triplets(n_free, &entries)?;
    let sol = solve_spd(&matrix, &rhs)?;
    let potential: Vec<f64> = fixed
        .iter()
        .enumerate()
        .map(|(v, f)| f.unwrap_or_else(|| sol.x[free_index[v]]))
        .collect();
    let mut out = FieldSolution::from_potential(mesh, materials, potential, voltages.clone())?;
    out.relative_residual = sol.relative_residual;
    Ok(out)
}

impl FieldSolution {
    /// Derives fields and energies from an arbitrary nodal potential.
    pub fn from_potential(
        mesh: impl Into<Arc<Mesh>>,
        materials: &MaterialStack,
        potential: Vec<f64>,
        voltages: BTreeMap<String, f64>,
    ) -> Result<Self> {
        let mesh: Arc<Mesh> = mesh.into();
        if potential.len() != mesh.vertices.len() {
            return Err(Error::invalid("potential length does not match the mesh"));
        }
        let eps_r: Vec<f64> = mesh.regions.iter().map(|&m| materials.permittivity(m)).collect();
        let mut field = Vec::with_capacity(mesh.triangles.len());
        let mut element_energy = Vec::with_capacity(mesh.triangles.len());
        let (mut energy_substrate, mut energy_vacuum) = (0.0, 0.0);
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let (g, area) = gradients(mesh.triangle_points(t));
            let grad = (0..3).fold(Point::default(), |acc, i| acc.add(g[i].scale(potential[tri[i]])));
            let e = grad.scale(-1.0);
            let u = 0.5 * EPSILON_0 * eps_r[t] * e.dot(e) * area;
            match mesh.regions[t] {
                Material::Substrate => energy_substrate += u,
                _ => energy_vacuum += u,
            }
            field.push(e);
            element_energy.push(u);
        }
        Ok(FieldSolution {
            mesh,
            eps_r,
            potential,
            field,
            element_energy,
            energy_substrate,
            energy_vacuum,
            total_energy: energy_substrate + energy_vacuum,
            voltages,
            relative_residual: f64::NAN,
        })
    }

    /// Columnar dump of the element fields: centroid x, y, then Ex, Ey.
    pub fn field_dump(&self) -> String {
        let mut s = String::from("x_m y_m ex_v_per_m ey_v_per_m\n");
        for (t, e) in self.field.iter().enumerate() {
            let c = self.mesh.centroid(t);
            let _ = writeln!(s, "{:.8e} {:.8e} {:.8e} {:.8e}", c.x, c.y, e.x, e.y);
        }
        s
    }
}

/// Stored energy per unit length, J/m.
pub fn total_energy(sol: &FieldSolution) -> f64 {
    sol.total_energy
}

/// Capacitance per unit length, F/m, between the driven electrodes.
///
/// Electrodes at non-zero voltage are driven. With two driven electrodes the
/// drive voltage is their difference; with one it is its voltage against
/// the grounded conductors.
pub fn capacitance(sol: &FieldSolution) -> Result<f64> {
    let driven: Vec<f64> = sol.voltages.values().copied().filter(|&v| v != 0.0).collect();
    let v = match driven.as_slice() {
        [] => return Err(Error::invalid("no driven electrode: every voltage is zero")),
        [v] => v.abs(),
        [a, b] => (a - b).abs(),
        _ => {
            return Err(Error::UnsupportedConfiguration(format!(
                "capacitance needs at most two driven electrodes, found {}",
                driven.len()
            )))
        }
    };
    if v == 0.0 {
        return Err(Error::invalid("driven electrodes share one voltage"));
    }
    Ok(2.0 * sol.total_energy / (v * v))
}

/// Charging energy `e^2 / 2C` expressed as a frequency in Hz.
pub fn charging_energy(capacitance: f64) -> Result<f64> {
    if !(capacitance > 0.0) {
        return Err(Error::invalid(format!("capacitance must be positive, got {capacitance}")));
    }
    Ok(ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (2.0 * PLANCK * capacitance))
}

/// Squared flux-jump error indicator of each triangle.
///
/// Every interior edge contributes `|e|^2 [eps_r E.n]^2 / 2` to each of its
/// two triangles; edges on the outer box contribute the full flux
/// `|e|^2 (eps_r E.n)^2`, which the natural boundary condition says should
/// vanish. Conductor edges carry Dirichlet data and contribute nothing.
pub fn error_indicators(sol: &FieldSolution) -> Vec<f64> {
    let mesh = &sol.mesh;
    let topo = mesh.topology();
    let mut eta = vec![0.0; mesh.triangles.len()];
    for (e, &(a, b)) in topo.edges.iter().enumerate() {
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        let d = pb.sub(pa);
        let len2 = d.dot(d);
        let n = Point::new(d.y, -d.x).scale(1.0 / len2.sqrt());
        let flux = |t: usize| sol.eps_r[t] * sol.field[t].dot(n);
        match topo.edge_triangles[e] {
            (t1, Some(t2)) => {
                let jump = flux(t1) - flux(t2);
                let c = 0.5 * len2 * jump * jump;
                eta[t1] += c;
                eta[t2] += c;
            }
            (t, None) => {
                if mesh.vertex_electrode[a].is_some() && mesh.vertex_electrode[b].is_some() {
                    continue;
                }
                let f = flux(t);
                eta[t] += len2 * f * f;
            }
        }
    }
    eta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::parallel_plate;
    use crate::mesh::{generate_mesh, MeshControls};
    use crate::units::{ff, um};

    fn plates(layers: &[(f64, Material)]) -> Mesh {
        let layout = parallel_plate(um(20.0), layers, um(1.0)).unwrap();
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

    fn drive(v: f64) -> BTreeMap<String, f64> {
        BTreeMap::from([("bottom".to_string(), -0.5 * v), ("top".to_string(), 0.5 * v)])
    }

    #[test]
    fn uniform_field_between_plates() {
        let mesh = plates(&[(um(10.0), Material::Vacuum)]);
        let sol = solve(mesh, &MaterialStack::default(), &drive(1.0)).unwrap();
        for e in &sol.field {
            assert!((e.y + 1e5).abs() < 1e-6 * 1e5, "{e:?}");
            assert!(e.x.abs() < 1e-6 * 1e5);
        }
        let want = 0.5 * EPSILON_0 * 1e10 * um(20.0) * um(10.0);
        assert!((sol.total_energy - want).abs() < 1e-9 * want);
        assert!(sol.relative_residual <= crate::linalg::RESIDUAL_TOLERANCE);
    }

    #[test]
    fn normal_displacement_is_continuous() {
        let mesh = plates(&[(um(5.0), Material::Substrate), (um(5.0), Material::Vacuum)]);
        let sol = solve(mesh, &MaterialStack::default(), &drive(1.0)).unwrap();
        let d: Vec<f64> = sol.field.iter().zip(&sol.eps_r).map(|(e, eps)| eps * e.y).collect();
        for x in &d {
            assert!((x - d[0]).abs() < 1e-9 * d[0].abs());
        }
    }

    #[test]
    fn missing_voltage_and_unknown_electrode_are_rejected() {
        let mesh = Arc::new(plates(&[(um(10.0), Material::Vacuum)]));
        let only_top = BTreeMap::from([("top".to_string(), 1.0)]);
        assert_eq!(solve(mesh.clone(), &MaterialStack::default(), &only_top).unwrap_err().kind(), "invalid-argument");
        let mut extra = drive(1.0);
        extra.insert("nowhere".into(), 0.0);
        assert_eq!(solve(mesh, &MaterialStack::default(), &extra).unwrap_err().kind(), "invalid-argument");
    }

    #[test]
    fn charging_energy_of_transmon_capacitor() {
        let ec = charging_energy(ff(55.35)).unwrap();
        assert!((ec - 350e6).abs() < 1e6, "{ec}");
        assert!(charging_energy(0.0).is_err());
    }

    #[test]
    fn three_driven_electrodes_are_unsupported() {
        let mesh = plates(&[(um(10.0), Material::Vacuum)]);
        let mut sol = solve(mesh, &MaterialStack::default(), &drive(1.0)).unwrap();
        sol.voltages.insert("third".into(), 2.0);
        assert_eq!(capacitance(&sol).unwrap_err().kind(), "unsupported-configuration");
    }
}
