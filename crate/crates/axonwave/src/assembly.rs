//! Assembly of the complex sesquilinear forms for the TM and TE modes on P1
//! triangles, with optional PML stretching, the truncated DtN boundary block
//! on the coupling circle, the Neumann load on the axon outflow boundary,
//! and Dirichlet elimination.

use crate::mesh::{BoundaryTag, Mesh, RegionTag};
use crate::modespec::{axial_wavenumber, pml_alpha_beta, PmlProfile, WaveConfig};
use crate::specialfn::hankel_log_derivative;
use crate::{Complex64, Error, Result};
use std::collections::{BTreeMap, HashMap};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Which azimuthal field component is solved for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// `u = r E_theta`.
    Tm,
    /// `u = r H_theta`.
    Te,
}

#[derive(Debug, Clone, Copy)]
pub struct RegionMaterial {
    /// Permittivity (relative scale is up to the caller; only the products
    /// `omega^2 eps mu` and `omega mu sigma` enter the forms).
    pub epsilon: f64,
    /// Conductivity; nonzero only in the axon core.
    pub sigma: f64,
}

/// Per-region material data plus the global frequency and permeability.
#[derive(Debug, Clone)]
pub struct MaterialMap {
    pub omega: f64,
    pub mu: f64,
    regions: HashMap<RegionTag, RegionMaterial>,
}

impl MaterialMap {
    pub fn new(
        omega: f64,
        mu: f64,
        regions: HashMap<RegionTag, RegionMaterial>,
    ) -> Result<MaterialMap> {
        if !(omega > 0.0) || !(mu > 0.0) {
            return Err(Error::Validation(format!(
                "omega and mu must be positive, got {omega}, {mu}"
            )));
        }
        let map = MaterialMap {
            omega,
            mu,
            regions,
        };
        for (&tag, mat) in &map.regions {
            if mat.epsilon < 0.0 || mat.sigma < 0.0 {
                return Err(Error::Validation(format!(
                    "negative material parameter in {tag}"
                )));
            }
            if tag != RegionTag::Axon && mat.sigma != 0.0 {
                return Err(Error::Validation(format!(
                    "conductivity must vanish outside the axon core, got sigma = {} in {tag}",
                    mat.sigma
                )));
            }
            if map.gamma(tag).norm() == 0.0 {
                return Err(Error::Validation(format!("gamma = 0 in {tag}")));
            }
        }
        Ok(map)
    }

    /// One material everywhere; handy for test domains without an axon.
    pub fn uniform(omega: f64, mu: f64, epsilon: f64) -> MaterialMap {
        let mat = RegionMaterial {
            epsilon,
            sigma: 0.0,
        };
        let regions = [
            (RegionTag::Axon, mat),
            (RegionTag::Myelin, mat),
            (RegionTag::Exterior, mat),
        ]
        .into_iter()
        .collect();
        MaterialMap::new(omega, mu, regions).expect("uniform material is always valid")
    }

    fn material(&self, region: RegionTag) -> RegionMaterial {
        // The stretched layer continues the exterior fluid.
        let key = if region == RegionTag::Pml {
            RegionTag::Exterior
        } else {
            region
        };
        self.regions.get(&key).copied().unwrap_or(RegionMaterial {
            epsilon: 0.0,
            sigma: 0.0,
        })
    }

    /// `k^2 = omega^2 eps mu` in the given region.
    pub fn k_squared(&self, region: RegionTag) -> f64 {
        self.omega * self.omega * self.material(region).epsilon * self.mu
    }

    /// `gamma = k^2 + i omega mu sigma`.
    pub fn gamma(&self, region: RegionTag) -> Complex64 {
        let mat = self.material(region);
        Complex64::new(
            self.k_squared(region),
            self.omega * self.mu * mat.sigma,
        )
    }
}

/// Assembled complex linear system in triplet form.
#[derive(Debug, Clone)]
pub struct ComplexSystem {
    pub dim: usize,
    /// Unordered COO entries; duplicates sum.
    pub triplets: Vec<(usize, usize, Complex64)>,
    pub rhs: Vec<Complex64>,
    pub dirichlet: BTreeMap<usize, Complex64>,
    pub solved: bool,
}

impl ComplexSystem {
    pub fn new(dim: usize) -> ComplexSystem {
        ComplexSystem {
            dim,
            triplets: Vec::new(),
            rhs: vec![Complex64::new(0.0, 0.0); dim],
            dirichlet: BTreeMap::new(),
            solved: false,
        }
    }

    pub fn nnz_upper_bound(&self) -> usize {
        self.triplets.len()
    }

    /// y = A x over the raw triplets.
    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.dim);
        let mut y = vec![Complex64::new(0.0, 0.0); self.dim];
        for &(i, j, a) in &self.triplets {
            y[i] += a * x[j];
        }
        y
    }

    /// Coalesced entries keyed by (row, col).
    pub fn coalesced(&self) -> HashMap<(usize, usize), Complex64> {
        let mut map = HashMap::new();
        for &(i, j, a) in &self.triplets {
            *map.entry((i, j)).or_insert(Complex64::new(0.0, 0.0)) += a;
        }
        map.retain(|_, v| v.norm() > 0.0);
        map
    }

    /// max |A_ij - A_ji| over the coalesced matrix.
    pub fn symmetry_defect(&self) -> f64 {
        let map = self.coalesced();
        let mut defect: f64 = 0.0;
        for (&(i, j), &a) in &map {
            if i < j {
                let at = map
                    .get(&(j, i))
                    .copied()
                    .unwrap_or(Complex64::new(0.0, 0.0));
                defect = defect.max((a - at).norm());
            }
        }
        defect
    }

    pub fn max_entry(&self) -> f64 {
        self.coalesced()
            .values()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    /// Record Dirichlet values and eliminate them symmetrically: constrained
    /// rows become identity rows with the boundary value on the right side;
    /// constrained columns move to the right side.
    pub fn apply_dirichlet(&mut self, values: &BTreeMap<usize, Complex64>) -> Result<()> {
        for (&node, &value) in values {
            if node >= self.dim {
                return Err(Error::Validation(format!(
                    "dirichlet node {node} out of range (dim {})",
                    self.dim
                )));
            }
            if let Some(&old) = self.dirichlet.get(&node) {
                if (old - value).norm() > 1e-12 * (1.0 + old.norm()) {
                    return Err(Error::Validation(format!(
                        "conflicting Dirichlet values at node {node}: {old} vs {value}"
                    )));
                }
            }
            self.dirichlet.insert(node, value);
        }

        let constrained = &self.dirichlet;
        let mut kept = Vec::with_capacity(self.triplets.len());
        for &(i, j, a) in &self.triplets {
            if constrained.contains_key(&i) {
                continue;
            }
            if let Some(&g) = constrained.get(&j) {
                self.rhs[i] -= a * g;
            } else {
                kept.push((i, j, a));
            }
        }
        for (&node, &value) in constrained {
            kept.push((node, node, Complex64::new(1.0, 0.0)));
            self.rhs[node] = value;
        }
        self.triplets = kept;
        Ok(())
    }
}

/// Coefficients of the form at one quadrature point:
/// `c_rr u_r v_r + c_zz u_z v_z + c_00 u v`.
fn form_coefficients(
    mode: Mode,
    r: f64,
    region: RegionTag,
    materials: &MaterialMap,
    pml: Option<&PmlProfile>,
) -> (Complex64, Complex64, Complex64) {
    let one = Complex64::new(1.0, 0.0);
    let (alpha, beta) = match pml {
        Some(profile) => pml_alpha_beta(r, profile),
        None => (one, one),
    };
    let gamma = materials.gamma(region);
    let rb = beta * r;
    match mode {
        Mode::Tm => (1.0 / (rb * alpha), alpha / rb, -alpha * gamma / rb),
        Mode::Te => {
            let g = rb * gamma;
            (1.0 / (g * alpha), alpha / g, -alpha / rb)
        }
    }
}

/// Element matrix of one triangle by the interior 3-point rule
/// (barycentric (2/3, 1/6, 1/6) permutations, weights area/3); the rule
/// never touches nodes, so the 1/r weight stays finite down to the axis.
fn element_matrix(
    mesh: &Mesh,
    t: usize,
    mode: Mode,
    materials: &MaterialMap,
    pml: Option<&PmlProfile>,
) -> Result<[[Complex64; 3]; 3]> {
    let [a, b, c] = mesh.triangles[t];
    let (ra, za) = mesh.nodes[a];
    let (rb, zb) = mesh.nodes[b];
    let (rc, zc) = mesh.nodes[c];
    let area2 = (rb - ra) * (zc - za) - (rc - ra) * (zb - za);
    let area = 0.5 * area2;
    if !(area > 0.0) {
        return Err(Error::InvalidGeometry(format!(
            "triangle {t} has non-positive area {area}"
        )));
    }

    // Constant P1 gradients: grad lambda_i = (perp of opposite edge) / 2A.
    let grads = [
        [(zb - zc) / area2, (rc - rb) / area2],
        [(zc - za) / area2, (ra - rc) / area2],
        [(za - zb) / area2, (rb - ra) / area2],
    ];
    let region = mesh.triangle_region[t];

    const BARY: [[f64; 3]; 3] = [
        [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
        [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
        [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
    ];
    let w = area / 3.0;
    let zero = Complex64::new(0.0, 0.0);
    let mut local = [[zero; 3]; 3];
    for bary in BARY {
        let rq = bary[0] * ra + bary[1] * rb + bary[2] * rc;
        if rq <= 0.0 {
            return Err(Error::Domain(format!(
                "quadrature point at r = {rq} <= 0 in triangle {t}"
            )));
        }
        let zq = bary[0] * za + bary[1] * zb + bary[2] * zc;
        let (crr, czz, c00) = form_coefficients(mode, rq, region, materials, pml);
        for i in 0..3 {
            for j in 0..3 {
                local[i][j] += w
                    * (crr * grads[i][0] * grads[j][0]
                        + czz * grads[i][1] * grads[j][1]
                        + c00 * bary[i] * bary[j]);
            }
        }
        let _ = zq;
    }
    Ok(local)
}

fn assemble_volume(
    mesh: &Mesh,
    mode: Mode,
    materials: &MaterialMap,
    pml: Option<&PmlProfile>,
) -> Result<ComplexSystem> {
    let n = mesh.triangle_count();

    #[cfg(feature = "parallel")]
    let locals: Result<Vec<[[Complex64; 3]; 3]>> = (0..n)
        .into_par_iter()
        .map(|t| element_matrix(mesh, t, mode, materials, pml))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let locals: Result<Vec<[[Complex64; 3]; 3]>> = (0..n)
        .map(|t| element_matrix(mesh, t, mode, materials, pml))
        .collect();
    let locals = locals?;

    // Sequential scatter in triangle order keeps the result independent of
    // the worker count.
    let mut system = ComplexSystem::new(mesh.node_count());
    system.triplets.reserve(9 * n);
    for (t, local) in locals.iter().enumerate() {
        let tri = mesh.triangles[t];
        for i in 0..3 {
            for j in 0..3 {
                system.triplets.push((tri[i], tri[j], local[i][j]));
            }
        }
    }
    Ok(system)
}

/// Volume part of the TM form,
/// `int 1/(r beta) [ (1/alpha) u_r v_r + alpha u_z v_z - alpha gamma u v ]`
/// (`alpha = beta = 1` without a PML).
pub fn assemble_volume_tm(
    mesh: &Mesh,
    materials: &MaterialMap,
    pml: Option<&PmlProfile>,
) -> Result<ComplexSystem> {
    assemble_volume(mesh, Mode::Tm, materials, pml)
}

/// Volume part of the TE form,
/// `int 1/(r beta gamma) [ (1/alpha) u_r v_r + alpha u_z v_z ] - alpha/(r beta) u v`.
pub fn assemble_volume_te(
    mesh: &Mesh,
    materials: &MaterialMap,
    pml: Option<&PmlProfile>,
) -> Result<ComplexSystem> {
    assemble_volume(mesh, Mode::Te, materials, pml)
}

/// Discrete truncated DtN operator on the coupling circle `r = R`.
///
/// Stores the exact integrals `c_m(i) = int phi_i(z) sin(m pi z / Z) dz`
/// of the P1 boundary traces against the first `M` sine modes, plus the
/// per-mode symbols `h(k_m R)`. The full boundary block is
/// `B_ij = (2 / (Z R^2)) sum_m (h(k_m R) + 1) c_m(i) c_m(j)`, and the
/// system subtracts `B`.
#[derive(Debug, Clone)]
pub struct DtnBlock {
    /// Nodes on the coupling circle, sorted by z.
    pub boundary_nodes: Vec<usize>,
    /// Truncation order M.
    pub truncation: usize,
    /// `h(k_m R)` for m = 1..=M.
    pub mode_symbols: Vec<Complex64>,
    /// `sine_integrals[m][p] = c_{m+1}(boundary_nodes[p])`.
    pub sine_integrals: Vec<Vec<f64>>,
    /// z coordinates of `boundary_nodes`, ascending.
    pub z_coords: Vec<f64>,
    /// Axial length Z.
    pub z_len: f64,
    /// Coupling radius R.
    pub coupling_radius: f64,
}

/// Exact `int_a^b ramp(z) sin(w z) dz` where ramp rises linearly 0 -> 1.
fn ramp_sine_integral(a: f64, b: f64, w: f64) -> f64 {
    let len = b - a;
    -((w * b).cos()) / w + ((w * b).sin() - (w * a).sin()) / (w * w * len)
}

/// Exact `int_a^b fall(z) sin(w z) dz` where fall drops linearly 1 -> 0.
fn fall_sine_integral(a: f64, b: f64, w: f64) -> f64 {
    let len = b - a;
    ((w * a).cos()) / w - ((w * b).sin() - (w * a).sin()) / (w * w * len)
}

pub fn assemble_dtn_block(
    mesh: &Mesh,
    wave: &WaveConfig,
    coupling_radius: f64,
    truncation: usize,
) -> Result<DtnBlock> {
    if truncation < 1 {
        return Err(Error::Validation(format!(
            "DtN truncation must be >= 1, got {truncation}"
        )));
    }
    let nodes = mesh.nodes_at_radius(coupling_radius);
    if nodes.len() < 2 {
        return Err(Error::InvalidGeometry(format!(
            "no boundary line found at r = {coupling_radius}"
        )));
    }
    let z_len = wave.z_len;
    let zs: Vec<f64> = nodes.iter().map(|&i| mesh.nodes[i].1).collect();
    if (zs[0]).abs() > 1e-9 || (zs[zs.len() - 1] - z_len).abs() > 1e-9 {
        return Err(Error::InvalidGeometry(
            "coupling-circle nodes do not span [0, Z]".into(),
        ));
    }

    let mut mode_symbols = Vec::with_capacity(truncation);
    let mut sine_integrals = Vec::with_capacity(truncation);
    for m in 1..=truncation {
        let km = axial_wavenumber(wave.k, wave.z_len, m)?;
        mode_symbols.push(hankel_log_derivative(km * coupling_radius)?);

        let w = m as f64 * std::f64::consts::PI / z_len;
        let mut coeffs = vec![0.0; zs.len()];
        for p in 0..zs.len() {
            // Hat function at zs[p]: rising over [zs[p-1], zs[p]], falling
            // over [zs[p], zs[p+1]].
            if p > 0 {
                coeffs[p] += ramp_sine_integral(zs[p - 1], zs[p], w);
            }
            if p + 1 < zs.len() {
                coeffs[p] += fall_sine_integral(zs[p], zs[p + 1], w);
            }
        }
        sine_integrals.push(coeffs);
    }

    Ok(DtnBlock {
        boundary_nodes: nodes,
        truncation,
        mode_symbols,
        sine_integrals,
        z_coords: zs,
        z_len,
        coupling_radius,
    })
}

impl DtnBlock {
    /// `(2/Z) sum_m s_m c_m(v)* c_m(v)` with `s_m = h(k_m R)` or
    /// `h(k_m R) + 1`, i.e. the discrete `< (T + mass?) v, v >` pairing.
    pub fn boundary_pairing(&self, v: &[Complex64], include_mass: bool) -> Complex64 {
        assert_eq!(v.len(), self.boundary_nodes.len());
        let mut total = Complex64::new(0.0, 0.0);
        for (m, coeffs) in self.sine_integrals.iter().enumerate() {
            let mut cm = Complex64::new(0.0, 0.0);
            for (p, &c) in coeffs.iter().enumerate() {
                cm += c * v[p];
            }
            let s = if include_mass {
                self.mode_symbols[m] + 1.0
            } else {
                self.mode_symbols[m]
            };
            total += s * cm.norm_sqr();
        }
        total * (2.0 / self.z_len)
    }

    /// Apply the discrete image of `T eta` to nodal boundary values:
    /// returns the sine-synthesized `(T eta)(z)` at the boundary nodes.
    pub fn apply_map(&self, eta: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(eta.len(), self.boundary_nodes.len());
        let mut out = vec![Complex64::new(0.0, 0.0); eta.len()];
        for (m, coeffs) in self.sine_integrals.iter().enumerate() {
            let mut cm = Complex64::new(0.0, 0.0);
            for (p, &c) in coeffs.iter().enumerate() {
                cm += c * eta[p];
            }
            let mode_amp = self.mode_symbols[m] * cm * (2.0 / self.z_len);
            let w = (m + 1) as f64 * std::f64::consts::PI / self.z_len;
            for (p, o) in out.iter_mut().enumerate() {
                *o += mode_amp * (w * self.z_coords[p]).sin();
            }
        }
        out
    }

    /// Subtract the boundary block from the system (sign per the weak form).
    pub fn add_to_system(&self, system: &mut ComplexSystem) {
        let nb = self.boundary_nodes.len();
        let zero = Complex64::new(0.0, 0.0);
        let mut block = vec![vec![zero; nb]; nb];
        for (m, coeffs) in self.sine_integrals.iter().enumerate() {
            let s = self.mode_symbols[m] + 1.0;
            for p in 0..nb {
                if coeffs[p] == 0.0 {
                    continue;
                }
                for q in 0..nb {
                    block[p][q] += s * coeffs[p] * coeffs[q];
                }
            }
        }
        let scale = 2.0 / (self.z_len * self.coupling_radius * self.coupling_radius);
        for p in 0..nb {
            for q in 0..nb {
                let v = block[p][q] * scale;
                if v.norm() > 0.0 {
                    system
                        .triplets
                        .push((self.boundary_nodes[p], self.boundary_nodes[q], -v));
                }
            }
        }
    }
}

/// Load vector `int_{Gamma_right^1} u_N phi_i dr` over the axon outflow
/// edges (no 1/r weight; the pairing is read literally from the weak form).
pub fn assemble_neumann_rhs<F>(mesh: &Mesh, u_n: F) -> Vec<Complex64>
where
    F: Fn(f64) -> Complex64,
{
    let mut rhs = vec![Complex64::new(0.0, 0.0); mesh.node_count()];
    for &([a, b], tag) in &mesh.boundary_edges {
        if tag != BoundaryTag::RightAxon {
            continue;
        }
        let ra = mesh.nodes[a].0;
        let rb = mesh.nodes[b].0;
        let half = 0.5 * (rb - ra);
        let mid = 0.5 * (ra + rb);
        for &(x, w) in crate::quad::gl16() {
            let r = mid + half * x;
            let lam_b = (r - ra) / (rb - ra);
            let f = u_n(r) * (w * half.abs());
            rhs[a] += f * (1.0 - lam_b);
            rhs[b] += f * lam_b;
        }
    }
    rhs
}

/// Evaluate boundary-value functions tag by tag with a fixed priority
/// (Left > RightExterior > Outer > AxisOrInner); the first tag to claim a
/// corner node wins.
pub fn collect_dirichlet(
    mesh: &Mesh,
    specs: &[(BoundaryTag, &dyn Fn(f64, f64) -> Complex64)],
) -> BTreeMap<usize, Complex64> {
    const PRIORITY: [BoundaryTag; 5] = [
        BoundaryTag::Left,
        BoundaryTag::RightExterior,
        BoundaryTag::RightAxon,
        BoundaryTag::Outer,
        BoundaryTag::AxisOrInner,
    ];
    let mut values = BTreeMap::new();
    for tag in PRIORITY {
        for (spec_tag, f) in specs {
            if *spec_tag != tag {
                continue;
            }
            for node in mesh.boundary_nodes(tag) {
                let (r, z) = mesh.nodes[node];
                values.entry(node).or_insert_with(|| f(r, z));
            }
        }
    }
    values
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured_mesh, GeometrySpec};
    use crate::quad::gauss_legendre;
    use crate::specialfn::hankel1;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn annulus(r_in: f64, r_out: f64, z_len: f64) -> GeometrySpec {
        GeometrySpec {
            z_len,
            r_inner: r_in,
            pml_start: r_out,
            r_outer: r_out,
            axon_radius: None,
            myelin_outer: None,
            myelin_z_intervals: vec![],
        }
    }

    fn single_triangle(nodes: [(f64, f64); 3]) -> Mesh {
        Mesh {
            nodes: nodes.to_vec(),
            triangles: vec![[0, 1, 2]],
            triangle_region: vec![RegionTag::Exterior],
            boundary_edges: vec![],
        }
    }

    /// High-order oracle for `int_T f dA` by a Duffy-transformed tensor rule.
    fn triangle_integral_oracle<F>(verts: [(f64, f64); 3], f: F) -> f64
    where
        F: Fn(f64, f64) -> f64,
    {
        let rule = gauss_legendre(24);
        let (p0, p1, p2) = (verts[0], verts[1], verts[2]);
        let area2 = (p1.0 - p0.0) * (p2.1 - p0.1) - (p2.0 - p0.0) * (p1.1 - p0.1);
        let mut total = 0.0;
        for &(xu, wu) in &rule {
            let u = 0.5 * (xu + 1.0);
            for &(xv, wv) in &rule {
                let v = 0.5 * (xv + 1.0);
                // Duffy: (u, v) in the square -> (l1, l2) = (u, v(1-u)).
                let l1 = u;
                let l2 = v * (1.0 - u);
                let l0 = 1.0 - l1 - l2;
                let r = l0 * p0.0 + l1 * p1.0 + l2 * p2.0;
                let z = l0 * p0.1 + l1 * p1.1 + l2 * p2.1;
                total += wu * wv * 0.25 * (1.0 - u) * f(r, z);
            }
        }
        total * area2
    }

    #[test]
    fn patch_test_against_high_order_quadrature() {
        // A small triangle far from the axis: the production degree-2 rule
        // must agree with a 24x24 tensor oracle to near machine precision.
        let verts = [(10.0, 0.3), (10.001, 0.3), (10.0, 0.3008)];
        let mesh = single_triangle(verts);
        let materials = MaterialMap::uniform(2.0, 1.0, 1.0);
        let system = assemble_volume_tm(&mesh, &materials, None).unwrap();
        let entries = system.coalesced();

        let (ra, za) = verts[0];
        let (rb, zb) = verts[1];
        let (rc, zc) = verts[2];
        let area2 = (rb - ra) * (zc - za) - (rc - ra) * (zb - za);
        let grads = [
            [(zb - zc) / area2, (rc - rb) / area2],
            [(zc - za) / area2, (ra - rc) / area2],
            [(za - zb) / area2, (rb - ra) / area2],
        ];
        let bary = |i: usize, r: f64, z: f64| -> f64 {
            let (pa, pb) = match i {
                0 => (verts[1], verts[2]),
                1 => (verts[2], verts[0]),
                _ => (verts[0], verts[1]),
            };
            ((pb.0 - pa.0) * (z - pa.1) - (r - pa.0) * (pb.1 - pa.1)) / area2
        };
        let k2 = materials.k_squared(RegionTag::Exterior);
        let mut exact = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let grad = grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1];
                exact[i][j] = triangle_integral_oracle(verts, |r, z| {
                    (grad - k2 * bary(i, r, z) * bary(j, r, z)) / r
                });
            }
        }
        let scale = exact.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..3 {
            for j in 0..3 {
                let got = entries[&(i, j)];
                assert!(got.im.abs() < 1e-18);
                assert!(
                    (got.re - exact[i][j]).abs() <= 1e-10 * scale,
                    "entry ({i},{j}): {} vs {}",
                    got.re,
                    exact[i][j]
                );
            }
        }
    }

    #[test]
    fn te_matrix_proportional_to_tm_in_uniform_lossless_medium() {
        let mesh = build_structured_mesh(&annulus(1.0, 5.0, 2.0), 6, 5).unwrap();
        let materials = MaterialMap::uniform(3.0, 1.0, 0.7);
        let k2 = materials.k_squared(RegionTag::Exterior);
        let tm = assemble_volume_tm(&mesh, &materials, None).unwrap().coalesced();
        let te = assemble_volume_te(&mesh, &materials, None).unwrap().coalesced();
        let max = tm.values().map(|v| v.norm()).fold(0.0, f64::max);
        for (key, &a) in &tm {
            let b = te.get(key).copied().unwrap_or(c(0.0, 0.0));
            assert!(
                (a - b * k2).norm() <= 1e-12 * max,
                "entry {key:?}: {a} vs {}",
                b * k2
            );
        }
    }

    #[test]
    fn system_is_complex_symmetric() {
        let geom = GeometrySpec {
            z_len: 4.0,
            r_inner: 0.0,
            pml_start: 2.0,
            r_outer: 3.0,
            axon_radius: Some(0.5),
            myelin_outer: None,
            myelin_z_intervals: vec![],
        };
        let mesh = build_structured_mesh(&geom, 9, 8).unwrap();
        let mut regions = HashMap::new();
        regions.insert(
            RegionTag::Axon,
            RegionMaterial {
                epsilon: 2.0,
                sigma: 0.5,
            },
        );
        regions.insert(
            RegionTag::Exterior,
            RegionMaterial {
                epsilon: 1.0,
                sigma: 0.0,
            },
        );
        let materials = MaterialMap::new(2.0, 1.0, regions).unwrap();
        let pml = PmlProfile::new(2.0, 3.0, 10.0).unwrap();
        for mode in [Mode::Tm, Mode::Te] {
            let mut system = assemble_volume(&mesh, mode, &materials, Some(&pml)).unwrap();
            let wave = WaveConfig { k: 2.0, z_len: 4.0 };
            // Also exercise the DtN block on an interior circle for symmetry.
            let block = assemble_dtn_block(&mesh, &wave, 2.0, 12).unwrap();
            block.add_to_system(&mut system);
            assert!(system.symmetry_defect() <= 1e-12 * system.max_entry());
        }
    }

    #[test]
    fn pml_profile_is_inert_inside_coupling_radius() {
        let mesh = build_structured_mesh(&annulus(1.0, 5.0, 2.0), 8, 6).unwrap();
        let materials = MaterialMap::uniform(2.0, 1.0, 1.0);
        let pml = PmlProfile::new(5.0, 6.0, 40.0).unwrap();
        let plain = assemble_volume_tm(&mesh, &materials, None).unwrap();
        let stretched = assemble_volume_tm(&mesh, &materials, Some(&pml)).unwrap();
        assert_eq!(plain.triplets.len(), stretched.triplets.len());
        for (a, b) in plain.triplets.iter().zip(&stretched.triplets) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn conductive_core_changes_only_core_rows() {
        let geom = GeometrySpec {
            z_len: 4.0,
            r_inner: 0.0,
            pml_start: 2.0,
            r_outer: 2.0,
            axon_radius: Some(0.5),
            myelin_outer: None,
            myelin_z_intervals: vec![],
        };
        let mesh = build_structured_mesh(&geom, 8, 8).unwrap();
        let mats = |sigma: f64| {
            let mut regions = HashMap::new();
            regions.insert(
                RegionTag::Axon,
                RegionMaterial {
                    epsilon: 1.0,
                    sigma,
                },
            );
            regions.insert(
                RegionTag::Exterior,
                RegionMaterial {
                    epsilon: 1.0,
                    sigma: 0.0,
                },
            );
            MaterialMap::new(2.0, 1.0, regions).unwrap()
        };
        let lossless = assemble_volume_tm(&mesh, &mats(0.0), None).unwrap().coalesced();
        let lossy = assemble_volume_tm(&mesh, &mats(0.8), None).unwrap().coalesced();
        let core_nodes: std::collections::HashSet<usize> = (0..mesh.triangle_count())
            .filter(|&t| mesh.triangle_region[t] == RegionTag::Axon)
            .flat_map(|t| mesh.triangles[t])
            .collect();
        for (key, &a) in &lossless {
            let b = lossy[key];
            if core_nodes.contains(&key.0) && core_nodes.contains(&key.1) {
                continue;
            }
            assert!((a - b).norm() <= 1e-15, "entry {key:?} changed");
        }
    }

    #[test]
    fn dtn_block_reproduces_single_mode_action() {
        let wave = WaveConfig {
            k: 2.5,
            z_len: PI,
        };
        let coupling = 10.0;
        let mut errs = Vec::new();
        for nz in [32usize, 64] {
            let mesh = build_structured_mesh(&annulus(1.0, coupling, PI), 4, nz).unwrap();
            let block = assemble_dtn_block(&mesh, &wave, coupling, 20).unwrap();
            let eta: Vec<Complex64> = block
                .z_coords
                .iter()
                .map(|&z| c((PI * z / PI).sin(), 0.0))
                .collect();
            let image = block.apply_map(&eta);
            let k1 = axial_wavenumber(wave.k, wave.z_len, 1).unwrap();
            let h1 = hankel_log_derivative(k1 * coupling).unwrap();
            let err = block
                .z_coords
                .iter()
                .zip(&image)
                .map(|(&z, &v)| (v - h1 * z.sin()).norm())
                .fold(0.0, f64::max);
            errs.push(err);
        }
        // Projection error is O(h^2): quartering per refinement, with slack.
        // The symbol magnitude |h(k_1 R)| ~ 23 sets the scale.
        assert!(errs[0] < 0.05, "coarse error {}", errs[0]);
        assert!(errs[1] < 0.35 * errs[0], "{errs:?}");
    }

    #[test]
    fn dtn_zero_input_zero_output() {
        let wave = WaveConfig {
            k: 2.5,
            z_len: PI,
        };
        let mesh = build_structured_mesh(&annulus(1.0, 10.0, PI), 4, 16).unwrap();
        let block = assemble_dtn_block(&mesh, &wave, 10.0, 15).unwrap();
        let eta = vec![c(0.0, 0.0); block.boundary_nodes.len()];
        for v in block.apply_map(&eta) {
            assert_eq!(v, c(0.0, 0.0));
        }
        assert_eq!(block.boundary_pairing(&eta, true), c(0.0, 0.0));
    }

    #[test]
    fn dtn_pairing_signs() {
        use rand::{Rng, SeedableRng};
        let wave = WaveConfig {
            k: 2.5,
            z_len: PI,
        };
        let mesh = build_structured_mesh(&annulus(1.0, 10.0, PI), 4, 24).unwrap();
        let block = assemble_dtn_block(&mesh, &wave, 10.0, 25).unwrap();
        let nb = block.boundary_nodes.len();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let v: Vec<Complex64> = (0..nb)
                .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let pairing = block.boundary_pairing(&v, false);
            assert!(pairing.im >= -1e-12, "Im = {}", pairing.im);
            assert!(pairing.re <= 1e-12, "Re = {}", pairing.re);
        }
    }

    #[test]
    fn dtn_truncation_tail_is_small_for_smooth_data() {
        let wave = WaveConfig {
            k: 2.5,
            z_len: PI,
        };
        let mesh = build_structured_mesh(&annulus(1.0, 10.0, PI), 4, 48).unwrap();
        let m = 25;
        let block_lo = assemble_dtn_block(&mesh, &wave, 10.0, m).unwrap();
        let block_hi = assemble_dtn_block(&mesh, &wave, 10.0, m + 10).unwrap();
        // Smooth boundary data: two low modes.
        let eta: Vec<Complex64> = block_lo
            .z_coords
            .iter()
            .map(|&z| c(z.sin() + 0.3 * (2.0 * z).sin(), 0.0))
            .collect();
        let lo = block_lo.boundary_pairing(&eta, false);
        let hi = block_hi.boundary_pairing(&eta, false);
        // Tail bound: sum_{m>M} m |eta_m|^2 (1 + m pi R / Z); the discrete
        // trace of smooth data has |eta_m| <= O(h^2) for m > M here, so the
        // difference must be tiny relative to the pairing itself.
        assert!((hi - lo).norm() <= 1e-6 * lo.norm(), "lo={lo}, hi={hi}");
    }

    #[test]
    fn neumann_rhs_examples() {
        let geom = GeometrySpec {
            z_len: 2.0,
            r_inner: 0.0,
            pml_start: 2.0,
            r_outer: 2.0,
            axon_radius: Some(0.5),
            myelin_outer: None,
            myelin_z_intervals: vec![],
        };
        let mesh = build_structured_mesh(&geom, 8, 4).unwrap();
        // Zero data.
        for v in assemble_neumann_rhs(&mesh, |_| c(0.0, 0.0)) {
            assert_eq!(v, c(0.0, 0.0));
        }
        // Constant data: each edge of length L contributes L/2 to both ends.
        let rhs = assemble_neumann_rhs(&mesh, |_| c(1.0, 0.0));
        let mut by_node: HashMap<usize, f64> = HashMap::new();
        for &([a, b], tag) in &mesh.boundary_edges {
            if tag == BoundaryTag::RightAxon {
                let len = (mesh.nodes[b].0 - mesh.nodes[a].0).abs();
                *by_node.entry(a).or_insert(0.0) += 0.5 * len;
                *by_node.entry(b).or_insert(0.0) += 0.5 * len;
            }
        }
        for (i, v) in rhs.iter().enumerate() {
            let expect = by_node.get(&i).copied().unwrap_or(0.0);
            assert!((v.re - expect).abs() < 1e-14 && v.im == 0.0, "node {i}");
        }
        // Linear data u_N = r: exact hat integrals int r phi dr.
        let rhs = assemble_neumann_rhs(&mesh, |r| c(r, 0.0));
        let mut exact: HashMap<usize, f64> = HashMap::new();
        for &([a, b], tag) in &mesh.boundary_edges {
            if tag == BoundaryTag::RightAxon {
                let (ra, rb) = (mesh.nodes[a].0, mesh.nodes[b].0);
                let len = rb - ra;
                // int_ra^rb r (rb - r)/len dr and int r (r - ra)/len dr.
                *exact.entry(a).or_insert(0.0) += len * (2.0 * ra + rb) / 6.0;
                *exact.entry(b).or_insert(0.0) += len * (ra + 2.0 * rb) / 6.0;
            }
        }
        for (i, v) in rhs.iter().enumerate() {
            let expect = exact.get(&i).copied().unwrap_or(0.0);
            assert!((v.re - expect).abs() < 1e-13, "node {i}: {} vs {expect}", v.re);
        }
    }

    #[test]
    fn dirichlet_elimination_produces_identity_rows() {
        let mesh = build_structured_mesh(&annulus(1.0, 3.0, 2.0), 4, 4).unwrap();
        let materials = MaterialMap::uniform(2.0, 1.0, 1.0);
        let mut system = assemble_volume_tm(&mesh, &materials, None).unwrap();
        let rhs_before = system.rhs.clone();
        let values: BTreeMap<usize, Complex64> = mesh
            .boundary_nodes(BoundaryTag::AxisOrInner)
            .into_iter()
            .map(|i| (i, c(0.0, 0.0)))
            .collect();
        system.apply_dirichlet(&values).unwrap();
        let entries = system.coalesced();
        for (&node, _) in &values {
            assert_eq!(entries[&(node, node)], c(1.0, 0.0));
            for (&(i, j), _) in &entries {
                assert!(!(i == node && j != node), "row {node} not identity");
                assert!(!(j == node && i != node), "column {node} not cleared");
            }
        }
        // Zero boundary values leave the rest of the rhs untouched.
        for (i, (&after, &before)) in system.rhs.iter().zip(&rhs_before).enumerate() {
            if !values.contains_key(&i) {
                assert_eq!(after, before);
            }
        }
        // Conflicting value rejected.
        let conflict: BTreeMap<usize, Complex64> =
            values.keys().take(1).map(|&i| (i, c(1.0, 0.0))).collect();
        assert!(system.apply_dirichlet(&conflict).is_err());
    }

    #[test]
    fn corner_priority_left_beats_outer_and_inner() {
        let mesh = build_structured_mesh(&annulus(1.0, 3.0, 2.0), 4, 4).unwrap();
        let values = collect_dirichlet(
            &mesh,
            &[
                (BoundaryTag::Outer, &(|_r, _z| c(2.0, 0.0)) as &dyn Fn(f64, f64) -> Complex64),
                (BoundaryTag::Left, &|_r, _z| c(1.0, 0.0)),
                (BoundaryTag::AxisOrInner, &|_r, _z| c(3.0, 0.0)),
            ],
        );
        for (&node, &v) in &values {
            let (r, z) = mesh.nodes[node];
            if z.abs() < 1e-12 {
                assert_eq!(v, c(1.0, 0.0), "corner ({r}, {z})");
            } else if (r - 3.0).abs() < 1e-12 {
                assert_eq!(v, c(2.0, 0.0));
            } else {
                assert_eq!(v, c(3.0, 0.0));
            }
        }
    }

    #[test]
    fn interior_residual_of_exact_solution_vanishes_with_h() {
        // u = r H1(k_1 r) sin(pi z / Z) solves the homogeneous TM equation;
        // interior rows of A u must shrink under refinement.
        let wave = WaveConfig {
            k: 2.5,
            z_len: PI,
        };
        let k1 = axial_wavenumber(wave.k, wave.z_len, 1).unwrap();
        let materials = MaterialMap::uniform(2.5, 1.0, 1.0);
        let mut residuals = Vec::new();
        let mut mesh = build_structured_mesh(&annulus(1.0, 6.0, PI), 20, 12).unwrap();
        for _ in 0..3 {
            let system = assemble_volume_tm(&mesh, &materials, None).unwrap();
            let u: Vec<Complex64> = mesh
                .nodes
                .iter()
                .map(|&(r, z)| r * hankel1(1, k1 * r).unwrap() * z.sin())
                .collect();
            let res = system.matvec(&u);
            let boundary: std::collections::HashSet<usize> = mesh
                .boundary_edges
                .iter()
                .flat_map(|&([a, b], _)| [a, b])
                .collect();
            let max_res = (0..mesh.node_count())
                .filter(|i| !boundary.contains(i))
                .map(|i| res[i].norm())
                .fold(0.0, f64::max);
            residuals.push(max_res);
            mesh = mesh.refine_uniform();
        }
        assert!(
            residuals[1] < 0.6 * residuals[0] && residuals[2] < 0.6 * residuals[1],
            "{residuals:?}"
        );
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn assembly_independent_of_worker_count() {
        let mesh = build_structured_mesh(&annulus(1.0, 5.0, 2.0), 16, 12).unwrap();
        let materials = MaterialMap::uniform(2.0, 1.0, 1.0);
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| assemble_volume_tm(&mesh, &materials, None).unwrap());
        let many = rayon::ThreadPoolBuilder::new()
            .num_threads(8)
            .build()
            .unwrap()
            .install(|| assemble_volume_tm(&mesh, &materials, None).unwrap());
        let max = single.max_entry();
        let a = single.coalesced();
        let b = many.coalesced();
        assert_eq!(a.len(), b.len());
        for (key, &va) in &a {
            assert!((va - b[key]).norm() <= 1e-14 * max, "entry {key:?}");
        }
    }
}
