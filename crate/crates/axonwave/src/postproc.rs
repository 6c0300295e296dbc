//! Weighted norms and errors, convergence-rate fitting, electric-field
//! recovery from the TE solution, region-wise energy fractions, and field
//! export.

use crate::assembly::{MaterialMap, Mode};
use crate::mesh::{Mesh, RegionTag};
use crate::{Complex64, Error, Result};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

/// Which triangles enter an integral.
#[derive(Debug, Clone, Copy)]
pub enum RegionFilter {
    /// Whole mesh, stretched layer included.
    All,
    /// Everything except the stretched layer (`r <= R`).
    Physical,
    /// One tagged region.
    Region(RegionTag),
    /// Triangles whose centroid radius lies in `[lo, hi]`.
    RadialBand(f64, f64),
}

impl RegionFilter {
    fn includes(&self, mesh: &Mesh, t: usize) -> bool {
        match *self {
            RegionFilter::All => true,
            RegionFilter::Physical => mesh.triangle_region[t] != RegionTag::Pml,
            RegionFilter::Region(tag) => mesh.triangle_region[t] == tag,
            RegionFilter::RadialBand(lo, hi) => {
                let (rc, _) = mesh.centroid(t);
                lo <= rc && rc <= hi
            }
        }
    }
}

/// Nodal complex solution bound to its mesh and materials.
#[derive(Debug, Clone)]
pub struct SolutionField<'a> {
    pub mesh: &'a Mesh,
    pub values: Vec<Complex64>,
    pub mode: Mode,
    pub materials: &'a MaterialMap,
}

impl<'a> SolutionField<'a> {
    pub fn new(
        mesh: &'a Mesh,
        values: Vec<Complex64>,
        mode: Mode,
        materials: &'a MaterialMap,
    ) -> Result<Self> {
        if values.len() != mesh.node_count() {
            return Err(Error::Validation(format!(
                "value count {} does not match node count {}",
                values.len(),
                mesh.node_count()
            )));
        }
        Ok(SolutionField {
            mesh,
            values,
            mode,
            materials,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct WeightedNorms {
    /// `|| v ||_U = (int |v|^2 / r)^(1/2)`.
    pub u_norm: f64,
    /// `|| v ||_V = (int |grad v|^2 / r + k^2 ||v||_U^2)^(1/2)`.
    pub v_norm: f64,
    /// Set when triangles touching the axis dominate the gradient integral,
    /// the discrete signature of an integrand whose true integral diverges
    /// at r = 0.
    pub axis_singular: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct ErrorReport {
    /// U-norm of the error (1/r weight).
    pub weighted_l2: f64,
    /// V-norm of the error.
    pub weighted_h1: f64,
    /// Unweighted L2 norm.
    pub plain_l2: f64,
    /// Unweighted `(int |grad e|^2 + k^2 |e|^2)^(1/2)`.
    pub plain_h1: f64,
    /// Longest mesh edge.
    pub h: f64,
}

/// Quadrature points of the interior 3-point rule on one triangle,
/// mirroring the assembly rule (never touches the vertices).
const BARY: [[f64; 3]; 3] = [
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
];

struct TriangleData {
    area: f64,
    /// Quadrature radii.
    rq: [f64; 3],
    /// |v|^2 at quadrature points.
    vq: [f64; 3],
    /// Constant |grad v|^2.
    grad_sq: f64,
    touches_axis: bool,
}

fn triangle_data(mesh: &Mesh, values: &[Complex64], t: usize) -> TriangleData {
    let [a, b, c] = mesh.triangles[t];
    let (ra, za) = mesh.nodes[a];
    let (rb, zb) = mesh.nodes[b];
    let (rc, zc) = mesh.nodes[c];
    let area2 = (rb - ra) * (zc - za) - (rc - ra) * (zb - za);
    let area = 0.5 * area2;
    let grads = [
        [(zb - zc) / area2, (rc - rb) / area2],
        [(zc - za) / area2, (ra - rc) / area2],
        [(za - zb) / area2, (rb - ra) / area2],
    ];
    let (va, vb, vc) = (values[a], values[b], values[c]);
    let mut gr = Complex64::new(0.0, 0.0);
    let mut gz = Complex64::new(0.0, 0.0);
    for (g, v) in grads.iter().zip([va, vb, vc]) {
        gr += g[0] * v;
        gz += g[1] * v;
    }
    let mut rq = [0.0; 3];
    let mut vq = [0.0; 3];
    for (q, bary) in BARY.iter().enumerate() {
        rq[q] = bary[0] * ra + bary[1] * rb + bary[2] * rc;
        vq[q] = (bary[0] * va + bary[1] * vb + bary[2] * vc).norm_sqr();
    }
    TriangleData {
        area,
        rq,
        vq,
        grad_sq: gr.norm_sqr() + gz.norm_sqr(),
        touches_axis: ra == 0.0 || rb == 0.0 || rc == 0.0,
    }
}

/// U-norm and V-norm of the P1 field over the filtered region.
pub fn weighted_norms(field: &SolutionField, k: f64, filter: RegionFilter) -> WeightedNorms {
    let mesh = field.mesh;
    let mut u_sq = 0.0;
    let mut grad_total = 0.0;
    let mut grad_axis = 0.0;
    for t in 0..mesh.triangle_count() {
        if !filter.includes(mesh, t) {
            continue;
        }
        let data = triangle_data(mesh, &field.values, t);
        let w = data.area / 3.0;
        let mut grad_part = 0.0;
        for q in 0..3 {
            u_sq += w * data.vq[q] / data.rq[q];
            grad_part += w * data.grad_sq / data.rq[q];
        }
        grad_total += grad_part;
        if data.touches_axis {
            grad_axis += grad_part;
        }
    }
    let axis_singular = grad_total > 0.0 && grad_axis > 0.1 * grad_total;
    WeightedNorms {
        u_norm: u_sq.sqrt(),
        v_norm: (grad_total + k * k * u_sq).sqrt(),
        axis_singular,
    }
}

/// Norms of (field - exact) over the filtered region, with the exact value
/// and gradient evaluated at the quadrature points. Unlike
/// [`error_against_exact`], the gradient error does not superconverge, so
/// this is the right estimator for H1 convergence rates.
pub fn error_against_exact_with_gradient<F, G>(
    field: &SolutionField,
    k: f64,
    exact: F,
    exact_grad: G,
    filter: RegionFilter,
) -> ErrorReport
where
    F: Fn(f64, f64) -> Complex64,
    G: Fn(f64, f64) -> (Complex64, Complex64),
{
    let mesh = field.mesh;
    let mut w_l2_sq = 0.0;
    let mut w_grad_sq = 0.0;
    let mut p_l2_sq = 0.0;
    let mut p_grad_sq = 0.0;
    for t in 0..mesh.triangle_count() {
        if !filter.includes(mesh, t) {
            continue;
        }
        let [a, b, c] = mesh.triangles[t];
        let (ra, za) = mesh.nodes[a];
        let (rb, zb) = mesh.nodes[b];
        let (rc, zc) = mesh.nodes[c];
        let area2 = (rb - ra) * (zc - za) - (rc - ra) * (zb - za);
        let grads = [
            [(zb - zc) / area2, (rc - rb) / area2],
            [(zc - za) / area2, (ra - rc) / area2],
            [(za - zb) / area2, (rb - ra) / area2],
        ];
        let vals = [field.values[a], field.values[b], field.values[c]];
        let mut gh_r = Complex64::new(0.0, 0.0);
        let mut gh_z = Complex64::new(0.0, 0.0);
        for (g, v) in grads.iter().zip(vals) {
            gh_r += g[0] * v;
            gh_z += g[1] * v;
        }
        let w = 0.5 * area2 / 3.0;
        for bary in BARY {
            let rq = bary[0] * ra + bary[1] * rb + bary[2] * rc;
            let zq = bary[0] * za + bary[1] * zb + bary[2] * zc;
            let uh = bary[0] * vals[0] + bary[1] * vals[1] + bary[2] * vals[2];
            let e_val = (uh - exact(rq, zq)).norm_sqr();
            let (gr, gz) = exact_grad(rq, zq);
            let e_grad = (gh_r - gr).norm_sqr() + (gh_z - gz).norm_sqr();
            w_l2_sq += w * e_val / rq;
            w_grad_sq += w * e_grad / rq;
            p_l2_sq += w * e_val;
            p_grad_sq += w * e_grad;
        }
    }
    ErrorReport {
        weighted_l2: w_l2_sq.sqrt(),
        weighted_h1: (w_grad_sq + k * k * w_l2_sq).sqrt(),
        plain_l2: p_l2_sq.sqrt(),
        plain_h1: (p_grad_sq + k * k * p_l2_sq).sqrt(),
        h: mesh.mesh_size(),
    }
}

/// Norms of (field - nodal interpolant of `exact`) over the filtered region.
pub fn error_against_exact<F>(
    field: &SolutionField,
    k: f64,
    exact: F,
    filter: RegionFilter,
) -> ErrorReport
where
    F: Fn(f64, f64) -> Complex64,
{
    let mesh = field.mesh;
    let diff: Vec<Complex64> = mesh
        .nodes
        .iter()
        .zip(&field.values)
        .map(|(&(r, z), &v)| v - exact(r, z))
        .collect();
    let mut w_l2_sq = 0.0;
    let mut w_grad_sq = 0.0;
    let mut p_l2_sq = 0.0;
    let mut p_grad_sq = 0.0;
    for t in 0..mesh.triangle_count() {
        if !filter.includes(mesh, t) {
            continue;
        }
        let data = triangle_data(mesh, &diff, t);
        let w = data.area / 3.0;
        for q in 0..3 {
            w_l2_sq += w * data.vq[q] / data.rq[q];
            w_grad_sq += w * data.grad_sq / data.rq[q];
            p_l2_sq += w * data.vq[q];
            p_grad_sq += w * data.grad_sq;
        }
    }
    ErrorReport {
        weighted_l2: w_l2_sq.sqrt(),
        weighted_h1: (w_grad_sq + k * k * w_l2_sq).sqrt(),
        plain_l2: p_l2_sq.sqrt(),
        plain_h1: (p_grad_sq + k * k * p_l2_sq).sqrt(),
        h: mesh.mesh_size(),
    }
}

/// Least-squares slope of log(error) against log(h).
pub fn convergence_rates(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.len() < 2 {
        return Err(Error::Validation(
            "rate fit needs at least two (h, error) pairs".into(),
        ));
    }
    for w in pairs.windows(2) {
        if w[1].0 >= w[0].0 {
            return Err(Error::Validation("h must be strictly decreasing".into()));
        }
    }
    let logs: Vec<(f64, f64)> = pairs
        .iter()
        .map(|&(h, e)| {
            if h > 0.0 && e > 0.0 {
                Ok((h.ln(), e.ln()))
            } else {
                Err(Error::Validation(format!(
                    "rate fit needs positive h and error, got ({h}, {e})"
                )))
            }
        })
        .collect::<Result<_>>()?;
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(sxy / sxx)
}

/// Piecewise-constant recovery of (E_r, E_z) at triangle centroids from the
/// TE unknown: `E_r = -(sigma - i omega eps)^{-1} r^{-1} du/dz`,
/// `E_z = (sigma - i omega eps)^{-1} r^{-1} du/dr`.
pub fn recover_electric_field(field: &SolutionField) -> Result<Vec<(Complex64, Complex64)>> {
    if field.mode != Mode::Te {
        return Err(Error::Validation(
            "electric-field recovery requires a TE solution".into(),
        ));
    }
    let mesh = field.mesh;
    let materials = field.materials;
    let mut out = Vec::with_capacity(mesh.triangle_count());
    for t in 0..mesh.triangle_count() {
        let region = mesh.triangle_region[t];
        // gamma = k^2 + i omega mu sigma = i omega mu (sigma - i omega eps).
        let denom = materials.gamma(region) / Complex64::new(0.0, materials.omega * materials.mu);
        if denom.norm() == 0.0 {
            return Err(Error::Domain(format!(
                "sigma - i omega eps vanishes in {region}"
            )));
        }
        let [a, b, c] = mesh.triangles[t];
        let (ra, za) = mesh.nodes[a];
        let (rb, zb) = mesh.nodes[b];
        let (rc, zc) = mesh.nodes[c];
        let area2 = (rb - ra) * (zc - za) - (rc - ra) * (zb - za);
        let grads = [
            [(zb - zc) / area2, (rc - rb) / area2],
            [(zc - za) / area2, (ra - rc) / area2],
            [(za - zb) / area2, (rb - ra) / area2],
        ];
        let mut dr = Complex64::new(0.0, 0.0);
        let mut dz = Complex64::new(0.0, 0.0);
        for (g, &node) in grads.iter().zip(&mesh.triangles[t]) {
            dr += g[0] * field.values[node];
            dz += g[1] * field.values[node];
        }
        let r_cent = (ra + rb + rc) / 3.0;
        if r_cent <= 0.0 {
            return Err(Error::Domain(format!(
                "centroid radius {r_cent} <= 0 in triangle {t}"
            )));
        }
        out.push((-dz / (denom * r_cent), dr / (denom * r_cent)));
    }
    Ok(out)
}

/// Fraction of the weighted field energy `int |u|^2 / r` carried by the
/// filtered region, relative to the physical region.
pub fn energy_fraction_filtered(field: &SolutionField, filter: RegionFilter) -> Result<f64> {
    let part = weighted_norms(field, 0.0, filter).u_norm.powi(2);
    let total = weighted_norms(field, 0.0, RegionFilter::Physical)
        .u_norm
        .powi(2);
    if total == 0.0 {
        return Err(Error::Domain(
            "energy fraction of an identically zero field".into(),
        ));
    }
    Ok(part / total)
}

/// Energy fraction of one tagged region.
pub fn energy_fraction(field: &SolutionField, region: RegionTag) -> Result<f64> {
    energy_fraction_filtered(field, RegionFilter::Region(region))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Vtk,
}

/// Write the field (and optional recovered E) to CSV or legacy-ASCII VTK.
pub fn export_field(
    field: &SolutionField,
    electric: Option<&[(Complex64, Complex64)]>,
    path: &Path,
    format: ExportFormat,
) -> Result<()> {
    let text = match format {
        ExportFormat::Csv => render_csv(field),
        ExportFormat::Vtk => render_vtk(field, electric),
    };
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

fn render_csv(field: &SolutionField) -> String {
    let mut out = String::from("r,z,re_u,im_u\n");
    for (&(r, z), v) in field.mesh.nodes.iter().zip(&field.values) {
        let _ = writeln!(out, "{r:.16e},{z:.16e},{:.16e},{:.16e}", v.re, v.im);
    }
    out
}

/// Read back nodal values from a CSV produced by [`render_csv`].
pub fn import_csv(path: &Path) -> Result<Vec<(f64, f64, Complex64)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let perr = |msg: String| Error::Parse {
        path: path.display().to_string(),
        msg,
    };
    let mut lines = text.lines();
    if lines.next() != Some("r,z,re_u,im_u") {
        return Err(perr("missing CSV header".into()));
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| perr(format!("row {}: {e}", lineno + 2)))?;
        if fields.len() != 4 {
            return Err(perr(format!("row {}: expected 4 columns", lineno + 2)));
        }
        rows.push((fields[0], fields[1], Complex64::new(fields[2], fields[3])));
    }
    Ok(rows)
}

fn render_vtk(field: &SolutionField, electric: Option<&[(Complex64, Complex64)]>) -> String {
    let mesh = field.mesh;
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 4.2\n");
    out.push_str("axisymmetric wave field\n");
    out.push_str("ASCII\n");
    out.push_str("DATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {} double", mesh.node_count());
    for &(r, z) in &mesh.nodes {
        let _ = writeln!(out, "{r:.16e} {z:.16e} 0.0");
    }
    let nt = mesh.triangle_count();
    let _ = writeln!(out, "CELLS {nt} {}", 4 * nt);
    for tri in &mesh.triangles {
        let _ = writeln!(out, "3 {} {} {}", tri[0], tri[1], tri[2]);
    }
    let _ = writeln!(out, "CELL_TYPES {nt}");
    for _ in 0..nt {
        out.push_str("5\n");
    }
    let _ = writeln!(out, "POINT_DATA {}", mesh.node_count());
    for (name, pick) in [
        ("re_u", 0usize),
        ("im_u", 1usize),
    ] {
        let _ = writeln!(out, "SCALARS {name} double 1");
        out.push_str("LOOKUP_TABLE default\n");
        for v in &field.values {
            let x = if pick == 0 { v.re } else { v.im };
            let _ = writeln!(out, "{x:.16e}");
        }
    }
    if let Some(e) = electric {
        let _ = writeln!(out, "CELL_DATA {nt}");
        for (name, re_part) in [("re_E", true), ("im_E", false)] {
            let _ = writeln!(out, "VECTORS {name} double");
            for &(er, ez) in e {
                let (a, b) = if re_part { (er.re, ez.re) } else { (er.im, ez.im) };
                let _ = writeln!(out, "{a:.16e} 0.0 {b:.16e}");
            }
        }
    }
    out
}
