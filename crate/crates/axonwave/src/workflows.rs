//! The four experiment drivers: layer convergence study, axon simulation,
//! DtN-vs-layer cross-validation, and layer-parameter advice.
//!
//! Each workflow writes `out/<run-name>/{config.echo, fields/, tables/,
//! log.txt}` and returns a summary for the caller to print.

use crate::assembly::{
    assemble_dtn_block, assemble_volume_te, assemble_volume_tm, collect_dirichlet, ComplexSystem,
    MaterialMap, Mode,
};
use crate::config::{RunConfig, Workflow};
use crate::linsolve::solve;
use crate::mesh::{
    build_structured_mesh, build_structured_mesh_with_counts, BoundaryTag, GeometrySpec, Mesh,
    RegionTag,
};
use crate::modespec::{axial_wavenumber, kappa, pml_error_bound, suggest_chi0, PmlProfile};
use crate::postproc::{
    energy_fraction_filtered, error_against_exact_with_gradient, export_field,
    recover_electric_field,
    weighted_norms, convergence_rates, ExportFormat, RegionFilter, SolutionField,
};
use crate::specialfn::{bessel_j, hankel1};
use crate::{Complex64, Error, Result};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

/// Directory layout of one run.
pub struct RunDirs {
    pub root: PathBuf,
    pub fields: PathBuf,
    pub tables: PathBuf,
}

fn prepare_dirs(out_root: &Path, config: &RunConfig) -> Result<RunDirs> {
    let root = out_root.join(&config.name);
    let fields = root.join("fields");
    let tables = root.join("tables");
    for dir in [&root, &fields, &tables] {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    }
    let echo_path = root.join("config.echo");
    fs::write(&echo_path, config.echo())
        .map_err(|e| Error::io(echo_path.display().to_string(), e))?;
    Ok(RunDirs {
        root,
        fields,
        tables,
    })
}

fn write_log(dirs: &RunDirs, log: &str) -> Result<()> {
    let path = dirs.root.join("log.txt");
    fs::write(&path, log).map_err(|e| Error::io(path.display().to_string(), e))
}

fn write_table(dirs: &RunDirs, name: &str, content: &str) -> Result<PathBuf> {
    let path = dirs.tables.join(name);
    fs::write(&path, content).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(path)
}

/// Exact single-mode outgoing solution `r H_1(k_m r) sin(m pi z / Z)`.
fn exact_mode_solution(
    k: f64,
    z_len: f64,
    m: usize,
) -> Result<impl Fn(f64, f64) -> Complex64 + Copy> {
    let km = axial_wavenumber(k, z_len, m)?;
    let w = m as f64 * std::f64::consts::PI / z_len;
    Ok(move |r: f64, z: f64| {
        r * hankel1(1, km * r).expect("k_m r stays in the first quadrant") * (w * z).sin()
    })
}

/// Gradient of [`exact_mode_solution`]: `(r H_1(k_m r))' = k_m r H_0(k_m r)`.
fn exact_mode_gradient(
    k: f64,
    z_len: f64,
    m: usize,
) -> Result<impl Fn(f64, f64) -> (Complex64, Complex64) + Copy> {
    let km = axial_wavenumber(k, z_len, m)?;
    let w = m as f64 * std::f64::consts::PI / z_len;
    Ok(move |r: f64, z: f64| {
        let h0 = hankel1(0, km * r).expect("k_m r stays in the first quadrant");
        let h1 = hankel1(1, km * r).expect("k_m r stays in the first quadrant");
        (km * r * h0 * (w * z).sin(), w * r * h1 * (w * z).cos())
    })
}

fn zero_bc(_r: f64, _z: f64) -> Complex64 {
    Complex64::new(0.0, 0.0)
}

// ---------------------------------------------------------------------------
// Convergence study
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ConvergeLevel {
    pub h: f64,
    pub nodes: usize,
    pub weighted_l2: f64,
    pub weighted_h1: f64,
    pub plain_l2: f64,
    pub plain_h1: f64,
    pub residual: f64,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergeOutcome {
    pub levels: Vec<ConvergeLevel>,
    pub l2_slope: Option<f64>,
    pub h1_slope: Option<f64>,
}

/// Layer-truncated Dirichlet problem with the exact single-mode trace on the
/// inner radius and zero data elsewhere; errors are measured over the
/// physical region only, against the exact outgoing solution.
pub fn run_converge(config: &RunConfig, out_root: &Path) -> Result<ConvergeOutcome> {
    config.validate()?;
    if config.workflow != Workflow::Converge {
        return Err(Error::Validation("config is not a converge run".into()));
    }
    let dirs = prepare_dirs(out_root, config)?;
    let mut log = String::new();

    let wave = config.wave()?;
    let exact = exact_mode_solution(wave.k, wave.z_len, config.mode_m)?;
    let exact_grad = exact_mode_gradient(wave.k, wave.z_len, config.mode_m)?;
    let pml = config.pml_profile()?;
    let materials = config.materials.build()?;

    let mut mesh = build_structured_mesh(&config.geometry, config.mesh.nr, config.mesh.nz)?;
    let mut levels = Vec::with_capacity(config.mesh.levels);
    for level in 0..config.mesh.levels {
        let started = std::time::Instant::now();
        let (field_values, residual) =
            solve_dirichlet_mode_problem(&mesh, &materials, config.mode.into(), Some(&pml), exact)?;
        let field = SolutionField::new(&mesh, field_values, config.mode.into(), &materials)?;
        let report = error_against_exact_with_gradient(
            &field,
            wave.k,
            exact,
            exact_grad,
            RegionFilter::Physical,
        );
        let row = ConvergeLevel {
            h: report.h,
            nodes: mesh.node_count(),
            weighted_l2: report.weighted_l2,
            weighted_h1: report.weighted_h1,
            plain_l2: report.plain_l2,
            plain_h1: report.plain_h1,
            residual,
            elapsed_seconds: started.elapsed().as_secs_f64(),
        };
        let _ = writeln!(
            log,
            "level {level}: h = {:.4e}, nodes = {}, L2 = {:.6e}, H1 = {:.6e}, residual = {:.2e}, {:.2}s",
            row.h, row.nodes, row.weighted_l2, row.weighted_h1, row.residual, row.elapsed_seconds
        );
        if level + 1 == config.mesh.levels {
            export_field(&field, None, &dirs.fields.join("solution.csv"), ExportFormat::Csv)?;
            export_field(&field, None, &dirs.fields.join("solution.vtk"), ExportFormat::Vtk)?;
        }
        levels.push(row);
        if level + 1 < config.mesh.levels {
            mesh = mesh.refine_uniform();
        }
    }

    let pairs_l2: Vec<(f64, f64)> = levels.iter().map(|l| (l.h, l.weighted_l2)).collect();
    let pairs_h1: Vec<(f64, f64)> = levels.iter().map(|l| (l.h, l.weighted_h1)).collect();
    let l2_slope = convergence_rates(&pairs_l2).ok();
    let h1_slope = convergence_rates(&pairs_h1).ok();
    if let (Some(l2), Some(h1)) = (l2_slope, h1_slope) {
        let _ = writeln!(log, "fitted slopes: L2 = {l2:.3}, H1 = {h1:.3}");
    } else {
        let _ = writeln!(log, "fitted slopes: need at least two levels");
    }

    let mut csv = String::from("h,nodes,weighted_l2,weighted_h1,plain_l2,plain_h1,residual\n");
    for l in &levels {
        let _ = writeln!(
            csv,
            "{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            l.h, l.nodes, l.weighted_l2, l.weighted_h1, l.plain_l2, l.plain_h1, l.residual
        );
    }
    if let (Some(l2), Some(h1)) = (l2_slope, h1_slope) {
        let _ = writeln!(csv, "# slope_l2 = {l2:.6}, slope_h1 = {h1:.6}");
    }
    write_table(&dirs, "convergence.csv", &csv)?;
    write_log(&dirs, &log)?;

    Ok(ConvergeOutcome {
        levels,
        l2_slope,
        h1_slope,
    })
}

/// Assemble + solve the mode-trace Dirichlet problem on the given mesh:
/// exact trace on the inner boundary, zero on the left/right/outer sides.
fn solve_dirichlet_mode_problem<F>(
    mesh: &Mesh,
    materials: &MaterialMap,
    mode: Mode,
    pml: Option<&PmlProfile>,
    exact: F,
) -> Result<(Vec<Complex64>, f64)>
where
    F: Fn(f64, f64) -> Complex64,
{
    let mut system = match mode {
        Mode::Tm => assemble_volume_tm(mesh, materials, pml)?,
        Mode::Te => assemble_volume_te(mesh, materials, pml)?,
    };
    let trace = |r: f64, z: f64| exact(r, z);
    let values = collect_dirichlet(
        mesh,
        &[
            (BoundaryTag::Left, &zero_bc as &dyn Fn(f64, f64) -> Complex64),
            (BoundaryTag::RightExterior, &zero_bc),
            (BoundaryTag::Outer, &zero_bc),
            (BoundaryTag::AxisOrInner, &trace),
        ],
    );
    system.apply_dirichlet(&values)?;
    let (solution, report) = solve(&system)?;
    Ok((solution, report.relative_residual))
}

// ---------------------------------------------------------------------------
// Axon simulation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SimulateOutcome {
    pub fraction_axon: Option<f64>,
    pub fraction_myelin: Option<f64>,
    pub fraction_exterior: f64,
    /// Energy fraction of the configured radial band.
    pub fraction_band: Option<f64>,
    pub residual: f64,
    pub nodes: usize,
}

/// TE-mode axon run: incident profile on the left boundary, zero Dirichlet
/// on the exterior right boundary and the outer layer edge, natural
/// (zero-Neumann) outflow through the axon cross-section.
pub fn run_simulate(config: &RunConfig, out_root: &Path) -> Result<SimulateOutcome> {
    config.validate()?;
    if config.workflow != Workflow::Simulate {
        return Err(Error::Validation("config is not a simulate run".into()));
    }
    let dirs = prepare_dirs(out_root, config)?;
    let mut log = String::new();

    let materials = config.materials.build()?;
    let pml = config.pml_profile()?;
    let mesh = build_structured_mesh(&config.geometry, config.mesh.nr, config.mesh.nz)?;
    let incident = config
        .incident
        .as_ref()
        .expect("validated simulate config has an incident block");

    let r1 = config.geometry.axon_radius.unwrap_or(0.0);
    let profile_name = incident.profile.clone();
    let (kc, amplitude) = (incident.kc.unwrap_or(0.0), incident.amplitude);
    let left_data = move |r: f64, _z: f64| -> Complex64 {
        if profile_name == "bessel" && r < r1 {
            Complex64::new(
                -amplitude * bessel_j(1, kc * r).expect("kc r >= 0"),
                0.0,
            )
        } else {
            Complex64::new(0.0, 0.0)
        }
    };

    let mode: Mode = config.mode.into();
    let mut system = match mode {
        Mode::Tm => assemble_volume_tm(&mesh, &materials, Some(&pml))?,
        Mode::Te => assemble_volume_te(&mesh, &materials, Some(&pml))?,
    };
    let values = collect_dirichlet(
        &mesh,
        &[
            (BoundaryTag::Left, &left_data as &dyn Fn(f64, f64) -> Complex64),
            (BoundaryTag::RightExterior, &zero_bc),
            (BoundaryTag::Outer, &zero_bc),
            (BoundaryTag::AxisOrInner, &zero_bc),
        ],
    );
    system.apply_dirichlet(&values)?;
    let (solution, report) = solve(&system)?;
    let field = SolutionField::new(&mesh, solution, mode, &materials)?;

    let fraction_of = |filter: RegionFilter| energy_fraction_filtered(&field, filter).ok();
    let has_region = |tag: RegionTag| mesh.triangle_region.iter().any(|&t| t == tag);
    let fraction_axon = has_region(RegionTag::Axon)
        .then(|| fraction_of(RegionFilter::Region(RegionTag::Axon)))
        .flatten();
    let fraction_myelin = has_region(RegionTag::Myelin)
        .then(|| fraction_of(RegionFilter::Region(RegionTag::Myelin)))
        .flatten();
    let fraction_exterior =
        fraction_of(RegionFilter::Region(RegionTag::Exterior)).unwrap_or(0.0);
    let fraction_band = config
        .report_band
        .and_then(|(lo, hi)| fraction_of(RegionFilter::RadialBand(lo, hi)));

    let _ = writeln!(log, "nodes = {}, residual = {:.2e}", mesh.node_count(), report.relative_residual);
    let _ = writeln!(
        log,
        "energy fractions: axon = {fraction_axon:?}, myelin = {fraction_myelin:?}, exterior = {fraction_exterior:.6}, band = {fraction_band:?}"
    );

    // Radial decay of the field towards the coupling radius, for the log.
    let r_lo = config.geometry.axon_radius.unwrap_or(config.geometry.r_inner);
    let span = config.geometry.pml_start - r_lo;
    let mut decay = String::from("band_lo,band_hi,energy_fraction\n");
    for i in 0..4 {
        let lo = r_lo + span * i as f64 / 4.0;
        let hi = r_lo + span * (i + 1) as f64 / 4.0;
        if let Some(f) = fraction_of(RegionFilter::RadialBand(lo, hi)) {
            let _ = writeln!(decay, "{lo:.6},{hi:.6},{f:.10e}");
        }
    }
    write_table(&dirs, "radial_decay.csv", &decay)?;

    let mut fractions_csv = String::from("region,fraction\n");
    if let Some(f) = fraction_axon {
        let _ = writeln!(fractions_csv, "axon,{f:.16e}");
    }
    if let Some(f) = fraction_myelin {
        let _ = writeln!(fractions_csv, "myelin,{f:.16e}");
    }
    let _ = writeln!(fractions_csv, "exterior,{fraction_exterior:.16e}");
    if let Some(f) = fraction_band {
        let _ = writeln!(fractions_csv, "band,{f:.16e}");
    }
    write_table(&dirs, "energy_fractions.csv", &fractions_csv)?;

    let electric = if mode == Mode::Te {
        Some(recover_electric_field(&field)?)
    } else {
        None
    };
    export_field(&field, None, &dirs.fields.join("field.csv"), ExportFormat::Csv)?;
    export_field(
        &field,
        electric.as_deref(),
        &dirs.fields.join("field.vtk"),
        ExportFormat::Vtk,
    )?;
    write_log(&dirs, &log)?;

    Ok(SimulateOutcome {
        fraction_axon,
        fraction_myelin,
        fraction_exterior,
        fraction_band,
        residual: report.relative_residual,
        nodes: mesh.node_count(),
    })
}

// ---------------------------------------------------------------------------
// DtN vs layer comparison
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct CompareRow {
    pub chi0: f64,
    pub u_diff: f64,
    pub v_diff: f64,
    /// U-norm of the exact-truncation solution, for relative context.
    pub u_ref: f64,
    pub bound: f64,
}

#[derive(Debug, Clone)]
pub struct CompareOutcome {
    pub rows: Vec<CompareRow>,
    /// (truncation order, U-norm change against the base order).
    pub truncation_rows: Vec<(usize, f64)>,
    pub kappa: f64,
}

/// Solve the same single-mode scattering configuration with the exact
/// truncation (DtN on the coupling circle) and with the stretched layer, on
/// the identical physical grid, and report the discrepancy over `r <= R`.
pub fn run_compare(config: &RunConfig, out_root: &Path) -> Result<CompareOutcome> {
    config.validate()?;
    if config.workflow != Workflow::Compare {
        return Err(Error::Validation("config is not a compare run".into()));
    }
    let dirs = prepare_dirs(out_root, config)?;
    let mut log = String::new();

    let wave = config.wave()?;
    let exact = exact_mode_solution(wave.k, wave.z_len, config.mode_m)?;
    let materials = config.materials.build()?;
    let truncation = config.dtn_truncation_or_default();

    // Shared physical grid: explicit per-segment counts so the layer mesh
    // extends the DtN mesh exactly.
    let mut phys_geom = config.geometry.clone();
    phys_geom.r_outer = config.geometry.pml_start;
    let (phys_counts, z_counts) = proportional_counts(&phys_geom, config.mesh.nr, config.mesh.nz);
    let phys_width = config.geometry.pml_start - config.geometry.r_inner;
    let layer_cells = ((config.mesh.nr as f64)
        * (config.geometry.r_outer - config.geometry.pml_start)
        / phys_width)
        .ceil()
        .max(1.0) as usize;
    let mut full_counts = phys_counts.clone();
    full_counts.push(layer_cells);

    let dtn_mesh = build_structured_mesh_with_counts(&phys_geom, &phys_counts, &z_counts)?;
    let pml_mesh = build_structured_mesh_with_counts(&config.geometry, &full_counts, &z_counts)?;
    // The layer mesh must be a pure extension of the physical mesh.
    for (i, &(r, z)) in dtn_mesh.nodes.iter().enumerate() {
        let (rp, zp) = pml_mesh.nodes[i];
        if (r - rp).abs() > 1e-12 || (z - zp).abs() > 1e-12 {
            return Err(Error::InvalidGeometry(
                "physical grids of the two truncations diverged".into(),
            ));
        }
    }

    // Exact-truncation solve.
    let mode: Mode = config.mode.into();
    let dtn_solution = solve_dtn_mode_problem(
        &dtn_mesh,
        &materials,
        mode,
        &wave,
        config.geometry.pml_start,
        truncation,
        exact,
    )?;
    let dtn_field = SolutionField::new(&dtn_mesh, dtn_solution.clone(), mode, &materials)?;
    let u_ref = weighted_norms(&dtn_field, wave.k, RegionFilter::All).u_norm;
    let _ = writeln!(log, "exact truncation: M = {truncation}, |u|_U = {u_ref:.6e}");

    let kap = kappa(
        wave.k,
        wave.z_len,
        truncation.max((wave.k * wave.z_len / std::f64::consts::PI + 1.0).ceil() as usize),
    )?;

    let mut chi0s: Vec<f64> = config
        .compare
        .as_ref()
        .map(|c| c.chi0_sweep.clone())
        .unwrap_or_default();
    chi0s.push(config.chi0);
    chi0s.sort_by(f64::total_cmp);
    chi0s.dedup();

    let n_phys = dtn_mesh.node_count();
    let mut rows = Vec::with_capacity(chi0s.len());
    for &chi0 in &chi0s {
        let profile = PmlProfile::new(
            config.geometry.pml_start,
            config.geometry.r_outer,
            chi0,
        )?;
        let (pml_solution, _) =
            solve_dirichlet_mode_problem(&pml_mesh, &materials, mode, Some(&profile), exact)?;
        let diff: Vec<Complex64> = (0..n_phys)
            .map(|i| pml_solution[i] - dtn_solution[i])
            .collect();
        let diff_field = SolutionField::new(&dtn_mesh, diff, mode, &materials)?;
        let norms = weighted_norms(&diff_field, wave.k, RegionFilter::All);
        let bound = pml_error_bound(&profile, kap);
        let _ = writeln!(
            log,
            "chi0 = {chi0}: |u_dtn - u_layer|_U = {:.6e}, |.|_V = {:.6e}, bound = {:.3e}",
            norms.u_norm, norms.v_norm, bound
        );
        rows.push(CompareRow {
            chi0,
            u_diff: norms.u_norm,
            v_diff: norms.v_norm,
            u_ref,
            bound,
        });
    }

    // Truncation-order sweep of the exact truncation.
    let mut truncation_rows = Vec::new();
    if let Some(compare) = &config.compare {
        for &m in &compare.truncation_sweep {
            let other = solve_dtn_mode_problem(
                &dtn_mesh,
                &materials,
                mode,
                &wave,
                config.geometry.pml_start,
                m,
                exact,
            )?;
            let diff: Vec<Complex64> = (0..n_phys)
                .map(|i| other[i] - dtn_solution[i])
                .collect();
            let diff_field = SolutionField::new(&dtn_mesh, diff, mode, &materials)?;
            let change = weighted_norms(&diff_field, wave.k, RegionFilter::All).u_norm;
            let _ = writeln!(log, "M = {m}: |u_M - u_base|_U = {change:.6e}");
            truncation_rows.push((m, change));
        }
    }

    let mut csv = String::from("chi0,u_diff,v_diff,u_ref,bound\n");
    for row in &rows {
        let _ = writeln!(
            csv,
            "{},{:.16e},{:.16e},{:.16e},{:.16e}",
            row.chi0, row.u_diff, row.v_diff, row.u_ref, row.bound
        );
    }
    write_table(&dirs, "compare.csv", &csv)?;
    if !truncation_rows.is_empty() {
        let mut csv = String::from("truncation,u_change\n");
        for &(m, change) in &truncation_rows {
            let _ = writeln!(csv, "{m},{change:.16e}");
        }
        write_table(&dirs, "truncation.csv", &csv)?;
    }
    write_log(&dirs, &log)?;

    Ok(CompareOutcome {
        rows,
        truncation_rows,
        kappa: kap,
    })
}

/// Per-segment interval counts matching `build_structured_mesh`'s
/// proportional distribution, on the truncated (physical-only) geometry.
fn proportional_counts(geom: &GeometrySpec, nr: usize, nz: usize) -> (Vec<usize>, Vec<usize>) {
    (
        crate::mesh::distribute_intervals(&geom.r_breakpoints(), nr),
        crate::mesh::distribute_intervals(&geom.z_breakpoints(), nz),
    )
}

fn solve_dtn_mode_problem<F>(
    mesh: &Mesh,
    materials: &MaterialMap,
    mode: Mode,
    wave: &crate::modespec::WaveConfig,
    coupling_radius: f64,
    truncation: usize,
    exact: F,
) -> Result<Vec<Complex64>>
where
    F: Fn(f64, f64) -> Complex64,
{
    let mut system: ComplexSystem = match mode {
        Mode::Tm => assemble_volume_tm(mesh, materials, None)?,
        Mode::Te => assemble_volume_te(mesh, materials, None)?,
    };
    let block = assemble_dtn_block(mesh, wave, coupling_radius, truncation)?;
    block.add_to_system(&mut system);
    let trace = |r: f64, z: f64| exact(r, z);
    let values = collect_dirichlet(
        mesh,
        &[
            (BoundaryTag::Left, &zero_bc as &dyn Fn(f64, f64) -> Complex64),
            (BoundaryTag::RightExterior, &zero_bc),
            (BoundaryTag::AxisOrInner, &trace),
        ],
    );
    system.apply_dirichlet(&values)?;
    let (solution, _) = solve(&system)?;
    Ok(solution)
}

// ---------------------------------------------------------------------------
// Layer-parameter advice
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct AdviseOutcome {
    pub kappa: f64,
    pub chi0_floor: f64,
    pub suggested_chi0: f64,
    /// (chi0, thickness, bound) grid.
    pub table: Vec<(f64, f64, f64)>,
}

/// Invert the layer-truncation bound: report the admissibility floor, the
/// smallest strength meeting the target, and a bound table.
pub fn run_advise(config: &RunConfig, out_root: &Path) -> Result<AdviseOutcome> {
    config.validate()?;
    if config.workflow != Workflow::Advise {
        return Err(Error::Validation("config is not an advise run".into()));
    }
    let dirs = prepare_dirs(out_root, config)?;
    let mut log = String::new();

    let wave = config.wave()?;
    let target = config.advise.expect("validated advise config").target;
    let m_needed = (wave.k * wave.z_len / std::f64::consts::PI + 1.0).ceil() as usize;
    let kap = kappa(wave.k, wave.z_len, m_needed.max(30))?;
    let start = config.geometry.pml_start;
    let outer = config.geometry.r_outer;
    let d = outer - start;
    let chi0_floor = 1.0 / (kap * start);
    let suggested = suggest_chi0(target, start, outer, kap)?;
    let _ = writeln!(
        log,
        "kappa = {kap:.6e}, admissibility floor chi0 >= {chi0_floor:.6e}, suggested chi0 = {suggested:.6e} for target {target:.3e}"
    );

    let mut table = Vec::new();
    let mut csv = String::from("chi0,thickness,bound\n");
    for factor in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let chi0 = (suggested * factor).max(chi0_floor);
        for d_factor in [0.5, 1.0, 2.0] {
            let thickness = d * d_factor;
            let profile = PmlProfile::new(start, start + thickness, chi0)?;
            let bound = pml_error_bound(&profile, kap);
            let _ = writeln!(csv, "{chi0:.10e},{thickness:.10e},{bound:.10e}");
            table.push((chi0, thickness, bound));
        }
    }
    write_table(&dirs, "advise.csv", &csv)?;
    write_log(&dirs, &log)?;

    Ok(AdviseOutcome {
        kappa: kap,
        chi0_floor,
        suggested_chi0: suggested,
        table,
    })
}
