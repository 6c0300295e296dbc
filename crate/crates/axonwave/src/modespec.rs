//! Axial wavenumbers, the PML stretching profile, and the layer-truncation
//! error bound used to advise PML parameters.

use crate::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Relative tolerance below which `k` is considered resonant with `m pi / Z`.
const RESONANCE_RTOL: f64 = 1e-12;

/// Wavenumber data for the separable exterior problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaveConfig {
    /// Exterior wavenumber `k = omega sqrt(eps mu)`.
    pub k: f64,
    /// Axial length of the domain.
    pub z_len: f64,
}

impl WaveConfig {
    pub fn new(k: f64, z_len: f64) -> Result<Self> {
        if !(k > 0.0) || !(z_len > 0.0) {
            return Err(Error::Validation(format!(
                "WaveConfig requires k > 0 and Z > 0, got k={k}, Z={z_len}"
            )));
        }
        Ok(Self { k, z_len })
    }
}

/// Radial PML profile: `chi(r) = chi0 (r-R)^2` for `r > R`, zero inside.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PmlProfile {
    /// Radius where the layer starts.
    pub start: f64,
    /// Outer (truncation) radius.
    pub outer: f64,
    /// Absorption strength.
    pub chi0: f64,
}

impl PmlProfile {
    pub fn new(start: f64, outer: f64, chi0: f64) -> Result<Self> {
        if !(start > 0.0) || !(outer > start) || !(chi0 >= 0.0) {
            return Err(Error::Validation(format!(
                "PmlProfile requires 0 < R < rho and chi0 >= 0, got R={start}, rho={outer}, chi0={chi0}"
            )));
        }
        Ok(Self { start, outer, chi0 })
    }

    /// Layer thickness `d = rho - R`.
    pub fn thickness(&self) -> f64 {
        self.outer - self.start
    }

    pub fn chi(&self, r: f64) -> f64 {
        if r <= self.start {
            0.0
        } else {
            self.chi0 * (r - self.start) * (r - self.start)
        }
    }

    pub fn chi_prime(&self, r: f64) -> f64 {
        if r <= self.start {
            0.0
        } else {
            2.0 * self.chi0 * (r - self.start)
        }
    }

    /// Stretched radius `r~ = r + (1+i) chi(r)`.
    pub fn stretched(&self, r: f64) -> Complex64 {
        Complex64::new(r + self.chi(r), self.chi(r))
    }

    /// Admissibility condition `kappa chi0 R >= 1` from the convergence theory.
    pub fn is_admissible(&self, kappa: f64) -> bool {
        kappa * self.chi0 * self.start >= 1.0
    }

    /// The analysis assumes `rho >= 2R`; the reference experiments themselves
    /// use thinner layers, so this is a warning flag rather than an error.
    pub fn thinner_than_analysis_assumption(&self) -> bool {
        self.outer < 2.0 * self.start
    }
}

/// Axial wavenumber `k_m = sqrt(k^2 - m^2 pi^2 / Z^2)`, on the propagating
/// (real) or evanescent (positive imaginary) branch.
pub fn axial_wavenumber(k: f64, z_len: f64, m: usize) -> Result<Complex64> {
    if !(k > 0.0) || !(z_len > 0.0) || m < 1 {
        return Err(Error::Validation(format!(
            "axial_wavenumber requires k > 0, Z > 0, m >= 1 (got k={k}, Z={z_len}, m={m})"
        )));
    }
    let cutoff = m as f64 * PI / z_len;
    if (k - cutoff).abs() <= RESONANCE_RTOL * k.max(cutoff) {
        return Err(Error::Resonance { k, m });
    }
    let delta = k * k - cutoff * cutoff;
    if delta > 0.0 {
        Ok(Complex64::new(delta.sqrt(), 0.0))
    } else {
        Ok(Complex64::new(0.0, (-delta).sqrt()))
    }
}

/// Minimum modulus `kappa = min_{1 <= m <= m_max} |k_m|`.
///
/// The minimum sits at one of the integers bracketing `kZ/pi`, but all modes
/// are scanned anyway.
pub fn kappa(k: f64, z_len: f64, m_max: usize) -> Result<f64> {
    if m_max < 1 {
        return Err(Error::Validation("kappa requires m_max >= 1".to_string()));
    }
    let needed = (k * z_len / PI + 1.0).ceil() as usize;
    if m_max < needed {
        return Err(Error::Validation(format!(
            "kappa requires m_max >= kZ/pi + 1 = {needed}, got {m_max}"
        )));
    }
    let mut min = f64::INFINITY;
    for m in 1..=m_max {
        let km = axial_wavenumber(k, z_len, m)?;
        min = min.min(km.norm());
    }
    Ok(min)
}

/// Stretching coefficients `alpha(r) = 1 + (1+i) chi'(r)` and
/// `beta(r) = r~/r`.
pub fn pml_alpha_beta(r: f64, profile: &PmlProfile) -> (Complex64, Complex64) {
    if r <= profile.start {
        return (Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0));
    }
    let cp = profile.chi_prime(r);
    let c = profile.chi(r);
    let alpha = Complex64::new(1.0 + cp, cp);
    let beta = Complex64::new(1.0 + c / r, c / r);
    (alpha, beta)
}

/// Theoretical layer-truncation factor
/// `d^6 |alpha(rho)|^4 |beta(rho)|^2 |rho~| e^{-0.8 kappa chi0 d^2}`
/// (with the unspecified constant taken as 1).
pub fn pml_error_bound(profile: &PmlProfile, kappa: f64) -> f64 {
    let rho = profile.outer;
    let d = profile.thickness();
    let (alpha, beta) = pml_alpha_beta(rho, profile);
    let stretched = profile.stretched(rho);
    d.powi(6)
        * alpha.norm().powi(4)
        * beta.norm().powi(2)
        * stretched.norm()
        * (-0.8 * kappa * profile.chi0 * d * d).exp()
}

/// Smallest `chi0` on a logarithmic grid meeting both the target bound and
/// the admissibility floor `kappa chi0 R >= 1`.
///
/// The bound's constant is unquantified, so treat the result as an
/// order-of-magnitude advisor.
pub fn suggest_chi0(target: f64, start: f64, outer: f64, kappa: f64) -> Result<f64> {
    if !(target > 0.0) {
        return Err(Error::Validation(format!(
            "suggest_chi0 requires target > 0, got {target}"
        )));
    }
    if !(kappa > 0.0) {
        return Err(Error::Validation(format!(
            "suggest_chi0 requires kappa > 0, got {kappa}"
        )));
    }
    const CHI0_MAX: f64 = 1e6;
    let floor = 1.0 / (kappa * start);
    let mut chi0 = floor;
    let step = 10f64.powf(1.0 / 50.0);
    while chi0 <= CHI0_MAX {
        let profile = PmlProfile::new(start, outer, chi0)?;
        if pml_error_bound(&profile, kappa) <= target {
            return Ok(chi0);
        }
        chi0 *= step;
    }
    Err(Error::Infeasible {
        target,
        max: CHI0_MAX,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axial_wavenumber_propagating_branch() {
        let km = axial_wavenumber(2.0, PI, 1).unwrap();
        assert!((km.re - 3f64.sqrt()).abs() < 1e-14);
        assert_eq!(km.im, 0.0);
    }

    #[test]
    fn axial_wavenumber_evanescent_branch() {
        let km = axial_wavenumber(2.0, PI, 3).unwrap();
        assert_eq!(km.re, 0.0);
        assert!((km.im - 5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn axial_wavenumber_resonance() {
        assert!(matches!(
            axial_wavenumber(2.0, PI, 2),
            Err(Error::Resonance { m: 2, .. })
        ));
    }

    #[test]
    fn axial_wavenumber_square_identity() {
        // k_m^2 = k^2 - m^2 pi^2 / Z^2 on both branches
        for &(k, z) in &[(2.0, PI), (4.5, PI), (2.0, 1.0), (13.7, 3.3)] {
            for m in 1..=20 {
                let km = match axial_wavenumber(k, z, m) {
                    Ok(v) => v,
                    Err(_) => continue,
                };
                let target = k * k - (m as f64 * PI / z).powi(2);
                let got = (km * km).re;
                assert!(
                    (got - target).abs() <= 1e-14 * target.abs().max(1.0),
                    "k={k}, Z={z}, m={m}"
                );
                assert!(km.re >= 0.0 && km.im >= 0.0);
                assert!((km.re == 0.0) != (km.im == 0.0));
            }
        }
    }

    #[test]
    fn kappa_all_evanescent() {
        let v = kappa(2.0, 1.0, 10).unwrap();
        let k1 = (PI * PI - 4.0).sqrt();
        assert!((v - k1).abs() < 1e-12);
        assert!((v - 2.4233).abs() < 1e-3);
    }

    #[test]
    fn kappa_hits_resonance() {
        assert!(kappa(5.0, PI, 20).is_err());
    }

    #[test]
    fn kappa_mixed_modes() {
        let v = kappa(4.5, PI, 20).unwrap();
        assert!((v - (20.25f64 - 16.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn alpha_beta_inside_layer_start() {
        let p = PmlProfile::new(10.0, 11.0, 40.0).unwrap();
        let (a, b) = pml_alpha_beta(5.0, &p);
        assert_eq!(a, Complex64::new(1.0, 0.0));
        assert_eq!(b, Complex64::new(1.0, 0.0));
        let (a, b) = pml_alpha_beta(10.0, &p);
        assert_eq!(a, Complex64::new(1.0, 0.0));
        assert_eq!(b, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn alpha_beta_in_layer() {
        let p = PmlProfile::new(10.0, 11.0, 40.0).unwrap();
        let (a, b) = pml_alpha_beta(10.5, &p);
        assert!((a - Complex64::new(41.0, 40.0)).norm() < 1e-12);
        assert!((b - Complex64::new(20.5 / 10.5, 10.0 / 10.5)).norm() < 1e-12);
    }

    #[test]
    fn alpha_continuous_at_layer_start() {
        let p = PmlProfile::new(10.0, 11.0, 40.0).unwrap();
        for &eps in &[1e-3, 1e-6, 1e-9] {
            let (a, b) = pml_alpha_beta(10.0 + eps, &p);
            // |alpha - 1| = sqrt(2) * 2 * chi0 * eps to first order.
            assert!((a - Complex64::new(1.0, 0.0)).norm() < 4.0 * p.chi0 * eps);
            assert!((b - Complex64::new(1.0, 0.0)).norm() < 4.0 * p.chi0 * eps);
        }
    }

    #[test]
    fn stretched_radius_identity() {
        // r beta(r) = r~ for r across the layer
        let p = PmlProfile::new(10.0, 13.0, 7.0).unwrap();
        for &r in &[0.5, 10.0, 10.7, 12.0, 13.0] {
            let (a, b) = pml_alpha_beta(r, &p);
            assert!((r * b - p.stretched(r)).norm() < 1e-14 * p.stretched(r).norm());
            assert!(a.im >= 0.0 && b.im >= 0.0);
        }
    }

    #[test]
    fn error_bound_reference_value() {
        let p = PmlProfile::new(10.0, 11.0, 40.0).unwrap();
        let bound = pml_error_bound(&p, 3f64.sqrt());
        // |alpha(11)| = |81+80i|, |beta(11)| = |51+40i|/11, |rho~| = |51+40i|
        let alpha = (81f64 * 81.0 + 80.0 * 80.0).sqrt();
        let beta = (51f64 * 51.0 + 40.0 * 40.0).sqrt() / 11.0;
        let rho_t = (51f64 * 51.0 + 40.0 * 40.0).sqrt();
        let expected =
            alpha.powi(4) * beta.powi(2) * rho_t * (-0.8 * 3f64.sqrt() * 40.0).exp();
        assert!(((bound - expected) / expected).abs() < 1e-12);
        assert!((bound / 3.3e-13 - 1.0).abs() < 0.05, "bound = {bound:.3e}");
    }

    #[test]
    fn error_bound_monotone_in_chi0_past_crossover() {
        let kappa = 3f64.sqrt();
        let mut prev = f64::INFINITY;
        let mut chi0 = 10.0;
        while chi0 <= 80.0 {
            let p = PmlProfile::new(10.0, 11.0, chi0).unwrap();
            let b = pml_error_bound(&p, kappa);
            assert!(b < prev, "chi0={chi0}");
            prev = b;
            chi0 += 2.5;
        }
    }

    #[test]
    fn error_bound_doubling_chi0_decreases() {
        let p40 = PmlProfile::new(10.0, 11.0, 40.0).unwrap();
        let p80 = PmlProfile::new(10.0, 11.0, 80.0).unwrap();
        let k = 3f64.sqrt();
        assert!(pml_error_bound(&p80, k) < pml_error_bound(&p40, k));
    }

    #[test]
    fn error_bound_vanishes_with_thickness() {
        let k = 3f64.sqrt();
        let b1 = pml_error_bound(&PmlProfile::new(10.0, 10.01, 40.0).unwrap(), k);
        let b2 = pml_error_bound(&PmlProfile::new(10.0, 10.001, 40.0).unwrap(), k);
        // d^6 scaling dominates for small d (the |alpha|^4 factor adds a bit more)
        assert!(b1 < 1e-8);
        assert!(b2 < b1 * 1e-5);
        assert!(b1 / b2 < 1e8);
    }

    #[test]
    fn suggest_chi0_example() {
        let chi0 = suggest_chi0(1e-8, 10.0, 11.0, 3f64.sqrt()).unwrap();
        assert!(chi0 <= 40.0, "chi0 = {chi0}");
        let p = PmlProfile::new(10.0, 11.0, chi0).unwrap();
        assert!(pml_error_bound(&p, 3f64.sqrt()) <= 1e-8);
        assert!(p.is_admissible(3f64.sqrt()));
    }

    #[test]
    fn suggest_chi0_admissibility_floor() {
        // Large thickness: the bound is already tiny at the floor.
        let kappa = 2.0;
        let chi0 = suggest_chi0(0.999, 10.0, 30.0, kappa).unwrap();
        assert!((chi0 - 1.0 / (kappa * 10.0)).abs() < 1e-12);
    }

    #[test]
    fn suggest_chi0_infeasible() {
        assert!(matches!(
            suggest_chi0(1e-300, 10.0, 10.01, 0.1),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn thin_layer_flagged_not_rejected() {
        let p = PmlProfile::new(10.0, 11.0, 40.0).unwrap();
        assert!(p.thinner_than_analysis_assumption());
        let p2 = PmlProfile::new(2.5, 5.5, 20.0).unwrap();
        assert!(!p2.thinner_than_analysis_assumption());
    }
}
