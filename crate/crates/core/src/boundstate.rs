//! Atom-photon bound states: pole equation, wavefunction, localization fits.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::greens::Eigensystem;
use crate::lattice::{LatticeModel, Site, C64};

/// Spectral weights below this are numerical zeros and cannot host a pole.
const WEIGHT_FLOOR: f64 = 1e-26;

/// Amplitude floor for fits, relative to the largest photonic amplitude.
pub const AMPLITUDE_FLOOR: f64 = 1e-13;

/// An emitter: transition frequency plus (site, coupling) pairs. One pair is
/// a small atom, several a giant atom.
#[derive(Clone, Debug, PartialEq)]
pub struct EmitterSpec {
    pub omega0: f64,
    pub couplings: Vec<(Site, C64)>,
}

impl EmitterSpec {
    pub fn small(site: Site, g: f64, omega0: f64) -> Self {
        EmitterSpec { omega0, couplings: vec![(site, C64::new(g, 0.0))] }
    }

    /// Coupling vector over lattice sites (entries `g_ℓ`).
    pub fn coupling_vector(&self, model: &LatticeModel) -> Result<DVector<C64>> {
        if self.couplings.is_empty() {
            return invalid("emitter has no couplings");
        }
        let mut v = DVector::zeros(model.n_sites());
        for (site, g) in &self.couplings {
            if site.sublattice >= model.q() {
                return invalid(format!("sublattice {} out of range", site.sublattice));
            }
            for d in 0..2 {
                if site.cell[d] < 0 || site.cell[d] as usize >= model.cells[d] {
                    return invalid(format!("cell {:?} outside the lattice", site.cell));
                }
            }
            v[model.site_index(*site)] += *g;
        }
        Ok(v)
    }

    /// `ḡ = ‖g‖`.
    pub fn gbar(&self, model: &LatticeModel) -> Result<f64> {
        Ok(self.coupling_vector(model)?.norm())
    }

    /// Normalized site state `χ = g/ḡ` together with `ḡ`.
    pub fn chi(&self, model: &LatticeModel) -> Result<(DVector<C64>, f64)> {
        let v = self.coupling_vector(model)?;
        let gbar = v.norm();
        if gbar == 0.0 {
            return invalid("all couplings vanish");
        }
        Ok((v / C64::new(gbar, 0.0), gbar))
    }
}

#[derive(Clone, Debug)]
pub struct BoundStateResult {
    pub omega: f64,
    /// Photonic amplitudes, jointly normalized with `atom`.
    pub photon: DVector<C64>,
    pub atom: C64,
    /// `| |c_e|² + ‖ψ‖² − 1 |`.
    pub norm_residual: f64,
    /// `|F(ω_BS)|` of the pole equation.
    pub pole_residual: f64,
    /// `‖(H_total − ω_BS)|Ψ⟩‖`.
    pub eigen_residual: f64,
}

/// `F(ω) = ω − ω₀ − ḡ² Σ_α w_α / (ω − ε_α)`, increasing between poles.
pub struct PoleFunction {
    omega0: f64,
    g2: f64,
    weights: Vec<(f64, f64)>,
}

impl PoleFunction {
    pub fn new(eig: &Eigensystem, emitter: &EmitterSpec) -> Result<Self> {
        let (chi, gbar) = emitter.chi(eig.model())?;
        let weights = eig.spectral_weights(&chi).into_iter().filter(|&(_, w)| w > WEIGHT_FLOOR).collect();
        Ok(PoleFunction { omega0: emitter.omega0, g2: gbar * gbar, weights })
    }

    pub fn self_energy(&self, omega: f64) -> f64 {
        self.weights.iter().map(|&(e, w)| w / (omega - e)).sum()
    }

    pub fn eval(&self, omega: f64) -> f64 {
        omega - self.omega0 - self.g2 * self.self_energy(omega)
    }

    /// Nearest weighted eigenvalues strictly below / above `ω₀`.
    fn gap_edges(&self) -> (Option<f64>, Option<f64>) {
        let below = self.weights.iter().map(|w| w.0).filter(|&e| e <= self.omega0).fold(None, |a: Option<f64>, e| {
            Some(a.map_or(e, |a| a.max(e)))
        });
        let above = self.weights.iter().map(|w| w.0).filter(|&e| e > self.omega0).fold(None, |a: Option<f64>, e| {
            Some(a.map_or(e, |a| a.min(e)))
        });
        (below, above)
    }
}

/// Root of the pole equation inside the gap containing `ω₀`, by bisection.
pub fn solve_pole(eig: &Eigensystem, emitter: &EmitterSpec) -> Result<f64> {
    if emitter.gbar(eig.model())? == 0.0 {
        return Ok(emitter.omega0);
    }
    let f = PoleFunction::new(eig, emitter)?;
    let guard = eig.guard();
    let (below, above) = f.gap_edges();
    for e in below.iter().chain(above.iter()) {
        if (emitter.omega0 - e).abs() < guard {
            return Err(Error::PoleProximity { omega: emitter.omega0, eigenvalue: *e });
        }
    }
    let reach = 2.0 * f.g2.sqrt() + eig.model().energy_scale();
    let mut lo = below.map_or(emitter.omega0 - reach, |e| e + 10.0 * guard);
    let mut hi = above.map_or(emitter.omega0 + reach, |e| e - 10.0 * guard);
    let (flo, fhi) = (f.eval(lo), f.eval(hi));
    if !(flo < 0.0 && fhi > 0.0) {
        return Err(Error::NoRootInGap { lo, hi });
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f.eval(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if f.eval(lo).abs() <= f.eval(hi).abs() { lo } else { hi })
}

/// Residual `|ω − ω₀ − ḡ²⟨χ|G(ω)|χ⟩|`.
pub fn pole_residual(eig: &Eigensystem, emitter: &EmitterSpec, omega: f64) -> Result<f64> {
    Ok(PoleFunction::new(eig, emitter)?.eval(omega).abs())
}

/// Unnormalized photonic part `ḡ G(ω)|χ⟩`.
pub fn dispersive_photon(eig: &Eigensystem, emitter: &EmitterSpec, omega: f64) -> Result<DVector<C64>> {
    let (chi, gbar) = emitter.chi(eig.model())?;
    Ok(eig.apply_resolvent(omega, &chi)? * C64::new(gbar, 0.0))
}

/// Bound state at `ω` (normally the output of [`solve_pole`]).
pub fn bs_wavefunction(eig: &Eigensystem, emitter: &EmitterSpec, omega: f64) -> Result<BoundStateResult> {
    let model = eig.model();
    let g = emitter.coupling_vector(model)?;
    let psi = dispersive_photon(eig, emitter, omega)?;
    let norm = (1.0 + psi.norm_squared()).sqrt();
    let photon = psi / C64::new(norm, 0.0);
    let atom = C64::new(1.0 / norm, 0.0);
    let norm_residual = (atom.norm_sqr() + photon.norm_squared() - 1.0).abs();

    let w = C64::new(omega, 0.0);
    let r_photon = model.apply_hamiltonian(&photon) + &g * atom - &photon * w;
    let r_atom = atom * (emitter.omega0 - omega) + g.dotc(&photon);
    let eigen_residual = (r_photon.norm_squared() + r_atom.norm_sqr()).sqrt();
    Ok(BoundStateResult {
        omega,
        photon,
        atom,
        norm_residual,
        pole_residual: pole_residual(eig, emitter, omega)?,
        eigen_residual,
    })
}

/// Solves the pole equation and builds the state.
pub fn bound_state(eig: &Eigensystem, emitter: &EmitterSpec) -> Result<BoundStateResult> {
    let omega = solve_pole(eig, emitter)?;
    bs_wavefunction(eig, emitter, omega)
}

/// Cells `[d_min, d_max]` used for the fit; `d_max = None` means `N/4`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    pub d_min: usize,
    pub d_max: Option<usize>,
}

impl Default for FitWindow {
    fn default() -> Self {
        FitWindow { d_min: 2, d_max: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalizationFit {
    pub lambda: f64,
    pub r_squared: f64,
    pub slope: f64,
    pub intercept: f64,
    pub points: Vec<(usize, f64)>,
}

/// Least-squares line through `(x, y)`: returns (slope, intercept, r²).
pub fn linear_fit(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, my - slope * mx, r2)
}

/// Exponential fit of `|ψ|` on `sublattice` along `axis`, walking away from
/// `reference` in the positive direction.
pub fn localization_length_fit(
    model: &LatticeModel,
    photon: &DVector<C64>,
    reference: Site,
    sublattice: usize,
    axis: usize,
    window: FitWindow,
) -> Result<LocalizationFit> {
    if axis >= model.dim || sublattice >= model.q() {
        return invalid("fit axis or sublattice out of range");
    }
    let n_axis = model.cells[axis];
    let d_max = window.d_max.unwrap_or(n_axis / 4);
    if 2 * d_max >= n_axis {
        return invalid(format!("fit window d_max={d_max} reaches the wrap-around distance N/2"));
    }
    let peak = photon.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let floor = AMPLITUDE_FLOOR * peak;
    let mut points = Vec::new();
    for d in window.d_min..=d_max {
        let mut cell = reference.cell;
        cell[axis] += d as i64;
        let amp = photon[model.site_index(Site::new(cell, sublattice))].norm();
        if !(amp > floor) {
            break;
        }
        points.push((d, amp));
    }
    if points.len() < 4 {
        return Err(Error::InsufficientData { points: points.len() });
    }
    let xy: Vec<(f64, f64)> = points.iter().map(|&(d, a)| (d as f64, a.ln())).collect();
    let (slope, intercept, r_squared) = linear_fit(&xy);
    Ok(LocalizationFit { lambda: -1.0 / slope, r_squared, slope, intercept, points })
}

/// Reference site of an emitter: its strongest coupling.
pub fn reference_site(emitter: &EmitterSpec) -> Site {
    emitter
        .couplings
        .iter()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .map(|c| c.0)
        .expect("emitter has couplings")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::*;

    #[test]
    fn single_cavity_pole_is_quadratic_root() {
        let m = build_cavity(0.0).unwrap();
        let eig = Eigensystem::new(&m);
        let em = EmitterSpec::small(Site::new([0, 0], 0), 0.1, 1.0);
        let w = solve_pole(&eig, &em).unwrap();
        let want = (1.0 + 1.04f64.sqrt()) / 2.0;
        assert!((w - want).abs() < 1e-14);
        let bs = bs_wavefunction(&eig, &em, w).unwrap();
        // ψ / c_e = g/(ω − ωc)
        let ratio = bs.photon[0] / bs.atom;
        assert!((ratio.re - 0.1 / w).abs() < 1e-14);
        assert!(bs.eigen_residual < 1e-13 && bs.norm_residual < 1e-14);
    }

    #[test]
    fn lower_dressed_state_when_detuned_below() {
        let m = build_cavity(0.0).unwrap();
        let eig = Eigensystem::new(&m);
        let em = EmitterSpec::small(Site::new([0, 0], 0), 0.1, -1.0);
        let w = solve_pole(&eig, &em).unwrap();
        assert!((w - (-1.0 - 1.04f64.sqrt()) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn zero_coupling_returns_bare_frequency() {
        let m = build_sawtooth(20, 1.0).unwrap();
        let eig = Eigensystem::new(&m);
        let em = EmitterSpec::small(Site::new([3, 0], 0), 0.0, -1.9);
        assert_eq!(solve_pole(&eig, &em).unwrap(), -1.9);
    }

    #[test]
    fn weak_coupling_shift_is_small() {
        let m = build_sawtooth(60, 1.0).unwrap();
        let eig = Eigensystem::new(&m);
        let em = EmitterSpec::small(Site::new([10, 0], 0), 1e-4, -1.9);
        let w = solve_pole(&eig, &em).unwrap();
        assert!((w + 1.9).abs() < 1e-7);
        assert!(pole_residual(&eig, &em, w).unwrap() < 1e-12);
    }

    #[test]
    fn resonant_emitter_is_rejected() {
        let m = build_sawtooth(20, 1.0).unwrap();
        let eig = Eigensystem::new(&m);
        let em = EmitterSpec::small(Site::new([0, 0], 0), 1e-3, -2.0);
        assert!(matches!(solve_pole(&eig, &em), Err(Error::PoleProximity { .. })));
    }

    #[test]
    fn emitter_validation() {
        let m = build_sawtooth(10, 1.0).unwrap();
        assert!(EmitterSpec::small(Site::new([10, 0], 0), 1.0, 0.0).coupling_vector(&m).is_err());
        assert!(EmitterSpec::small(Site::new([0, 0], 2), 1.0, 0.0).coupling_vector(&m).is_err());
        assert!(EmitterSpec { omega0: 0.0, couplings: vec![] }.coupling_vector(&m).is_err());
    }

    #[test]
    fn linear_fit_exact_line() {
        let pts: Vec<(f64, f64)> = (0..6).map(|i| (i as f64, 3.0 - 0.5 * i as f64)).collect();
        let (s, c, r2) = linear_fit(&pts);
        assert!((s + 0.5).abs() < 1e-14 && (c - 3.0).abs() < 1e-14 && (r2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn fit_needs_enough_points() {
        let m = build_chain(20, -1.0).unwrap();
        let eig = Eigensystem::new(&m);
        let em = EmitterSpec::small(Site::new([0, 0], 0), 1e-3, 2.5);
        let bs = bound_state(&eig, &em).unwrap();
        let r = localization_length_fit(&m, &bs.photon, Site::new([0, 0], 0), 0, 0, FitWindow::default());
        assert_eq!(r.unwrap().points.len(), 4);
        let r = localization_length_fit(
            &m,
            &bs.photon,
            Site::new([0, 0], 0),
            0,
            0,
            FitWindow { d_min: 2, d_max: Some(4) },
        );
        assert!(matches!(r, Err(Error::InsufficientData { points: 3 })));
        let r = localization_length_fit(
            &m,
            &bs.photon,
            Site::new([0, 0], 0),
            0,
            0,
            FitWindow { d_min: 2, d_max: Some(10) },
        );
        assert!(r.is_err());
    }
}
