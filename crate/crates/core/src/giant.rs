//! Giant atoms: site states, CLS-shaped bound states and their interactions.

use nalgebra::{DMatrix, DVector};

use crate::boundstate::{bound_state, BoundStateResult, EmitterSpec};
use crate::error::{invalid, Result};
use crate::flatband::{cls_set, ClsSet};
use crate::greens::{fb_projector, Eigensystem, FB_TOL};
use crate::interactions::{Convention, InteractionMatrix, PoleChoice};
use crate::lattice::{LatticeModel, Site, C64};

/// Coefficients of an exponential envelope below this are dropped.
pub const ENVELOPE_CUTOFF: f64 = 1e-12;

/// Distance from [`SiteState`] to the flat-band eigenspace that triggers a
/// warning in [`giant_interaction`].
pub const FB_MEMBERSHIP_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub enum Provenance {
    Couplings,
    Cls { cell: [i64; 2] },
    ClsSuperposition { coeffs: Vec<([i64; 2], C64)> },
    Envelope { center: [i64; 2], ell: f64 },
}

/// Normalized single-photon state encoding a coupling pattern.
#[derive(Clone, Debug)]
pub struct SiteState {
    pub amplitudes: DVector<C64>,
    pub provenance: Provenance,
}

impl SiteState {
    fn normalized(v: DVector<C64>, provenance: Provenance) -> Result<Self> {
        let n = v.norm();
        if n == 0.0 {
            return invalid("site state vanishes");
        }
        Ok(SiteState { amplitudes: v / C64::new(n, 0.0), provenance })
    }

    /// Emitter with couplings `g·χ(x)` on the support of `χ`, so `ḡ = |g|`.
    pub fn to_emitter(&self, model: &LatticeModel, omega0: f64, g: C64) -> EmitterSpec {
        let couplings = self
            .amplitudes
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm() > 0.0)
            .map(|(i, a)| (model.site_of_index(i), g * a))
            .collect();
        EmitterSpec { omega0, couplings }
    }

    pub fn overlap(&self, other: &SiteState) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }
}

/// `χ(x_ℓ) = g_ℓ/ḡ`.
pub fn site_state(model: &LatticeModel, emitter: &EmitterSpec) -> Result<SiteState> {
    let (chi, _) = emitter.chi(model)?;
    Ok(SiteState { amplitudes: chi, provenance: Provenance::Couplings })
}

pub fn cls_site_state(model: &LatticeModel, cls: &ClsSet, cell: [i64; 2]) -> Result<SiteState> {
    SiteState::normalized(cls.state(model, cell), Provenance::Cls { cell })
}

pub fn cls_superposition_state(
    model: &LatticeModel,
    cls: &ClsSet,
    coeffs: &[([i64; 2], C64)],
) -> Result<SiteState> {
    SiteState::normalized(
        cls.superposition(model, coeffs),
        Provenance::ClsSuperposition { coeffs: coeffs.to_vec() },
    )
}

/// CLS superposition with coefficients `e^{−|n − n₀|/ℓ}` (minimum-image
/// distance), truncated below [`ENVELOPE_CUTOFF`].
pub fn envelope_state(model: &LatticeModel, cls: &ClsSet, center: [i64; 2], ell: f64) -> Result<SiteState> {
    if !(ell > 0.0 && ell.is_finite()) {
        return invalid("envelope length must be positive");
    }
    let mut coeffs = Vec::new();
    for lin in 0..model.n_cells() {
        let c = model.cell_coords(lin);
        let mut r2 = 0.0;
        for d in 0..2 {
            let n = model.cells[d] as i64;
            let mut delta = (c[d] as i64 - center[d]).rem_euclid(n);
            if delta > n / 2 {
                delta -= n;
            }
            r2 += (delta * delta) as f64;
        }
        let w = (-r2.sqrt() / ell).exp();
        if w >= ENVELOPE_CUTOFF {
            coeffs.push(([c[0] as i64, c[1] as i64], C64::new(w, 0.0)));
        }
    }
    let state = cls.superposition(model, &coeffs);
    SiteState::normalized(state, Provenance::Envelope { center, ell })
}

/// Bound state of a (giant) emitter; identical to the small-atom solver.
pub fn giant_bound_state(eig: &Eigensystem, emitter: &EmitterSpec) -> Result<BoundStateResult> {
    bound_state(eig, emitter)
}

/// `K_{nn′} = g²/(ω₀ − ω_FB) ⟨χ_n|χ_{n′}⟩` for giants whose site states lie
/// in the flat-band eigenspace.
pub fn giant_interaction(
    eig: &Eigensystem,
    giants: &[SiteState],
    omega0: f64,
    g: f64,
) -> Result<InteractionMatrix> {
    if giants.is_empty() {
        return invalid("no giants");
    }
    let model = eig.model();
    let cls = cls_set(model)?;
    if omega0 == cls.omega_fb {
        return invalid("omega0 on resonance with the flat band");
    }
    let p = fb_projector(eig, cls.omega_fb, FB_TOL * model.energy_scale())?;
    for (i, s) in giants.iter().enumerate() {
        let leak = (&s.amplitudes - p.apply(&s.amplitudes)).norm();
        if leak > FB_MEMBERSHIP_TOL {
            log::warn!("giant {i} is not in the flat-band eigenspace (|(1-P)chi| = {leak:.3e})");
        }
    }
    let pref = g * g / (omega0 - cls.omega_fb);
    let n = giants.len();
    let k = DMatrix::from_fn(n, n, |i, j| giants[i].overlap(&giants[j]) * pref);
    let emitters = giants.iter().map(|s| s.to_emitter(model, omega0, C64::new(g, 0.0))).collect();
    Ok(InteractionMatrix {
        emitters,
        k,
        omegas: vec![omega0; n],
        pole: PoleChoice::Bare,
        convention: Convention::OrderedPairsNoHalf,
    })
}

/// Small-atom site state on one site.
pub fn point_state(model: &LatticeModel, site: Site) -> SiteState {
    let mut v = DVector::zeros(model.n_sites());
    v[model.site_index(site)] = C64::new(1.0, 0.0);
    SiteState { amplitudes: v, provenance: Provenance::Couplings }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::*;

    #[test]
    fn small_atom_state_is_a_site() {
        let m = build_sawtooth(8, 1.0).unwrap();
        let em = EmitterSpec::small(Site::new([2, 0], 1), 0.3, 0.0);
        let s = site_state(&m, &em).unwrap();
        assert_eq!(s.amplitudes[5], C64::new(1.0, 0.0));
        assert!((s.amplitudes.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_equal_couplings() {
        let m = build_chain(8, 1.0).unwrap();
        let em = EmitterSpec {
            omega0: 3.0,
            couplings: vec![(Site::new([1, 0], 0), C64::new(0.2, 0.0)), (Site::new([4, 0], 0), C64::new(0.2, 0.0))],
        };
        let s = site_state(&m, &em).unwrap();
        let h = 0.5f64.sqrt();
        assert!((s.amplitudes[1].re - h).abs() < 1e-15 && (s.amplitudes[4].re - h).abs() < 1e-15);
    }

    #[test]
    fn cls_couplings_reproduce_cls() {
        let m = build_sawtooth(10, 1.0).unwrap();
        let cls = cls_set(&m).unwrap();
        let g = 0.01;
        let s2 = 0.5 * 2f64.sqrt();
        let em = EmitterSpec {
            omega0: -1.9,
            couplings: vec![
                (Site::new([4, 0], 0), C64::new(0.5 * g, 0.0)),
                (Site::new([3, 0], 0), C64::new(0.5 * g, 0.0)),
                (Site::new([4, 0], 1), C64::new(-s2 * g, 0.0)),
            ],
        };
        let s = site_state(&m, &em).unwrap();
        let phi = cls_site_state(&m, &cls, [4, 0]).unwrap();
        assert!(s.overlap(&phi).norm() > 1.0 - 1e-14);
        assert!((em.gbar(&m).unwrap() - g).abs() < 1e-17);
    }

    #[test]
    fn envelope_truncation_and_norm() {
        let m = build_sawtooth(40, 1.0).unwrap();
        let cls = cls_set(&m).unwrap();
        let s = envelope_state(&m, &cls, [20, 0], 1.5).unwrap();
        assert!((s.amplitudes.norm() - 1.0).abs() < 1e-14);
        let a = |c: i64| s.amplitudes[m.site_index(Site::new([c, 0], 1))].norm();
        assert!((a(21) / a(20) - (-1.0f64 / 1.5).exp()).abs() < 1e-12);
        assert!(envelope_state(&m, &cls, [0, 0], 0.0).is_err());
    }
}
