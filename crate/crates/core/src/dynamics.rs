//! Exact single-excitation dynamics of emitters plus bath, and vacuum Rabi
//! oscillations on resonance with a flat band.

use nalgebra::{DMatrix, DVector};

use crate::boundstate::EmitterSpec;
use crate::error::{invalid, Result};
use crate::greens::FlatBandProjector;
use crate::lattice::{LatticeModel, Site, C64};
use crate::linalg::eigh;

/// Total single-excitation Hamiltonian; lattice sites first, then one row
/// per emitter.
pub fn total_hamiltonian(model: &LatticeModel, emitters: &[EmitterSpec]) -> Result<DMatrix<C64>> {
    let ns = model.n_sites();
    let n = ns + emitters.len();
    let mut h = DMatrix::zeros(n, n);
    h.view_mut((0, 0), (ns, ns)).copy_from(&model.real_space_hamiltonian());
    for (e, em) in emitters.iter().enumerate() {
        let g = em.coupling_vector(model)?;
        let i = ns + e;
        h[(i, i)] = C64::new(em.omega0, 0.0);
        for x in 0..ns {
            h[(x, i)] = g[x];
            h[(i, x)] = g[x].conj();
        }
    }
    Ok(h)
}

#[derive(Clone, Debug)]
pub enum InitialState {
    Emitter(usize),
    Site(Site),
    /// Full vector over sites then emitters.
    Vector(DVector<C64>),
}

#[derive(Clone, Debug)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    /// `emitter_populations[t][i]`.
    pub emitter_populations: Vec<Vec<f64>>,
    pub photon_populations: Option<Vec<Vec<f64>>>,
    pub norm: Vec<f64>,
}

impl TimeSeries {
    pub fn population(&self, emitter: usize) -> Vec<f64> {
        self.emitter_populations.iter().map(|r| r[emitter]).collect()
    }

    pub fn max_norm_deviation(&self) -> f64 {
        self.norm.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Exact evolution by eigendecomposition of the full Hamiltonian.
pub fn evolve(
    model: &LatticeModel,
    emitters: &[EmitterSpec],
    initial: &InitialState,
    times: &[f64],
    record_photons: bool,
) -> Result<TimeSeries> {
    let h = total_hamiltonian(model, emitters)?;
    let ns = model.n_sites();
    let n = h.nrows();
    let psi0 = match initial {
        InitialState::Emitter(e) => {
            if *e >= emitters.len() {
                return invalid(format!("initial emitter {e} out of range"));
            }
            let mut v = DVector::zeros(n);
            v[ns + e] = C64::new(1.0, 0.0);
            v
        }
        InitialState::Site(s) => {
            let mut v = DVector::zeros(n);
            v[model.site_index(*s)] = C64::new(1.0, 0.0);
            v
        }
        InitialState::Vector(v) => {
            if v.len() != n || (v.norm() - 1.0).abs() > 1e-12 {
                return invalid("initial vector must be unit-norm over sites and emitters");
            }
            v.clone()
        }
    };
    let (vals, vecs) = eigh(h);
    let c0 = vecs.adjoint() * &psi0;
    let mut out = TimeSeries {
        times: times.to_vec(),
        emitter_populations: Vec::with_capacity(times.len()),
        photon_populations: record_photons.then(Vec::new),
        norm: Vec::with_capacity(times.len()),
    };
    for &t in times {
        let d = DVector::from_fn(n, |a, _| c0[a] * C64::from_polar(1.0, -vals[a] * t));
        let psi = &vecs * d;
        out.emitter_populations.push((ns..n).map(|i| psi[i].norm_sqr()).collect());
        if let Some(p) = out.photon_populations.as_mut() {
            p.push((0..ns).map(|i| psi[i].norm_sqr()).collect());
        }
        out.norm.push(psi.norm_squared());
    }
    Ok(out)
}

/// `Ω = g √⟨χ|P_FB|χ⟩`.
pub fn rabi_frequency(p: &FlatBandProjector<'_>, chi: &DVector<C64>, g: f64) -> f64 {
    g * p.expectation(chi).max(0.0).sqrt()
}

/// Time of the first local minimum of `P_e`, refined by a parabola through
/// the three samples around it; for `P_e = cos²(Ωt)` it is `π/(2Ω)`.
pub fn first_minimum_time(times: &[f64], pe: &[f64]) -> Result<f64> {
    for i in 1..pe.len().saturating_sub(1) {
        if pe[i] <= pe[i - 1] && pe[i] < pe[i + 1] {
            let (t0, t1, t2) = (times[i - 1], times[i], times[i + 1]);
            let (y0, y1, y2) = (pe[i - 1], pe[i], pe[i + 1]);
            let num = (t1 - t0).powi(2) * (y1 - y2) - (t1 - t2).powi(2) * (y1 - y0);
            let den = (t1 - t0) * (y1 - y2) - (t1 - t2) * (y1 - y0);
            return Ok(if den != 0.0 { t1 - 0.5 * num / den } else { t1 });
        }
    }
    invalid("population has no interior minimum on the time grid")
}

/// Rabi frequency extracted from the first population minimum.
pub fn rabi_frequency_from_dynamics(times: &[f64], pe: &[f64]) -> Result<f64> {
    Ok(std::f64::consts::FRAC_PI_2 / first_minimum_time(times, pe)?)
}
