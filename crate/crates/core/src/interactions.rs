//! Photon-mediated interactions between dispersively coupled emitters.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundstate::{dispersive_photon, solve_pole, EmitterSpec};
use crate::error::{invalid, Result};
use crate::greens::Eigensystem;
use crate::lattice::C64;
use crate::linalg::eigh;

/// Energy at which each emitter's bound-state photon is evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoleChoice {
    /// Leading order: `ω = ω₀`.
    #[default]
    Bare,
    /// Self-consistent pole of the single-emitter problem.
    Exact,
}

/// How `K` enters the spin Hamiltonian. Only one convention is implemented:
/// `H_eff = Σ_{i>j} (K_ij σ_i†σ_j + h.c.) + Σ_i K_ii σ_i†σ_i`, no ½.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum Convention {
    #[default]
    OrderedPairsNoHalf,
}

#[derive(Clone, Debug)]
pub struct InteractionMatrix {
    pub emitters: Vec<EmitterSpec>,
    /// `K_ij = ⟨g_i | ψ_j⟩` with `ψ_j = ḡ_j G(ω_j)|χ_j⟩`.
    pub k: DMatrix<C64>,
    pub omegas: Vec<f64>,
    pub pole: PoleChoice,
    pub convention: Convention,
}

pub fn interaction_matrix(
    eig: &Eigensystem,
    emitters: &[EmitterSpec],
    pole: PoleChoice,
) -> Result<InteractionMatrix> {
    if emitters.is_empty() {
        return invalid("no emitters");
    }
    let model = eig.model();
    let couplings: Vec<DVector<C64>> =
        emitters.iter().map(|e| e.coupling_vector(model)).collect::<Result<_>>()?;
    let columns: Vec<(f64, DVector<C64>)> = emitters
        .par_iter()
        .map(|e| {
            let omega = match pole {
                PoleChoice::Bare => e.omega0,
                PoleChoice::Exact => solve_pole(eig, e)?,
            };
            Ok((omega, dispersive_photon(eig, e, omega)?))
        })
        .collect::<Result<_>>()?;
    let n = emitters.len();
    let k = DMatrix::from_fn(n, n, |i, j| couplings[i].dotc(&columns[j].1));
    Ok(InteractionMatrix {
        emitters: emitters.to_vec(),
        k,
        omegas: columns.into_iter().map(|c| c.0).collect(),
        pole,
        convention: Convention::OrderedPairsNoHalf,
    })
}

/// Single-excitation spin Hamiltonian from `K`: lower triangle and
/// diagonal taken from `K`, upper triangle by Hermitian conjugation.
pub fn effective_hamiltonian(k: &DMatrix<C64>) -> DMatrix<C64> {
    let n = k.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        if i > j {
            k[(i, j)]
        } else if i < j {
            k[(j, i)].conj()
        } else {
            C64::new(k[(i, i)].re, 0.0)
        }
    })
}

#[derive(Clone, Debug)]
pub struct SpinTrace {
    pub times: Vec<f64>,
    /// `amplitudes[t][n]`.
    pub amplitudes: Vec<Vec<C64>>,
}

impl SpinTrace {
    pub fn populations(&self) -> Vec<Vec<f64>> {
        self.amplitudes.iter().map(|row| row.iter().map(|c| c.norm_sqr()).collect()).collect()
    }

    pub fn norm_deviation(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|row| (row.iter().map(|c| c.norm_sqr()).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// `c(t) = e^{−iHt} c(0)` by eigendecomposition, starting from one excited
/// emitter.
pub fn spin_dynamics(h_eff: &DMatrix<C64>, initial: usize, times: &[f64]) -> Result<SpinTrace> {
    let n = h_eff.nrows();
    if initial >= n {
        return invalid(format!("initial emitter {initial} out of range"));
    }
    let herm = (h_eff - h_eff.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if herm > 1e-12 * h_eff.iter().map(|z| z.norm()).fold(1e-300, f64::max) {
        return invalid("H_eff is not Hermitian");
    }
    let (vals, vecs) = eigh(h_eff.clone());
    let c0: Vec<C64> = (0..n).map(|a| vecs[(initial, a)].conj()).collect();
    let amplitudes = times
        .iter()
        .map(|&t| {
            let d: Vec<C64> = (0..n).map(|a| c0[a] * C64::from_polar(1.0, -vals[a] * t)).collect();
            (0..n).map(|i| (0..n).map(|a| vecs[(i, a)] * d[a]).sum()).collect()
        })
        .collect();
    Ok(SpinTrace { times: times.to_vec(), amplitudes })
}
