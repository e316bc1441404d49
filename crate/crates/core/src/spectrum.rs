//! Band structures, flat-band detection and a broadened density of states.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::lattice::{LatticeModel, C64};
use crate::linalg::eigh;

#[derive(Clone, Debug)]
pub struct BandStructure {
    pub k_grid: Vec<[f64; 2]>,
    /// `bands[m][ik]`, ascending in `m` at every k.
    pub bands: Vec<Vec<f64>>,
    /// Bloch eigenvectors as columns, one matrix per k.
    pub vectors: Vec<DMatrix<C64>>,
}

impl BandStructure {
    pub fn n_bands(&self) -> usize {
        self.bands.len()
    }

    pub fn band_min(&self, m: usize) -> f64 {
        self.bands[m].iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn band_max(&self, m: usize) -> f64 {
        self.bands[m].iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FlatBandInfo {
    pub band: usize,
    pub energy: f64,
    pub bandwidth: f64,
    /// Distance to the band below (0 when touching); `None` for the lowest band.
    pub gap_below: Option<f64>,
    pub gap_above: Option<f64>,
}

pub fn band_structure(model: &LatticeModel, k_grid: &[[f64; 2]]) -> Result<BandStructure> {
    if k_grid.is_empty() {
        return invalid("empty k-grid");
    }
    let per_k: Vec<(Vec<f64>, DMatrix<C64>)> = k_grid
        .par_iter()
        .map(|&k| model.bloch_hamiltonian(k).map(eigh))
        .collect::<Result<_>>()?;
    let q = model.q();
    let bands = (0..q).map(|m| per_k.iter().map(|(e, _)| e[m]).collect()).collect();
    Ok(BandStructure {
        k_grid: k_grid.to_vec(),
        bands,
        vectors: per_k.into_iter().map(|(_, v)| v).collect(),
    })
}

/// Band structure on the model's own commensurate grid.
pub fn band_structure_on_grid(model: &LatticeModel) -> Result<BandStructure> {
    let ks: Vec<[f64; 2]> = model.k_grid().iter().map(|p| p.k).collect();
    band_structure(model, &ks)
}

/// Every band whose width over the grid is below `tol`.
pub fn detect_flat_bands(bs: &BandStructure, tol: f64) -> Vec<FlatBandInfo> {
    let m_count = bs.n_bands();
    (0..m_count)
        .filter_map(|m| {
            let (lo, hi) = (bs.band_min(m), bs.band_max(m));
            if hi - lo >= tol {
                return None;
            }
            let mean = bs.bands[m].iter().sum::<f64>() / bs.bands[m].len() as f64;
            Some(FlatBandInfo {
                band: m,
                energy: mean,
                bandwidth: hi - lo,
                gap_below: (m > 0).then(|| (lo - bs.band_max(m - 1)).max(0.0)),
                gap_above: (m + 1 < m_count).then(|| (bs.band_min(m + 1) - hi).max(0.0)),
            })
        })
        .collect()
}

/// Lorentzian-broadened DOS per unit cell.
pub fn density_of_states(bs: &BandStructure, omegas: &[f64], eta: f64) -> Result<Vec<f64>> {
    if !(eta > 0.0) {
        return invalid("broadening must be positive");
    }
    let nk = bs.k_grid.len() as f64;
    Ok(omegas
        .iter()
        .map(|&w| {
            let s: f64 = bs
                .bands
                .iter()
                .flatten()
                .map(|&e| eta / ((w - e).powi(2) + eta * eta))
                .sum();
            s / (std::f64::consts::PI * nk)
        })
        .collect())
}

/// Width (max − min) of the `count` eigenvalues closest to `center`.
pub fn cluster_width(energies: &[f64], center: f64, count: usize) -> f64 {
    let mut d: Vec<f64> = energies.to_vec();
    d.sort_by(|a, b| (a - center).abs().total_cmp(&(b - center).abs()));
    let chosen = &d[..count.min(d.len())];
    let hi = chosen.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = chosen.iter().copied().fold(f64::INFINITY, f64::min);
    hi - lo
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::*;

    #[test]
    fn sawtooth_bands() {
        let m = build_sawtooth(100, 1.0).unwrap();
        let bs = band_structure_on_grid(&m).unwrap();
        for (ik, k) in bs.k_grid.iter().enumerate() {
            assert!((bs.bands[0][ik] + 2.0).abs() < 1e-12);
            assert!((bs.bands[1][ik] - 2.0 * (1.0 + k[0].cos())).abs() < 1e-12);
        }
        let fb = detect_flat_bands(&bs, 1e-8);
        assert_eq!(fb.len(), 1);
        assert!((fb[0].energy + 2.0).abs() < 1e-12);
        assert!((fb[0].gap_above.unwrap() - 2.0).abs() < 1e-12);
        assert!(fb[0].gap_below.is_none());
    }

    #[test]
    fn stub_bands() {
        let m = build_stub(64, 1.0, 4.0).unwrap();
        let bs = band_structure_on_grid(&m).unwrap();
        for (ik, k) in bs.k_grid.iter().enumerate() {
            let e = (4.0 + 2.0 * (1.0 + k[0].cos())).sqrt();
            assert!((bs.bands[0][ik] + e).abs() < 1e-12);
            assert!(bs.bands[1][ik].abs() < 1e-12);
            assert!((bs.bands[2][ik] - e).abs() < 1e-12);
        }
        let fb = detect_flat_bands(&bs, 1e-8);
        assert!((fb[0].gap_above.unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn stub_touching_at_delta_zero() {
        let bs = band_structure_on_grid(&build_stub(100, 1.0, 0.0).unwrap()).unwrap();
        let min_abs = bs.bands[2].iter().fold(f64::INFINITY, |a, &e| a.min(e.abs()));
        assert!(min_abs < 1e-12);
    }

    #[test]
    fn kagome_touches_from_below() {
        let bs = band_structure_on_grid(&build_kagome1d(100, 1.0).unwrap()).unwrap();
        let fb = detect_flat_bands(&bs, 1e-8);
        assert_eq!(fb.len(), 1);
        assert!((fb[0].energy - 2.0).abs() < 1e-12);
        let touching = fb[0].gap_below.unwrap().min(fb[0].gap_above.unwrap_or(1.0));
        assert!(touching < 1e-12);
    }

    #[test]
    fn checkerboard_flat_and_max() {
        let bs = band_structure_on_grid(&build_checkerboard(16, 16, 1.0).unwrap()).unwrap();
        assert!(bs.band_max(0) - bs.band_min(0) < 1e-12);
        assert!(bs.band_min(0).abs() < 1e-12);
        assert!((bs.band_max(1) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn double_comb_flat_band_and_extrema() {
        let m = build_double_comb(50, 1.0, 1.0, 3.0).unwrap();
        let bs = band_structure_on_grid(&m).unwrap();
        let fb = detect_flat_bands(&bs, 1e-8);
        assert_eq!(fb.len(), 1);
        assert!((fb[0].energy - 3.0).abs() < 1e-12 && fb[0].bandwidth < 1e-12);
        // direct 2x2 reduction of the symmetric sector at k = 0 and π
        for k in [0.0, std::f64::consts::PI] {
            let c = 2.0 * k.cos();
            let tr = 3.0 + c;
            let det = 3.0 * c - 2.0;
            let disc = (tr * tr - 4.0 * det).sqrt();
            let want = [(tr - disc) / 2.0, (tr + disc) / 2.0];
            let e = eigh(m.bloch_hamiltonian([k, 0.0]).unwrap()).0;
            let got: Vec<f64> = e.into_iter().filter(|x| (x - 3.0).abs() > 1e-9).collect();
            assert!((got[0] - want[0]).abs() < 1e-12 && (got[1] - want[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn chain_has_no_flat_band() {
        let bs = band_structure_on_grid(&build_chain(32, 1.0).unwrap()).unwrap();
        assert!(detect_flat_bands(&bs, 1e-8).is_empty());
        for (ik, k) in bs.k_grid.iter().enumerate() {
            assert!((bs.bands[0][ik] - 2.0 * k[0].cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn dos_sum_rule_and_van_hove() {
        let bs = band_structure_on_grid(&build_sawtooth(64, 1.0).unwrap()).unwrap();
        let eta = 0.05;
        let grid: Vec<f64> = (0..40001).map(|i| -200.0 + i as f64 * 0.01).collect();
        let dos = density_of_states(&bs, &grid, eta).unwrap();
        let integral: f64 = dos.iter().sum::<f64>() * 0.01;
        assert!((integral - 2.0).abs() / 2.0 < 0.02);

        let chain = band_structure_on_grid(&build_chain(4000, 1.0).unwrap()).unwrap();
        let d = density_of_states(&chain, &[2.0 - 1e-2, 0.0], 1e-3).unwrap();
        assert!(d[0] > 3.0 * d[1]);
        assert!(density_of_states(&chain, &[0.0], 0.0).is_err());
    }

    #[test]
    fn flat_band_dos_spike_weight() {
        let bs = band_structure_on_grid(&build_sawtooth(32, 1.0).unwrap()).unwrap();
        let eta = 1e-3;
        let peak = density_of_states(&bs, &[-2.0], eta).unwrap()[0];
        assert!((peak * std::f64::consts::PI * eta - 1.0).abs() < 1e-3);
    }

    #[test]
    fn cluster_width_picks_nearest() {
        let e = [-3.0, -0.1, 0.0, 0.05, 2.0];
        assert!((cluster_width(&e, 0.0, 3) - 0.15).abs() < 1e-15);
    }
}
