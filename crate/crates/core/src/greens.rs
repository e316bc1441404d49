//! Bath eigensystem, resolvent `G(ω) = Σ_α |u_α⟩⟨u_α| / (ω − ε_α)` and the
//! flat-band projector.
//!
//! Translation-invariant models are diagonalized exactly block by block in
//! k-space (one Q×Q problem per grid point); disordered models use a dense
//! Hermitian eigensolver over all sites. Both expose the same spectral
//! operations through [`Eigensystem::components`] and
//! [`Eigensystem::synthesize`].

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::lattice::{LatticeModel, Site, C64};
use crate::linalg::eigh;

/// Pole guard band in units of the model's energy scale.
pub const GUARD: f64 = 1e-12;

/// Default flat-band window in units of the model's energy scale.
pub const FB_TOL: f64 = 1e-8;

/// Overlaps below this (relative to ‖v‖) are treated as exact zeros when a
/// resolvent is applied right on top of an eigenvalue.
const NEGLIGIBLE_OVERLAP: f64 = 1e-13;

struct BlochBackend {
    cells: [usize; 2],
    q: usize,
    m: Vec<[usize; 2]>,
    vectors: Vec<DMatrix<C64>>,
    roots: [Vec<C64>; 2],
}

enum Backend {
    Dense(DMatrix<C64>),
    Bloch(BlochBackend),
}

pub struct Eigensystem {
    model: LatticeModel,
    energies: Vec<f64>,
    backend: Backend,
}

fn roots_of_unity(n: usize) -> Vec<C64> {
    (0..n)
        .map(|j| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / n as f64))
        .collect()
}

impl BlochBackend {
    fn phase(&self, m: [usize; 2], cell: [usize; 2]) -> C64 {
        let [nx, ny] = self.cells;
        self.roots[0][(m[0] * cell[0]) % nx] * self.roots[1][(m[1] * cell[1]) % ny]
    }

    fn components(&self, v: &DVector<C64>) -> Vec<C64> {
        let q = self.q;
        let nx = self.cells[0];
        let nonzero: Vec<(usize, C64)> =
            v.iter().enumerate().filter(|(_, z)| **z != C64::new(0.0, 0.0)).map(|(i, z)| (i, *z)).collect();
        let norm = ((self.cells[0] * self.cells[1]) as f64).sqrt();
        let per_k: Vec<Vec<C64>> = (0..self.m.len())
            .into_par_iter()
            .map(|ik| {
                let mut vk = vec![C64::new(0.0, 0.0); q];
                for &(i, z) in &nonzero {
                    let cell = i / q;
                    let p = self.phase(self.m[ik], [cell % nx, cell / nx]);
                    vk[i % q] += z * p.conj();
                }
                let u = &self.vectors[ik];
                (0..q)
                    .map(|mb| (0..q).map(|nu| u[(nu, mb)].conj() * vk[nu]).sum::<C64>() / norm)
                    .collect()
            })
            .collect();
        per_k.into_iter().flatten().collect()
    }

    fn synthesize(&self, coeffs: &[C64]) -> DVector<C64> {
        let q = self.q;
        let nx = self.cells[0];
        let n_cells = self.cells[0] * self.cells[1];
        let zero = C64::new(0.0, 0.0);
        let w: Vec<(usize, Vec<C64>)> = (0..self.m.len())
            .filter(|&ik| coeffs[ik * q..(ik + 1) * q].iter().any(|c| *c != zero))
            .map(|ik| {
                let u = &self.vectors[ik];
                let d = &coeffs[ik * q..(ik + 1) * q];
                (ik, (0..q).map(|nu| (0..q).map(|mb| u[(nu, mb)] * d[mb]).sum()).collect())
            })
            .collect();
        let norm = (n_cells as f64).sqrt();
        let cells: Vec<Vec<C64>> = (0..n_cells)
            .into_par_iter()
            .map(|cell| {
                let mut acc = vec![zero; q];
                for (ik, wk) in &w {
                    let p = self.phase(self.m[*ik], [cell % nx, cell / nx]);
                    for nu in 0..q {
                        acc[nu] += p * wk[nu];
                    }
                }
                acc.into_iter().map(|z| z / norm).collect()
            })
            .collect();
        DVector::from_iterator(n_cells * q, cells.into_iter().flatten())
    }
}

impl Eigensystem {
    /// Bloch backend for clean models, dense backend otherwise.
    pub fn new(model: &LatticeModel) -> Self {
        if model.is_translation_invariant() {
            Self::bloch(model).expect("translation-invariant model")
        } else {
            Self::dense(model)
        }
    }

    pub fn dense(model: &LatticeModel) -> Self {
        let (energies, vectors) = eigh(model.real_space_hamiltonian());
        Eigensystem { model: model.clone(), energies, backend: Backend::Dense(vectors) }
    }

    pub fn bloch(model: &LatticeModel) -> Result<Self> {
        let grid = model.k_grid();
        let per_k: Vec<(Vec<f64>, DMatrix<C64>)> = grid
            .par_iter()
            .map(|p| model.bloch_hamiltonian(p.k).map(eigh))
            .collect::<Result<_>>()?;
        let mut energies = Vec::with_capacity(model.n_sites());
        let mut vectors = Vec::with_capacity(grid.len());
        for (e, v) in per_k {
            energies.extend(e);
            vectors.push(v);
        }
        let backend = BlochBackend {
            cells: model.cells,
            q: model.q(),
            m: grid.iter().map(|p| p.m).collect(),
            vectors,
            roots: [roots_of_unity(model.cells[0]), roots_of_unity(model.cells[1])],
        };
        Ok(Eigensystem { model: model.clone(), energies, backend: Backend::Bloch(backend) })
    }

    pub fn model(&self) -> &LatticeModel {
        &self.model
    }

    pub fn n_sites(&self) -> usize {
        self.model.n_sites()
    }

    /// Eigenvalues in state order (not globally sorted for the Bloch backend).
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn sorted_energies(&self) -> Vec<f64> {
        let mut e = self.energies.clone();
        e.sort_by(f64::total_cmp);
        e
    }

    pub fn guard(&self) -> f64 {
        GUARD * self.model.energy_scale()
    }

    /// Expansion coefficients `c_α = ⟨u_α|v⟩`.
    pub fn components(&self, v: &DVector<C64>) -> Vec<C64> {
        assert_eq!(v.len(), self.n_sites());
        match &self.backend {
            Backend::Dense(u) => (u.adjoint() * v).iter().copied().collect(),
            Backend::Bloch(b) => b.components(v),
        }
    }

    /// `Σ_α c_α |u_α⟩`.
    pub fn synthesize(&self, coeffs: &[C64]) -> DVector<C64> {
        assert_eq!(coeffs.len(), self.energies.len());
        match &self.backend {
            Backend::Dense(u) => u * DVector::from_column_slice(coeffs),
            Backend::Bloch(b) => b.synthesize(coeffs),
        }
    }

    pub fn eigenvector(&self, alpha: usize) -> DVector<C64> {
        match &self.backend {
            Backend::Dense(u) => u.column(alpha).into_owned(),
            Backend::Bloch(_) => {
                let mut c = vec![C64::new(0.0, 0.0); self.energies.len()];
                c[alpha] = C64::new(1.0, 0.0);
                self.synthesize(&c)
            }
        }
    }

    /// Spectral weights `|⟨u_α|v⟩|²` paired with their energies.
    pub fn spectral_weights(&self, v: &DVector<C64>) -> Vec<(f64, f64)> {
        self.components(v).iter().zip(&self.energies).map(|(c, &e)| (e, c.norm_sqr())).collect()
    }

    /// Applies any function of the Hamiltonian, `f(H) v`.
    pub fn apply_fn(&self, v: &DVector<C64>, f: impl Fn(f64) -> C64) -> DVector<C64> {
        let c = self.components(v);
        let d: Vec<C64> = c.iter().zip(&self.energies).map(|(c, &e)| c * f(e)).collect();
        self.synthesize(&d)
    }

    /// `G(ω) v`. Eigenvalues inside the guard band are an error unless `v`
    /// has no weight on them.
    pub fn apply_resolvent(&self, omega: f64, v: &DVector<C64>) -> Result<DVector<C64>> {
        let c = self.components(v);
        let guard = self.guard();
        let small = NEGLIGIBLE_OVERLAP * v.norm();
        let mut d = Vec::with_capacity(c.len());
        for (c, &e) in c.iter().zip(&self.energies) {
            if (omega - e).abs() < guard {
                if c.norm() > small {
                    return Err(Error::PoleProximity { omega, eigenvalue: e });
                }
                d.push(C64::new(0.0, 0.0));
            } else {
                d.push(c / (omega - e));
            }
        }
        Ok(self.synthesize(&d))
    }

    /// A resolvent at `ω`, rejected if `ω` is inside the guard band of any
    /// eigenvalue.
    pub fn resolvent(&self, omega: f64) -> Result<Resolvent<'_>> {
        let guard = self.guard();
        if let Some(&e) = self.energies.iter().find(|&&e| (omega - e).abs() < guard) {
            return Err(Error::PoleProximity { omega, eigenvalue: e });
        }
        Ok(Resolvent { eig: self, omega })
    }

    pub fn unit_vector(&self, site: Site) -> DVector<C64> {
        let mut v = DVector::zeros(self.n_sites());
        v[self.model.site_index(site)] = C64::new(1.0, 0.0);
        v
    }
}

pub struct Resolvent<'a> {
    eig: &'a Eigensystem,
    pub omega: f64,
}

impl Resolvent<'_> {
    pub fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        self.eig.apply_fn(v, |e| C64::new(1.0 / (self.omega - e), 0.0))
    }

    /// Column `G(ω)|x′⟩`.
    pub fn column(&self, site: Site) -> DVector<C64> {
        self.apply(&self.eig.unit_vector(site))
    }

    pub fn element(&self, x: Site, xp: Site) -> C64 {
        self.column(xp)[self.eig.model.site_index(x)]
    }
}

/// `⟨x|G(ω)|x′⟩`.
pub fn resolvent_element(eig: &Eigensystem, omega: f64, x: Site, xp: Site) -> Result<C64> {
    Ok(eig.resolvent(omega)?.element(x, xp))
}

/// Thermodynamic-limit chain Green's function above the band top,
/// `(−1)^d / (2√(Jδ)) · e^{−d √(δ/J)}` with `J` the hopping magnitude.
pub fn chain_green_analytic(j: f64, delta: f64, d: usize) -> Result<f64> {
    if !(delta > 0.0) || j == 0.0 {
        return invalid("chain Green's function needs delta > 0 and J != 0");
    }
    let j = j.abs();
    let sign = if d.is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok(sign / (2.0 * (j * delta).sqrt()) * (-(d as f64) * (delta / j).sqrt()).exp())
}

/// Projector onto all eigenstates with `|ε − ω_FB| ≤ tol`.
pub struct FlatBandProjector<'a> {
    eig: &'a Eigensystem,
    pub omega_fb: f64,
    pub tol: f64,
    mask: Vec<bool>,
}

/// `tol` is absolute; [`FB_TOL`] times the energy scale is the usual choice.
pub fn fb_projector(eig: &Eigensystem, omega_fb: f64, tol: f64) -> Result<FlatBandProjector<'_>> {
    let mask: Vec<bool> = eig.energies.iter().map(|e| (e - omega_fb).abs() <= tol).collect();
    if !mask.iter().any(|&m| m) {
        return Err(Error::NoFlatBand { omega: omega_fb, tol });
    }
    Ok(FlatBandProjector { eig, omega_fb, tol, mask })
}

impl FlatBandProjector<'_> {
    /// Number of states in the window, equal to `tr P`.
    pub fn rank(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        let c = self.eig.components(v);
        let zero = C64::new(0.0, 0.0);
        let d: Vec<C64> = c.iter().zip(&self.mask).map(|(c, &m)| if m { *c } else { zero }).collect();
        self.eig.synthesize(&d)
    }

    pub fn column(&self, site: Site) -> DVector<C64> {
        self.apply(&self.eig.unit_vector(site))
    }

    /// `⟨χ|P|χ⟩`.
    pub fn expectation(&self, chi: &DVector<C64>) -> f64 {
        self.eig
            .components(chi)
            .iter()
            .zip(&self.mask)
            .filter(|(_, &m)| m)
            .map(|(c, _)| c.norm_sqr())
            .sum()
    }

    pub fn to_matrix(&self) -> DMatrix<C64> {
        let n = self.eig.n_sites();
        let cols: Vec<DVector<C64>> = self
            .mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(a, _)| self.eig.eigenvector(a))
            .collect();
        let b = DMatrix::from_columns(&cols);
        debug_assert_eq!(b.nrows(), n);
        &b * b.adjoint()
    }
}

/// Flat-band approximation `P / (ω − ω_FB)` as a dense matrix.
pub fn fb_green_approx(p: &FlatBandProjector<'_>, omega: f64) -> Result<DMatrix<C64>> {
    if omega == p.omega_fb {
        return invalid("omega coincides with the flat band");
    }
    Ok(p.to_matrix() / C64::new(omega - p.omega_fb, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::*;

    fn max_abs(m: &DMatrix<C64>) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn single_cavity_resolvent() {
        let m = build_cavity(0.3).unwrap();
        let eig = Eigensystem::new(&m);
        let g = resolvent_element(&eig, 1.3, Site::new([0, 0], 0), Site::new([0, 0], 0)).unwrap();
        assert!((g.re - 1.0).abs() < 1e-15 && g.im == 0.0);
        assert!(matches!(eig.resolvent(0.3), Err(Error::PoleProximity { .. })));
    }

    #[test]
    fn bloch_and_dense_agree() {
        for m in [
            build_sawtooth(7, 1.0).unwrap(),
            build_kagome1d(5, 1.0).unwrap(),
            build_checkerboard(4, 5, 1.0).unwrap(),
        ] {
            let b = Eigensystem::bloch(&m).unwrap();
            let d = Eigensystem::dense(&m);
            let (eb, ed) = (b.sorted_energies(), d.sorted_energies());
            for (x, y) in eb.iter().zip(&ed) {
                assert!((x - y).abs() < 1e-10);
            }
            let omega = ed[ed.len() - 1] + 0.37;
            let v = DVector::from_fn(m.n_sites(), |i, _| C64::new((i as f64).cos(), 0.5 * (i as f64).sin()));
            let gb = b.apply_resolvent(omega, &v).unwrap();
            let gd = d.apply_resolvent(omega, &v).unwrap();
            assert!((gb - gd).norm() < 1e-12);
        }
    }

    #[test]
    fn bloch_vectors_are_eigenvectors() {
        let m = build_stub(6, 1.0, 2.0).unwrap();
        let eig = Eigensystem::bloch(&m).unwrap();
        for a in 0..eig.energies().len() {
            let u = eig.eigenvector(a);
            assert!((u.norm() - 1.0).abs() < 1e-12);
            let r = m.apply_hamiltonian(&u) - &u * C64::new(eig.energies()[a], 0.0);
            assert!(r.norm() < 1e-12);
        }
    }

    #[test]
    fn resolvent_identity() {
        let m = build_sawtooth(12, 1.0).unwrap();
        let eig = Eigensystem::new(&m);
        let omega = -2.37;
        let g = eig.resolvent(omega).unwrap();
        for idx in [0, 5, 17] {
            let col = g.column(m.site_of_index(idx));
            let r = col.clone() * C64::new(omega, 0.0) - m.apply_hamiltonian(&col);
            let mut e = DVector::zeros(m.n_sites());
            e[idx] = C64::new(1.0, 0.0);
            assert!((r - e).norm() < 1e-9);
        }
    }

    #[test]
    fn resolvent_hermitian_symmetry() {
        let m = build_checkerboard(6, 6, 1.0).unwrap();
        let eig = Eigensystem::new(&m);
        let g = eig.resolvent(-0.3).unwrap();
        let (x, y) = (Site::new([1, 2], 0), Site::new([4, 0], 1));
        assert!((g.element(x, y) - g.element(y, x).conj()).norm() < 1e-14);
    }

    #[test]
    fn chain_green_values() {
        assert!((chain_green_analytic(1.0, 0.01, 0).unwrap() - 5.0).abs() < 1e-14);
        assert!((chain_green_analytic(1.0, 1.0, 0).unwrap() - 0.5).abs() < 1e-15);
        assert!(chain_green_analytic(1.0, 0.01, 1).unwrap() < 0.0);
        assert!(chain_green_analytic(1.0, 0.0, 1).is_err());
    }

    #[test]
    fn projector_properties() {
        let m = build_sawtooth(20, 1.0).unwrap();
        let eig = Eigensystem::new(&m);
        let p = fb_projector(&eig, -2.0, FB_TOL).unwrap();
        assert_eq!(p.rank(), 20);
        let pm = p.to_matrix();
        assert!(max_abs(&(&pm * &pm - &pm)) < 1e-10);
        assert!(max_abs(&(pm.adjoint() - &pm)) < 1e-12);
        let trace: f64 = (0..pm.nrows()).map(|i| pm[(i, i)].re).sum();
        assert!((trace - 20.0).abs() < 1e-10);
        let h = m.real_space_hamiltonian();
        assert!(max_abs(&(&h * &pm - &pm * &h)) < 1e-9);
        assert!(matches!(fb_projector(&eig, -1.0, FB_TOL), Err(Error::NoFlatBand { .. })));
    }

    #[test]
    fn stub_projector_vanishes_on_b() {
        let m = build_stub(40, 1.0, 2.0).unwrap();
        let eig = Eigensystem::new(&m);
        let p = fb_projector(&eig, 0.0, FB_TOL).unwrap();
        let b = Site::new([7, 0], 1);
        assert!(p.column(b).norm() < 1e-12);
    }

    #[test]
    fn fb_green_scaling() {
        let m = build_sawtooth(10, 1.0).unwrap();
        let eig = Eigensystem::new(&m);
        let p = fb_projector(&eig, -2.0, FB_TOL).unwrap();
        let g1 = fb_green_approx(&p, -2.1).unwrap();
        let g2 = fb_green_approx(&p, -2.2).unwrap();
        assert!(max_abs(&(g1 - g2 * C64::new(2.0, 0.0))) < 1e-14);
        assert!(max_abs(&fb_green_approx(&p, 1e12).unwrap()) < 1e-11);
        assert!(fb_green_approx(&p, -2.0).is_err());
    }
}
