//! Compact localized states (CLS), the overlap symbol `f(k)`, the weight
//! function `ξ` and the settsech localization laws.
//!
//! The flat-band projector expands in the non-orthogonal CLS basis as
//! `P = Σ_{nn′} ξ(n − n′) |φ_n⟩⟨φ_{n′}|`, where `ξ` is the inverse of the
//! CLS Gram matrix, `ξ(Δn) = (1/N) Σ_k e^{ik·Δn} / f(k)`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::lattice::{LatticeKind, LatticeModel, Site, C64};
use crate::linalg::pairwise_sum;

/// Grid points with `f(k)` below this make `ξ` undefined.
const SINGULAR_F: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StencilEntry {
    pub sublattice: usize,
    pub offset: [i64; 2],
    pub coeff: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClsSet {
    pub kind: LatticeKind,
    pub dim: usize,
    pub omega_fb: f64,
    pub stencil: Vec<StencilEntry>,
    /// Cells spanned per axis.
    pub class_u: [usize; 2],
    /// `⟨φ_n|φ_{n+ê_d}⟩` per axis.
    pub alpha: [f64; 2],
}

fn entry(sublattice: usize, dx: i64, dy: i64, coeff: f64) -> StencilEntry {
    StencilEntry { sublattice, offset: [dx, dy], coeff }
}

/// The minimal CLS of each flat-band lattice, translated to every cell.
pub fn cls_set(model: &LatticeModel) -> Result<ClsSet> {
    if !model.is_translation_invariant() {
        return Err(Error::Unsupported("CLS set of a disordered lattice".into()));
    }
    let j = model.j;
    let (omega_fb, stencil) = match model.kind {
        LatticeKind::Sawtooth => {
            (-2.0 * j, vec![entry(0, 0, 0, 0.5), entry(0, -1, 0, 0.5), entry(1, 0, 0, -0.5 * 2f64.sqrt())])
        }
        LatticeKind::Stub => {
            let delta = model.params.delta.unwrap_or(0.0);
            let n = (2.0 + delta).sqrt();
            (0.0, vec![entry(0, 0, 0, 1.0 / n), entry(0, 1, 0, 1.0 / n), entry(2, 0, 0, -delta.sqrt() / n)])
        }
        LatticeKind::DoubleComb => {
            let s = 0.5f64.sqrt();
            (model.params.omega_c.unwrap_or(0.0), vec![entry(0, 0, 0, s), entry(1, 0, 0, -s)])
        }
        LatticeKind::Kagome1d => {
            let s = 1.0 / 6f64.sqrt();
            (
                2.0 * j,
                vec![
                    entry(2, 0, 0, s),
                    entry(2, 1, 0, s),
                    entry(0, 0, 0, -s),
                    entry(1, 0, 0, -s),
                    entry(3, 0, 0, -s),
                    entry(4, 0, 0, -s),
                ],
            )
        }
        LatticeKind::Checkerboard => (
            0.0,
            vec![entry(0, 0, 0, 0.5), entry(0, -1, 0, -0.5), entry(1, 0, 0, 0.5), entry(1, 0, 1, -0.5)],
        ),
        LatticeKind::Chain | LatticeKind::Cavity => {
            return Err(Error::Unsupported(format!("{} has no flat band", model.kind.name())))
        }
    };
    let stencil: Vec<StencilEntry> = stencil.into_iter().filter(|e| e.coeff != 0.0).collect();
    let extent = |d: usize| {
        let lo = stencil.iter().map(|e| e.offset[d]).min().unwrap_or(0);
        let hi = stencil.iter().map(|e| e.offset[d]).max().unwrap_or(0);
        (hi - lo) as usize + 1
    };
    let mut cls = ClsSet {
        kind: model.kind,
        dim: model.dim,
        omega_fb,
        class_u: [extent(0), extent(1)],
        stencil,
        alpha: [0.0; 2],
    };
    cls.alpha = [cls.overlap([1, 0]), if cls.dim == 2 { cls.overlap([0, 1]) } else { 0.0 }];
    Ok(cls)
}

impl ClsSet {
    /// `⟨φ_0|φ_Δ⟩` from the stencil.
    pub fn overlap(&self, delta: [i64; 2]) -> f64 {
        let mut s = 0.0;
        for a in &self.stencil {
            for b in &self.stencil {
                if a.sublattice == b.sublattice
                    && a.offset[0] == b.offset[0] + delta[0]
                    && a.offset[1] == b.offset[1] + delta[1]
                {
                    s += a.coeff * b.coeff;
                }
            }
        }
        s
    }

    /// All nonzero overlaps, keyed by displacement.
    pub fn overlaps(&self) -> BTreeMap<[i64; 2], f64> {
        let mut out = BTreeMap::new();
        for a in &self.stencil {
            for b in &self.stencil {
                let d = [a.offset[0] - b.offset[0], a.offset[1] - b.offset[1]];
                out.entry(d).or_insert_with(|| self.overlap(d));
            }
        }
        out.retain(|_, v| v.abs() > 1e-15);
        out
    }

    pub fn norm_squared(&self) -> f64 {
        self.stencil.iter().map(|e| e.coeff * e.coeff).sum()
    }

    /// `|φ_cell⟩` as a lattice vector.
    pub fn state(&self, model: &LatticeModel, cell: [i64; 2]) -> DVector<C64> {
        let mut v = DVector::zeros(model.n_sites());
        for e in &self.stencil {
            let site = Site::new([cell[0] + e.offset[0], cell[1] + e.offset[1]], e.sublattice);
            v[model.site_index(site)] += C64::new(e.coeff, 0.0);
        }
        v
    }

    /// `Σ_n c_n |φ_n⟩` (unnormalized).
    pub fn superposition(&self, model: &LatticeModel, coeffs: &[([i64; 2], C64)]) -> DVector<C64> {
        let mut v = DVector::zeros(model.n_sites());
        for (cell, c) in coeffs {
            v += self.state(model, *cell) * *c;
        }
        v
    }

    /// Gram symbol `Σ_Δ ⟨φ_0|φ_Δ⟩ cos(k·Δ)`; equals [`f_of_k`] when only
    /// nearest-neighbour CLSs overlap.
    pub fn gram_symbol(&self, k: [f64; 2]) -> f64 {
        self.overlaps().iter().map(|(d, o)| o * (k[0] * d[0] as f64 + k[1] * d[1] as f64).cos()).sum()
    }

    pub fn weight_function(&self) -> WeightFunction {
        WeightFunction { dim: self.dim, alpha: self.alpha }
    }
}

/// `f(k) = 1 + 2 Σ_d α_d cos k_d`.
pub fn f_of_k(alpha: &[f64], k: &[f64]) -> f64 {
    1.0 + 2.0 * alpha.iter().zip(k).map(|(a, k)| a * k.cos()).sum::<f64>()
}

/// `ξ` for nearest-neighbour overlaps `α_d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WeightFunction {
    pub dim: usize,
    pub alpha: [f64; 2],
}

fn grid_cos(m: usize, d: i64, nk: usize) -> f64 {
    let r = ((m as i64 * d).rem_euclid(nk as i64)) as f64;
    (2.0 * PI * r / nk as f64).cos()
}

impl WeightFunction {
    pub fn new_1d(alpha: f64) -> Self {
        WeightFunction { dim: 1, alpha: [alpha, 0.0] }
    }

    pub fn new_2d(alpha_x: f64, alpha_y: f64) -> Self {
        WeightFunction { dim: 2, alpha: [alpha_x, alpha_y] }
    }

    /// Discrete BZ sum on an `nk`-point grid per axis, pairwise-summed.
    pub fn xi_numeric(&self, dn: [i64; 2], nk: usize) -> Result<f64> {
        if nk == 0 {
            return invalid("nk must be positive");
        }
        let fk: Vec<f64> = (0..nk).map(|m| 2.0 * (2.0 * PI * m as f64 / nk as f64).cos()).collect();
        let terms: Vec<f64> = if self.dim == 1 {
            (0..nk)
                .map(|m| Ok(grid_cos(m, dn[0], nk) / self.checked_f(1.0 + self.alpha[0] * fk[m])?))
                .collect::<Result<_>>()?
        } else {
            let mut t = Vec::with_capacity(nk * nk);
            for my in 0..nk {
                let cy = grid_cos(my, dn[1], nk);
                for mx in 0..nk {
                    let f = self.checked_f(1.0 + self.alpha[0] * fk[mx] + self.alpha[1] * fk[my])?;
                    t.push(grid_cos(mx, dn[0], nk) * cy / f);
                }
            }
            t
        };
        // the sine parts cancel pairwise between k and −k on a symmetric grid
        Ok(pairwise_sum(&terms) / terms.len() as f64)
    }

    fn checked_f(&self, f: f64) -> Result<f64> {
        if f < SINGULAR_F {
            Err(Error::SingularF { min_f: f })
        } else {
            Ok(f)
        }
    }
}

/// `ξ(Δn)` for a CLS set on an `nk` grid.
pub fn xi_numeric(cls: &ClsSet, dn: [i64; 2], nk: usize) -> Result<f64> {
    cls.weight_function().xi_numeric(dn, nk)
}

/// `settsech(x) = ln((1 + √(1 − x²)) / x)`, the inverse of sech on (0, 1].
pub fn settsech(x: f64) -> Result<f64> {
    if !(x > 0.0 && x <= 1.0) {
        return invalid(format!("settsech needs 0 < x <= 1, got {x}"));
    }
    Ok(((1.0 + (1.0 - x * x).sqrt()) / x).ln())
}

/// `1/λ_1D = settsech(2|α|)`.
pub fn lambda_1d(alpha: f64) -> Result<f64> {
    if !(alpha != 0.0 && alpha.abs() < 0.5) {
        return invalid("lambda_1d needs 0 < |alpha| < 1/2");
    }
    Ok(1.0 / settsech(2.0 * alpha.abs())?)
}

/// `(−sgn α)^{|Δn|} / √(1 − 4α²) · e^{−|Δn|/λ_1D}`.
pub fn xi_analytic_1d(alpha: f64, dn: i64) -> Result<f64> {
    if !(alpha.abs() < 0.5) {
        return invalid("xi_analytic_1d needs |alpha| < 1/2");
    }
    let d = dn.unsigned_abs();
    let base = 1.0 / (1.0 - 4.0 * alpha * alpha).sqrt();
    if alpha == 0.0 {
        return Ok(if d == 0 { 1.0 } else { 0.0 });
    }
    let sign = if alpha > 0.0 && d % 2 == 1 { -1.0 } else { 1.0 };
    Ok(sign * base * (-(d as f64) / lambda_1d(alpha)?).exp())
}

/// `(λ_2D, λ′_2D) = (1/settsech|2α/(1−2α)|, 1/settsech|2α/(1+2α)|)`.
///
/// At `|α| = 1/4` the first length diverges and is returned as infinity.
pub fn lambda_2d(alpha: f64) -> Result<(f64, f64)> {
    if !(alpha != 0.0 && alpha.abs() <= 0.25) {
        return invalid("lambda_2d needs 0 < |alpha| <= 1/4");
    }
    let a = alpha.abs();
    let x1 = (2.0 * a / (1.0 - 2.0 * a)).min(1.0);
    let x2 = 2.0 * a / (1.0 + 2.0 * a);
    Ok((1.0 / settsech(x1)?, 1.0 / settsech(x2)?))
}

/// Roots `(z₁, z₂)` inside the unit circle of the inner contour integral for
/// isotropic `0 < α < 1/4`.
pub fn xi_2d_poles(alpha: f64) -> (f64, f64) {
    let z1 = (2.0 * alpha - 1.0 + (1.0 - 4.0 * alpha).sqrt()) / (2.0 * alpha);
    let z2 = (-(2.0 * alpha + 1.0) + (1.0 + 4.0 * alpha).sqrt()) / (2.0 * alpha);
    (z1, z2)
}

/// `ξ` at distance `d` along a coordinate axis of the isotropic 2D lattice.
///
/// After the first contour integration the remaining integrand has square
/// root branch points at `z₁` and `z₂`; collapsing the contour onto the cut
/// between them gives
/// `ξ(d) = (1/π α) ∫_{z₁}^{z₂} x^d dx / √((x−z₁)(z₂−x)(x−1/z₁)(x−1/z₂))`,
/// evaluated here exactly (to rounding) with Gauss–Chebyshev quadrature.
pub fn xi_2d_axis(alpha: f64, d: usize) -> Result<f64> {
    if alpha == 0.0 {
        return invalid("alpha = 0: xi is a Kronecker delta");
    }
    if !(alpha.abs() < 0.25) {
        return invalid("xi_2d_axis needs |alpha| < 1/4 (xi diverges at 1/4)");
    }
    let a = alpha.abs();
    let (z1, z2) = xi_2d_poles(a);
    let m = 2 * d + 64;
    let (mid, half) = (0.5 * (z1 + z2), 0.5 * (z2 - z1));
    let terms: Vec<f64> = (1..=m)
        .map(|j| {
            let x = mid + half * ((2 * j - 1) as f64 * PI / (2 * m) as f64).cos();
            x.powi(d as i32) / ((x - 1.0 / z1) * (x - 1.0 / z2)).sqrt()
        })
        .collect();
    let sign = if alpha < 0.0 && d % 2 == 1 { -1.0 } else { 1.0 };
    Ok(sign * pairwise_sum(&terms) / (a * m as f64))
}

/// `ξ` on the lattice's own k-grid with the full Gram symbol, indexed by
/// linear cell displacement.
pub fn xi_on_lattice(cls: &ClsSet, model: &LatticeModel) -> Result<Vec<f64>> {
    let grid = model.k_grid();
    let f: Vec<f64> = grid.iter().map(|p| cls.gram_symbol(p.k)).collect();
    if let Some(&min_f) = f.iter().find(|&&x| x < SINGULAR_F) {
        return Err(Error::SingularF { min_f });
    }
    let [nx, ny] = model.cells;
    let n = model.n_cells();
    Ok((0..n)
        .map(|lin| {
            let c = model.cell_coords(lin);
            let terms: Vec<f64> = grid
                .iter()
                .zip(&f)
                .map(|(p, f)| grid_cos(p.m[0], c[0] as i64, nx) * grid_cos(p.m[1], c[1] as i64, ny) / f
                    - sin_part(p.m, c, [nx, ny]) / f)
                .collect();
            pairwise_sum(&terms) / n as f64
        })
        .collect())
}

fn sin_part(m: [usize; 2], c: [usize; 2], n: [usize; 2]) -> f64 {
    let sx = (2.0 * PI * ((m[0] * c[0]) % n[0]) as f64 / n[0] as f64).sin();
    let sy = (2.0 * PI * ((m[1] * c[1]) % n[1]) as f64 / n[1] as f64).sin();
    sx * sy
}

fn cls_matrix(cls: &ClsSet, model: &LatticeModel) -> DMatrix<C64> {
    let cols: Vec<DVector<C64>> = (0..model.n_cells())
        .map(|lin| {
            let c = model.cell_coords(lin);
            cls.state(model, [c[0] as i64, c[1] as i64])
        })
        .collect();
    DMatrix::from_columns(&cols)
}

/// Flat-band projector assembled from CLSs and the finite-size `ξ`.
pub fn projector_cls_expansion(cls: &ClsSet, model: &LatticeModel) -> Result<DMatrix<C64>> {
    let xi = xi_on_lattice(cls, model)?;
    let n = model.n_cells();
    let xi_m = DMatrix::from_fn(n, n, |a, b| C64::new(xi[displacement(model, a, b)], 0.0));
    let phi = cls_matrix(cls, model);
    Ok(&phi * xi_m * phi.adjoint())
}

fn displacement(model: &LatticeModel, a: usize, b: usize) -> usize {
    let (ca, cb) = (model.cell_coords(a), model.cell_coords(b));
    model.cell_linear([ca[0] as i64 - cb[0] as i64, ca[1] as i64 - cb[1] as i64])
}

/// Weights `w_n = Σ_{n′} ξ(n − n′) φ_{n′}(x₀)` of the CLS expansion of
/// `P|x₀⟩`, indexed by linear cell.
pub fn bs_cls_weights(cls: &ClsSet, model: &LatticeModel, x0: Site) -> Result<Vec<f64>> {
    let xi = xi_on_lattice(cls, model)?;
    let n = model.n_cells();
    let idx = model.site_index(x0);
    let phi_x0: Vec<f64> = (0..n)
        .map(|lin| {
            let c = model.cell_coords(lin);
            cls.state(model, [c[0] as i64, c[1] as i64])[idx].re
        })
        .collect();
    Ok((0..n)
        .map(|a| (0..n).map(|b| xi[displacement(model, a, b)] * phi_x0[b]).sum())
        .collect())
}

/// `Σ_n w_n |φ_n⟩` for weights indexed by linear cell.
pub fn reconstruct_from_weights(cls: &ClsSet, model: &LatticeModel, w: &[f64]) -> DVector<C64> {
    let coeffs: Vec<([i64; 2], C64)> = w
        .iter()
        .enumerate()
        .filter(|(_, w)| **w != 0.0)
        .map(|(lin, w)| {
            let c = model.cell_coords(lin);
            ([c[0] as i64, c[1] as i64], C64::new(*w, 0.0))
        })
        .collect();
    cls.superposition(model, &coeffs)
}
