//! Tight-binding lattice models with periodic boundaries.
//!
//! A model is a list of sublattice on-site energies plus a Hermitian-closed
//! hopping list: each stored [`Hopping`] `(from, to, Δn, t)` contributes
//! `t a†_{n,from} a_{n+Δn,to}` and its conjugate. Sites are indexed as
//! `cell·Q + ν` with `cell = nx + Nx·ny`.
//!
//! With this convention the Bloch matrix is
//! `H_k[from][to] += t e^{ik·Δn}` and a Bloch eigenvector `u(k)` has
//! real-space amplitude `e^{ik·n} u_ν(k) / √N`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type C64 = Complex<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeKind {
    Sawtooth,
    Stub,
    #[serde(rename = "doublecomb")]
    DoubleComb,
    Kagome1d,
    Checkerboard,
    Chain,
    Cavity,
}

impl LatticeKind {
    pub fn name(self) -> &'static str {
        match self {
            LatticeKind::Sawtooth => "sawtooth",
            LatticeKind::Stub => "stub",
            LatticeKind::DoubleComb => "doublecomb",
            LatticeKind::Kagome1d => "kagome1d",
            LatticeKind::Checkerboard => "checkerboard",
            LatticeKind::Chain => "chain",
            LatticeKind::Cavity => "cavity",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hopping {
    pub from: usize,
    pub to: usize,
    pub offset: [i64; 2],
    pub amplitude: C64,
}

impl Hopping {
    fn real(from: usize, to: usize, offset: [i64; 2], t: f64) -> Self {
        Hopping { from, to, offset, amplitude: C64::new(t, 0.0) }
    }
}

/// A site addressed by (unwrapped) cell coordinates and sublattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Site {
    pub cell: [i64; 2],
    pub sublattice: usize,
}

impl Site {
    pub fn new(cell: [i64; 2], sublattice: usize) -> Self {
        Site { cell, sublattice }
    }

    pub fn shifted(self, by: [i64; 2]) -> Self {
        Site { cell: [self.cell[0] + by[0], self.cell[1] + by[1]], sublattice: self.sublattice }
    }
}

/// Extra builder parameters, kept for reporting.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    #[serde(rename = "Delta", default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_c: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisorderKind {
    #[serde(alias = "diag")]
    Diagonal,
    #[serde(alias = "offdiagonal", alias = "off_diagonal")]
    OffDiagonal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    pub kind: DisorderKind,
    pub strength: f64,
    pub seed: u64,
}

/// A drawn disorder realization: per-site on-site shifts and per-bond
/// magnitude shifts (bond index = cell · n_hoppings + hopping index).
#[derive(Clone, Debug, PartialEq)]
pub struct Disorder {
    pub spec: DisorderSpec,
    pub onsite_shift: Vec<f64>,
    pub bond_shift: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatticeModel {
    pub kind: LatticeKind,
    pub dim: usize,
    pub cells: [usize; 2],
    pub onsite: Vec<f64>,
    pub hoppings: Vec<Hopping>,
    pub j: f64,
    pub params: ModelParams,
    pub disorder: Option<Disorder>,
}

/// A point of the commensurate k-grid: integer labels `m` and `k = 2πm/N`
/// folded into `[−π, π)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KPoint {
    pub m: [usize; 2],
    pub k: [f64; 2],
}

fn fold_k(m: usize, n: usize) -> f64 {
    let m = if 2 * m >= n { m as f64 - n as f64 } else { m as f64 };
    2.0 * std::f64::consts::PI * m / n as f64
}

impl LatticeModel {
    fn new(
        kind: LatticeKind,
        dim: usize,
        cells: [usize; 2],
        onsite: Vec<f64>,
        hoppings: Vec<Hopping>,
        j: f64,
        params: ModelParams,
    ) -> Self {
        let model = LatticeModel { kind, dim, cells, onsite, hoppings, j, params, disorder: None };
        debug_assert!(model.check_offsets().is_ok());
        model
    }

    fn check_offsets(&self) -> Result<()> {
        for h in &self.hoppings {
            for d in 0..2 {
                if h.offset[d] != 0 && h.offset[d].unsigned_abs() as usize >= self.cells[d] {
                    return invalid(format!("hopping offset {:?} wraps the lattice", h.offset));
                }
            }
            if h.from == h.to && h.offset == [0, 0] {
                return invalid("on-site term in hopping list");
            }
        }
        Ok(())
    }

    pub fn q(&self) -> usize {
        self.onsite.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells[0] * self.cells[1]
    }

    pub fn n_sites(&self) -> usize {
        self.n_cells() * self.q()
    }

    /// Energy unit used for guard bands and tolerances.
    pub fn energy_scale(&self) -> f64 {
        if self.j != 0.0 {
            self.j.abs()
        } else {
            1.0
        }
    }

    pub fn is_translation_invariant(&self) -> bool {
        self.disorder.is_none()
    }

    pub fn sublattice_name(&self, nu: usize) -> String {
        ((b'a' + nu as u8) as char).to_string()
    }

    pub fn sublattice_index(&self, name: &str) -> Result<usize> {
        let mut chars = name.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) if c.is_ascii_lowercase() => {
                let nu = (c as u8 - b'a') as usize;
                if nu < self.q() {
                    Ok(nu)
                } else {
                    invalid(format!("sublattice '{name}' not present in {}", self.kind.name()))
                }
            }
            _ => name
                .parse::<usize>()
                .ok()
                .filter(|&nu| nu < self.q())
                .ok_or_else(|| Error::InvalidParameter(format!("bad sublattice '{name}'"))),
        }
    }

    pub fn wrap_cell(&self, cell: [i64; 2]) -> [usize; 2] {
        [
            cell[0].rem_euclid(self.cells[0] as i64) as usize,
            cell[1].rem_euclid(self.cells[1] as i64) as usize,
        ]
    }

    pub fn cell_linear(&self, cell: [i64; 2]) -> usize {
        let c = self.wrap_cell(cell);
        c[0] + self.cells[0] * c[1]
    }

    pub fn cell_coords(&self, linear: usize) -> [usize; 2] {
        [linear % self.cells[0], linear / self.cells[0]]
    }

    pub fn site_index(&self, site: Site) -> usize {
        self.cell_linear(site.cell) * self.q() + site.sublattice
    }

    pub fn site_of_index(&self, index: usize) -> Site {
        let c = self.cell_coords(index / self.q());
        Site::new([c[0] as i64, c[1] as i64], index % self.q())
    }

    /// Commensurate k-grid, ordered with `m_x` fastest.
    pub fn k_grid(&self) -> Vec<KPoint> {
        let [nx, ny] = self.cells;
        let mut out = Vec::with_capacity(nx * ny);
        for my in 0..ny {
            for mx in 0..nx {
                out.push(KPoint { m: [mx, my], k: [fold_k(mx, nx), fold_k(my, ny)] });
            }
        }
        out
    }

    fn bond_amplitude(&self, cell: usize, h_index: usize) -> C64 {
        let t = self.hoppings[h_index].amplitude;
        match &self.disorder {
            Some(d) if !d.bond_shift.is_empty() && t.norm() > 0.0 => {
                let eps = d.bond_shift[cell * self.hoppings.len() + h_index];
                t + t / t.norm() * eps
            }
            _ => t,
        }
    }

    fn site_energy(&self, site: usize) -> f64 {
        let base = self.onsite[site % self.q()];
        match &self.disorder {
            Some(d) if !d.onsite_shift.is_empty() => base + d.onsite_shift[site],
            _ => base,
        }
    }

    /// Calls `f(i, j, t)` for every stored bond, meaning `H[i][j] += t` and
    /// `H[j][i] += t*`.
    fn for_each_bond(&self, mut f: impl FnMut(usize, usize, C64)) {
        let q = self.q();
        for cell in 0..self.n_cells() {
            let c = self.cell_coords(cell);
            for (hi, h) in self.hoppings.iter().enumerate() {
                let target = [c[0] as i64 + h.offset[0], c[1] as i64 + h.offset[1]];
                let i = cell * q + h.from;
                let j = self.cell_linear(target) * q + h.to;
                f(i, j, self.bond_amplitude(cell, hi));
            }
        }
    }

    pub fn real_space_hamiltonian(&self) -> DMatrix<C64> {
        let n = self.n_sites();
        let mut h = DMatrix::<C64>::zeros(n, n);
        for i in 0..n {
            h[(i, i)] = C64::new(self.site_energy(i), 0.0);
        }
        self.for_each_bond(|i, j, t| {
            h[(i, j)] += t;
            h[(j, i)] += t.conj();
        });
        h
    }

    /// Sparse `H·v`.
    pub fn apply_hamiltonian(&self, v: &DVector<C64>) -> DVector<C64> {
        assert_eq!(v.len(), self.n_sites());
        let mut out = DVector::<C64>::zeros(v.len());
        for i in 0..v.len() {
            out[i] = v[i] * self.site_energy(i);
        }
        self.for_each_bond(|i, j, t| {
            out[i] += t * v[j];
            out[j] += t.conj() * v[i];
        });
        out
    }

    pub fn bloch_hamiltonian(&self, k: [f64; 2]) -> Result<DMatrix<C64>> {
        if !self.is_translation_invariant() {
            return Err(Error::Unsupported("Bloch Hamiltonian of a disordered model".into()));
        }
        let q = self.q();
        let mut h = DMatrix::<C64>::zeros(q, q);
        for (nu, &e) in self.onsite.iter().enumerate() {
            h[(nu, nu)] = C64::new(e, 0.0);
        }
        for hop in &self.hoppings {
            let phase = k[0] * hop.offset[0] as f64 + k[1] * hop.offset[1] as f64;
            let t = hop.amplitude * C64::from_polar(1.0, phase);
            h[(hop.from, hop.to)] += t;
            h[(hop.to, hop.from)] += t.conj();
        }
        Ok(h)
    }
}

fn need(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        invalid(msg)
    }
}

fn positive_j(j: f64) -> Result<()> {
    need(j.is_finite() && j > 0.0, "J must be positive")
}

/// Sawtooth chain: base sites `a`, apex sites `b`. Flat band at −2J,
/// dispersive band 2J(1+cos k).
pub fn build_sawtooth(n: usize, j: f64) -> Result<LatticeModel> {
    need(n >= 4, "sawtooth needs N >= 4")?;
    positive_j(j)?;
    let s = std::f64::consts::SQRT_2 * j;
    let hops = vec![
        Hopping::real(1, 1, [1, 0], j),
        Hopping::real(1, 0, [0, 0], s),
        Hopping::real(1, 0, [-1, 0], s),
    ];
    Ok(LatticeModel::new(
        LatticeKind::Sawtooth,
        1,
        [n, 1],
        vec![0.0, 0.0],
        hops,
        j,
        ModelParams::default(),
    ))
}

/// Stub (Lieb-like) chain: `b`–`c` backbone with side cavity `a` on `b`.
pub fn build_stub(n: usize, j: f64, delta: f64) -> Result<LatticeModel> {
    need(n >= 4, "stub needs N >= 4")?;
    positive_j(j)?;
    need(delta.is_finite() && delta >= 0.0, "Delta must be >= 0")?;
    let mut hops = Vec::new();
    if delta > 0.0 {
        hops.push(Hopping::real(0, 1, [0, 0], j * delta.sqrt()));
    }
    hops.push(Hopping::real(1, 2, [0, 0], j));
    hops.push(Hopping::real(2, 1, [1, 0], j));
    Ok(LatticeModel::new(
        LatticeKind::Stub,
        1,
        [n, 1],
        vec![0.0; 3],
        hops,
        j,
        ModelParams { delta: Some(delta), ..Default::default() },
    ))
}

/// Double comb: cavities `a`, `b` (frequency ωc) hang off chain site `c`.
pub fn build_double_comb(n: usize, j: f64, t: f64, omega_c: f64) -> Result<LatticeModel> {
    need(n >= 3, "double comb needs N >= 3")?;
    positive_j(j)?;
    need(t.is_finite() && t > 0.0, "t must be positive")?;
    need(omega_c.is_finite(), "omega_c must be finite")?;
    let hops = vec![
        Hopping::real(0, 2, [0, 0], t),
        Hopping::real(1, 2, [0, 0], t),
        Hopping::real(2, 2, [1, 0], j),
    ];
    Ok(LatticeModel::new(
        LatticeKind::DoubleComb,
        1,
        [n, 1],
        vec![omega_c, omega_c, 0.0],
        hops,
        j,
        ModelParams { t: Some(t), omega_c: Some(omega_c), ..Default::default() },
    ))
}

/// Five-site 1D Kagomè chain; flat band at +2J touching a dispersive edge.
pub fn build_kagome1d(n: usize, j: f64) -> Result<LatticeModel> {
    need(n >= 4, "kagome1d needs N >= 4")?;
    positive_j(j)?;
    let hops = vec![
        Hopping::real(0, 1, [0, 0], j),
        Hopping::real(1, 2, [0, 0], -j),
        Hopping::real(2, 3, [0, 0], -j),
        Hopping::real(3, 4, [0, 0], j),
        Hopping::real(4, 2, [1, 0], -j),
        Hopping::real(0, 2, [1, 0], -j),
        Hopping::real(0, 1, [1, 0], -j),
        Hopping::real(4, 3, [1, 0], -j),
    ];
    Ok(LatticeModel::new(
        LatticeKind::Kagome1d,
        1,
        [n, 1],
        vec![0.0; 5],
        hops,
        j,
        ModelParams::default(),
    ))
}

/// Checkerboard lattice with `H_k = ω_d(k)·I − J w w†`, where
/// `ω_d = 2J(2 − cos kx − cos ky)` and `w = (1 − e^{ikx}, 1 − e^{−iky})`; flat band at 0 touching the
/// dispersive band at Γ.
pub fn build_checkerboard(nx: usize, ny: usize, j: f64) -> Result<LatticeModel> {
    need(nx >= 4 && ny >= 4, "checkerboard needs Nx, Ny >= 4")?;
    positive_j(j)?;
    let hops = vec![
        Hopping::real(0, 0, [0, 1], -j),
        Hopping::real(1, 1, [1, 0], -j),
        Hopping::real(0, 1, [0, 0], -j),
        Hopping::real(0, 1, [1, 0], j),
        Hopping::real(0, 1, [0, 1], j),
        Hopping::real(0, 1, [1, 1], -j),
    ];
    Ok(LatticeModel::new(
        LatticeKind::Checkerboard,
        2,
        [nx, ny],
        vec![2.0 * j, 2.0 * j],
        hops,
        j,
        ModelParams::default(),
    ))
}

/// Homogeneous chain `H = J Σ (a†_n a_{n+1} + h.c.)`, band `2J cos k`.
pub fn build_chain(n: usize, j: f64) -> Result<LatticeModel> {
    need(n >= 3, "chain needs N >= 3")?;
    need(j.is_finite() && j != 0.0, "J must be nonzero")?;
    Ok(LatticeModel::new(
        LatticeKind::Chain,
        1,
        [n, 1],
        vec![0.0],
        vec![Hopping::real(0, 0, [1, 0], j)],
        j,
        ModelParams::default(),
    ))
}

/// A single isolated cavity of frequency ωc.
pub fn build_cavity(omega_c: f64) -> Result<LatticeModel> {
    need(omega_c.is_finite(), "omega_c must be finite")?;
    Ok(LatticeModel::new(
        LatticeKind::Cavity,
        1,
        [1, 1],
        vec![omega_c],
        Vec::new(),
        1.0,
        ModelParams { omega_c: Some(omega_c), ..Default::default() },
    ))
}

/// Draws a disorder realization. Strength 0 returns an identical model.
pub fn apply_disorder(model: &LatticeModel, spec: DisorderSpec) -> Result<LatticeModel> {
    need(spec.strength.is_finite() && spec.strength >= 0.0, "disorder strength must be >= 0")?;
    if spec.strength == 0.0 {
        return Ok(model.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let w = spec.strength;
    let (onsite_shift, bond_shift) = match spec.kind {
        DisorderKind::Diagonal => {
            ((0..model.n_sites()).map(|_| rng.gen_range(-w..=w)).collect(), Vec::new())
        }
        DisorderKind::OffDiagonal => {
            let n = model.n_cells() * model.hoppings.len();
            (Vec::new(), (0..n).map(|_| rng.gen_range(-w..=w)).collect())
        }
    };
    let mut out = model.clone();
    out.disorder = Some(Disorder { spec, onsite_shift, bond_shift });
    Ok(out)
}

/// Either a single cell count or `[Nx, Ny]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CellCount {
    One(usize),
    Two([usize; 2]),
}

/// JSON-facing lattice description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub model: LatticeKind,
    #[serde(rename = "N")]
    pub n: CellCount,
    #[serde(rename = "J", default = "default_j")]
    pub j: f64,
    #[serde(default)]
    pub params: ModelParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disorder: Option<DisorderSpec>,
}

fn default_j() -> f64 {
    1.0
}

impl LatticeSpec {
    pub fn build(&self) -> Result<LatticeModel> {
        let one = |what: &str| match self.n {
            CellCount::One(n) => Ok(n),
            CellCount::Two(_) => invalid(format!("{what} takes a single N")),
        };
        let p = &self.params;
        let model = match self.model {
            LatticeKind::Sawtooth => build_sawtooth(one("sawtooth")?, self.j)?,
            LatticeKind::Stub => {
                let delta = p.delta.ok_or_else(|| Error::InvalidParameter("stub needs Delta".into()))?;
                build_stub(one("stub")?, self.j, delta)?
            }
            LatticeKind::DoubleComb => build_double_comb(
                one("doublecomb")?,
                self.j,
                p.t.unwrap_or(self.j),
                p.omega_c.unwrap_or(0.0),
            )?,
            LatticeKind::Kagome1d => build_kagome1d(one("kagome1d")?, self.j)?,
            LatticeKind::Checkerboard => {
                let [nx, ny] = match self.n {
                    CellCount::One(n) => [n, n],
                    CellCount::Two(v) => v,
                };
                build_checkerboard(nx, ny, self.j)?
            }
            LatticeKind::Chain => build_chain(one("chain")?, self.j)?,
            LatticeKind::Cavity => build_cavity(p.omega_c.unwrap_or(0.0))?,
        };
        match self.disorder {
            Some(d) => apply_disorder(&model, d),
            None => Ok(model),
        }
    }
}
