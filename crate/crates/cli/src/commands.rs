use flatqed::boundstate::{bound_state, localization_length_fit, EmitterSpec, FitWindow};
use flatqed::dynamics::{evolve, rabi_frequency, rabi_frequency_from_dynamics, InitialState};
use flatqed::flatband::{cls_set, lambda_1d, lambda_2d, xi_2d_axis, xi_analytic_1d, WeightFunction};
use flatqed::giant::{cls_site_state, giant_interaction};
use flatqed::greens::{fb_projector, Eigensystem, FB_TOL};
use flatqed::interactions::{effective_hamiltonian, interaction_matrix, spin_dynamics, InteractionMatrix, PoleChoice};
use flatqed::io::{cell_from_vec, emitters_from_json};
use flatqed::lattice::{
    CellCount, DisorderKind, DisorderSpec, LatticeKind, LatticeModel, LatticeSpec, ModelParams, Site, apply_disorder,
};
use flatqed::spectrum::{band_structure_on_grid, cluster_width};
use rayon::prelude::*;
use serde_json::Value;

use crate::args::*;
use crate::table::{Cell, Table};
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(CliError::Config(msg.into()))
}

/// Linear or logarithmic grid from `start:stop:lin|log:count`.
pub fn parse_scan(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let [start, stop, spacing, count] = parts[..] else {
        return config(format!("scan {text:?}: expected start:stop:lin|log:count"));
    };
    let num = |s: &str| s.parse::<f64>().map_err(|_| CliError::Config(format!("scan {text:?}: bad number {s:?}")));
    let (start, stop) = (num(start)?, num(stop)?);
    let count: usize = count.parse().map_err(|_| CliError::Config(format!("scan {text:?}: bad count")))?;
    if count == 0 || !start.is_finite() || !stop.is_finite() {
        return config(format!("scan {text:?} is empty or not finite"));
    }
    let frac = |i: usize| if count == 1 { 0.0 } else { i as f64 / (count - 1) as f64 };
    match spacing {
        "lin" => Ok((0..count).map(|i| start + (stop - start) * frac(i)).collect()),
        "log" => {
            if start <= 0.0 || stop <= 0.0 {
                return config(format!("scan {text:?}: log spacing needs positive bounds"));
            }
            let (a, b) = (start.ln(), stop.ln());
            Ok((0..count)
                .map(|i| match i {
                    0 => start,
                    i if i + 1 == count => stop,
                    _ => (a + (b - a) * frac(i)).exp(),
                })
                .collect())
        }
        _ => config(format!("scan {text:?}: spacing must be lin or log")),
    }
}

fn parse_cell(text: &str) -> Result<Vec<i64>> {
    text.split(',')
        .map(|s| s.trim().parse::<i64>().map_err(|_| CliError::Config(format!("bad cell {text:?}"))))
        .collect()
}

pub fn parse_site(model: &LatticeModel, text: &str) -> Result<Site> {
    let Some((sub, cell)) = text.split_once(':') else {
        return config(format!("site {text:?}: expected sublattice:cell, e.g. a:50"));
    };
    let cell = cell_from_vec(model, &parse_cell(cell)?)?;
    Ok(Site::new(cell, model.sublattice_index(sub)?))
}

fn from_name<T: serde::de::DeserializeOwned>(what: &str, name: &str) -> Result<T> {
    serde_json::from_value(Value::String(name.to_owned())).map_err(|_| CliError::Config(format!("unknown {what} {name:?}")))
}

/// The clean lattice and, if requested, its disorder realization.
pub struct Lattice {
    pub clean: LatticeModel,
    pub model: LatticeModel,
    pub disorder: Option<DisorderSpec>,
}

impl Lattice {
    pub fn build(args: &LatticeArgs) -> Result<Self> {
        let kind: LatticeKind = from_name("model", &args.model)?;
        let n = match parse_cell(&args.n)?[..] {
            [n] if n > 0 => CellCount::One(n as usize),
            [nx, ny] if nx > 0 && ny > 0 => CellCount::Two([nx as usize, ny as usize]),
            _ => return config(format!("bad --N {:?}", args.n)),
        };
        let spec = LatticeSpec {
            model: kind,
            n,
            j: args.j,
            params: ModelParams { delta: args.delta_param, t: args.t, omega_c: args.omega_c },
            disorder: None,
        };
        let clean = spec.build()?;
        let disorder = match (&args.disorder_kind, args.disorder_strength) {
            (None, None) => None,
            (kind, Some(strength)) => Some(DisorderSpec {
                kind: from_name("disorder kind", kind.as_deref().unwrap_or("diagonal"))?,
                strength,
                seed: args.seed,
            }),
            (Some(_), None) => return config("--disorder-kind needs --disorder-strength"),
        };
        let model = match disorder {
            Some(d) => apply_disorder(&clean, d)?,
            None => clean.clone(),
        };
        Ok(Lattice { clean, model, disorder })
    }

    /// Energy that `--delta` is measured from.
    pub fn reference_energy(&self) -> Result<f64> {
        match self.clean.kind {
            LatticeKind::Chain => Ok(2.0 * self.clean.j.abs()),
            LatticeKind::Cavity => Ok(self.clean.params.omega_c.unwrap_or(0.0)),
            _ => Ok(cls_set(&self.clean)?.omega_fb),
        }
    }
}

fn bare_frequency(lat: &Lattice, args: &EmitterArgs) -> Result<f64> {
    match (args.omega0, args.delta) {
        (Some(w), _) => Ok(w),
        (None, Some(d)) => Ok(lat.reference_energy()? + d),
        (None, None) => config("one of --omega0 or --delta is required"),
    }
}

fn emitters(lat: &Lattice, args: &EmitterArgs) -> Result<Vec<EmitterSpec>> {
    let inline = match (&args.emitters, &args.emitters_inline) {
        (Some(path), _) => Some(
            std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("reading {}: {e}", path.display())))?,
        ),
        (None, Some(text)) => Some(text.clone()),
        (None, None) => None,
    };
    if let Some(text) = inline {
        if !args.site.is_empty() {
            return config("--site and --emitters are mutually exclusive");
        }
        return Ok(emitters_from_json(&lat.model, &text)?);
    }
    if args.site.is_empty() {
        return config("no emitters: give --site or --emitters");
    }
    if !(args.g.is_finite() && args.g >= 0.0) {
        return config("--g must be >= 0");
    }
    let omega0 = bare_frequency(lat, args)?;
    args.site.iter().map(|s| Ok(EmitterSpec::small(parse_site(&lat.model, s)?, args.g, omega0))).collect()
}

fn cell_columns(model: &LatticeModel, site: Site, row: &mut Vec<Cell>) {
    row.push(site.cell[0].into());
    if model.dim == 2 {
        row.push(site.cell[1].into());
    }
}

fn time_grid(t_max: f64, steps: usize) -> Result<Vec<f64>> {
    if !(t_max.is_finite() && t_max >= 0.0) || steps == 0 {
        return config("--t-max must be >= 0 and --steps > 0");
    }
    Ok((0..=steps).map(|i| t_max * i as f64 / steps as f64).collect())
}

pub fn bands(args: &BandsArgs) -> Result<Table> {
    let lat = Lattice::build(&args.lattice)?;
    let bs = band_structure_on_grid(&lat.model)?;
    let dim = lat.model.dim;
    let mut table = Table::new(if dim == 2 { &["k_1", "k_2", "band_index", "energy"] } else { &["k_1", "band_index", "energy"] });
    for (ik, k) in bs.k_grid.iter().enumerate() {
        for (m, band) in bs.bands.iter().enumerate() {
            let mut row: Vec<Cell> = k[..dim].iter().map(|&x| x.into()).collect();
            row.push(m.into());
            row.push(band[ik].into());
            table.push(row);
        }
    }
    Ok(table)
}

pub fn boundstate(args: &BoundstateArgs) -> Result<Table> {
    let lat = Lattice::build(&args.lattice)?;
    let ems = emitters(&lat, &args.emitter)?;
    let [em] = &ems[..] else {
        return config(format!("boundstate takes one emitter, got {}", ems.len()));
    };
    let model = &lat.model;
    let bs = bound_state(&Eigensystem::new(model), em)?;
    eprintln!(
        "omega_bs = {:?}, atom population = {:?}, pole residual = {:e}, eigen residual = {:e}",
        bs.omega,
        bs.atom.norm_sqr(),
        bs.pole_residual,
        bs.eigen_residual
    );
    let cols: &[&str] = if model.dim == 2 {
        &["cell_index", "cell_index_2", "sublattice", "re", "im", "abs"]
    } else {
        &["cell_index", "sublattice", "re", "im", "abs"]
    };
    let mut table = Table::new(cols);
    for (i, z) in bs.photon.iter().enumerate() {
        let site = model.site_of_index(i);
        let mut row = Vec::new();
        cell_columns(model, site, &mut row);
        row.extend([model.sublattice_name(site.sublattice).into(), z.re.into(), z.im.into(), z.norm().into()]);
        table.push(row);
    }
    Ok(table)
}

pub fn loclen(args: &LoclenArgs) -> Result<Table> {
    let lat = Lattice::build(&args.lattice)?;
    let e = &args.emitter;
    let [site] = &e.site[..] else {
        return config("loclen takes exactly one --site");
    };
    let site = parse_site(&lat.model, site)?;
    let reference = lat.reference_energy()?;
    let deltas = match (&args.scan_delta, e.delta, e.omega0) {
        (Some(scan), None, None) => parse_scan(scan)?,
        (None, Some(d), None) => vec![d],
        (None, None, Some(w)) => vec![w - reference],
        (None, None, None) => return config("give --scan-delta, --delta or --omega0"),
        _ => return config("--scan-delta, --delta and --omega0 are mutually exclusive"),
    };
    if deltas.contains(&0.0) {
        return config("detuning must be nonzero");
    }
    let axis = match args.axis {
        Axis::X => 0,
        Axis::Y if lat.model.dim == 2 => 1,
        Axis::Y => return config("--axis y needs a 2D lattice"),
    };
    let window = FitWindow { d_min: args.d_min, d_max: args.d_max };
    let eig = Eigensystem::new(&lat.model);
    let rows: Vec<Vec<Cell>> = deltas
        .par_iter()
        .map(|&delta| {
            let em = EmitterSpec::small(site, e.g, reference + delta);
            let bs = bound_state(&eig, &em)?;
            let fit = localization_length_fit(&lat.model, &bs.photon, site, site.sublattice, axis, window)?;
            Ok(vec![
                delta.into(),
                em.omega0.into(),
                bs.omega.into(),
                fit.lambda.into(),
                fit.r_squared.into(),
                fit.points.len().into(),
            ])
        })
        .collect::<std::result::Result<_, flatqed::Error>>()?;
    let mut table = Table::new(&["delta", "omega0", "omega_bs", "lambda", "r_squared", "points"]);
    rows.into_iter().for_each(|r| table.push(r));
    Ok(table)
}

pub fn xi(args: &XiArgs) -> Result<Table> {
    let alphas = match (args.alpha, &args.scan_alpha) {
        (Some(a), None) => vec![a],
        (None, Some(scan)) => parse_scan(scan)?,
        (None, None) => return config("give --alpha or --scan-alpha"),
        _ => return config("--alpha and --scan-alpha are mutually exclusive"),
    };
    if alphas.iter().any(|a| !(a.abs() < 0.5)) {
        return config("|alpha| must be < 1/2");
    }
    if args.lambda {
        let mut table = Table::new(&["alpha", "lambda1d", "lambda2d", "lambda2d_prime"]);
        for &a in &alphas {
            let l1 = lambda_1d(a)?;
            // λ_2D is only defined for 0 < |α| ≤ 1/4
            let (l2, l2p) = lambda_2d(a).unwrap_or((f64::NAN, f64::NAN));
            table.push(vec![a.into(), l1.into(), l2.into(), l2p.into()]);
        }
        return Ok(table);
    }
    let dim = args.dim;
    if dim == 2 && alphas.iter().any(|a| !(a.abs() < 0.25)) {
        return config("2D xi needs |alpha| < 1/4");
    }
    let nk = args.nk.unwrap_or(if dim == 1 { 1 << 14 } else { 1 << 10 });
    let jobs: Vec<(f64, usize)> = alphas.iter().flat_map(|&a| (0..=args.max_dist).map(move |d| (a, d))).collect();
    let rows: Vec<Vec<Cell>> = jobs
        .par_iter()
        .map(|&(a, d)| {
            let w = if dim == 1 { WeightFunction::new_1d(a) } else { WeightFunction::new_2d(a, a) };
            let numeric = w.xi_numeric([d as i64, 0], nk)?;
            let mut row = vec![a.into(), d.into(), numeric.into()];
            if args.compare {
                let exact = if dim == 1 {
                    xi_analytic_1d(a, d as i64)?
                } else if a == 0.0 {
                    f64::from(u8::from(d == 0))
                } else {
                    xi_2d_axis(a, d)?
                };
                row.extend([exact.into(), (numeric - exact).abs().into()]);
            }
            Ok(row)
        })
        .collect::<std::result::Result<_, flatqed::Error>>()?;
    let cols: &[&str] = if args.compare {
        &["alpha", "dist", "xi_numeric", "xi_analytic", "abs_diff"]
    } else {
        &["alpha", "dist", "xi_numeric"]
    };
    let mut table = Table::new(cols);
    rows.into_iter().for_each(|r| table.push(r));
    Ok(table)
}

fn interaction_output(im: &InteractionMatrix, spin: &SpinArgs) -> Result<Table> {
    let n = im.k.nrows();
    if let Some(t_max) = spin.t_max {
        if spin.initial >= n {
            return config(format!("--initial {} out of range for {n} emitters", spin.initial));
        }
        let times = time_grid(t_max, spin.steps)?;
        let trace = spin_dynamics(&effective_hamiltonian(&im.k), spin.initial, &times)?;
        let mut table = Table::new(&["t", "emitter", "re", "im", "population"]);
        for (t, amps) in times.iter().zip(&trace.amplitudes) {
            for (i, c) in amps.iter().enumerate() {
                table.push(vec![(*t).into(), i.into(), c.re.into(), c.im.into(), c.norm_sqr().into()]);
            }
        }
        return Ok(table);
    }
    let mut table = Table::new(&["i", "j", "re", "im", "abs"]);
    for i in 0..n {
        for j in 0..n {
            let z = im.k[(i, j)];
            table.push(vec![i.into(), j.into(), z.re.into(), z.im.into(), z.norm().into()]);
        }
    }
    Ok(table)
}

pub fn interactions(args: &InteractionsArgs) -> Result<Table> {
    let lat = Lattice::build(&args.lattice)?;
    let ems = emitters(&lat, &args.emitter)?;
    if let Some(t) = args.spin.t_max {
        time_grid(t, args.spin.steps)?;
    }
    let pole = match args.pole {
        Pole::Bare => PoleChoice::Bare,
        Pole::Exact => PoleChoice::Exact,
    };
    let im = interaction_matrix(&Eigensystem::new(&lat.model), &ems, pole)?;
    interaction_output(&im, &args.spin)
}

pub fn giants(args: &GiantsArgs) -> Result<Table> {
    let lat = Lattice::build(&args.lattice)?;
    let model = &lat.model;
    let cls = cls_set(model)?;
    let cells: Vec<[i64; 2]> = if args.all_cells {
        (0..model.n_cells()).map(|l| model.cell_coords(l).map(|c| c as i64)).collect()
    } else {
        args.cell.iter().map(|c| Ok(cell_from_vec(model, &parse_cell(c)?)?)).collect::<Result<_>>()?
    };
    if cells.is_empty() {
        return config("no giants: give --cell or --all-cells");
    }
    if args.delta == 0.0 || !args.delta.is_finite() {
        return config("--delta must be nonzero");
    }
    if let Some(t) = args.spin.t_max {
        time_grid(t, args.spin.steps)?;
    }
    let states = cells.iter().map(|&c| cls_site_state(model, &cls, c)).collect::<flatqed::Result<Vec<_>>>()?;
    let im = giant_interaction(&Eigensystem::new(model), &states, cls.omega_fb + args.delta, args.g)?;
    interaction_output(&im, &args.spin)
}

pub fn dynamics(args: &DynamicsArgs) -> Result<Table> {
    let lat = Lattice::build(&args.lattice)?;
    let ems = emitters(&lat, &args.emitter)?;
    let times = time_grid(args.t_max, args.steps)?;
    if args.initial >= ems.len() {
        return config(format!("--initial {} out of range for {} emitters", args.initial, ems.len()));
    }
    let model = &lat.model;
    let ts = evolve(model, &ems, &InitialState::Emitter(args.initial), &times, false)?;
    if let [em] = &ems[..] {
        rabi_summary(model, em, &times, &ts.population(0));
    }
    let mut table = Table::new(&["t", "atom_index", "population"]);
    for (t, pops) in times.iter().zip(&ts.emitter_populations) {
        for (i, p) in pops.iter().enumerate() {
            table.push(vec![(*t).into(), i.into(), (*p).into()]);
        }
    }
    Ok(table)
}

/// Reports the Rabi frequency when a single emitter is resonant with a flat band.
fn rabi_summary(model: &LatticeModel, em: &EmitterSpec, times: &[f64], pe: &[f64]) {
    let Ok(cls) = cls_set(model) else { return };
    if (em.omega0 - cls.omega_fb).abs() > FB_TOL * model.energy_scale() {
        return;
    }
    let eig = Eigensystem::new(model);
    let (Ok(p), Ok((chi, g))) = (fb_projector(&eig, cls.omega_fb, FB_TOL * model.energy_scale()), em.chi(model)) else {
        return;
    };
    let predicted = rabi_frequency(&p, &chi, g);
    match rabi_frequency_from_dynamics(times, pe) {
        Ok(fit) => eprintln!("rabi frequency: projector {predicted}, first-minimum fit {fit}"),
        Err(_) => eprintln!("rabi frequency: projector {predicted} (no population minimum in the time window)"),
    }
}

pub fn disorder(args: &DisorderArgs) -> Result<Table> {
    let lat = Lattice::build(&args.lattice)?;
    let Some(spec) = lat.disorder else {
        return config("disorder needs --disorder-strength (and optionally --disorder-kind)");
    };
    if args.seeds == 0 {
        return config("--seeds must be positive");
    }
    let omega_fb = cls_set(&lat.clean)?.omega_fb;
    let n = lat.clean.n_cells();
    let tol = 1e-10 * lat.clean.energy_scale();
    let kind = match spec.kind {
        DisorderKind::Diagonal => "diagonal",
        DisorderKind::OffDiagonal => "off-diagonal",
    };
    let rows: Vec<Vec<Cell>> = (spec.seed..spec.seed + args.seeds)
        .into_par_iter()
        .map(|seed| {
            let model = apply_disorder(&lat.clean, DisorderSpec { seed, ..spec })?;
            let eig = Eigensystem::new(&model);
            let e = eig.energies();
            let count = e.iter().filter(|x| (*x - omega_fb).abs() < tol).count();
            let width = cluster_width(e, omega_fb, n);
            Ok(vec![seed.into(), kind.into(), spec.strength.into(), count.into(), width.into()])
        })
        .collect::<std::result::Result<_, flatqed::Error>>()?;
    let mut table = Table::new(&["seed", "kind", "strength", "fb_count", "fb_width"]);
    rows.into_iter().for_each(|r| table.push(r));
    Ok(table)
}
