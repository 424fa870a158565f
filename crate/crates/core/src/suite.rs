//! Verification suite over a model: runs the selected checks concurrently and
//! assembles a schema-versioned JSON report.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::car::{random_polynomial, CarPolynomial, Generator, Parity, Region, Site};
use crate::dynamics::{commutation_residual, norm_bound_check, stabilization_ladder};
use crate::error::{Result, SusyError};
use crate::fock::checks::{affiliation_check, conjugation_oracle, face_check, structural_identities};
use crate::fock::spectrum::{report_from, Spectrum};
use crate::fock::states::ChargeWindow;
use crate::fock::{verify_product_states, verify_state_susy, BoundaryMode, FockRepresentation, LatticeState, SusyOperators};
use crate::model::{Boundary, CheckName, Model, Parameters};
use crate::qft::{
    check_resolvent_relations, compute_pairings, mollifier_convergence, space_pairing, susy_state_wick_check, Grid,
    Preset, TestFunction, TruncatedQftSpace,
};
use crate::qft::checks::default_words;
use crate::supercharge::{ChargeAssignment, NilpotencyVerdict, NilpotentSuperderivation, Superderivation};

pub const SCHEMA_VERSION: u32 = 1;

/// Algebra and spectrum residuals are compared against this multiple of `||H||`.
pub const ALGEBRA_RTOL: f64 = 1e-10;
/// Matrix-path tolerance for state checks.
pub const STATE_TOL: f64 = 1e-12;
/// Face decompositions and affiliation commutators.
pub const FACE_TOL: f64 = 1e-10;
/// Structural identities on random local elements (absolute).
pub const STRUCTURAL_TOL: f64 = 1e-9;
/// Resolvent identities that hold exactly as matrix identities.
pub const RESOLVENT_TOL: f64 = 1e-12;
/// Two-point identity between the fermion and boson pairings.
pub const WICK_PAIRING_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Measured,
    Error,
}

impl Status {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self, Status::Pass | Status::Measured)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub name: CheckName,
    pub status: Status,
    pub details: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub model: String,
    pub seed: u64,
    pub checks: Vec<CheckReport>,
    pub passed: bool,
}

impl Report {
    /// The report with timing fields removed; byte-identical across runs.
    pub fn without_timings(&self) -> Report {
        let mut r = self.clone();
        r.checks.iter_mut().for_each(|c| c.elapsed_ms = None);
        r
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn check(&self, name: CheckName) -> Option<&CheckReport> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Runs `checks` (deduplicated, in the given order) on the current rayon pool.
pub fn run_suite(model: &Model, checks: &[CheckName]) -> Report {
    let mut names: Vec<CheckName> = Vec::new();
    for c in checks {
        if !names.contains(c) {
            names.push(*c);
        }
    }
    let results: Vec<CheckReport> = names
        .par_iter()
        .map(|&name| {
            let start = Instant::now();
            let (status, details) = match run_check(model, name) {
                Ok(r) => r,
                Err(e) => (Status::Error, json!({ "error": e.to_string() })),
            };
            CheckReport { name, status, details, elapsed_ms: Some(start.elapsed().as_millis() as u64) }
        })
        .collect();
    Report {
        schema_version: SCHEMA_VERSION,
        model: model.file.name.clone(),
        seed: model.file.parameters.seed,
        passed: results.iter().all(|c| c.status.is_ok()),
        checks: results,
    }
}

pub fn run_check(model: &Model, name: CheckName) -> Result<(Status, Value)> {
    let psi = &model.assignment;
    let p = &model.file.parameters;
    match name {
        CheckName::Nilpotent => nilpotent(psi),
        CheckName::Leibniz => leibniz(psi, p),
        CheckName::SusyAlgebra => susy_algebra(psi, p),
        CheckName::Spectrum => spectrum(psi, p),
        CheckName::States => states(psi, p),
        CheckName::Dynamics => dynamics(psi, p),
        CheckName::Face => face(psi, p),
        CheckName::Affiliation => affiliation(psi, p),
        CheckName::Case2 => case2(p),
    }
}

/// `n` consecutive sites along the first axis, centred at the origin.
pub fn chain(dim: usize, n: usize) -> Region {
    let lo = -((n as i32 - 1) / 2);
    let mut bounds = vec![(0, 0); dim];
    bounds[0] = (lo, lo + n as i32 - 1);
    Region::boxed(&bounds)
}

fn boundary_mode(b: Boundary) -> BoundaryMode {
    match b {
        Boundary::Open => BoundaryMode::Open,
        Boundary::Crossing => BoundaryMode::Crossing,
    }
}

fn smallest(sizes: &[usize]) -> Result<usize> {
    sizes.iter().copied().min().ok_or_else(|| SusyError::InvalidArgument("no chain lengths given".into()))
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn nilpotent(psi: &ChargeAssignment) -> Result<(Status, Value)> {
    Ok(match Superderivation::new(psi.clone()).check_nilpotent(2) {
        NilpotencyVerdict::Nilpotent { generators_checked } => {
            (Status::Pass, json!({ "nilpotent": true, "generators_checked": generators_checked }))
        }
        NilpotencyVerdict::NotNilpotent { generator, image } => (
            Status::Fail,
            json!({ "nilpotent": false, "counterexample": generator.to_string(), "delta_squared": image.to_string() }),
        ),
    })
}

fn leibniz(psi: &ChargeAssignment, p: &Parameters) -> Result<(Status, Value)> {
    let sd = Superderivation::new(psi.clone());
    let region = chain(psi.dim(), smallest(&p.sites)?);
    let sites = region.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let maps: [(&str, fn(&Superderivation, &CarPolynomial) -> CarPolynomial); 4] = [
        ("delta", Superderivation::delta),
        ("delta_star", Superderivation::delta_star),
        ("delta_s1", Superderivation::delta_s1),
        ("delta_s2", Superderivation::delta_s2),
    ];
    let mut failures = Vec::new();
    for k in 0..p.samples {
        let a = random_polynomial(&mut rng, &sites, 3, 3);
        let b = random_polynomial(&mut rng, &sites, 3, 3);
        for (label, d) in &maps {
            let lhs = d(&sd, &(&a * &b));
            let rhs = &(&d(&sd, &a) * &b) + &(&a.gamma() * &d(&sd, &b));
            if lhs != rhs {
                failures.push(json!({ "sample": k, "map": label }));
            }
        }
        if sd.delta_star(&a) != sd.delta_star_via_conjugation(&a) {
            failures.push(json!({ "sample": k, "map": "conjugation" }));
        }
    }
    let structural = structural_identities(psi, &region, p.samples.min(4), p.seed)?;
    let ok = failures.is_empty() && structural.max() <= STRUCTURAL_TOL;
    Ok((
        Status::from_bool(ok),
        json!({
            "region": region.to_string(),
            "samples": p.samples,
            "exact_failures": failures,
            "structural": to_json(&structural),
            "structural_tolerance": STRUCTURAL_TOL,
        }),
    ))
}

fn susy_algebra(psi: &ChargeAssignment, p: &Parameters) -> Result<(Status, Value)> {
    let mut ok = true;
    let mut rows = Vec::new();
    for &n in &p.sites {
        let rep = FockRepresentation::new(chain(psi.dim(), n))?;
        let ops = SusyOperators::build(&rep, psi, boundary_mode(p.boundary))?;
        let res = ops.residuals();
        let tol = ALGEBRA_RTOL * res.h_norm;
        ok &= res.max() <= tol;
        rows.push(json!({ "sites": n, "max_residual": res.max(), "tolerance": tol, "residuals": to_json(&res) }));
    }
    Ok((Status::from_bool(ok), json!({ "chains": rows })))
}

fn spectrum(psi: &ChargeAssignment, p: &Parameters) -> Result<(Status, Value)> {
    let mode = boundary_mode(p.boundary);
    let mut ok = true;
    let mut rows = Vec::new();
    for &n in &p.sites {
        let region = chain(psi.dim(), n);
        let rep = FockRepresentation::new(region.clone())?;
        let ops = SusyOperators::build(&rep, psi, mode)?;
        let spec = Spectrum::compute(&ops)?;
        let r = report_from(&ops, &spec);
        let positive = r.min_eigenvalue >= -ALGEBRA_RTOL * r.h_norm;

        // Supersymmetric vector states are exactly the kernel vectors.
        let window = ChargeWindow::Finite(mode);
        let mut kernel = spec.kernel(Parity::Even);
        kernel.extend(spec.kernel(Parity::Odd));
        let mut kernel_susy = true;
        for v in kernel.iter().take(8) {
            let st = LatticeState::vector(region.clone(), v.clone())?;
            kernel_susy &= verify_state_susy(&st, psi, &region, window, STATE_TOL)?.supersymmetric;
        }
        let excited = r.doublets.first().map(|d| d.energy);
        let mut excited_flagged = true;
        if let Some(e) = excited {
            let tol = 1e-8 * spec.h_norm;
            let v = spec.eigenspace(e, tol, Parity::Even).into_iter().chain(spec.eigenspace(e, tol, Parity::Odd)).next();
            if let Some(v) = v {
                let st = LatticeState::vector(region.clone(), v)?;
                excited_flagged = !verify_state_susy(&st, psi, &region, window, STATE_TOL)?.supersymmetric;
            }
        }
        ok &= positive && r.all_paired && kernel_susy && excited_flagged;
        rows.push(json!({
            "sites": n,
            "dim": r.dim,
            "h_norm": r.h_norm,
            "min_eigenvalue": r.min_eigenvalue,
            "kernel_dim_even": r.kernel_dim_even,
            "kernel_dim_odd": r.kernel_dim_odd,
            "witten_index": r.witten_index,
            "doublets": r.doublets.len(),
            "all_paired": r.all_paired,
            "kernel_states_supersymmetric": kernel_susy,
            "excited_state_flagged": excited_flagged,
        }));
    }
    Ok((Status::from_bool(ok), json!({ "chains": rows })))
}

fn states(psi: &ChargeAssignment, p: &Parameters) -> Result<(Status, Value)> {
    let mut ok = true;
    let mut rows = Vec::new();
    for &n in &p.chains {
        let region = chain(psi.dim(), n);
        let reports = verify_product_states(psi, &region, ChargeWindow::Local, STATE_TOL)?;
        for (label, r) in ["fock", "anti-fock"].into_iter().zip(reports) {
            ok &= r.supersymmetric && r.symbolic_exact_zero == Some(true);
            rows.push(json!({ "sites": n, "state": label, "report": to_json(&r) }));
        }
    }
    Ok((Status::from_bool(ok), json!({ "window": "local", "tolerance": STATE_TOL, "results": rows })))
}

/// Samples for the norm-bound check: random polynomials on two neighbouring sites.
pub fn norm_samples(dim: usize, count: usize, seed: u64) -> Vec<CarPolynomial> {
    let sites = chain(dim, 2).to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let a = random_polynomial(&mut rng, &sites, 3, 3);
        if !a.support().is_empty() {
            out.push(a);
        }
    }
    out
}

fn origin(dim: usize) -> Site {
    Site::new(&vec![0; dim])
}

fn dynamics(psi: &ChargeAssignment, p: &Parameters) -> Result<(Status, Value)> {
    let d: NilpotentSuperderivation = match Superderivation::new(psi.clone()).into_nilpotent() {
        Ok(d) => d,
        Err(e) => return Ok((Status::Fail, json!({ "nilpotent": false, "reason": e.to_string() }))),
    };
    let c = d.norm_constants();
    let a = CarPolynomial::generator(Generator::Annihilate(origin(psi.dim())));
    let t = p.time_fraction * c.t0;

    let samples = norm_samples(psi.dim(), p.samples, p.seed);
    let norm = norm_bound_check(&d, &samples, p.norm_orders);

    let oracle_region = chain(psi.dim(), 3);
    let oracle = conjugation_oracle(&d, &oracle_region, &a, t, p.tol)?;

    let (psi_s, _) = d.symmetrized();
    let rk = 2 * p.ladder_order as i32 * psi_s.range() as i32;
    let ks = vec![rk / 2, rk, rk + 1];
    let stab = stabilization_ladder(&d, &ks, &a, p.ladder_order, p.term_budget)?;
    let ladder: Vec<Region> = ks.iter().map(|k| a.support().enlarge(*k as u32)).collect();
    let comm = commutation_residual(&d, &ladder, &a, t, p.ladder_order, p.term_budget)?;

    let stable = stab.changed.last().is_none_or(|c| !c);
    let commutes = comm.last().is_none_or(|r| r.exact_zero);
    let ok = norm.violations == 0 && oracle.within_tail && stable && commutes;
    Ok((
        Status::from_bool(ok),
        json!({
            "constants": to_json(&c),
            "t": t,
            "norm_bound": {
                "samples": samples.len(),
                "max_n": p.norm_orders,
                "violations": norm.violations,
                "min_slack": norm.min_slack,
            },
            "oracle": to_json(&oracle),
            "stabilization": to_json(&stab),
            "commutation": comm.iter().map(|r| json!({
                "sites": r.region.len(),
                "residual": r.residual,
                "exact_zero": r.exact_zero,
            })).collect::<Vec<_>>(),
        }),
    ))
}

fn face(psi: &ChargeAssignment, p: &Parameters) -> Result<(Status, Value)> {
    let n = smallest(&p.sites)?;
    let r = face_check(psi, &chain(psi.dim(), n), p.decompositions, FACE_TOL, p.seed)?;
    // Without excited states there is nothing to contaminate with.
    let trivial = r.kernel_dim == 1 << n;
    let ok = r.all_components_supersymmetric
        && r.max_component_violation <= FACE_TOL
        && (r.contaminated_flagged || trivial);
    Ok((Status::from_bool(ok), json!({ "sites": n, "report": to_json(&r) })))
}

fn affiliation(psi: &ChargeAssignment, p: &Parameters) -> Result<(Status, Value)> {
    let n = smallest(&p.sites)?;
    let r = affiliation_check(psi, &chain(psi.dim(), n), p.seed)?;
    let ok = r.max_commutator <= FACE_TOL && r.commutant_residual <= FACE_TOL;
    Ok((Status::from_bool(ok), json!({ "sites": n, "tolerance": FACE_TOL, "report": to_json(&r) })))
}

fn case2(p: &Parameters) -> Result<(Status, Value)> {
    let q = &p.case2;
    let grid = Grid::new(q.grid, q.half_width)?;
    let f = TestFunction::from_preset(Preset::parse(&q.f)?, grid)?;
    let g = TestFunction::from_preset(Preset::parse(&q.g)?, grid)?;
    let space = TruncatedQftSpace::new(q.modes, q.cutoff, q.dp)?;

    let samples = [(1.3, -0.4, f.clone(), g.clone()), (2.0, 2.0, f.clone(), f.clone()), (0.7, 1.1, g.clone(), f.clone())];
    let exact = check_resolvent_relations(&space, &samples)?;
    let mut sweep = Vec::new();
    for &m in &q.sweep_cutoffs {
        let s = TruncatedQftSpace::new(1, m, q.dp)?;
        sweep.push(check_resolvent_relations(&s, &samples)?.max_sigma_dependent);
    }
    let sweep_decreasing = sweep.windows(2).all(|w| w[1] < w[0]);
    let wick = susy_state_wick_check(&space, &f, &g, &default_words(&f, &g))?;
    let moll = mollifier_convergence(&space, &f, &q.lambdas)?;
    let pairing = space_pairing(&space);
    let pairings = compute_pairings(&f, &g)?;

    let exact_ok = exact.max_exact <= RESOLVENT_TOL;
    let wick_ok = wick.residual <= WICK_PAIRING_TOL;
    let formula_ok = wick.max_formula <= q.wick_tol;
    let moll_ok = moll.vacuum_defect_decreasing && moll.delta_norm_decreasing && moll.within_bound;
    let ok = exact_ok && sweep_decreasing && wick_ok && formula_ok && moll_ok;
    Ok((
        Status::from_bool(ok),
        json!({
            "space": { "modes": q.modes, "cutoff": q.cutoff, "dp": q.dp, "dim": space.dim() },
            "resolvent": {
                "max_exact": exact.max_exact,
                "tolerance": RESOLVENT_TOL,
                "pass": exact_ok,
                "sigma_sweep": { "cutoffs": q.sweep_cutoffs, "residuals": sweep, "decreasing": sweep_decreasing },
            },
            "wick": {
                "pairing_residual": wick.residual,
                "pairing_tolerance": WICK_PAIRING_TOL,
                "pairing_pass": wick_ok,
                "max_formula": wick.max_formula,
                "max_printed_formula": wick.max_printed_formula,
                "max_commutator": wick.max_commutator,
                "formula_tolerance": q.wick_tol,
                "formula_pass": formula_ok,
                "entries": to_json(&wick.entries),
            },
            "mollifier": to_json(&moll),
            "spectrum": to_json(&pairing),
            "pairings": to_json(&pairings),
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_model;

    fn small(model: &mut Model) {
        let p = &mut model.file.parameters;
        p.sites = vec![3];
        p.chains = vec![3];
        p.samples = 2;
        p.norm_orders = 2;
        p.decompositions = 3;
    }

    #[test]
    fn chain_is_centred() {
        assert_eq!(chain(1, 3), Region::interval(-1, 1));
        assert_eq!(chain(1, 4), Region::interval(-1, 2));
        assert_eq!(chain(2, 2).len(), 2);
    }

    #[test]
    fn nicolai_lattice_checks_pass() {
        let mut m = Model::from_assignment("nicolai", ChargeAssignment::nicolai());
        small(&mut m);
        let r = run_suite(&m, &CheckName::lattice());
        assert!(r.passed, "{}", r.to_json());
    }

    #[test]
    fn zero_model_passes_with_trivial_spectra() {
        let mut m = Model::from_assignment("zero", ChargeAssignment::zero(1));
        small(&mut m);
        let r = run_suite(&m, &CheckName::lattice());
        assert!(r.passed, "{}", r.to_json());
        let s = &r.check(CheckName::Spectrum).unwrap().details["chains"][0];
        assert_eq!(s["doublets"], 0);
        assert_eq!(s["h_norm"], 0.0);
    }

    #[test]
    fn dense_nicolai_fails_nilpotency_with_counterexample() {
        let m = Model::from_assignment("dense-nicolai", ChargeAssignment::dense_nicolai());
        let r = run_suite(&m, &[CheckName::Nilpotent]);
        assert!(!r.passed);
        let c = r.check(CheckName::Nilpotent).unwrap();
        assert_eq!(c.status, Status::Fail);
        assert!(c.details["counterexample"].is_string());
    }

    #[test]
    fn report_is_deterministic() {
        let text = Model::from_assignment("nicolai", ChargeAssignment::nicolai()).to_toml();
        let mut m = parse_model(&text).unwrap();
        small(&mut m);
        let checks = [CheckName::Leibniz, CheckName::Face];
        let a = run_suite(&m, &checks).without_timings().to_json();
        let b = run_suite(&m, &checks).without_timings().to_json();
        assert_eq!(a, b);
        assert!(a.contains("\"seed\": 7"));
    }
}
