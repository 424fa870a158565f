use num_complex::Complex64;
use serde::Serialize;

use super::space::{expectation, restricted_norm, TruncatedQftSpace};
use super::testfn::{bos, fer, TestFunction};
use crate::error::Result;
use crate::fock::linalg::{dense_spectral_norm, hermitian_eigen, DMat};

/// Boson occupation bound of the test subspace on which truncated identities are measured.
pub const LOW_OCCUPATION: usize = 1;

fn i() -> Complex64 {
    Complex64::new(0.0, 1.0)
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolventSample {
    pub lambda: f64,
    pub mu: f64,
    /// Symplectic form of the mode-projected functions (the one realized by the fields).
    pub sigma_projected: f64,
    pub adjoint: f64,
    pub scaling: f64,
    pub resolvent_identity: f64,
    pub commutator: f64,
    pub product: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolventReport {
    pub samples: Vec<ResolventSample>,
    pub max_exact: f64,
    pub max_sigma_dependent: f64,
}

/// Residuals of the five resolvent relations on the low-occupation subspace.
pub fn check_resolvent_relations(
    space: &TruncatedQftSpace,
    samples: &[(f64, f64, TestFunction, TestFunction)],
) -> Result<ResolventReport> {
    let low = space.low_occupation(LOW_OCCUPATION);
    let mut out = Vec::new();
    for (lambda, mu, f, g) in samples {
        let (lambda, mu) = (*lambda, *mu);
        let rl = space.resolvent(lambda, f)?;
        let rlm = space.resolvent(-lambda, f)?;
        let rmf = space.resolvent(mu, f)?;
        let rmg = space.resolvent(mu, g)?;
        let s = space.projected_sigma(f, g);
        let adjoint = (rl.adjoint() - &rlm).norm();
        let scaling = (&rl - space.resolvent(1.0, &f.scale(1.0 / lambda))? * c(1.0 / lambda)).norm();
        let resolvent_identity = (&rl - &rmf - &rl * &rmf * (i() * (mu - lambda))).norm();
        let comm = &rl * &rmg - &rmg * &rl - &rl * &rmg * &rmg * &rl * (i() * s);
        let commutator = restricted_norm(&comm, &low);
        let product = if (lambda + mu).abs() > 1e-12 {
            let rsum = space.resolvent(lambda + mu, &f.add(g))?;
            let rhs = &rsum * (&rl + &rmg + &rl * &rl * &rmg * (i() * s));
            restricted_norm(&(&rl * &rmg - rhs), &low)
        } else {
            0.0
        };
        out.push(ResolventSample {
            lambda,
            mu,
            sigma_projected: s,
            adjoint,
            scaling,
            resolvent_identity,
            commutator,
            product,
        });
    }
    let max_exact = out.iter().map(|r| r.adjoint.max(r.scaling).max(r.resolvent_identity)).fold(0.0, f64::max);
    let max_sigma_dependent = out.iter().map(|r| r.commutator.max(r.product)).fold(0.0, f64::max);
    Ok(ResolventReport { samples: out, max_exact, max_sigma_dependent })
}

/// Generators of the mollified core.
#[derive(Debug, Clone)]
pub enum CoreGenerator {
    Zeta(TestFunction),
    Resolvent(f64, TestFunction),
}

impl CoreGenerator {
    pub fn matrix(&self, space: &TruncatedQftSpace) -> Result<DMat> {
        match self {
            CoreGenerator::Zeta(f) => space.zeta(f),
            CoreGenerator::Resolvent(l, f) => space.resolvent(*l, f),
        }
    }

    pub fn is_odd(&self) -> bool {
        matches!(self, CoreGenerator::Zeta(_))
    }
}

/// Which closed form to use for `delta_s(zeta(f))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ZetaFormula {
    /// `i R - 1 - i c(f) c(f') R^2`, from `{Q_s, c(f)} = j(f)`, `[Q_s, R] = i c(f') R^2` and Leibniz.
    Derived,
    /// `i R - 1 + i c(f) c(f') R^2`, as printed in the source.
    Printed,
}

/// Closed-form image of a generator.
pub fn delta_formula(space: &TruncatedQftSpace, g: &CoreGenerator, form: ZetaFormula) -> Result<DMat> {
    match g {
        CoreGenerator::Resolvent(l, f) => {
            let r = space.resolvent(*l, f)?;
            Ok(space.clifford(&f.derive()) * &r * &r * i())
        }
        CoreGenerator::Zeta(f) => {
            let r = space.resolvent(1.0, f)?;
            let cc = space.clifford(f) * space.clifford(&f.derive());
            let sign = match form {
                ZetaFormula::Derived => -1.0,
                ZetaFormula::Printed => 1.0,
            };
            Ok(&r * i() - space.identity() + cc * &r * &r * (i() * sign))
        }
    }
}

/// Closed-form `delta_s` of a word in the generators via the graded Leibniz rule.
pub fn delta_formula_word(space: &TruncatedQftSpace, word: &[CoreGenerator], form: ZetaFormula) -> Result<DMat> {
    let mats: Vec<DMat> = word.iter().map(|g| g.matrix(space)).collect::<Result<_>>()?;
    let mut total = DMat::zeros(space.dim(), space.dim());
    let mut odd_before = false;
    for k in 0..word.len() {
        let mut term = space.identity();
        for m in &mats[..k] {
            term *= m;
        }
        if odd_before {
            term *= c(-1.0);
        }
        term *= delta_formula(space, &word[k], form)?;
        for m in &mats[k + 1..] {
            term *= m;
        }
        total += term;
        odd_before ^= word[k].is_odd();
    }
    Ok(total)
}

pub fn word_matrix(space: &TruncatedQftSpace, word: &[CoreGenerator]) -> Result<DMat> {
    word.iter().try_fold(space.identity(), |acc, g| Ok(acc * g.matrix(space)?))
}

#[derive(Debug, Clone, Serialize)]
pub struct Case2Derivation {
    /// `||(formula - [Q_s, X]_gamma) P_low||` with the derived closed form.
    pub residual: f64,
    /// Same with the printed closed form (differs only for `zeta`).
    pub printed_residual: f64,
    /// `||delta_s(R(-l, f)) + delta_s(R(l, f))^*||` (symmetric superderivation), resolvents only.
    pub symmetry_residual: Option<f64>,
}

pub fn superderivation_case2(space: &TruncatedQftSpace, g: &CoreGenerator) -> Result<Case2Derivation> {
    let low = space.low_occupation(LOW_OCCUPATION);
    let x = g.matrix(space)?;
    let comm = space.delta_s(&x);
    let residual = restricted_norm(&(delta_formula(space, g, ZetaFormula::Derived)? - &comm), &low);
    let printed_residual = restricted_norm(&(delta_formula(space, g, ZetaFormula::Printed)? - &comm), &low);
    let symmetry_residual = match g {
        CoreGenerator::Resolvent(l, f) => {
            let minus = space.delta_s(&space.resolvent(-l, f)?);
            Some((minus + comm.adjoint()).norm())
        }
        CoreGenerator::Zeta(_) => None,
    };
    Ok(Case2Derivation { residual, printed_residual, symmetry_residual })
}

#[derive(Debug, Clone, Serialize)]
pub struct MollifierRung {
    pub lambda: f64,
    /// `||(i lambda R(lambda, f) - 1) Omega||`.
    pub vacuum_defect: f64,
    /// `||delta_s(N)|| = lambda ||c(f') R(lambda, f)^2||`.
    pub delta_norm: f64,
    /// `||([Q_s, N] - i lambda c(f') R(lambda, f)^2) P_low||` in the truncated space.
    pub truncation_residual: f64,
    /// `(1/lambda) sqrt(int f'^2 / 2)`.
    pub bound: f64,
    /// `max(0, delta_norm - bound)`.
    pub slack: f64,
    /// `||N c(f) - i lambda zeta(f / lambda)||`.
    pub core_identity: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MollifierReport {
    pub rungs: Vec<MollifierRung>,
    pub vacuum_defect_decreasing: bool,
    pub delta_norm_decreasing: bool,
    pub within_bound: bool,
}

/// Mollifiers `N_{c(f), lambda} = i lambda R(lambda, f)` along a ladder of `lambda`.
pub fn mollifier_convergence(space: &TruncatedQftSpace, f: &TestFunction, lambdas: &[f64]) -> Result<MollifierReport> {
    let low = space.low_occupation(LOW_OCCUPATION);
    let omega = nalgebra::DVector::from_column_slice(&space.vacuum());
    let cf = space.clifford(f);
    let fp = f.derive();
    let cfp = space.clifford(&fp);
    let bound_const = (fp.l2_squared() / 2.0).sqrt();
    let mut rungs = Vec::new();
    for &lambda in lambdas {
        let r = space.resolvent(lambda, f)?;
        let n = &r * Complex64::new(0.0, lambda);
        let vacuum_defect = ((&n - space.identity()) * &omega).norm();
        let image = &cfp * &r * &r * Complex64::new(0.0, lambda);
        let delta_norm = dense_spectral_norm(&image);
        let truncation_residual = restricted_norm(&(space.delta_s(&n) - &image), &low);
        let bound = bound_const / lambda;
        let core_identity = (&n * &cf - space.zeta(&f.scale(1.0 / lambda))? * Complex64::new(0.0, lambda)).norm();
        rungs.push(MollifierRung {
            lambda,
            vacuum_defect,
            delta_norm,
            truncation_residual,
            bound,
            slack: (delta_norm - bound).max(0.0),
            core_identity,
        });
    }
    let decreasing = |v: Vec<f64>| v.windows(2).all(|w| w[1] < w[0]);
    Ok(MollifierReport {
        vacuum_defect_decreasing: decreasing(rungs.iter().map(|r| r.vacuum_defect).collect()),
        delta_norm_decreasing: decreasing(rungs.iter().map(|r| r.delta_norm).collect()),
        within_bound: rungs.iter().all(|r| r.slack == 0.0),
        rungs,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SpacePairing {
    pub min_eigenvalue: f64,
    pub kernel_dim: usize,
    /// Eigenvectors with positive energy and no weight on the cutoff shell.
    pub interior_states: usize,
    /// Largest `| ||Q_s v||^2 - E |` over interior states.
    pub max_norm_defect: f64,
    /// Largest `||(H - E) Q_s v||` over interior states.
    pub max_eigen_defect: f64,
    /// Whether every interior state has a partner of opposite parity.
    pub paired: bool,
}

/// Spectrum of `H = Q_s^2` and pairing `v -> Q_s v` away from the cutoff shell.
pub fn space_pairing(space: &TruncatedQftSpace) -> SpacePairing {
    let q = space.supercharge();
    let h = q * q;
    let (vals, vecs) = hermitian_eigen(&h);
    let scale = vals.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let tol = 1e-10 * scale;
    let mut out = SpacePairing {
        min_eigenvalue: vals.iter().cloned().fold(f64::INFINITY, f64::min),
        kernel_dim: vals.iter().filter(|v| v.abs() <= tol).count(),
        interior_states: 0,
        max_norm_defect: 0.0,
        max_eigen_defect: 0.0,
        paired: true,
    };
    let gamma = space.gamma();
    for (k, e) in vals.iter().enumerate() {
        let v = vecs.column(k).into_owned();
        if *e <= tol || space.shell_weight(v.as_slice()) > 1e-20 {
            continue;
        }
        out.interior_states += 1;
        let qv = q * &v;
        let norm_defect = (qv.norm_squared() - e).abs();
        let eigen_defect = (&h * &qv - &qv * c(*e)).norm();
        let parity_flip = (gamma * &qv + &qv * expectation(gamma, v.as_slice())).norm();
        out.max_norm_defect = out.max_norm_defect.max(norm_defect);
        out.max_eigen_defect = out.max_eigen_defect.max(eigen_defect);
        if norm_defect > tol || eigen_defect > tol || parity_flip > 1e-8 * qv.norm().max(1.0) {
            out.paired = false;
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct WickEntry {
    pub word: String,
    /// `<Omega, [Q_s, X]_gamma Omega>`.
    pub commutator: f64,
    /// `<Omega, delta_formula(X) Omega>` with the derived closed form.
    pub formula: f64,
    /// Same with the printed closed form.
    pub printed_formula: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WickReport {
    pub fer_f_gprime: Complex64,
    pub bos_fg: Complex64,
    /// `|fer(f, g') + i bos(f, g)|`.
    pub residual: f64,
    pub entries: Vec<WickEntry>,
    pub max_formula: f64,
    pub max_printed_formula: f64,
    pub max_commutator: f64,
}

/// Two-point identity `fer(f, g') = -i bos(f, g)` and vacuum expectations of
/// `delta_s` on mollified words.
pub fn susy_state_wick_check(
    space: &TruncatedQftSpace,
    f: &TestFunction,
    g: &TestFunction,
    words: &[(String, Vec<CoreGenerator>)],
) -> Result<WickReport> {
    let gp = g.derive();
    let fer_f_gprime = fer(f, &gp);
    let bos_fg = bos(f, g);
    let residual = (fer_f_gprime + i() * bos_fg).norm();
    let omega = space.vacuum();
    let mut entries = Vec::new();
    for (label, word) in words {
        let x = word_matrix(space, word)?;
        entries.push(WickEntry {
            word: label.clone(),
            commutator: expectation(&space.delta_s(&x), &omega).norm(),
            formula: expectation(&delta_formula_word(space, word, ZetaFormula::Derived)?, &omega).norm(),
            printed_formula: expectation(&delta_formula_word(space, word, ZetaFormula::Printed)?, &omega).norm(),
        });
    }
    let max = |k: fn(&WickEntry) -> f64| entries.iter().map(k).fold(0.0, f64::max);
    Ok(WickReport {
        fer_f_gprime,
        bos_fg,
        residual,
        max_formula: max(|e| e.formula),
        max_printed_formula: max(|e| e.printed_formula),
        max_commutator: max(|e| e.commutator),
        entries,
    })
}

/// Mollified words used by default: generators, products and a mollified Clifford element.
pub fn default_words(f: &TestFunction, g: &TestFunction) -> Vec<(String, Vec<CoreGenerator>)> {
    use CoreGenerator::{Resolvent, Zeta};
    vec![
        ("zeta(f)".into(), vec![Zeta(f.clone())]),
        ("R(1,f)".into(), vec![Resolvent(1.0, f.clone())]),
        ("R(2,g)".into(), vec![Resolvent(2.0, g.clone())]),
        ("zeta(g)".into(), vec![Zeta(g.clone())]),
        ("zeta(f) R(1,g)".into(), vec![Zeta(f.clone()), Resolvent(1.0, g.clone())]),
        ("R(1,f) zeta(g)".into(), vec![Resolvent(1.0, f.clone()), Zeta(g.clone())]),
        ("zeta(f) zeta(g)".into(), vec![Zeta(f.clone()), Zeta(g.clone())]),
        ("R(3,f) zeta(f)".into(), vec![Resolvent(3.0, f.clone()), Zeta(f.clone())]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qft::testfn::{Grid, Preset};

    fn tf(p: Preset) -> TestFunction {
        TestFunction::from_preset(p, Grid::default()).unwrap()
    }

    #[test]
    fn exact_resolvent_relations() {
        let s = TruncatedQftSpace::new(1, 4, 1.0).unwrap();
        let f = tf(Preset::gaussian());
        let g = tf(Preset::translated_gaussian(0.7));
        let r = check_resolvent_relations(&s, &[(1.3, -0.4, f.clone(), g), (2.0, 2.0, f.clone(), f)]).unwrap();
        assert!(r.max_exact < 1e-12, "{r:?}");
    }

    #[test]
    fn zero_function() {
        let s = TruncatedQftSpace::new(1, 2, 1.0).unwrap();
        let z = TestFunction::zero(Grid::default());
        let d = superderivation_case2(&s, &CoreGenerator::Resolvent(1.0, z.clone())).unwrap();
        assert!(d.residual < 1e-15);
        assert!(s.delta_s(&s.resolvent(1.0, &z).unwrap()).norm() < 1e-15);
        assert!(s.zeta(&z).unwrap().norm() < 1e-15);
    }

    #[test]
    fn leibniz_formula_on_words_matches_commutator_on_generators() {
        let s = TruncatedQftSpace::new(1, 6, 1.0).unwrap();
        let f = tf(Preset::gaussian());
        let d = superderivation_case2(&s, &CoreGenerator::Zeta(f.clone())).unwrap();
        assert!(d.residual < d.printed_residual);
        let d = superderivation_case2(&s, &CoreGenerator::Resolvent(1.0, f)).unwrap();
        assert!(d.symmetry_residual.unwrap() < 1e-12);
    }

    #[test]
    fn spectrum_pairs_away_from_cutoff() {
        for (n, m) in [(1, 1), (2, 2), (3, 3)] {
            let s = TruncatedQftSpace::new(n, m, 0.5).unwrap();
            let p = space_pairing(&s);
            assert!(p.min_eigenvalue > -1e-12, "{p:?}");
            assert!(p.interior_states > 0 && p.paired, "{p:?}");
        }
    }

    #[test]
    fn mollifiers_converge_within_bound() {
        let s = TruncatedQftSpace::new(1, 4, 0.5).unwrap();
        let r = mollifier_convergence(&s, &tf(Preset::gaussian()), &[1.0, 10.0, 100.0]).unwrap();
        assert!(r.vacuum_defect_decreasing && r.delta_norm_decreasing && r.within_bound, "{r:?}");
        assert!(r.rungs.iter().all(|x| x.core_identity < 1e-12));
    }

    #[test]
    fn wick_identity_and_disjoint_support() {
        let s = TruncatedQftSpace::new(1, 2, 0.5).unwrap();
        let f = tf(Preset::gaussian());
        let g = tf(Preset::translated_gaussian(0.3));
        let w = susy_state_wick_check(&s, &f, &g, &[]).unwrap();
        assert!(w.residual < 1e-8);
        let z = TestFunction::zero(Grid::default());
        let w = susy_state_wick_check(&s, &f, &z, &[]).unwrap();
        assert!(w.residual == 0.0 && w.bos_fg.norm() == 0.0);
    }
}
