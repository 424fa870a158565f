//! Model files: a TOML header (name, dimension, period, range), charge patterns
//! given as site lists with polynomial strings, the check selection and numeric
//! parameters.
//!
//! Polynomial grammar (whitespace between factors means multiplication):
//!
//! ```text
//! expr   := sign* term (('+' | '-') sign* term)*
//! term   := factor ('*'? factor)*
//! factor := number | '(' number ',' number ')' | 'i' | generator | '(' expr ')'
//! number := digits ('/' digits | '.' digits)?
//! generator := 'a' '+'? '(' int (',' int)* ')'
//! ```
//!
//! `a(x)` annihilates and `a+(x)` creates at site `x`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::car::{CarPolynomial, Region, Site};
use crate::error::{Result, SusyError};
use crate::scalar::Exact;
use crate::supercharge::{ChargeAssignment, Pattern};

/// 1-based line and column of byte `offset` in `text`.
pub fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// A parsed polynomial with the byte offset of every generator site.
#[derive(Debug, Clone)]
pub struct ParsedPolynomial {
    pub polynomial: CarPolynomial,
    pub sites: Vec<(Site, usize)>,
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
    dim: usize,
    sites: Vec<(Site, usize)>,
}

impl<'a> Parser<'a> {
    fn error(&self, offset: usize, message: impl Into<String>) -> SusyError {
        let (line, column) = line_column(self.text, offset);
        SusyError::Parse { line, column, message: message.into() }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn peek_after_ws(&mut self) -> Option<char> {
        self.skip_ws();
        self.peek()
    }

    fn expect(&mut self, c: char) -> Result<()> {
        match self.peek_after_ws() {
            Some(d) if d == c => {
                self.pos += 1;
                Ok(())
            }
            Some(d) => Err(self.error(self.pos, format!("expected '{c}', found '{d}'"))),
            None => Err(self.error(self.pos, format!("expected '{c}', found end of input"))),
        }
    }

    fn digits(&mut self) -> Option<&'a str> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.text[start..self.pos])
    }

    fn number(&mut self) -> Result<BigRational> {
        self.skip_ws();
        let start = self.pos;
        let int = self.digits().ok_or_else(|| self.error(start, "expected a number"))?;
        let int: BigInt = int.parse().expect("digits");
        match self.peek() {
            Some('/') => {
                self.pos += 1;
                let at = self.pos;
                let den: BigInt = self.digits().ok_or_else(|| self.error(at, "expected a denominator"))?.parse().expect("digits");
                if den.is_zero() {
                    return Err(self.error(at, "zero denominator"));
                }
                Ok(BigRational::new(int, den))
            }
            Some('.') => {
                self.pos += 1;
                let at = self.pos;
                let frac = self.digits().ok_or_else(|| self.error(at, "expected digits after '.'"))?;
                let den = BigInt::from(10).pow(frac.len() as u32);
                let num = int * &den + frac.parse::<BigInt>().expect("digits");
                Ok(BigRational::new(num, den))
            }
            _ => Ok(BigRational::from_integer(int)),
        }
    }

    fn signed_number(&mut self) -> Result<BigRational> {
        let mut negative = false;
        while let Some(c @ ('+' | '-')) = self.peek_after_ws() {
            negative ^= c == '-';
            self.pos += 1;
        }
        let v = self.number()?;
        Ok(if negative { -v } else { v })
    }

    fn integer(&mut self) -> Result<i32> {
        self.skip_ws();
        let start = self.pos;
        let negative = if self.peek() == Some('-') {
            self.pos += 1;
            true
        } else {
            false
        };
        let d = self.digits().ok_or_else(|| self.error(start, "expected an integer site coordinate"))?;
        let v: i64 = d.parse().map_err(|_| self.error(start, "coordinate out of range"))?;
        let v = if negative { -v } else { v };
        i32::try_from(v).map_err(|_| self.error(start, "coordinate out of range"))
    }

    fn generator(&mut self) -> Result<CarPolynomial> {
        let start = self.pos;
        self.pos += 1;
        let create = if self.peek() == Some('+') {
            self.pos += 1;
            true
        } else {
            false
        };
        if self.peek() != Some('(') {
            return Err(self.error(self.pos, "expected '(' after generator name"));
        }
        self.pos += 1;
        let mut coords = vec![self.integer()?];
        while self.peek_after_ws() == Some(',') {
            self.pos += 1;
            coords.push(self.integer()?);
        }
        self.expect(')')?;
        if coords.len() != self.dim {
            return Err(self.error(start, format!("site has {} coordinates, the model is {}-dimensional", coords.len(), self.dim)));
        }
        let site = Site::new(&coords);
        self.sites.push((site, start));
        Ok(if create { CarPolynomial::create(site) } else { CarPolynomial::annihilate(site) })
    }

    /// `(re, im)` if the parenthesis holds a complex literal, else `None` with the position restored.
    fn complex_literal(&mut self) -> Result<Option<Exact>> {
        let save = self.pos;
        self.pos += 1;
        let re = match self.signed_number() {
            Ok(v) => v,
            Err(_) => {
                self.pos = save;
                return Ok(None);
            }
        };
        if self.peek_after_ws() != Some(',') {
            self.pos = save;
            return Ok(None);
        }
        self.pos += 1;
        let im = self.signed_number()?;
        self.expect(')')?;
        Ok(Some(Exact::new(re, im)))
    }

    fn factor(&mut self) -> Result<CarPolynomial> {
        let start = self.pos;
        match self.peek_after_ws() {
            Some(c) if c.is_ascii_digit() => Ok(CarPolynomial::scalar(Exact::new(self.number()?, BigRational::zero()))),
            Some('a') => self.generator(),
            Some('i') => {
                self.pos += 1;
                Ok(CarPolynomial::scalar(Exact::new(BigRational::zero(), BigRational::one())))
            }
            Some('(') => {
                if let Some(z) = self.complex_literal()? {
                    return Ok(CarPolynomial::scalar(z));
                }
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(c) => Err(self.error(start, format!("unexpected '{c}'"))),
            None => Err(self.error(start, "unexpected end of input")),
        }
    }

    fn term(&mut self) -> Result<CarPolynomial> {
        let mut negative = false;
        while let Some(c @ ('+' | '-')) = self.peek_after_ws() {
            negative ^= c == '-';
            self.pos += 1;
        }
        let mut acc = self.factor()?;
        loop {
            match self.peek_after_ws() {
                Some('*') => {
                    self.pos += 1;
                    acc = &acc * &self.factor()?;
                }
                Some(c) if c == 'a' || c == 'i' || c == '(' || c.is_ascii_digit() => {
                    acc = &acc * &self.factor()?;
                }
                _ => break,
            }
        }
        Ok(if negative { acc.neg() } else { acc })
    }

    fn expr(&mut self) -> Result<CarPolynomial> {
        let mut acc = self.term()?;
        while let Some(c @ ('+' | '-')) = self.peek_after_ws() {
            self.pos += 1;
            let t = self.term()?;
            acc = if c == '+' { &acc + &t } else { &acc - &t };
        }
        Ok(acc)
    }
}

/// Parses a polynomial over a `dim`-dimensional lattice.
pub fn parse_polynomial(text: &str, dim: usize) -> Result<ParsedPolynomial> {
    let mut p = Parser { text, pos: 0, dim, sites: Vec::new() };
    let polynomial = p.expr()?;
    if let Some(c) = p.peek_after_ws() {
        return Err(p.error(p.pos, format!("unexpected '{c}' after expression")));
    }
    Ok(ParsedPolynomial { polynomial, sites: p.sites })
}

/// Box region from `lo..hi` per axis, comma separated (`-3..3`, `0..2,0..1`);
/// a single integer selects one coordinate.
pub fn parse_region(text: &str, dim: usize) -> Result<Region> {
    let bad = |m: &str| SusyError::InvalidArgument(format!("region '{text}': {m}"));
    let axes: Vec<&str> = text.split(',').map(str::trim).collect();
    if axes.len() != dim {
        return Err(bad(&format!("expected {dim} axis ranges")));
    }
    let mut bounds = Vec::with_capacity(dim);
    for axis in axes {
        let (lo, hi) = match axis.split_once("..") {
            Some((lo, hi)) => (lo.trim(), hi.trim()),
            None => (axis, axis),
        };
        let lo: i32 = lo.parse().map_err(|_| bad("bounds must be integers"))?;
        let hi: i32 = hi.parse().map_err(|_| bad("bounds must be integers"))?;
        if lo > hi {
            return Err(bad("empty range"));
        }
        bounds.push((lo, hi));
    }
    Ok(Region::boxed(&bounds))
}

/// Checks that can be selected in a suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckName {
    Nilpotent,
    Leibniz,
    SusyAlgebra,
    Spectrum,
    States,
    Dynamics,
    Face,
    Affiliation,
    Case2,
}

impl CheckName {
    pub const ALL: [CheckName; 9] = [
        CheckName::Nilpotent,
        CheckName::Leibniz,
        CheckName::SusyAlgebra,
        CheckName::Spectrum,
        CheckName::States,
        CheckName::Dynamics,
        CheckName::Face,
        CheckName::Affiliation,
        CheckName::Case2,
    ];

    /// Every lattice check (all but `case2`).
    pub fn lattice() -> Vec<CheckName> {
        CheckName::ALL.iter().copied().filter(|c| *c != CheckName::Case2).collect()
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            CheckName::Nilpotent => "nilpotent",
            CheckName::Leibniz => "leibniz",
            CheckName::SusyAlgebra => "susy-algebra",
            CheckName::Spectrum => "spectrum",
            CheckName::States => "states",
            CheckName::Dynamics => "dynamics",
            CheckName::Face => "face",
            CheckName::Affiliation => "affiliation",
            CheckName::Case2 => "case2",
        }
    }
}

impl fmt::Display for CheckName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CheckName {
    type Err = SusyError;

    fn from_str(s: &str) -> Result<Self> {
        CheckName::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| SusyError::InvalidArgument(format!("unknown check '{s}'")))
    }
}

/// Sites of a pattern: a flat list on a chain, coordinate lists otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SiteList {
    Chain(Vec<i32>),
    Lattice(Vec<Vec<i32>>),
}

impl SiteList {
    fn to_sites(&self) -> Vec<Vec<i32>> {
        match self {
            SiteList::Chain(v) => v.iter().map(|x| vec![*x]).collect(),
            SiteList::Lattice(v) => v.clone(),
        }
    }

    fn from_region(region: &Region, dim: usize) -> Self {
        if dim == 1 {
            SiteList::Chain(region.iter().map(|s| s.coords()[0]).collect())
        } else {
            SiteList::Lattice(region.iter().map(|s| s.coords().to_vec()).collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternSpec {
    pub sites: SiteList,
    pub polynomial: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSpec {
    #[serde(default = "default_checks")]
    pub checks: Vec<CheckName>,
}

fn default_checks() -> Vec<CheckName> {
    CheckName::lattice()
}

impl Default for SuiteSpec {
    fn default() -> Self {
        SuiteSpec { checks: default_checks() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Open,
    Crossing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Case2Params {
    pub modes: usize,
    pub cutoff: usize,
    pub grid: usize,
    pub half_width: f64,
    pub dp: f64,
    pub f: String,
    pub g: String,
    pub lambdas: Vec<f64>,
    pub sweep_cutoffs: Vec<usize>,
    /// Threshold on vacuum expectations of `delta_s` on mollified words.
    pub wick_tol: f64,
}

impl Default for Case2Params {
    fn default() -> Self {
        Case2Params {
            modes: 2,
            cutoff: 4,
            grid: 4096,
            half_width: 40.0,
            dp: 0.5,
            f: "gaussian".into(),
            g: "translated-gaussian:0.7".into(),
            lambdas: vec![1.0, 10.0, 100.0],
            sweep_cutoffs: vec![2, 4, 8],
            wick_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Parameters {
    pub seed: u64,
    /// Chain lengths for the algebra and spectrum checks.
    pub sites: Vec<usize>,
    /// Chain lengths for the state checks.
    pub chains: Vec<usize>,
    pub boundary: Boundary,
    /// Random samples per randomized check.
    pub samples: usize,
    /// Highest power of `delta_0` in the norm-bound check.
    pub norm_orders: usize,
    pub decompositions: usize,
    /// Evolution time as a fraction of `t0`.
    pub time_fraction: f64,
    pub tol: f64,
    /// Truncation order of the stabilization and commutation diagnostics.
    pub ladder_order: usize,
    pub term_budget: usize,
    pub case2: Case2Params,
}

impl Default for Parameters {
    fn default() -> Self {
        Parameters {
            seed: 7,
            sites: vec![3, 5, 7],
            chains: vec![5, 7, 9],
            boundary: Boundary::Open,
            samples: 8,
            norm_orders: 4,
            decompositions: 20,
            time_fraction: 0.5,
            tol: 1e-8,
            ladder_order: 2,
            term_budget: 20_000,
            case2: Case2Params::default(),
        }
    }
}

/// Model file contents with polynomial strings in canonical form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub name: String,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<Vec<i32>>,
    pub range: u32,
    #[serde(default, rename = "pattern")]
    pub patterns: Vec<PatternSpec>,
    #[serde(default)]
    pub suite: SuiteSpec,
    #[serde(default)]
    pub parameters: Parameters,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPattern {
    sites: toml::Spanned<SiteList>,
    polynomial: toml::Spanned<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    name: String,
    dim: toml::Spanned<usize>,
    #[serde(default)]
    period: Option<toml::Spanned<Vec<i32>>>,
    range: u32,
    #[serde(default, rename = "pattern")]
    patterns: Vec<RawPattern>,
    #[serde(default)]
    suite: SuiteSpec,
    #[serde(default)]
    parameters: Parameters,
}

/// A validated model: the file and the charge assignment it defines.
#[derive(Debug, Clone)]
pub struct Model {
    pub file: ModelFile,
    pub assignment: ChargeAssignment,
}

impl PartialEq for Model {
    fn eq(&self, other: &Self) -> bool {
        self.file == other.file && self.assignment == other.assignment
    }
}

fn positioned(text: &str, offset: usize, message: String) -> SusyError {
    let (line, column) = line_column(text, offset);
    SusyError::Parse { line, column, message }
}

/// Offset of the first character inside a string value starting at `span_start`.
fn string_body(text: &str, span_start: usize) -> usize {
    if text[span_start..].starts_with("'''") || text[span_start..].starts_with("\"\"\"") {
        span_start + 3
    } else {
        span_start + 1
    }
}

/// Parses and validates a model file.
pub fn parse_model(text: &str) -> Result<Model> {
    let raw: RawModel = toml::from_str(text).map_err(|e| {
        let offset = e.span().map_or(0, |s| s.start);
        positioned(text, offset, e.message().to_string())
    })?;
    let dim = *raw.dim.get_ref();
    if !(1..=3).contains(&dim) {
        return Err(positioned(text, raw.dim.span().start, format!("dimension {dim} not in 1..=3")));
    }
    if let Some(p) = &raw.period {
        if p.get_ref().len() != dim || p.get_ref().iter().any(|x| *x < 1) {
            return Err(positioned(text, p.span().start, format!("period needs {dim} positive entries")));
        }
    }
    let mut patterns = Vec::new();
    let mut specs = Vec::new();
    for rp in &raw.patterns {
        let sites_at = rp.sites.span().start;
        let coords = rp.sites.get_ref().to_sites();
        if coords.is_empty() {
            return Err(positioned(text, sites_at, "pattern has no sites".into()));
        }
        if let Some(c) = coords.iter().find(|c| c.len() != dim) {
            return Err(positioned(text, sites_at, format!("site {c:?} is not {dim}-dimensional")));
        }
        let region: Region = coords.iter().map(|c| Site::new(c)).collect();
        if region.diameter() > raw.range {
            return Err(positioned(
                text,
                sites_at,
                format!("range violation: pattern diameter {} exceeds range {}", region.diameter(), raw.range),
            ));
        }
        let body = string_body(text, rp.polynomial.span().start);
        let parsed = parse_polynomial(rp.polynomial.get_ref(), dim).map_err(|e| match e {
            SusyError::Parse { line, column, message } => {
                let (l0, c0) = line_column(text, body);
                let column = if line == 1 { c0 + column - 1 } else { column };
                SusyError::Parse { line: l0 + line - 1, column, message }
            }
            other => other,
        })?;
        if let Some((site, offset)) = parsed.sites.iter().find(|(s, _)| !region.contains(s)) {
            return Err(positioned(
                text,
                body + offset,
                format!("support violation: site {site} lies outside the pattern sites {region}"),
            ));
        }
        let poly = parsed.polynomial;
        if poly.is_zero() {
            return Err(positioned(text, body, "pattern polynomial is zero".into()));
        }
        if !poly.is_odd() {
            let kind = if poly.is_even() { "even" } else { "mixed" };
            return Err(positioned(text, body, format!("parity violation: polynomial has {kind} parity, patterns must be odd")));
        }
        specs.push(PatternSpec { sites: SiteList::from_region(&region, dim), polynomial: poly.to_string() });
        patterns.push(Pattern { region, polynomial: poly });
    }
    let assignment = match &raw.period {
        Some(p) => ChargeAssignment::periodic(dim, p.get_ref().clone(), patterns, raw.range)?,
        None => ChargeAssignment::finite(dim, patterns, raw.range)?,
    };
    let file = ModelFile {
        name: raw.name,
        dim,
        period: raw.period.map(|p| p.into_inner()),
        range: raw.range,
        patterns: specs,
        suite: raw.suite,
        parameters: raw.parameters,
    };
    Ok(Model { file, assignment })
}

impl Model {
    /// Canonical TOML text; parsing it yields an equal model.
    pub fn to_toml(&self) -> String {
        toml::to_string(&self.file).expect("model file serializes")
    }

    /// Model file for an assignment with default parameters.
    pub fn from_assignment(name: &str, assignment: ChargeAssignment) -> Self {
        let dim = assignment.dim();
        let patterns = assignment
            .patterns()
            .iter()
            .map(|p| PatternSpec { sites: SiteList::from_region(&p.region, dim), polynomial: p.polynomial.to_string() })
            .collect();
        let file = ModelFile {
            name: name.into(),
            dim,
            period: assignment.period().map(<[i32]>::to_vec),
            range: assignment.range(),
            patterns,
            suite: SuiteSpec::default(),
            parameters: Parameters::default(),
        };
        Model { file, assignment }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const NICOLAI: &str = r#"
name = "nicolai"
dim = 1
period = [2]
range = 3

[[pattern]]
sites = [-1, 0, 1]
polynomial = "a(1) a+(0) a(-1)"
"#;

    #[test]
    fn nicolai_file_matches_builtin() {
        let m = parse_model(NICOLAI).unwrap();
        assert_eq!(m.assignment, ChargeAssignment::nicolai());
        assert_eq!(m.file.range, 3);
    }

    #[test]
    fn regions() {
        assert_eq!(parse_region("-3..3", 1).unwrap(), Region::interval(-3, 3));
        assert_eq!(parse_region("0..1, 2", 2).unwrap().len(), 2);
        assert!(parse_region("2..1", 1).is_err());
        assert!(parse_region("0..1", 2).is_err());
    }

    #[test]
    fn round_trip() {
        let m = parse_model(NICOLAI).unwrap();
        let again = parse_model(&m.to_toml()).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn grammar() {
        let p = |s: &str| parse_polynomial(s, 1).unwrap().polynomial;
        let a0 = CarPolynomial::annihilate(Site::d1(0));
        let c0 = CarPolynomial::create(Site::d1(0));
        assert_eq!(p("a(0) a+(0)"), &a0 * &c0);
        assert_eq!(p("a(0)*a+(0) + a+(0) * a(0)"), CarPolynomial::one());
        assert_eq!(p("(1,2) * a(0) - 1/2 a(0)").to_string(), "(1/2,2) * a(0)");
        assert_eq!(p("0.25 a(0)"), p("1/4 * a(0)"));
        assert_eq!(p("i (a(0) + a+(0))"), p("(0,1) a(0) + (0,1) a+(0)"));
        assert_eq!(p("- -a(0)"), a0);
        let q = &(&a0 * &c0) - &CarPolynomial::scalar(crate::scalar::exact(3, 0));
        assert_eq!(p(&q.to_string()), q);
    }

    #[test]
    fn syntax_errors_are_positioned() {
        match parse_polynomial("a(0) * \n  a+(x)", 1) {
            Err(SusyError::Parse { line: 2, column: 6, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_polynomial("a(0,1)", 1), Err(SusyError::Parse { column: 1, .. })));
        assert!(matches!(parse_polynomial("a(0) )", 1), Err(SusyError::Parse { column: 6, .. })));
    }

    #[test]
    fn semantic_errors() {
        let even = NICOLAI.replace("a(1) a+(0) a(-1)", "a(0) a+(0)");
        match parse_model(&even) {
            Err(SusyError::Parse { line: 9, message, .. }) => assert!(message.contains("even parity"), "{message}"),
            other => panic!("{other:?}"),
        }
        let outside = NICOLAI.replace("a(1) a+(0) a(-1)", "a(1) a+(0) a(-2)");
        match parse_model(&outside) {
            Err(SusyError::Parse { line: 9, column: 26, message }) => assert!(message.contains("support"), "{message}"),
            other => panic!("{other:?}"),
        }
        let wide = NICOLAI.replace("range = 3", "range = 1");
        match parse_model(&wide) {
            Err(SusyError::Parse { line: 8, message, .. }) => assert!(message.contains("range"), "{message}"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_model("name = 1"), Err(SusyError::Parse { line: 1, .. })));
    }
}
