//! Real test functions on a uniform grid and the quasi-free pairings.
//!
//! Fourier convention: `f_hat(p) = (2 pi)^{-1/2} int f(x) e^{-ipx} dx`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SusyError};

/// Samples below this magnitude at both grid ends count as decayed.
pub const EDGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub points: usize,
    pub half_width: f64,
}

impl Grid {
    pub fn new(points: usize, half_width: f64) -> Result<Self> {
        if points < 8 || !points.is_multiple_of(2) || !(half_width > 0.0) {
            return Err(SusyError::InvalidArgument(format!(
                "grid needs an even number of points >= 8 and positive extent, got {points}, {half_width}"
            )));
        }
        Ok(Grid { points, half_width })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.spacing()
    }

    /// Momentum spacing of the discrete transform.
    pub fn dp(&self) -> f64 {
        2.0 * PI / (self.points as f64 * self.spacing())
    }
}

impl Default for Grid {
    fn default() -> Self {
        Grid { points: 4096, half_width: 40.0 }
    }
}

/// Named closed-form test functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Preset {
    /// `amplitude * exp(-(x - center)^2 / (2 width^2))`.
    Gaussian { amplitude: f64, width: f64, center: f64 },
    /// `H_k(u) exp(-u^2 / 2)`, `u = (x - center) / width`, physicists' Hermite `H_k`.
    Hermite { k: u32, width: f64, center: f64 },
}

impl Preset {
    pub fn gaussian() -> Self {
        Preset::Gaussian { amplitude: 1.0, width: 1.0, center: 0.0 }
    }

    pub fn translated_gaussian(center: f64) -> Self {
        Preset::Gaussian { amplitude: 1.0, width: 1.0, center }
    }

    pub fn hermite(k: u32) -> Self {
        Preset::Hermite { k, width: 1.0, center: 0.0 }
    }

    /// Parses `gaussian`, `translated-gaussian:<c>`, `hermite-<k>` with optional `@<width>`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || SusyError::InvalidArgument(format!("unknown test function preset '{s}'"));
        let (name, width) = match s.split_once('@') {
            Some((n, w)) => (n, w.parse::<f64>().map_err(|_| bad())?),
            None => (s, 1.0),
        };
        let p = if name == "gaussian" {
            Preset::Gaussian { amplitude: 1.0, width, center: 0.0 }
        } else if let Some(c) = name.strip_prefix("translated-gaussian") {
            let center = match c.strip_prefix(':') {
                Some(v) => v.parse().map_err(|_| bad())?,
                None if c.is_empty() => 1.0,
                None => return Err(bad()),
            };
            Preset::Gaussian { amplitude: 1.0, width, center }
        } else if let Some(k) = name.strip_prefix("hermite-") {
            Preset::Hermite { k: k.parse().map_err(|_| bad())?, width, center: 0.0 }
        } else {
            return Err(bad());
        };
        Ok(p)
    }

    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Preset::Gaussian { amplitude, width, center } => {
                let u = (x - center) / width;
                amplitude * (-0.5 * u * u).exp()
            }
            Preset::Hermite { k, width, center } => {
                let u = (x - center) / width;
                hermite_poly(k, u) * (-0.5 * u * u).exp()
            }
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            Preset::Gaussian { width, center, .. } => -(x - center) / (width * width) * self.value(x),
            Preset::Hermite { k, width, center } => {
                let u = (x - center) / width;
                let lower = if k == 0 { 0.0 } else { 2.0 * k as f64 * hermite_poly(k - 1, u) };
                (lower - u * hermite_poly(k, u)) * (-0.5 * u * u).exp() / width
            }
        }
    }

    /// Closed-form transform.
    pub fn fourier(&self, p: f64) -> Complex64 {
        match *self {
            Preset::Gaussian { amplitude, width, center } => {
                Complex64::from_polar(amplitude * width * (-0.5 * width * width * p * p).exp(), -p * center)
            }
            Preset::Hermite { k, width, center } => {
                let u = width * p;
                let mag = width * hermite_poly(k, u) * (-0.5 * u * u).exp();
                Complex64::new(0.0, -1.0).powu(k) * Complex64::from_polar(mag, -p * center)
            }
        }
    }
}

fn hermite_poly(k: u32, u: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, 2.0 * u);
    if k == 0 {
        return h0;
    }
    for n in 1..k {
        let h2 = 2.0 * u * h1 - 2.0 * n as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

/// Samples of `f` and `f'` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub derivative: Vec<f64>,
}

impl TestFunction {
    pub fn from_preset(preset: Preset, grid: Grid) -> Result<Self> {
        let values: Vec<f64> = (0..grid.points).map(|j| preset.value(grid.x(j))).collect();
        let derivative = (0..grid.points).map(|j| preset.derivative(grid.x(j))).collect();
        let f = TestFunction { grid, values, derivative };
        f.check_decay()?;
        Ok(f)
    }

    /// From samples alone; the derivative is taken spectrally.
    pub fn from_samples(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.points {
            return Err(SusyError::InvalidArgument("sample count does not match the grid".into()));
        }
        let derivative = spectral_derivative(&grid, &values);
        let f = TestFunction { grid, values, derivative };
        f.check_decay()?;
        Ok(f)
    }

    pub fn zero(grid: Grid) -> Self {
        TestFunction { grid, values: vec![0.0; grid.points], derivative: vec![0.0; grid.points] }
    }

    fn check_decay(&self) -> Result<()> {
        let edge = self.values[0].abs().max(self.values[self.grid.points - 1].abs());
        if edge > EDGE_TOL {
            return Err(SusyError::InsufficientDecay { edge });
        }
        Ok(())
    }

    pub fn scale(&self, c: f64) -> Self {
        TestFunction {
            grid: self.grid,
            values: self.values.iter().map(|v| v * c).collect(),
            derivative: self.derivative.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        TestFunction {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
            derivative: self.derivative.iter().zip(&other.derivative).map(|(a, b)| a + b).collect(),
        }
    }

    /// `f'` as a test function (its own derivative taken spectrally).
    pub fn derive(&self) -> Self {
        TestFunction {
            grid: self.grid,
            values: self.derivative.clone(),
            derivative: spectral_derivative(&self.grid, &self.derivative),
        }
    }

    /// `f(x - s)`, sampled by spectral interpolation (a phase `e^{-ips}` on `f_hat`).
    pub fn translate(&self, s: f64) -> Self {
        let shift = |v: &[f64]| -> Vec<f64> {
            let n = self.grid.points;
            let mut data: Vec<Complex64> = v.iter().map(|x| Complex64::new(*x, 0.0)).collect();
            let mut planner = FftPlanner::new();
            planner.plan_fft_forward(n).process(&mut data);
            for (k, d) in data.iter_mut().enumerate() {
                *d *= Complex64::from_polar(1.0, -signed_frequency(&self.grid, k) * s);
            }
            planner.plan_fft_inverse(n).process(&mut data);
            data.iter().map(|d| d.re / n as f64).collect()
        };
        TestFunction { grid: self.grid, values: shift(&self.values), derivative: shift(&self.derivative) }
    }

    /// `f_hat` at the discrete momenta `p_k` (index as in [`signed_frequency`]).
    pub fn transform(&self) -> Vec<Complex64> {
        fourier_samples(&self.grid, &self.values)
    }

    /// `f_hat(p)` at an arbitrary momentum by direct summation.
    pub fn fourier_at(&self, p: f64) -> Complex64 {
        let h = self.grid.spacing();
        let s: Complex64 = self
            .values
            .iter()
            .enumerate()
            .map(|(j, v)| Complex64::from_polar(*v, -p * self.grid.x(j)))
            .sum();
        s * h / (2.0 * PI).sqrt()
    }

    /// `int f^2 dx`.
    pub fn l2_squared(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.spacing()
    }
}

/// Momentum of FFT bin `k` (negative above Nyquist).
pub fn signed_frequency(grid: &Grid, k: usize) -> f64 {
    let n = grid.points as i64;
    let k = k as i64;
    let kk = if k <= n / 2 { k } else { k - n };
    kk as f64 * grid.dp()
}

fn fourier_samples(grid: &Grid, values: &[f64]) -> Vec<Complex64> {
    let n = grid.points;
    let mut data: Vec<Complex64> = values.iter().map(|x| Complex64::new(*x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut data);
    let h = grid.spacing();
    let x0 = grid.x(0);
    data.iter()
        .enumerate()
        .map(|(k, d)| d * Complex64::from_polar(h / (2.0 * PI).sqrt(), -signed_frequency(grid, k) * x0))
        .collect()
}

fn spectral_derivative(grid: &Grid, values: &[f64]) -> Vec<f64> {
    let n = grid.points;
    let mut data: Vec<Complex64> = values.iter().map(|x| Complex64::new(*x, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut data);
    for (k, d) in data.iter_mut().enumerate() {
        let p = if k == n / 2 { 0.0 } else { signed_frequency(grid, k) };
        *d *= Complex64::new(0.0, p);
    }
    planner.plan_fft_inverse(n).process(&mut data);
    data.iter().map(|d| d.re / n as f64).collect()
}

/// `int_0^inf w(p) f_hat(p) g_hat(-p) dp` by the trapezoid rule on the FFT momenta.
fn half_line(grid: &Grid, fh: &[Complex64], gh: &[Complex64], weight: impl Fn(f64) -> f64, stride: usize) -> Complex64 {
    let n = grid.points;
    let dp = grid.dp() * stride as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut k = 0;
    while k <= n / 2 {
        let p = signed_frequency(grid, k);
        let neg = (n - k) % n;
        let term = fh[k] * gh[neg] * weight(p);
        acc += if k == 0 || k == n / 2 { term * 0.5 } else { term };
        k += stride;
    }
    acc * dp
}

/// Pairings of two test functions with crude error estimates (difference to
/// the same rule at twice the spacing).
#[derive(Debug, Clone, Serialize)]
pub struct Pairings {
    pub fer_fg: Complex64,
    pub fer_gf: Complex64,
    pub bos_fg: Complex64,
    pub bos_gf: Complex64,
    /// `int f g' dx` in position space.
    pub sigma: f64,
    pub fer_error: f64,
    pub bos_error: f64,
    pub sigma_error: f64,
    /// `(bos(f,g) - bos(g,f)) / (i sigma)`, when `sigma != 0`.
    pub ccr_constant: Option<Complex64>,
    /// `|bos(f,g) - bos(g,f) - i sigma|`.
    pub ccr_residual: f64,
    /// `|bos(f,g) - bos(g,f) - i sqrt(2) sigma|`.
    pub ccr_residual_sqrt2: f64,
}

pub fn fer(f: &TestFunction, g: &TestFunction) -> Complex64 {
    half_line(&f.grid, &f.transform(), &g.transform(), |_| 1.0, 1)
}

pub fn bos(f: &TestFunction, g: &TestFunction) -> Complex64 {
    half_line(&f.grid, &f.transform(), &g.transform(), |p| p, 1)
}

/// `sigma(f, g) = int f g' dx`.
pub fn sigma(f: &TestFunction, g: &TestFunction) -> f64 {
    f.values.iter().zip(&g.derivative).map(|(a, b)| a * b).sum::<f64>() * f.grid.spacing()
}

pub fn compute_pairings(f: &TestFunction, g: &TestFunction) -> Result<Pairings> {
    if f.grid != g.grid {
        return Err(SusyError::InvalidArgument("test functions live on different grids".into()));
    }
    f.check_decay()?;
    g.check_decay()?;
    let (fh, gh) = (f.transform(), g.transform());
    let grid = &f.grid;
    let fer_fg = half_line(grid, &fh, &gh, |_| 1.0, 1);
    let fer_gf = half_line(grid, &gh, &fh, |_| 1.0, 1);
    let bos_fg = half_line(grid, &fh, &gh, |p| p, 1);
    let bos_gf = half_line(grid, &gh, &fh, |p| p, 1);
    let fer_error = (fer_fg - half_line(grid, &fh, &gh, |_| 1.0, 2)).norm();
    let bos_error = (bos_fg - half_line(grid, &fh, &gh, |p| p, 2)).norm();
    let s = sigma(f, g);
    let h = grid.spacing();
    let coarse: f64 = f.values.iter().zip(&g.derivative).step_by(2).map(|(a, b)| a * b).sum::<f64>() * 2.0 * h;
    let diff = bos_fg - bos_gf;
    let i = Complex64::new(0.0, 1.0);
    Ok(Pairings {
        fer_fg,
        fer_gf,
        bos_fg,
        bos_gf,
        sigma: s,
        fer_error,
        bos_error,
        sigma_error: (s - coarse).abs(),
        ccr_constant: (s.abs() > 1e-300).then(|| diff / (i * s)),
        ccr_residual: (diff - i * s).norm(),
        ccr_residual_sqrt2: (diff - i * s * 2f64.sqrt()).norm(),
    })
}
