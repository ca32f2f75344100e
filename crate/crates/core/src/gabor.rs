//! Real-valued Gabor kernels and the 8-filter banks built from them.
//!
//! A kernel value at integer offset `(x, y)` from the centre is
//!
//! ```text
//! g(x, y) = exp(-(x'^2 + gamma^2 y'^2) / (2 sigma^2)) * cos(2 pi x' / lambda + phi)
//! x' =  x cos(theta) + y sin(theta)
//! y' = -x sin(theta) + y cos(theta)
//! ```
//!
//! with `x` growing to the right (columns) and `y` growing downwards (rows).
//! Other envelope readings can be selected through [`Envelope`].

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// The orientations used by every preset bank, in bank order.
pub const BANK_THETAS: [f64; 4] = [0.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0];
/// The phases used by every preset bank, in bank order.
pub const BANK_PHIS: [f64; 2] = [0.0, PI / 2.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaborParams {
    /// Wavelength of the cosine carrier, in pixels.
    lambda: f64,
    /// Orientation of the normal to the stripes, kept in `[0, pi)`.
    theta: f64,
    /// Phase offset of the carrier.
    phi: f64,
    /// Spatial aspect ratio of the envelope.
    gamma: f64,
    /// Standard deviation of the Gaussian envelope, in pixels.
    sigma: f64,
}

impl GaborParams {
    pub fn new(lambda: f64, theta: f64, phi: f64, gamma: f64, sigma: f64) -> Result<Self> {
        for (name, v) in [("lambda", lambda), ("gamma", gamma), ("sigma", sigma)] {
            if !v.is_finite() || v <= 0.0 {
                return invalid(format!("{name} must be finite and > 0, got {v}"));
            }
        }
        if !theta.is_finite() || !phi.is_finite() {
            return invalid("theta and phi must be finite");
        }
        let mut theta = theta.rem_euclid(PI);
        // rem_euclid can round up to exactly pi for tiny negative inputs
        if theta >= PI {
            theta = 0.0;
        }
        Ok(Self {
            lambda,
            theta,
            phi,
            gamma,
            sigma,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn theta(&self) -> f64 {
        self.theta
    }
    pub fn phi(&self) -> f64 {
        self.phi
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        Self::new(self.lambda, theta, self.phi, self.gamma, self.sigma)
    }

    pub fn with_phi(&self, phi: f64) -> Result<Self> {
        Self::new(self.lambda, self.theta, phi, self.gamma, self.sigma)
    }
}

/// How the Gaussian envelope combines the rotated coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Envelope {
    /// `x'^2 + gamma^2 y'^2` (Petkov form).
    #[default]
    Petkov,
    /// `x'^2 + gamma y'^2`.
    LinearGamma,
    /// `x' + gamma y'^2`. Not symmetric in the sign of `x'`; kept only for
    /// comparisons.
    LinearX,
}

impl Envelope {
    fn exponent(self, xr: f64, yr: f64, gamma: f64) -> f64 {
        match self {
            Envelope::Petkov => xr * xr + gamma * gamma * yr * yr,
            Envelope::LinearGamma => xr * xr + gamma * yr * yr,
            Envelope::LinearX => xr + gamma * yr * yr,
        }
    }
}

impl FromStr for Envelope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "petkov" => Ok(Envelope::Petkov),
            "linear-gamma" => Ok(Envelope::LinearGamma),
            "linear-x" => Ok(Envelope::LinearX),
            other => invalid(format!("unknown envelope '{other}'")),
        }
    }
}

/// Square, odd-sized, row-major real kernel. `values[row * size + col]`,
/// centred at `((size - 1) / 2, (size - 1) / 2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    size: usize,
    values: Vec<f64>,
}

impl Kernel {
    /// Wrap an arbitrary odd-sized kernel, including size 1. Gabor kernels
    /// are always at least 3 wide.
    pub fn new(size: usize, values: Vec<f64>) -> Result<Self> {
        if size == 0 || size.is_multiple_of(2) {
            return invalid(format!("kernel size must be odd and positive, got {size}"));
        }
        if values.len() != size * size {
            return Err(Error::Shape(format!(
                "kernel of size {size} needs {} values, got {}",
                size * size,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("kernel values".into()));
        }
        Ok(Self { size, values })
    }

    pub fn identity() -> Self {
        Self {
            size: 1,
            values: vec![1.0],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn radius(&self) -> usize {
        self.size / 2
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.size + col]
    }

    pub fn center(&self) -> f64 {
        let r = self.radius();
        self.at(r, r)
    }
}

/// Evaluate the real Gabor function on a `size x size` integer grid.
pub fn make_kernel(params: &GaborParams, size: usize) -> Result<Kernel> {
    make_kernel_with(params, size, Envelope::Petkov)
}

pub fn make_kernel_with(params: &GaborParams, size: usize, envelope: Envelope) -> Result<Kernel> {
    if size < 3 || size.is_multiple_of(2) {
        return invalid(format!("Gabor kernel size must be odd and >= 3, got {size}"));
    }
    // GaborParams fields are private, so they were validated by `new`
    let (sin_t, cos_t) = params.theta.sin_cos();
    let two_sigma_sq = 2.0 * params.sigma * params.sigma;
    let half = (size / 2) as i64;
    let mut values = Vec::with_capacity(size * size);
    for y in -half..=half {
        for x in -half..=half {
            let (x, y) = (x as f64, y as f64);
            let xr = x * cos_t + y * sin_t;
            let yr = -x * sin_t + y * cos_t;
            let env = (-envelope.exponent(xr, yr, params.gamma) / two_sigma_sq).exp();
            let carrier = (2.0 * PI * xr / params.lambda + params.phi).cos();
            values.push(env * carrier);
        }
    }
    Kernel::new(size, values)
}

/// Parameter presets per task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    /// sigma = 2, lambda = 2.5, gamma = 0.3, 5x5.
    AgeGender,
    /// sigma = 0.75, lambda = 2, gamma = 0.05, 3x3.
    Detection,
    /// sigma = 1.4, lambda = 2.5, gamma = 0.1, 5x5.
    Fer,
}

impl Preset {
    pub fn sigma(self) -> f64 {
        match self {
            Preset::AgeGender => 2.0,
            Preset::Detection => 0.75,
            Preset::Fer => 1.4,
        }
    }

    pub fn lambda(self) -> f64 {
        match self {
            Preset::AgeGender => 2.5,
            Preset::Detection => 2.0,
            Preset::Fer => 2.5,
        }
    }

    pub fn gamma(self) -> f64 {
        match self {
            Preset::AgeGender => 0.3,
            Preset::Detection => 0.05,
            Preset::Fer => 0.1,
        }
    }

    pub fn kernel_size(self) -> usize {
        match self {
            Preset::AgeGender | Preset::Fer => 5,
            Preset::Detection => 3,
        }
    }

    /// Parameters with theta = phi = 0.
    pub fn base_params(self) -> GaborParams {
        GaborParams::new(self.lambda(), 0.0, 0.0, self.gamma(), self.sigma())
            .expect("preset parameters are valid")
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::AgeGender => "age",
            Preset::Detection => "detect",
            Preset::Fer => "fer",
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "age" | "gender" | "age-gender" => Ok(Preset::AgeGender),
            "detect" | "detection" => Ok(Preset::Detection),
            "fer" => Ok(Preset::Fer),
            other => invalid(format!("unknown preset '{other}' (expected age|detect|fer)")),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Ordered kernels, theta-major and phi-minor.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    kernels: Vec<Kernel>,
    /// Parallel to `kernels` for Gabor banks, empty for custom banks.
    params: Vec<GaborParams>,
}

impl FilterBank {
    /// A bank of arbitrary kernels with no Gabor parameters attached.
    pub fn custom(kernels: Vec<Kernel>) -> Result<Self> {
        if kernels.is_empty() {
            return Err(Error::Empty("filter bank".into()));
        }
        Ok(Self {
            kernels,
            params: Vec::new(),
        })
    }

    pub fn kernels(&self) -> &[Kernel] {
        &self.kernels
    }

    /// Per-kernel parameters, `None` for custom banks.
    pub fn params(&self) -> Option<&[GaborParams]> {
        if self.params.is_empty() {
            None
        } else {
            Some(&self.params)
        }
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    pub fn max_radius(&self) -> usize {
        self.kernels.iter().map(Kernel::radius).max().unwrap_or(0)
    }
}

pub fn make_bank(preset: Preset) -> FilterBank {
    make_bank_explicit(
        &preset.base_params(),
        &BANK_THETAS,
        &BANK_PHIS,
        preset.kernel_size(),
        Envelope::Petkov,
    )
    .expect("preset banks are valid")
}

/// One kernel per `(theta, phi)` pair, theta-major. `base` supplies lambda,
/// gamma and sigma; its own theta and phi are ignored.
pub fn make_bank_explicit(
    base: &GaborParams,
    thetas: &[f64],
    phis: &[f64],
    size: usize,
    envelope: Envelope,
) -> Result<FilterBank> {
    if thetas.is_empty() || phis.is_empty() {
        return Err(Error::Empty("theta and phi lists must be non-empty".into()));
    }
    let mut kernels = Vec::with_capacity(thetas.len() * phis.len());
    let mut params = Vec::with_capacity(thetas.len() * phis.len());
    for &theta in thetas {
        for &phi in phis {
            let p = GaborParams::new(base.lambda, theta, phi, base.gamma, base.sigma)?;
            kernels.push(make_kernel_with(&p, size, envelope)?);
            params.push(p);
        }
    }
    Ok(FilterBank { kernels, params })
}

/// Plain-text dump: a header line `size lambda theta phi gamma sigma`, then
/// `size` rows of space-separated values, 13 significant digits each.
pub fn write_kernel_text(out: &mut impl fmt::Write, kernel: &Kernel, params: &GaborParams) -> fmt::Result {
    writeln!(
        out,
        "{} {:.12e} {:.12e} {:.12e} {:.12e} {:.12e}",
        kernel.size(),
        params.lambda,
        params.theta,
        params.phi,
        params.gamma,
        params.sigma
    )?;
    for row in kernel.values.chunks(kernel.size) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

/// All kernels of a Gabor bank in dump format, separated by blank lines.
pub fn bank_to_text(bank: &FilterBank) -> Result<String> {
    let params = bank
        .params()
        .ok_or_else(|| Error::InvalidParam("custom banks carry no Gabor parameters".into()))?;
    let mut s = String::new();
    for (i, (k, p)) in bank.kernels.iter().zip(params).enumerate() {
        if i > 0 {
            s.push('\n');
        }
        write_kernel_text(&mut s, k, p).expect("writing to a String cannot fail");
    }
    Ok(s)
}

/// Parse the dump format back into `(params, kernel)` pairs.
pub fn parse_kernel_text(text: &str) -> Result<Vec<(GaborParams, Kernel)>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let mut out = Vec::new();
    let num = |tok: &str| -> Result<f64> {
        tok.parse::<f64>()
            .map_err(|e| Error::Format(format!("bad number '{tok}': {e}")))
    };
    while let Some(header) = lines.next() {
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.len() != 6 {
            return Err(Error::Format(format!("bad kernel header '{header}'")));
        }
        let size: usize = toks[0]
            .parse()
            .map_err(|_| Error::Format(format!("bad kernel size '{}'", toks[0])))?;
        let params = GaborParams::new(num(toks[1])?, num(toks[2])?, num(toks[3])?, num(toks[4])?, num(toks[5])?)?;
        let mut values = Vec::with_capacity(size * size);
        for _ in 0..size {
            let row = lines
                .next()
                .ok_or_else(|| Error::Format("truncated kernel rows".into()))?;
            for tok in row.split_whitespace() {
                values.push(num(tok)?);
            }
        }
        out.push((params, Kernel::new(size, values)?));
    }
    Ok(out)
}
