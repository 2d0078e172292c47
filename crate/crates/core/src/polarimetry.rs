//! Single-qubit polarization analysis.
//!
//! Stokes parameters come from six analyzer settings in the H/V, D/A and
//! R/L bases:
//!
//! ```text
//! S0 = I_H + I_V,  s1 = (I_H − I_V)/S0,  s2 = (I_D − I_A)/S0,  s3 = (I_R − I_L)/S0
//! ```
//!
//! and map to the density matrix `ρ = ½(1 + s1·σz + s2·σx + s3·σy)` in the
//! {H, V} basis, so `ρ_HV = (s2 − i·s3)/2`. A rotating linear analyzer
//! alone sees `I(θ) = ½·S0·(1 + s1·cos 2θ + s2·sin 2θ)` and cannot resolve
//! `s3`.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::{fit_linear, Estimate, FitError, XYData};
use crate::model::FitReport;

/// Tolerance for accepting a matrix or Stokes vector as physical.
pub const PHYSICAL_TOL: f64 = 1e-9;

pub const MIN_SCAN_ANGLES: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolarimetryError {
    #[error("total intensity I_H + I_V must be positive")]
    ZeroIntensity,
    #[error("intensity for {setting} must be finite and non-negative, got {value}")]
    NegativeIntensity { setting: Setting, value: f64 },
    #[error("Stokes vector has |s| = {norm} > 1; project it onto the physical ball first")]
    UnphysicalStokes { norm: f64 },
    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),
    #[error("a polar scan needs at least {needed} distinct angles, got {got}")]
    InsufficientAngles { got: usize, needed: usize },
    #[error("scan angles span {span_deg:.3} deg; at least 180 deg is required")]
    DegenerateAngles { span_deg: f64 },
    #[error("{path}, line {line}: {message}")]
    Format { path: PathBuf, line: u64, message: String },
    #[error(transparent)]
    Fit(#[from] FitError),
}

/// Analyzer setting of a six-setting measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Setting {
    H,
    V,
    D,
    A,
    R,
    L,
}

impl Setting {
    pub const ALL: [Setting; 6] = [Setting::H, Setting::V, Setting::D, Setting::A, Setting::R, Setting::L];
}

impl std::fmt::Display for Setting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

impl std::str::FromStr for Setting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "H" => Ok(Setting::H),
            "V" => Ok(Setting::V),
            "D" => Ok(Setting::D),
            "A" => Ok(Setting::A),
            "R" => Ok(Setting::R),
            "L" => Ok(Setting::L),
            other => Err(format!("unknown setting `{other}` (expected one of H, V, D, A, R, L)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SixIntensities {
    pub h: f64,
    pub v: f64,
    pub d: f64,
    pub a: f64,
    pub r: f64,
    pub l: f64,
}

impl SixIntensities {
    /// Ideal analyzer readings `½·S0·(1 ± s_i)` for a given state.
    pub fn from_stokes(s: &StokesVector) -> Self {
        let half = 0.5 * s.s0;
        SixIntensities {
            h: half * (1.0 + s.s1),
            v: half * (1.0 - s.s1),
            d: half * (1.0 + s.s2),
            a: half * (1.0 - s.s2),
            r: half * (1.0 + s.s3),
            l: half * (1.0 - s.s3),
        }
    }

    pub fn get(&self, setting: Setting) -> f64 {
        match setting {
            Setting::H => self.h,
            Setting::V => self.v,
            Setting::D => self.d,
            Setting::A => self.a,
            Setting::R => self.r,
            Setting::L => self.l,
        }
    }

    pub fn validate(&self) -> Result<(), PolarimetryError> {
        for setting in Setting::ALL {
            let value = self.get(setting);
            if !(value.is_finite() && value >= 0.0) {
                return Err(PolarimetryError::NegativeIntensity { setting, value });
            }
        }
        if self.h + self.v <= 0.0 {
            return Err(PolarimetryError::ZeroIntensity);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StokesVector {
    /// Total intensity.
    pub s0: f64,
    /// Normalized components `S_i / S0`.
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

impl StokesVector {
    pub fn new(s0: f64, s1: f64, s2: f64, s3: f64) -> Self {
        StokesVector { s0, s1, s2, s3 }
    }

    /// Unit-intensity state with normalized components `s`.
    pub fn normalized(s1: f64, s2: f64, s3: f64) -> Self {
        Self::new(1.0, s1, s2, s3)
    }

    pub fn components(&self) -> [f64; 3] {
        [self.s1, self.s2, self.s3]
    }
}

pub fn stokes_from_six(m: &SixIntensities) -> Result<StokesVector, PolarimetryError> {
    m.validate()?;
    let s0 = m.h + m.v;
    let (da, rl) = (m.d + m.a, m.r + m.l);
    if (da - s0).abs() > 0.05 * s0 || (rl - s0).abs() > 0.05 * s0 {
        log::warn!("basis totals disagree (H+V={s0}, D+A={da}, R+L={rl}); normalizing by H+V");
    }
    Ok(StokesVector {
        s0,
        s1: (m.h - m.v) / s0,
        s2: (m.d - m.a) / s0,
        s3: (m.r - m.l) / s0,
    })
}

pub fn degree_of_polarization(s: &StokesVector) -> f64 {
    (s.s1 * s.s1 + s.s2 * s.s2 + s.s3 * s.s3).sqrt()
}

/// Result of [`project_physical`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub stokes: StokesVector,
    pub applied: bool,
}

/// Radial projection onto the Bloch ball: vectors with `|s| > 1` are
/// rescaled to unit length; physical vectors are returned unchanged.
pub fn project_physical(s: &StokesVector) -> Projection {
    let norm = degree_of_polarization(s);
    if norm <= 1.0 {
        return Projection { stokes: *s, applied: false };
    }
    Projection {
        stokes: StokesVector {
            s0: s.s0,
            s1: s.s1 / norm,
            s2: s.s2 / norm,
            s3: s.s3 / norm,
        },
        applied: true,
    }
}

/// 2×2 Hermitian, unit-trace, positive-semidefinite matrix in the {H, V}
/// basis. Row-major real and imaginary parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix2 {
    pub re: [[f64; 2]; 2],
    pub im: [[f64; 2]; 2],
}

type M2 = [[Complex64; 2]; 2];

impl DensityMatrix2 {
    /// Validates that `entries` is a density matrix within [`PHYSICAL_TOL`].
    pub fn new(entries: M2) -> Result<Self, PolarimetryError> {
        let m = Self::from_entries_unchecked(entries);
        m.validate()?;
        Ok(m)
    }

    pub fn from_entries_unchecked(entries: M2) -> Self {
        let mut re = [[0.0; 2]; 2];
        let mut im = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                re[i][j] = entries[i][j].re;
                im[i][j] = entries[i][j].im;
            }
        }
        DensityMatrix2 { re, im }
    }

    pub fn maximally_mixed() -> Self {
        DensityMatrix2 {
            re: [[0.5, 0.0], [0.0, 0.5]],
            im: [[0.0; 2]; 2],
        }
    }

    /// Projector onto a normalized state vector `(α, β)` in the {H, V} basis.
    pub fn pure(alpha: Complex64, beta: Complex64) -> Self {
        let n = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
        let v = [alpha / n, beta / n];
        Self::from_entries_unchecked(outer(v, v, 1.0))
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.re[i][j], self.im[i][j])
    }

    pub fn entries(&self) -> M2 {
        [[self.entry(0, 0), self.entry(0, 1)], [self.entry(1, 0), self.entry(1, 1)]]
    }

    pub fn trace(&self) -> Complex64 {
        self.entry(0, 0) + self.entry(1, 1)
    }

    /// Largest deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let e = self.entries();
        let off = (e[0][1] - e[1][0].conj()).norm();
        off.max(e[0][0].im.abs()).max(e[1][1].im.abs())
    }

    /// Eigenvalues in descending order (of the Hermitian part).
    pub fn eigenvalues(&self) -> [f64; 2] {
        hermitian_eigen(&self.entries()).0
    }

    /// Conjugation `U ρ U†`.
    pub fn rotated(&self, u: &M2) -> Self {
        let r = mul(&mul(u, &self.entries()), &dagger(u));
        Self::from_entries_unchecked(r)
    }

    pub fn validate(&self) -> Result<(), PolarimetryError> {
        if self.re.iter().chain(&self.im).flatten().any(|v| !v.is_finite()) {
            return Err(PolarimetryError::InvalidDensityMatrix("non-finite entry".into()));
        }
        let herm = self.hermiticity_error();
        if herm > PHYSICAL_TOL {
            return Err(PolarimetryError::InvalidDensityMatrix(format!("not Hermitian (deviation {herm:e})")));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > PHYSICAL_TOL {
            return Err(PolarimetryError::InvalidDensityMatrix(format!("trace {} != 1", tr.re)));
        }
        let [_, low] = self.eigenvalues();
        if low < -PHYSICAL_TOL {
            return Err(PolarimetryError::InvalidDensityMatrix(format!("negative eigenvalue {low:e}")));
        }
        Ok(())
    }
}

pub fn density_from_stokes(s: &StokesVector) -> Result<DensityMatrix2, PolarimetryError> {
    let norm = degree_of_polarization(s);
    if norm > 1.0 + PHYSICAL_TOL {
        return Err(PolarimetryError::UnphysicalStokes { norm });
    }
    Ok(DensityMatrix2 {
        re: [[0.5 * (1.0 + s.s1), 0.5 * s.s2], [0.5 * s.s2, 0.5 * (1.0 - s.s1)]],
        im: [[0.0, -0.5 * s.s3], [0.5 * s.s3, 0.0]],
    })
}

/// Inverse of [`density_from_stokes`], with unit `S0`.
pub fn stokes_from_density(rho: &DensityMatrix2) -> StokesVector {
    let hv = rho.entry(0, 1);
    StokesVector::normalized(rho.re[0][0] - rho.re[1][1], 2.0 * hv.re, -2.0 * hv.im)
}

/// Uhlmann fidelity `Tr √(√a · b · √a)`, in [0, 1].
pub fn fidelity(a: &DensityMatrix2, b: &DensityMatrix2) -> Result<f64, PolarimetryError> {
    a.validate()?;
    b.validate()?;
    let sa = psd_sqrt(&a.entries());
    let m = mul(&mul(&sa, &b.entries()), &sa);
    let (lam, _) = hermitian_eigen(&m);
    let f: f64 = lam.iter().map(|l| l.max(0.0).sqrt()).sum();
    Ok(f.clamp(0.0, 1.0))
}

/// Fidelity to `½·identity`.
pub fn fidelity_to_mixed(rho: &DensityMatrix2) -> Result<f64, PolarimetryError> {
    fidelity(&DensityMatrix2::maximally_mixed(), rho)
}

/// Eigen-decomposition of a 2×2 Hermitian matrix (Hermitian part of `m`):
/// eigenvalues in descending order and the matching unit eigenvectors.
fn hermitian_eigen(m: &M2) -> ([f64; 2], [[Complex64; 2]; 2]) {
    let a = m[0][0].re;
    let d = m[1][1].re;
    let b = 0.5 * (m[0][1] + m[1][0].conj());
    let mean = 0.5 * (a + d);
    let half_diff = 0.5 * (a - d);
    let r = half_diff.hypot(b.norm());
    let (hi, lo) = (mean + r, mean - r);
    if r == 0.0 {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        return ([hi, lo], [[one, zero], [zero, one]]);
    }
    // both candidate vectors solve (m − hi)v = 0; pick the one with the
    // larger non-negative component to avoid cancellation
    let v = if half_diff >= 0.0 {
        [Complex64::new(half_diff + r, 0.0), b.conj()]
    } else {
        [b, Complex64::new(r - half_diff, 0.0)]
    };
    let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    let v_hi = [v[0] / n, v[1] / n];
    let v_lo = [-v_hi[1].conj(), v_hi[0].conj()];
    ([hi, lo], [v_hi, v_lo])
}

fn psd_sqrt(m: &M2) -> M2 {
    let (lam, vecs) = hermitian_eigen(m);
    let p = outer(vecs[0], vecs[0], lam[0].max(0.0).sqrt());
    let q = outer(vecs[1], vecs[1], lam[1].max(0.0).sqrt());
    [[p[0][0] + q[0][0], p[0][1] + q[0][1]], [p[1][0] + q[1][0], p[1][1] + q[1][1]]]
}

/// `w · u v†`.
fn outer(u: [Complex64; 2], v: [Complex64; 2], w: f64) -> M2 {
    [[u[0] * v[0].conj() * w, u[0] * v[1].conj() * w], [u[1] * v[0].conj() * w, u[1] * v[1].conj() * w]]
}

fn mul(x: &M2, y: &M2) -> M2 {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = x[i][0] * y[0][j] + x[i][1] * y[1][j];
        }
    }
    out
}

fn dagger(x: &M2) -> M2 {
    [[x[0][0].conj(), x[1][0].conj()], [x[0][1].conj(), x[1][1].conj()]]
}

/// Linear-analyzer response at analyzer angle `theta` (radians).
pub fn polar_scan_intensity(s: &StokesVector, theta: f64) -> f64 {
    let t = 2.0 * theta;
    0.5 * s.s0 * (1.0 + s.s1 * t.cos() + s.s2 * t.sin())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolarScanFit {
    pub s0: Estimate,
    pub s1: Estimate,
    pub s2: Estimate,
    /// A linear scan carries no circular component.
    pub s3: Option<f64>,
    /// Harmonic amplitude relative to the mean, `sqrt(s1² + s2²)`.
    pub modulation_depth: Estimate,
    /// Analyzer angle of maximum transmission, `½·atan2(s2, s1)`, radians.
    pub max_angle_rad: f64,
    /// Raw fit on the basis `{1, cos 2θ, sin 2θ}`.
    pub report: FitReport,
}

impl PolarScanFit {
    pub fn stokes(&self) -> StokesVector {
        StokesVector::new(self.s0.value, self.s1.value, self.s2.value, self.s3.unwrap_or(0.0))
    }
}

/// Recovers `(S0, s1, s2)` from intensities measured at analyzer angles
/// `data.x` (radians).
pub fn fit_polar_scan(data: &XYData) -> Result<PolarScanFit, PolarimetryError> {
    let mut angles = data.x.clone();
    angles.sort_by(f64::total_cmp);
    angles.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    if angles.len() < MIN_SCAN_ANGLES {
        return Err(PolarimetryError::InsufficientAngles {
            got: angles.len(),
            needed: MIN_SCAN_ANGLES,
        });
    }
    let span = angles[angles.len() - 1] - angles[0];
    if span < std::f64::consts::PI - 1e-9 {
        return Err(PolarimetryError::DegenerateAngles { span_deg: span.to_degrees() });
    }
    let one = |_: f64| 1.0;
    let cos2 = |t: f64| (2.0 * t).cos();
    let sin2 = |t: f64| (2.0 * t).sin();
    let report = fit_linear(&[&one, &cos2, &sin2], data, &["c0", "c_cos2", "c_sin2"])?;
    let c = &report.values;
    let cov = &report.covariance;
    if c[0] <= 0.0 {
        return Err(PolarimetryError::ZeroIntensity);
    }
    // s_k = c_k / c0; first-order propagation through the full covariance
    let ratio = |k: usize| {
        let v = c[k] / c[0];
        let var = (cov[k][k] - 2.0 * v * cov[0][k] + v * v * cov[0][0]) / (c[0] * c[0]);
        Estimate::new(v, var.max(0.0).sqrt())
    };
    let (s1, s2) = (ratio(1), ratio(2));
    let depth = s1.value.hypot(s2.value);
    let depth_err = if depth > 0.0 {
        // gradient of |(c1, c2)| / c0 with respect to (c0, c1, c2)
        let g = [-depth / c[0], c[1] / (depth * c[0] * c[0]), c[2] / (depth * c[0] * c[0])];
        let mut var = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                var += g[i] * cov[i][j] * g[j];
            }
        }
        var.max(0.0).sqrt()
    } else {
        f64::NAN
    };
    Ok(PolarScanFit {
        s0: Estimate::new(2.0 * c[0], 2.0 * report.std_errors[0]),
        s1,
        s2,
        s3: None,
        modulation_depth: Estimate::new(depth, depth_err),
        max_angle_rad: 0.5 * s2.value.atan2(s1.value),
        report,
    })
}

fn format_err(path: &Path, line: u64, message: impl Into<String>) -> PolarimetryError {
    PolarimetryError::Format {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn csv_rows<R: Read>(
    reader: R,
    path: &Path,
    header: [&str; 2],
) -> Result<Vec<(u64, String, String)>, PolarimetryError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let found: Vec<String> = rdr
        .headers()
        .map_err(|e| format_err(path, 1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if found != header {
        return Err(format_err(
            path,
            1,
            format!("expected header `{}`, found `{}`", header.join(","), found.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| format_err(path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push((line, rec[0].to_string(), rec[1].to_string()));
    }
    Ok(rows)
}

fn parse_value(path: &Path, line: u64, field: &str, text: &str) -> Result<f64, PolarimetryError> {
    text.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format_err(path, line, format!("invalid {field} `{text}`")))
}

/// Reads a `setting,intensity` CSV with each of H, V, D, A, R, L exactly once.
pub fn read_six_intensities<R: Read>(reader: R, path: &Path) -> Result<SixIntensities, PolarimetryError> {
    let mut seen = BTreeMap::new();
    let mut last_line = 1;
    for (line, setting, value) in csv_rows(reader, path, ["setting", "intensity"])? {
        last_line = line;
        let setting: Setting = setting.parse().map_err(|m: String| format_err(path, line, m))?;
        let value = parse_value(path, line, "intensity", &value)?;
        if value < 0.0 {
            return Err(format_err(path, line, format!("negative intensity {value}")));
        }
        if seen.insert(setting, value).is_some() {
            return Err(format_err(path, line, format!("setting {setting} given twice")));
        }
    }
    if let Some(missing) = Setting::ALL.iter().find(|s| !seen.contains_key(s)) {
        return Err(format_err(path, last_line, format!("missing setting {missing}")));
    }
    let m = SixIntensities {
        h: seen[&Setting::H],
        v: seen[&Setting::V],
        d: seen[&Setting::D],
        a: seen[&Setting::A],
        r: seen[&Setting::R],
        l: seen[&Setting::L],
    };
    m.validate()?;
    Ok(m)
}

/// Reads a `theta_deg,intensity` CSV; angles are converted to radians and
/// all points get unit weight.
pub fn read_polar_scan<R: Read>(reader: R, path: &Path) -> Result<XYData, PolarimetryError> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (line, theta, value) in csv_rows(reader, path, ["theta_deg", "intensity"])? {
        x.push(parse_value(path, line, "angle", &theta)?.to_radians());
        y.push(parse_value(path, line, "intensity", &value)?);
    }
    Ok(XYData::unweighted(x, y)?)
}

/// Six-setting CSV body for `m`.
pub fn six_intensities_csv(m: &SixIntensities) -> String {
    let mut out = String::from("setting,intensity\n");
    for s in Setting::ALL {
        out.push_str(&format!("{s},{}\n", m.get(s)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const REFERENCE_S: StokesVector = StokesVector {
        s0: 1.0,
        s1: 0.005,
        s2: 0.073,
        s3: -0.032,
    };

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// `exp(−i·φ·n·σ/2)` for a unit axis `n`.
    fn rotation(phi: f64, n: [f64; 3]) -> M2 {
        let (cs, sn) = ((0.5 * phi).cos(), (0.5 * phi).sin());
        [
            [c(cs, -sn * n[2]), c(-sn * n[1], -sn * n[0])],
            [c(sn * n[1], -sn * n[0]), c(cs, sn * n[2])],
        ]
    }

    // F² = Tr(ab) + 2·sqrt(det a · det b) holds for any pair of 2×2 density matrices
    fn fidelity_oracle(a: &DensityMatrix2, b: &DensityMatrix2) -> f64 {
        let ea = a.entries();
        let eb = b.entries();
        let tr = mul(&ea, &eb)[0][0] + mul(&ea, &eb)[1][1];
        let det = |m: &M2| (m[0][0] * m[1][1] - m[0][1] * m[1][0]).re;
        (tr.re + 2.0 * (det(&ea).max(0.0) * det(&eb).max(0.0)).sqrt()).sqrt()
    }

    fn sample_states() -> Vec<StokesVector> {
        let mut out = vec![REFERENCE_S, StokesVector::normalized(0.0, 0.0, 0.0), StokesVector::normalized(0.0, 0.0, 1.0)];
        let mut k = 0.0_f64;
        for _ in 0..20 {
            k += 1.0;
            let r = (0.37 * k).sin().abs();
            let th = 2.1 * k;
            let ph = 0.7 * k;
            out.push(StokesVector::normalized(
                r * th.sin() * ph.cos(),
                r * th.sin() * ph.sin(),
                r * th.cos(),
            ));
        }
        out
    }

    #[test]
    fn six_setting_examples() {
        let s = stokes_from_six(&SixIntensities { h: 1.0, v: 1.0, d: 1.0, a: 1.0, r: 1.0, l: 1.0 }).unwrap();
        assert_eq!(s.components(), [0.0, 0.0, 0.0]);
        let s = stokes_from_six(&SixIntensities { h: 1.0, v: 0.0, d: 0.5, a: 0.5, r: 0.5, l: 0.5 }).unwrap();
        assert_eq!(s.components(), [1.0, 0.0, 0.0]);
        let s = stokes_from_six(&SixIntensities::from_stokes(&REFERENCE_S)).unwrap();
        for (g, w) in s.components().iter().zip(REFERENCE_S.components()) {
            assert!((g - w).abs() < 1e-15);
        }
        assert_eq!(
            stokes_from_six(&SixIntensities { h: 0.0, v: 0.0, d: 1.0, a: 0.0, r: 0.0, l: 0.0 }),
            Err(PolarimetryError::ZeroIntensity)
        );
        assert!(matches!(
            stokes_from_six(&SixIntensities { h: 1.0, v: -0.1, d: 0.5, a: 0.5, r: 0.5, l: 0.5 }),
            Err(PolarimetryError::NegativeIntensity { setting: Setting::V, .. })
        ));
    }

    #[test]
    fn density_examples() {
        let rho = density_from_stokes(&StokesVector::normalized(0.0, 0.0, 0.0)).unwrap();
        assert_eq!(rho, DensityMatrix2::maximally_mixed());
        let rho = density_from_stokes(&StokesVector::normalized(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(rho.entry(0, 1), c(0.0, -0.5));
        let [hi, lo] = rho.eigenvalues();
        assert!((hi - 1.0).abs() < 1e-15 && lo.abs() < 1e-15);
        let [hi, lo] = density_from_stokes(&REFERENCE_S).unwrap().eigenvalues();
        assert!((hi - 0.5399).abs() < 1e-4 && (lo - 0.4601).abs() < 1e-4);
        assert!(matches!(
            density_from_stokes(&StokesVector::normalized(1.0, 0.1, 0.0)),
            Err(PolarimetryError::UnphysicalStokes { .. })
        ));
    }

    #[test]
    fn density_invariants() {
        for s in sample_states() {
            let rho = density_from_stokes(&s).unwrap();
            assert!(rho.hermiticity_error() < 1e-12);
            assert!((rho.trace() - c(1.0, 0.0)).norm() < 1e-12);
            let n = degree_of_polarization(&s);
            let [hi, lo] = rho.eigenvalues();
            assert!((hi - 0.5 * (1.0 + n)).abs() < 1e-12);
            assert!((lo - 0.5 * (1.0 - n)).abs() < 1e-12);
            assert!(lo >= -1e-12);
            let back = stokes_from_density(&rho);
            for (g, w) in back.components().iter().zip(s.components()) {
                assert!((g - w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn degree_and_projection() {
        assert_eq!(degree_of_polarization(&StokesVector::normalized(1.0, 0.0, 0.0)), 1.0);
        assert!((degree_of_polarization(&REFERENCE_S) - 0.0799).abs() < 1e-4);
        let p = project_physical(&REFERENCE_S);
        assert!(!p.applied && p.stokes == REFERENCE_S);
        let p = project_physical(&StokesVector::normalized(2.0, 0.0, 0.0));
        assert!(p.applied);
        assert_eq!(p.stokes.components(), [1.0, 0.0, 0.0]);
        let p = project_physical(&StokesVector::normalized(0.8, 0.8, 0.8));
        assert!((degree_of_polarization(&p.stokes) - 1.0).abs() < 1e-15);
        assert!((p.stokes.s1 - 0.8 / 1.3856406460551018).abs() < 1e-15);
    }

    #[test]
    fn fidelity_examples() {
        let h = DensityMatrix2::pure(c(1.0, 0.0), c(0.0, 0.0));
        let v = DensityMatrix2::pure(c(0.0, 0.0), c(1.0, 0.0));
        assert!(fidelity(&h, &v).unwrap().abs() < 1e-15);
        assert!((fidelity(&h, &h).unwrap() - 1.0).abs() < 1e-12);
        let rho = density_from_stokes(&REFERENCE_S).unwrap();
        let f = fidelity_to_mixed(&rho).unwrap();
        let n = degree_of_polarization(&REFERENCE_S);
        let closed = ((0.5 * (1.0 + n)).sqrt() + (0.5 * (1.0 - n)).sqrt()) / 2f64.sqrt();
        assert!((f - closed).abs() < 1e-14);
        assert!((f - 0.9992).abs() < 1e-4);
    }

    #[test]
    fn fidelity_matches_oracle_and_is_symmetric() {
        let states: Vec<_> = sample_states().iter().map(|s| density_from_stokes(s).unwrap()).collect();
        for a in &states {
            assert!((fidelity(a, a).unwrap() - 1.0).abs() < 1e-7);
            for b in &states {
                let f = fidelity(a, b).unwrap();
                assert!((f - fidelity(b, a).unwrap()).abs() < 1e-7);
                assert!((f - fidelity_oracle(a, b)).abs() < 1e-7, "{f} vs {}", fidelity_oracle(a, b));
            }
        }
    }

    #[test]
    fn fidelity_unitary_invariance() {
        let states: Vec<_> = sample_states().iter().map(|s| density_from_stokes(s).unwrap()).collect();
        for k in 0..8 {
            let phi = 0.9 * k as f64;
            let raw = [(k as f64).sin(), (1.3 * k as f64).cos(), 0.4];
            let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
            let u = rotation(phi, [raw[0] / norm, raw[1] / norm, raw[2] / norm]);
            for pair in states.windows(2) {
                let f = fidelity(&pair[0], &pair[1]).unwrap();
                let g = fidelity(&pair[0].rotated(&u), &pair[1].rotated(&u)).unwrap();
                assert!((f - g).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn invalid_matrices_rejected() {
        let bad = DensityMatrix2 {
            re: [[0.7, 0.0], [0.0, 0.7]],
            im: [[0.0; 2]; 2],
        };
        assert!(matches!(fidelity(&bad, &bad), Err(PolarimetryError::InvalidDensityMatrix(_))));
        let neg = DensityMatrix2 {
            re: [[1.2, 0.0], [0.0, -0.2]],
            im: [[0.0; 2]; 2],
        };
        assert!(neg.validate().is_err());
        let nonherm = DensityMatrix2 {
            re: [[0.5, 0.1], [0.0, 0.5]],
            im: [[0.0; 2]; 2],
        };
        assert!(DensityMatrix2::new(nonherm.entries()).is_err());
    }

    #[test]
    fn polar_scan_shape() {
        let flat = StokesVector::normalized(0.0, 0.0, 0.0);
        assert!((polar_scan_intensity(&flat, 1.234) - 0.5).abs() < 1e-15);
        let h = StokesVector::normalized(1.0, 0.0, 0.0);
        assert!((polar_scan_intensity(&h, 0.0) - 1.0).abs() < 1e-15);
        assert!(polar_scan_intensity(&h, std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        for s in sample_states() {
            for k in 0..36 {
                let t = k as f64 * 0.1745;
                let i = polar_scan_intensity(&s, t);
                assert!((i - polar_scan_intensity(&s, t + std::f64::consts::PI)).abs() < 1e-14);
                assert!(i >= -1e-15);
            }
        }
    }

    fn scan(s: &StokesVector, n: usize) -> XYData {
        let x: Vec<f64> = (0..n).map(|k| (k as f64 * 360.0 / n as f64).to_radians()).collect();
        let y = x.iter().map(|&t| polar_scan_intensity(s, t)).collect();
        XYData::unweighted(x, y).unwrap()
    }

    #[test]
    fn polar_fit_recovers_reference_state() {
        let fit = fit_polar_scan(&scan(&REFERENCE_S, 12)).unwrap();
        assert!((fit.s1.value - 0.005).abs() < 1e-9);
        assert!((fit.s2.value - 0.073).abs() < 1e-9);
        assert!((fit.s0.value - 1.0).abs() < 1e-9);
        assert!(fit.s3.is_none());
        assert!((fit.modulation_depth.value - 0.0732).abs() < 1e-4);
        assert!((fit.max_angle_rad.to_degrees() - 43.04).abs() < 0.01);
    }

    #[test]
    fn polar_fit_constant_data() {
        let fit = fit_polar_scan(&scan(&StokesVector::new(3.0, 0.0, 0.0, 0.0), 8)).unwrap();
        assert!(fit.s1.value.abs() < 1e-12 && fit.s2.value.abs() < 1e-12);
        assert!((fit.s0.value - 3.0).abs() < 1e-12);
    }

    #[test]
    fn polar_fit_angle_requirements() {
        let data = scan(&REFERENCE_S, 4);
        assert!(matches!(fit_polar_scan(&data), Err(PolarimetryError::InsufficientAngles { got: 4, .. })));
        let x: Vec<f64> = (0..10).map(|k| (k as f64 * 15.0).to_radians()).collect();
        let y = x.iter().map(|&t| polar_scan_intensity(&REFERENCE_S, t)).collect();
        let narrow = XYData::unweighted(x, y).unwrap();
        assert!(matches!(fit_polar_scan(&narrow), Err(PolarimetryError::DegenerateAngles { .. })));
    }

    #[test]
    fn noisy_polar_fit_coverage() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = crate::random::SimRng::seed_from_u64(7);
        let truth = StokesVector::new(1000.0, 0.3, -0.2, 0.0);
        let mut hits = 0;
        let reps = 200;
        for _ in 0..reps {
            let base = scan(&truth, 24);
            let y: Vec<f64> = base
                .y
                .iter()
                .map(|&v| v + Normal::new(0.0, 0.01 * v).unwrap().sample(&mut rng))
                .collect();
            let sigma = base.y.iter().map(|v| 0.01 * v).collect();
            let fit = fit_polar_scan(&XYData::new(base.x, y, sigma).unwrap()).unwrap();
            if fit.s1.covers(truth.s1, 3.0) && fit.s2.covers(truth.s2, 3.0) {
                hits += 1;
            }
        }
        assert!(hits as f64 >= 0.95 * reps as f64, "{hits}/{reps}");
    }

    #[test]
    fn csv_readers() {
        let p = Path::new("t.csv");
        let m = SixIntensities::from_stokes(&REFERENCE_S);
        let back = read_six_intensities(six_intensities_csv(&m).as_bytes(), p).unwrap();
        assert_eq!(back, m);
        let err = read_six_intensities("setting,intensity\nH,1\nV,x\n".as_bytes(), p).unwrap_err();
        assert!(matches!(err, PolarimetryError::Format { line: 3, .. }), "{err}");
        let err = read_six_intensities("setting,intensity\nH,1\nQ,1\n".as_bytes(), p).unwrap_err();
        assert!(matches!(err, PolarimetryError::Format { line: 3, .. }));
        assert!(read_six_intensities("setting,intensity\nH,1\nV,1\n".as_bytes(), p).is_err());
        let err = read_six_intensities("kind,value\n".as_bytes(), p).unwrap_err();
        assert!(matches!(err, PolarimetryError::Format { line: 1, .. }));

        let d = read_polar_scan("theta_deg,intensity\n0,1\n90,2\n".as_bytes(), p).unwrap();
        assert_eq!(d.y, vec![1.0, 2.0]);
        assert!((d.x[1] - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        let err = read_polar_scan("theta_deg,intensity\n0,1\n90\n".as_bytes(), p).unwrap_err();
        assert!(matches!(err, PolarimetryError::Format { line: 3, .. }), "{err}");
    }
}
