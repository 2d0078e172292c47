use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use photonlab::fit::Estimate;
use photonlab::polarimetry::{
    degree_of_polarization, density_from_stokes, fidelity_to_mixed, fit_polar_scan, polar_scan_intensity,
    project_physical, read_polar_scan, read_six_intensities, stokes_from_six, DensityMatrix2, PolarScanFit,
    SixIntensities, StokesVector,
};
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::gnuplot;
use crate::output::{ensure_dir, file_name, write_json, write_text, Report, Written};

pub const POLAR_FIT_FILE: &str = "polar_scan_fit.csv";

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TomoResults {
    pub input_file: String,
    pub intensities: SixIntensities,
    pub stokes: StokesVector,
    pub degree_of_polarization: f64,
    /// The measured vector lay outside the unit ball and was rescaled.
    pub projection_applied: bool,
    pub density_matrix: DensityMatrix2,
    pub eigenvalues: [f64; 2],
    pub fidelity_to_maximally_mixed: f64,
}

/// Stokes vector, density matrix and fidelity from six analyzer settings.
pub fn tomography(m: &SixIntensities) -> Result<(StokesVector, bool, DensityMatrix2, f64), CliError> {
    let measured = stokes_from_six(m)?;
    let projected = project_physical(&measured);
    let rho = density_from_stokes(&projected.stokes)?;
    let fidelity = fidelity_to_mixed(&rho)?;
    Ok((projected.stokes, projected.applied, rho, fidelity))
}

pub fn cmd_tomo(cfg: &PipelineConfig, input: &Path, out: &Path) -> Result<Written<TomoResults>, CliError> {
    let m = read_six_intensities(open(input)?, input)?;
    let (stokes, applied, rho, fidelity) = tomography(&m)?;
    let results = TomoResults {
        input_file: file_name(input),
        intensities: m,
        degree_of_polarization: degree_of_polarization(&stokes),
        stokes,
        projection_applied: applied,
        eigenvalues: rho.eigenvalues(),
        density_matrix: rho,
        fidelity_to_maximally_mixed: fidelity,
    };
    ensure_dir(out)?;
    let report = write_json(&out.join("tomo.json"), &Report::new("tomo", cfg, &results))?;
    Ok(Written {
        files: vec![report],
        results,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PolarScanResults {
    pub input_file: String,
    pub fit_file: String,
    pub n_points: usize,
    pub fit: PolarScanFit,
    pub max_angle_deg: f64,
    /// `sqrt(s1² + s2²)`; the circular part is not seen by a linear scan.
    pub linear_degree_of_polarization: Estimate,
}

pub fn cmd_polar_scan(
    cfg: &PipelineConfig,
    input: &Path,
    out: &Path,
    gnuplot_stub: bool,
) -> Result<Written<PolarScanResults>, CliError> {
    let data = read_polar_scan(open(input)?, input)?;
    let fit = fit_polar_scan(&data)?;
    ensure_dir(out)?;

    let s = fit.stokes();
    let mut csv = String::from("theta_deg,intensity,fit\n");
    for (&theta, &y) in data.x.iter().zip(&data.y) {
        writeln!(csv, "{},{},{}", theta.to_degrees(), y, polar_scan_intensity(&s, theta)).expect("string write");
    }
    let mut files = vec![write_text(&out.join(POLAR_FIT_FILE), &csv)?];
    let results = PolarScanResults {
        input_file: file_name(input),
        fit_file: POLAR_FIT_FILE.into(),
        n_points: data.len(),
        max_angle_deg: fit.max_angle_rad.to_degrees(),
        linear_degree_of_polarization: fit.modulation_depth,
        fit,
    };
    files.push(write_json(&out.join("polar_scan.json"), &Report::new("polar-scan", cfg, &results))?);
    if gnuplot_stub {
        files.push(write_text(&out.join("polar_scan.gp"), &gnuplot::polar_scan_script(POLAR_FIT_FILE, &results.fit))?);
    }
    Ok(Written { files, results })
}
