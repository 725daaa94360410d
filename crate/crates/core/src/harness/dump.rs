use std::fmt::Write as _;

use crate::enkf::ForwardModel;
use crate::environment::{EpisodeRecord, ScenarioConfig};
use crate::error::{domain, Result};
use crate::prior::LognormalParams;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldCell {
    pub cx: usize,
    pub cy: usize,
    pub ppm: f64,
}

/// Noise-free concentration at every cell centre at the flight altitude,
/// `cy` outer and `cx` inner.
pub fn dump_field(sc: &ScenarioConfig, phi: f64) -> Result<Vec<FieldCell>> {
    if !(phi >= 0.0 && phi.is_finite()) {
        return Err(domain(format!("flux must be >= 0, got {phi}")));
    }
    let mut out = Vec::with_capacity(sc.grid_nx * sc.grid_ny);
    for cy in 0..sc.grid_ny {
        for cx in 0..sc.grid_nx {
            out.push(FieldCell { cx, cy, ppm: sc.cell_response(cx, cy).predict(phi) });
        }
    }
    Ok(out)
}

pub fn field_csv(cells: &[FieldCell]) -> String {
    let mut out = String::from("cx,cy,ppm\n");
    for c in cells {
        let _ = writeln!(out, "{},{},{}", c.cx, c.cy, c.ppm);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityRow {
    pub flux: f64,
    pub prior_pdf: f64,
    pub posterior_pdf: f64,
    /// Set on the single grid point nearest the true flux.
    pub truth_marker: bool,
}

/// Prior and fitted-posterior densities on a log-spaced flux grid of
/// `n_points` points. The grid covers `exp(μ ± 6σ)` of both distributions.
pub fn dump_posterior(record: &EpisodeRecord, prior: &LognormalParams, n_points: usize) -> Result<Vec<DensityRow>> {
    let post = record
        .final_posterior
        .as_ref()
        .ok_or_else(|| domain("record has no final posterior; the flight did not finish"))?
        .params;
    prior.validate()?;
    post.validate()?;
    if n_points < 2 {
        return Err(domain(format!("need at least 2 grid points, got {n_points}")));
    }
    let lo = (prior.mu - 6.0 * prior.sigma).min(post.mu - 6.0 * post.sigma);
    let hi = (prior.mu + 6.0 * prior.sigma).max(post.mu + 6.0 * post.sigma);
    let step = (hi - lo) / (n_points - 1) as f64;
    let grid: Vec<f64> = (0..n_points).map(|k| (lo + k as f64 * step).exp()).collect();

    let truth = record.true_flux.ln();
    let nearest = grid
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1.ln() - truth).abs().total_cmp(&(b.1.ln() - truth).abs()))
        .map(|(k, _)| k)
        .expect("grid is non-empty");

    Ok(grid
        .into_iter()
        .enumerate()
        .map(|(k, flux)| DensityRow {
            flux,
            prior_pdf: prior.pdf(flux),
            posterior_pdf: post.pdf(flux),
            truth_marker: k == nearest,
        })
        .collect())
}

pub fn posterior_csv(rows: &[DensityRow]) -> String {
    let mut out = String::from("flux,prior_pdf,posterior_pdf,truth_marker\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.flux, r.prior_pdf, r.posterior_pdf, u8::from(r.truth_marker));
    }
    out
}
