use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_table;
use crate::series::VarianceSeries;

pub const MIN_SPECTRUM_LEN: usize = 8;

/// One-sided amplitude spectrum. For a length-`n` input the amplitudes are
/// `|X_0|/n`, `2|X_k|/n` for interior bins, and `|X_{n/2}|/n` at Nyquist
/// when `n` is even, so a sinusoid of amplitude `a` shows up as `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Cycles per day.
    pub frequencies: Vec<f64>,
    pub amplitudes: Vec<f64>,
    /// Length of the transformed series.
    pub n: usize,
}

impl SpectrumReport {
    /// Contribution of each bin to the mean square of the input; sums to
    /// `Σx²/n` (Parseval).
    pub fn bin_energies(&self) -> Vec<f64> {
        let last = self.amplitudes.len() - 1;
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(k, a)| {
                let edge = k == 0 || (self.n % 2 == 0 && k == last);
                if edge {
                    a * a
                } else {
                    a * a / 2.0
                }
            })
            .collect()
    }

    pub fn mean_square(&self) -> f64 {
        self.bin_energies().iter().sum()
    }
}

pub fn amplitude_spectrum(x: &[f64]) -> Result<SpectrumReport> {
    let n = x.len();
    if n < MIN_SPECTRUM_LEN {
        return Err(Error::invalid(format!("spectrum needs at least {MIN_SPECTRUM_LEN} points, got {n}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("spectrum input contains non-finite values"));
    }
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    let nf = n as f64;
    let amplitudes = (0..=half)
        .map(|k| {
            let m = buf[k].norm() / nf;
            if k == 0 || (n % 2 == 0 && k == half) {
                m
            } else {
                2.0 * m
            }
        })
        .collect();
    let frequencies = (0..=half).map(|k| k as f64 / nf).collect();
    Ok(SpectrumReport {
        frequencies,
        amplitudes,
        n,
    })
}

/// Spectrum of the residual `pred - truth` over date-aligned series.
pub fn residual_spectrum(truth: &VarianceSeries, pred: &VarianceSeries) -> Result<SpectrumReport> {
    if truth.dates() != pred.dates() {
        return Err(Error::invalid("truth and prediction are not date-aligned"));
    }
    let residual: Vec<f64> = pred.values().iter().zip(truth.values()).map(|(p, t)| p - t).collect();
    amplitude_spectrum(&residual)
}

/// Writes `frequency,amplitude` rows.
pub fn write_spectrum_csv(report: &SpectrumReport, path: impl AsRef<Path>) -> Result<()> {
    let rows = report
        .frequencies
        .iter()
        .zip(&report.amplitudes)
        .map(|(f, a)| vec![f.to_string(), a.to_string()]);
    write_table(path.as_ref(), &["frequency", "amplitude"], rows)
}
