//! Per-item diagnostics for mask and grey-field stacks, rendered as CSV.
//!
//! CSV conventions: header row, `,` separator, `.` decimal point, `\n` line
//! endings, numbers with 9 significant digits. The final row, labelled
//! `aggregate`, summarises the stack.

use fmix_core::{radial_power_spectrum, spectral_slope, transition_fraction, BinaryMask, RadialSpectrum, RealField};
use ndarray::{ArrayD, Axis};

use crate::error::{CliError, Result};

/// Formats like C's `%.9g`.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return if v.is_nan() { "nan".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim(&format!("{v:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa), exp.abs())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskRow {
    pub mean: f64,
    pub ones: usize,
    pub transition_fraction: f64,
}

/// One row per item along the first axis.
pub fn mask_rows(stack: &ArrayD<u8>) -> Result<Vec<MaskRow>> {
    if stack.ndim() < 2 {
        return Err(CliError::invalid(format!(
            "expected a stack of masks [count, ...dims], got shape {:?}",
            stack.shape()
        )));
    }
    stack
        .axis_iter(Axis(0))
        .map(|item| {
            let mask = BinaryMask::from_data(item.to_owned()).map_err(CliError::invalid)?;
            Ok(MaskRow {
                mean: mask.mean(),
                ones: mask.ones(),
                transition_fraction: transition_fraction(&mask),
            })
        })
        .collect()
}

pub fn mask_csv(rows: &[MaskRow]) -> String {
    let mut out = String::from("item,mean,ones_count,transition_fraction\n");
    for (i, r) in rows.iter().enumerate() {
        out.push_str(&format!(
            "{i},{},{},{}\n",
            format_number(r.mean),
            r.ones,
            format_number(r.transition_fraction)
        ));
    }
    if !rows.is_empty() {
        let n = rows.len() as f64;
        let mean = rows.iter().map(|r| r.mean).sum::<f64>() / n;
        let ones = rows.iter().map(|r| r.ones as f64).sum::<f64>() / n;
        let tf = rows.iter().map(|r| r.transition_fraction).sum::<f64>() / n;
        out.push_str(&format!(
            "aggregate,{},{},{}\n",
            format_number(mean),
            format_number(ones),
            format_number(tf)
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreyRow {
    pub mean: f64,
    pub spectrum: RadialSpectrum,
    pub slope: Option<f64>,
}

pub fn grey_rows(stack: &ArrayD<f32>) -> Result<Vec<GreyRow>> {
    if stack.ndim() < 2 {
        return Err(CliError::invalid(format!(
            "expected a stack of fields [count, ...dims], got shape {:?}",
            stack.shape()
        )));
    }
    stack
        .axis_iter(Axis(0))
        .map(|item| {
            let field = RealField::new(item.mapv(f64::from)).map_err(CliError::invalid)?;
            let spectrum = radial_power_spectrum(&field);
            Ok(GreyRow {
                mean: field.data().mean().unwrap_or(0.0),
                slope: spectral_slope(&spectrum),
                spectrum,
            })
        })
        .collect()
}

/// Columns `power_r{r}` hold the radially averaged power of annulus `r`,
/// i.e. frequency `r / max(dims)`.
pub fn grey_csv(rows: &[GreyRow]) -> String {
    let bins = rows.first().map_or(0, |r| r.spectrum.power.len());
    let mut out = String::from("item,mean,spectral_slope");
    for r in 0..bins {
        out.push_str(&format!(",power_r{r}"));
    }
    out.push('\n');
    let line = |label: String, mean: f64, slope: Option<f64>, power: &[f64]| {
        let mut s = format!("{label},{},{}", format_number(mean), slope.map(format_number).unwrap_or_default());
        for p in power {
            s.push(',');
            s.push_str(&format_number(*p));
        }
        s.push('\n');
        s
    };
    for (i, r) in rows.iter().enumerate() {
        out.push_str(&line(i.to_string(), r.mean, r.slope, &r.spectrum.power));
    }
    if let Some(avg) = RadialSpectrum::average(rows.iter().map(|r| &r.spectrum)) {
        let mean = rows.iter().map(|r| r.mean).sum::<f64>() / rows.len() as f64;
        out.push_str(&line("aggregate".into(), mean, spectral_slope(&avg), &avg.power));
    }
    out
}

/// Slope of the stack-averaged radial spectrum.
pub fn aggregate_slope(rows: &[GreyRow]) -> Option<f64> {
    RadialSpectrum::average(rows.iter().map(|r| &r.spectrum)).and_then(|s| spectral_slope(&s))
}
