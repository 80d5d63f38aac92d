//! Power-law fits and deterministic text serialization of reports.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Least-squares line through `(ln(−t), ln y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
    /// `(t_min, t_max)` of the points used.
    pub window: (f64, f64),
}

impl SlopeFit {
    pub fn within(&self, target: f64, tol: f64) -> bool {
        (self.slope - target).abs() <= tol
    }
}

/// Fit `y ≈ C(−t)^p`. Needs at least four points, all `t < 0`, `y > 0`.
pub fn slope_fit(series: &[(f64, f64)]) -> Result<SlopeFit> {
    if series.len() < 4 {
        return Err(Error::DegenerateData(format!(
            "need at least 4 points, got {}",
            series.len()
        )));
    }
    for &(t, y) in series {
        if !(t < 0.0 && t.is_finite()) {
            return Err(Error::DegenerateData(format!("time {t} is not negative")));
        }
        if !(y > 0.0 && y.is_finite()) {
            return Err(Error::DegenerateData(format!("value {y} is not positive")));
        }
    }
    let n = series.len() as f64;
    let xs: Vec<f64> = series.iter().map(|(t, _)| (-t).ln()).collect();
    let ys: Vec<f64> = series.iter().map(|(_, y)| y.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateData("all times are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    let t_min = series.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let t_max = series.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    Ok(SlopeFit {
        slope,
        intercept,
        r_squared,
        n_points: series.len(),
        window: (t_min, t_max),
    })
}

/// [`slope_fit`] restricted to `t_lo ≤ t ≤ t_hi`.
pub fn slope_fit_window(series: &[(f64, f64)], t_lo: f64, t_hi: f64) -> Result<SlopeFit> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|(t, _)| *t >= t_lo && *t <= t_hi)
        .collect();
    slope_fit(&pts)
}

/// A float with 17 significant digits; round-trips exactly through `parse`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

/// Comma-separated table with a header row and 17-digit floats.
pub fn csv_string(header: &[String], rows: &[Vec<f64>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

/// Inverse of [`csv_string`].
pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Format("empty CSV".into()))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|c| {
                c.parse::<f64>()
                    .map_err(|_| Error::Format(format!("row {}: bad number {c:?}", n + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != header.len() {
            return Err(Error::Format(format!(
                "row {} has {} cells, header has {}",
                n + 1,
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

/// Pretty JSON with a trailing newline. Field order follows the struct
/// definitions, so output is stable across runs.
pub fn json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Format(format!("serializing report: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, contents)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn synth(f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
        (0..40)
            .map(|i| {
                let t = -(10f64.powf(-3.0 + 3.0 * i as f64 / 39.0));
                (t, f(t))
            })
            .collect()
    }

    #[test]
    fn exact_power_law() {
        let fit = slope_fit(&synth(|t| 7.0 * (-t).powf(-0.5))).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-10);
        assert!((fit.intercept - 7f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn constant_and_perturbed() {
        let fit = slope_fit(&synth(|_| 3.0)).unwrap();
        assert!(fit.slope.abs() < 1e-14);
        let fit = slope_fit(&synth(|t| (1.0 + 0.01 * (-t).ln().sin()) / (-t))).unwrap();
        assert!((fit.slope + 1.0).abs() < 0.02);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(slope_fit(&[(-1.0, 1.0); 3]).is_err());
        assert!(slope_fit(&[(-1.0, 1.0); 5]).is_err());
        let mut s = synth(|_| 1.0);
        s[3].1 = 0.0;
        assert!(slope_fit(&s).is_err());
        let mut s = synth(|_| 1.0);
        s[0].0 = 0.5;
        assert!(slope_fit(&s).is_err());
    }

    #[test]
    fn csv_roundtrip_and_empty() {
        let header = vec!["t".to_string(), "l2".to_string()];
        assert_eq!(csv_string(&header, &[]), "t,l2\n");
        let rows = vec![vec![-0.1, 1.0 / 3.0], vec![f64::MIN_POSITIVE, 1e300]];
        let text = csv_string(&header, &rows);
        let (h, r) = parse_csv(&text).unwrap();
        assert_eq!(h, header);
        assert_eq!(r, rows);
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
    }

    proptest! {
        #[test]
        fn scaling_invariance(c in 0.01f64..100.0, p in -3.0f64..3.0, a in 0.2f64..3.0) {
            let base = synth(|t| (-t).powf(p) * (1.0 + 0.1 * (-t).ln().cos()).abs());
            let f = slope_fit(&base).unwrap();
            let scaled: Vec<_> = base.iter().map(|&(t, y)| (t, c * y)).collect();
            let fs = slope_fit(&scaled).unwrap();
            prop_assert!((fs.slope - f.slope).abs() < 1e-12);
            prop_assert!((fs.intercept - f.intercept - c.ln()).abs() < 1e-10);
            let powered: Vec<_> = base.iter().map(|&(t, y)| (t, y.powf(a))).collect();
            let fp = slope_fit(&powered).unwrap();
            prop_assert!((fp.slope - a * f.slope).abs() < 1e-12);
        }

        #[test]
        fn float_text_roundtrip(x in proptest::num::f64::ANY) {
            let back: f64 = fmt_f64(x).parse().unwrap();
            if x.is_nan() {
                prop_assert!(back.is_nan());
            } else {
                prop_assert_eq!(back.to_bits(), x.to_bits());
            }
        }
    }
}
