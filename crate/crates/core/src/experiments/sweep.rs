use std::io::Write;

use crate::error::Result;

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Fits `ln y = a + b ln x`. Needs at least 3 strictly positive pairs.
pub fn fit_loglog(x: &[f64], y: &[f64]) -> Option<SlopeFit> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 3 || pts.len() != x.len().min(y.len()) {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Some(SlopeFit {
        slope,
        intercept,
        r_squared,
        points: pts.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub parameter: f64,
    pub error: f64,
    pub aux: Vec<f64>,
}

/// Convergence table with an optional log-log fit of `error` against `parameter`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub parameter: String,
    pub metric: String,
    pub aux_names: Vec<String>,
    pub rows: Vec<SweepRow>,
    pub fit: Option<SlopeFit>,
}

/// Points used by the slope fit.
pub const FIT_POINTS: usize = 4;

impl SweepResult {
    pub fn new(parameter: &str, metric: &str, aux_names: &[&str], rows: Vec<SweepRow>) -> Self {
        let mut s = SweepResult {
            parameter: parameter.into(),
            metric: metric.into(),
            aux_names: aux_names.iter().map(|s| s.to_string()).collect(),
            rows,
            fit: None,
        };
        s.fit = s.fit_tail(FIT_POINTS);
        s
    }

    /// Fit over the last `k` rows (all rows if fewer).
    pub fn fit_tail(&self, k: usize) -> Option<SlopeFit> {
        let start = self.rows.len().saturating_sub(k);
        let tail = &self.rows[start..];
        let x: Vec<f64> = tail.iter().map(|r| r.parameter).collect();
        let y: Vec<f64> = tail.iter().map(|r| r.error).collect();
        fit_loglog(&x, &y)
    }

    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.error).collect()
    }

    /// Fit slope and R² go in trailing comment lines.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = format!("{},{}", self.parameter, self.metric);
        for a in &self.aux_names {
            header.push(',');
            header.push_str(a);
        }
        writeln!(w, "{header}")?;
        for r in &self.rows {
            let mut line = format!("{},{}", r.parameter, r.error);
            for v in &r.aux {
                line.push(',');
                line.push_str(&v.to_string());
            }
            writeln!(w, "{line}")?;
        }
        if let Some(f) = &self.fit {
            writeln!(w, "# slope={} r_squared={} points={}", f.slope, f.r_squared, f.points)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_power_law() {
        let x = [1.0, 0.5, 0.25, 0.125];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.5)).collect();
        let f = fit_loglog(&x, &y).unwrap();
        assert!((f.slope - 1.5).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn rejects_short_or_degenerate() {
        assert!(fit_loglog(&[1.0, 2.0], &[1.0, 2.0]).is_none());
        assert!(fit_loglog(&[1.0, 2.0, 3.0], &[1.0, 0.0, 3.0]).is_none());
        assert!(fit_loglog(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).is_none());
    }

    #[test]
    fn tail_fit_ignores_early_rows() {
        let rows: Vec<SweepRow> = [8.0, 1.0, 0.5, 0.25, 0.125]
            .iter()
            .enumerate()
            .map(|(i, &p)| SweepRow {
                parameter: p,
                error: if i == 0 { 1e3 } else { p },
                aux: vec![],
            })
            .collect();
        let s = SweepResult::new("mass", "err", &[], rows);
        let f = s.fit.unwrap();
        assert_eq!(f.points, 4);
        assert!((f.slope - 1.0).abs() < 1e-12);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("mass,err\n8,1000\n"));
    }

    proptest! {
        #[test]
        fn r_squared_in_unit_interval(ys in proptest::collection::vec(1e-6f64..1e3, 3..8)) {
            let xs: Vec<f64> = (1..=ys.len()).map(|i| i as f64).collect();
            let f = fit_loglog(&xs, &ys).unwrap();
            prop_assert!(f.r_squared <= 1.0 + 1e-12);
            prop_assert!(f.r_squared >= -1e-12);
        }
    }
}
