//! Convergence diagnostics and CSV export.
//!
//! A [`MetricsSeries`] holds one row per iteration with a fixed column set:
//!
//! ```text
//! t, eps, F, F_gap, std_err, viol_raw, viol_pos, dual_norm, avg_gap, avg_viol
//! ```
//!
//! `viol_pos` is the clamped violation max(0, viol_raw); `avg_gap` and
//! `avg_viol` are running means of `F_gap` and `viol_pos`. Numeric cells
//! are written with 17 significant digits, which round-trips `f64` exactly,
//! so identical series produce byte-identical files.
//!
//! The aggregation helpers compute the time-sum diagnostics behind the
//! sublinear-growth checks (time-aggregated optimality gap, per-edge
//! clamped violation sums, averaged-iterate comparisons) and a log-log
//! slope fit used by the rate suite.

use std::fmt::Write as _;
use std::path::Path;

use crate::engine::{time_average, SaddleProblem, Trajectory};
use crate::graph::Network;
use crate::problems::{constraint_value_and_grads, expected_total, ExpectedObjective};
use crate::{Error, Result};

/// Column header shared by every exported file.
pub const CSV_HEADER: &str =
    "t,eps,F,F_gap,std_err,viol_raw,viol_pos,dual_norm,avg_gap,avg_viol";

/// One iteration's diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub t: usize,
    pub eps: f64,
    pub f: f64,
    pub f_gap: f64,
    pub std_err: f64,
    pub viol_raw: f64,
    pub viol_pos: f64,
    pub dual_norm: f64,
    pub avg_gap: f64,
    pub avg_viol: f64,
}

/// Per-iteration diagnostic records with strictly increasing `t`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsSeries {
    rows: Vec<MetricsRow>,
}

impl MetricsSeries {
    #[must_use]
    pub fn new() -> Self {
        MetricsSeries::default()
    }

    /// Builds from explicit rows, validating that `t` strictly increases.
    pub fn from_rows(rows: Vec<MetricsRow>) -> Result<Self> {
        if rows.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(Error::invalid("iteration indices must strictly increase"));
        }
        Ok(MetricsSeries { rows })
    }

    /// Appends the next iteration's measurements, deriving the clamped
    /// violation and the running averages from the row count.
    pub fn push_next(
        &mut self,
        t: usize,
        eps: f64,
        f: f64,
        f_gap: f64,
        std_err: f64,
        viol_raw: f64,
        dual_norm: f64,
    ) {
        debug_assert!(
            self.rows.last().is_none_or(|r| t > r.t),
            "iteration indices must strictly increase"
        );
        let viol_pos = viol_raw.max(0.0);
        let n = self.rows.len() as f64;
        let (avg_gap, avg_viol) = match self.rows.last() {
            None => (f_gap, viol_pos),
            Some(prev) => (
                (n * prev.avg_gap + f_gap) / (n + 1.0),
                (n * prev.avg_viol + viol_pos) / (n + 1.0),
            ),
        };
        self.rows.push(MetricsRow {
            t,
            eps,
            f,
            f_gap,
            std_err,
            viol_raw,
            viol_pos,
            dual_norm,
            avg_gap,
            avg_viol,
        });
    }

    #[must_use]
    pub fn rows(&self) -> &[MetricsRow] {
        &self.rows
    }

    #[must_use]
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Pointwise mean across replicas. All replicas must agree on length
    /// and on the `t` and `eps` columns (they are schedule-determined).
    pub fn mean_of(replicas: &[MetricsSeries]) -> Result<MetricsSeries> {
        let first = replicas
            .first()
            .ok_or_else(|| Error::invalid("cannot average zero replicas"))?;
        for r in &replicas[1..] {
            if r.len() != first.len() {
                return Err(Error::invalid("replica series lengths differ"));
            }
            if r.rows
                .iter()
                .zip(&first.rows)
                .any(|(a, b)| a.t != b.t || a.eps != b.eps)
            {
                return Err(Error::invalid("replica iteration grids differ"));
            }
        }
        let scale = 1.0 / replicas.len() as f64;
        let rows = (0..first.len())
            .map(|k| {
                let mut m = MetricsRow {
                    t: first.rows[k].t,
                    eps: first.rows[k].eps,
                    f: 0.0,
                    f_gap: 0.0,
                    std_err: 0.0,
                    viol_raw: 0.0,
                    viol_pos: 0.0,
                    dual_norm: 0.0,
                    avg_gap: 0.0,
                    avg_viol: 0.0,
                };
                for r in replicas {
                    let row = &r.rows[k];
                    m.f += row.f;
                    m.f_gap += row.f_gap;
                    m.std_err += row.std_err;
                    m.viol_raw += row.viol_raw;
                    m.viol_pos += row.viol_pos;
                    m.dual_norm += row.dual_norm;
                    m.avg_gap += row.avg_gap;
                    m.avg_viol += row.avg_viol;
                }
                m.f *= scale;
                m.f_gap *= scale;
                m.std_err *= scale;
                m.viol_raw *= scale;
                m.viol_pos *= scale;
                m.dual_norm *= scale;
                m.avg_gap *= scale;
                m.avg_viol *= scale;
                m
            })
            .collect();
        Ok(MetricsSeries { rows })
    }
}

fn push_cell(out: &mut String, v: f64) {
    let _ = write!(out, ",{v:.16e}");
}

/// Renders the exact bytes [`export_csv`] writes.
#[must_use]
pub fn render_csv(series: &MetricsSeries) -> String {
    let mut out = String::with_capacity(32 + series.len() * 240);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &series.rows {
        let _ = write!(out, "{}", r.t);
        push_cell(&mut out, r.eps);
        push_cell(&mut out, r.f);
        push_cell(&mut out, r.f_gap);
        push_cell(&mut out, r.std_err);
        push_cell(&mut out, r.viol_raw);
        push_cell(&mut out, r.viol_pos);
        push_cell(&mut out, r.dual_norm);
        push_cell(&mut out, r.avg_gap);
        push_cell(&mut out, r.avg_viol);
        out.push('\n');
    }
    out
}

/// Writes the series as CSV; byte-reproducible for identical series.
///
/// # Errors
///
/// `Io` carrying the path on write failure.
pub fn export_csv(series: &MetricsSeries, path: &Path) -> Result<()> {
    std::fs::write(path, render_csv(series)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses a metrics CSV produced by [`export_csv`] (or hand-edited to the
/// same schema). Lossless for finite values thanks to the 17-digit format.
///
/// # Errors
///
/// `Parse` with a 1-based line number for header or cell mismatches.
pub fn parse_csv(text: &str) -> Result<MetricsSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    {
        let headers = reader.headers().map_err(|e| csv_error(&e))?;
        let expected: Vec<&str> = CSV_HEADER.split(',').collect();
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header {CSV_HEADER:?}"),
            });
        }
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(&e))?;
        let line = record
            .position()
            .map_or(0, |p| p.line() as usize);
        if record.len() != 10 {
            return Err(Error::Parse {
                line,
                message: format!("expected 10 cells, found {}", record.len()),
            });
        }
        let cell = |k: usize| -> Result<f64> {
            record[k].trim().parse().map_err(|_| Error::Parse {
                line,
                message: format!("invalid numeric cell {:?}", &record[k]),
            })
        };
        let t: usize = record[0].trim().parse().map_err(|_| Error::Parse {
            line,
            message: format!("invalid iteration index {:?}", &record[0]),
        })?;
        rows.push(MetricsRow {
            t,
            eps: cell(1)?,
            f: cell(2)?,
            f_gap: cell(3)?,
            std_err: cell(4)?,
            viol_raw: cell(5)?,
            viol_pos: cell(6)?,
            dual_norm: cell(7)?,
            avg_gap: cell(8)?,
            avg_viol: cell(9)?,
        });
    }
    MetricsSeries::from_rows(rows)
}

fn csv_error(e: &csv::Error) -> Error {
    let line = match e.position() {
        Some(p) => p.line() as usize,
        None => 0,
    };
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

/// Time-aggregated optimality gap and clamped constraint violation:
///
/// ```text
/// regret    = Σ_t (F(x_t) − F*)
/// violation = Σ_k max(0, Σ_t (h_k(x_t) − γ_k))
/// ```
///
/// The clamp is applied per edge after the time sum, so rounds of slack can
/// cancel rounds of violation, which is exactly the aggregate the sublinear
/// bounds control. `f_values[t]` is F(x_t); `edge_slacks[k][t]` is the
/// signed slack of canonical edge k at round t.
///
/// # Errors
///
/// `InvalidArgument` for a non-finite `f_star` or ragged slack series.
pub fn regret_and_violation(
    f_values: &[f64],
    f_star: f64,
    edge_slacks: &[Vec<f64>],
) -> Result<(f64, f64)> {
    if !f_star.is_finite() {
        return Err(Error::invalid("reference objective value must be finite"));
    }
    if edge_slacks.iter().any(|s| s.len() != f_values.len()) {
        return Err(Error::invalid(
            "edge slack series must cover the same rounds as the objective series",
        ));
    }
    let regret = f_values.iter().map(|f| f - f_star).sum();
    let violation = edge_slacks
        .iter()
        .map(|s| s.iter().sum::<f64>().max(0.0))
        .sum();
    Ok((regret, violation))
}

/// Iterations a series needs to settle at or below a threshold: the
/// smallest 1-based index `t` such that `values[s] <= threshold` for every
/// `s >= t` through the end. `None` when the series is empty or its last
/// element is still above the threshold. On a monotone decreasing series
/// this is the first crossing; on a noisy one it discounts transient dips
/// that are later undone.
#[must_use]
pub fn settling_iteration(values: &[f64], threshold: f64) -> Option<usize> {
    let above = values.iter().rposition(|&v| !(v <= threshold));
    match above {
        None if values.is_empty() => None,
        None => Some(1),
        Some(k) if k + 1 == values.len() => None,
        Some(k) => Some(k + 2),
    }
}

/// Global clamped violation Σ_k max(0, h_k(x) − γ_k) at one stacked point.
pub fn clamped_violation(
    problem: &SaddleProblem,
    net: &Network,
    x: &[nalgebra::DVector<f64>],
) -> Result<f64> {
    let mut total = 0.0;
    for (k, &(i, j)) in net.edges().iter().enumerate() {
        let (h, _, _) = constraint_value_and_grads(problem.constraint(), i, j, &x[i], &x[j])?;
        total += (h - problem.gamma()[k]).max(0.0);
    }
    Ok(total)
}

/// Expected objective gap and clamped violation at the averaged iterate
/// x̄_T.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AverageIterateReport {
    /// F(x̄_T) − F*.
    pub gap: f64,
    /// Σ_k max(0, h_k(x̄_T) − γ_k).
    pub violation: f64,
}

/// Evaluates the averaged iterate against a reference optimum: the
/// quantities whose vanishing the averaged-iterate guarantees assert.
///
/// # Errors
///
/// `InvalidArgument` when `f_star` is not finite or shapes disagree.
pub fn average_iterate_check(
    problem: &SaddleProblem,
    net: &Network,
    traj: &Trajectory,
    upto: usize,
    expected: &[ExpectedObjective],
    f_star: f64,
) -> Result<AverageIterateReport> {
    if !f_star.is_finite() {
        return Err(Error::invalid("reference objective value must be finite"));
    }
    let avg = time_average(traj, upto)?;
    let gap = expected_total(expected, &avg.x)? - f_star;
    let violation = clamped_violation(problem, net, &avg.x)?;
    Ok(AverageIterateReport { gap, violation })
}

/// Convexity comparison between the averaged iterate and the running
/// averages along the trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JensenReport {
    pub f_at_avg: f64,
    pub mean_f: f64,
    pub violation_at_avg: f64,
    pub mean_violation: f64,
}

impl JensenReport {
    /// Both convexity inequalities, with the stated slack margins.
    #[must_use]
    pub fn holds(&self) -> bool {
        self.violation_at_avg <= self.mean_violation + 1e-12
            && self.f_at_avg <= self.mean_f + 1e-9
    }
}

/// Checks the two consequences of convexity on a completed run: the
/// expected objective and the clamped violation at x̄_T never exceed their
/// trajectory averages.
pub fn jensen_check(
    problem: &SaddleProblem,
    net: &Network,
    traj: &Trajectory,
    upto: usize,
    expected: &[ExpectedObjective],
) -> Result<JensenReport> {
    if upto == 0 || upto > traj.states.len() {
        return Err(Error::invalid(format!(
            "check over {upto} iterates, but the trajectory stores {}",
            traj.states.len()
        )));
    }
    let avg = time_average(traj, upto)?;
    let f_at_avg = expected_total(expected, &avg.x)?;
    let violation_at_avg = clamped_violation(problem, net, &avg.x)?;
    let mut mean_f = 0.0;
    let mut mean_violation = 0.0;
    for (p, _) in &traj.states[..upto] {
        mean_f += expected_total(expected, &p.x)?;
        mean_violation += clamped_violation(problem, net, &p.x)?;
    }
    mean_f /= upto as f64;
    mean_violation /= upto as f64;
    Ok(JensenReport {
        f_at_avg,
        mean_f,
        violation_at_avg,
        mean_violation,
    })
}

/// Least-squares slope of ln(y) against ln(x).
///
/// # Errors
///
/// `InvalidArgument` for fewer than two points, non-positive coordinates,
/// or zero spread in x.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::invalid("slope fit needs at least two points"));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0) || !(y > 0.0)) {
        return Err(Error::invalid(
            "log-log fit needs strictly positive coordinates",
        ));
    }
    let n = points.len() as f64;
    let (mut su, mut sv) = (0.0, 0.0);
    for &(x, y) in points {
        su += x.ln();
        sv += y.ln();
    }
    let (ubar, vbar) = (su / n, sv / n);
    let (mut cov, mut var) = (0.0, 0.0);
    for &(x, y) in points {
        let du = x.ln() - ubar;
        cov += du * (y.ln() - vbar);
        var += du * du;
    }
    if var == 0.0 {
        return Err(Error::invalid("slope fit needs spread in x"));
    }
    Ok(cov / var)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_series(n: usize) -> MetricsSeries {
        let mut s = MetricsSeries::new();
        for t in 1..=n {
            let ft = 1.0 / t as f64;
            s.push_next(
                t,
                0.01,
                ft + 10.0,
                ft,
                ft.sqrt(),
                0.3 - t as f64 * 0.1,
                0.2 * ft,
            );
        }
        s
    }

    #[test]
    fn running_averages_satisfy_recurrence() {
        let s = sample_series(20);
        let rows = s.rows();
        assert_eq!(rows[0].avg_gap, rows[0].f_gap);
        for k in 1..rows.len() {
            let n = (k + 1) as f64;
            let want = ((n - 1.0) * rows[k - 1].avg_gap + rows[k].f_gap) / n;
            assert!((rows[k].avg_gap - want).abs() <= 1e-12);
            let wantv = ((n - 1.0) * rows[k - 1].avg_viol + rows[k].viol_pos) / n;
            assert!((rows[k].avg_viol - wantv).abs() <= 1e-12);
            assert!(rows[k].viol_pos >= 0.0);
        }
        // Raw violation goes negative in this series; the clamp holds at 0.
        assert!(rows[19].viol_raw < 0.0);
        assert_eq!(rows[19].viol_pos, 0.0);
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let s = sample_series(7);
        let text = render_csv(&s);
        assert_eq!(text.lines().count(), 8);
        assert!(text.starts_with(CSV_HEADER));
        let back = parse_csv(&text).unwrap();
        assert_eq!(back, s);
        // Rendering the parsed series reproduces the bytes.
        assert_eq!(render_csv(&back), text);
    }

    #[test]
    fn empty_series_renders_header_only() {
        let s = MetricsSeries::new();
        assert_eq!(render_csv(&s), format!("{CSV_HEADER}\n"));
        assert!(parse_csv(&render_csv(&s)).unwrap().is_empty());
    }

    #[test]
    fn parse_rejects_malformed_input() {
        assert!(parse_csv("nonsense\n1,2\n").is_err());
        let bad_cells = format!("{CSV_HEADER}\n1,0.1,x,0,0,0,0,0,0,0\n");
        assert!(matches!(
            parse_csv(&bad_cells),
            Err(Error::Parse { line: 2, .. })
        ));
        let short_row = format!("{CSV_HEADER}\n1,0.1,0\n");
        assert!(parse_csv(&short_row).is_err());
        let decreasing = format!("{CSV_HEADER}\n2,0,0,0,0,0,0,0,0,0\n1,0,0,0,0,0,0,0,0,0\n");
        assert!(parse_csv(&decreasing).is_err());
    }

    #[test]
    fn export_writes_file(){
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("series.csv");
        let s = sample_series(3);
        export_csv(&s, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(parse_csv(&text).unwrap(), s);
        let bad = dir.path().join("missing").join("series.csv");
        assert!(matches!(export_csv(&s, &bad), Err(Error::Io { .. })));
    }

    #[test]
    fn mean_of_replicas_averages_pointwise() {
        let mut a = MetricsSeries::new();
        let mut b = MetricsSeries::new();
        a.push_next(1, 0.1, 2.0, 1.0, 0.5, 0.2, 3.0);
        b.push_next(1, 0.1, 4.0, 3.0, 1.5, -0.2, 1.0);
        let m = MetricsSeries::mean_of(&[a.clone(), b.clone()]).unwrap();
        let r = &m.rows()[0];
        assert_eq!(r.f, 3.0);
        assert_eq!(r.f_gap, 2.0);
        assert_eq!(r.std_err, 1.0);
        assert_eq!(r.viol_raw, 0.0);
        // Mean of clamps, not clamp of means.
        assert_eq!(r.viol_pos, 0.1);
        assert_eq!(r.dual_norm, 2.0);
        let mut c = MetricsSeries::new();
        c.push_next(2, 0.1, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert!(MetricsSeries::mean_of(&[a, c]).is_err());
        assert!(MetricsSeries::mean_of(&[]).is_err());
    }

    #[test]
    fn regret_and_violation_hand_values() {
        // Optimal feasible series aggregates to zero.
        let (r, v) = regret_and_violation(&[2.0, 2.0], 2.0, &[vec![-0.1, -0.2]]).unwrap();
        assert_eq!((r, v), (0.0, 0.0));
        // Hand-built 3-step series: gaps 1+0.5+0.25; edge 0 sums to 0.2,
        // edge 1 sums to −0.05 and clamps away.
        let (r, v) = regret_and_violation(
            &[3.0, 2.5, 2.25],
            2.0,
            &[vec![0.3, -0.2, 0.1], vec![0.0, -0.1, 0.05]],
        )
        .unwrap();
        assert!((r - 1.75).abs() < 1e-15);
        assert!((v - 0.2).abs() < 1e-15);
        assert!(regret_and_violation(&[1.0], f64::NAN, &[]).is_err());
        assert!(regret_and_violation(&[1.0], 0.0, &[vec![]]).is_err());
    }

    #[test]
    fn settling_iteration_ignores_transient_dips() {
        // Dip at t=2 is undone at t=3; the series settles at t=4.
        assert_eq!(
            settling_iteration(&[0.5, 0.05, 0.2, 0.08, 0.04], 0.1),
            Some(4)
        );
        // Monotone series: settling equals the first crossing.
        assert_eq!(settling_iteration(&[0.4, 0.2, 0.1, 0.05], 0.1), Some(3));
        // Entirely at or below from the start.
        assert_eq!(settling_iteration(&[0.1, 0.0], 0.1), Some(1));
        // Still above at the end, or no data, or poisoned by a NaN tail.
        assert_eq!(settling_iteration(&[0.05, 0.2], 0.1), None);
        assert_eq!(settling_iteration(&[], 0.1), None);
        assert_eq!(settling_iteration(&[0.05, f64::NAN], 0.1), None);
    }

    #[test]
    fn loglog_slope_recovers_powers() {
        let pts: Vec<(f64, f64)> = [100.0, 1000.0, 10000.0]
            .iter()
            .map(|&t: &f64| (t, 3.0 * t.powf(-0.5)))
            .collect();
        let slope = fit_loglog_slope(&pts).unwrap();
        assert!((slope + 0.5).abs() < 1e-12);
        assert!(fit_loglog_slope(&pts[..1]).is_err());
        assert!(fit_loglog_slope(&[(1.0, 1.0), (1.0, 2.0)]).is_err());
        assert!(fit_loglog_slope(&[(1.0, -1.0), (2.0, 1.0)]).is_err());
    }
}
