//! CSV export. Comma separated, `.` decimal point, comment lines prefixed
//! with `#`, then one row of column names.

use std::io::{self, Write};

use crate::analysis::{BoundsCertificate, StudyReport};
use crate::stepper::{Field, OrderLevel};

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_comments<W: Write>(w: &mut W, comments: &[String]) -> io::Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    Ok(())
}

fn join(values: impl IntoIterator<Item = String>) -> String {
    values.into_iter().collect::<Vec<_>>().join(",")
}

/// Header row of x coordinates, then one row per time level.
pub fn write_field<W: Write>(w: &mut W, comments: &[String], field: &Field) -> io::Result<()> {
    write_comments(w, comments)?;
    let g = &field.grid;
    writeln!(w, "{}", join((0..=g.intervals).map(|n| fmt_num(g.x(n)))))?;
    for row in &field.values {
        writeln!(w, "{}", join(row.iter().map(|&v| fmt_num(v))))?;
    }
    Ok(())
}

pub fn write_order<W: Write>(w: &mut W, comments: &[String], levels: &[OrderLevel]) -> io::Result<()> {
    write_comments(w, comments)?;
    writeln!(w, "dx,dt,err,ratio")?;
    for l in levels {
        let ratio = l.ratio.map(fmt_num).unwrap_or_default();
        writeln!(w, "{},{},{},{}", fmt_num(l.dx), fmt_num(l.dt), fmt_num(l.max_err), ratio)?;
    }
    Ok(())
}

pub fn write_study<W: Write>(w: &mut W, comments: &[String], report: &StudyReport) -> io::Result<()> {
    write_comments(w, comments)?;
    writeln!(w, "k,median_err,q10_err,q90_err,tail_prob,partial_sum,hoeffding_bound")?;
    for (j, k) in report.checkpoints.iter().enumerate() {
        let bound = report.hoeffding.as_ref().map(|h| fmt_num(h[j])).unwrap_or_default();
        writeln!(
            w,
            "{k},{},{},{},{},{},{bound}",
            fmt_num(report.median_err[j]),
            fmt_num(report.q10_err[j]),
            fmt_num(report.q90_err[j]),
            fmt_num(report.tail_probs[j]),
            fmt_num(report.partial_sums[j]),
        )?;
    }
    Ok(())
}

pub fn write_bounds<W: Write>(w: &mut W, comments: &[String], cert: &BoundsCertificate) -> io::Result<()> {
    write_comments(w, comments)?;
    writeln!(w, "k,max_ratio_over_i,sum,bound,holds")?;
    for r in &cert.rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.k,
            fmt_num(r.max_ratio_over_i),
            fmt_num(r.sum),
            fmt_num(r.bound),
            r.holds
        )?;
    }
    Ok(())
}
