//! CSV and key=value serialization plus atomic file replacement.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::verdict::{CurveReport, EqualityDiagnostic, TheoremCheck};

pub const CURVE_HEADER: &str =
    "t,H,N,I,kinetic,energy,dH,d2H,d2N_analytic,d2N_fd,bound,margin,A1,A2,cs_gap";

/// C `%.12e`: twelve fraction digits, signed exponent of at least two digits.
pub fn sci(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{x:.12e}");
    let (mant, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mant}e{sign}{:02}", exp.abs())
}

pub fn curve_csv(curve: &CurveReport) -> String {
    let mut out = String::with_capacity(256 * (curve.times.len() + 1));
    out.push_str(CURVE_HEADER);
    out.push('\n');
    for i in 0..curve.times.len() {
        let f = &curve.functionals[i];
        let d = &curve.deficits[i];
        let row = [
            curve.times[i],
            f.entropy,
            f.entropy_power,
            f.fisher,
            f.kinetic,
            f.energy,
            f.d_entropy,
            f.d2_entropy,
            curve.d2n_analytic[i],
            curve.d2n_fd[i],
            curve.bound[i],
            curve.margin[i],
            d.a1,
            d.a2,
            d.cs_gap,
        ];
        let cells: Vec<String> = row.iter().map(|&x| sci(x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug)]
pub struct VerdictRecord {
    pub scenario: String,
    pub check: TheoremCheck,
    pub iterations: usize,
    pub residual: f64,
    pub equality: Option<EqualityDiagnostic>,
}

impl VerdictRecord {
    pub fn line(&self) -> String {
        let c = &self.check;
        let mut s = String::new();
        let _ = write!(
            s,
            "scenario={} theorem={} verdict={} min_margin={} tol_margin={} max_energy_drift={} \
             min_lhs_alternative={} iterations={} residual={} K={}",
            self.scenario,
            c.theorem.as_str(),
            c.verdict.as_str(),
            sci(c.min_margin),
            sci(c.tol_margin),
            sci(c.max_energy_drift),
            sci(c.min_lhs_alternative),
            self.iterations,
            sci(self.residual),
            sci(c.k),
        );
        if let Some(e) = c.max_abs_energy {
            let _ = write!(s, " max_abs_energy={}", sci(e));
        }
        if let Some(g) = c.reduction_gap {
            let _ = write!(s, " reduction_gap={}", sci(g));
        }
        if let Some(q) = &self.equality {
            let _ = write!(
                s,
                " r_f={} r_g={} cs_defect={} near_equality={}",
                sci(q.r_f),
                sci(q.r_g),
                sci(q.cs_defect),
                q.near_equality
            );
        }
        s
    }
}

pub fn verdict_report(records: &[VerdictRecord]) -> String {
    records.iter().map(|r| r.line() + "\n").collect()
}

/// Writes to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })
}
