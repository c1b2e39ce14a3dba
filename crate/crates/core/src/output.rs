//! Files written by a run.
//!
//! `report.csv`: `scenario,system,seed,kind,name,measured,threshold,relation,status`
//! with `kind` one of `criterion`, `diagnostic`, `note`, `error`, `verdict`.
//!
//! `curves.csv`: `curve,x,y`, one row per point.
//!
//! `section.csv` (fixed-point only): `i1..im,th1..thm,x1..xd`, one row per
//! grid node.

use std::fmt::Write as _;
use std::path::Path;

use crate::config::OutputOptions;
use crate::error::{Error, Result};
use crate::scenario::{Curve, Verdict};

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

pub fn report_csv(v: &Verdict) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["scenario", "system", "seed", "kind", "name", "measured", "threshold", "relation", "status"])
        .map_err(csv_err)?;
    let seed = v.seed.to_string();
    let head = [v.scenario.as_str(), v.system.as_str(), seed.as_str()];
    let mut row = |kind: &str, name: &str, measured: String, threshold: String, rel: &str, status: &str| {
        w.write_record(head.iter().copied().chain([kind, name, &measured, &threshold, rel, status]))
    };
    for c in &v.criteria {
        row(
            "criterion",
            &c.name,
            num(c.measured),
            num(c.threshold),
            c.relation.symbol(),
            if c.passed { "pass" } else { "fail" },
        )
        .map_err(csv_err)?;
    }
    for (name, val) in &v.diagnostics {
        row("diagnostic", name, num(*val), String::new(), "", "").map_err(csv_err)?;
    }
    for note in &v.notes {
        row("note", note, String::new(), String::new(), "", "").map_err(csv_err)?;
    }
    if let Some(e) = &v.error {
        row("error", e, String::new(), String::new(), "", "fail").map_err(csv_err)?;
    }
    row("verdict", &v.scenario, String::new(), String::new(), "", if v.passed() { "pass" } else { "fail" })
        .map_err(csv_err)?;
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

pub fn curves_csv(curves: &[Curve]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["curve", "x", "y"]).map_err(csv_err)?;
    for c in curves {
        for &(x, y) in &c.points {
            w.write_record([c.name.as_str(), &num(x), &num(y)]).map_err(csv_err)?;
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#7f7f7f"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Polyline plot of all curves; the y axis is logarithmic when requested
/// and every plotted value is positive.
pub fn plot_svg(title: &str, curves: &[Curve], log_scale: bool) -> String {
    let (w, h, ml, mr, mt, mb) = (800.0, 500.0, 80.0, 220.0, 40.0, 50.0);
    let pts = curves.iter().flat_map(|c| c.points.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
    let all: Vec<(f64, f64)> = pts.copied().collect();
    let log = log_scale && !all.is_empty() && all.iter().all(|p| p.1 > 0.0);
    let ty = |y: f64| if log { y.log10() } else { y };
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(ty(y));
        y1 = y1.max(ty(y));
    }
    if all.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| ml + (x - x0) / (x1 - x0) * (w - ml - mr);
    let py = |y: f64| mt + (1.0 - (ty(y) - y0) / (y1 - y0)) * (h - mt - mb);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{ml}" y="24" font-size="14">{}</text>"#, escape(title));
    let _ = writeln!(
        s,
        r#"<rect x="{ml}" y="{mt}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - ml - mr,
        h - mt - mb
    );
    let ylab = |v: f64| if log { format!("1e{v:.1}") } else { format!("{v:.3e}") };
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, ml - 4.0, mt + 10.0, ylab(y1));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, ml - 4.0, h - mb, ylab(y0));
    let _ = writeln!(s, r#"<text x="{ml}" y="{}">{x0:.3}</text>"#, h - mb + 16.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{x1:.3}</text>"#, w - mr, h - mb + 16.0);
    for (k, c) in curves.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let path: Vec<String> = c
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite() && (!log || p.1 > 0.0))
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        if !path.is_empty() {
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
        }
        let ly = mt + 16.0 * (k as f64 + 1.0);
        let _ = writeln!(s, r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{color}" stroke-width="2"/>"#, w - mr + 10.0, ly - 4.0, w - mr + 30.0, ly - 4.0);
        let _ = writeln!(s, r#"<text x="{}" y="{ly}">{}</text>"#, w - mr + 36.0, escape(&c.name));
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `report.csv`, `curves.csv`, the extra tables and, if enabled,
/// `plot.svg` into `outdir`.
pub fn write_outputs(v: &Verdict, outdir: &Path, opts: &OutputOptions) -> Result<()> {
    std::fs::create_dir_all(outdir)?;
    std::fs::write(outdir.join("report.csv"), report_csv(v)?)?;
    std::fs::write(outdir.join("curves.csv"), curves_csv(&v.curves)?)?;
    for (name, body) in &v.tables {
        std::fs::write(outdir.join(name), body)?;
    }
    if opts.plot && !v.curves.is_empty() {
        std::fs::write(outdir.join("plot.svg"), plot_svg(&format!("{} ({})", v.scenario, v.system), &v.curves, opts.log_scale))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Criterion, Relation};

    fn verdict() -> Verdict {
        Verdict {
            scenario: "fixed-point".into(),
            system: "B1-scalar".into(),
            seed: 3,
            criteria: vec![Criterion::new("alpha_hat_below_one", 0.5, Relation::Le, 1.0)],
            diagnostics: vec![("alpha_hat".into(), 0.5)],
            curves: vec![Curve {
                name: "d, with comma".into(),
                points: vec![(0.0, 1.0), (1.0, 0.1)],
            }],
            notes: vec![],
            error: None,
            tables: vec![],
        }
    }

    #[test]
    fn report_layout() {
        let text = String::from_utf8(report_csv(&verdict()).unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "scenario,system,seed,kind,name,measured,threshold,relation,status");
        assert_eq!(lines[1], "fixed-point,B1-scalar,3,criterion,alpha_hat_below_one,5e-1,1e0,<=,pass");
        assert_eq!(lines.last().unwrap(), &"fixed-point,B1-scalar,3,verdict,fixed-point,,,,pass");
    }

    #[test]
    fn curves_are_quoted_and_round_trip() {
        let bytes = curves_csv(&verdict().curves).unwrap();
        let mut r = csv::Reader::from_reader(bytes.as_slice());
        let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
        assert_eq!(rows.len(), 2);
        assert_eq!(&rows[0][0], "d, with comma");
        assert_eq!(rows[1][2].parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let s = plot_svg("t <1>", &verdict().curves, true);
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert!(s.contains("<polyline") && s.contains("t &lt;1&gt;"));
        assert!(s.contains("1e"));
        let lin = plot_svg("t", &[Curve { name: "neg".into(), points: vec![(0.0, -1.0), (1.0, 1.0)] }], true);
        assert!(lin.contains("<polyline") && !lin.contains(">1e"));
    }

    #[test]
    fn outputs_land_in_outdir() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("nested");
        write_outputs(&verdict(), &out, &OutputOptions::default()).unwrap();
        for f in ["report.csv", "curves.csv", "plot.svg"] {
            assert!(out.join(f).exists(), "{f}");
        }
    }
}
