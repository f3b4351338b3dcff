//! Deterministic SVG figures rendered from result tables. Coordinates are
//! printed with fixed precision and nothing depends on time or locale.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use anyhow::{bail, Result};

use crate::table::Table;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureKind {
    /// Eigenvalues against excitation number.
    Spectrum,
    /// Correlation length against eigenstate energy, one color per sector.
    EigenstateXi,
    /// `s_V / s_A` against eigenstate energy.
    EigenstateRatio,
    /// Mean center/edge ratio against disorder with a one-sigma band.
    DisorderSweep,
    /// Overlap weights on the `(n, ε)` plane, one panel per time or strength.
    OverlapHeatmap,
    /// Prepared-state correlation length against detuning over eigenstate points.
    PrepXi,
    /// Prepared-state `s_V / s_A` against detuning over eigenstate points.
    PrepRatio,
    /// Floating-transmon parasitic coupling relative to a grounded one.
    Parasitic,
}

impl FigureKind {
    pub fn required_columns(&self) -> &'static [&'static str] {
        match self {
            FigureKind::Spectrum => &["n", "epsilon_over_j"],
            FigureKind::EigenstateXi => &["n", "epsilon_over_j", "xi"],
            FigureKind::EigenstateRatio => &["n", "epsilon_over_j", "ratio"],
            FigureKind::DisorderSweep => &["disorder_over_j", "mean", "std"],
            FigureKind::OverlapHeatmap => &["panel", "n", "epsilon_over_j", "weight"],
            FigureKind::PrepXi => &["series", "delta_over_j", "xi"],
            FigureKind::PrepRatio => &["series", "delta_over_j", "ratio"],
            FigureKind::Parasitic => &["c_g", "c_p_prime", "ratio"],
        }
    }
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

#[derive(Debug, Clone, Copy)]
struct Range {
    lo: f64,
    hi: f64,
}

impl Range {
    fn of(values: impl IntoIterator<Item = f64>, log: bool) -> Self {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in values {
            let v = if log { v.log10() } else { v };
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if !lo.is_finite() {
            return Range { lo: 0.0, hi: 1.0 };
        }
        if hi - lo < 1e-12 {
            let pad = if lo.abs() > 0.0 { 0.5 * lo.abs() } else { 0.5 };
            return Range { lo: lo - pad, hi: hi + pad };
        }
        let pad = 0.05 * (hi - lo);
        Range { lo: lo - pad, hi: hi + pad }
    }

    fn ticks(&self) -> Vec<f64> {
        let span = self.hi - self.lo;
        let raw = span / 6.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 7.0).unwrap_or(10.0 * mag);
        let mut t = (self.lo / step).ceil() * step;
        let mut out = Vec::new();
        while t <= self.hi + 1e-9 * step {
            out.push(if t.abs() < 1e-9 * step { 0.0 } else { t });
            t += step;
        }
        out
    }
}

struct Panel {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    xr: Range,
    yr: Range,
    log_y: bool,
}

impl Panel {
    fn px(&self, x: f64) -> f64 {
        self.x0 + (x - self.xr.lo) / (self.xr.hi - self.xr.lo) * self.w
    }

    fn py(&self, y: f64) -> f64 {
        let y = if self.log_y { y.log10() } else { y };
        self.y0 + self.h - (y - self.yr.lo) / (self.yr.hi - self.yr.lo) * self.h
    }

    fn axes(&self, out: &mut String, title: &str, x_label: &str, y_label: &str) {
        let (x0, y0, w, h) = (self.x0, self.y0, self.w, self.h);
        let _ = writeln!(out, r#"<rect x="{x0:.2}" y="{y0:.2}" width="{w:.2}" height="{h:.2}" fill="none" stroke="black"/>"#);
        for t in self.xr.ticks() {
            let x = self.px(t);
            let _ = writeln!(
                out,
                r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#,
                y0 + h,
                y0 + h + 5.0,
                y0 + h + 18.0,
                tick_label(t)
            );
        }
        for t in self.yr.ticks() {
            let (value, y) = if self.log_y {
                if (t - t.round()).abs() > 1e-9 {
                    continue;
                }
                (10f64.powf(t), self.y0 + self.h - (t - self.yr.lo) / (self.yr.hi - self.yr.lo) * self.h)
            } else {
                (t, self.py(t))
            };
            let _ = writeln!(
                out,
                r#"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#,
                x0 - 5.0,
                x0 - 8.0,
                y + 4.0,
                tick_label(value)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">{}</text>"#,
            x0 + w / 2.0,
            y0 + h + 38.0,
            escape(x_label)
        );
        let (lx, ly) = (x0 - 48.0, y0 + h / 2.0);
        let _ = writeln!(
            out,
            r#"<text x="{lx:.2}" y="{ly:.2}" font-size="13" text-anchor="middle" transform="rotate(-90 {lx:.2} {ly:.2})">{}</text>"#,
            escape(y_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">{}</text>"#,
            x0 + w / 2.0,
            y0 - 10.0,
            escape(title)
        );
    }

    fn point(&self, out: &mut String, x: f64, y: f64, color: &str, opacity: f64) {
        if !x.is_finite() || !y.is_finite() || (self.log_y && y <= 0.0) {
            return;
        }
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2.2" fill="{color}" fill-opacity="{opacity:.3}"/>"#,
            self.px(x),
            self.py(y)
        );
    }

    fn polyline(&self, out: &mut String, pts: &[(f64, f64)], color: &str) {
        let coords: Vec<String> = pts
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite() && (!self.log_y || *y > 0.0))
            .map(|&(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y)))
            .collect();
        if coords.len() > 1 {
            let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"/>"#, coords.join(" "));
        }
    }
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn document(width: f64, height: f64, body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

fn legend(out: &mut String, x: f64, y: f64, entries: &[(String, &str)]) {
    for (k, (label, color)) in entries.iter().enumerate() {
        let yy = y + 15.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{x:.2}" y="{:.2}" width="10" height="10" fill="{color}"/><text x="{:.2}" y="{:.2}" font-size="11">{}</text>"#,
            yy - 9.0,
            x + 14.0,
            yy,
            escape(label)
        );
    }
}

fn finite_pairs(xs: &[Option<f64>], ys: &[Option<f64>]) -> Vec<(f64, f64)> {
    xs.iter().zip(ys).filter_map(|(x, y)| Some(((*x)?, (*y)?))).collect()
}

/// Groups rows by an integer-valued or text key, in ascending key order.
fn group_numeric(keys: &[Option<f64>], xs: &[Option<f64>], ys: &[Option<f64>]) -> BTreeMap<i64, Vec<(f64, f64)>> {
    let mut groups: BTreeMap<i64, Vec<(f64, f64)>> = BTreeMap::new();
    for ((k, x), y) in keys.iter().zip(xs).zip(ys) {
        if let (Some(k), Some(x), Some(y)) = (k, x, y) {
            groups.entry(k.round() as i64).or_default().push((*x, *y));
        }
    }
    groups
}

pub fn render_svg(table: &Table, kind: FigureKind) -> Result<String> {
    let missing: Vec<&str> = kind.required_columns().iter().copied().filter(|c| table.column_index(c).is_none()).collect();
    if !missing.is_empty() {
        bail!("table does not match figure {kind:?}: missing columns {}", missing.join(", "));
    }
    let (w, h) = (640.0, 420.0);
    let mut body = String::new();
    match kind {
        FigureKind::Spectrum => {
            let pts = finite_pairs(&table.numbers("n")?, &table.numbers("epsilon_over_j")?);
            let panel = Panel {
                x0: 70.0,
                y0: 30.0,
                w: 540.0,
                h: 335.0,
                xr: Range::of(pts.iter().map(|p| p.0), false),
                yr: Range::of(pts.iter().map(|p| p.1), false),
                log_y: false,
            };
            panel.axes(&mut body, "Sector spectra", "excitation number n", "ε / J");
            for (x, y) in pts {
                panel.point(&mut body, x, y, PALETTE[0], 0.35);
            }
        }
        FigureKind::EigenstateXi | FigureKind::EigenstateRatio => {
            let (col, label, log_y) = match kind {
                FigureKind::EigenstateXi => ("xi", "correlation length ξ", true),
                _ => ("ratio", "s_V / s_A", false),
            };
            let groups = group_numeric(&table.numbers("n")?, &table.numbers("epsilon_over_j")?, &table.numbers(col)?);
            let all: Vec<(f64, f64)> = groups.values().flatten().copied().collect();
            let panel = Panel {
                x0: 70.0,
                y0: 30.0,
                w: 470.0,
                h: 335.0,
                xr: Range::of(all.iter().map(|p| p.0), false),
                yr: Range::of(all.iter().map(|p| p.1).filter(|y| !log_y || *y > 0.0), log_y),
                log_y,
            };
            panel.axes(&mut body, "Eigenstates", "ε / J", label);
            let mut entries = Vec::new();
            for (k, (n, pts)) in groups.iter().enumerate() {
                let color = PALETTE[k % PALETTE.len()];
                for &(x, y) in pts {
                    panel.point(&mut body, x, y, color, 0.5);
                }
                entries.push((format!("n = {n}"), color));
            }
            legend(&mut body, 555.0, 45.0, &entries);
        }
        FigureKind::DisorderSweep => {
            let x = table.numbers("disorder_over_j")?;
            let m = table.numbers("mean")?;
            let s = table.numbers("std")?;
            let mut rows: Vec<(f64, f64, f64)> = x
                .iter()
                .zip(&m)
                .zip(&s)
                .filter_map(|((x, m), s)| Some(((*x)?, (*m)?, s.unwrap_or(0.0))))
                .collect();
            rows.sort_by(|a, b| a.0.total_cmp(&b.0));
            let panel = Panel {
                x0: 70.0,
                y0: 30.0,
                w: 540.0,
                h: 335.0,
                xr: Range::of(rows.iter().map(|r| r.0), false),
                yr: Range::of(rows.iter().flat_map(|r| [r.1 - r.2, r.1 + r.2]).chain([1.0]), false),
                log_y: false,
            };
            panel.axes(&mut body, "Center/edge entropy-law ratio", "Δω / J", "center / edge of s_V / s_A");
            if rows.len() > 1 {
                let upper = rows.iter().map(|r| format!("{:.2},{:.2}", panel.px(r.0), panel.py(r.1 + r.2)));
                let lower = rows.iter().rev().map(|r| format!("{:.2},{:.2}", panel.px(r.0), panel.py(r.1 - r.2)));
                let pts: Vec<String> = upper.chain(lower).collect();
                let _ = writeln!(body, r#"<polygon points="{}" fill="{}" fill-opacity="0.25" stroke="none"/>"#, pts.join(" "), PALETTE[0]);
            }
            panel.polyline(&mut body, &rows.iter().map(|r| (r.0, r.1)).collect::<Vec<_>>(), PALETTE[0]);
            panel.polyline(
                &mut body,
                &[(panel.xr.lo, 1.0), (panel.xr.hi, 1.0)],
                "#888888",
            );
            for r in &rows {
                panel.point(&mut body, r.0, r.1, PALETTE[0], 1.0);
            }
        }
        FigureKind::OverlapHeatmap => {
            let panels = table.numbers("panel")?;
            let ns = table.numbers("n")?;
            let es = table.numbers("epsilon_over_j")?;
            let ws = table.numbers("weight")?;
            let mut groups: BTreeMap<u64, (f64, Vec<(f64, f64, f64)>)> = BTreeMap::new();
            for k in 0..table.len() {
                if let (Some(p), Some(n), Some(e), Some(wt)) = (panels[k], ns[k], es[k], ws[k]) {
                    groups.entry(p.to_bits() ^ (1 << 63)).or_insert((p, Vec::new())).1.push((n, e, wt));
                }
            }
            let mut ordered: Vec<(f64, Vec<(f64, f64, f64)>)> = groups.into_values().collect();
            ordered.sort_by(|a, b| a.0.total_cmp(&b.0));
            let count = ordered.len().max(1);
            let pw = 200.0;
            let width = 70.0 + count as f64 * (pw + 30.0);
            let xr = Range::of(ordered.iter().flat_map(|g| g.1.iter().map(|p| p.0)), false);
            let yr = Range::of(ordered.iter().flat_map(|g| g.1.iter().map(|p| p.1)), false);
            if ordered.is_empty() {
                let panel = Panel { x0: 70.0, y0: 30.0, w: pw, h: 335.0, xr, yr, log_y: false };
                panel.axes(&mut body, "", "n", "ε / J");
            }
            for (k, (label, pts)) in ordered.iter().enumerate() {
                let panel = Panel { x0: 70.0 + k as f64 * (pw + 30.0), y0: 30.0, w: pw, h: 335.0, xr, yr, log_y: false };
                panel.axes(&mut body, &tick_label(*label), "n", if k == 0 { "ε / J" } else { "" });
                let peak = pts.iter().map(|p| p.2).fold(0.0, f64::max);
                for &(n, e, wt) in pts {
                    if peak > 0.0 && wt > 1e-6 * peak {
                        panel.point(&mut body, n, e, "#000000", (wt / peak).sqrt());
                    }
                }
            }
            return Ok(document(width, h, &body));
        }
        FigureKind::PrepXi | FigureKind::PrepRatio => {
            let (col, label, log_y) = match kind {
                FigureKind::PrepXi => ("xi", "correlation length ξ", true),
                _ => ("ratio", "s_V / s_A", false),
            };
            let series = table.texts("series")?;
            let xs = table.numbers("delta_over_j")?;
            let ys = table.numbers(col)?;
            let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
            for k in 0..table.len() {
                if let (Some(x), Some(y)) = (xs[k], ys[k]) {
                    groups.entry(series[k].clone()).or_default().push((x, y));
                }
            }
            let all: Vec<(f64, f64)> = groups.values().flatten().copied().collect();
            let panel = Panel {
                x0: 70.0,
                y0: 30.0,
                w: 440.0,
                h: 335.0,
                xr: Range::of(all.iter().map(|p| p.0), false),
                yr: Range::of(all.iter().map(|p| p.1).filter(|y| !log_y || *y > 0.0), log_y),
                log_y,
            };
            panel.axes(&mut body, "Prepared states and eigenstates", "δ / J  (eigenstates at ε / (n J))", label);
            let mut entries = Vec::new();
            for (k, (name, pts)) in groups.iter().enumerate() {
                let color = PALETTE[k % PALETTE.len()];
                if name.starts_with("eigenstates") {
                    for &(x, y) in pts {
                        panel.point(&mut body, x, y, color, 0.3);
                    }
                } else {
                    let mut sorted = pts.clone();
                    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
                    panel.polyline(&mut body, &sorted, color);
                    for &(x, y) in &sorted {
                        panel.point(&mut body, x, y, color, 1.0);
                    }
                }
                entries.push((name.clone(), color));
            }
            legend(&mut body, 525.0, 45.0, &entries);
        }
        FigureKind::Parasitic => {
            let groups = group_numeric(
                &table.numbers("c_g")?.iter().map(|v| v.map(|x| x * 1e6)).collect::<Vec<_>>(),
                &table.numbers("c_p_prime")?,
                &table.numbers("ratio")?,
            );
            let all: Vec<(f64, f64)> = groups.values().flatten().copied().collect();
            let panel = Panel {
                x0: 70.0,
                y0: 30.0,
                w: 440.0,
                h: 335.0,
                xr: Range::of(all.iter().map(|p| p.0), false),
                yr: Range::of(all.iter().map(|p| p.1).chain([0.0, 0.5]), false),
                log_y: false,
            };
            panel.axes(&mut body, "Parasitic coupling, floating vs grounded", "C_P′", "C_eff(f) / C_eff(g)");
            let mut entries = Vec::new();
            for (k, (key, pts)) in groups.iter().enumerate() {
                let color = PALETTE[k % PALETTE.len()];
                let mut sorted = pts.clone();
                sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
                panel.polyline(&mut body, &sorted, color);
                entries.push((format!("C_G = {}", tick_label(*key as f64 / 1e6)), color));
            }
            legend(&mut body, 525.0, 45.0, &entries);
        }
    }
    Ok(document(w, h, &body))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::Cell;

    fn sweep_table() -> Table {
        let mut t = Table::new(&["disorder_over_j", "mean", "std", "seeds"]);
        for (x, m, s) in [(0.1, 5.0, 0.5), (0.5, 3.0, 1.0), (1.0, 1.2, 1.5)] {
            t.push(vec![x.into(), m.into(), s.into(), 10usize.into()]).unwrap();
        }
        t
    }

    #[test]
    fn empty_table_gives_axes_only() {
        let t = Table::new(&["n", "epsilon_over_j", "xi"]);
        let svg = render_svg(&t, FigureKind::EigenstateXi).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("ε / J"));
        assert!(!svg.contains("<circle"));
    }

    #[test]
    fn identical_tables_identical_bytes() {
        let a = render_svg(&sweep_table(), FigureKind::DisorderSweep).unwrap();
        let b = render_svg(&sweep_table(), FigureKind::DisorderSweep).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_has_band_and_line() {
        let svg = render_svg(&sweep_table(), FigureKind::DisorderSweep).unwrap();
        assert!(svg.contains("<polygon"));
        assert!(svg.contains("<polyline"));
    }

    #[test]
    fn schema_mismatch_is_an_error() {
        let t = Table::new(&["n", "epsilon_over_j"]);
        assert!(render_svg(&t, FigureKind::DisorderSweep).is_err());
    }

    #[test]
    fn heatmap_panels() {
        let mut t = Table::new(&["panel", "n", "epsilon_over_j", "weight"]);
        for p in [1.0, 2.0] {
            t.push(vec![p.into(), 0usize.into(), 0.0.into(), 0.5.into()]).unwrap();
            t.push(vec![p.into(), 1usize.into(), (-1.0).into(), 0.5.into()]).unwrap();
            t.push(vec![p.into(), 2usize.into(), Cell::Empty, 0.5.into()]).unwrap();
        }
        let svg = render_svg(&t, FigureKind::OverlapHeatmap).unwrap();
        assert_eq!(svg.matches("<circle").count(), 4);
    }

    #[test]
    fn ticks_are_round() {
        let r = Range { lo: -0.3, hi: 12.7 };
        assert_eq!(r.ticks(), vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0]);
    }
}
