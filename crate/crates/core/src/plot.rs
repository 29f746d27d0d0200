//! Static SVG line plots.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// Plot log10(y); every y must then be positive.
    pub log_y: bool,
    pub series: Vec<Series>,
    pub width: f64,
    pub height: f64,
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Short tick label.
fn tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn span(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        (lo - pad, hi + pad)
    }
}

impl LinePlot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        LinePlot {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            log_y: false,
            series: Vec::new(),
            width: 800.0,
            height: 450.0,
        }
    }

    pub fn add(&mut self, label: &str, points: Vec<(f64, f64)>) -> &mut Self {
        self.series.push(Series {
            label: label.into(),
            points,
        });
        self
    }

    pub fn to_svg(&self) -> Result<String> {
        if self.series.is_empty() || self.series.iter().any(|s| s.points.is_empty()) {
            return Err(Error::invalid("plot needs at least one nonempty series"));
        }
        let ty = |y: f64| if self.log_y { y.log10() } else { y };
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for s in &self.series {
            for &(x, y) in &s.points {
                if !x.is_finite() || !y.is_finite() || (self.log_y && y <= 0.0) {
                    return Err(Error::NonFinite(format!("series {} has point ({x}, {y})", s.label)));
                }
                x0 = x0.min(x);
                x1 = x1.max(x);
                y0 = y0.min(ty(y));
                y1 = y1.max(ty(y));
            }
        }
        let (x0, x1) = span(x0, x1);
        let (y0, y1) = span(y0, y1);
        let (w, h) = (self.width, self.height);
        let pw = w - MARGIN_L - MARGIN_R;
        let ph = h - MARGIN_T - MARGIN_B;
        let px = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * pw;
        let py = |y: f64| MARGIN_T + (1.0 - (y - y0) / (y1 - y0)) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            w / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        for i in 0..=5 {
            let f = i as f64 / 5.0;
            let xv = x0 + f * (x1 - x0);
            let yv = y0 + f * (y1 - y0);
            let ylab = if self.log_y { tick(10f64.powf(yv)) } else { tick(yv) };
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                px(xv),
                MARGIN_T + ph + 18.0,
                tick(xv)
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                MARGIN_L - 6.0,
                py(yv) + 4.0,
                ylab
            );
        }
        let _ = writeln!(
            s,
            r#"<text class="x-label" x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            MARGIN_L + pw / 2.0,
            h - 10.0,
            escape(&self.x_label)
        );
        let y_label = if self.log_y {
            format!("{} (log scale)", self.y_label)
        } else {
            self.y_label.clone()
        };
        let _ = writeln!(
            s,
            r#"<text class="y-label" x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            MARGIN_T + ph / 2.0,
            MARGIN_T + ph / 2.0,
            escape(&y_label)
        );
        for (i, series) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let mut pts = String::new();
            for &(x, y) in &series.points {
                let _ = write!(pts, "{:.2},{:.2} ", px(x), py(ty(y)));
            }
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"><title>{}</title></polyline>"#,
                pts.trim_end(),
                escape(&series.label)
            );
            let ly = MARGIN_T + 14.0 + 16.0 * i as f64;
            let lx = MARGIN_L + pw - 150.0;
            let _ = writeln!(
                s,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
                lx + 20.0,
                lx + 26.0,
                ly + 4.0,
                escape(&series.label)
            );
        }
        s.push_str("</svg>\n");
        Ok(s)
    }
}

/// Columns of a numeric CSV with a header row. Cells that do not parse
/// (including `NaN`) become NaN.
pub fn read_csv_columns(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Format("empty CSV".into()))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut cols = vec![Vec::new(); header.len()];
    for (i, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != header.len() {
            return Err(Error::Format(format!(
                "CSV row {} has {} cells, header has {}",
                i + 2,
                cells.len(),
                header.len()
            )));
        }
        for (c, cell) in cols.iter_mut().zip(cells) {
            c.push(cell.trim().parse().unwrap_or(f64::NAN));
        }
    }
    Ok((header, cols))
}

/// Curves of the named training-log columns against `epoch`. Uses a log
/// axis when every plotted value is positive.
pub fn training_curves(csv: &str, columns: &[&str]) -> Result<LinePlot> {
    let (header, cols) = read_csv_columns(csv)?;
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format(format!("CSV has no column {name}")))
    };
    let epoch = &cols[find("epoch")?];
    let mut plot = LinePlot::new("Training curves", "epoch", "value");
    for &c in columns {
        let vals = &cols[find(c)?];
        let pts: Vec<(f64, f64)> = epoch
            .iter()
            .zip(vals)
            .filter(|(_, v)| v.is_finite())
            .map(|(&e, &v)| (e, v))
            .collect();
        if !pts.is_empty() {
            plot.add(c, pts);
        }
    }
    plot.log_y = plot.series.iter().all(|s| s.points.iter().all(|p| p.1 > 0.0));
    Ok(plot)
}

/// Ground truth against one or more reconstructions of a single channel.
pub fn overlay(title: &str, sample_rate: f64, traces: &[(&str, &[f64])]) -> LinePlot {
    let mut plot = LinePlot::new(title, "time (s)", "amplitude");
    for (label, y) in traces {
        plot.add(
            label,
            y.iter().enumerate().map(|(i, &v)| (i as f64 / sample_rate, v)).collect(),
        );
    }
    plot
}
