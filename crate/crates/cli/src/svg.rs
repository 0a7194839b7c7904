//! Self-contained SVG charts.
//!
//! Every data point becomes a `<circle>` carrying its original values in
//! `data-x`/`data-y`, so a chart can be checked against the CSV it came from.
//! Output depends only on the input values.

use std::fmt::Write as _;

use cpce_core::format::fmt_g17;

use crate::error::CliError;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const TICKS: usize = 5;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChartKind {
    Line,
    Scatter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub kind: ChartKind,
    pub log_y: bool,
    pub series: Vec<Series>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return None;
    }
    if lo == hi {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.5 };
        return Some((lo - pad, hi + pad));
    }
    Some((lo, hi))
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

impl Chart {
    /// Points that can be drawn: finite, and positive on a log axis.
    fn drawable(&self) -> Vec<Vec<(f64, f64)>> {
        self.series
            .iter()
            .map(|s| {
                s.points
                    .iter()
                    .copied()
                    .filter(|(x, y)| x.is_finite() && y.is_finite() && (!self.log_y || *y > 0.0))
                    .collect()
            })
            .collect()
    }

    pub fn render(&self) -> Result<String, CliError> {
        let drawable = self.drawable();
        let ty = |y: f64| if self.log_y { y.log10() } else { y };
        let (x0, x1) = range(drawable.iter().flatten().map(|p| p.0))
            .ok_or_else(|| CliError::Input("nothing to plot: no finite data points".into()))?;
        let (y0, y1) = range(drawable.iter().flatten().map(|p| ty(p.1))).expect("x range implies y range");
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + ph - (ty(y) - y0) / (y1 - y0) * ph;

        let mut out = String::new();
        let w = &mut out;
        writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
        writeln!(
            w,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        )
        .unwrap();
        writeln!(w, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
        writeln!(w, r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#, LEFT + pw / 2.0, escape(&self.title)).unwrap();

        writeln!(w, r#"<g class="axes" stroke="black" fill="none">"#).unwrap();
        writeln!(w, r#"<line x1="{LEFT}" y1="{:.1}" x2="{:.1}" y2="{:.1}"/>"#, TOP + ph, LEFT + pw, TOP + ph).unwrap();
        writeln!(w, r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{:.1}"/>"#, TOP + ph).unwrap();
        writeln!(w, "</g>").unwrap();

        writeln!(w, r#"<g class="ticks" text-anchor="middle">"#).unwrap();
        for k in 0..=TICKS {
            let f = k as f64 / TICKS as f64;
            let xv = x0 + f * (x1 - x0);
            let px = LEFT + f * pw;
            writeln!(w, r#"<line x1="{px:.1}" y1="{:.1}" x2="{px:.1}" y2="{:.1}" stroke="black"/>"#, TOP + ph, TOP + ph + 5.0).unwrap();
            writeln!(w, r#"<text x="{px:.1}" y="{:.1}">{}</text>"#, TOP + ph + 18.0, tick_label(xv)).unwrap();
            let yv = y0 + f * (y1 - y0);
            let py = TOP + ph - f * ph;
            let label = if self.log_y { format!("1e{yv:.1}") } else { tick_label(yv) };
            writeln!(w, r#"<line x1="{:.1}" y1="{py:.1}" x2="{LEFT}" y2="{py:.1}" stroke="black"/>"#, LEFT - 5.0).unwrap();
            writeln!(w, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{label}</text>"#, LEFT - 8.0, py + 4.0).unwrap();
        }
        writeln!(w, "</g>").unwrap();
        writeln!(w, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, HEIGHT - 15.0, escape(&self.x_label)).unwrap();
        let y_label = if self.log_y { format!("{} (log scale)", self.y_label) } else { self.y_label.clone() };
        writeln!(
            w,
            r#"<text x="20" y="{:.1}" text-anchor="middle" transform="rotate(-90 20 {:.1})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&y_label)
        )
        .unwrap();

        for (k, (series, points)) in self.series.iter().zip(&drawable).enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            writeln!(w, r#"<g class="series" data-name="{}" fill="{color}" stroke="{color}">"#, escape(&series.name)).unwrap();
            if self.kind == ChartKind::Line && points.len() > 1 {
                let coords: Vec<String> = points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
                writeln!(w, r#"<polyline fill="none" stroke-width="1.5" points="{}"/>"#, coords.join(" ")).unwrap();
            }
            let radius = if self.kind == ChartKind::Line { 1.5 } else { 3.0 };
            for &(x, y) in points {
                writeln!(
                    w,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="{radius}" data-x="{}" data-y="{}"/>"#,
                    sx(x),
                    sy(y),
                    fmt_g17(x),
                    fmt_g17(y)
                )
                .unwrap();
            }
            let ly = TOP + 10.0 + 18.0 * k as f64;
            let lx = LEFT + pw + 15.0;
            writeln!(w, r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke-width="2"/>"#, lx + 20.0).unwrap();
            writeln!(w, r#"<text x="{:.1}" y="{:.1}" stroke="none" fill="black">{}</text>"#, lx + 26.0, ly + 4.0, escape(&series.name)).unwrap();
            writeln!(w, "</g>").unwrap();
        }
        writeln!(w, "</svg>").unwrap();
        Ok(out)
    }
}

/// How a known CSV layout maps onto a chart.
struct Layout {
    title: &'static str,
    x: &'static str,
    y: &'static str,
    group: Option<&'static str>,
    kind: ChartKind,
    log_y: bool,
}

fn layout_for(header: &[&str]) -> Layout {
    let has = |c: &str| header.contains(&c);
    if has("kind") && has("fraction") {
        Layout { title: "Completion error vs missing fraction", x: "fraction", y: "mean_final_mae", group: Some("kind"), kind: ChartKind::Line, log_y: false }
    } else if has("kind") && has("iteration") {
        Layout { title: "Best-so-far MAE", x: "iteration", y: "mean_best_mae", group: Some("kind"), kind: ChartKind::Line, log_y: false }
    } else if has("r") && has("mean_final_mae") {
        Layout { title: "Final MAE vs assumed rank", x: "r", y: "mean_final_mae", group: None, kind: ChartKind::Line, log_y: false }
    } else if has("variance") && has("layers") {
        Layout { title: "Gradient variance", x: "layers", y: "variance", group: Some("n"), kind: ChartKind::Scatter, log_y: true }
    } else if has("mean_best_mae") {
        Layout { title: "Best-so-far MAE", x: "iteration", y: "mean_best_mae", group: None, kind: ChartKind::Line, log_y: true }
    } else if has("best_loss") {
        Layout { title: "Optimization trace", x: "iteration", y: "best_loss", group: None, kind: ChartKind::Line, log_y: true }
    } else {
        Layout { title: "", x: "", y: "", group: None, kind: ChartKind::Line, log_y: false }
    }
}

/// Builds a chart from a headed CSV written by one of the experiments.
/// Unknown layouts plot the second column against the first.
pub fn chart_from_csv(text: &str, kind: Option<ChartKind>, log_y: Option<bool>) -> Result<Chart, CliError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| CliError::Input("empty CSV".into()))?
        .split(',')
        .map(str::trim)
        .collect();
    if header.len() < 2 {
        return Err(CliError::Input("CSV needs at least two columns".into()));
    }
    let layout = layout_for(&header);
    let col = |name: &str, fallback: usize| header.iter().position(|h| *h == name).unwrap_or(fallback);
    let (xi, yi) = (col(layout.x, 0), col(layout.y, 1));
    let gi = layout.group.and_then(|g| header.iter().position(|h| *h == g));

    let mut series: Vec<Series> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != header.len() {
            return Err(CliError::Input(format!("CSV row {} has {} fields, header has {}", lineno + 2, fields.len(), header.len())));
        }
        let num = |i: usize| -> Result<f64, CliError> {
            if fields[i].is_empty() {
                return Ok(f64::NAN);
            }
            fields[i]
                .parse()
                .map_err(|_| CliError::Input(format!("CSV row {}: {:?} is not a number", lineno + 2, fields[i])))
        };
        let point = (num(xi)?, num(yi)?);
        let name = match gi {
            Some(g) => format!("{}={}", header[g], fields[g]),
            None => header[yi].to_string(),
        };
        match series.iter_mut().find(|s| s.name == name) {
            Some(s) => s.points.push(point),
            None => series.push(Series { name, points: vec![point] }),
        }
    }
    Ok(Chart {
        title: layout.title.to_string(),
        x_label: header[xi].to_string(),
        y_label: header[yi].to_string(),
        kind: kind.unwrap_or(layout.kind),
        log_y: log_y.unwrap_or(layout.log_y),
        series,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_by_kind() {
        let csv = "kind,iteration,mean_best_mae,std_best_mae\nc,0,1,0\nc,1,0.5,0\ne,0,2,0\n";
        let chart = chart_from_csv(csv, None, None).unwrap();
        assert_eq!(chart.series.len(), 2);
        assert_eq!(chart.series[0].points, vec![(0.0, 1.0), (1.0, 0.5)]);
        let svg = chart.render().unwrap();
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(svg.contains(r#"data-x="1" data-y="0.5""#));
        assert_eq!(svg, chart.render().unwrap());
    }

    #[test]
    fn log_axis_drops_nonpositive() {
        let chart = Chart {
            title: "t".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            kind: ChartKind::Scatter,
            log_y: true,
            series: vec![Series { name: "s".into(), points: vec![(0.0, 0.0), (1.0, 10.0), (2.0, 100.0)] }],
        };
        assert_eq!(chart.render().unwrap().matches("<circle").count(), 2);
    }

    #[test]
    fn empty_chart_is_an_error() {
        assert!(chart_from_csv("a,b\n", None, None).unwrap().render().is_err());
    }
}
