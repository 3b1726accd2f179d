//! SVG heatmaps for portraits and line plots for traces.
//!
//! Heatmap cells carry `data-row`, `data-col` and `data-level` (0-255)
//! attributes so the quantized magnitudes can be read back with
//! [`read_heatmap_levels`].

use std::fmt::Write;

use portrait_core::units::rad_per_ns_to_mhz;
use portrait_core::{Error, PortraitGrid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum ColorScale {
    #[default]
    Viridis,
    Gray,
}

const VIRIDIS: [[u8; 3]; 11] = [
    [0x44, 0x01, 0x54],
    [0x48, 0x24, 0x75],
    [0x41, 0x44, 0x87],
    [0x35, 0x5f, 0x8d],
    [0x2a, 0x78, 0x8e],
    [0x21, 0x91, 0x8c],
    [0x22, 0xa8, 0x84],
    [0x44, 0xbf, 0x70],
    [0x7a, 0xd1, 0x51],
    [0xbd, 0xdf, 0x26],
    [0xfd, 0xe7, 0x25],
];

impl ColorScale {
    pub fn color(self, level: u8) -> [u8; 3] {
        match self {
            ColorScale::Gray => [level; 3],
            ColorScale::Viridis => {
                let x = level as f64 / 255.0 * (VIRIDIS.len() - 1) as f64;
                let i = (x.floor() as usize).min(VIRIDIS.len() - 2);
                let f = x - i as f64;
                let mix = |k: usize| (VIRIDIS[i][k] as f64 * (1.0 - f) + VIRIDIS[i + 1][k] as f64 * f).round() as u8;
                [mix(0), mix(1), mix(2)]
            }
        }
    }

    fn hex(self, level: u8) -> String {
        let [r, g, b] = self.color(level);
        format!("#{r:02x}{g:02x}{b:02x}")
    }
}

/// Magnitude quantized to 0-255 against `max`.
pub fn quantize(value: f64, max: f64) -> u8 {
    if max > 0.0 {
        (255.0 * (value / max).clamp(0.0, 1.0)).round() as u8
    } else {
        0
    }
}

const LEFT: f64 = 80.0;
const TOP: f64 = 30.0;
const WIDTH: f64 = 600.0;
const HEIGHT: f64 = 400.0;
const BOTTOM: f64 = 60.0;
const RIGHT: f64 = 100.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    (0..5).map(|k| lo + (hi - lo) * k as f64 / 4.0).collect()
}

fn header(out: &mut String, title: &str) {
    let (w, h) = (LEFT + WIDTH + RIGHT, TOP + HEIGHT + BOTTOM);
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(out, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(
        out,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + WIDTH / 2.0,
        escape(title)
    )
    .unwrap();
}

fn axes(out: &mut String, x: (f64, f64), y: (f64, f64), x_label: &str, y_label: &str) {
    let (x0, y0) = (LEFT, TOP + HEIGHT);
    writeln!(out, r#"<rect x="{LEFT}" y="{TOP}" width="{WIDTH}" height="{HEIGHT}" fill="none" stroke="black"/>"#)
        .unwrap();
    for v in ticks(x.0, x.1) {
        let px = LEFT + if x.1 > x.0 { (v - x.0) / (x.1 - x.0) * WIDTH } else { WIDTH / 2.0 };
        writeln!(out, r#"<line x1="{px:.2}" y1="{y0}" x2="{px:.2}" y2="{}" stroke="black"/>"#, y0 + 5.0).unwrap();
        writeln!(out, r#"<text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#, y0 + 20.0, label(v)).unwrap();
    }
    for v in ticks(y.0, y.1) {
        let py = TOP + HEIGHT - if y.1 > y.0 { (v - y.0) / (y.1 - y.0) * HEIGHT } else { HEIGHT / 2.0 };
        writeln!(out, r#"<line x1="{}" y1="{py:.2}" x2="{x0}" y2="{py:.2}" stroke="black"/>"#, x0 - 5.0).unwrap();
        writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 8.0, py + 4.0, label(v)).unwrap();
    }
    writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + WIDTH / 2.0,
        y0 + 45.0,
        escape(x_label)
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="20" y="{}" text-anchor="middle" transform="rotate(-90 20 {})">{}</text>"#,
        TOP + HEIGHT / 2.0,
        TOP + HEIGHT / 2.0,
        escape(y_label)
    )
    .unwrap();
}

/// Magnitude heatmap of a portrait: time on the horizontal axis (ns),
/// detuning on the vertical axis (MHz), linear scale normalized to the
/// largest magnitude.
pub fn export_svg_heatmap(grid: &PortraitGrid, scale: ColorScale, title: &str) -> Result<String> {
    let (rows, cols) = grid.shape();
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidParameter("cannot draw an empty portrait".into()));
    }
    let mags = grid.magnitudes();
    let max = mags.iter().flatten().copied().fold(0.0, f64::max);
    let mut out = String::new();
    header(&mut out, title);
    let (cw, ch) = (WIDTH / cols as f64, HEIGHT / rows as f64);
    writeln!(
        out,
        r#"<g class="heatmap" data-rows="{rows}" data-cols="{cols}" data-max="{max:e}" shape-rendering="crispEdges">"#
    )
    .unwrap();
    for (i, row) in mags.iter().enumerate() {
        // lowest detuning at the bottom
        let y = TOP + (rows - 1 - i) as f64 * ch;
        for (j, &m) in row.iter().enumerate() {
            let level = quantize(m, max);
            writeln!(
                out,
                r#"<rect x="{:.3}" y="{y:.3}" width="{:.3}" height="{:.3}" fill="{}" data-row="{i}" data-col="{j}" data-level="{level}"/>"#,
                LEFT + j as f64 * cw,
                cw + 0.01,
                ch + 0.01,
                scale.hex(level)
            )
            .unwrap();
        }
    }
    writeln!(out, "</g>").unwrap();

    let t = grid.times();
    let d = grid.detunings();
    axes(
        &mut out,
        (t[0], t[cols - 1]),
        (rad_per_ns_to_mhz(d[0]), rad_per_ns_to_mhz(d[rows - 1])),
        "time (ns)",
        "detuning (MHz)",
    );

    // color bar
    let bx = LEFT + WIDTH + 30.0;
    let steps = 64;
    let bh = HEIGHT / steps as f64;
    writeln!(out, r#"<g class="colorbar" shape-rendering="crispEdges">"#).unwrap();
    for k in 0..steps {
        let level = quantize(k as f64 + 0.5, steps as f64);
        let y = TOP + HEIGHT - (k + 1) as f64 * bh;
        writeln!(
            out,
            r#"<rect x="{bx}" y="{y:.3}" width="20" height="{:.3}" fill="{}"/>"#,
            bh + 0.01,
            scale.hex(level)
        )
        .unwrap();
    }
    writeln!(out, "</g>").unwrap();
    writeln!(out, r#"<text x="{}" y="{}">1</text>"#, bx + 25.0, TOP + 10.0).unwrap();
    writeln!(out, r#"<text x="{}" y="{}">0</text>"#, bx + 25.0, TOP + HEIGHT).unwrap();
    writeln!(out, "</svg>").unwrap();
    Ok(out)
}

fn attr<'a>(tag: &'a str, name: &str) -> Option<&'a str> {
    let key = format!(" {name}=\"");
    let start = tag.find(&key)? + key.len();
    let len = tag[start..].find('"')?;
    Some(&tag[start..start + len])
}

/// Quantized levels stored in a heatmap written by [`export_svg_heatmap`],
/// indexed `[row][col]` like the grid.
pub fn read_heatmap_levels(svg: &str) -> Result<Vec<Vec<u8>>> {
    let bad = |m: &str| Error::Parse(format!("heatmap SVG: {m}"));
    let group = svg.split('<').find(|t| t.starts_with("g class=\"heatmap\"")).ok_or_else(|| bad("no heatmap group"))?;
    let dim = |name: &str| -> Result<usize> {
        attr(group, name).and_then(|v| v.parse().ok()).ok_or_else(|| bad(&format!("missing {name}")))
    };
    let (rows, cols) = (dim("data-rows")?, dim("data-cols")?);
    let mut levels = vec![vec![None; cols]; rows];
    for tag in svg.split('<').filter(|t| t.starts_with("rect ")) {
        let Some(level) = attr(tag, "data-level") else { continue };
        let field = |name: &str| -> Result<usize> {
            attr(tag, name).and_then(|v| v.parse().ok()).ok_or_else(|| bad(&format!("cell without {name}")))
        };
        let (i, j) = (field("data-row")?, field("data-col")?);
        let level: u8 = level.parse().map_err(|_| bad("level is not 0-255"))?;
        *levels.get_mut(i).and_then(|r| r.get_mut(j)).ok_or_else(|| bad("cell index out of range"))? = Some(level);
    }
    levels.into_iter().map(|r| r.into_iter().map(|v| v.ok_or_else(|| bad("missing cell"))).collect()).collect()
}

/// One curve of a line plot.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Series {
    pub fn new(label: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { label: label.into(), x, y }
    }
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Line plot of one or more series sharing the axes.
pub fn export_svg_lines(series: &[Series], title: &str, x_label: &str, y_label: &str) -> Result<String> {
    let finite = |v: &&f64| v.is_finite();
    let xs: Vec<f64> = series.iter().flat_map(|s| s.x.iter().filter(finite).copied()).collect();
    let ys: Vec<f64> = series.iter().flat_map(|s| s.y.iter().filter(finite).copied()).collect();
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::InvalidParameter("cannot draw a plot without finite points".into()));
    }
    let range = |v: &[f64]| v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let x = range(&xs);
    let (ylo, yhi) = range(&ys);
    let pad = if yhi > ylo { 0.05 * (yhi - ylo) } else { 0.5 * yhi.abs().max(1.0) };
    let y = (ylo - pad, yhi + pad);
    let px = |v: f64| LEFT + if x.1 > x.0 { (v - x.0) / (x.1 - x.0) * WIDTH } else { WIDTH / 2.0 };
    let py = |v: f64| TOP + HEIGHT - (v - y.0) / (y.1 - y.0) * HEIGHT;

    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, x, y, x_label, y_label);
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let points: Vec<String> =
            s.x.iter()
                .zip(&s.y)
                .filter(|(a, b)| a.is_finite() && b.is_finite())
                .map(|(&a, &b)| format!("{:.2},{:.2}", px(a), py(b)))
                .collect();
        writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, points.join(" "))
            .unwrap();
        let ly = TOP + 15.0 + 16.0 * k as f64;
        let lx = LEFT + WIDTH + 8.0;
        writeln!(out, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 15.0)
            .unwrap();
        writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, lx + 19.0, ly + 4.0, escape(&s.label)).unwrap();
    }
    writeln!(out, "</svg>").unwrap();
    Ok(out)
}
