//! Diffable artifacts: JSON values that always carry their tolerance, fixed-format
//! CSV tables, and hand-assembled SVG plots.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

/// A number together with the tolerance or error bar it was computed under.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Measured {
    pub value: f64,
    pub tol: f64,
}

impl Measured {
    pub fn new(value: f64, tol: f64) -> Self {
        Self { value, tol }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// CSV with a fixed float format so identical runs are byte-identical.
pub struct CsvWriter {
    out: std::io::BufWriter<std::fs::File>,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let file = std::fs::File::create(path)
            .with_context(|| format!("cannot create {}", path.display()))?;
        let mut out = std::io::BufWriter::new(file);
        writeln!(out, "{}", header.join(","))?;
        Ok(Self { out })
    }

    pub fn row(&mut self, fields: &[CsvField]) -> Result<()> {
        let rendered: Vec<String> = fields.iter().map(|f| f.render()).collect();
        writeln!(self.out, "{}", rendered.join(","))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

pub enum CsvField {
    Float(f64),
    Int(i64),
    Text(String),
    Bool(bool),
}

impl CsvField {
    fn render(&self) -> String {
        match self {
            Self::Float(v) => format!("{v:.17e}"),
            Self::Int(v) => v.to_string(),
            Self::Text(s) => s.clone(),
            Self::Bool(b) => b.to_string(),
        }
    }
}

/// One plotted series: label and (x, y) points.
pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
    pub color: &'a str,
    /// Draw markers instead of a connected line.
    pub markers: bool,
}

/// Assemble a standalone SVG line plot (no plotting dependency).
pub fn write_svg_plot(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
) -> Result<()> {
    let width = 760.0;
    let height = 520.0;
    let ml = 90.0;
    let mr = 30.0;
    let mt = 50.0;
    let mb = 70.0;
    let pw = width - ml - mr;
    let ph = height - mt - mb;

    let mut xmin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for s in series {
        for &(x, y) in &s.points {
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymin = ymin.min(y);
            ymax = ymax.max(y);
        }
    }
    if !xmin.is_finite() {
        xmin = 0.0;
        xmax = 1.0;
        ymin = 0.0;
        ymax = 1.0;
    }
    if (xmax - xmin).abs() < 1e-300 {
        xmax = xmin + 1.0;
    }
    let pad = ((ymax - ymin) * 0.08).max(1e-12);
    ymin -= pad;
    ymax += pad;

    let to_px = |x: f64, y: f64| -> (f64, f64) {
        (
            ml + (x - xmin) / (xmax - xmin) * pw,
            mt + (1.0 - (y - ymin) / (ymax - ymin)) * ph,
        )
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"28\" font-size=\"17\" text-anchor=\"middle\" \
         font-family=\"monospace\">{title}</text>\n",
        width / 2.0
    ));
    // axes
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        mt + ph,
        ml + pw,
        mt + ph
    ));
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>\n",
        mt + ph
    ));
    // ticks
    for i in 0..=5 {
        let fx = xmin + (xmax - xmin) * i as f64 / 5.0;
        let (px, _) = to_px(fx, ymin);
        svg.push_str(&format!(
            "<line x1=\"{px}\" y1=\"{}\" x2=\"{px}\" y2=\"{}\" stroke=\"black\"/>\n",
            mt + ph,
            mt + ph + 6.0
        ));
        svg.push_str(&format!(
            "<text x=\"{px}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" \
             font-family=\"monospace\">{fx:.3}</text>\n",
            mt + ph + 22.0
        ));
        let fy = ymin + (ymax - ymin) * i as f64 / 5.0;
        let (_, py) = to_px(xmin, fy);
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{py}\" x2=\"{ml}\" y2=\"{py}\" stroke=\"black\"/>\n",
            ml - 6.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"end\" \
             font-family=\"monospace\">{fy:.6}</text>\n",
            ml - 10.0,
            py + 4.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\" \
         font-family=\"monospace\">{x_label}</text>\n",
        ml + pw / 2.0,
        height - 18.0
    ));
    svg.push_str(&format!(
        "<text x=\"20\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\" \
         font-family=\"monospace\" transform=\"rotate(-90 20 {})\">{y_label}</text>\n",
        mt + ph / 2.0,
        mt + ph / 2.0
    ));
    // series
    for (si, s) in series.iter().enumerate() {
        if s.markers {
            for &(x, y) in &s.points {
                let (px, py) = to_px(x, y);
                svg.push_str(&format!(
                    "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"4\" fill=\"{}\"/>\n",
                    s.color
                ));
            }
        } else {
            let pts: Vec<String> = s
                .points
                .iter()
                .map(|&(x, y)| {
                    let (px, py) = to_px(x, y);
                    format!("{px:.2},{py:.2}")
                })
                .collect();
            svg.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>\n",
                pts.join(" "),
                s.color
            ));
        }
        let ly = mt + 18.0 * si as f64;
        svg.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"12\" height=\"12\" fill=\"{}\"/>\n",
            ml + pw - 170.0,
            ly,
            s.color
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" font-family=\"monospace\">{}</text>\n",
            ml + pw - 152.0,
            ly + 10.0,
            s.label
        ));
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg).with_context(|| format!("cannot write {}", path.display()))
}
