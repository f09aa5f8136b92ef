//! Minimal hand-emitted SVG line plots on log-log axes.
//!
//! Input: a CSV whose first column is the x value and whose remaining
//! columns are series (header row gives the names). Rows with nonpositive
//! values are skipped, since the axes are logarithmic.

use anyhow::{bail, Context, Result};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 560.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 160.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 60.0;
const PALETTE: [&str; 6] = [
    "#1f6feb", "#d1242f", "#1a7f37", "#9a6700", "#8250df", "#bf3989",
];

pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn parse_csv(text: &str) -> Result<Table> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .context("empty csv")?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    if header.len() < 2 {
        bail!("need at least two csv columns (x plus one series)");
    }
    let mut rows = Vec::new();
    for line in lines {
        let row: Result<Vec<f64>, _> = line.split(',').map(|v| v.trim().parse::<f64>()).collect();
        match row {
            Ok(row) if row.len() == header.len() => rows.push(row),
            // Non-numeric rows (e.g. status columns) are not plottable.
            _ => bail!("non-numeric or ragged csv row: {line}"),
        }
    }
    if rows.is_empty() {
        bail!("csv has a header but no data rows");
    }
    Ok(Table { header, rows })
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut decade = lo.log10().floor() as i32;
    while 10f64.powi(decade) <= hi * 1.0001 {
        let t = 10f64.powi(decade);
        if t >= lo * 0.9999 {
            out.push(t);
        }
        decade += 1;
    }
    if out.is_empty() {
        out.push(lo);
        out.push(hi);
    }
    out
}

/// Renders the table as a log-log SVG line plot, one polyline per series.
pub fn render(table: &Table, title: &str) -> Result<String> {
    let series_count = table.header.len() - 1;
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for row in &table.rows {
        if row[0] > 0.0 {
            x_min = x_min.min(row[0]);
            x_max = x_max.max(row[0]);
        }
        for v in &row[1..] {
            if *v > 0.0 {
                y_min = y_min.min(*v);
                y_max = y_max.max(*v);
            }
        }
    }
    if !x_min.is_finite() || !y_min.is_finite() {
        bail!("no positive data to plot on log-log axes");
    }
    if x_min == x_max {
        x_max = x_min * 10.0;
    }
    if y_min == y_max {
        y_max = y_min * 10.0;
    }
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x.ln() - x_min.ln()) / (x_max.ln() - x_min.ln()) * plot_w;
    let sy = |y: f64| MARGIN_T + plot_h - (y.ln() - y_min.ln()) / (y_max.ln() - y_min.ln()) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"monospace\" font-size=\"12\">\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-size=\"15\">{}</text>\n",
        MARGIN_L,
        escape(title)
    ));
    // Axes.
    svg.push_str(&format!(
        "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{plot_w}\" height=\"{plot_h}\" \
         fill=\"none\" stroke=\"#444\"/>\n"
    ));
    for t in ticks(x_min, x_max) {
        let x = sx(t);
        svg.push_str(&format!(
            "<line x1=\"{x:.2}\" y1=\"{}\" x2=\"{x:.2}\" y2=\"{}\" stroke=\"#ddd\"/>\n",
            MARGIN_T,
            MARGIN_T + plot_h
        ));
        svg.push_str(&format!(
            "<text x=\"{x:.2}\" y=\"{}\" text-anchor=\"middle\">{t:e}</text>\n",
            MARGIN_T + plot_h + 18.0
        ));
    }
    for t in ticks(y_min, y_max) {
        let y = sy(t);
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y:.2}\" x2=\"{}\" y2=\"{y:.2}\" stroke=\"#ddd\"/>\n",
            MARGIN_L,
            MARGIN_L + plot_w
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{y:.2}\" text-anchor=\"end\" dy=\"4\">{t:e}</text>\n",
            MARGIN_L - 6.0
        ));
    }
    // Series.
    for s in 0..series_count {
        let color = PALETTE[s % PALETTE.len()];
        let mut path = String::new();
        for row in &table.rows {
            let x = row[0];
            let y = row[s + 1];
            if x > 0.0 && y > 0.0 {
                path.push_str(&format!("{:.2},{:.2} ", sx(x), sy(y)));
            }
        }
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            path.trim_end()
        ));
        for row in &table.rows {
            let x = row[0];
            let y = row[s + 1];
            if x > 0.0 && y > 0.0 {
                svg.push_str(&format!(
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{color}\"/>\n",
                    sx(x),
                    sy(y)
                ));
            }
        }
        let ly = MARGIN_T + 16.0 + 18.0 * s as f64;
        svg.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{ly:.2}\" x2=\"{1}\" y2=\"{ly:.2}\" stroke=\"{color}\" \
             stroke-width=\"2\"/>\n",
            WIDTH - MARGIN_R + 10.0,
            WIDTH - MARGIN_R + 34.0,
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{ly:.2}\" dy=\"4\">{}</text>\n",
            WIDTH - MARGIN_R + 40.0,
            escape(&table.header[s + 1])
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
