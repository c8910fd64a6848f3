//! Diagnostic SVG plots of tables written by the sweep subcommands.

use anyhow::{anyhow, bail, Context, Result};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PlotKind {
    /// Ratio against p, one polyline per n (from `ratio` output).
    Ratio,
    /// `√p·Eψ_θ` against p, one polyline per n (from `orlicz` output).
    Epsi,
    /// Stacked four-term decomposition per cell, normalized by `n^{1-4/p}` (from `ratio` output).
    Terms,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"];

struct Columns {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Columns {
    fn read(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
        let header = rdr.headers()?.iter().map(str::to_string).collect();
        let rows = rdr
            .records()
            .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<Vec<Vec<String>>, _>>()
            .with_context(|| format!("parsing {}", path.display()))?;
        Ok(Columns { header, rows })
    }

    fn index(&self, name: &str) -> Result<usize> {
        self.header.iter().position(|h| h == name).ok_or_else(|| anyhow!("missing column '{name}'"))
    }

    fn numbers(&self, name: &str) -> Result<Vec<f64>> {
        let k = self.index(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let s = r.get(k).map(String::as_str).unwrap_or("");
                match s {
                    "NaN" | "" => Ok(f64::NAN),
                    _ => s.parse().map_err(|_| anyhow!("row {}: column '{name}' is not numeric: '{s}'", i + 1)),
                }
            })
            .collect()
    }
}

/// Means over directions keyed by `(n, p)`; NaN rows are skipped.
fn cell_means(n: &[f64], p: &[f64], values: &[f64]) -> BTreeMap<u64, Vec<(f64, f64)>> {
    let mut acc: BTreeMap<(u64, u64), (f64, f64, usize)> = BTreeMap::new();
    for ((&n, &p), &v) in n.iter().zip(p).zip(values) {
        if v.is_finite() {
            let e = acc.entry((n as u64, p.to_bits())).or_insert((p, 0.0, 0));
            e.1 += v;
            e.2 += 1;
        }
    }
    let mut out: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
    for ((n, _), (p, s, c)) in acc {
        out.entry(n).or_default().push((p, s / c as f64));
    }
    for line in out.values_mut() {
        line.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    out
}

struct Axes {
    x: (f64, f64),
    y: (f64, f64),
}

impl Axes {
    fn fit(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let span = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
            if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) }
        };
        let x = span(&mut xs.clone());
        let (ylo, yhi) = span(&mut ys.clone());
        let pad = 0.05 * (yhi - ylo);
        Axes { x, y: (ylo.min(0.0).max(ylo - pad), yhi + pad) }
    }

    fn sx(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn sy(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn header(svg: &mut String, title: &str, xlabel: &str, ylabel: &str) {
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{title}</text>"#, WIDTH / 2.0);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>"#, WIDTH / 2.0, HEIGHT - 12.0);
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{ylabel}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
}

fn frame(svg: &mut String, ax: &Axes, xticks: &[(f64, String)]) {
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN, MARGIN);
    let _ = writeln!(svg, r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" fill="none" stroke="black"/>"#);
    for i in 0..=4 {
        let v = ax.y.0 + (ax.y.1 - ax.y.0) * i as f64 / 4.0;
        let y = ax.sy(v);
        let _ = writeln!(svg, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 4.0, y + 4.0, tick(v));
    }
    for (v, label) in xticks {
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{}" text-anchor="middle">{label}</text>"#, ax.sx(*v), y0 + 16.0);
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        format!("{v:.3}").trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn legend(svg: &mut String, entries: &[String]) {
    for (i, e) in entries.iter().enumerate() {
        let y = MARGIN + 14.0 * i as f64;
        let c = COLORS[i % COLORS.len()];
        let _ = writeln!(svg, r#"<rect x="{}" y="{}" width="10" height="10" fill="{c}"/>"#, WIDTH - MARGIN + 4.0, y - 9.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{y}">{e}</text>"#, WIDTH - MARGIN + 18.0);
    }
}

fn line_plot(lines: &BTreeMap<u64, Vec<(f64, f64)>>, title: &str, ylabel: &str) -> String {
    let pts = || lines.values().flatten();
    let ax = Axes::fit(pts().map(|(p, _)| p.log10()), pts().map(|(_, v)| *v));
    let mut ps: Vec<f64> = pts().map(|(p, _)| *p).collect();
    ps.sort_by(f64::total_cmp);
    ps.dedup();
    let xticks: Vec<(f64, String)> = ps.iter().map(|p| (p.log10(), tick(*p))).collect();
    let mut svg = String::new();
    header(&mut svg, title, "p (log scale)", ylabel);
    frame(&mut svg, &ax, &xticks);
    for (i, line) in lines.values().enumerate() {
        let c = COLORS[i % COLORS.len()];
        let d: Vec<String> = line.iter().map(|(p, v)| format!("{:.2},{:.2}", ax.sx(p.log10()), ax.sy(*v))).collect();
        let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="1.5"/>"#, d.join(" "));
        for (p, v) in line {
            let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{c}"/>"#, ax.sx(p.log10()), ax.sy(*v));
        }
    }
    legend(&mut svg, &lines.keys().map(|n| format!("n={n}")).collect::<Vec<_>>());
    svg.push_str("</svg>\n");
    svg
}

fn terms_plot(cols: &Columns) -> Result<String> {
    let (n, p, scale) = (cols.numbers("n")?, cols.numbers("p")?, cols.numbers("scale_n_pow")?);
    let mut per_term = Vec::new();
    for k in 1..=4 {
        let t = cols.numbers(&format!("term{k}"))?;
        let norm: Vec<f64> = t.iter().zip(&scale).map(|(a, s)| a / s).collect();
        per_term.push(cell_means(&n, &p, &norm));
    }
    // cells in (n, p) order
    let cells: Vec<(u64, f64)> = per_term[0].iter().flat_map(|(n, l)| l.iter().map(move |(p, _)| (*n, *p))).collect();
    if cells.is_empty() {
        bail!("no finite rows to plot");
    }
    let value = |k: usize, c: &(u64, f64)| -> f64 {
        per_term[k].get(&c.0).and_then(|l| l.iter().find(|(p, _)| *p == c.1)).map_or(0.0, |(_, v)| v.max(0.0))
    };
    let stacks: Vec<[f64; 4]> = cells.iter().map(|c| [value(0, c), value(1, c), value(2, c), value(3, c)]).collect();
    let tops = stacks.iter().map(|s| s.iter().sum::<f64>());
    let m = cells.len() as f64;
    let ax = Axes::fit([-0.5, m - 0.5].into_iter(), tops.chain([0.0]));
    let xticks: Vec<(f64, String)> =
        cells.iter().enumerate().map(|(i, (n, p))| (i as f64, format!("{}/{}", tick(*p), n))).collect();
    let mut svg = String::new();
    header(&mut svg, "four-term decomposition / n^(1-4/p)", "p/n", "normalized term");
    frame(&mut svg, &ax, &xticks);
    let w = 0.7 * (ax.sx(1.0) - ax.sx(0.0));
    for (i, s) in stacks.iter().enumerate() {
        let mut base = 0.0;
        for (k, v) in s.iter().enumerate() {
            let (y0, y1) = (ax.sy(base), ax.sy(base + v));
            let _ = writeln!(
                svg,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                ax.sx(i as f64) - w / 2.0,
                y1,
                w,
                y0 - y1,
                COLORS[k]
            );
            base += v;
        }
    }
    legend(&mut svg, &(1..=4).map(|k| format!("term{k}")).collect::<Vec<_>>());
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Renders `csv` as an SVG string.
pub fn render(csv: &Path, kind: PlotKind) -> Result<String> {
    let cols = Columns::read(csv)?;
    if cols.rows.is_empty() {
        bail!("{} has a header but no rows", csv.display());
    }
    match kind {
        PlotKind::Ratio => {
            let lines = cell_means(&cols.numbers("n")?, &cols.numbers("p")?, &cols.numbers("ratio")?);
            if lines.is_empty() {
                bail!("no finite rows to plot");
            }
            Ok(line_plot(&lines, "Var|X|^2 / (lambda^2 E|X|^2)", "ratio"))
        }
        PlotKind::Epsi => {
            let p = cols.numbers("p")?;
            let e: Vec<f64> = cols.numbers("e_psi")?.iter().zip(&p).map(|(e, p)| e * p.sqrt()).collect();
            let lines = cell_means(&cols.numbers("n")?, &p, &e);
            if lines.is_empty() {
                bail!("no finite rows to plot");
            }
            Ok(line_plot(&lines, "sqrt(p) E psi", "sqrt(p) E psi"))
        }
        PlotKind::Terms => terms_plot(&cols),
    }
}

/// Renders and writes the plot; nothing is written when rendering fails.
pub fn cmd_plot(csv: &Path, kind: PlotKind, out: &Path) -> Result<()> {
    let svg = render(csv, kind)?;
    std::fs::write(out, svg).with_context(|| format!("writing {}", out.display()))
}
