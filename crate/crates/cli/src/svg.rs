//! Scatter plots with the OLS line and its 95% confidence band, written as
//! standalone SVG. Line and band are green when the correlation is
//! significantly positive, red when significantly negative, black otherwise.

use std::fs;
use std::path::Path;

use forgetlab::stats::{correlate, linear_fit_with_ci, CorrelationResult, PairedSample};
use forgetlab::{Error, Result};

use crate::results::ResultRow;

/// Which property goes on the x axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Property {
    TotalComplexity,
    SeqHeterogeneity,
    /// Sequential heterogeneity over permutation-plan rows only.
    NormSeqHeterogeneity,
}

impl Property {
    pub const ALL: [Property; 3] = [
        Property::TotalComplexity,
        Property::SeqHeterogeneity,
        Property::NormSeqHeterogeneity,
    ];

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "total_complexity" => Ok(Property::TotalComplexity),
            "seq_heterogeneity" => Ok(Property::SeqHeterogeneity),
            "norm_seq_heterogeneity" => Ok(Property::NormSeqHeterogeneity),
            other => Err(Error::Config(format!(
                "unknown property '{other}' (expected total_complexity, seq_heterogeneity, or norm_seq_heterogeneity)"
            ))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Property::TotalComplexity => "total_complexity",
            Property::SeqHeterogeneity => "seq_heterogeneity",
            Property::NormSeqHeterogeneity => "norm_seq_heterogeneity",
        }
    }

    fn axis_title(&self) -> &'static str {
        match self {
            Property::TotalComplexity => "total complexity",
            Property::SeqHeterogeneity => "sequential heterogeneity",
            Property::NormSeqHeterogeneity => "normalized sequential heterogeneity",
        }
    }

    /// Rows contributing to this property's scatter.
    pub fn select(&self, rows: &[ResultRow]) -> Vec<(f64, f64)> {
        rows.iter()
            .filter(|r| r.plan.is_permutation() == matches!(self, Property::NormSeqHeterogeneity))
            .map(|r| match self {
                Property::TotalComplexity => (r.total_complexity, r.final_error),
                _ => (r.seq_heterogeneity, r.final_error),
            })
            .collect()
    }
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 25.0;
const MARGIN_TOP: f64 = 35.0;
const MARGIN_BOTTOM: f64 = 55.0;

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

fn tick_label(v: f64) -> String {
    format!("{v:.3}")
}

struct Scale {
    min: f64,
    max: f64,
    lo_px: f64,
    hi_px: f64,
}

impl Scale {
    fn new(values: impl Iterator<Item = f64>, lo_px: f64, hi_px: f64) -> Self {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for v in values {
            min = min.min(v);
            max = max.max(v);
        }
        // Pad the range so points sit inside the frame; a degenerate span
        // still needs a visible window.
        let span = max - min;
        let pad = if span > 0.0 { 0.06 * span } else { 0.5 * min.abs().max(0.1) };
        Self {
            min: min - pad,
            max: max + pad,
            lo_px,
            hi_px,
        }
    }

    fn map(&self, v: f64) -> f64 {
        self.lo_px + (v - self.min) / (self.max - self.min) * (self.hi_px - self.lo_px)
    }

    fn ticks(&self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| self.min + (self.max - self.min) * i as f64 / (n - 1) as f64)
            .collect()
    }
}

fn significance_color(c: &CorrelationResult) -> &'static str {
    if c.p < 0.05 && c.r > 0.0 {
        "#2e7d32" // green: significant positive
    } else if c.p < 0.05 && c.r < 0.0 {
        "#c62828" // red: significant negative
    } else {
        "#000000"
    }
}

/// Renders the scatter of `(property, final_error)` with the regression
/// line and 95% confidence band of the mean response.
pub fn render_scatter_svg(rows: &[ResultRow], x: Property, path: impl AsRef<Path>) -> Result<()> {
    let pairs = x.select(rows);
    if pairs.len() < 3 {
        return Err(Error::Data(format!(
            "need at least 3 rows to plot, have {}",
            pairs.len()
        )));
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let sample = PairedSample::new(xs.clone(), ys.clone())?;
    let corr = correlate(&sample)?;
    let fit = linear_fit_with_ci(&sample, 0.95)?;
    let color = significance_color(&corr);

    let sx = Scale::new(xs.iter().copied(), MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
    let band_extent = (0..=48).map(|i| {
        let xv = sx.min + (sx.max - sx.min) * i as f64 / 48.0;
        fit.predict(xv) + fit.band_half_width(xv)
    });
    let band_lower = (0..=48).map(|i| {
        let xv = sx.min + (sx.max - sx.min) * i as f64 / 48.0;
        fit.predict(xv) - fit.band_half_width(xv)
    });
    let sy = Scale::new(
        ys.iter().copied().chain(band_extent).chain(band_lower),
        HEIGHT - MARGIN_BOTTOM,
        MARGIN_TOP,
    );

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    // Frame and ticks.
    svg.push_str(&format!(
        "<path d=\"M {l},{t} L {l},{b} L {r},{b}\" fill=\"none\" stroke=\"#444\" stroke-width=\"1\"/>\n",
        l = fmt(MARGIN_LEFT),
        t = fmt(MARGIN_TOP),
        b = fmt(HEIGHT - MARGIN_BOTTOM),
        r = fmt(WIDTH - MARGIN_RIGHT),
    ));
    for tick in sx.ticks(5) {
        let px = sx.map(tick);
        svg.push_str(&format!(
            "<path d=\"M {x},{y0} L {x},{y1}\" stroke=\"#444\" stroke-width=\"1\"/>\n",
            x = fmt(px),
            y0 = fmt(HEIGHT - MARGIN_BOTTOM),
            y1 = fmt(HEIGHT - MARGIN_BOTTOM + 5.0),
        ));
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{y}\" font-size=\"11\" text-anchor=\"middle\" font-family=\"sans-serif\">{label}</text>\n",
            x = fmt(px),
            y = fmt(HEIGHT - MARGIN_BOTTOM + 18.0),
            label = tick_label(tick),
        ));
    }
    for tick in sy.ticks(5) {
        let py = sy.map(tick);
        svg.push_str(&format!(
            "<path d=\"M {x0},{y} L {x1},{y}\" stroke=\"#444\" stroke-width=\"1\"/>\n",
            x0 = fmt(MARGIN_LEFT - 5.0),
            x1 = fmt(MARGIN_LEFT),
            y = fmt(py),
        ));
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{y}\" font-size=\"11\" text-anchor=\"end\" font-family=\"sans-serif\">{label}</text>\n",
            x = fmt(MARGIN_LEFT - 8.0),
            y = fmt(py + 4.0),
            label = tick_label(tick),
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{x}\" y=\"{y}\" font-size=\"13\" text-anchor=\"middle\" font-family=\"sans-serif\">{label}</text>\n",
        x = fmt((MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2.0),
        y = fmt(HEIGHT - 12.0),
        label = x.axis_title(),
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{y}\" font-size=\"13\" text-anchor=\"middle\" font-family=\"sans-serif\" transform=\"rotate(-90 16 {y})\">final error</text>\n",
        y = fmt(HEIGHT / 2.0),
    ));

    // Confidence band: upper edge left to right, lower edge back.
    let mut band = String::from("M ");
    for i in 0..=48 {
        let xv = sx.min + (sx.max - sx.min) * i as f64 / 48.0;
        let y = fit.predict(xv) + fit.band_half_width(xv);
        if i > 0 {
            band.push_str(" L ");
        }
        band.push_str(&format!("{},{}", fmt(sx.map(xv)), fmt(sy.map(y))));
    }
    for i in (0..=48).rev() {
        let xv = sx.min + (sx.max - sx.min) * i as f64 / 48.0;
        let y = fit.predict(xv) - fit.band_half_width(xv);
        band.push_str(&format!(" L {},{}", fmt(sx.map(xv)), fmt(sy.map(y))));
    }
    band.push_str(" Z");
    svg.push_str(&format!(
        "<path d=\"{band}\" fill=\"{color}\" fill-opacity=\"0.15\" stroke=\"none\"/>\n"
    ));

    // Regression line.
    svg.push_str(&format!(
        "<path d=\"M {x0},{y0} L {x1},{y1}\" stroke=\"{color}\" stroke-width=\"1.5\" fill=\"none\"/>\n",
        x0 = fmt(sx.map(sx.min)),
        y0 = fmt(sy.map(fit.predict(sx.min))),
        x1 = fmt(sx.map(sx.max)),
        y1 = fmt(sy.map(fit.predict(sx.max))),
    ));

    // Points.
    for (xv, yv) in &pairs {
        svg.push_str(&format!(
            "<circle cx=\"{x}\" cy=\"{y}\" r=\"3\" fill=\"#37474f\" fill-opacity=\"0.8\"/>\n",
            x = fmt(sx.map(*xv)),
            y = fmt(sy.map(*yv)),
        ));
    }

    // Caption with the correlation.
    svg.push_str(&format!(
        "<text x=\"{x}\" y=\"{y}\" font-size=\"12\" text-anchor=\"middle\" font-family=\"sans-serif\">r = {r:.2}, p = {p:.3}, m = {m}</text>\n",
        x = fmt((MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2.0),
        y = fmt(MARGIN_TOP - 14.0),
        r = corr.r,
        p = corr.p,
        m = corr.m,
    ));
    svg.push_str("</svg>\n");

    if let Some(parent) = path.as_ref().parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path.as_ref(), svg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::results::PlanKind;
    use forgetlab::algos::Algorithm;
    use forgetlab::data::{TaskSequence, UnitTask};

    fn rows_from(points: &[(f64, f64)], plan: PlanKind) -> Vec<ResultRow> {
        let a = UnitTask::new(0, 1).unwrap();
        let b = UnitTask::new(2, 3).unwrap();
        points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| ResultRow {
                seq_id: i,
                algorithm: Algorithm::Si,
                setting: "mnist-20".into(),
                sequence: TaskSequence::new(vec![a, b]).unwrap(),
                total_complexity: x,
                seq_heterogeneity: x * 0.5,
                plan,
                final_error: y,
                errors: vec![vec![y], vec![y, y]],
            })
            .collect()
    }

    fn naive_xml_check(svg: &str) {
        // Well-formed enough: every opened tag closes and quotes balance.
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches('"').count() % 2, 0, "unbalanced quotes");
        let opens = svg.matches("<path").count()
            + svg.matches("<circle").count()
            + svg.matches("<text").count()
            + svg.matches("<rect").count();
        let closes = svg.matches("/>").count() + svg.matches("</text>").count();
        assert_eq!(opens, closes, "unclosed elements");
    }

    #[test]
    fn collinear_points_collapse_the_band() {
        let points: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 0.1 * i as f64)).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plot.svg");
        render_scatter_svg(&rows_from(&points, PlanKind::Random), Property::TotalComplexity, &path)
            .unwrap();
        let svg = fs::read_to_string(&path).unwrap();
        naive_xml_check(&svg);
        // Perfectly positive and significant: green styling.
        assert!(svg.contains("#2e7d32"));
        // The band path exists (collapsed onto the line).
        assert!(svg.contains("fill-opacity=\"0.15\""));
    }

    #[test]
    fn insignificant_data_is_black_and_too_few_rows_fail() {
        // A symmetric pattern with (essentially) zero correlation.
        let points = [
            (0.0, 0.1),
            (1.0, 0.3),
            (2.0, 0.1),
            (3.0, 0.3),
            (4.0, 0.1),
            (5.0, 0.3),
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plot.svg");
        render_scatter_svg(&rows_from(&points, PlanKind::Random), Property::TotalComplexity, &path)
            .unwrap();
        let svg = fs::read_to_string(&path).unwrap();
        naive_xml_check(&svg);
        assert!(svg.contains("stroke=\"#000000\""));
        assert!(!svg.contains("#2e7d32"));

        let too_few = rows_from(&points[..2], PlanKind::Random);
        assert!(render_scatter_svg(&too_few, Property::TotalComplexity, &path).is_err());
    }

    #[test]
    fn norm_property_uses_permutation_rows() {
        let perm_points: Vec<(f64, f64)> = (0..8).map(|i| (i as f64, 0.5 - 0.04 * i as f64)).collect();
        let rows = rows_from(&perm_points, PlanKind::Permutations);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plot.svg");
        render_scatter_svg(&rows, Property::NormSeqHeterogeneity, &path).unwrap();
        let svg = fs::read_to_string(&path).unwrap();
        // Significant negative: red styling.
        assert!(svg.contains("#c62828"));
        // And the same rows offer nothing for the non-permutation property.
        assert!(render_scatter_svg(&rows, Property::TotalComplexity, &path).is_err());
    }

    #[test]
    fn output_is_byte_deterministic() {
        let points: Vec<(f64, f64)> = (0..12)
            .map(|i| (i as f64 * 0.37, ((i * 7919) % 13) as f64 / 13.0))
            .collect();
        let rows = rows_from(&points, PlanKind::Random);
        let dir = tempfile::tempdir().unwrap();
        let (p1, p2) = (dir.path().join("a.svg"), dir.path().join("b.svg"));
        render_scatter_svg(&rows, Property::SeqHeterogeneity, &p1).unwrap();
        render_scatter_svg(&rows, Property::SeqHeterogeneity, &p2).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    }
}
