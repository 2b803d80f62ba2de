//! Deterministic SVG line and trajectory plots.
//!
//! No plotting dependency pulls its weight here: the output is a fixed
//! 800x500 viewBox, a handful of polylines or a marker path, ticks, and a
//! legend. Every coordinate is formatted with fixed precision and every
//! collection is iterated in index order, so the same input always renders
//! byte-identical SVG.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub epoch: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Plot {
    /// One polyline per series, with a legend.
    Lines(Vec<Series>),
    /// A single path through epoch-ordered points with circle markers.
    Trajectory(Vec<TrajectoryPoint>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotOptions {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
}

impl Default for PlotOptions {
    fn default() -> Self {
        PlotOptions {
            title: String::new(),
            x_label: "x".into(),
            y_label: "y".into(),
            log_y: false,
        }
    }
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 44.0;
const MARGIN_B: f64 = 56.0;

const PALETTE: [&str; 10] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
    "#9c755f", "#bab0ac",
];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
        .replace('\'', "&apos;")
}

fn fmt_coord(v: f64) -> String {
    format!("{v:.2}")
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if v.abs() >= 10000.0 || v.abs() < 0.001 {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

struct Scale {
    min: f64,
    span: f64,
    offset: f64,
    extent: f64,
    flip: bool,
}

impl Scale {
    fn fit(values: impl Iterator<Item = f64>, offset: f64, extent: f64, flip: bool) -> Scale {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let (min, max) = if lo == hi { (lo - 0.5, hi + 0.5) } else { (lo, hi) };
        let pad = (max - min) * 0.04;
        Scale {
            min: min - pad,
            span: (max - min) + 2.0 * pad,
            offset,
            extent,
            flip,
        }
    }

    fn project(&self, v: f64) -> f64 {
        let t = (v - self.min) / self.span;
        if self.flip {
            self.offset + self.extent * (1.0 - t)
        } else {
            self.offset + self.extent * t
        }
    }

    fn ticks(&self) -> Vec<f64> {
        (0..=4).map(|i| self.min + self.span * i as f64 / 4.0).collect()
    }
}

fn check_points(label: &str, points: &[(f64, f64)], log_y: bool) -> Result<()> {
    if points.len() < 2 {
        return Err(Error::NothingToPlot(format!(
            "series {label:?} has {} point(s), need at least 2",
            points.len()
        )));
    }
    for (index, &(x, y)) in points.iter().enumerate() {
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::NothingToPlot(format!(
                "series {label:?} has a non-finite value at point {index}"
            )));
        }
        if log_y && y <= 0.0 {
            return Err(Error::LogAxisNonPositive {
                label: label.to_string(),
                value: y,
                index,
            });
        }
    }
    Ok(())
}

pub fn render_svg(plot: &Plot, opts: &PlotOptions) -> Result<String> {
    let series_points: Vec<(String, Vec<(f64, f64)>)> = match plot {
        Plot::Lines(series) => {
            if series.is_empty() {
                return Err(Error::NothingToPlot("no series to draw".into()));
            }
            series.iter().map(|s| (s.label.clone(), s.points.clone())).collect()
        }
        Plot::Trajectory(points) => {
            vec![(
                "trajectory".to_string(),
                points.iter().map(|p| (p.x, p.y)).collect(),
            )]
        }
    };
    for (label, points) in &series_points {
        check_points(label, points, opts.log_y)?;
    }

    let y_of = |y: f64| if opts.log_y { y.log10() } else { y };
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let xs = Scale::fit(
        series_points.iter().flat_map(|(_, p)| p.iter().map(|&(x, _)| x)),
        MARGIN_L,
        plot_w,
        false,
    );
    let ys = Scale::fit(
        series_points.iter().flat_map(|(_, p)| p.iter().map(|&(_, y)| y_of(y))),
        MARGIN_T,
        plot_h,
        true,
    );

    let mut svg = String::new();
    let w = &mut svg;
    writeln!(
        w,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" viewBox=\"0 0 800 500\" font-family=\"Helvetica, Arial, sans-serif\">"
    )
    .unwrap();
    writeln!(w, "<rect x=\"0\" y=\"0\" width=\"800\" height=\"500\" fill=\"#ffffff\"/>").unwrap();

    if !opts.title.is_empty() {
        writeln!(
            w,
            "<text x=\"400\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" fill=\"#222222\">{}</text>",
            esc(&opts.title)
        )
        .unwrap();
    }

    // grid and ticks
    for t in ys.ticks() {
        let py = fmt_coord(ys.project(t));
        let label = if opts.log_y {
            fmt_tick(10f64.powf(t))
        } else {
            fmt_tick(t)
        };
        writeln!(
            w,
            "<line x1=\"{x1}\" y1=\"{py}\" x2=\"{x2}\" y2=\"{py}\" stroke=\"#dddddd\" stroke-width=\"1\"/>",
            x1 = fmt_coord(MARGIN_L),
            x2 = fmt_coord(WIDTH - MARGIN_R),
        )
        .unwrap();
        writeln!(
            w,
            "<text x=\"{x}\" y=\"{y}\" text-anchor=\"end\" font-size=\"11\" fill=\"#444444\">{label}</text>",
            x = fmt_coord(MARGIN_L - 6.0),
            y = fmt_coord(ys.project(t) + 4.0),
        )
        .unwrap();
    }
    for t in xs.ticks() {
        let px = fmt_coord(xs.project(t));
        writeln!(
            w,
            "<line x1=\"{px}\" y1=\"{y1}\" x2=\"{px}\" y2=\"{y2}\" stroke=\"#dddddd\" stroke-width=\"1\"/>",
            y1 = fmt_coord(MARGIN_T),
            y2 = fmt_coord(HEIGHT - MARGIN_B),
        )
        .unwrap();
        writeln!(
            w,
            "<text x=\"{px}\" y=\"{y}\" text-anchor=\"middle\" font-size=\"11\" fill=\"#444444\">{label}</text>",
            y = fmt_coord(HEIGHT - MARGIN_B + 18.0),
            label = fmt_tick(t),
        )
        .unwrap();
    }

    // axes
    writeln!(
        w,
        "<line x1=\"{l}\" y1=\"{t}\" x2=\"{l}\" y2=\"{b}\" stroke=\"#222222\" stroke-width=\"1\"/>",
        l = fmt_coord(MARGIN_L),
        t = fmt_coord(MARGIN_T),
        b = fmt_coord(HEIGHT - MARGIN_B),
    )
    .unwrap();
    writeln!(
        w,
        "<line x1=\"{l}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"#222222\" stroke-width=\"1\"/>",
        l = fmt_coord(MARGIN_L),
        r = fmt_coord(WIDTH - MARGIN_R),
        b = fmt_coord(HEIGHT - MARGIN_B),
    )
    .unwrap();
    writeln!(
        w,
        "<text x=\"{x}\" y=\"{y}\" text-anchor=\"middle\" font-size=\"13\" fill=\"#222222\">{label}</text>",
        x = fmt_coord(MARGIN_L + plot_w / 2.0),
        y = fmt_coord(HEIGHT - 12.0),
        label = esc(&opts.x_label),
    )
    .unwrap();
    writeln!(
        w,
        "<text x=\"18\" y=\"{y}\" text-anchor=\"middle\" font-size=\"13\" fill=\"#222222\" transform=\"rotate(-90 18 {y})\">{label}</text>",
        y = fmt_coord(MARGIN_T + plot_h / 2.0),
        label = esc(&opts.y_label),
    )
    .unwrap();

    match plot {
        Plot::Lines(series) => {
            for (i, s) in series.iter().enumerate() {
                let color = PALETTE[i % PALETTE.len()];
                let pts: Vec<String> = s
                    .points
                    .iter()
                    .map(|&(x, y)| format!("{},{}", fmt_coord(xs.project(x)), fmt_coord(ys.project(y_of(y)))))
                    .collect();
                writeln!(
                    w,
                    "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
                    pts.join(" ")
                )
                .unwrap();
            }
            // legend, top right
            for (i, s) in series.iter().enumerate() {
                let color = PALETTE[i % PALETTE.len()];
                let ly = MARGIN_T + 14.0 + i as f64 * 16.0;
                writeln!(
                    w,
                    "<line x1=\"{x1}\" y1=\"{y}\" x2=\"{x2}\" y2=\"{y}\" stroke=\"{color}\" stroke-width=\"2\"/>",
                    x1 = fmt_coord(WIDTH - MARGIN_R - 150.0),
                    x2 = fmt_coord(WIDTH - MARGIN_R - 128.0),
                    y = fmt_coord(ly),
                )
                .unwrap();
                writeln!(
                    w,
                    "<text x=\"{x}\" y=\"{y}\" font-size=\"12\" fill=\"#222222\">{label}</text>",
                    x = fmt_coord(WIDTH - MARGIN_R - 122.0),
                    y = fmt_coord(ly + 4.0),
                    label = esc(&s.label),
                )
                .unwrap();
            }
        }
        Plot::Trajectory(points) => {
            let coords: Vec<(f64, f64)> = points
                .iter()
                .map(|p| (xs.project(p.x), ys.project(y_of(p.y))))
                .collect();
            let mut d = String::new();
            for (i, &(px, py)) in coords.iter().enumerate() {
                let cmd = if i == 0 { 'M' } else { 'L' };
                write!(d, "{}{} {} ", cmd, fmt_coord(px), fmt_coord(py)).unwrap();
            }
            writeln!(
                w,
                "<path d=\"{}\" fill=\"none\" stroke=\"#4e79a7\" stroke-width=\"1.5\"/>",
                d.trim_end()
            )
            .unwrap();
            for &(px, py) in &coords {
                writeln!(
                    w,
                    "<circle cx=\"{}\" cy=\"{}\" r=\"3.5\" fill=\"#e15759\"/>",
                    fmt_coord(px),
                    fmt_coord(py)
                )
                .unwrap();
            }
            let first = points.first().unwrap();
            let last = points.last().unwrap();
            for (p, (px, py)) in [(first, coords[0]), (last, *coords.last().unwrap())] {
                writeln!(
                    w,
                    "<text x=\"{x}\" y=\"{y}\" font-size=\"11\" fill=\"#222222\">epoch {e}</text>",
                    x = fmt_coord(px + 6.0),
                    y = fmt_coord(py - 6.0),
                    e = p.epoch,
                )
                .unwrap();
            }
        }
    }

    writeln!(w, "</svg>").unwrap();
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lines(n: usize) -> Plot {
        let series = (0..n)
            .map(|i| Series {
                label: format!("pair {i}"),
                points: (0..6).map(|x| (x as f64, (x * (i + 1)) as f64 + 0.5)).collect(),
            })
            .collect();
        Plot::Lines(series)
    }

    fn opts() -> PlotOptions {
        PlotOptions {
            title: "TE over windows".into(),
            x_label: "window".into(),
            y_label: "TE (bits)".into(),
            log_y: false,
        }
    }

    /// Minimal well-formedness scan for the SVG subset rendered here: tags
    /// nest, attributes stay quoted, ampersands are entities.
    fn assert_well_formed(svg: &str) {
        let mut stack: Vec<&str> = Vec::new();
        let mut rest = svg;
        while let Some(open) = rest.find('<') {
            let text = &rest[..open];
            assert!(!text.contains('>'), "stray '>' in text: {text:?}");
            for (i, _) in text.match_indices('&') {
                let tail = &text[i..];
                assert!(
                    ["&amp;", "&lt;", "&gt;", "&quot;", "&apos;"].iter().any(|e| tail.starts_with(e)),
                    "raw ampersand in {text:?}"
                );
            }
            let close = rest[open..].find('>').expect("unclosed tag") + open;
            let tag = &rest[open + 1..close];
            assert_eq!(tag.matches('"').count() % 2, 0, "unbalanced quotes: {tag}");
            if let Some(name) = tag.strip_prefix('/') {
                let top = stack.pop().expect("close without open");
                assert_eq!(top, name.trim(), "mismatched close tag");
            } else if !tag.ends_with('/') {
                stack.push(tag.split_whitespace().next().unwrap());
            }
            rest = &rest[close + 1..];
        }
        assert!(stack.is_empty(), "unclosed tags: {stack:?}");
    }

    #[test]
    fn one_polyline_per_series() {
        let svg = render_svg(&lines(3), &opts()).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert!(svg.contains("pair 0"));
        assert!(svg.contains("pair 2"));
        assert!(svg.contains("TE over windows"));
        assert!(svg.contains("TE (bits)"));
        assert_well_formed(&svg);
    }

    #[test]
    fn output_is_deterministic() {
        let a = render_svg(&lines(2), &opts()).unwrap();
        let b = render_svg(&lines(2), &opts()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn labels_are_escaped() {
        let plot = Plot::Lines(vec![Series {
            label: "a<b> & \"c\"".into(),
            points: vec![(0.0, 1.0), (1.0, 2.0)],
        }]);
        let svg = render_svg(&plot, &opts()).unwrap();
        assert!(!svg.contains("a<b>"));
        assert!(svg.contains("a&lt;b&gt; &amp; &quot;c&quot;"));
        assert_well_formed(&svg);
    }

    #[test]
    fn log_axis_rejects_non_positive_values() {
        let plot = Plot::Lines(vec![Series {
            label: "with zero".into(),
            points: vec![(0.0, 1.0), (1.0, 0.0), (2.0, 3.0)],
        }]);
        let mut o = opts();
        o.log_y = true;
        let err = render_svg(&plot, &o).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("with zero") && msg.contains("log"), "{msg}");
        assert!(matches!(err, Error::LogAxisNonPositive { index: 1, .. }));
    }

    #[test]
    fn log_axis_changes_the_mapping() {
        let plot = Plot::Lines(vec![Series {
            label: "s".into(),
            points: vec![(0.0, 0.001), (1.0, 0.1), (2.0, 10.0)],
        }]);
        let linear = render_svg(&plot, &opts()).unwrap();
        let mut o = opts();
        o.log_y = true;
        let log = render_svg(&plot, &o).unwrap();
        assert_ne!(linear, log);
        assert_well_formed(&log);
    }

    #[test]
    fn trajectory_renders_markers_and_endpoints() {
        let points: Vec<TrajectoryPoint> = (0..5)
            .map(|e| TrajectoryPoint {
                epoch: e * 10,
                x: e as f64 * 0.1 + 0.2,
                y: 1.0 - e as f64 * 0.15,
            })
            .collect();
        let svg = render_svg(&Plot::Trajectory(points), &opts()).unwrap();
        assert_eq!(svg.matches("<circle").count(), 5);
        assert_eq!(svg.matches("<path").count(), 1);
        assert_eq!(svg.matches("<polyline").count(), 0);
        assert!(svg.contains("epoch 0"));
        assert!(svg.contains("epoch 40"));
        assert_well_formed(&svg);
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        assert!(matches!(
            render_svg(&Plot::Lines(vec![]), &opts()),
            Err(Error::NothingToPlot(_))
        ));
        let single = Plot::Lines(vec![Series {
            label: "s".into(),
            points: vec![(0.0, 1.0)],
        }]);
        assert!(matches!(render_svg(&single, &opts()), Err(Error::NothingToPlot(_))));
        let nan = Plot::Lines(vec![Series {
            label: "s".into(),
            points: vec![(0.0, f64::NAN), (1.0, 2.0)],
        }]);
        assert!(render_svg(&nan, &opts()).is_err());
    }

    #[test]
    fn constant_series_still_renders() {
        let plot = Plot::Lines(vec![Series {
            label: "flat".into(),
            points: vec![(0.0, 2.0), (1.0, 2.0), (2.0, 2.0)],
        }]);
        let svg = render_svg(&plot, &opts()).unwrap();
        assert_well_formed(&svg);
    }
}
