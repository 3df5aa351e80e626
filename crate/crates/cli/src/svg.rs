//! Minimal SVG charts. Every figure is a pure function of a [`Report`].

use std::fmt::Write;

use crate::report::Report;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mark {
    Line,
    Points,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub color: &'static str,
    pub mark: Mark,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: &str, color: &'static str, mark: Mark, points: Vec<(f64, f64)>) -> Self {
        Series {
            name: name.to_string(),
            color,
            mark,
            points: points
                .into_iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .collect(),
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 {
        "0".into()
    } else if (1e-2..1e4).contains(&a) {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

#[derive(Debug, Clone, Copy)]
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn fit(points: impl Iterator<Item = (f64, f64)>) -> Frame {
        let (mut x0, mut x1, mut y0, mut y1) =
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for (x, y) in points {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            return Frame {
                x: (0.0, 1.0),
                y: (0.0, 1.0),
            };
        }
        let widen = |lo: f64, hi: f64| {
            if hi > lo {
                let pad = 0.05 * (hi - lo);
                (lo - pad, hi + pad)
            } else {
                let pad = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
                (lo - pad, hi + pad)
            }
        };
        Frame {
            x: widen(x0, x1),
            y: widen(y0, y1),
        }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn open(out: &mut String, title: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = write!(
        out,
        r#"<rect width="100%" height="100%" fill="white"/><text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (HEIGHT - BOTTOM, TOP);
    let _ = write!(
        out,
        r#"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y0 - y1
    );
    for k in 0..=4 {
        let s = k as f64 / 4.0;
        let xv = f.x.0 + s * (f.x.1 - f.x.0);
        let yv = f.y.0 + s * (f.y.1 - f.y.0);
        let (px, py) = (f.px(xv), f.py(yv));
        let _ = write!(
            out,
            r#"<line x1="{px:.2}" y1="{y0}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y0 + 4.0,
            y0 + 16.0,
            tick_label(xv)
        );
        let _ = write!(
            out,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{x0}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 4.0,
            x0 - 6.0,
            py + 4.0,
            tick_label(yv)
        );
    }
    let _ = write!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = write!(
        out,
        r#"<text transform="translate(16 {:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

/// Line and scatter series on shared axes, with a legend.
pub fn chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let frame = Frame::fit(series.iter().flat_map(|s| s.points.iter().copied()));
    let mut out = String::new();
    open(&mut out, title);
    axes(&mut out, &frame, x_label, y_label);
    for (k, s) in series.iter().enumerate() {
        match s.mark {
            Mark::Line => {
                let path: Vec<String> = s
                    .points
                    .iter()
                    .map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
                    .collect();
                let _ = write!(
                    out,
                    r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
                    s.color,
                    path.join(" ")
                );
            }
            Mark::Points => {
                for &(x, y) in &s.points {
                    let _ = write!(
                        out,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{}"/>"#,
                        frame.px(x),
                        frame.py(y),
                        s.color
                    );
                }
            }
        }
        let ly = TOP + 14.0 + 14.0 * k as f64;
        let _ = write!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="10" height="10" fill="{}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            WIDTH - RIGHT - 150.0,
            ly - 9.0,
            s.color,
            WIDTH - RIGHT - 135.0,
            ly,
            escape(&s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn ramp(s: f64) -> String {
    // dark blue to yellow
    let stops = [(68.0, 1.0, 84.0), (59.0, 82.0, 139.0), (33.0, 145.0, 140.0), (94.0, 201.0, 98.0), (253.0, 231.0, 37.0)];
    let s = s.clamp(0.0, 1.0) * (stops.len() - 1) as f64;
    let k = (s.floor() as usize).min(stops.len() - 2);
    let w = s - k as f64;
    let mix = |a: f64, b: f64| (a + w * (b - a)).round() as u8;
    let (a, b) = (stops[k], stops[k + 1]);
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// Cell map of `values[i][j]` at `(xs[i], ys[j])`; `None` cells are grey and
/// cells with `mask` false are faded.
pub fn heatmap(
    title: &str,
    x_label: &str,
    y_label: &str,
    xs: &[f64],
    ys: &[f64],
    values: &[Vec<Option<f64>>],
    mask: &[Vec<bool>],
    marker: Option<(f64, f64)>,
) -> String {
    let step = |v: &[f64]| if v.len() > 1 { v[1] - v[0] } else { 1.0 };
    let (dx, dy) = (step(xs), step(ys));
    let frame = Frame {
        x: (xs.first().copied().unwrap_or(0.0) - dx / 2.0, xs.last().copied().unwrap_or(1.0) + dx / 2.0),
        y: (ys.first().copied().unwrap_or(0.0) - dy / 2.0, ys.last().copied().unwrap_or(1.0) + dy / 2.0),
    };
    let finite = values.iter().flatten().flatten().copied().filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let mut out = String::new();
    open(&mut out, title);
    for (i, &x) in xs.iter().enumerate() {
        for (j, &y) in ys.iter().enumerate() {
            let fill = match values[i][j] {
                Some(v) if v.is_finite() && hi > lo => ramp((v - lo) / (hi - lo)),
                Some(v) if v.is_finite() => ramp(0.0),
                _ => "#cccccc".to_string(),
            };
            let opacity = if mask[i][j] { 1.0 } else { 0.35 };
            let (x0, y0) = (frame.px(x - dx / 2.0), frame.py(y + dy / 2.0));
            let _ = write!(
                out,
                r#"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="{fill}" fill-opacity="{opacity}"/>"#,
                frame.px(x + dx / 2.0) - x0,
                frame.py(y - dy / 2.0) - y0
            );
        }
    }
    axes(&mut out, &frame, x_label, y_label);
    if let Some((x, y)) = marker {
        let _ = write!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="5" fill="none" stroke="red" stroke-width="2"/>"#,
            frame.px(x),
            frame.py(y)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Bars over consecutive `edges`.
pub fn bars(title: &str, x_label: &str, edges: &[f64], counts: &[u64]) -> String {
    let top = counts.iter().copied().max().unwrap_or(1).max(1) as f64;
    let frame = Frame {
        x: match (edges.first(), edges.last()) {
            (Some(&a), Some(&b)) if b > a => (a, b),
            _ => (0.0, 1.0),
        },
        y: (0.0, top * 1.05),
    };
    let mut out = String::new();
    open(&mut out, title);
    for (k, &c) in counts.iter().enumerate() {
        let (x0, x1) = (frame.px(edges[k]), frame.px(edges[k + 1]));
        let (y0, y1) = (frame.py(c as f64), frame.py(0.0));
        let _ = write!(
            out,
            r##"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="#4477aa" stroke="white"/>"##,
            x1 - x0,
            y1 - y0
        );
    }
    axes(&mut out, &frame, x_label, "count");
    out.push_str("</svg>\n");
    out
}

fn plane(report: &Report) -> String {
    let frame = Frame {
        x: (-0.15, 2.15),
        y: (-0.15, 2.15),
    };
    let lattice = &report.lattice;
    let mut out = String::new();
    open(&mut out, "Memfractance plane");
    let hit = report.classification.containing_triangle.as_ref().map(|h| h.name.as_str());
    for tri in &lattice.triangles {
        let pts: Vec<String> = tri
            .vertices
            .iter()
            .map(|&v| {
                let [x, y] = lattice.nodes[v].at;
                format!("{:.2},{:.2}", frame.px(x), frame.py(y))
            })
            .collect();
        let fill = if Some(tri.name.as_str()) == hit { "#ffe9a8" } else { "none" };
        let _ = write!(
            out,
            r##"<polygon points="{}" fill="{fill}" stroke="#888888"/>"##,
            pts.join(" ")
        );
    }
    for node in &lattice.nodes {
        let [x, y] = node.at;
        let (dx, anchor) = if x > 1.5 { (-5.0, "end") } else { (5.0, "start") };
        let _ = write!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="black"/><text x="{:.2}" y="{:.2}" text-anchor="{anchor}">{}</text>"#,
            frame.px(x),
            frame.py(y),
            frame.px(x) + dx,
            frame.py(y) - 5.0,
            escape(&node.label)
        );
    }
    axes(&mut out, &frame, "alpha1", "alpha2");
    let o = report.classification.orders;
    let _ = write!(
        out,
        r#"<circle cx="{:.2}" cy="{:.2}" r="5" fill="red"/>"#,
        frame.px(o.alpha1),
        frame.py(o.alpha2)
    );
    out.push_str("</svg>\n");
    out
}

/// All figures of a report, as `(file name, svg)` pairs.
pub fn render_all(report: &Report) -> Vec<(String, String)> {
    let rec = &report.reconstruction;
    let zip = |a: &[f64], b: &[f64]| a.iter().copied().zip(b.iter().copied()).collect::<Vec<_>>();
    let mut figures = vec![
        (
            "fit_voltage.svg".to_string(),
            chart(
                "Voltage: data and model",
                "t (s)",
                "v (V)",
                &[
                    Series::new("data", "#4477aa", Mark::Points, zip(&rec.time, &rec.voltage)),
                    Series::new("model", "#cc3311", Mark::Line, zip(&rec.time, &rec.voltage_model)),
                ],
            ),
        ),
        (
            "fit_current.svg".to_string(),
            chart(
                "Current: data and model",
                "t (s)",
                "i (A)",
                &[
                    Series::new("data", "#4477aa", Mark::Points, zip(&rec.time, &rec.current)),
                    Series::new("model", "#cc3311", Mark::Line, zip(&rec.time, &rec.current_model)),
                ],
            ),
        ),
        (
            "iv_loop.svg".to_string(),
            chart(
                "I-V loop",
                "v (V)",
                "i (A)",
                &[
                    Series::new("data", "#4477aa", Mark::Line, zip(&rec.voltage, &rec.current)),
                    Series::new("model", "#cc3311", Mark::Line, zip(&rec.voltage_model, &rec.current_model)),
                ],
            ),
        ),
    ];
    let locus = |loci: &[memfract::memfract::ZeroLocus]| {
        loci.iter()
            .flat_map(|l| l.zeros.iter().map(move |&z| (l.parameter, z)))
            .collect::<Vec<_>>()
    };
    figures.push((
        "zero_locus.svg".to_string(),
        chart(
            "Zeros of numerator and denominator",
            "order",
            "t* (s)",
            &[
                Series::new("denominator t*(alpha2)", "#4477aa", Mark::Points, locus(&report.search.denominator_loci)),
                Series::new("numerator t*(alpha1)", "#cc3311", Mark::Points, locus(&report.search.numerator_loci)),
            ],
        ),
    ));
    let map = &report.search.range_map;
    let log_range: Vec<Vec<Option<f64>>> = map
        .range
        .iter()
        .map(|row| {
            row.iter()
                .map(|r| r.filter(|v| *v > 0.0).map(f64::log10))
                .collect()
        })
        .collect();
    let o = report.optimum.orders;
    figures.push((
        "range_map.svg".to_string(),
        heatmap(
            "log10 range of the memfractance",
            "alpha1",
            "alpha2",
            &map.alpha1,
            &map.alpha2,
            &log_range,
            &map.admissible,
            Some((o.alpha1, o.alpha2)),
        ),
    ));
    figures.push((
        "memfractance.svg".to_string(),
        chart(
            &format!("Memfractance at orders ({}, {})", o.alpha1, o.alpha2),
            "t (s)",
            "F",
            &[Series::new(
                "F(t)",
                "#4477aa",
                Mark::Line,
                zip(&report.curve.t_grid, &report.curve.values),
            )],
        ),
    ));
    figures.push(("plane.svg".to_string(), plane(report)));
    if let Some(spikes) = &report.spikes.value {
        figures.push((
            "spike_intervals.svg".to_string(),
            bars(
                "Voltage interval between spikes",
                "|dv| (V)",
                &spikes.intervals.bin_edges,
                &spikes.intervals.counts,
            ),
        ));
    }
    figures
}
