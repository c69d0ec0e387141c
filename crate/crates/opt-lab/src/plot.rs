//! Self-contained SVG line charts: polylines, an optional stderr band, and
//! log-scaled axes. No plotting dependency, byte-deterministic output.

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

#[derive(Clone, Debug, Default)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Optional `(x, lo, hi)` band drawn behind the line.
    pub band: Vec<(f64, f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct ChartSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub annotation: Option<String>,
}

fn tf(v: f64) -> String {
    format!("{v:.2}")
}

struct Scale {
    min: f64,
    max: f64,
    log: bool,
    lo_px: f64,
    hi_px: f64,
}

impl Scale {
    fn map(&self, v: f64) -> f64 {
        let (v, min, max) = if self.log {
            (v.max(1e-300).log10(), self.min, self.max)
        } else {
            (v, self.min, self.max)
        };
        let t = if max > min { (v - min) / (max - min) } else { 0.5 };
        self.lo_px + t * (self.hi_px - self.lo_px)
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        let n = 5;
        (0..=n)
            .map(|i| {
                let v = self.min + (self.max - self.min) * i as f64 / n as f64;
                if self.log {
                    (v, format!("1e{v:.1}"))
                } else {
                    (v, format!("{v:.3}"))
                }
            })
            .collect()
    }

    fn map_axis(&self, axis_value: f64) -> f64 {
        let t = if self.max > self.min {
            (axis_value - self.min) / (self.max - self.min)
        } else {
            0.5
        };
        self.lo_px + t * (self.hi_px - self.lo_px)
    }
}

fn data_range(series: &[Series], log: bool, pick_x: bool) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut feed = |v: f64| {
        if !v.is_finite() {
            return;
        }
        let v = if log {
            if v <= 0.0 {
                return;
            }
            v.log10()
        } else {
            v
        };
        lo = lo.min(v);
        hi = hi.max(v);
    };
    for s in series {
        for &(x, y) in &s.points {
            feed(if pick_x { x } else { y });
        }
        for &(x, l, h) in &s.band {
            if pick_x {
                feed(x);
            } else {
                feed(l);
                feed(h);
            }
        }
    }
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.03 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

/// Render the chart; the result is a complete standalone SVG document.
pub fn line_chart(spec: &ChartSpec, series: &[Series]) -> String {
    let (x_min, x_max) = data_range(series, spec.log_x, true);
    let (y_min, y_max) = data_range(series, spec.log_y, false);
    let xs = Scale {
        min: x_min,
        max: x_max,
        log: spec.log_x,
        lo_px: MARGIN_L,
        hi_px: WIDTH - MARGIN_R,
    };
    let ys = Scale {
        min: y_min,
        max: y_max,
        log: spec.log_y,
        lo_px: HEIGHT - MARGIN_B,
        hi_px: MARGIN_T,
    };

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"monospace\" font-size=\"12\">\n"
    ));
    out.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        WIDTH / 2.0,
        xml_escape(&spec.title)
    ));

    // axes
    out.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        tf(MARGIN_L),
        tf(HEIGHT - MARGIN_B),
        tf(WIDTH - MARGIN_R),
        tf(HEIGHT - MARGIN_B)
    ));
    out.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        tf(MARGIN_L),
        tf(MARGIN_T),
        tf(MARGIN_L),
        tf(HEIGHT - MARGIN_B)
    ));
    for (v, label) in xs.ticks() {
        let px = xs.map_axis(v);
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            tf(px),
            tf(HEIGHT - MARGIN_B),
            tf(px),
            tf(HEIGHT - MARGIN_B + 5.0),
            tf(px),
            tf(HEIGHT - MARGIN_B + 20.0),
            label
        ));
    }
    for (v, label) in ys.ticks() {
        let py = ys.map_axis(v);
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            tf(MARGIN_L - 5.0),
            tf(py),
            tf(MARGIN_L),
            tf(py),
            tf(MARGIN_L - 8.0),
            tf(py + 4.0),
            label
        ));
    }
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        HEIGHT - 10.0,
        xml_escape(&spec.x_label)
    ));
    out.push_str(&format!(
        "<text x=\"15\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 15 {})\">{}</text>\n",
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        xml_escape(&spec.y_label)
    ));

    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        if !s.band.is_empty() {
            let mut pts: Vec<String> = s
                .band
                .iter()
                .map(|&(x, lo, _)| format!("{},{}", tf(xs.map(x)), tf(ys.map(lo))))
                .collect();
            for &(x, _, hi) in s.band.iter().rev() {
                pts.push(format!("{},{}", tf(xs.map(x)), tf(ys.map(hi))));
            }
            out.push_str(&format!(
                "<polygon points=\"{}\" fill=\"{}\" opacity=\"0.2\" stroke=\"none\"/>\n",
                pts.join(" "),
                color
            ));
        }
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| {
                x.is_finite() && y.is_finite() && (!spec.log_y || *y > 0.0) && (!spec.log_x || *x > 0.0)
            })
            .map(|&(x, y)| format!("{},{}", tf(xs.map(x)), tf(ys.map(y))))
            .collect();
        out.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
            pts.join(" "),
            color
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" fill=\"{}\">{}</text>\n",
            tf(WIDTH - MARGIN_R - 180.0),
            tf(MARGIN_T + 16.0 * (i as f64 + 1.0)),
            color,
            xml_escape(&s.label)
        ));
    }
    if let Some(note) = &spec.annotation {
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"start\">{}</text>\n",
            tf(MARGIN_L + 10.0),
            tf(MARGIN_T + 5.0),
            xml_escape(note)
        ));
    }
    out.push_str("</svg>\n");
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
