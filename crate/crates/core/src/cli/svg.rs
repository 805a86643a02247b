//! Minimal SVG charts for pull counts and gossip decay.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(s: &mut String) {
    let _ = writeln!(
        s,
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>",
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
}

/// One bar per arm with a dashed line at the fair share.
pub fn bar_chart(title: &str, counts: &[u64], fair: f64) -> String {
    let mut s = header(title);
    axes(&mut s);
    let max = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let top = max.max(fair) * 1.1;
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let slot = plot_w / counts.len().max(1) as f64;
    for (i, &c) in counts.iter().enumerate() {
        let h = c as f64 / top * plot_h;
        let x = MARGIN + i as f64 * slot + slot * 0.15;
        let _ = writeln!(
            s,
            "<rect x=\"{x:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{h:.2}\" fill=\"steelblue\"/>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{i}</text>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"9\">{c}</text>",
            HEIGHT - MARGIN - h,
            slot * 0.7,
            x + slot * 0.35,
            HEIGHT - MARGIN + 15.0,
            x + slot * 0.35,
            HEIGHT - MARGIN - h - 3.0,
        );
    }
    let y = HEIGHT - MARGIN - fair / top * plot_h;
    let _ = writeln!(
        s,
        "<line x1=\"{MARGIN}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"firebrick\" stroke-dasharray=\"5,4\"/>\n\
         <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" fill=\"firebrick\">T/K</text>\n\
         <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">arm</text>",
        WIDTH - MARGIN,
        WIDTH - MARGIN,
        y - 4.0,
        WIDTH / 2.0,
        HEIGHT - 12.0
    );
    s.push_str("</svg>\n");
    s
}

/// Log-scale line chart of named series over a shared x axis. Non-positive values
/// are dropped from their series.
pub fn log_line_chart(title: &str, series: &[(&str, &str, Vec<f64>)]) -> String {
    let mut s = header(title);
    axes(&mut s);
    let positive = series
        .iter()
        .flat_map(|(_, _, v)| v.iter().copied())
        .filter(|v| *v > 0.0 && v.is_finite());
    let (lo, hi) = positive.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !lo.is_finite() {
        s.push_str("<text x=\"320\" y=\"200\" text-anchor=\"middle\">all values are zero</text>\n</svg>\n");
        return s;
    }
    let (llo, lhi) = (lo.log10().floor(), hi.log10().ceil().max(lo.log10().floor() + 1.0));
    let n = series.iter().map(|(_, _, v)| v.len()).max().unwrap_or(1).max(2);
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let px = |i: usize| MARGIN + i as f64 / (n - 1) as f64 * plot_w;
    let py = |v: f64| HEIGHT - MARGIN - (v.log10() - llo) / (lhi - llo) * plot_h;
    for (idx, (name, color, values)) in series.iter().enumerate() {
        let pts: Vec<String> = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v > 0.0 && v.is_finite())
            .map(|(i, &v)| format!("{:.2},{:.2}", px(i), py(v)))
            .collect();
        let _ = writeln!(
            s,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" fill=\"{color}\">{}</text>",
            pts.join(" "),
            WIDTH - MARGIN - 150.0,
            MARGIN + 15.0 * idx as f64,
            escape(name)
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">1e{llo}</text>\n\
         <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">1e{lhi}</text>\n\
         <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">iteration</text>",
        MARGIN - 4.0,
        HEIGHT - MARGIN,
        MARGIN - 4.0,
        MARGIN + 4.0,
        WIDTH / 2.0,
        HEIGHT - 12.0
    );
    s.push_str("</svg>\n");
    s
}
