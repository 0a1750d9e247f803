//! Standalone SVG line charts for training logs and sweep tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::CliError;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn malformed(msg: impl Into<String>) -> CliError {
    CliError::Runtime(format!("malformed CSV: {}", msg.into()))
}

fn parse_f64(s: &str, what: &str) -> Result<f64, CliError> {
    s.trim()
        .parse()
        .map_err(|_| malformed(format!("cannot parse {what} '{s}'")))
}

/// Build a chart from CSV text: a training log becomes raw reward and
/// ma100 curves, a sweep table becomes one evaluation curve per setting of
/// the non-leading axes.
pub fn chart_from_csv(text: &str) -> Result<Chart, CliError> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| malformed(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let records: Vec<csv::StringRecord> = reader
        .records()
        .collect::<Result<_, _>>()
        .map_err(|e| malformed(e.to_string()))?;
    if records.is_empty() {
        return Err(malformed("no data rows"));
    }
    if headers.join(",") == ddqn_core::harness::LOG_HEADER {
        log_chart(&records)
    } else if headers.len() > 5 && headers[headers.len() - 5..] == SWEEP_TAIL {
        sweep_chart(&headers, &records)
    } else {
        Err(malformed(format!(
            "unrecognized header '{}'",
            headers.join(",")
        )))
    }
}

const SWEEP_TAIL: [&str; 5] = ["seed", "final_ma100", "eval_mean", "eval_std", "status"];

fn log_chart(records: &[csv::StringRecord]) -> Result<Chart, CliError> {
    let mut raw = Vec::with_capacity(records.len());
    let mut ma100 = Vec::with_capacity(records.len());
    for r in records {
        if r.len() != 6 {
            return Err(malformed(format!("expected 6 fields, got {}", r.len())));
        }
        let episode = parse_f64(&r[0], "episode")?;
        raw.push((episode, parse_f64(&r[2], "reward")?));
        ma100.push((episode, parse_f64(&r[5], "ma100")?));
    }
    Ok(Chart {
        title: "Episode reward".into(),
        x_label: "episode".into(),
        y_label: "reward".into(),
        series: vec![
            Series {
                label: "reward".into(),
                points: raw,
            },
            Series {
                label: "ma100".into(),
                points: ma100,
            },
        ],
    })
}

fn sweep_chart(headers: &[String], records: &[csv::StringRecord]) -> Result<Chart, CliError> {
    let n_axes = headers.len() - 5;
    let eval_col = headers.len() - 3;
    // group key (other axis values) -> x label -> rewards across seeds
    let mut groups: BTreeMap<String, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    let mut x_order: Vec<String> = Vec::new();
    for r in records {
        if r.len() != headers.len() {
            return Err(malformed(format!(
                "expected {} fields, got {}",
                headers.len(),
                r.len()
            )));
        }
        let x = r[0].to_string();
        if !x_order.contains(&x) {
            x_order.push(x.clone());
        }
        let key = (1..n_axes)
            .map(|i| format!("{}={}", headers[i], &r[i]))
            .collect::<Vec<_>>()
            .join(" ");
        let y = parse_f64(&r[eval_col], "eval_mean")?;
        if y.is_finite() {
            groups.entry(key).or_default().entry(x).or_default().push(y);
        }
    }
    // Numeric axes plot at their value, others (e.g. 128x256) at their index.
    let numeric = x_order.iter().all(|x| x.parse::<f64>().is_ok());
    let x_pos = |x: &str| -> f64 {
        if numeric {
            x.parse().unwrap_or(0.0)
        } else {
            x_order.iter().position(|o| o == x).unwrap_or(0) as f64
        }
    };
    let mut series = Vec::new();
    for (key, by_x) in groups {
        let mut points: Vec<(f64, f64)> = by_x
            .iter()
            .map(|(x, ys)| (x_pos(x), ys.iter().sum::<f64>() / ys.len() as f64))
            .collect();
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let label = if key.is_empty() {
            "eval_mean".to_string()
        } else {
            key
        };
        series.push(Series { label, points });
    }
    if series.is_empty() {
        return Err(malformed("no finite evaluation results"));
    }
    Ok(Chart {
        title: format!("Sweep over {}", headers[0]),
        x_label: headers[0].clone(),
        y_label: "eval_mean".into(),
        series,
    })
}

fn bounds(chart: &Chart) -> (f64, f64, f64, f64) {
    let pts = chart.series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 <= x0 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    if y1 <= y0 {
        y0 -= 1.0;
        y1 += 1.0;
    }
    (x0, x1, y0, y1)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub fn render_svg(chart: &Chart) -> String {
    let (x0, x1, y0, y1) = bounds(chart);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="30" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
        WIDTH / 2.0,
        escape(&chart.title)
    );
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        svg,
        r#"<path d="M{left} {top} L{left} {bottom} L{right} {bottom}" stroke="black" fill="none"/>"#
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let yv = y0 + f * (y1 - y0);
        let xv = x0 + f * (x1 - x0);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="11">{:.1}</text>"#,
            left - 6.0,
            sy(yv) + 4.0,
            yv
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="11">{:.1}</text>"#,
            sx(xv),
            bottom + 18.0,
            xv
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0,
        escape(&chart.x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 15 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(&chart.y_label)
    );
    for (i, s) in chart.series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let points: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        let ly = top + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#,
            right - 150.0,
            ly,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}
