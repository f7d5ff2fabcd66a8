use std::fmt::Write;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 220.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const TICKS: usize = 5;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PlotOptions {
    pub x: String,
    pub y: Vec<String>,
    /// Column whose distinct values split rows into separate curves.
    pub group: Option<String>,
    pub logy: bool,
}

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if v.abs() >= 1e4 || v.abs() < 1e-3 {
        return format!("{v:.2e}");
    }
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

/// Renders the chosen columns of a CSV as an SVG line plot. Returns the
/// document and notes about dropped rows.
///
/// Output depends only on the inputs. With `logy`, non-positive values are
/// dropped.
pub fn render_svg(csv_text: &str, opts: &PlotOptions) -> Result<(String, Vec<String>), String> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(csv_text.as_bytes());
    let headers = rdr.headers().map_err(|e| format!("cannot read CSV header: {e}"))?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err("CSV is empty".into());
    }
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| format!("column `{name}` not found (have: {})", headers.iter().collect::<Vec<_>>().join(",")))
    };
    let xi = col(&opts.x)?;
    let yi: Vec<usize> = opts.y.iter().map(|y| col(y)).collect::<Result<_, _>>()?;
    let gi = opts.group.as_deref().map(col).transpose()?;

    let records: Vec<csv::StringRecord> = rdr
        .records()
        .collect::<Result<_, _>>()
        .map_err(|e| format!("malformed CSV: {e}"))?;
    if records.is_empty() {
        return Err("CSV has no data rows".into());
    }
    let num = |rec: &csv::StringRecord, i: usize, line: usize| {
        rec.get(i)
            .and_then(|s| s.trim().parse::<f64>().ok())
            .ok_or_else(|| format!("row {line}: `{}` is not a number", rec.get(i).unwrap_or("")))
    };

    let mut groups: Vec<String> = Vec::new();
    if let Some(g) = gi {
        for r in &records {
            let v = r.get(g).unwrap_or("").to_string();
            if !groups.contains(&v) {
                groups.push(v);
            }
        }
    }
    let group_keys: Vec<Option<&String>> = if gi.is_some() { groups.iter().map(Some).collect() } else { vec![None] };

    let mut notes = Vec::new();
    let mut series = Vec::new();
    for (k, &y) in yi.iter().enumerate() {
        for key in &group_keys {
            let mut points = Vec::new();
            let mut dropped = 0usize;
            for (line, r) in records.iter().enumerate() {
                if let (Some(g), Some(key)) = (gi, key) {
                    if r.get(g) != Some(key.as_str()) {
                        continue;
                    }
                }
                let xv = num(r, xi, line + 2)?;
                let yv = num(r, y, line + 2)?;
                if !xv.is_finite() || !yv.is_finite() {
                    dropped += 1;
                    continue;
                }
                if opts.logy && yv <= 0.0 {
                    dropped += 1;
                    continue;
                }
                points.push((xv, if opts.logy { yv.log10() } else { yv }));
            }
            let label = match key {
                Some(key) => format!("{} ({}={key})", opts.y[k], opts.group.as_deref().unwrap_or("")),
                None => opts.y[k].clone(),
            };
            if dropped > 0 {
                let why = if opts.logy { "non-positive or non-finite" } else { "non-finite" };
                notes.push(format!("{label}: dropped {dropped} {why} row(s)"));
            }
            if !points.is_empty() {
                series.push(Series { label, points });
            }
        }
    }
    if series.is_empty() {
        return Err("no plottable points".into());
    }

    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let (x0, x1) = padded(x0, x1);
    let (y0, y1) = if opts.logy {
        padded(y0.floor(), y1.ceil())
    } else {
        padded(y0, y1)
    };
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );

    for k in 0..=TICKS {
        let x = x0 + (x1 - x0) * k as f64 / TICKS as f64;
        let px = sx(x);
        let _ = writeln!(
            s,
            r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/>"#,
            TOP + ph,
            TOP + ph + 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + ph + 18.0,
            tick_label(x)
        );
    }
    let y_ticks: Vec<f64> = if opts.logy {
        let (a, b) = (y0.round() as i64, y1.round() as i64);
        let stride = ((b - a) as usize / 8).max(1);
        (a..=b).step_by(stride).map(|e| e as f64).collect()
    } else {
        (0..=TICKS).map(|k| y0 + (y1 - y0) * k as f64 / TICKS as f64).collect()
    };
    for y in y_ticks {
        let py = sy(y);
        let label = if opts.logy { format!("1e{}", y as i64) } else { tick_label(y) };
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT:.2}" y2="{py:.2}" stroke="black"/>"#,
            LEFT - 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"#,
            LEFT - 8.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0,
        escape(&opts.x)
    );
    let y_name = if opts.y.len() == 1 { opts.y[0].clone() } else { "value".to_string() };
    let y_name = if opts.logy { format!("{y_name} (log scale)") } else { y_name };
    let _ = writeln!(
        s,
        r#"<text transform="translate(18 {:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
        TOP + ph / 2.0,
        escape(&y_name)
    );

    for (k, ser) in series.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = ser.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = TOP + 10.0 + 18.0 * k as f64;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{colour}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 26.0,
            ly + 4.0,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    Ok((s, notes))
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "d_km,r1,r2,m\n0,3,2,a\n10,1,0,a\n0,2,1,b\n10,0.5,0.25,b\n";

    fn opts(y: &[&str]) -> PlotOptions {
        PlotOptions {
            x: "d_km".into(),
            y: y.iter().map(|s| s.to_string()).collect(),
            group: None,
            logy: false,
        }
    }

    #[test]
    fn one_polyline_per_series() {
        let (svg, notes) = render_svg(CSV, &opts(&["r1", "r2"])).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(notes.is_empty());
        let mut g = opts(&["r1", "r2"]);
        g.group = Some("m".into());
        let (svg, _) = render_svg(CSV, &g).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 4);
        assert!(svg.contains("r2 (m=b)"));
    }

    #[test]
    fn deterministic() {
        let a = render_svg(CSV, &opts(&["r1"])).unwrap();
        let b = render_svg(CSV, &opts(&["r1"])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn log_scale_drops_zeros() {
        let mut o = opts(&["r2"]);
        o.logy = true;
        let (svg, notes) = render_svg(CSV, &o).unwrap();
        assert_eq!(notes.len(), 1);
        assert!(notes[0].contains("dropped 1"));
        assert!(svg.contains("1e0"));
    }

    #[test]
    fn errors() {
        assert!(render_svg("", &opts(&["r1"])).is_err());
        assert!(render_svg("d_km,r1\n", &opts(&["r1"])).is_err());
        assert!(render_svg(CSV, &opts(&["nope"])).unwrap_err().contains("nope"));
        assert!(render_svg("d_km,r1\n0,x\n", &opts(&["r1"])).is_err());
    }

    #[test]
    fn tick_labels() {
        assert_eq!(tick_label(0.0), "0");
        assert_eq!(tick_label(12.0), "12");
        assert_eq!(tick_label(0.125), "0.125");
        assert_eq!(tick_label(123456.0), "1.23e5");
    }
}
