//! Minimal standalone SVG log-log plots: data points, optional error bars
//! and an optional fitted line.

use std::fmt::Write;

pub struct Series<'a> {
    pub xs: &'a [f64],
    pub ys: &'a [f64],
    /// Symmetric error bars in data units.
    pub errors: Option<&'a [f64]>,
}

/// `y = exp(intercept) · x^slope`.
pub struct FitLine {
    pub slope: f64,
    pub intercept: f64,
}

const W: f64 = 640.0;
const H: f64 = 440.0;
const MARGIN: f64 = 64.0;

pub fn loglog(title: &str, x_label: &str, y_label: &str, data: &Series<'_>, fit: Option<&FitLine>) -> String {
    let pts: Vec<(f64, f64)> = data
        .xs
        .iter()
        .zip(data.ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.log10(), y.log10()))
        .collect();
    let (mut x0, mut x1) = bounds(pts.iter().map(|p| p.0));
    let (mut y0, mut y1) = bounds(pts.iter().map(|p| p.1));
    pad(&mut x0, &mut x1);
    pad(&mut y0, &mut y1);
    let sx = |lx: f64| MARGIN + (lx - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let sy = |ly: f64| H - MARGIN - (ly - y0) / (y1 - y0) * (H - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    );
    for k in (x0.ceil() as i32)..=(x1.floor() as i32) {
        let x = sx(k as f64);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/>"#, H - MARGIN, H - MARGIN + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">1e{k}</text>"#, H - MARGIN + 18.0);
    }
    for k in (y0.ceil() as i32)..=(y1.floor() as i32) {
        let y = sy(k as f64);
        let _ = writeln!(s, r#"<line x1="{}" y1="{y:.2}" x2="{MARGIN}" y2="{y:.2}" stroke="black"/>"#, MARGIN - 5.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">1e{k}</text>"#, MARGIN - 8.0, y + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 16.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    if let Some(errors) = data.errors {
        for ((x, y), e) in data.xs.iter().zip(data.ys).zip(errors) {
            let lo = y - e;
            if *x <= 0.0 || *y <= 0.0 {
                continue;
            }
            let top = sy((y + e).log10().min(y1));
            let bottom = if lo > 0.0 { sy(lo.log10().max(y0)) } else { sy(y0) };
            let px = sx(x.log10());
            let _ = writeln!(s, r#"<line x1="{px:.2}" y1="{top:.2}" x2="{px:.2}" y2="{bottom:.2}" stroke="gray"/>"#);
        }
    }
    for (lx, ly) in &pts {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="steelblue"/>"#, sx(*lx), sy(*ly));
    }
    if let Some(fit) = fit {
        let line = |lx: f64| (fit.intercept + fit.slope * lx * std::f64::consts::LN_10) / std::f64::consts::LN_10;
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="firebrick" stroke-dasharray="6 4"/>"#,
            sx(x0),
            sy(line(x0)),
            sx(x1),
            sy(line(x1))
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end" fill="firebrick">slope {:.4}</text>"#,
            W - MARGIN - 6.0,
            MARGIN + 16.0,
            fit.slope
        );
    }
    s.push_str("</svg>\n");
    s
}

fn bounds(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn pad(lo: &mut f64, hi: &mut f64) {
    if !lo.is_finite() || !hi.is_finite() {
        *lo = 0.0;
        *hi = 1.0;
    } else if *hi - *lo < 1e-9 {
        *lo -= 0.5;
        *hi += 0.5;
    } else {
        let m = 0.05 * (*hi - *lo);
        *lo -= m;
        *hi += m;
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
