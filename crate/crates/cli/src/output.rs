//! CSV, JSON and SVG artifacts. Every file carries the full configuration
//! and a SHA-256 of its payload; nothing time-dependent is written, so
//! repeated runs give byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Where and under which provenance artifacts are written.
pub struct Sink {
    dir: PathBuf,
    command: String,
    args: Value,
    config: Config,
}

impl Sink {
    pub fn new(config: &Config, command: &str, args: Value) -> Result<Self, CliError> {
        std::fs::create_dir_all(&config.output_dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", config.output_dir.display())))?;
        Ok(Sink {
            dir: config.output_dir.clone(),
            command: command.into(),
            args,
            config: config.clone(),
        })
    }

    fn meta(&self, hash: &str) -> Value {
        json!({
            "command": self.command,
            "args": self.args,
            "config": self.config,
            "sha256": hash,
        })
    }

    fn write(&self, name: &str, text: &str) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }

    /// CSV with a single `#`-prefixed JSON metadata line; the hash covers
    /// everything after that line.
    pub fn csv(&self, name: &str, columns: &[&str], rows: &[Vec<f64>]) -> Result<PathBuf, CliError> {
        let mut body = columns.join(",");
        body.push('\n');
        for r in rows {
            let line: Vec<String> = r.iter().map(|v| format!("{v:e}")).collect();
            body.push_str(&line.join(","));
            body.push('\n');
        }
        let head = format!("# {}\n", self.meta(&sha256_hex(body.as_bytes())));
        self.write(name, &(head + &body))
    }

    /// `{"meta": …, "data": …}`; the hash covers the compact `data` text.
    pub fn json<T: Serialize>(&self, name: &str, data: &T) -> Result<PathBuf, CliError> {
        let data = serde_json::to_value(data).map_err(|e| CliError::Io(e.to_string()))?;
        let hash = sha256_hex(data.to_string().as_bytes());
        let doc = json!({ "meta": self.meta(&hash), "data": data });
        let text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
        self.write(name, &(text + "\n"))
    }

    pub fn svg(&self, name: &str, plot: &LinePlot) -> Result<PathBuf, CliError> {
        let body = plot.render();
        let meta = self.meta(&sha256_hex(body.as_bytes())).to_string();
        let meta = meta.replace("--", "- -");
        self.write(name, &format!("<!-- {meta} -->\n{body}"))
    }
}

/// Single-series line plot with linear axes.
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
}

impl LinePlot {
    pub fn render(&self) -> String {
        const W: f64 = 640.0;
        const H: f64 = 400.0;
        const M: f64 = 60.0;
        let finite: Vec<(f64, f64)> = self.points.iter().copied().filter(|(x, y)| x.is_finite() && y.is_finite()).collect();
        let range = |f: &dyn Fn(&(f64, f64)) -> f64| {
            let lo = finite.iter().map(f).fold(f64::INFINITY, f64::min);
            let hi = finite.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo <= f64::EPSILON * lo.abs().max(1.0) {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        };
        let (x0, x1) = range(&|p| p.0);
        let (y0, y1) = range(&|p| p.1);
        let px = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
        let py = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);
        let esc = |s: &str| s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");
        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, esc(&self.title));
        let _ = writeln!(
            s,
            r#"<path d="M{M},{} L{M},{} L{},{}" fill="none" stroke="black"/>"#,
            M,
            H - M,
            W - M,
            H - M
        );
        for k in 0..=4 {
            let t = k as f64 / 4.0;
            let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
            let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{:.3}</text>"#, px(xv), H - M + 18.0, xv);
            let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{:.4}</text>"#, M - 6.0, py(yv) + 4.0, yv);
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 16.0, esc(&self.x_label));
        let _ = writeln!(
            s,
            r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            H / 2.0,
            H / 2.0,
            esc(&self.y_label)
        );
        if !finite.is_empty() {
            let d: Vec<String> = finite
                .iter()
                .enumerate()
                .map(|(i, &(x, y))| format!("{}{:.2},{:.2}", if i == 0 { "M" } else { "L" }, px(x), py(y)))
                .collect();
            let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#, d.join(" "));
            for &(x, y) in &finite {
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#, px(x), py(y));
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

pub fn display(path: &Path) -> String {
    path.display().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn plot_renders_all_points() {
        let p = LinePlot {
            title: "a < b".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            points: vec![(0.0, 1.0), (1.0, 2.0), (2.0, f64::NAN)],
        };
        let s = p.render();
        assert!(s.starts_with("<svg"));
        assert_eq!(s.matches("<circle").count(), 2);
        assert!(s.contains("a &lt; b"));
    }
}
