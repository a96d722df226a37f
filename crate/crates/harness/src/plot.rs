//! Static SVG rendering of the benchmark summaries: failure rate against
//! dataset size, one line per loss, shaded 90% confidence bands.
//!
//! Coordinate conventions (also embedded as `data-` attributes on the root
//! element so tests can invert them):
//!
//! - x is log10 of the episode count, mapped affinely onto the plot width;
//! - y is the failure rate mapped as `y = py + rate * ph`, i.e. the y axis is
//!   inverted relative to screen convention: rate 0 renders at the top.
//!
//! Every series group carries its numeric values in machine-readable
//! attributes (`data-n`, `data-mean`, `data-lo`, `data-hi`).

use crate::experiment::HarnessError;
use crate::summary::CiSummary;
use std::fmt::Write as _;
use std::io;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 55.0;

fn color_for(loss: &str) -> &'static str {
    match loss {
        "sq" => "#d62728",
        "log" => "#1f77b4",
        "cat" => "#2ca02c",
        _ => "#7f7f7f",
    }
}

struct Axes {
    x0: f64,
    x1: f64,
    px: f64,
    pw: f64,
    py: f64,
    ph: f64,
}

impl Axes {
    fn x(&self, n: usize) -> f64 {
        let v = (n as f64).log10();
        if self.x1 == self.x0 {
            self.px + self.pw / 2.0
        } else {
            self.px + (v - self.x0) / (self.x1 - self.x0) * self.pw
        }
    }

    fn y(&self, rate: f64) -> f64 {
        self.py + rate * self.ph
    }
}

/// Renders the summaries to an SVG string. Errors on empty input.
pub fn render_plot(summaries: &[CiSummary]) -> Result<String, HarnessError> {
    if summaries.is_empty() {
        return Err(HarnessError::EmptyPlot);
    }
    let mut losses: Vec<&str> = Vec::new();
    for s in summaries {
        if !losses.contains(&s.loss.as_str()) {
            losses.push(&s.loss);
        }
    }
    let mut sizes: Vec<usize> = summaries.iter().map(|s| s.n_episodes).collect();
    sizes.sort_unstable();
    sizes.dedup();

    let axes = Axes {
        x0: (*sizes.first().unwrap() as f64).log10(),
        x1: (*sizes.last().unwrap() as f64).log10(),
        px: MARGIN_LEFT,
        pw: WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
        py: MARGIN_TOP,
        ph: HEIGHT - MARGIN_TOP - MARGIN_BOTTOM,
    };

    let mut svg = String::new();
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" data-x0="{}" data-x1="{}" data-px="{}" data-pw="{}" data-py="{}" data-ph="{}">"#,
        axes.x0, axes.x1, axes.px, axes.pw, axes.py, axes.ph
    );
    svg.push('\n');
    let _ = write!(
        svg,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    svg.push('\n');

    // Axes and ticks.
    let bottom = axes.y(1.0);
    let _ = write!(
        svg,
        r#"<g class="axes" stroke="black" fill="none"><line x1="{px}" y1="{py}" x2="{px}" y2="{b}"/><line x1="{px}" y1="{b}" x2="{pr}" y2="{b}"/></g>"#,
        px = axes.px,
        py = axes.py,
        b = bottom,
        pr = axes.px + axes.pw
    );
    svg.push('\n');
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let y = axes.y(tick);
        let _ = write!(
            svg,
            r##"<line x1="{x0}" y1="{y}" x2="{x1}" y2="{y}" stroke="#dddddd"/><text x="{xt}" y="{yt}" font-size="12" text-anchor="end">{tick}</text>"##,
            x0 = axes.px,
            x1 = axes.px + axes.pw,
            xt = axes.px - 8.0,
            yt = y + 4.0
        );
        svg.push('\n');
    }
    for n in &sizes {
        let x = axes.x(*n);
        let _ = write!(
            svg,
            r#"<line x1="{x}" y1="{b}" x2="{x}" y2="{b2}" stroke="black"/><text x="{x}" y="{yt}" font-size="12" text-anchor="middle">{n}</text>"#,
            b = bottom,
            b2 = bottom + 5.0,
            yt = bottom + 20.0
        );
        svg.push('\n');
    }
    let _ = write!(
        svg,
        r#"<text x="{xc}" y="{yl}" font-size="13" text-anchor="middle">episodes in dataset</text><text x="18" y="{ym}" font-size="13" text-anchor="middle" transform="rotate(-90 18 {ym})">failure rate (0 at top)</text>"#,
        xc = axes.px + axes.pw / 2.0,
        yl = HEIGHT - 12.0,
        ym = axes.py + axes.ph / 2.0
    );
    svg.push('\n');

    // One band polygon + mean polyline + markers per loss.
    for loss in &losses {
        let cells: Vec<&CiSummary> = sizes
            .iter()
            .filter_map(|n| {
                summaries
                    .iter()
                    .find(|s| s.loss == *loss && s.n_episodes == *n)
            })
            .collect();
        if cells.is_empty() {
            continue;
        }
        let color = color_for(loss);
        let join = |f: &dyn Fn(&CiSummary) -> String, sep: &str| {
            cells.iter().map(|c| f(c)).collect::<Vec<_>>().join(sep)
        };
        let band: String = cells
            .iter()
            .map(|c| format!("{},{}", axes.x(c.n_episodes), axes.y(c.lo90)))
            .chain(
                cells
                    .iter()
                    .rev()
                    .map(|c| format!("{},{}", axes.x(c.n_episodes), axes.y(c.hi90))),
            )
            .collect::<Vec<_>>()
            .join(" ");
        let line = join(
            &|c| format!("{},{}", axes.x(c.n_episodes), axes.y(c.mean_failure)),
            " ",
        );
        let _ = write!(
            svg,
            r#"<g class="series" data-loss="{loss}" data-n="{ns}" data-mean="{means}" data-lo="{los}" data-hi="{his}">"#,
            ns = join(&|c| c.n_episodes.to_string(), ","),
            means = join(&|c| c.mean_failure.to_string(), ","),
            los = join(&|c| c.lo90.to_string(), ","),
            his = join(&|c| c.hi90.to_string(), ","),
        );
        svg.push('\n');
        let _ = write!(
            svg,
            r#"<polygon class="band" points="{band}" fill="{color}" fill-opacity="0.18" stroke="none"/>"#
        );
        svg.push('\n');
        let _ = write!(
            svg,
            r#"<polyline class="mean" points="{line}" fill="none" stroke="{color}" stroke-width="2"/>"#
        );
        svg.push('\n');
        for c in &cells {
            let _ = write!(
                svg,
                r#"<circle cx="{}" cy="{}" r="3" fill="{color}"/>"#,
                axes.x(c.n_episodes),
                axes.y(c.mean_failure)
            );
        }
        svg.push_str("</g>\n");
    }

    // Legend.
    for (i, loss) in losses.iter().enumerate() {
        let y = MARGIN_TOP + 20.0 + 22.0 * i as f64;
        let x = WIDTH - MARGIN_RIGHT + 20.0;
        let _ = write!(
            svg,
            r#"<g class="legend"><rect x="{x}" y="{yr}" width="14" height="14" fill="{c}"/><text x="{xt}" y="{yt}" font-size="13">fqi-{loss}</text></g>"#,
            yr = y - 11.0,
            c = color_for(loss),
            xt = x + 20.0,
            yt = y
        );
        svg.push('\n');
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Renders and writes the SVG.
pub fn emit_plot<W: io::Write>(summaries: &[CiSummary], mut writer: W) -> Result<(), HarnessError> {
    let svg = render_plot(summaries)?;
    writer.write_all(svg.as_bytes())?;
    Ok(())
}
