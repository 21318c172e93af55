//! Deterministic SVG rendering: heatmaps of chart fields and line plots of
//! residual histories.
//!
//! Output bytes are a pure function of the input: fixed layout, fixed color
//! map, fixed decimal formatting, no timestamps. Large grids are box-averaged
//! down so a heatmap never exceeds a bounded cell count.

use std::fmt::Write as _;

use ndarray::Array2;

use crate::chart::ScalarChartField;
use crate::error::{Error, Result};
use crate::io::Table;
use crate::levelset::marching;

/// Anchor points of the viridis color map, interpolated linearly.
const VIRIDIS: [[f64; 3]; 9] = [
    [68.0, 1.0, 84.0],
    [72.0, 40.0, 120.0],
    [62.0, 74.0, 137.0],
    [49.0, 104.0, 142.0],
    [38.0, 130.0, 142.0],
    [31.0, 158.0, 137.0],
    [53.0, 183.0, 121.0],
    [109.0, 205.0, 89.0],
    [253.0, 231.0, 37.0],
];

fn viridis(t: f64) -> String {
    let t = t.clamp(0.0, 1.0) * (VIRIDIS.len() - 1) as f64;
    let i = (t.floor() as usize).min(VIRIDIS.len() - 2);
    let w = t - i as f64;
    let mix = |a: f64, b: f64| (a + (b - a) * w).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(VIRIDIS[i][0], VIRIDIS[i + 1][0]),
        mix(VIRIDIS[i][1], VIRIDIS[i + 1][1]),
        mix(VIRIDIS[i][2], VIRIDIS[i + 1][2])
    )
}

/// Short deterministic label for an axis or colorbar endpoint.
fn label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e-3 && v.abs() < 1e4 {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

fn px(v: f64) -> String {
    format!("{v:.2}")
}

pub struct HeatmapOptions {
    /// Scalar levels drawn as contour polylines over the heatmap.
    pub contour_levels: Vec<f64>,
    /// Box-average the grid down so neither axis exceeds this many cells.
    pub max_cells: usize,
    pub title: String,
}

impl Default for HeatmapOptions {
    fn default() -> Self {
        Self {
            contour_levels: Vec::new(),
            max_cells: 160,
            title: String::new(),
        }
    }
}

struct Frame {
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
    width: f64,
    height: f64,
}

const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 84.0;
const MARGIN_T: f64 = 34.0;
const MARGIN_B: f64 = 46.0;

impl Frame {
    fn sx(&self, x: f64) -> f64 {
        MARGIN_L + (x - self.x_lo) / (self.x_hi - self.x_lo) * self.width
    }

    fn sy(&self, y: f64) -> f64 {
        MARGIN_T + self.height - (y - self.y_lo) / (self.y_hi - self.y_lo) * self.height
    }
}

fn open_svg(out: &mut String, frame: &Frame, title: &str) {
    let total_w = MARGIN_L + frame.width + MARGIN_R;
    let total_h = MARGIN_T + frame.height + MARGIN_B;
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" \
         viewBox=\"0 0 {} {}\" font-family=\"monospace\" font-size=\"12\">\n",
        px(total_w),
        px(total_h),
        px(total_w),
        px(total_h)
    );
    let _ = write!(
        out,
        "<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>\n",
        px(total_w),
        px(total_h)
    );
    if !title.is_empty() {
        let _ = write!(
            out,
            "<text x=\"{}\" y=\"22\" text-anchor=\"middle\">{}</text>\n",
            px(MARGIN_L + frame.width / 2.0),
            xml_escape(title)
        );
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axis_labels(out: &mut String, frame: &Frame, names: [&str; 2]) {
    let _ = write!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        px(MARGIN_L + frame.width / 2.0),
        px(MARGIN_T + frame.height + 34.0),
        xml_escape(names[0])
    );
    let _ = write!(
        out,
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        px(MARGIN_T + frame.height / 2.0),
        px(MARGIN_T + frame.height / 2.0),
        xml_escape(names[1])
    );
    for (v, x, y, anchor) in [
        (frame.x_lo, frame.sx(frame.x_lo), MARGIN_T + frame.height + 16.0, "start"),
        (frame.x_hi, frame.sx(frame.x_hi), MARGIN_T + frame.height + 16.0, "end"),
    ] {
        let _ = write!(
            out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"{anchor}\">{}</text>\n",
            px(x),
            px(y),
            label(v)
        );
    }
    for (v, y, baseline) in [
        (frame.y_lo, frame.sy(frame.y_lo), ""),
        (frame.y_hi, frame.sy(frame.y_hi) + 10.0, ""),
    ] {
        let _ = baseline;
        let _ = write!(
            out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            px(MARGIN_L - 6.0),
            px(y),
            label(v)
        );
    }
}

/// Box-average `values` so neither axis exceeds `max_cells`; returns the
/// averaged array plus the block extents (start index, length) per axis.
fn downsample(values: &Array2<f64>, max_cells: usize) -> (Array2<f64>, Vec<(usize, usize)>, Vec<(usize, usize)>) {
    let (n1, n2) = values.dim();
    let blocks = |n: usize| -> Vec<(usize, usize)> {
        let nb = n.div_ceil(max_cells);
        let mut out = Vec::new();
        let mut i = 0;
        while i < n {
            let len = nb.min(n - i);
            out.push((i, len));
            i += len;
        }
        out
    };
    let b1 = blocks(n1);
    let b2 = blocks(n2);
    let mut avg = Array2::zeros((b1.len(), b2.len()));
    for (bi, &(i0, l1)) in b1.iter().enumerate() {
        for (bj, &(j0, l2)) in b2.iter().enumerate() {
            let mut s = 0.0;
            for i in i0..i0 + l1 {
                for j in j0..j0 + l2 {
                    s += values[[i, j]];
                }
            }
            avg[[bi, bj]] = s / (l1 * l2) as f64;
        }
    }
    (avg, b1, b2)
}

/// Render a scalar chart field as a heatmap with optional contour overlays
/// and a colorbar. The first chart coordinate runs rightward, the second
/// upward.
pub fn heatmap_svg(field: &ScalarChartField, opts: &HeatmapOptions) -> Result<String> {
    let [n1, n2] = field.shape();
    if n1 == 0 || n2 == 0 {
        return Err(Error::Validation("empty field".into()));
    }
    field.check_finite()?;
    if opts.max_cells == 0 {
        return Err(Error::InvalidParameter("max_cells must be positive".into()));
    }

    let h = field.spacing;
    // Cell edges extend half a spacing beyond the node extremes.
    let x_lo = field.origin[0] - 0.5 * h[0];
    let x_hi = field.origin[0] + ((n1 - 1) as f64 + 0.5) * h[0];
    let y_lo = field.origin[1] - 0.5 * h[1];
    let y_hi = field.origin[1] + ((n2 - 1) as f64 + 0.5) * h[1];

    let width = 560.0;
    let height = (width * (y_hi - y_lo) / (x_hi - x_lo)).clamp(120.0, 760.0);
    let frame = Frame {
        x_lo,
        x_hi,
        y_lo,
        y_hi,
        width,
        height,
    };

    let (lo, hi) = field
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = hi - lo;
    let tval = |v: f64| if span > 0.0 { (v - lo) / span } else { 0.5 };

    let (avg, b1, b2) = downsample(&field.values, opts.max_cells);

    let mut out = String::new();
    open_svg(&mut out, &frame, &opts.title);

    for (bi, &(i0, l1)) in b1.iter().enumerate() {
        for (bj, &(j0, l2)) in b2.iter().enumerate() {
            let cx0 = field.origin[0] + (i0 as f64 - 0.5) * h[0];
            let cx1 = field.origin[0] + ((i0 + l1) as f64 - 0.5) * h[0];
            let cy0 = field.origin[1] + (j0 as f64 - 0.5) * h[1];
            let cy1 = field.origin[1] + ((j0 + l2) as f64 - 0.5) * h[1];
            let x = frame.sx(cx0);
            let y = frame.sy(cy1);
            let w = frame.sx(cx1) - x;
            let hgt = frame.sy(cy0) - y;
            let _ = write!(
                out,
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n",
                px(x),
                px(y),
                // Slight overdraw hides antialiasing seams between cells.
                px(w + 0.3),
                px(hgt + 0.3),
                viridis(tval(avg[[bi, bj]]))
            );
        }
    }

    for &level in &opts.contour_levels {
        for line in marching::contours(&field.values, level) {
            if line.points.len() < 2 {
                continue;
            }
            let mut d = String::new();
            for p in &line.points {
                let x = frame.sx(field.origin[0] + p[0] * h[0]);
                let y = frame.sy(field.origin[1] + p[1] * h[1]);
                let _ = write!(d, "{},{} ", px(x), px(y));
            }
            let _ = write!(
                out,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"#ffffff\" stroke-width=\"1.5\"/>\n",
                d.trim_end()
            );
        }
    }

    // Colorbar.
    let bar_x = MARGIN_L + frame.width + 18.0;
    let bar_w = 14.0;
    let steps = 32;
    for s in 0..steps {
        let t0 = s as f64 / steps as f64;
        let t1 = (s + 1) as f64 / steps as f64;
        let y1 = MARGIN_T + frame.height * (1.0 - t1);
        let _ = write!(
            out,
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n",
            px(bar_x),
            px(y1),
            px(bar_w),
            px(frame.height / steps as f64 + 0.3),
            viridis((t0 + t1) / 2.0)
        );
    }
    let _ = write!(
        out,
        "<text x=\"{}\" y=\"{}\">{}</text>\n",
        px(bar_x + bar_w + 4.0),
        px(MARGIN_T + frame.height),
        label(lo)
    );
    let _ = write!(
        out,
        "<text x=\"{}\" y=\"{}\">{}</text>\n",
        px(bar_x + bar_w + 4.0),
        px(MARGIN_T + 10.0),
        label(hi)
    );

    axis_labels(&mut out, &frame, field.chart.coord_names());
    out.push_str("</svg>\n");
    Ok(out)
}

/// Render numeric table columns as polylines against one x column. The y
/// axis switches to log10 when every value is positive and the range spans
/// more than two decades.
pub fn history_svg(table: &Table, x_column: &str, title: &str) -> Result<String> {
    if table.rows.is_empty() {
        return Err(Error::Validation("empty table".into()));
    }
    let xs = table.column(x_column)?;
    let series: Vec<(String, Vec<f64>)> = table
        .columns
        .iter()
        .filter(|c| c.as_str() != x_column)
        .map(|c| (c.clone(), table.column(c).unwrap()))
        .collect();
    if series.is_empty() {
        return Err(Error::Validation("table has only the x column".into()));
    }

    let all_positive = series.iter().all(|(_, ys)| ys.iter().all(|&v| v > 0.0));
    let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, ys) in &series {
        for &v in ys {
            y_lo = y_lo.min(v);
            y_hi = y_hi.max(v);
        }
    }
    let log_scale = all_positive && y_hi / y_lo > 100.0;
    let ty = |v: f64| if log_scale { v.log10() } else { v };
    let (gy_lo, gy_hi) = (ty(y_lo), ty(y_hi));
    let (gy_lo, gy_hi) = if gy_hi > gy_lo {
        (gy_lo, gy_hi)
    } else {
        (gy_lo - 0.5, gy_hi + 0.5)
    };
    let (x_lo, x_hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let (x_lo, x_hi) = if x_hi > x_lo { (x_lo, x_hi) } else { (x_lo - 0.5, x_hi + 0.5) };

    let frame = Frame {
        x_lo,
        x_hi,
        y_lo: gy_lo,
        y_hi: gy_hi,
        width: 560.0,
        height: 360.0,
    };

    let mut out = String::new();
    open_svg(&mut out, &frame, title);
    let _ = write!(
        out,
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#888888\"/>\n",
        px(MARGIN_L),
        px(MARGIN_T),
        px(frame.width),
        px(frame.height)
    );

    for (si, (name, ys)) in series.iter().enumerate() {
        let color = viridis(if series.len() > 1 {
            si as f64 / (series.len() - 1) as f64 * 0.85
        } else {
            0.25
        });
        let mut d = String::new();
        for (x, y) in xs.iter().zip(ys.iter()) {
            let _ = write!(d, "{},{} ", px(frame.sx(*x)), px(frame.sy(ty(*y))));
        }
        let _ = write!(
            out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
            d.trim_end(),
            color
        );
        let _ = write!(
            out,
            "<text x=\"{}\" y=\"{}\" fill=\"{}\">{}</text>\n",
            px(MARGIN_L + frame.width + 6.0),
            px(MARGIN_T + 14.0 * (si as f64 + 1.0)),
            color,
            xml_escape(name)
        );
    }

    // Endpoint labels; the y pair reports the data range, not the log grid.
    for (v, x, anchor) in [(x_lo, frame.sx(x_lo), "start"), (x_hi, frame.sx(x_hi), "end")] {
        let _ = write!(
            out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"{anchor}\">{}</text>\n",
            px(x),
            px(MARGIN_T + frame.height + 16.0),
            label(v)
        );
    }
    for (v, y) in [(y_lo, frame.sy(gy_lo)), (y_hi, frame.sy(gy_hi) + 10.0)] {
        let _ = write!(
            out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            px(MARGIN_L - 6.0),
            px(y),
            label(v)
        );
    }
    if log_scale {
        let _ = write!(
            out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">log</text>\n",
            px(MARGIN_L - 6.0),
            px(MARGIN_T - 6.0)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::ChartTag;

    #[test]
    fn constant_field_renders_a_single_color() {
        let f = ScalarChartField::sample(
            ChartTag::CartesianXy,
            [0.0, 0.0],
            [1.0, 1.0],
            [8, 8],
            "c",
            |_, _| 3.5,
        )
        .unwrap();
        let svg = heatmap_svg(&f, &HeatmapOptions::default()).unwrap();
        let mut fills = std::collections::BTreeSet::new();
        for part in svg.split("fill=\"#").skip(1) {
            fills.insert(&part[..6]);
        }
        // Cell color plus colorbar colors and white background; all CELL
        // rects share one fill, which is the viridis midpoint.
        assert!(svg.matches(&viridis(0.5)).count() >= 64);
    }

    #[test]
    fn ramp_field_uses_the_full_range_and_draws_contours() {
        let f = ScalarChartField::sample(
            ChartTag::MeridionalRz,
            [0.0, 0.0],
            [1.0, 1.0],
            [32, 32],
            "ramp",
            |r, _| r,
        )
        .unwrap();
        let opts = HeatmapOptions {
            contour_levels: vec![0.5],
            ..Default::default()
        };
        let svg = heatmap_svg(&f, &opts).unwrap();
        assert!(svg.contains(&viridis(0.0)));
        assert!(svg.contains(&viridis(1.0)));
        assert!(svg.contains("<polyline"), "contour overlay missing");
        assert!(svg.contains(">r<") || svg.contains(">r</text>"), "axis name missing");
        // Deterministic bytes.
        assert_eq!(svg, heatmap_svg(&f, &opts).unwrap());
    }

    #[test]
    fn large_grids_are_downsampled() {
        let f = ScalarChartField::sample(
            ChartTag::CartesianXy,
            [0.0, 0.0],
            [4.0, 1.0],
            [400, 50],
            "big",
            |x, y| (x * 3.0).sin() + y,
        )
        .unwrap();
        let svg = heatmap_svg(&f, &HeatmapOptions::default()).unwrap();
        let cells = svg.matches("<rect").count();
        // 400 -> 160 blocks of width >= 2; colorbar adds 32 rects, the
        // background one more.
        assert!(cells <= 160 * 50 + 40, "cell count {cells}");
        let svg_small = heatmap_svg(
            &f,
            &HeatmapOptions {
                max_cells: 10,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(svg_small.matches("<rect").count() <= 10 * 10 + 40);
    }

    #[test]
    fn histories_plot_on_a_log_axis_when_spanning_decades() {
        let mut t = Table::new(&["iter", "residual"]);
        for i in 0..20 {
            t.push(vec![i as f64, 10f64.powi(-i)]).unwrap();
        }
        let svg = history_svg(&t, "iter", "convergence").unwrap();
        assert!(svg.contains(">log<"), "log marker missing");
        assert!(svg.contains("<polyline"));
        assert_eq!(svg, history_svg(&t, "iter", "convergence").unwrap());

        // A monotone residual produces a monotone polyline: svg y grows
        // downward, so decreasing values mean increasing y coordinates.
        let d = svg.split("points=\"").nth(1).unwrap();
        let pts: Vec<f64> = d[..d.find('"').unwrap()]
            .split_whitespace()
            .map(|p| p.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        assert!(pts.windows(2).all(|w| w[1] >= w[0]), "polyline not monotone");
    }

    #[test]
    fn empty_inputs_are_rejected() {
        let t = Table::new(&["a", "b"]);
        assert!(history_svg(&t, "a", "").is_err());
        let mut only_x = Table::new(&["a"]);
        only_x.push(vec![1.0]).unwrap();
        assert!(history_svg(&only_x, "a", "").is_err());
    }
}
