//! SVG rendering for the `plot` subcommand.
//!
//! Both plot kinds write the drawn coordinates to a companion CSV so the
//! figure can be checked numerically.

use std::fmt::Write as _;
use std::path::Path;

use cfshift::{
    ecf_eval, forward, load_checkpoint, pca_fit, pca_project, sample_frequency_bank, FeatureMatrix,
    Scheme,
};

use crate::commands::{load, standardized_domains, usage, CmdResult, Failure};
use crate::{PlotArgs, PlotKind};

const PALETTE: [&str; 10] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
    "#9c755f", "#bab0ac",
];
const DASHES: [&str; 4] = ["", "6 3", "2 2", "8 3 2 3"];

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 60.0;
const TOP: f64 = 20.0;
const SIZE: f64 = 420.0;
const CF_LIMIT: f64 = 1.1;

fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

pub fn run(args: &PlotArgs, seed: u64) -> CmdResult {
    let ds = load(&args.data)?;
    let features: Vec<FeatureMatrix> = match &args.checkpoint {
        Some(path) => {
            let model = load_checkpoint(path)
                .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
            ds.domains()
                .iter()
                .map(|d| forward(&model, &d.features).map(|(e, _)| e))
                .collect::<cfshift::Result<_>>()?
        }
        None => standardized_domains(&ds, &[])?,
    };
    let (svg, csv) = match args.kind {
        PlotKind::CfPlane => {
            if args.directions == 0
                || args.steps < 2
                || args.sweep_scale.is_nan()
                || args.sweep_scale <= 0.0
            {
                return Err(usage(
                    "cf-plane needs --directions >= 1, --steps >= 2 and a positive --sweep-scale",
                ));
            }
            let traces = cf_traces(
                &features,
                args.directions,
                args.steps,
                args.sweep_scale,
                seed,
            )?;
            (cf_plane_svg(&traces), cf_plane_csv(&traces))
        }
        PlotKind::PcaScatter => {
            let points = pca_points(&features, &ds)?;
            (scatter_svg(&points), scatter_csv(&points))
        }
    };
    let csv_path = args
        .csv
        .clone()
        .unwrap_or_else(|| args.out.with_extension("csv"));
    write(&args.out, &svg)?;
    write(&csv_path, &csv)?;
    println!("wrote {} and {}", args.out.display(), csv_path.display());
    Ok(())
}

fn write(path: &Path, text: &str) -> CmdResult {
    std::fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

/// ECF values of one domain along one sweep direction.
pub struct Trace {
    pub domain: String,
    pub direction: usize,
    /// `(t, re, im)` per sweep point.
    pub points: Vec<(f64, f64, f64)>,
}

fn cf_traces(
    features: &[FeatureMatrix],
    directions: usize,
    steps: usize,
    scale: f64,
    seed: u64,
) -> Result<Vec<Trace>, Failure> {
    let dim = features[0].ncols();
    let bank = sample_frequency_bank(
        dim,
        directions * steps,
        scale,
        seed,
        Scheme::RadialSweep { directions },
    )
    .map_err(usage)?;
    let mut traces = Vec::new();
    for f in features {
        let e = ecf_eval(f, &bank)?;
        for m in 0..directions {
            let points = (0..steps)
                .map(|i| {
                    let k = m * steps + i;
                    (scale * i as f64 / (steps - 1) as f64, e.re[k], e.im[k])
                })
                .collect();
            traces.push(Trace {
                domain: f.domain_id().to_string(),
                direction: m,
                points,
            });
        }
    }
    Ok(traces)
}

fn cf_plane_csv(traces: &[Trace]) -> String {
    let mut out = String::from("domain,direction,step,t,re,im\n");
    for tr in traces {
        for (i, (t, re, im)) in tr.points.iter().enumerate() {
            writeln!(
                out,
                "{},{},{i},{t:?},{re:?},{im:?}",
                tr.domain, tr.direction
            )
            .unwrap();
        }
    }
    out
}

fn header(title: &str) -> String {
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, "<title>{}</title>", escape(title)).unwrap();
    writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    )
    .unwrap();
    writeln!(
        s,
        r##"<rect x="{LEFT}" y="{TOP}" width="{SIZE}" height="{SIZE}" fill="none" stroke="#333"/>"##
    )
    .unwrap();
    s
}

fn legend(s: &mut String, ids: &[&str], line: bool) {
    let x = LEFT + SIZE + 20.0;
    for (i, id) in ids.iter().enumerate() {
        let y = TOP + 10.0 + 18.0 * i as f64;
        if line {
            writeln!(
                s,
                r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{}" stroke-width="2"/>"#,
                x + 18.0,
                color(i)
            )
            .unwrap();
        } else {
            writeln!(
                s,
                r#"<circle cx="{}" cy="{y}" r="4" fill="{}"/>"#,
                x + 9.0,
                color(i)
            )
            .unwrap();
        }
        writeln!(
            s,
            r#"<text x="{}" y="{}">{}</text>"#,
            x + 24.0,
            y + 4.0,
            escape(id)
        )
        .unwrap();
    }
}

fn domain_order<'a>(names: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut ids: Vec<&str> = Vec::new();
    for n in names {
        if !ids.contains(&n) {
            ids.push(n);
        }
    }
    ids
}

fn cf_plane_svg(traces: &[Trace]) -> String {
    let px = |v: f64| LEFT + (v + CF_LIMIT) / (2.0 * CF_LIMIT) * SIZE;
    let py = |v: f64| TOP + (CF_LIMIT - v) / (2.0 * CF_LIMIT) * SIZE;
    let mut s = header("cf-plane");
    let (ox, oy) = (px(0.0), py(0.0));
    writeln!(
        s,
        r##"<line x1="{LEFT}" y1="{oy}" x2="{}" y2="{oy}" stroke="#aaa"/>"##,
        LEFT + SIZE
    )
    .unwrap();
    writeln!(
        s,
        r##"<line x1="{ox}" y1="{TOP}" x2="{ox}" y2="{}" stroke="#aaa"/>"##,
        TOP + SIZE
    )
    .unwrap();
    writeln!(
        s,
        r##"<circle cx="{ox}" cy="{oy}" r="{:.2}" fill="none" stroke="#888" stroke-dasharray="4 3"/>"##,
        SIZE / (2.0 * CF_LIMIT)
    )
    .unwrap();
    for v in [-1.0, 0.0, 1.0] {
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{v}</text>"#,
            px(v),
            TOP + SIZE + 16.0
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v}</text>"#,
            LEFT - 6.0,
            py(v) + 4.0
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">Re</text>"#,
        LEFT + SIZE / 2.0,
        TOP + SIZE + 34.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">Im</text>"#,
        TOP + SIZE / 2.0,
        TOP + SIZE / 2.0
    )
    .unwrap();

    let ids = domain_order(traces.iter().map(|t| t.domain.as_str()));
    for tr in traces {
        let idx = ids.iter().position(|d| *d == tr.domain).unwrap_or(0);
        let pts: Vec<String> = tr
            .points
            .iter()
            .map(|(_, re, im)| format!("{:.2},{:.2}", px(*re), py(*im)))
            .collect();
        let dash = DASHES[tr.direction % DASHES.len()];
        let dash_attr = if dash.is_empty() {
            String::new()
        } else {
            format!(r#" stroke-dasharray="{dash}""#)
        };
        writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"{dash_attr}/>"#,
            pts.join(" "),
            color(idx)
        )
        .unwrap();
    }
    legend(&mut s, &ids, true);
    s.push_str("</svg>\n");
    s
}

/// A projected sample: domain, label and the first two coordinates.
pub struct ScatterPoint {
    pub domain: String,
    pub label: usize,
    pub x: f64,
    pub y: f64,
}

fn pca_points(
    features: &[FeatureMatrix],
    ds: &cfshift::LabeledDataset,
) -> Result<Vec<ScatterPoint>, Failure> {
    if features[0].ncols() < 2 {
        return Err(usage("pca-scatter needs at least two feature columns"));
    }
    let views: Vec<_> = features.iter().map(|f| f.values()).collect();
    let pooled = ndarray::concatenate(ndarray::Axis(0), &views)
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    let model = pca_fit(&FeatureMatrix::new(pooled, "pooled")?, 2)?;
    let mut points = Vec::new();
    for (f, d) in features.iter().zip(ds.domains()) {
        let p = pca_project(&model, f)?;
        for (row, &label) in p.rows().into_iter().zip(&d.labels) {
            points.push(ScatterPoint {
                domain: d.id().to_string(),
                label,
                x: row[0],
                y: row[1],
            });
        }
    }
    Ok(points)
}

fn scatter_csv(points: &[ScatterPoint]) -> String {
    let mut out = String::from("domain,label,pc1,pc2\n");
    for p in points {
        writeln!(out, "{},{},{:?},{:?}", p.domain, p.label, p.x, p.y).unwrap();
    }
    out
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    let pad = ((hi - lo) * 0.05).max(1e-9);
    (lo - pad, hi + pad)
}

fn scatter_svg(points: &[ScatterPoint]) -> String {
    let (x0, x1) = padded_range(points.iter().map(|p| p.x));
    let (y0, y1) = padded_range(points.iter().map(|p| p.y));
    let px = |v: f64| LEFT + (v - x0) / (x1 - x0) * SIZE;
    let py = |v: f64| TOP + (y1 - v) / (y1 - y0) * SIZE;
    let mut s = header("pca-scatter");
    for (v, anchor) in [(x0, "start"), (x1, "end")] {
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="{anchor}">{v:.2}</text>"#,
            px(v),
            TOP + SIZE + 16.0
        )
        .unwrap();
    }
    for v in [y0, y1] {
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.2}</text>"#,
            LEFT - 6.0,
            py(v) + 4.0
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">PC1</text>"#,
        LEFT + SIZE / 2.0,
        TOP + SIZE + 34.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">PC2</text>"#,
        TOP + SIZE / 2.0,
        TOP + SIZE / 2.0
    )
    .unwrap();
    let ids = domain_order(points.iter().map(|p| p.domain.as_str()));
    for p in points {
        let idx = ids.iter().position(|d| *d == p.domain).unwrap_or(0);
        writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{}" fill-opacity="0.6"/>"#,
            px(p.x),
            py(p.y),
            color(idx)
        )
        .unwrap();
    }
    legend(&mut s, &ids, false);
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn escapes_markup_in_domain_names() {
        assert_eq!(escape("a<b & \"c\">"), "a&lt;b &amp; &quot;c&quot;&gt;");
    }

    #[test]
    fn traces_start_at_one() {
        let f = FeatureMatrix::new(array![[0.3, -1.0], [2.0, 0.5]], "A").unwrap();
        let traces = cf_traces(&[f], 3, 5, 3.0, 1).unwrap();
        assert_eq!(traces.len(), 3);
        for t in &traces {
            assert_eq!(t.points[0], (0.0, 1.0, 0.0));
            assert_eq!(t.points.last().unwrap().0, 3.0);
        }
    }

    #[test]
    fn palette_follows_domain_order() {
        let ids = domain_order(["b", "a", "b", "c"].into_iter());
        assert_eq!(ids, vec!["b", "a", "c"]);
        assert_eq!(color(0), color(PALETTE.len()));
    }
}
