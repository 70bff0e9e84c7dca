//! CSV and SVG writers for run artifacts.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use adp_lqr::linalg::{normalized_error, packed_index};
use adp_lqr::riccati::IterateHistory;
use nalgebra::DMatrix;
use plotters::prelude::*;

use crate::error::{CliError, CliResult};
use crate::report::{RankSummary, RunReport};

/// Output directory that records every file written into it.
pub struct ArtifactDir {
    root: PathBuf,
    written: Vec<String>,
}

impl ArtifactDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    /// Writes `name` through `fill` and records it in the manifest.
    pub fn write<F>(&mut self, name: &str, fill: F) -> CliResult<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    {
        let path = self.root.join(name);
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        fill(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| CliError::io(&path, e))?;
        self.note(name);
        Ok(())
    }

    pub fn note(&mut self, name: &str) {
        if !self.written.iter().any(|n| n == name) {
            self.written.push(name.to_string());
        }
    }

    pub fn manifest(&self) -> Vec<String> {
        self.written.clone()
    }
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Per-iterate errors against a reference pair.
pub fn iterate_errors(
    history: &IterateHistory,
    reference: Option<(&DMatrix<f64>, &DMatrix<f64>)>,
) -> Vec<(f64, f64)> {
    match reference {
        Some((p_ref, k_ref)) => history
            .records
            .iter()
            .map(|r| {
                (
                    normalized_error(&r.p, p_ref),
                    normalized_error(&r.gain, k_ref),
                )
            })
            .collect(),
        None => Vec::new(),
    }
}

/// `k, p_error, k_error, increment_ratio, reset, are_residual,
/// p_<i>_<j> (upper triangle), k_<i>_<j>`.
pub fn write_history(
    w: &mut impl Write,
    history: &IterateHistory,
    errors: &[(f64, f64)],
) -> std::io::Result<()> {
    let Some(first) = history.records.first() else {
        return writeln!(w, "k,p_error,k_error,increment_ratio,reset,are_residual");
    };
    let dim = first.p.nrows();
    let (gr, gc) = first.gain.shape();
    let mut header: Vec<String> = [
        "k",
        "p_error",
        "k_error",
        "increment_ratio",
        "reset",
        "are_residual",
    ]
    .map(String::from)
    .to_vec();
    let mut upper = Vec::new();
    for i in 0..dim {
        for j in i..dim {
            debug_assert_eq!(packed_index(dim, i, j), upper.len());
            upper.push((i, j));
            header.push(format!("p_{}_{}", i + 1, j + 1));
        }
    }
    for i in 0..gr {
        for j in 0..gc {
            header.push(format!("k_{}_{}", i + 1, j + 1));
        }
    }
    writeln!(w, "{}", header.join(","))?;
    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    for (idx, r) in history.records.iter().enumerate() {
        let err = errors.get(idx);
        let mut row = vec![
            r.k.to_string(),
            opt(err.map(|e| e.0)),
            opt(err.map(|e| e.1)),
            opt(r.increment_ratio),
            u8::from(r.reset).to_string(),
            opt(r.are_residual),
        ];
        row.extend(upper.iter().map(|&(i, j)| num(r.p[(i, j)])));
        for i in 0..gr {
            for j in 0..gc {
                row.push(num(r.gain[(i, j)]));
            }
        }
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_rank(w: &mut impl Write, rank: &RankSummary) -> std::io::Result<()> {
    writeln!(
        w,
        "condition,matrix,required,achieved,index,singular_value,relative"
    )?;
    for e in &rank.entries {
        let top = e.singular_values.first().copied().unwrap_or(0.0);
        for (i, s) in e.singular_values.iter().enumerate() {
            let rel = if top > 0.0 { s / top } else { 0.0 };
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                e.condition,
                e.matrix,
                e.required,
                e.achieved,
                i + 1,
                num(*s),
                num(rel)
            )?;
        }
    }
    Ok(())
}

pub fn write_summary(w: &mut impl Write, report: &RunReport) -> std::io::Result<()> {
    writeln!(w, "metric,value")?;
    for (name, value) in report.summary_rows() {
        writeln!(w, "{name},{}", num(value))?;
    }
    Ok(())
}

/// Named matrices as `name,row,col,value`.
pub fn write_matrices(
    w: &mut impl Write,
    matrices: &[(&str, &DMatrix<f64>)],
) -> std::io::Result<()> {
    writeln!(w, "name,row,col,value")?;
    for (name, m) in matrices {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                writeln!(w, "{name},{},{},{}", i + 1, j + 1, num(m[(i, j)]))?;
            }
        }
    }
    Ok(())
}

/// Log-scale plot of normalized value and gain errors per iteration.
pub fn plot_errors(path: &Path, title: &str, errors: &[(f64, f64)]) -> CliResult<()> {
    let floor = 1e-16;
    let clamp = |v: f64| if v.is_finite() { v.max(floor) } else { floor };
    let points: Vec<(f64, f64)> = errors.iter().map(|&(p, k)| (clamp(p), clamp(k))).collect();
    let (lo, hi) = points
        .iter()
        .flat_map(|&(p, k)| [p, k])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    let (lo, hi) = if points.is_empty() {
        (floor, 1.0)
    } else {
        (lo / 2.0, hi * 2.0)
    };
    let last = points.len().max(2) as f64 - 1.0;
    let plot_err = |e: Box<dyn std::error::Error>| CliError::Plot(e.to_string());
    let root = SVGBackend::new(path, (800, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(Box::new(e)))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(0f64..last, (lo..hi).log_scale())
        .map_err(|e| plot_err(Box::new(e)))?;
    chart
        .configure_mesh()
        .x_desc("iteration k")
        .y_desc("normalized error")
        .y_label_formatter(&|v| format!("{v:.0e}"))
        .draw()
        .map_err(|e| plot_err(Box::new(e)))?;
    let series: [(&str, RGBColor, fn(&(f64, f64)) -> f64); 2] =
        [("value", BLUE, |e| e.0), ("gain", RED, |e| e.1)];
    for (label, color, pick) in series {
        chart
            .draw_series(LineSeries::new(
                points.iter().enumerate().map(|(k, e)| (k as f64, pick(e))),
                color.stroke_width(2),
            ))
            .map_err(|e| plot_err(Box::new(e)))?
            .label(label)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| plot_err(Box::new(e)))?;
    root.present().map_err(|e| plot_err(Box::new(e)))?;
    Ok(())
}
