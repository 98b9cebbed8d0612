//! Quantitative evaluation: per-image mean absolute deviation between
//! predicted and measured thermal images, histogram summaries across a
//! test set, detection scoring against planted ground truth, and a
//! self-contained HTML report.

use ndarray::Array2;
use serde::Serialize;

use crate::anomaly::{anomaly_map, AnomalyError, Region, ResidualTransform};
use crate::codec::EncodedThermal;
use crate::frame::{ColorFrame, Mask};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no valid pixels to average over")]
    NoValidPixels,
    #[error("empty evaluation set")]
    EmptySet,
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Anomaly(#[from] AnomalyError),
}

impl EvalError {
    pub fn category(&self) -> &'static str {
        match self {
            EvalError::NoValidPixels => "evaluation/NoValidPixels",
            EvalError::EmptySet => "evaluation/EmptySet",
            EvalError::DimensionMismatch(..) => "evaluation/DimensionMismatch",
            EvalError::InvalidParameter(_) => "evaluation/InvalidParameter",
            EvalError::Anomaly(e) => e.category(),
        }
    }
}

/// Mean over valid pixels of |decode(measured) - decode(predicted)|, °C.
pub fn mean_abs_deviation(
    measured: &EncodedThermal,
    predicted: &EncodedThermal,
) -> Result<f32, EvalError> {
    let map = anomaly_map(measured, predicted, ResidualTransform::Absolute)?;
    let mut sum = 0.0f64;
    let mut n = 0usize;
    for (ix, &valid) in map.validity.indexed_iter() {
        if valid {
            sum += map.values[ix] as f64;
            n += 1;
        }
    }
    if n == 0 {
        return Err(EvalError::NoValidPixels);
    }
    Ok((sum / n as f64) as f32)
}

/// Per-image deviations plus a fixed-bin histogram starting at 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationStats {
    pub per_image: Vec<(String, f32)>,
    pub bin_width: f32,
    /// Count per bin `[i*bin_width, (i+1)*bin_width)`.
    pub histogram: Vec<usize>,
    pub mean: f32,
    pub median: f32,
    pub max: f32,
}

pub const DEFAULT_BIN_WIDTH_C: f32 = 0.25;

pub fn deviation_histogram(
    per_image: &[(String, f32)],
    bin_width: f32,
) -> Result<DeviationStats, EvalError> {
    if per_image.is_empty() {
        return Err(EvalError::EmptySet);
    }
    if !(bin_width > 0.0) {
        return Err(EvalError::InvalidParameter(format!(
            "bin width {bin_width} must be positive"
        )));
    }
    let max_bin = per_image
        .iter()
        .map(|(_, d)| (d / bin_width).floor() as usize)
        .max()
        .unwrap();
    let mut histogram = vec![0usize; max_bin + 1];
    for (_, d) in per_image {
        histogram[(d / bin_width).floor() as usize] += 1;
    }
    let mut sorted: Vec<f32> = per_image.iter().map(|(_, d)| *d).collect();
    sorted.sort_by(f32::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    Ok(DeviationStats {
        per_image: per_image.to_vec(),
        bin_width,
        histogram,
        mean: sorted.iter().sum::<f32>() / n as f32,
        median,
        max: *sorted.last().unwrap(),
    })
}

impl DeviationStats {
    /// Lower edge of the most populated bin (ties go to the lower bin).
    pub fn mode_bin_start(&self) -> f32 {
        let (idx, _) = self
            .histogram
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .unwrap();
        idx as f32 * self.bin_width
    }
}

/// Pixel confusion counts; additive across images for set-level scores.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DetectionCounts {
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
}

impl DetectionCounts {
    pub fn merge(&mut self, other: &DetectionCounts) {
        self.true_positive += other.true_positive;
        self.false_positive += other.false_positive;
        self.false_negative += other.false_negative;
    }

    pub fn score(&self) -> DetectionScore {
        let tp = self.true_positive as f64;
        let fp = self.false_positive as f64;
        let fneg = self.false_negative as f64;
        DetectionScore {
            pixel_recall: (self.true_positive + self.false_negative > 0)
                .then(|| tp / (tp + fneg)),
            pixel_precision: (self.true_positive + self.false_positive > 0)
                .then(|| tp / (tp + fp)),
            iou: (self.true_positive + self.false_positive + self.false_negative > 0)
                .then(|| tp / (tp + fp + fneg)),
        }
    }
}

/// Pixelwise detection quality; undefined ratios are absent, not zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionScore {
    pub pixel_recall: Option<f64>,
    pub pixel_precision: Option<f64>,
    pub iou: Option<f64>,
}

pub fn detection_counts(
    flagged: &Array2<bool>,
    truth: &Array2<bool>,
    validity: Option<&Mask>,
) -> Result<DetectionCounts, EvalError> {
    if flagged.dim() != truth.dim() {
        return Err(EvalError::DimensionMismatch(
            flagged.ncols(),
            flagged.nrows(),
            truth.ncols(),
            truth.nrows(),
        ));
    }
    let mut counts = DetectionCounts::default();
    for (ix, (&f, &t)) in flagged.iter().zip(truth.iter()).enumerate() {
        if let Some(m) = validity {
            if !m.as_slice().unwrap()[ix] {
                continue;
            }
        }
        match (f, t) {
            (true, true) => counts.true_positive += 1,
            (true, false) => counts.false_positive += 1,
            (false, true) => counts.false_negative += 1,
            (false, false) => {}
        }
    }
    Ok(counts)
}

pub fn score_detection(
    flagged: &Array2<bool>,
    truth: &Array2<bool>,
    validity: Option<&Mask>,
) -> Result<DetectionScore, EvalError> {
    Ok(detection_counts(flagged, truth, validity)?.score())
}

/// One entry of the worst-image gallery.
pub struct WorstImage {
    pub scene_id: String,
    pub deviation_c: f32,
    pub overlay: ColorFrame,
}

/// Everything the report renders.
pub struct ReportData {
    pub title: String,
    pub model_description: String,
    pub condition: String,
    pub tolerance_c: f32,
    pub stats: DeviationStats,
    pub detection: Option<DetectionScore>,
    pub worst: Vec<WorstImage>,
    pub regions: Vec<(String, Vec<Region>)>,
}

fn png_data_uri(img: &image::RgbImage) -> String {
    use base64::Engine;
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, image::ImageFormat::Png)
        .expect("in-memory png encode");
    format!(
        "data:image/png;base64,{}",
        base64::engine::general_purpose::STANDARD.encode(buf.into_inner())
    )
}

/// Simple bar chart of the deviation histogram (no text; the caption in
/// the report carries the axis description).
pub fn histogram_plot(stats: &DeviationStats) -> image::RgbImage {
    let (w, h) = (480u32, 260u32);
    let (ml, mr, mt, mb) = (20u32, 10u32, 10u32, 20u32);
    let mut img = image::RgbImage::from_pixel(w, h, image::Rgb([255, 255, 255]));
    let max_count = stats.histogram.iter().copied().max().unwrap_or(1).max(1);
    let plot_w = w - ml - mr;
    let plot_h = h - mt - mb;
    let n_bins = stats.histogram.len() as u32;
    let bar_w = (plot_w / n_bins.max(1)).max(1);
    for (i, &count) in stats.histogram.iter().enumerate() {
        let bar_h = ((count as f64 / max_count as f64) * plot_h as f64).round() as u32;
        let x0 = ml + i as u32 * bar_w;
        for x in x0..(x0 + bar_w.saturating_sub(1)).min(w - mr) {
            for y in (h - mb - bar_h)..(h - mb) {
                img.put_pixel(x, y, image::Rgb([178, 34, 34]));
            }
        }
    }
    // Axes and bin-edge ticks.
    for x in ml..(w - mr) {
        img.put_pixel(x, h - mb, image::Rgb([0, 0, 0]));
    }
    for y in mt..(h - mb + 1) {
        img.put_pixel(ml, y, image::Rgb([0, 0, 0]));
    }
    for i in 0..=n_bins {
        let x = (ml + i * bar_w).min(w - 1);
        for dy in 0..4 {
            img.put_pixel(x, h - mb + dy.min(mb - 1), image::Rgb([0, 0, 0]));
        }
    }
    img
}

fn html_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Render the evaluation report as a single self-contained HTML document.
/// Deterministic given the same data and timestamp.
pub fn render_report(data: &ReportData, timestamp_unix: u64) -> String {
    let mut out = String::with_capacity(64 * 1024);
    out.push_str("<!doctype html>\n<html><head><meta charset=\"utf-8\">\n");
    out.push_str(&format!("<title>{}</title>\n", html_escape(&data.title)));
    out.push_str(
        "<style>body{font-family:sans-serif;max-width:60em;margin:2em auto;}\n\
         table{border-collapse:collapse;}td,th{border:1px solid #999;padding:2px 8px;}\n\
         img{max-width:100%;}</style></head><body>\n",
    );
    out.push_str(&format!("<h1>{}</h1>\n", html_escape(&data.title)));
    out.push_str(&format!("<p>generated_unix: {timestamp_unix}</p>\n"));
    out.push_str(&format!(
        "<p>Model: {} &mdash; evaluated on condition <b>{}</b>, tolerance {} &deg;C.</p>\n",
        html_escape(&data.model_description),
        html_escape(&data.condition),
        data.tolerance_c
    ));

    let s = &data.stats;
    out.push_str("<h2>Per-image mean absolute deviation</h2>\n");
    out.push_str(&format!(
        "<p>{} images &mdash; mean {:.3} &deg;C, median {:.3} &deg;C, max {:.3} &deg;C.</p>\n",
        s.per_image.len(),
        s.mean,
        s.median,
        s.max
    ));
    let plot = histogram_plot(s);
    out.push_str(&format!(
        "<figure><img src=\"{}\" alt=\"deviation histogram\">\n\
         <figcaption>Histogram of per-image mean absolute deviation; bins of {} &deg;C starting at 0.</figcaption></figure>\n",
        png_data_uri(&plot),
        s.bin_width
    ));
    out.push_str("<table><tr><th>scene</th><th>deviation (&deg;C)</th></tr>\n");
    for (id, d) in &s.per_image {
        out.push_str(&format!(
            "<tr><td>{}</td><td>{d:.4}</td></tr>\n",
            html_escape(id)
        ));
    }
    out.push_str("</table>\n");

    out.push_str("<h2>Detection vs ground truth</h2>\n");
    match &data.detection {
        Some(score) => {
            let fmt = |v: Option<f64>| {
                v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "n/a".into())
            };
            out.push_str(&format!(
                "<p>pixel recall {}, pixel precision {}, IoU {}</p>\n",
                fmt(score.pixel_recall),
                fmt(score.pixel_precision),
                fmt(score.iou)
            ));
        }
        None => out.push_str("<p>No ground truth masks supplied.</p>\n"),
    }

    if !data.worst.is_empty() {
        out.push_str("<h2>Largest-deviation images</h2>\n");
        for wimg in &data.worst {
            out.push_str(&format!(
                "<figure><img src=\"{}\" alt=\"overlay {}\">\n\
                 <figcaption>{} &mdash; {:.3} &deg;C mean deviation</figcaption></figure>\n",
                png_data_uri(&wimg.overlay.to_image()),
                html_escape(&wimg.scene_id),
                html_escape(&wimg.scene_id),
                wimg.deviation_c
            ));
        }
    }

    out.push_str("<h2>Anomaly regions</h2>\n");
    let total: usize = data.regions.iter().map(|(_, r)| r.len()).sum();
    if total == 0 {
        out.push_str("<p>No regions above the tolerance.</p>\n");
    } else {
        out.push_str(
            "<table><tr><th>scene</th><th>bbox (x, y, w, h)</th><th>area px</th><th>mean E (&deg;C)</th></tr>\n",
        );
        for (id, regions) in &data.regions {
            for r in regions {
                out.push_str(&format!(
                    "<tr><td>{}</td><td>({}, {}, {}, {})</td><td>{}</td><td>{:.3}</td></tr>\n",
                    html_escape(id),
                    r.bbox.x,
                    r.bbox.y,
                    r.bbox.w,
                    r.bbox.h,
                    r.area,
                    r.mean_deviation
                ));
            }
        }
        out.push_str("</table>\n");
    }
    out.push_str("</body></html>\n");
    out
}
