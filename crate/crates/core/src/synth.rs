//! Procedural facade scene generator.
//!
//! Renders paired RGB/thermal images of simple building facades (sky,
//! wall with a window grid, door, basement strip, roof vent, ground)
//! under parameterized environmental conditions, with optional planted
//! anomalies (thermal bridges, hot basement segments) and exact ground
//! truth masks. RGB appearance depends only on the scene seed; the
//! condition changes the thermal side, so the same facade can be rendered
//! under winter and summer regimes.
//!
//! Thermal construction per pixel: `t_out + class_delta(condition)
//! + material_offset(wall albedo, building classes only) + smooth noise
//! (amplitude <= 0.25 °C) + planted anomaly deltas`. The wall albedo is
//! visible in the RGB wall color and maps linearly to the material
//! offset, identically in every condition.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f32::consts::TAU;
use std::path::{Path, PathBuf};

use crate::codec::{encode_thermal, write_pair, AlignedPair, CodecError, EncodingParams};
use crate::dataset::ConditionTag;
use crate::frame::{ColorFrame, Rect, ThermalFrame};

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("anomaly region {0:?} falls outside a {1}x{1} scene")]
    RegionOutOfBounds(Rect, usize),
    #[error("invalid generation spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

impl SynthError {
    pub fn category(&self) -> &'static str {
        match self {
            SynthError::RegionOutOfBounds(..) => "synth/RegionOutOfBounds",
            SynthError::InvalidSpec(_) => "synth/InvalidSpec",
            SynthError::Codec(e) => e.category(),
        }
    }
}

/// Thermal behavior of one acquisition condition: per-class temperature
/// deltas in °C relative to outdoors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthCondition {
    pub tag: ConditionTag,
    pub sky_delta: f32,
    pub ground_delta: f32,
    pub window_delta: f32,
    pub door_delta: f32,
    pub basement_delta: f32,
    pub vent_delta: f32,
    /// Peak-to-peak span of the albedo-driven material offset.
    pub material_span: f32,
}

impl SynthCondition {
    /// Winter, -4 °C outdoors: windows and doors leak indoor heat, the
    /// snowy ground is colder than the air column, basements stay warm.
    pub fn winter4() -> Self {
        Self {
            tag: ConditionTag::new("winter4", -4.0),
            sky_delta: -4.6,
            ground_delta: -2.5,
            window_delta: 0.5,
            door_delta: 0.5,
            basement_delta: 1.5,
            vent_delta: 5.0,
            material_span: 2.5,
        }
    }

    /// Colder winter acquisition, -8 °C outdoors.
    pub fn winter8() -> Self {
        Self {
            tag: ConditionTag::new("winter8", -8.0),
            sky_delta: -4.8,
            ground_delta: -3.0,
            window_delta: 1.0,
            door_delta: 0.8,
            basement_delta: 1.6,
            vent_delta: 5.0,
            material_span: 2.5,
        }
    }

    /// Summer at 17 °C: no indoor-outdoor heat flux through windows;
    /// basements and vents stay warm year-round.
    pub fn summer() -> Self {
        Self {
            tag: ConditionTag::new("summer", 17.0),
            sky_delta: -3.0,
            ground_delta: 0.0,
            window_delta: 0.0,
            door_delta: 0.0,
            basement_delta: 1.5,
            vent_delta: 5.0,
            material_span: 2.5,
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "winter4" => Some(Self::winter4()),
            "winter8" => Some(Self::winter8()),
            "summer" => Some(Self::summer()),
            _ => None,
        }
    }

    pub fn with_t_out(mut self, t_out: f32) -> Self {
        self.tag.t_out = t_out;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyKind {
    ThermalBridge,
    HotBasement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedAnomaly {
    pub region: Rect,
    pub delta_c: f32,
    pub kind: AnomalyKind,
}

/// Facade geometry in pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacadeLayout {
    /// First building row; rows above are sky.
    pub roof_row: usize,
    /// First ground row; the building ends here.
    pub ground_row: usize,
    pub basement: Rect,
    pub door: Rect,
    pub vent: Rect,
    pub windows: Vec<Rect>,
}

/// Per-scene material colors; the wall albedo drives both the wall color
/// and the thermal material offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Palette {
    pub wall_albedo: f32,
    pub sky: [u8; 3],
    pub wall: [u8; 3],
    pub window: [u8; 3],
    pub door: [u8; 3],
    pub basement: [u8; 3],
    pub ground: [u8; 3],
    pub vent: [u8; 3],
    /// Uniform per-pixel speckle amplitude, gray levels.
    pub speckle: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seed: u64,
    pub size: usize,
    pub condition: SynthCondition,
    pub layout: FacadeLayout,
    pub palette: Palette,
    pub anomalies: Vec<PlantedAnomaly>,
}

/// Exact mask of planted anomaly pixels plus per-region labels.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub mask: Array2<bool>,
    pub regions: Vec<PlantedAnomaly>,
}

/// How planted anomalies are drawn when generating a set.
#[derive(Debug, Clone, Copy)]
pub struct AnomalyPlan {
    /// Fixed delta; when None, drawn uniformly from +2..+4 °C.
    pub delta_c: Option<f32>,
    /// Fixed kind; when None, bridges are drawn 70% of the time.
    pub kind: Option<AnomalyKind>,
}

impl Default for AnomalyPlan {
    fn default() -> Self {
        Self {
            delta_c: None,
            kind: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Class {
    Sky,
    Ground,
    Wall,
    Window,
    Door,
    Basement,
    Vent,
}

impl Class {
    fn is_building(self) -> bool {
        !matches!(self, Class::Sky | Class::Ground)
    }
}

impl SceneSpec {
    /// Draw a scene from the seeded family: random but coherent facade
    /// layout, palette, and (optionally) planted anomalies.
    pub fn sample(
        scene_seed: u64,
        size: usize,
        condition: &SynthCondition,
        with_anomalies: Option<AnomalyPlan>,
    ) -> SceneSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(scene_seed);
        let s = size as f32;
        let frac = |rng: &mut ChaCha8Rng, lo: f32, hi: f32| (s * rng.gen_range(lo..hi)) as usize;

        let roof_row = frac(&mut rng, 0.14, 0.24).max(2);
        let ground_row = frac(&mut rng, 0.82, 0.90).min(size - 2);
        let basement_h = frac(&mut rng, 0.05, 0.08).max(2);
        let basement = Rect::new(0, ground_row - basement_h, size, basement_h);

        let vent_w = frac(&mut rng, 0.04, 0.07).max(2);
        let vent_h = frac(&mut rng, 0.05, 0.09).max(2);
        let vent_x = rng.gen_range(size / 8..size - size / 8 - vent_w);
        let vent = Rect::new(vent_x, roof_row.saturating_sub(vent_h), vent_w, vent_h);

        let door_w = frac(&mut rng, 0.08, 0.12).max(3);
        let door_h = frac(&mut rng, 0.12, 0.16).max(4);
        let door_x = rng.gen_range(size / 10..size - size / 10 - door_w);
        let door = Rect::new(door_x, basement.y - door_h, door_w, door_h);

        // Window grid between roof and door level.
        let margin = (size / 16).max(2);
        let grid_top = roof_row + margin;
        let grid_bottom = basement.y - door_h - margin / 2;
        let n_cols = rng.gen_range(3..=5usize);
        let n_rows = if size >= 64 {
            rng.gen_range(2..=4usize)
        } else {
            2
        };
        let mut windows = Vec::new();
        if grid_bottom > grid_top {
            let cell_w = (size - 2 * margin) / n_cols;
            let cell_h = (grid_bottom - grid_top) / n_rows;
            for r in 0..n_rows {
                for c in 0..n_cols {
                    let w = ((cell_w as f32) * rng.gen_range(0.40..0.55)) as usize;
                    let h = ((cell_h as f32) * rng.gen_range(0.45..0.62)) as usize;
                    if w < 2 || h < 2 {
                        continue;
                    }
                    let jx = rng.gen_range(0..=(cell_w - w).max(1) / 2);
                    let jy = rng.gen_range(0..=(cell_h - h).max(1) / 2);
                    let x = margin + c * cell_w + (cell_w - w) / 2 + jx / 2;
                    let y = grid_top + r * cell_h + (cell_h - h) / 2 + jy / 2;
                    windows.push(Rect::new(x, y, w, h));
                }
            }
        }

        let wall_albedo = rng.gen_range(0.25..0.75f32);
        let gray = (40.0 + wall_albedo * 200.0) as i32;
        let tint = |rng: &mut ChaCha8Rng, base: i32, spread: i32| -> u8 {
            (base + rng.gen_range(-spread..=spread)).clamp(0, 255) as u8
        };
        let palette = Palette {
            wall_albedo,
            sky: [
                tint(&mut rng, 165, 10),
                tint(&mut rng, 195, 10),
                tint(&mut rng, 240, 10),
            ],
            wall: [
                tint(&mut rng, gray, 8),
                tint(&mut rng, gray, 8),
                tint(&mut rng, gray - 8, 8),
            ],
            window: [
                tint(&mut rng, 45, 10),
                tint(&mut rng, 55, 10),
                tint(&mut rng, 90, 15),
            ],
            door: [
                tint(&mut rng, 105, 10),
                tint(&mut rng, 70, 8),
                tint(&mut rng, 40, 8),
            ],
            basement: [
                tint(&mut rng, gray * 3 / 5, 8),
                tint(&mut rng, gray * 3 / 5, 8),
                tint(&mut rng, gray * 3 / 5 - 5, 8),
            ],
            ground: [
                tint(&mut rng, 115, 10),
                tint(&mut rng, 110, 10),
                tint(&mut rng, 100, 10),
            ],
            vent: [
                tint(&mut rng, 70, 6),
                tint(&mut rng, 70, 6),
                tint(&mut rng, 70, 6),
            ],
            speckle: 8,
        };

        let mut anomalies = Vec::new();
        if let Some(plan) = with_anomalies {
            let count = rng.gen_range(1..=2usize);
            for _ in 0..count {
                let kind = plan.kind.unwrap_or_else(|| {
                    if rng.gen_bool(0.7) {
                        AnomalyKind::ThermalBridge
                    } else {
                        AnomalyKind::HotBasement
                    }
                });
                let delta = plan
                    .delta_c
                    .unwrap_or_else(|| rng.gen_range(2.0..4.0f32));
                let region = match kind {
                    AnomalyKind::ThermalBridge => {
                        let thickness = frac(&mut rng, 0.03, 0.06).max(2);
                        if rng.gen_bool(0.5) {
                            // Horizontal band across the facade.
                            let len = frac(&mut rng, 0.30, 0.60).max(8);
                            let x = rng.gen_range(margin..(size - margin - len).max(margin + 1));
                            let y_lo = roof_row + 1;
                            let y_hi = basement.y.saturating_sub(thickness + 1);
                            let y = rng.gen_range(y_lo..y_hi.max(y_lo + 1));
                            Rect::new(x, y, len, thickness)
                        } else {
                            let len = frac(&mut rng, 0.25, 0.50).max(8);
                            let x = rng.gen_range(margin..(size - margin - thickness).max(margin + 1));
                            let y_lo = roof_row + 1;
                            let y_hi = basement.y.saturating_sub(len + 1);
                            let y = rng.gen_range(y_lo..y_hi.max(y_lo + 1));
                            Rect::new(x, y, thickness, len)
                        }
                    }
                    AnomalyKind::HotBasement => {
                        let len = frac(&mut rng, 0.15, 0.30).max(6);
                        let x = rng.gen_range(0..(size - len).max(1));
                        Rect::new(x, basement.y, len, basement.h)
                    }
                };
                anomalies.push(PlantedAnomaly {
                    region,
                    delta_c: delta,
                    kind,
                });
            }
        }

        SceneSpec {
            seed: scene_seed,
            size,
            condition: condition.clone(),
            layout: FacadeLayout {
                roof_row,
                ground_row,
                basement,
                door,
                vent,
                windows,
            },
            palette,
            anomalies,
        }
    }
}

fn class_map(spec: &SceneSpec) -> Array2<Class> {
    let s = spec.size;
    let l = &spec.layout;
    let mut map = Array2::from_elem((s, s), Class::Wall);
    for ((y, _x), cell) in map.indexed_iter_mut() {
        if y < l.roof_row {
            *cell = Class::Sky;
        } else if y >= l.ground_row {
            *cell = Class::Ground;
        }
    }
    let mut paint = |r: &Rect, class: Class| {
        for y in r.y..(r.y + r.h).min(s) {
            for x in r.x..(r.x + r.w).min(s) {
                map[[y, x]] = class;
            }
        }
    };
    paint(&l.basement, Class::Basement);
    paint(&l.door, Class::Door);
    for w in &l.windows {
        paint(w, Class::Window);
    }
    paint(&l.vent, Class::Vent);
    map
}

/// Smooth low-frequency noise field with |n| <= amplitude.
fn smooth_noise(size: usize, amplitude: f32, rng: &mut ChaCha8Rng) -> Array2<f32> {
    const WAVES: usize = 4;
    let mut params = Vec::with_capacity(WAVES);
    for _ in 0..WAVES {
        let fx: f32 = rng.gen_range(0.5..4.0) / size as f32;
        let fy: f32 = rng.gen_range(0.5..4.0) / size as f32;
        let phase: f32 = rng.gen_range(0.0..TAU);
        params.push((fx, fy, phase));
    }
    let per_wave = amplitude / WAVES as f32;
    Array2::from_shape_fn((size, size), |(y, x)| {
        params
            .iter()
            .map(|&(fx, fy, ph)| per_wave * (TAU * (fx * x as f32 + fy * y as f32) + ph).sin())
            .sum()
    })
}

/// Render the scene: RGB facade, absolute-temperature thermal field, and
/// the exact planted-anomaly ground truth.
pub fn render_scene(
    spec: &SceneSpec,
) -> Result<(ColorFrame, ThermalFrame, GroundTruth), SynthError> {
    let s = spec.size;
    for a in &spec.anomalies {
        if !a.region.fits_within(s, s) {
            return Err(SynthError::RegionOutOfBounds(a.region, s));
        }
    }
    let classes = class_map(spec);
    let cond = &spec.condition;
    let material = (0.5 - spec.palette.wall_albedo) * 2.0 * cond.material_span;

    let mut rgb_rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0xC0_10_12);
    let mut rgb = ColorFrame::filled(s, s, [0, 0, 0]);
    let p = &spec.palette;
    for y in 0..s {
        for x in 0..s {
            let base = match classes[[y, x]] {
                Class::Sky => p.sky,
                Class::Ground => p.ground,
                Class::Wall => p.wall,
                Class::Window => p.window,
                Class::Door => p.door,
                Class::Basement => p.basement,
                Class::Vent => p.vent,
            };
            for c in 0..3 {
                let n: i32 = rgb_rng.gen_range(-(p.speckle as i32)..=p.speckle as i32);
                rgb.data[[y, x, c]] = (base[c] as i32 + n).clamp(0, 255) as u8;
            }
        }
    }

    let mut th_rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x7E_44_A1);
    let noise = smooth_noise(s, 0.25, &mut th_rng);
    let mut temps = Array2::zeros((s, s));
    for y in 0..s {
        for x in 0..s {
            let class = classes[[y, x]];
            let delta = match class {
                Class::Sky => cond.sky_delta,
                Class::Ground => cond.ground_delta,
                Class::Wall => 0.0,
                Class::Window => cond.window_delta,
                Class::Door => cond.door_delta,
                Class::Basement => cond.basement_delta,
                Class::Vent => cond.vent_delta,
            };
            let mat = if class.is_building() { material } else { 0.0 };
            temps[[y, x]] = cond.tag.t_out + delta + mat + noise[[y, x]];
        }
    }
    let mut mask = Array2::from_elem((s, s), false);
    for a in &spec.anomalies {
        for y in a.region.y..a.region.y + a.region.h {
            for x in a.region.x..a.region.x + a.region.w {
                temps[[y, x]] += a.delta_c;
                mask[[y, x]] = true;
            }
        }
    }

    let mut thermal = ThermalFrame::new(temps, cond.tag.t_out);
    thermal.condition = Some(cond.tag.name.clone());
    Ok((
        rgb,
        thermal,
        GroundTruth {
            mask,
            regions: spec.anomalies.clone(),
        },
    ))
}

pub fn truth_path(dir: &Path, scene_id: &str) -> PathBuf {
    dir.join(format!("{scene_id}_truth.png"))
}

pub fn write_truth_mask(mask: &Array2<bool>, path: &Path) -> Result<(), SynthError> {
    let (h, w) = mask.dim();
    let mut img = image::GrayImage::new(w as u32, h as u32);
    for ((y, x), &m) in mask.indexed_iter() {
        img.put_pixel(x as u32, y as u32, image::Luma([if m { 255 } else { 0 }]));
    }
    img.save(path)
        .map_err(|e| SynthError::Codec(CodecError::Io(format!("{}: {e}", path.display()))))?;
    Ok(())
}

pub fn read_truth_mask(path: &Path) -> Result<Array2<bool>, SynthError> {
    let img = image::open(path)
        .map_err(|e| SynthError::Codec(CodecError::Io(format!("{}: {e}", path.display()))))?
        .into_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok(Array2::from_shape_fn((h, w), |(y, x)| {
        img.get_pixel(x as u32, y as u32).0[0] != 0
    }))
}

/// Parameters for whole-set generation.
#[derive(Debug, Clone)]
pub struct GenerateSpec {
    pub n: usize,
    pub condition: SynthCondition,
    /// Fraction of scenes with planted anomalies.
    pub anomaly_rate: f64,
    pub anomaly: AnomalyPlan,
    pub size: usize,
    pub seed: u64,
}

fn scene_seed(set_seed: u64, index: usize) -> u64 {
    let mut z = set_seed
        .wrapping_add((index as u64).wrapping_mul(0x9E3779B97F4A7C15))
        .wrapping_add(0xD1B54A32D192ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z ^ (z >> 31)
}

/// Generate `n` pairs in the standard pair file format plus `_truth.png`
/// masks. Deterministic given the spec.
pub fn generate_set(dir: &Path, spec: &GenerateSpec) -> Result<Vec<String>, SynthError> {
    if spec.n == 0 {
        return Err(SynthError::InvalidSpec("n must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&spec.anomaly_rate) {
        return Err(SynthError::InvalidSpec(format!(
            "anomaly rate {} outside [0, 1]",
            spec.anomaly_rate
        )));
    }
    std::fs::create_dir_all(dir)
        .map_err(|e| SynthError::Codec(CodecError::Io(format!("{}: {e}", dir.display()))))?;
    let params = EncodingParams::for_outdoor(spec.condition.tag.t_out);
    let mut ids = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let sseed = scene_seed(spec.seed, i);
        let mut flip_rng = ChaCha8Rng::seed_from_u64(sseed ^ 0xA7);
        let with_anomalies = if flip_rng.gen_bool(spec.anomaly_rate) {
            Some(spec.anomaly)
        } else {
            None
        };
        let scene = SceneSpec::sample(sseed, spec.size, &spec.condition, with_anomalies);
        let (rgb, thermal, truth) = render_scene(&scene)?;
        let encoded = encode_thermal(&thermal, &params)?;
        let scene_id = format!("{}_{i:04}", spec.condition.tag.name);
        let pair = AlignedPair {
            scene_id: scene_id.clone(),
            rgb,
            thermal: encoded,
            condition: Some(spec.condition.tag.name.clone()),
        };
        write_pair(&pair, dir)?;
        write_truth_mask(&truth.mask, &truth_path(dir, &scene_id))?;
        ids.push(scene_id);
    }
    Ok(ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::read_pair;

    fn region_mean(temps: &Array2<f32>, pred: impl Fn(usize, usize) -> bool) -> f32 {
        let mut sum = 0.0;
        let mut n = 0usize;
        for ((y, x), &v) in temps.indexed_iter() {
            if pred(y, x) {
                sum += v;
                n += 1;
            }
        }
        sum / n as f32
    }

    #[test]
    fn clean_scene_has_empty_truth() {
        let spec = SceneSpec::sample(5, 64, &SynthCondition::winter4(), None);
        let (_, _, truth) = render_scene(&spec).unwrap();
        assert!(truth.mask.iter().all(|&m| !m));
        assert!(truth.regions.is_empty());
    }

    #[test]
    fn winter_windows_decode_near_planted_delta() {
        let cond = SynthCondition::winter4();
        let spec = SceneSpec::sample(11, 128, &cond, None);
        let (_, thermal, _) = render_scene(&spec).unwrap();
        let classes = class_map(&spec);
        let material = (0.5 - spec.palette.wall_albedo) * 2.0 * cond.material_span;
        let win_mean = region_mean(&thermal.temps, |y, x| classes[[y, x]] == Class::Window);
        // Relative to outdoors, minus the scene's material offset, the
        // window mean sits at the class delta within the noise budget.
        let rel = win_mean - cond.tag.t_out - material;
        assert!(
            (rel - cond.window_delta).abs() <= 0.25,
            "window mean {rel} vs delta {}",
            cond.window_delta
        );
    }

    #[test]
    fn same_seed_renders_identically() {
        let cond = SynthCondition::winter4();
        let a = SceneSpec::sample(99, 64, &cond, Some(AnomalyPlan::default()));
        let b = SceneSpec::sample(99, 64, &cond, Some(AnomalyPlan::default()));
        assert_eq!(a, b);
        let (rgb_a, th_a, tr_a) = render_scene(&a).unwrap();
        let (rgb_b, th_b, tr_b) = render_scene(&b).unwrap();
        assert_eq!(rgb_a, rgb_b);
        assert_eq!(th_a, th_b);
        assert_eq!(tr_a.mask, tr_b.mask);
    }

    #[test]
    fn out_of_bounds_region_rejected() {
        let mut spec = SceneSpec::sample(1, 64, &SynthCondition::winter4(), None);
        spec.anomalies.push(PlantedAnomaly {
            region: Rect::new(50, 50, 20, 20),
            delta_c: 3.0,
            kind: AnomalyKind::ThermalBridge,
        });
        assert!(matches!(
            render_scene(&spec),
            Err(SynthError::RegionOutOfBounds(..))
        ));
    }

    #[test]
    fn truth_mask_equals_union_of_regions() {
        let spec = SceneSpec::sample(21, 96, &SynthCondition::winter4(), Some(AnomalyPlan::default()));
        assert!(!spec.anomalies.is_empty());
        let (_, _, truth) = render_scene(&spec).unwrap();
        for ((y, x), &m) in truth.mask.indexed_iter() {
            let planted = spec.anomalies.iter().any(|a| a.region.contains(x, y));
            assert_eq!(m, planted, "({x},{y})");
        }
    }

    /// Winter windows warmer than walls; summer windows are not.
    #[test]
    fn cross_condition_window_contrast() {
        for seed in [3u64, 14, 27] {
            let winter = SceneSpec::sample(seed, 128, &SynthCondition::winter4(), None);
            let summer = SceneSpec::sample(seed, 128, &SynthCondition::summer(), None);
            // Same facade in both conditions.
            assert_eq!(winter.layout, summer.layout);
            assert_eq!(winter.palette, summer.palette);

            let classes = class_map(&winter);
            let contrast = |spec: &SceneSpec| {
                let (_, th, _) = render_scene(spec).unwrap();
                let win = region_mean(&th.temps, |y, x| classes[[y, x]] == Class::Window);
                let wall = region_mean(&th.temps, |y, x| classes[[y, x]] == Class::Wall);
                win - wall
            };
            let winter_contrast = contrast(&winter);
            let summer_contrast = contrast(&summer);
            assert!(winter_contrast > 0.3, "winter contrast {winter_contrast}");
            assert!(summer_contrast < 0.2, "summer contrast {summer_contrast}");
        }
    }

    #[test]
    fn generated_set_validates_and_counts_anomalies() {
        let dir = tempfile::tempdir().unwrap();
        let spec = GenerateSpec {
            n: 50,
            condition: SynthCondition::winter4(),
            anomaly_rate: 0.5,
            anomaly: AnomalyPlan::default(),
            size: 32,
            seed: 123,
        };
        let ids = generate_set(dir.path(), &spec).unwrap();
        assert_eq!(ids.len(), 50);
        let mut with_anomaly = 0;
        for id in &ids {
            let pair = read_pair(dir.path(), id).unwrap();
            pair.thermal.validate().unwrap();
            let truth = read_truth_mask(&truth_path(dir.path(), id)).unwrap();
            if truth.iter().any(|&m| m) {
                with_anomaly += 1;
            }
        }
        // Bernoulli(0.5) over 50 scenes; exact count is seed-determined.
        assert!((15..=35).contains(&with_anomaly), "{with_anomaly}");

        // Rate zero produces an anomaly-free set.
        let dir2 = tempfile::tempdir().unwrap();
        let clean = GenerateSpec {
            anomaly_rate: 0.0,
            n: 10,
            ..spec
        };
        for id in generate_set(dir2.path(), &clean).unwrap() {
            let truth = read_truth_mask(&truth_path(dir2.path(), &id)).unwrap();
            assert!(truth.iter().all(|&m| !m));
        }
    }

    #[test]
    fn set_generation_is_bit_reproducible() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let spec = GenerateSpec {
            n: 4,
            condition: SynthCondition::summer(),
            anomaly_rate: 0.5,
            anomaly: AnomalyPlan::default(),
            size: 48,
            seed: 9,
        };
        let ids = generate_set(dir_a.path(), &spec).unwrap();
        generate_set(dir_b.path(), &spec).unwrap();
        for id in &ids {
            for suffix in ["_rgb.png", "_th.png", "_meta.json", "_truth.png"] {
                let a = std::fs::read(dir_a.path().join(format!("{id}{suffix}"))).unwrap();
                let b = std::fs::read(dir_b.path().join(format!("{id}{suffix}"))).unwrap();
                assert_eq!(a, b, "{id}{suffix}");
            }
        }
    }

    #[test]
    fn code_coverage_over_default_set() {
        // 200 scenes, anomaly-free: the encoding must exercise >= 20 of
        // the 31 code levels.
        let params = EncodingParams::for_outdoor(-4.0);
        let cond = SynthCondition::winter4();
        let mut seen = [false; 31];
        for i in 0..200 {
            let spec = SceneSpec::sample(scene_seed(77, i), 64, &cond, None);
            let (_, thermal, _) = render_scene(&spec).unwrap();
            let enc = encode_thermal(&thermal, &params).unwrap();
            for &c in enc.codes.iter() {
                seen[c as usize] = true;
            }
        }
        let count = seen.iter().filter(|&&s| s).count();
        assert!(count >= 20, "only {count} code levels exercised");
    }
}
