//! Deterministic synthetic lifelogs.
//!
//! Each day is captured once per interval between `capture_start` and
//! `capture_end`. Windowed classes occupy fixed time-of-day windows (shifted
//! by a per-day jitter); the remaining slots are shared among free classes in
//! shuffled episodes, with per-day budgets proportional to their weights.
//! Images are flat colors or 2×2 quadrant patterns plus uniform noise, and
//! depend only on `(seed, record id)`.

mod presets;

pub use presets::{
    curve_config, metadata_only_config, standard_config, user_b_config, METADATA_CLASSES,
    PIXEL_CLASSES,
};

use std::collections::HashMap;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use image::{Rgb, RgbImage};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::dataset::{save_manifest, ActivityLabelSet, Dataset, ImageRecord};
use crate::error::{Error, Result};
use crate::pixel::{save_ppm, ImageSource};
use crate::rng::{key_of, stream_rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Palette {
    Flat([u8; 3]),
    /// Top-left, top-right, bottom-left, bottom-right.
    Quadrants([[u8; 3]; 4]),
}

impl Palette {
    fn color_at(&self, x: u32, y: u32, size: u32) -> [u8; 3] {
        match self {
            Palette::Flat(c) => *c,
            Palette::Quadrants(q) => {
                let right = usize::from(2 * x >= size);
                let bottom = usize::from(2 * y >= size);
                q[2 * bottom + right]
            }
        }
    }
}

/// Weekday mask with bit 0 = Monday.
pub const EVERY_DAY: u8 = 0b111_1111;
pub const WEEKDAYS: u8 = 0b001_1111;

/// `[start, end)` in minutes after midnight on the days in `weekdays`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub weekdays: u8,
    pub start: u16,
    pub end: u16,
}

impl Window {
    pub fn new(weekdays: u8, start: (u16, u16), end: (u16, u16)) -> Self {
        Self {
            weekdays,
            start: start.0 * 60 + start.1,
            end: end.0 * 60 + end.1,
        }
    }

    fn on(&self, weekday: u32) -> bool {
        self.weekdays & (1 << weekday) != 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    Windows(Vec<Window>),
    /// Share of the slots left over by windowed classes.
    Free {
        weight: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassSpec {
    pub label: String,
    pub palette: Palette,
    pub schedule: Schedule,
    /// Days before this one (0-based) never show the class.
    pub first_day: u32,
}

impl ClassSpec {
    pub fn windowed(label: &str, palette: Palette, windows: Vec<Window>) -> Self {
        Self {
            label: label.into(),
            palette,
            schedule: Schedule::Windows(windows),
            first_day: 0,
        }
    }

    pub fn free(label: &str, palette: Palette, weight: f64) -> Self {
        Self {
            label: label.into(),
            palette,
            schedule: Schedule::Free { weight },
            first_day: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub user_id: String,
    pub start_date: NaiveDate,
    pub days: u32,
    /// Minutes after midnight.
    pub capture_start: u16,
    pub capture_end: u16,
    pub interval_minutes: u16,
    pub image_size: u32,
    /// Per-channel uniform noise amplitude.
    pub noise: u8,
    /// Maximum per-day shift of each window, in minutes.
    pub jitter_minutes: u16,
    /// Inclusive bounds on free-class episode length, in minutes.
    pub episode_minutes: (u16, u16),
    pub classes: Vec<ClassSpec>,
    pub seed: u64,
}

impl SynthConfig {
    pub fn label_set(&self) -> Result<ActivityLabelSet> {
        ActivityLabelSet::new(self.classes.iter().map(|c| c.label.clone()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.classes.is_empty() {
            return bad("at least one class is required".into());
        }
        self.label_set()?;
        if self.interval_minutes == 0 {
            return bad("interval must be at least 1 minute".into());
        }
        if self.capture_start >= self.capture_end || self.capture_end > 24 * 60 {
            return bad("capture window must lie within 00:00-24:00".into());
        }
        if self.image_size == 0 {
            return bad("image size must be positive".into());
        }
        let (lo, hi) = self.episode_minutes;
        if lo == 0 || lo > hi {
            return bad("episode bounds must satisfy 1 <= min <= max".into());
        }
        let mut windows = Vec::new();
        for class in &self.classes {
            match &class.schedule {
                Schedule::Free { weight } if !(*weight > 0.0) || !weight.is_finite() => {
                    return bad(format!("class `{}` needs a positive weight", class.label));
                }
                Schedule::Free { .. } => {}
                Schedule::Windows(ws) => {
                    for w in ws {
                        if w.start >= w.end || w.end > 24 * 60 || w.weekdays & EVERY_DAY == 0 {
                            return bad(format!(
                                "class `{}` has an empty or out-of-day window",
                                class.label
                            ));
                        }
                        windows.push((class.label.as_str(), *w));
                    }
                }
            }
        }
        let j = self.jitter_minutes as i32;
        for (i, (la, a)) in windows.iter().enumerate() {
            for (lb, b) in &windows[i + 1..] {
                let share_day = a.weekdays & b.weekdays != 0;
                let apart = a.end as i32 + 2 * j <= b.start as i32
                    || b.end as i32 + 2 * j <= a.start as i32;
                if share_day && !apart {
                    return Err(Error::Schedule(format!(
                        "windows of `{la}` and `{lb}` can overlap (jitter {j} minutes)"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A generated dataset plus the renderer for its images.
#[derive(Debug, Clone)]
pub struct SynthLifelog {
    pub dataset: Dataset,
    pub images: SyntheticImages,
}

#[derive(Debug, Clone)]
pub struct SyntheticImages {
    size: u32,
    noise: u8,
    seed: u64,
    palettes: Vec<Palette>,
    class_of: HashMap<String, usize>,
}

impl SyntheticImages {
    pub fn render(&self, id: &str) -> Result<RgbImage> {
        let class = *self
            .class_of
            .get(id)
            .ok_or_else(|| Error::UnknownId(id.into()))?;
        let palette = self.palettes[class];
        let mut rng = stream_rng(self.seed, key_of(id));
        let noise = self.noise as i16;
        let mut img = RgbImage::new(self.size, self.size);
        for (x, y, px) in img.enumerate_pixels_mut() {
            let base = palette.color_at(x, y, self.size);
            let mut out = [0u8; 3];
            for (o, &b) in out.iter_mut().zip(&base) {
                let delta = if noise == 0 {
                    0
                } else {
                    rng.gen_range(-noise..=noise)
                };
                *o = (b as i16 + delta).clamp(0, 255) as u8;
            }
            *px = Rgb(out);
        }
        Ok(img)
    }
}

impl ImageSource for SyntheticImages {
    fn load(&self, record: &ImageRecord) -> Result<RgbImage> {
        self.render(&record.id)
    }
}

/// Largest-remainder split of `n` items by `weights`; earlier entries win ties.
fn apportion_weights(n: usize, weights: &[f64]) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / total * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        (exact[b] - exact[b].floor())
            .total_cmp(&(exact[a] - exact[a].floor()))
            .then(a.cmp(&b))
    });
    let short = n - counts.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        counts[i] += 1;
    }
    counts
}

/// Class of every capture slot of day `day`, or `None` when no class is active.
fn schedule_day(config: &SynthConfig, day: u32, weekday: u32, slots: &[u16]) -> Vec<Option<usize>> {
    let mut rng = stream_rng(config.seed, day as u64);
    let mut assigned: Vec<Option<usize>> = vec![None; slots.len()];
    let j = config.jitter_minutes as i32;
    for (c, class) in config.classes.iter().enumerate() {
        let Schedule::Windows(windows) = &class.schedule else {
            continue;
        };
        for w in windows {
            // Draw even when inactive so other windows keep their shifts.
            let shift = if j == 0 { 0 } else { rng.gen_range(-j..=j) };
            if day < class.first_day || !w.on(weekday) {
                continue;
            }
            let (lo, hi) = (w.start as i32 + shift, w.end as i32 + shift);
            for (slot, &m) in assigned.iter_mut().zip(slots) {
                if (lo..hi).contains(&(m as i32)) {
                    *slot = Some(c);
                }
            }
        }
    }
    let free_classes: Vec<(usize, f64)> = config
        .classes
        .iter()
        .enumerate()
        .filter_map(|(c, class)| match class.schedule {
            Schedule::Free { weight } if day >= class.first_day => Some((c, weight)),
            _ => None,
        })
        .collect();
    let free: Vec<usize> = (0..slots.len())
        .filter(|&i| assigned[i].is_none())
        .collect();
    if free_classes.is_empty() || free.is_empty() {
        return assigned;
    }
    let budgets = apportion_weights(
        free.len(),
        &free_classes.iter().map(|f| f.1).collect::<Vec<_>>(),
    );
    let interval = config.interval_minutes as usize;
    let (emin, emax) = (
        (config.episode_minutes.0 as usize)
            .div_ceil(interval)
            .max(1),
        (config.episode_minutes.1 as usize)
            .div_ceil(interval)
            .max(1),
    );
    let mut episodes: Vec<(usize, usize)> = Vec::new();
    for (&(c, _), &budget) in free_classes.iter().zip(&budgets) {
        let mut left = budget;
        while left > 0 {
            let len = rng.gen_range(emin..=emax).min(left);
            episodes.push((c, len));
            left -= len;
        }
    }
    episodes.shuffle(&mut rng);
    let fill = episodes
        .iter()
        .flat_map(|&(c, len)| std::iter::repeat_n(c, len));
    for (&slot, c) in free.iter().zip(fill) {
        assigned[slot] = Some(c);
    }
    assigned
}

/// Generates the records of every day; images are rendered on demand.
pub fn generate_lifelog(config: &SynthConfig) -> Result<SynthLifelog> {
    config.validate()?;
    let label_set = config.label_set()?;
    let slots: Vec<u16> = (config.capture_start..config.capture_end)
        .step_by(config.interval_minutes as usize)
        .collect();
    let mut records = Vec::new();
    let mut class_of = HashMap::new();
    for day in 0..config.days {
        let date = config.start_date + chrono::Duration::days(day as i64);
        let weekday = date.weekday().num_days_from_monday();
        for (&m, class) in slots.iter().zip(schedule_day(config, day, weekday, &slots)) {
            let Some(class) = class else { continue };
            let id = format!("{}-{:03}-{:02}{:02}", config.user_id, day, m / 60, m % 60);
            records.push(ImageRecord {
                path: format!("images/{id}.ppm"),
                timestamp: date
                    .and_hms_opt((m / 60) as u32, (m % 60) as u32, 0)
                    .expect("minute of day in range"),
                label: Some(config.classes[class].label.clone()),
                user_id: config.user_id.clone(),
                deleted: false,
                id: id.clone(),
            });
            class_of.insert(id, class);
        }
    }
    Ok(SynthLifelog {
        dataset: Dataset::new(label_set, records)?,
        images: SyntheticImages {
            size: config.image_size,
            noise: config.noise,
            seed: config.seed,
            palettes: config.classes.iter().map(|c| c.palette).collect(),
            class_of,
        },
    })
}

/// Writes `manifest.tsv` and, when `with_images` is set, one PPM per record
/// under `images/`.
pub fn write_lifelog(lifelog: &SynthLifelog, dir: &Path, with_images: bool) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    if with_images {
        lifelog
            .dataset
            .records()
            .par_iter()
            .try_for_each(|r| save_ppm(&lifelog.images.render(&r.id)?, &dir.join(&r.path)))?;
    }
    save_manifest(&lifelog.dataset, &dir.join("manifest.tsv"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{class_counts, manifest_text};

    fn one_class(interval: u16) -> SynthConfig {
        SynthConfig {
            user_id: "T".into(),
            start_date: NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(),
            days: 1,
            capture_start: 7 * 60,
            capture_end: 19 * 60,
            interval_minutes: interval,
            image_size: 8,
            noise: 10,
            jitter_minutes: 0,
            episode_minutes: (10, 30),
            classes: vec![ClassSpec::free("A", Palette::Flat([200, 0, 0]), 1.0)],
            seed: 1,
        }
    }

    #[test]
    fn hourly_single_class_day() {
        let life = generate_lifelog(&one_class(60)).unwrap();
        assert_eq!(life.dataset.len(), 12);
        assert!(life
            .dataset
            .records()
            .iter()
            .all(|r| r.label.as_deref() == Some("A")));
        assert_eq!(life.dataset.records()[0].id, "T-000-0700");
    }

    #[test]
    fn timestamps_step_by_interval() {
        let life = generate_lifelog(&standard_config(5)).unwrap();
        let recs = life.dataset.records();
        for pair in recs.windows(2) {
            if pair[0].timestamp.date() == pair[1].timestamp.date() {
                assert_eq!((pair[1].timestamp - pair[0].timestamp).num_minutes(), 1);
            }
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let cfg = standard_config(11);
        let a = generate_lifelog(&cfg).unwrap();
        let b = generate_lifelog(&cfg).unwrap();
        assert_eq!(manifest_text(&a.dataset), manifest_text(&b.dataset));
        for r in a.dataset.records().iter().step_by(997) {
            assert_eq!(
                a.images.render(&r.id).unwrap(),
                b.images.render(&r.id).unwrap()
            );
        }
        let c = generate_lifelog(&SynthConfig { seed: 12, ..cfg }).unwrap();
        assert_ne!(manifest_text(&a.dataset), manifest_text(&c.dataset));
    }

    #[test]
    fn palette_mean_concentrates() {
        let mut cfg = one_class(1);
        cfg.image_size = 16;
        let life = generate_lifelog(&cfg).unwrap();
        let within = life
            .dataset
            .records()
            .iter()
            .take(100)
            .filter(|r| {
                let img = life.images.render(&r.id).unwrap();
                let mean = img.pixels().map(|p| p.0[0] as f64).sum::<f64>() / 256.0;
                (190.0..=210.0).contains(&mean)
            })
            .count();
        assert!(within >= 99);
    }

    #[test]
    fn overlapping_windows_are_unsatisfiable() {
        let mut cfg = one_class(1);
        cfg.classes = vec![
            ClassSpec::windowed(
                "A",
                Palette::Flat([0; 3]),
                vec![Window::new(EVERY_DAY, (8, 0), (9, 0))],
            ),
            ClassSpec::windowed(
                "B",
                Palette::Flat([0; 3]),
                vec![Window::new(WEEKDAYS, (8, 30), (10, 0))],
            ),
        ];
        assert!(matches!(generate_lifelog(&cfg), Err(Error::Schedule(_))));
        cfg.classes[1].schedule = Schedule::Windows(vec![Window::new(WEEKDAYS, (9, 0), (10, 0))]);
        assert!(generate_lifelog(&cfg).is_ok());
        cfg.jitter_minutes = 2;
        assert!(matches!(generate_lifelog(&cfg), Err(Error::Schedule(_))));
    }

    #[test]
    fn standard_proportions_follow_reference() {
        let life = generate_lifelog(&standard_config(3)).unwrap();
        let counts = class_counts(&life.dataset);
        let total: usize = counts.iter().sum();
        let reference: usize = crate::dataset::REFERENCE_CLASS_COUNTS
            .iter()
            .map(|c| c.1)
            .sum();
        for (&(name, expected), &got) in crate::dataset::REFERENCE_CLASS_COUNTS.iter().zip(&counts)
        {
            let want = expected as f64 / reference as f64;
            let share = got as f64 / total as f64;
            assert!(
                (share - want).abs() / want < 0.10,
                "{name}: {share} vs {want}"
            );
        }
    }

    #[test]
    fn onset_delays_class() {
        let mut cfg = curve_config(2);
        cfg.days = 21;
        let life = generate_lifelog(&cfg).unwrap();
        let late = cfg.classes.iter().find(|c| c.first_day == 14).unwrap();
        let first = life
            .dataset
            .records()
            .iter()
            .find(|r| r.label.as_deref() == Some(late.label.as_str()))
            .unwrap();
        assert!(first.timestamp.date() >= cfg.start_date + chrono::Duration::days(14));
    }

    #[test]
    fn writes_manifest_and_images() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = one_class(120);
        cfg.days = 2;
        let life = generate_lifelog(&cfg).unwrap();
        write_lifelog(&life, dir.path(), true).unwrap();
        let loaded = crate::dataset::load_manifest(&dir.path().join("manifest.tsv")).unwrap();
        assert_eq!(loaded, life.dataset);
        let source = crate::pixel::DirectoryImages::new(dir.path());
        let r = &loaded.records()[3];
        assert_eq!(source.load(r).unwrap(), life.images.render(&r.id).unwrap());
    }

    #[test]
    fn largest_remainder() {
        assert_eq!(apportion_weights(10, &[1.0, 1.0, 1.0]), vec![4, 3, 3]);
        assert_eq!(apportion_weights(7, &[0.5, 0.5]).iter().sum::<usize>(), 7);
    }
}
