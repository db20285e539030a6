use chrono::NaiveDate;

use super::{ClassSpec, Palette, SynthConfig, Window, EVERY_DAY, WEEKDAYS};
use crate::dataset::REFERENCE_CLASS_COUNTS;

const MON: u8 = 1;
const TUE: u8 = 1 << 1;
const WED: u8 = 1 << 2;
const THU: u8 = 1 << 3;
const SAT: u8 = 1 << 5;
const SUN: u8 = 1 << 6;
const WEEKEND: u8 = SAT | SUN;

const GRAY: Palette = Palette::Flat([128, 128, 128]);
const BLUE: [u8; 3] = [30, 60, 200];
const WHITE: [u8; 3] = [240, 240, 240];
const DARK: [u8; 3] = [20, 20, 20];
const MAGENTA: [u8; 3] = [200, 40, 160];

/// Classes told apart only by when they happen; they share one gray palette.
pub const METADATA_CLASSES: [&str; 9] = [
    "Driving",
    "Eating",
    "Family",
    "Presentation",
    "Meeting",
    "Biking",
    "Exercising",
    "Shopping",
    "Resting",
];

/// Classes with a distinctive look but no fixed time of day.
pub const PIXEL_CLASSES: [&str; 10] = [
    "Chores",
    "Cooking",
    "Reading",
    "Dogs",
    "Working",
    "Chatting",
    "TV",
    "Cleaning",
    "Socializing",
    "Hygiene",
];

fn windows_of(label: &str) -> Vec<Window> {
    let w = Window::new;
    match label {
        "Driving" => vec![w(WEEKDAYS, (7, 30), (7, 55))],
        "Eating" => vec![
            w(WEEKDAYS, (8, 1), (8, 31)),
            w(WEEKEND, (7, 30), (7, 54)),
            w(EVERY_DAY, (12, 0), (12, 55)),
        ],
        "Family" => vec![
            w(WEEKDAYS, (17, 45), (19, 30)),
            w(WEEKEND, (15, 20), (19, 30)),
        ],
        "Presentation" => vec![w(MON, (10, 0), (11, 45))],
        "Meeting" => vec![w(TUE | THU, (14, 0), (15, 22))],
        "Biking" => vec![w(SAT, (8, 0), (9, 27))],
        "Exercising" => vec![w(WED, (17, 0), (17, 39)), w(SUN, (8, 0), (8, 23))],
        "Shopping" => vec![w(SAT, (10, 0), (11, 15))],
        "Resting" => vec![w(SUN, (13, 30), (13, 43))],
        _ => Vec::new(),
    }
}

fn palette_of(label: &str) -> Palette {
    match label {
        "Chores" => Palette::Flat([200, 120, 40]),
        "Cooking" => Palette::Flat([230, 200, 40]),
        "Reading" => Palette::Flat([40, 160, 60]),
        "Dogs" => Palette::Flat([120, 70, 30]),
        "Cleaning" => Palette::Flat([60, 200, 220]),
        "Hygiene" => Palette::Flat([230, 150, 190]),
        // Two pairs with identical histograms that differ only in layout.
        "Working" => Palette::Quadrants([BLUE, WHITE, WHITE, BLUE]),
        "Chatting" => Palette::Quadrants([WHITE, BLUE, BLUE, WHITE]),
        "TV" => Palette::Quadrants([DARK, MAGENTA, MAGENTA, DARK]),
        "Socializing" => Palette::Quadrants([MAGENTA, DARK, DARK, MAGENTA]),
        _ => GRAY,
    }
}

fn base(user: &str, days: u32, classes: Vec<ClassSpec>, seed: u64) -> SynthConfig {
    SynthConfig {
        user_id: user.into(),
        start_date: NaiveDate::from_ymd_opt(2024, 1, 1).expect("valid date"),
        days,
        capture_start: 7 * 60 + 30,
        capture_end: 19 * 60 + 30,
        interval_minutes: 1,
        image_size: 64,
        noise: 40,
        jitter_minutes: 3,
        episode_minutes: (10, 40),
        classes,
        seed,
    }
}

/// User A: the 19 daily activities over six weeks, one capture a minute
/// from 07:30 to 19:30, in roughly the reference class proportions.
/// Metadata classes follow weekly windows; pixel classes fill the rest.
pub fn standard_config(seed: u64) -> SynthConfig {
    let classes = REFERENCE_CLASS_COUNTS
        .iter()
        .map(|&(label, count)| {
            if METADATA_CLASSES.contains(&label) {
                ClassSpec::windowed(label, GRAY, windows_of(label))
            } else {
                ClassSpec::free(label, palette_of(label), count as f64)
            }
        })
        .collect();
    base("A", 42, classes, seed)
}

/// Eight weeks of user A in which several activities only begin after the
/// first fortnight.
pub fn curve_config(seed: u64) -> SynthConfig {
    let mut cfg = standard_config(seed);
    cfg.days = 56;
    for class in &mut cfg.classes {
        class.first_day = match class.label.as_str() {
            "Meeting" | "TV" => 14,
            "Dogs" | "Presentation" => 21,
            "Socializing" | "Biking" => 28,
            "Shopping" => 35,
            _ => 0,
        };
    }
    cfg
}

/// Every class is gray and owns fixed, unjittered windows, so the time of
/// capture determines the class and the pixels carry nothing.
pub fn metadata_only_config(seed: u64) -> SynthConfig {
    let w = Window::new;
    let classes = vec![
        ClassSpec::windowed(
            "Working",
            GRAY,
            vec![w(WEEKDAYS, (7, 30), (11, 0)), w(WEEKDAYS, (14, 0), (17, 0))],
        ),
        ClassSpec::windowed("Eating", GRAY, vec![w(EVERY_DAY, (11, 0), (12, 0))]),
        ClassSpec::windowed("Meeting", GRAY, vec![w(WEEKDAYS, (12, 0), (14, 0))]),
        ClassSpec::windowed("Family", GRAY, vec![w(EVERY_DAY, (17, 0), (19, 30))]),
        ClassSpec::windowed("Resting", GRAY, vec![w(WEEKEND, (7, 30), (11, 0))]),
        ClassSpec::windowed("Shopping", GRAY, vec![w(WEEKEND, (12, 0), (17, 0))]),
    ];
    let mut cfg = base("M", 14, classes, seed);
    cfg.jitter_minutes = 0;
    cfg
}

/// User B: two days with a different routine, some activities that look
/// different from user A's, and a `Walking` class user A never performs.
pub fn user_b_config(seed: u64) -> SynthConfig {
    let w = Window::new;
    let classes = vec![
        ClassSpec::free("Working", palette_of("Reading"), 50.0),
        ClassSpec::windowed(
            "Eating",
            GRAY,
            vec![
                w(EVERY_DAY, (13, 30), (14, 20)),
                w(EVERY_DAY, (18, 30), (19, 10)),
            ],
        ),
        ClassSpec::windowed("Family", GRAY, vec![w(EVERY_DAY, (7, 30), (8, 30))]),
        ClassSpec::free("Cooking", palette_of("Chores"), 8.0),
        ClassSpec::free("TV", palette_of("TV"), 8.0),
        ClassSpec::free("Hygiene", palette_of("Hygiene"), 5.0),
        ClassSpec::free("Chatting", palette_of("Chatting"), 6.0),
        ClassSpec::free("Reading", Palette::Flat(BLUE), 10.0),
        ClassSpec::windowed("Driving", GRAY, vec![w(EVERY_DAY, (8, 36), (9, 0))]),
        ClassSpec::windowed("Walking", GRAY, vec![w(EVERY_DAY, (17, 0), (17, 45))]),
    ];
    let mut cfg = base("B", 2, classes, seed);
    cfg.start_date = NaiveDate::from_ymd_opt(2024, 3, 5).expect("valid date");
    cfg
}
