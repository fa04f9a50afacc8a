//! Pure decision logic for dataset curation: local image criteria, parsing of
//! vision-language-model answers, and Wikidata date conversion. The HTTP
//! clients and image decoding live in the `lifespan` crate.

use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct CurationCriteria {
    pub min_width: u32,
    pub min_height: u32,
    pub require_color: bool,
    pub require_photograph: bool,
    /// Mean per-pixel channel spread (8-bit scale) below which an image is grayscale.
    pub grayscale_threshold: f64,
    /// Side length of the square downsample used for the color check.
    pub color_sample_size: u32,
    /// Minimum Wikidata time precision accepted for death dates (11 = day).
    pub min_date_precision: u8,
}

impl Default for CurationCriteria {
    fn default() -> Self {
        Self {
            min_width: 200,
            min_height: 200,
            require_color: true,
            require_photograph: true,
            grayscale_threshold: 2.0,
            color_sample_size: 64,
            min_date_precision: PRECISION_DAY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum RejectReason {
    TooSmall,
    Grayscale,
    NotPhotograph,
    /// The photograph check gave no usable answer after retries.
    PhotoUnverified,
    ImageUnavailable,
    NoPreciseDeathDate,
    /// Dates violate `birth < photo <= death` after the precise death date is applied.
    InvalidRecord,
}

/// Outcome for one input sample. `accepted()` is true exactly when there are
/// no rejection reasons.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CurationDecision {
    id: String,
    accepted: bool,
    reasons: Vec<RejectReason>,
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Option::is_none"))]
    vlm_raw_response: Option<String>,
}

impl CurationDecision {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            accepted: true,
            reasons: Vec::new(),
            vlm_raw_response: None,
        }
    }

    pub fn reject(&mut self, reason: RejectReason) {
        if !self.reasons.contains(&reason) {
            self.reasons.push(reason);
        }
        self.accepted = false;
    }

    pub fn set_vlm_raw_response(&mut self, raw: Option<String>) {
        self.vlm_raw_response = raw;
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn accepted(&self) -> bool {
        self.accepted
    }

    pub fn reasons(&self) -> &[RejectReason] {
        &self.reasons
    }

    pub fn vlm_raw_response(&self) -> Option<&str> {
        self.vlm_raw_response.as_deref()
    }
}

/// Mean over pixels of `max(r, g, b) - min(r, g, b)` for packed RGB8 data.
pub fn mean_channel_spread(rgb: &[u8]) -> f64 {
    let pixels = rgb.len() / 3;
    if pixels == 0 {
        return 0.0;
    }
    let total: u64 = rgb
        .chunks_exact(3)
        .map(|p| {
            let hi = p[0].max(p[1]).max(p[2]);
            let lo = p[0].min(p[1]).min(p[2]);
            (hi - lo) as u64
        })
        .sum();
    total as f64 / pixels as f64
}

/// Resolution and color checks. `sample_rgb` is the packed RGB8 downsample.
pub fn local_reasons(
    width: u32,
    height: u32,
    sample_rgb: &[u8],
    criteria: &CurationCriteria,
) -> Vec<RejectReason> {
    let mut reasons = Vec::new();
    if width < criteria.min_width || height < criteria.min_height {
        reasons.push(RejectReason::TooSmall);
    }
    if criteria.require_color && mean_channel_spread(sample_rgb) < criteria.grayscale_threshold {
        reasons.push(RejectReason::Grayscale);
    }
    reasons
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PhotoVerdict {
    Photograph,
    NotPhotograph,
    Unknown,
}

const NON_PHOTO_WORDS: &[&str] = &[
    "painting",
    "painted",
    "drawing",
    "drawn",
    "sketch",
    "sculpture",
    "statue",
    "bust",
    "illustration",
    "cartoon",
    "artwork",
    "engraving",
    "not a photo",
];

/// Maps a free-text model answer onto a verdict.
///
/// A leading "yes"/"no" decides; otherwise any non-photographic medium wins
/// over a mention of "photo"; anything else is `Unknown`.
pub fn parse_photo_answer(text: &str) -> PhotoVerdict {
    let lower = text.trim().to_lowercase();
    let first_word: String = lower
        .trim_start_matches(|c: char| !c.is_alphanumeric())
        .chars()
        .take_while(|c| c.is_alphabetic())
        .collect();
    match first_word.as_str() {
        "yes" => return PhotoVerdict::Photograph,
        "no" => return PhotoVerdict::NotPhotograph,
        _ => {}
    }
    if NON_PHOTO_WORDS.iter().any(|w| lower.contains(w)) {
        PhotoVerdict::NotPhotograph
    } else if lower.contains("photo") {
        PhotoVerdict::Photograph
    } else {
        PhotoVerdict::Unknown
    }
}

pub const PRECISION_YEAR: u8 = 9;
pub const PRECISION_MONTH: u8 = 10;
pub const PRECISION_DAY: u8 = 11;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DateError {
    #[error("malformed Wikidata time {0:?}")]
    Malformed(String),
    #[error("precision {got} is below the required {required}")]
    InsufficientPrecision { got: u8, required: u8 },
}

/// A Wikidata time value (`+YYYY-MM-DDT00:00:00Z`) with its precision code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WikidataTime {
    pub year: i64,
    pub month: u8,
    pub day: u8,
    pub precision: u8,
}

fn is_leap(year: i64) -> bool {
    (year % 4 == 0 && year % 100 != 0) || year % 400 == 0
}

fn days_in_month(year: i64, month: u8) -> u8 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if is_leap(year) => 29,
        2 => 28,
        _ => 0,
    }
}

/// 1-based day of the Gregorian year.
pub fn day_of_year(year: i64, month: u8, day: u8) -> u32 {
    (1..month).map(|m| days_in_month(year, m) as u32).sum::<u32>() + day as u32
}

/// `year + (day_of_year - 1) / 365.25`.
pub fn fractional_year(year: i64, month: u8, day: u8) -> f64 {
    year as f64 + (day_of_year(year, month, day) - 1) as f64 / 365.25
}

impl WikidataTime {
    /// Parses the `time` string of a Wikidata time value. Month and day may be
    /// `00` at coarse precision; they are read as 1.
    pub fn parse(time: &str, precision: u8) -> Result<Self, DateError> {
        let bad = || DateError::Malformed(time.into());
        let (sign, rest) = match time.as_bytes().first() {
            Some(b'+') => (1i64, &time[1..]),
            Some(b'-') => (-1i64, &time[1..]),
            _ => (1i64, time),
        };
        let date = rest.split('T').next().ok_or_else(bad)?;
        let mut parts = date.split('-');
        let year: i64 = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        let month: u8 = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        let day: u8 = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        if parts.next().is_some() || month > 12 {
            return Err(bad());
        }
        let year = sign * year;
        let month = month.max(1);
        let day = day.max(1);
        if day > days_in_month(year, month) {
            return Err(bad());
        }
        Ok(Self {
            year,
            month,
            day,
            precision,
        })
    }

    /// Fractional year, refusing values coarser than `min_precision`.
    pub fn to_fractional_year(&self, min_precision: u8) -> Result<f64, DateError> {
        if self.precision < min_precision {
            return Err(DateError::InsufficientPrecision {
                got: self.precision,
                required: min_precision,
            });
        }
        Ok(match self.precision {
            p if p >= PRECISION_DAY => fractional_year(self.year, self.month, self.day),
            PRECISION_MONTH => fractional_year(self.year, self.month, 1),
            _ => self.year as f64,
        })
    }
}
