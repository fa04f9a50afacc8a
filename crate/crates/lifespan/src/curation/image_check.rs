//! Local image checks: resolution and presence of color.

use image::imageops::FilterType;
use lifespan_core::curation::{local_reasons, CurationCriteria, RejectReason};

#[derive(Debug, Clone, PartialEq)]
pub struct ImageCheck {
    pub width: u32,
    pub height: u32,
    pub channel_spread: f64,
    pub reasons: Vec<RejectReason>,
}

/// Decodes `bytes` and applies the resolution and color criteria on a
/// square downsample. Undecodable input yields `ImageUnavailable`.
pub fn check_image_local(bytes: &[u8], criteria: &CurationCriteria) -> ImageCheck {
    let Ok(img) = image::load_from_memory(bytes) else {
        return ImageCheck {
            width: 0,
            height: 0,
            channel_spread: 0.0,
            reasons: vec![RejectReason::ImageUnavailable],
        };
    };
    let side = criteria.color_sample_size.max(1);
    let sample = img.resize_exact(side, side, FilterType::Triangle).to_rgb8();
    let spread = lifespan_core::curation::mean_channel_spread(sample.as_raw());
    ImageCheck {
        width: img.width(),
        height: img.height(),
        channel_spread: spread,
        reasons: local_reasons(img.width(), img.height(), sample.as_raw(), criteria),
    }
}
