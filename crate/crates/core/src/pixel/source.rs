use std::path::PathBuf;

use image::RgbImage;

use super::load_rgb;
use crate::dataset::ImageRecord;
use crate::error::Result;

/// Where record images come from.
pub trait ImageSource: Sync {
    fn load(&self, record: &ImageRecord) -> Result<RgbImage>;
}

/// Image files resolved against a dataset root directory.
#[derive(Debug, Clone)]
pub struct DirectoryImages {
    root: PathBuf,
}

impl DirectoryImages {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn path_of(&self, record: &ImageRecord) -> PathBuf {
        self.root.join(&record.path)
    }
}

impl ImageSource for DirectoryImages {
    fn load(&self, record: &ImageRecord) -> Result<RgbImage> {
        load_rgb(&self.path_of(record)).map_err(|e| match e {
            crate::Error::Image { message, .. } => crate::Error::Image {
                id: record.id.clone(),
                message,
            },
            other => other,
        })
    }
}
