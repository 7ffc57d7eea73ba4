use image::RgbImage;

use crate::dataset::BBox;
use crate::ope::Tracker;
use crate::Result;

/// Returns the initialization box on every frame.
#[derive(Debug, Clone, Default)]
pub struct StaticTracker {
    bbox: Option<BBox>,
}

impl Tracker for StaticTracker {
    fn name(&self) -> &str {
        "static"
    }

    fn init(&mut self, _image: &RgbImage, bbox: BBox) -> Result<()> {
        self.bbox = Some(bbox);
        Ok(())
    }

    fn update(&mut self, _image: &RgbImage) -> BBox {
        self.bbox.expect("update before init")
    }
}
