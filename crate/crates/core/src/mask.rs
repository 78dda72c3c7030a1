//! Binary change masks and connected change regions.
//!
//! A change region is one connected component of changed (1) cells. Regions
//! are discovered by a row-major scan; each unvisited changed cell seeds an
//! iterative flood fill, so region order is the order of first encounter.

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;

use image::GrayImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary change raster, row-major, `1` marks a changed pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChangeMask {
    width: usize,
    height: usize,
    cells: Vec<u8>,
}

impl ChangeMask {
    pub fn new(width: usize, height: usize, cells: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!(
                "mask dimensions must be positive, got {width}x{height}"
            )));
        }
        if cells.len() != width * height {
            return Err(Error::invalid(format!(
                "mask of {width}x{height} needs {} cells, got {}",
                width * height,
                cells.len()
            )));
        }
        if let Some(bad) = cells.iter().find(|&&c| c > 1) {
            return Err(Error::invalid(format!("mask cell value {bad} is not 0 or 1")));
        }
        Ok(Self { width, height, cells })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![0; width * height])
    }

    /// Builds a mask from rows of 0/1 values. All rows must have equal length.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != width) {
            return Err(Error::invalid("ragged mask rows"));
        }
        let cells = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Self::new(width, height, cells)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.cells[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.cells[row * self.width + col] = u8::from(value);
    }

    /// Number of changed cells.
    pub fn population(&self) -> usize {
        self.cells.iter().filter(|&&c| c == 1).count()
    }

    pub fn is_empty(&self) -> bool {
        self.population() == 0
    }

    /// Returns a copy surrounded by `border` rows/columns of zeros.
    pub fn padded(&self, border: usize) -> Self {
        let width = self.width + 2 * border;
        let height = self.height + 2 * border;
        let mut cells = vec![0; width * height];
        for row in 0..self.height {
            let src = &self.cells[row * self.width..(row + 1) * self.width];
            let start = (row + border) * width + border;
            cells[start..start + self.width].copy_from_slice(src);
        }
        Self { width, height, cells }
    }

    /// Renders the mask as an 8-bit image with changed cells at 255.
    pub fn to_image(&self) -> GrayImage {
        GrayImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            image::Luma([self.get(y as usize, x as usize) * 255])
        })
    }
}

/// Neighbourhood used when joining changed cells into regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Connectivity {
    #[serde(rename = "4")]
    Four,
    #[default]
    #[serde(rename = "8")]
    Eight,
}

impl Connectivity {
    pub fn from_number(n: u32) -> Result<Self> {
        match n {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            other => Err(Error::invalid(format!("connectivity must be 4 or 8, got {other}"))),
        }
    }

    pub fn as_number(self) -> u32 {
        match self {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        }
    }

    fn offsets(self) -> &'static [(isize, isize)] {
        const FOUR: [(isize, isize); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];
        const EIGHT: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];
        match self {
            Connectivity::Four => &FOUR,
            Connectivity::Eight => &EIGHT,
        }
    }
}

impl fmt::Display for Connectivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_number())
    }
}

/// Inclusive bounding box of a region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_row: usize,
    pub min_col: usize,
    pub max_row: usize,
    pub max_col: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RegionStats {
    pub region_count: usize,
    pub areas: Vec<usize>,
    pub bboxes: Vec<BoundingBox>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionOptions {
    pub connectivity: Connectivity,
    /// Regions with fewer pixels are discarded. `0` and `1` keep everything.
    pub min_area: usize,
}

impl Default for RegionOptions {
    fn default() -> Self {
        Self {
            connectivity: Connectivity::Eight,
            min_area: 0,
        }
    }
}

/// Thresholds an 8-bit raster: a cell is changed iff its value is strictly
/// greater than `threshold`.
pub fn binarize(raster: &GrayImage, threshold: u8) -> Result<ChangeMask> {
    let (width, height) = raster.dimensions();
    if width == 0 || height == 0 {
        return Err(Error::invalid("cannot binarize an empty raster"));
    }
    let cells = raster.as_raw().iter().map(|&v| u8::from(v > threshold)).collect();
    ChangeMask::new(width as usize, height as usize, cells)
}

/// Decodes a mask image from disk (any channel layout is reduced to luma).
pub fn load_mask(path: &Path, threshold: u8) -> Result<ChangeMask> {
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    binarize(&img.to_luma8(), threshold)
}

pub fn count_regions(mask: &ChangeMask, connectivity: Connectivity) -> RegionStats {
    count_regions_with(
        mask,
        &RegionOptions {
            connectivity,
            min_area: 0,
        },
    )
}

pub fn count_regions_with(mask: &ChangeMask, options: &RegionOptions) -> RegionStats {
    let (width, height) = (mask.width, mask.height);
    let offsets = options.connectivity.offsets();
    let mut visited = vec![false; width * height];
    let mut queue = VecDeque::new();
    let mut stats = RegionStats::default();

    for start in 0..width * height {
        if mask.cells[start] == 0 || visited[start] {
            continue;
        }
        visited[start] = true;
        queue.push_back(start);
        let mut area = 0;
        let mut bbox = BoundingBox {
            min_row: start / width,
            min_col: start % width,
            max_row: start / width,
            max_col: start % width,
        };

        while let Some(idx) = queue.pop_front() {
            let (row, col) = (idx / width, idx % width);
            area += 1;
            bbox.min_row = bbox.min_row.min(row);
            bbox.max_row = bbox.max_row.max(row);
            bbox.min_col = bbox.min_col.min(col);
            bbox.max_col = bbox.max_col.max(col);

            for &(dr, dc) in offsets {
                let (Some(r), Some(c)) = (row.checked_add_signed(dr), col.checked_add_signed(dc)) else {
                    continue;
                };
                if r >= height || c >= width {
                    continue;
                }
                let n = r * width + c;
                if mask.cells[n] == 1 && !visited[n] {
                    visited[n] = true;
                    queue.push_back(n);
                }
            }
        }

        if area >= options.min_area.max(1) {
            stats.areas.push(area);
            stats.bboxes.push(bbox);
        }
    }
    stats.region_count = stats.areas.len();
    stats
}

/// The four answer ranges of the region-counting question.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CountBucket {
    #[serde(rename = "LE5")]
    Le5,
    #[serde(rename = "B6_10")]
    B6To10,
    #[serde(rename = "B11_20")]
    B11To20,
    #[serde(rename = "GT20")]
    Gt20,
}

impl CountBucket {
    pub const ALL: [CountBucket; 4] = [
        CountBucket::Le5,
        CountBucket::B6To10,
        CountBucket::B11To20,
        CountBucket::Gt20,
    ];

    /// Answer phrase as worded in the counting question.
    pub fn phrase(self) -> &'static str {
        match self {
            CountBucket::Le5 => "less than or equal to five",
            CountBucket::B6To10 => "between six and ten",
            CountBucket::B11To20 => "between eleven and twenty",
            CountBucket::Gt20 => "more than twenty",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CountBucket::Le5 => "LE5",
            CountBucket::B6To10 => "B6_10",
            CountBucket::B11To20 => "B11_20",
            CountBucket::Gt20 => "GT20",
        }
    }
}

impl fmt::Display for CountBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub fn bucketize(count: usize) -> CountBucket {
    match count {
        0..=5 => CountBucket::Le5,
        6..=10 => CountBucket::B6To10,
        11..=20 => CountBucket::B11To20,
        _ => CountBucket::Gt20,
    }
}
