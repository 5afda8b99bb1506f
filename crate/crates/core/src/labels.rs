use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Per-pixel integer map (semantic ids, instance ids, ...), row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelMap {
    height: usize,
    width: usize,
    data: Vec<u32>,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, data: Vec<u32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::config("label map extents", format!("{height}x{width} must be non-empty")));
        }
        if data.len() != height * width {
            return Err(Error::config(
                "label map data",
                format!("{} values for a {height}x{width} map", data.len()),
            ));
        }
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, value: u32) -> Self {
        assert!(height > 0 && width > 0, "label map extents must be non-empty");
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn extents(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[u32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u32] {
        &mut self.data
    }

    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: u32) {
        self.data[row * self.width + col] = v;
    }

    pub fn expect_extents(&self, other: (usize, usize), context: &'static str) -> Result<()> {
        if self.extents() == other {
            Ok(())
        } else {
            Err(Error::Extent {
                context,
                expected: other,
                actual: self.extents(),
            })
        }
    }

    /// Pixel count per id.
    pub fn histogram(&self) -> BTreeMap<u32, usize> {
        let mut h = BTreeMap::new();
        for &v in &self.data {
            *h.entry(v).or_insert(0) += 1;
        }
        h
    }

    /// Nearest-neighbor resize: output pixel `o` reads input `floor(o · in / out)`.
    pub fn resize_nearest(&self, height: usize, width: usize) -> LabelMap {
        if (height, width) == self.extents() {
            return self.clone();
        }
        let rows: Vec<usize> = (0..height).map(|o| o * self.height / height).collect();
        let cols: Vec<usize> = (0..width).map(|o| o * self.width / width).collect();
        let mut data = Vec::with_capacity(height * width);
        for &r in &rows {
            data.extend(cols.iter().map(|&c| self.data[r * self.width + c]));
        }
        LabelMap { height, width, data }
    }
}

/// Per-pixel boolean mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(height: usize, width: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != height * width || height == 0 || width == 0 {
            return Err(Error::config("mask", format!("{} values for a {height}x{width} mask", data.len())));
        }
        Ok(Self { height, width, data })
    }

    pub fn empty(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![false; height * width],
        }
    }

    pub fn from_fn(map: &LabelMap, f: impl Fn(u32) -> bool) -> Self {
        Self {
            height: map.height,
            width: map.width,
            data: map.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn extents(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, idx: usize) -> bool {
        self.data[idx]
    }

    pub fn set(&mut self, idx: usize, v: bool) {
        self.data[idx] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn indices(&self) -> impl Iterator<Item = u32> + '_ {
        self.data.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i as u32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_downsample_takes_top_left_of_each_block() {
        let m = LabelMap::new(2, 4, vec![1, 2, 3, 4, 5, 6, 7, 8]).unwrap();
        let d = m.resize_nearest(1, 2);
        assert_eq!(d.data(), &[1, 3]);
        let u = d.resize_nearest(2, 4);
        assert_eq!(u.data(), &[1, 1, 3, 3, 1, 1, 3, 3]);
    }

    #[test]
    fn rejects_bad_length() {
        assert!(LabelMap::new(2, 2, vec![0; 3]).is_err());
    }
}
