use crate::error::{Error, Result};

/// A point cloud with optional radiometry and ground-truth labels.
///
/// Colors and intensity live in `[0, 1]`. Labels are class ids in
/// `[0, num_classes)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub positions: Vec<[f64; 3]>,
    pub colors: Option<Vec<[f64; 3]>>,
    pub intensity: Option<Vec<f64>>,
    pub labels: Option<Vec<u32>>,
    pub num_classes: u32,
}

impl PointCloud {
    pub fn from_positions(positions: Vec<[f64; 3]>) -> Self {
        PointCloud {
            positions,
            colors: None,
            intensity: None,
            labels: None,
            num_classes: 0,
        }
    }

    pub fn with_labels(mut self, labels: Vec<u32>, num_classes: u32) -> Self {
        self.labels = Some(labels);
        self.num_classes = num_classes;
        self
    }

    pub fn with_colors(mut self, colors: Vec<[f64; 3]>) -> Self {
        self.colors = Some(colors);
        self
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Checks array lengths, coordinate finiteness and label range.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if n == 0 {
            return Err(Error::invalid("point cloud is empty"));
        }
        if let Some(i) = self
            .positions
            .iter()
            .position(|p| !p.iter().all(|c| c.is_finite()))
        {
            return Err(Error::invalid(format!("point {i} has a non-finite coordinate")));
        }
        if let Some(c) = &self.colors {
            if c.len() != n {
                return Err(Error::invalid(format!("{} colors for {n} points", c.len())));
            }
        }
        if let Some(v) = &self.intensity {
            if v.len() != n {
                return Err(Error::invalid(format!("{} intensities for {n} points", v.len())));
            }
        }
        if let Some(labels) = &self.labels {
            if labels.len() != n {
                return Err(Error::invalid(format!("{} labels for {n} points", labels.len())));
            }
            if let Some(&l) = labels.iter().find(|&&l| l >= self.num_classes) {
                return Err(Error::invalid(format!(
                    "label {l} out of range for {} classes",
                    self.num_classes
                )));
            }
        }
        Ok(())
    }

    pub fn bounding_box(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.positions {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        (lo, hi)
    }

    /// Returns the sub-cloud at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            positions: indices.iter().map(|&i| self.positions[i]).collect(),
            colors: self
                .colors
                .as_ref()
                .map(|c| indices.iter().map(|&i| c[i]).collect()),
            intensity: self
                .intensity
                .as_ref()
                .map(|v| indices.iter().map(|&i| v[i]).collect()),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
            num_classes: self.num_classes,
        }
    }
}
