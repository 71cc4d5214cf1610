use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{FeatureVector, FEATURE_COUNT};

/// Bounded history of feature rows; the oldest row is dropped on overflow.
#[derive(Debug, Clone)]
pub struct FeatureBuffer {
    rows: VecDeque<FeatureVector>,
    capacity: usize,
}

impl FeatureBuffer {
    pub fn new(capacity: usize) -> Self {
        let capacity = capacity.max(1);
        Self { rows: VecDeque::with_capacity(capacity), capacity }
    }

    pub fn push(&mut self, row: FeatureVector) {
        if self.rows.len() == self.capacity {
            self.rows.pop_front();
        }
        self.rows.push_back(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn latest(&self) -> Option<&FeatureVector> {
        self.rows.back()
    }

    pub fn iter(&self) -> impl Iterator<Item = &FeatureVector> {
        self.rows.iter()
    }
}

/// Row-major `rows x cols` observation window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl ObservationMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// The last `window` rows, left-padded with zero rows when the history is
/// shorter. The final row is always the latest feature vector.
pub fn observation_matrix(buffer: &FeatureBuffer, window: usize) -> ObservationMatrix {
    let window = window.max(1);
    let have = buffer.len().min(window);
    let mut data = vec![0.0; (window - have) * FEATURE_COUNT];
    data.reserve(have * FEATURE_COUNT);
    for row in buffer.rows.iter().skip(buffer.len() - have) {
        data.extend_from_slice(row);
    }
    ObservationMatrix { rows: window, cols: FEATURE_COUNT, data }
}
