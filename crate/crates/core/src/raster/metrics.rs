use super::{LabelMask, LandCover, Result, NUM_CLASSES};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Rows are ground truth, columns prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn from_masks(pred: &LabelMask, gt: &LabelMask) -> Result<Self> {
        pred.same_size(gt)?;
        let mut counts = [[0u64; NUM_CLASSES]; NUM_CLASSES];
        for (&p, &g) in pred.labels().iter().zip(gt.labels()) {
            counts[g as usize][p as usize] += 1;
        }
        Ok(Self { counts })
    }

    pub fn true_positive(&self, class: usize) -> u64 {
        self.counts[class][class]
    }

    pub fn false_positive(&self, class: usize) -> u64 {
        (0..NUM_CLASSES)
            .filter(|&g| g != class)
            .map(|g| self.counts[g][class])
            .sum()
    }

    pub fn false_negative(&self, class: usize) -> u64 {
        (0..NUM_CLASSES)
            .filter(|&p| p != class)
            .map(|p| self.counts[class][p])
            .sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// Overall accuracy, per-class IoU/F1 and their means.
///
/// Classes that appear in neither mask have no entry in the per-class maps
/// and do not contribute to the means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegScores {
    pub overall_accuracy: f64,
    pub per_class_iou: BTreeMap<LandCover, f64>,
    pub per_class_f1: BTreeMap<LandCover, f64>,
    pub mean_iou: f64,
    pub mean_f1: f64,
}

pub fn segmentation_metrics(pred: &LabelMask, gt: &LabelMask) -> Result<SegScores> {
    let cm = ConfusionMatrix::from_masks(pred, gt)?;
    let total = cm.total();
    let correct: u64 = (0..NUM_CLASSES).map(|c| cm.true_positive(c)).sum();
    let overall_accuracy = if total == 0 {
        0.0
    } else {
        correct as f64 / total as f64
    };

    let mut per_class_iou = BTreeMap::new();
    let mut per_class_f1 = BTreeMap::new();
    for class in 0..NUM_CLASSES {
        let tp = cm.true_positive(class);
        let fp = cm.false_positive(class);
        let fn_ = cm.false_negative(class);
        // tp + fn = gt pixels, tp + fp = predicted pixels
        if tp + fp + fn_ == 0 {
            continue;
        }
        let lc = LandCover::ALL[class];
        per_class_iou.insert(lc, tp as f64 / (tp + fp + fn_) as f64);
        per_class_f1.insert(lc, 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64);
    }
    let mean = |m: &BTreeMap<LandCover, f64>| {
        if m.is_empty() {
            0.0
        } else {
            m.values().sum::<f64>() / m.len() as f64
        }
    };
    Ok(SegScores {
        overall_accuracy,
        mean_iou: mean(&per_class_iou),
        mean_f1: mean(&per_class_f1),
        per_class_iou,
        per_class_f1,
    })
}
