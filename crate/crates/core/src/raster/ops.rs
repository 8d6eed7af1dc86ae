use super::{
    count_components, ChangeMask, DetectionSet, LabelMask, LandCover, RasterError, Result,
    NUM_CLASSES,
};
use serde::{Deserialize, Serialize};

/// Detections scoring below this are ignored by [`count_objects`] unless the
/// caller supplies another threshold.
pub const DEFAULT_MIN_SCORE: f64 = 0.5;

pub fn count_class_pixels(mask: &LabelMask, class: usize) -> Result<u64> {
    if class >= NUM_CLASSES {
        return Err(RasterError::BadClass(class));
    }
    let class = class as u8;
    Ok(mask.labels().iter().filter(|&&l| l == class).count() as u64)
}

/// Share of changed pixels; an empty mask reports 0.
pub fn changed_fraction(mask: &ChangeMask) -> f64 {
    let total = mask.pixel_count();
    if total == 0 {
        return 0.0;
    }
    mask.changed_count() as f64 / total as f64
}

/// True iff the changed share strictly exceeds `min_fraction`.
pub fn whether_change(mask: &ChangeMask, min_fraction: f64) -> bool {
    changed_fraction(mask) > min_fraction
}

/// Relative change of a class' pixel count between two dates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "percent", rename_all = "snake_case")]
pub enum PercentChange {
    Percent(f64),
    /// Class absent before, present now.
    NewAppearance,
    /// Class present before, absent now.
    FullDisappearance,
}

impl PercentChange {
    /// Numeric view; `None` for the new-appearance sentinel.
    pub fn as_percent(&self) -> Option<f64> {
        match *self {
            PercentChange::Percent(p) => Some(p),
            PercentChange::FullDisappearance => Some(-100.0),
            PercentChange::NewAppearance => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeDelta {
    pub class: LandCover,
    pub pre_count: u64,
    pub cur_count: u64,
    pub change: PercentChange,
}

pub fn class_size_delta(pre: &LabelMask, cur: &LabelMask, class: usize) -> Result<SizeDelta> {
    pre.same_size(cur)?;
    let pre_count = count_class_pixels(pre, class)?;
    let cur_count = count_class_pixels(cur, class)?;
    let change = match (pre_count, cur_count) {
        (0, 0) => PercentChange::Percent(0.0),
        (0, _) => PercentChange::NewAppearance,
        (_, 0) => PercentChange::FullDisappearance,
        (p, c) => PercentChange::Percent((c as f64 - p as f64) / p as f64 * 100.0),
    };
    Ok(SizeDelta {
        class: LandCover::from_index(class)?,
        pre_count,
        cur_count,
        change,
    })
}

/// `counts[a][b]` = pixels labelled `a` before and `b` after.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl TransitionMatrix {
    pub fn get(&self, from: LandCover, to: LandCover) -> u64 {
        self.counts[from.index()][to.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn is_diagonal(&self) -> bool {
        (0..NUM_CLASSES)
            .all(|a| (0..NUM_CLASSES).all(|b| a == b || self.counts[a][b] == 0))
    }

    /// Off-diagonal cells with non-zero counts, largest first.
    pub fn conversions(&self) -> Vec<(LandCover, LandCover, u64)> {
        let mut out: Vec<_> = (0..NUM_CLASSES)
            .flat_map(|a| (0..NUM_CLASSES).map(move |b| (a, b)))
            .filter(|&(a, b)| a != b && self.counts[a][b] > 0)
            .map(|(a, b)| (LandCover::ALL[a], LandCover::ALL[b], self.counts[a][b]))
            .collect();
        out.sort_by(|x, y| y.2.cmp(&x.2).then(x.0.cmp(&y.0)).then(x.1.cmp(&y.1)));
        out
    }
}

pub fn class_transition_matrix(pre: &LabelMask, cur: &LabelMask) -> Result<TransitionMatrix> {
    pre.same_size(cur)?;
    let mut matrix = TransitionMatrix::default();
    for (&a, &b) in pre.labels().iter().zip(cur.labels()) {
        matrix.counts[a as usize][b as usize] += 1;
    }
    Ok(matrix)
}

/// Class with the most pixels; ties go to the lower class index.
pub fn dominant_class(mask: &LabelMask) -> Result<LandCover> {
    if mask.pixel_count() == 0 {
        return Err(RasterError::Empty);
    }
    let mut hist = [0u64; NUM_CLASSES];
    for &l in mask.labels() {
        hist[l as usize] += 1;
    }
    let mut best = 0;
    for class in 1..NUM_CLASSES {
        if hist[class] > hist[best] {
            best = class;
        }
    }
    Ok(LandCover::ALL[best])
}

/// What [`count_objects`] counts over.
#[derive(Debug, Clone, Copy)]
pub enum ObjectSource<'a> {
    Detections(&'a DetectionSet),
    Mask(&'a ChangeMask),
}

/// Counts detector hits (optionally filtered by class name) or the
/// 4-connected changed regions of a mask.
pub fn count_objects(source: ObjectSource<'_>, class: Option<&str>, min_score: f64) -> Result<u64> {
    match source {
        ObjectSource::Detections(set) => {
            let wanted = class.map(normalize_object_class);
            Ok(set
                .entries
                .iter()
                .filter(|d| d.score >= min_score)
                .filter(|d| {
                    wanted
                        .as_deref()
                        .is_none_or(|w| normalize_object_class(&d.class_name) == w)
                })
                .count() as u64)
        }
        ObjectSource::Mask(mask) => {
            if class.is_some() {
                return Err(RasterError::BadFilter);
            }
            Ok(count_components(mask))
        }
    }
}

/// Lowercases, drops separators and a trailing plural "s" so "Storage Tanks"
/// and "storage-tank" compare equal.
pub fn normalize_object_class(name: &str) -> String {
    let joined = name
        .trim()
        .to_ascii_lowercase()
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join("-");
    match joined.strip_suffix('s') {
        Some(stem) if !stem.ends_with('s') && !stem.is_empty() => stem.to_string(),
        _ => joined,
    }
}
