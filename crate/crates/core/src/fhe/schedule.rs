use crate::error::{Error, Result};

/// Uniformly sampled keyframes over frames `1..=frame_count`.
///
/// Keyframes are `1, 1+h, 1+2h, ...` and the final frame is always promoted
/// to a keyframe so that every frame lies in a bounding interval.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyframeSchedule {
    frame_count: usize,
    interval: usize,
    keyframes: Vec<usize>,
}

impl KeyframeSchedule {
    pub fn new(frame_count: usize, interval: usize) -> Result<Self> {
        if interval < 1 {
            return Err(Error::InvalidInterval(interval));
        }
        if frame_count < 2 {
            return Err(Error::InvalidFrameCount(frame_count));
        }
        let mut keyframes: Vec<usize> = (1..=frame_count).step_by(interval).collect();
        if keyframes.last() != Some(&frame_count) {
            keyframes.push(frame_count);
        }
        Ok(Self { frame_count, interval, keyframes })
    }

    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    pub fn interval(&self) -> usize {
        self.interval
    }

    pub fn keyframes(&self) -> &[usize] {
        &self.keyframes
    }

    pub fn is_keyframe(&self, t: usize) -> bool {
        self.keyframes.binary_search(&t).is_ok()
    }

    /// Adjacent keyframe pairs `(k1, k2)`.
    pub fn intervals(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.keyframes.windows(2).map(|w| (w[0], w[1]))
    }

    /// The interval `(k1, k2)` with `k1 <= t < k2`; the final frame belongs to
    /// the last interval.
    pub fn interval_of(&self, t: usize) -> Option<(usize, usize)> {
        if t < 1 || t > self.frame_count {
            return None;
        }
        let i = match self.keyframes.binary_search(&t) {
            Ok(i) => i.min(self.keyframes.len() - 2),
            Err(i) => i - 1,
        };
        Some((self.keyframes[i], self.keyframes[i + 1]))
    }

    /// Correspondence pairs `(src, dst)` graph estimation reads: `(k1, k2)`
    /// per interval and `(k1, t)` per non-keyframe.
    pub fn required_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.frame_count);
        for (k1, k2) in self.intervals() {
            out.push((k1, k2));
            out.extend((k1 + 1..k2).map(|t| (k1, t)));
        }
        out
    }
}
