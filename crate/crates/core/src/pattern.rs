//! Dispense patterns: polygonal chains with one feed rate per segment.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PatternError {
    #[error("a pattern needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("pattern has {points} points but {feeds} feeds; expected {expected} feeds")]
    FeedCountMismatch {
        points: usize,
        feeds: usize,
        expected: usize,
    },
    #[error("point {index} has a non-finite coordinate")]
    NonFinitePoint { index: usize },
    #[error("feed of segment {index} is {value}; feeds must be finite and non-negative")]
    InvalidFeed { index: usize, value: f64 },
    #[error("segment {index} has zero length but non-zero feed {feed}")]
    DegenerateSegment { index: usize, feed: f64 },
    #[error("cannot pad a {current}-segment pattern down to {target} segments")]
    TargetTooSmall { current: usize, target: usize },
    #[error("pattern has {0} segments; at most 65535 are supported")]
    TooManySegments(usize),
}

/// A point in continuous grid coordinates (x to the right, y downwards).
pub type Point = [f64; 2];

/// Polygonal chain along which material is dispensed.
///
/// `feeds[s]` is the areal density deposited over the width-1 rectangle
/// around segment `points[s] -> points[s + 1]`, so the segment carries a
/// total mass of `feeds[s] * length`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPattern", into = "RawPattern")]
pub struct DispensePattern {
    points: Vec<Point>,
    feeds: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPattern {
    points: Vec<Point>,
    feeds: Vec<f64>,
}

impl TryFrom<RawPattern> for DispensePattern {
    type Error = PatternError;

    fn try_from(raw: RawPattern) -> Result<Self, Self::Error> {
        DispensePattern::new(raw.points, raw.feeds)
    }
}

impl From<DispensePattern> for RawPattern {
    fn from(p: DispensePattern) -> Self {
        RawPattern {
            points: p.points,
            feeds: p.feeds,
        }
    }
}

impl DispensePattern {
    pub fn new(points: Vec<Point>, feeds: Vec<f64>) -> Result<Self, PatternError> {
        if points.len() < 2 {
            return Err(PatternError::TooFewPoints(points.len()));
        }
        if feeds.len() != points.len() - 1 {
            return Err(PatternError::FeedCountMismatch {
                points: points.len(),
                feeds: feeds.len(),
                expected: points.len() - 1,
            });
        }
        if let Some(index) = points
            .iter()
            .position(|p| !(p[0].is_finite() && p[1].is_finite()))
        {
            return Err(PatternError::NonFinitePoint { index });
        }
        for (index, &feed) in feeds.iter().enumerate() {
            if !(feed.is_finite() && feed >= 0.0) {
                return Err(PatternError::InvalidFeed { index, value: feed });
            }
            if points[index] == points[index + 1] && feed != 0.0 {
                return Err(PatternError::DegenerateSegment { index, feed });
            }
        }
        Ok(Self { points, feeds })
    }

    /// Single straight line: the five-parameter case.
    pub fn line(start: Point, end: Point, feed: f64) -> Result<Self, PatternError> {
        Self::new(vec![start, end], vec![feed])
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn feeds(&self) -> &[f64] {
        &self.feeds
    }

    pub fn segment_count(&self) -> usize {
        self.feeds.len()
    }

    /// Iterates `(start, end, feed)` for every segment.
    pub fn segments(&self) -> impl Iterator<Item = (Point, Point, f64)> + '_ {
        self.points
            .windows(2)
            .zip(&self.feeds)
            .map(|(w, &f)| (w[0], w[1], f))
    }

    /// Total dispensed mass, `sum(feed * length)`.
    pub fn total_mass(&self) -> f64 {
        self.segments()
            .map(|(a, b, f)| f * (b[0] - a[0]).hypot(b[1] - a[1]))
            .sum()
    }

    /// Same geometry with every feed multiplied by `factor`.
    pub fn with_scaled_feeds(&self, factor: f64) -> Result<Self, PatternError> {
        Self::new(
            self.points.clone(),
            self.feeds.iter().map(|f| f * factor).collect(),
        )
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            points: self.points.iter().map(|p| [p[0] + dx, p[1] + dy]).collect(),
            feeds: self.feeds.clone(),
        }
    }

    /// Mirror about the vertical line `x = axis`.
    pub fn mirrored_x(&self, axis: f64) -> Self {
        Self {
            points: self
                .points
                .iter()
                .map(|p| [2.0 * axis - p[0], p[1]])
                .collect(),
            feeds: self.feeds.clone(),
        }
    }

    /// Appends zero-feed, zero-length segments at the last point until the
    /// pattern has `target_segments` segments. Rasterization is unchanged.
    pub fn padded(&self, target_segments: usize) -> Result<Self, PatternError> {
        let current = self.segment_count();
        if target_segments < current {
            return Err(PatternError::TargetTooSmall {
                current,
                target: target_segments,
            });
        }
        let mut out = self.clone();
        let last = *self.points.last().expect("validated pattern has points");
        for _ in current..target_segments {
            out.points.push(last);
            out.feeds.push(0.0);
        }
        Ok(out)
    }
}

/// Free-function form of [`DispensePattern::padded`].
pub fn pad_pattern(
    pattern: &DispensePattern,
    target_segments: usize,
) -> Result<DispensePattern, PatternError> {
    pattern.padded(target_segments)
}
