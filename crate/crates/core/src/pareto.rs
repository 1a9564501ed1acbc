//! Nondominated filtering, set coverage and hypervolume for minimization
//! problems in up to three objectives.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParetoError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("front is empty")]
    EmptyFront,
    #[error("point {point:?} exceeds reference point {reference:?}")]
    RefViolation { point: Vec<f64>, reference: Vec<f64> },
    #[error("reference front has zero hypervolume")]
    DegenerateReference,
    #[error("hypervolume is only implemented for 1 to 3 objectives, got {0}")]
    UnsupportedDimension(usize),
    #[error("non-finite objective value in {0:?}")]
    NonFinite(Vec<f64>),
}

/// Objective vector plus the run it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub values: Vec<f64>,
    pub run_id: usize,
}

impl Point {
    pub fn new(values: Vec<f64>) -> Self {
        Point { values, run_id: 0 }
    }

    pub fn with_run(values: Vec<f64>, run_id: usize) -> Self {
        Point { values, run_id }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

impl From<Vec<f64>> for Point {
    fn from(values: Vec<f64>) -> Self {
        Point::new(values)
    }
}

/// A set of mutually nondominated points.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Front {
    pub points: Vec<Point>,
}

impl Front {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.points.first().map(Point::dim)
    }
}

fn check_dims<'a>(points: impl IntoIterator<Item = &'a [f64]>) -> Result<Option<usize>, ParetoError> {
    let mut dim = None;
    for p in points {
        match dim {
            None => dim = Some(p.len()),
            Some(d) if d != p.len() => {
                return Err(ParetoError::DimensionMismatch { expected: d, found: p.len() })
            }
            _ => {}
        }
    }
    Ok(dim)
}

/// `a` is no worse than `b` everywhere and strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> Result<bool, ParetoError> {
    if a.len() != b.len() {
        return Err(ParetoError::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    Ok(dominates_unchecked(a, b))
}

fn dominates_unchecked(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        strict |= x < y;
    }
    strict
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Nondominated subset with duplicates collapsed (the lowest `run_id`
/// survives), sorted lexicographically by objective values.
pub fn nondominated(points: &[Point]) -> Result<Front, ParetoError> {
    check_dims(points.iter().map(|p| p.values.as_slice()))?;
    if let Some(p) = points.iter().find(|p| p.values.iter().any(|v| !v.is_finite())) {
        return Err(ParetoError::NonFinite(p.values.clone()));
    }
    let mut sorted: Vec<&Point> = points.iter().collect();
    sorted.sort_by(|a, b| lex_cmp(&a.values, &b.values).then(a.run_id.cmp(&b.run_id)));
    sorted.dedup_by(|b, a| lex_cmp(&a.values, &b.values).is_eq());
    // after lexicographic sorting only earlier points can dominate later ones
    let mut kept: Vec<&Point> = Vec::new();
    for p in sorted {
        if !kept.iter().any(|q| dominates_unchecked(&q.values, &p.values)) {
            kept.push(p);
        }
    }
    Ok(Front {
        points: kept.into_iter().cloned().collect(),
    })
}

/// Fraction of `b` dominated by at least one point of `a`.
pub fn c_metric(a: &[Point], b: &[Point]) -> Result<f64, ParetoError> {
    if b.is_empty() {
        return Err(ParetoError::EmptyFront);
    }
    check_dims(a.iter().chain(b).map(|p| p.values.as_slice()))?;
    let covered = b
        .iter()
        .filter(|q| a.iter().any(|p| dominates_unchecked(&p.values, &q.values)))
        .count();
    Ok(covered as f64 / b.len() as f64)
}

/// Worst value per objective over `points`, times `scale`.
pub fn reference_point(points: &[Point], scale: f64) -> Result<Vec<f64>, ParetoError> {
    let dim = check_dims(points.iter().map(|p| p.values.as_slice()))?.ok_or(ParetoError::EmptyFront)?;
    Ok((0..dim)
        .map(|d| points.iter().map(|p| p.values[d]).fold(f64::NEG_INFINITY, f64::max) * scale)
        .collect())
}

fn hv2(points: &mut [[f64; 2]], reference: [f64; 2]) -> f64 {
    points.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut volume = 0.0;
    let mut ceiling = reference[1];
    for p in points.iter() {
        if p[1] < ceiling {
            volume += (reference[0] - p[0]) * (ceiling - p[1]);
            ceiling = p[1];
        }
    }
    volume
}

fn hv3(points: &[[f64; 3]], reference: [f64; 3]) -> f64 {
    let mut order: Vec<&[f64; 3]> = points.iter().collect();
    order.sort_by(|a, b| a[2].total_cmp(&b[2]));
    let mut volume = 0.0;
    let mut slab: Vec<[f64; 2]> = Vec::with_capacity(order.len());
    for (k, p) in order.iter().enumerate() {
        slab.push([p[0], p[1]]);
        let next = order.get(k + 1).map_or(reference[2], |q| q[2]);
        let depth = next - p[2];
        if depth > 0.0 {
            volume += hv2(&mut slab.clone(), [reference[0], reference[1]]) * depth;
        }
    }
    volume
}

/// Measure of the union of boxes `[p, reference]` over the front.
pub fn hypervolume(front: &[Point], reference: &[f64]) -> Result<f64, ParetoError> {
    let dim = reference.len();
    check_dims(std::iter::once(reference).chain(front.iter().map(|p| p.values.as_slice())))?;
    for p in front {
        if p.values.iter().zip(reference).any(|(v, r)| v > r || !v.is_finite()) {
            return Err(ParetoError::RefViolation {
                point: p.values.clone(),
                reference: reference.to_vec(),
            });
        }
    }
    if front.is_empty() {
        return Ok(0.0);
    }
    Ok(match dim {
        1 => front.iter().map(|p| reference[0] - p.values[0]).fold(0.0, f64::max),
        2 => {
            let mut pts: Vec<[f64; 2]> = front.iter().map(|p| [p.values[0], p.values[1]]).collect();
            hv2(&mut pts, [reference[0], reference[1]])
        }
        3 => {
            let pts: Vec<[f64; 3]> = front.iter().map(|p| [p.values[0], p.values[1], p.values[2]]).collect();
            hv3(&pts, [reference[0], reference[1], reference[2]])
        }
        d => return Err(ParetoError::UnsupportedDimension(d)),
    })
}

/// Hypervolume of `obtained` relative to that of `reference_front`. Not
/// clamped: it exceeds 1 whenever `obtained` covers more space.
pub fn hvr(obtained: &[Point], reference_front: &[Point], reference: &[f64]) -> Result<f64, ParetoError> {
    let denom = hypervolume(reference_front, reference)?;
    if denom <= 0.0 {
        return Err(ParetoError::DegenerateReference);
    }
    Ok(hypervolume(obtained, reference)? / denom)
}
