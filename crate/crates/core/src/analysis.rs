//! Post-hoc studies over a Pareto archive: hypervolume, knee selection, variable/
//! objective correlations, and the edge/intensity weight sweep.

use crate::baselines::single_objective_minimize;
use crate::error::{Error, Result};
use crate::evolution::{ArchiveEntry, EvolutionConfig};
use crate::objectives::{ObjectiveVector, WeightPair};
use crate::problem::{CalibrationProblem, CalibrationVector, VARIABLE_NAMES};

/// Exact 2-D hypervolume dominated by `front` and bounded by `reference`.
pub fn hypervolume_2d(front: &[ObjectiveVector], reference: ObjectiveVector) -> Result<f64> {
    for p in front {
        if !(p.chamfer <= reference.chamfer && p.comp_cost <= reference.comp_cost) {
            return Err(Error::invalid(format!(
                "point {p:?} does not dominate the reference {reference:?}"
            )));
        }
    }
    let mut pts: Vec<[f64; 2]> = front.iter().map(|p| p.as_array()).collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut volume = 0.0;
    let mut ceiling = reference.comp_cost;
    for p in pts {
        if p[1] < ceiling {
            volume += (reference.chamfer - p[0]) * (ceiling - p[1]);
            ceiling = p[1];
        }
    }
    Ok(volume)
}

/// Optional acceptance caps applied before knee selection.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KneeCaps {
    pub max_chamfer: Option<f64>,
    pub max_cost: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KneeSelection {
    pub entry: ArchiveEntry,
    /// Position in the (capped) candidate list.
    pub index: usize,
    /// Perpendicular distance to the extreme chord in normalized objective space.
    pub distance: f64,
    pub normalized: [f64; 2],
}

const KNEE_TIE: f64 = 1e-12;

/// Picks the interior entry farthest from the chord joining the minimum-chamfer and
/// minimum-cost entries, after min-max normalizing both objectives. Ties go to the
/// lower chamfer.
pub fn select_knee(entries: &[ArchiveEntry], caps: KneeCaps) -> Result<KneeSelection> {
    let candidates: Vec<ArchiveEntry> = entries
        .iter()
        .copied()
        .filter(|e| caps.max_chamfer.is_none_or(|c| e.objectives.chamfer <= c))
        .filter(|e| caps.max_cost.is_none_or(|c| e.objectives.comp_cost <= c))
        .collect();
    if candidates.len() < 3 {
        return Err(Error::invalid(format!(
            "need >= 3 entries for knee selection, got {}",
            candidates.len()
        )));
    }
    let bounds = |f: fn(&ObjectiveVector) -> f64| {
        candidates
            .iter()
            .map(|e| f(&e.objectives))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    let (c_lo, c_hi) = bounds(|o| o.chamfer);
    let (k_lo, k_hi) = bounds(|o| o.comp_cost);
    let scale = |v: f64, lo: f64, hi: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
    let norm: Vec<[f64; 2]> = candidates
        .iter()
        .map(|e| {
            [
                scale(e.objectives.chamfer, c_lo, c_hi),
                scale(e.objectives.comp_cost, k_lo, k_hi),
            ]
        })
        .collect();

    let by = |key: fn(&ObjectiveVector) -> [f64; 2]| {
        (0..candidates.len())
            .min_by(|&a, &b| {
                let (ka, kb) = (key(&candidates[a].objectives), key(&candidates[b].objectives));
                ka[0].total_cmp(&kb[0]).then(ka[1].total_cmp(&kb[1])).then(a.cmp(&b))
            })
            .expect("non-empty")
    };
    let a = by(|o| [o.chamfer, o.comp_cost]);
    let b = by(|o| [o.comp_cost, o.chamfer]);
    let (pa, pb) = (norm[a], norm[b]);
    let chord = [pb[0] - pa[0], pb[1] - pa[1]];
    let len = chord[0].hypot(chord[1]);
    let distance = |p: [f64; 2]| {
        if len == 0.0 {
            0.0
        } else {
            (chord[0] * (p[1] - pa[1]) - chord[1] * (p[0] - pa[0])).abs() / len
        }
    };

    let mut best: Option<(usize, f64)> = None;
    for i in (0..candidates.len()).filter(|&i| i != a && i != b) {
        let d = distance(norm[i]);
        let better = match best {
            None => true,
            Some((j, bd)) => {
                d > bd + KNEE_TIE
                    || ((d - bd).abs() <= KNEE_TIE
                        && candidates[i].objectives.chamfer < candidates[j].objectives.chamfer)
            }
        };
        if better {
            best = Some((i, d));
        }
    }
    let (index, distance) = best.ok_or_else(|| Error::invalid("no interior entry for knee selection"))?;
    Ok(KneeSelection {
        entry: candidates[index],
        index,
        distance,
        normalized: norm[index],
    })
}

pub const CORRELATION_FLAG: f64 = 0.8;
pub const MIN_INNOVIZATION_ENTRIES: usize = 10;

/// Column names of the correlation matrix: the seven genes, then the two objectives.
pub const INNOVIZATION_COLUMNS: [&str; 9] = [
    VARIABLE_NAMES[0],
    VARIABLE_NAMES[1],
    VARIABLE_NAMES[2],
    VARIABLE_NAMES[3],
    VARIABLE_NAMES[4],
    VARIABLE_NAMES[5],
    VARIABLE_NAMES[6],
    "chamfer",
    "comp_cost",
];

#[derive(Debug, Clone, PartialEq)]
pub struct InnovizationReport {
    pub columns: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
    /// `(i, j, r)` with `i < j` and `|r| > 0.8`.
    pub flagged: Vec<(usize, usize, f64)>,
}

/// Pearson correlation, 0 when either column is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let constant = |c: &[f64]| c.iter().all(|v| *v == c[0]);
    if a.is_empty() || constant(a) || constant(b) {
        return 0.0;
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
}

pub fn innovization_report(entries: &[ArchiveEntry]) -> Result<InnovizationReport> {
    if entries.len() < MIN_INNOVIZATION_ENTRIES {
        return Err(Error::invalid(format!(
            "need >= {MIN_INNOVIZATION_ENTRIES} archive entries for correlations, got {}",
            entries.len()
        )));
    }
    let columns: Vec<Vec<f64>> = (0..9)
        .map(|c| {
            entries
                .iter()
                .map(|e| match c {
                    0..=6 => e.genome.0[c],
                    7 => e.objectives.chamfer,
                    _ => e.objectives.comp_cost,
                })
                .collect()
        })
        .collect();
    let k = columns.len();
    let mut matrix = vec![vec![0.0; k]; k];
    let mut flagged = Vec::new();
    for i in 0..k {
        matrix[i][i] = pearson(&columns[i], &columns[i]);
        for j in (i + 1)..k {
            let r = pearson(&columns[i], &columns[j]);
            matrix[i][j] = r;
            matrix[j][i] = r;
            if r.abs() > CORRELATION_FLAG {
                flagged.push((i, j, r));
            }
        }
    }
    Ok(InnovizationReport {
        columns: INNOVIZATION_COLUMNS.iter().map(|s| s.to_string()).collect(),
        matrix,
        flagged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessPoint {
    pub w1: f64,
    pub error: f64,
    pub genome: CalibrationVector,
}

/// Reference values (w1, weighted error) reported for one KITTI frame with measured
/// cost. Kept for plotting alongside synthetic sweeps; not reproducible here.
pub const PUBLISHED_SWEEP_REFERENCE: [(f64, f64); 4] = [(0.1, 27.71), (0.7, 13.997), (0.8, 13.893), (0.9, 16.03)];

/// One single-objective run per edge weight, all with the same seed and budget.
pub fn robustness_sweep(
    problem: &CalibrationProblem,
    w1_values: &[f64],
    cfg: &EvolutionConfig,
) -> Result<Vec<RobustnessPoint>> {
    if let Some(w) = w1_values.iter().find(|w| !(**w > 0.0 && **w < 1.0)) {
        return Err(Error::invalid(format!("edge weight {w} must lie in (0,1)")));
    }
    w1_values
        .iter()
        .map(|&w1| {
            let p = problem.with_weights(WeightPair::new(w1)?)?;
            let run = single_objective_minimize(&p, cfg)?;
            log::info!("w1 = {w1}: weighted error {:.4}", run.best_objectives.chamfer);
            Ok(RobustnessPoint {
                w1,
                error: run.best_objectives.chamfer,
                genome: run.best,
            })
        })
        .collect()
}

/// Parses `start:stop:step` (inclusive stop) or a comma-separated list.
pub fn parse_weight_list(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::invalid(format!("cannot parse weight list `{spec}`"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() == 3 {
        let v: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let (start, stop, step) = (v[0], v[1], v[2]);
        if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
            return Err(bad());
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        // round to 12 decimals so 0.1 + 2 * 0.1 prints as 0.3
        return Ok((0..count)
            .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
            .collect());
    }
    if parts.len() != 1 {
        return Err(bad());
    }
    spec.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect()
}
