//! Overlap and surface metrics between an automated mask `A` and a manual
//! mask `M`.
//!
//! * Dice: `2|A∩M| / (|A| + |M|)`
//! * PPV: `|A∩M| / |A|`
//! * volume difference: `abs(|A| − |M|) / |M|`
//! * surface distance: mean of the two directed Hausdorff distances between
//!   the boundary voxel sets, in millimetres.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::volume::LabelMask;

fn counts(a: &LabelMask, m: &LabelMask) -> Result<(usize, usize, usize)> {
    a.grid.check_same(&m.grid, "metrics")?;
    let (mut na, mut nm, mut both) = (0, 0, 0);
    for (&x, &y) in a.data().iter().zip(m.data()) {
        na += x as usize;
        nm += y as usize;
        both += (x & y) as usize;
    }
    Ok((na, nm, both))
}

pub fn dice(a: &LabelMask, m: &LabelMask) -> Result<f64> {
    let (na, nm, both) = counts(a, m)?;
    if na + nm == 0 {
        return Err(Error::UndefinedMetric("dice of two empty masks"));
    }
    Ok(2.0 * both as f64 / (na + nm) as f64)
}

/// True positives over automated positives.
pub fn ppv(a: &LabelMask, m: &LabelMask) -> Result<f64> {
    let (na, _, both) = counts(a, m)?;
    if na == 0 {
        return Err(Error::UndefinedMetric("ppv of an empty automated mask"));
    }
    Ok(both as f64 / na as f64)
}

pub fn volume_difference(a: &LabelMask, m: &LabelMask) -> Result<f64> {
    let (na, nm, _) = counts(a, m)?;
    if nm == 0 {
        return Err(Error::UndefinedMetric("volume difference against an empty manual mask"));
    }
    Ok((na as f64 - nm as f64).abs() / nm as f64)
}

/// Foreground voxels with at least one background 6-neighbour. Voxels on
/// the grid edge count as boundary.
pub fn boundary_voxels(mask: &LabelMask) -> Vec<[usize; 3]> {
    let g = mask.grid;
    let [nx, ny, nz] = g.dims;
    let mut out = Vec::new();
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if !mask.is_set(g.index(x, y, z)) {
                    continue;
                }
                let edge = x == 0 || y == 0 || z == 0 || x + 1 == nx || y + 1 == ny || z + 1 == nz;
                let exposed = edge
                    || !mask.is_set(g.index(x - 1, y, z))
                    || !mask.is_set(g.index(x + 1, y, z))
                    || !mask.is_set(g.index(x, y - 1, z))
                    || !mask.is_set(g.index(x, y + 1, z))
                    || !mask.is_set(g.index(x, y, z - 1))
                    || !mask.is_set(g.index(x, y, z + 1));
                if exposed {
                    out.push([x, y, z]);
                }
            }
        }
    }
    out
}

fn dist2(p: [usize; 3], q: [usize; 3], spacing: [f64; 3]) -> f64 {
    (0..3)
        .map(|i| {
            let d = (p[i] as f64 - q[i] as f64) * spacing[i];
            d * d
        })
        .sum()
}

/// `max_{p ∈ from} min_{q ∈ to} |p − q|`, with the early-exit scan: once a
/// point has a neighbour closer than the running maximum it cannot raise it.
fn directed_hausdorff(from: &[[usize; 3]], to: &[[usize; 3]], spacing: [f64; 3]) -> f64 {
    let mut cmax = 0.0f64;
    for &p in from {
        let mut cmin = f64::INFINITY;
        for &q in to {
            let d = dist2(p, q, spacing);
            if d < cmax {
                cmin = d;
                break;
            }
            cmin = cmin.min(d);
        }
        cmax = cmax.max(cmin);
    }
    cmax.sqrt()
}

/// Mean of the directed Hausdorff distances A→M and M→A between boundary
/// voxels, with voxel offsets scaled by `spacing` (mm).
pub fn surface_distance(a: &LabelMask, m: &LabelMask, spacing: [f64; 3]) -> Result<f64> {
    a.grid.check_same(&m.grid, "surface distance")?;
    let ba = boundary_voxels(a);
    let bm = boundary_voxels(m);
    if ba.is_empty() || bm.is_empty() {
        return Err(Error::UndefinedMetric("surface distance with an empty mask"));
    }
    Ok((directed_hausdorff(&ba, &bm, spacing) + directed_hausdorff(&bm, &ba, spacing)) / 2.0)
}

/// The four metrics for one pair; `None` marks an undefined metric.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsReport {
    pub dice: Option<f64>,
    pub ppv: Option<f64>,
    pub volume_difference: Option<f64>,
    pub surface_distance: Option<f64>,
}

fn defined(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedMetric(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Evaluates every metric; only a grid mismatch is an error.
pub fn evaluate(a: &LabelMask, m: &LabelMask, spacing: [f64; 3]) -> Result<MetricsReport> {
    Ok(MetricsReport {
        dice: defined(dice(a, m))?,
        ppv: defined(ppv(a, m))?,
        volume_difference: defined(volume_difference(a, m))?,
        surface_distance: defined(surface_distance(a, m, spacing))?,
    })
}

fn fmt_metric(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:?}"),
        None => "undefined".to_string(),
    }
}

impl MetricsReport {
    pub const KEYS: [&'static str; 4] = ["dice", "ppv", "volume_difference", "surface_distance"];

    pub fn values(&self) -> [Option<f64>; 4] {
        [self.dice, self.ppv, self.volume_difference, self.surface_distance]
    }

    /// One `key=value` line per metric; undefined metrics print `undefined`.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        for (k, v) in Self::KEYS.iter().zip(self.values()) {
            let _ = writeln!(s, "{k}={}", fmt_metric(v));
        }
        s
    }
}

/// Median of the values (mean of the middle pair for even counts).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[mid] } else { (v[mid - 1] + v[mid]) / 2.0 })
}

/// Per-metric median, minimum and maximum over a cohort, ignoring
/// undefined entries.
#[derive(Clone, Debug, PartialEq)]
pub struct CohortSummary {
    pub subjects: usize,
    pub rows: Vec<(&'static str, Option<f64>, Option<f64>, Option<f64>)>,
}

impl CohortSummary {
    pub fn from_reports(reports: &[MetricsReport]) -> Self {
        let rows = MetricsReport::KEYS
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                let vals: Vec<f64> = reports.iter().filter_map(|r| r.values()[i]).collect();
                let min = vals.iter().copied().reduce(f64::min);
                let max = vals.iter().copied().reduce(f64::max);
                (k, median(&vals), min, max)
            })
            .collect();
        Self { subjects: reports.len(), rows }
    }

    pub fn median_of(&self, key: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.0 == key).and_then(|r| r.1)
    }

    /// Tab-separated `metric  median  min  max` table with a header line.
    pub fn to_table(&self) -> String {
        let mut s = String::from("metric\tmedian\tmin\tmax\n");
        for (k, med, min, max) in &self.rows {
            let _ = writeln!(s, "{k}\t{}\t{}\t{}", fmt_metric(*med), fmt_metric(*min), fmt_metric(*max));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::{Grid, Orientation};
    use proptest::prelude::*;

    fn grid(dims: [usize; 3]) -> Grid {
        Grid::new(dims, [1.0; 3], Orientation::Axial).unwrap()
    }

    fn mask_from(g: Grid, on: &[usize]) -> LabelMask {
        let mut m = LabelMask::empty(g);
        for &i in on {
            m.set(i, true);
        }
        m
    }

    #[test]
    fn identical_masks() {
        let g = grid([4, 4, 4]);
        let m = mask_from(g, &[1, 2, 17, 40]);
        let r = evaluate(&m, &m, [1.0; 3]).unwrap();
        assert_eq!(r.dice, Some(1.0));
        assert_eq!(r.ppv, Some(1.0));
        assert_eq!(r.volume_difference, Some(0.0));
        assert_eq!(r.surface_distance, Some(0.0));
    }

    #[test]
    fn disjoint_masks() {
        let g = grid([4, 4, 4]);
        let a = mask_from(g, &[0, 1]);
        let m = mask_from(g, &[10, 11]);
        assert_eq!(dice(&a, &m).unwrap(), 0.0);
        assert_eq!(ppv(&a, &m).unwrap(), 0.0);
    }

    #[test]
    fn constructed_counts() {
        let g = grid([4, 4, 4]);
        // |A| = 6, |M| = 8, |A∩M| = 4.
        let a = mask_from(g, &[0, 1, 2, 3, 20, 21]);
        let m = mask_from(g, &[0, 1, 2, 3, 40, 41, 42, 43]);
        assert!((dice(&a, &m).unwrap() - 4.0 / 7.0).abs() < 1e-15);
        // |A| = 10, |A∩M| = 7.
        let a = mask_from(g, &(0..10).collect::<Vec<_>>());
        let m = mask_from(g, &(3..30).collect::<Vec<_>>());
        assert!((ppv(&a, &m).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn ppv_of_subset_is_one() {
        let g = grid([4, 4, 4]);
        let a = mask_from(g, &[5, 6]);
        let m = mask_from(g, &[4, 5, 6, 7]);
        assert_eq!(ppv(&a, &m).unwrap(), 1.0);
        assert_eq!(ppv(&m, &a).unwrap(), 0.5);
    }

    #[test]
    fn volume_difference_examples() {
        let g = grid([4, 4, 4]);
        let m = mask_from(g, &(0..10).collect::<Vec<_>>());
        let a = mask_from(g, &(20..28).collect::<Vec<_>>());
        assert!((volume_difference(&a, &m).unwrap() - 0.2).abs() < 1e-15);
        let m5 = mask_from(g, &[0, 1, 2, 3, 4]);
        assert_eq!(volume_difference(&LabelMask::empty(g), &m5).unwrap(), 1.0);
    }

    #[test]
    fn single_voxels_three_apart() {
        let g = grid([8, 3, 3]);
        let a = mask_from(g, &[g.index(1, 1, 1)]);
        let m = mask_from(g, &[g.index(4, 1, 1)]);
        assert_eq!(surface_distance(&a, &m, [1.0; 3]).unwrap(), 3.0);
        assert_eq!(surface_distance(&a, &m, [0.5, 1.0, 1.0]).unwrap(), 1.5);
    }

    #[test]
    fn undefined_cases() {
        let g = grid([3, 3, 3]);
        let e = LabelMask::empty(g);
        let m = mask_from(g, &[4]);
        assert!(matches!(dice(&e, &e), Err(Error::UndefinedMetric(_))));
        assert!(matches!(ppv(&e, &m), Err(Error::UndefinedMetric(_))));
        assert!(matches!(volume_difference(&m, &e), Err(Error::UndefinedMetric(_))));
        assert!(matches!(surface_distance(&e, &m, [1.0; 3]), Err(Error::UndefinedMetric(_))));
        let r = evaluate(&e, &m, [1.0; 3]).unwrap();
        assert_eq!(r.dice, Some(0.0));
        assert_eq!(r.ppv, None);
        assert_eq!(r.volume_difference, Some(1.0));
        assert_eq!(r.surface_distance, None);
        assert!(r.to_key_values().contains("ppv=undefined\n"));
        let other = LabelMask::empty(grid([3, 3, 2]));
        assert!(matches!(evaluate(&m, &other, [1.0; 3]), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn report_formatting() {
        let g = grid([2, 2, 2]);
        let m = mask_from(g, &[0]);
        let text = evaluate(&m, &m, [1.0; 3]).unwrap().to_key_values();
        assert_eq!(text, "dice=1.0\nppv=1.0\nvolume_difference=0.0\nsurface_distance=0.0\n");
    }

    #[test]
    fn cohort_median_matches_sorting() {
        let rep = |d: f64| MetricsReport {
            dice: Some(d),
            ppv: None,
            volume_difference: Some(1.0 - d),
            surface_distance: Some(d * 10.0),
        };
        let reports: Vec<_> = [0.3, 0.9, 0.1, 0.7].iter().map(|&d| rep(d)).collect();
        let s = CohortSummary::from_reports(&reports);
        assert!((s.median_of("dice").unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(s.median_of("ppv"), None);
        assert!(s.to_table().starts_with("metric\tmedian\tmin\tmax\ndice\t"));
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
    }

    proptest! {
        #[test]
        fn dice_and_surface_distance_are_symmetric(
            a in proptest::collection::vec(0u8..2, 125),
            b in proptest::collection::vec(0u8..2, 125),
        ) {
            let g = grid([5, 5, 5]);
            let a = LabelMask::new(g, a).unwrap();
            let b = LabelMask::new(g, b).unwrap();
            if a.count() + b.count() > 0 {
                prop_assert_eq!(dice(&a, &b).unwrap(), dice(&b, &a).unwrap());
                prop_assert!(dice(&a, &b).unwrap() <= 1.0);
            }
            if a.count() > 0 && b.count() > 0 {
                prop_assert_eq!(
                    surface_distance(&a, &b, [1.0, 2.0, 0.5]).unwrap(),
                    surface_distance(&b, &a, [1.0, 2.0, 0.5]).unwrap()
                );
            }
        }

        #[test]
        fn metrics_survive_identical_axis_permutation(
            a in proptest::collection::vec(0u8..2, 60),
            b in proptest::collection::vec(0u8..2, 60),
            o in 0usize..3,
        ) {
            let g = Grid::new([5, 4, 3], [1.0, 2.0, 3.0], Orientation::Axial).unwrap();
            let a = LabelMask::new(g, a).unwrap();
            let b = LabelMask::new(g, b).unwrap();
            let target = Orientation::ALL[o];
            let (pa, pb) = (a.reorient(target), b.reorient(target));
            let sp = |g: &Grid| g.spacing.map(|s| s as f64);
            let r1 = evaluate(&a, &b, sp(&a.grid)).unwrap();
            let r2 = evaluate(&pa, &pb, sp(&pa.grid)).unwrap();
            prop_assert_eq!(r1, r2);
        }
    }
}
