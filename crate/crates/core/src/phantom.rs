//! Synthetic multi-contrast phantoms with known lesion masks.
//!
//! An ellipsoidal "brain" of constant tissue intensity holds a number of
//! non-overlapping spherical lesions that are hyperintense on T2 and FLAIR
//! and hypointense on MPRAGE. Gaussian noise is added inside the brain only,
//! so the background stays exactly zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::volume::{Grid, LabelMask, MultiContrast, Orientation, Volume};

const PLACEMENT_ATTEMPTS: usize = 10_000;
/// Brain semi-axes as a fraction of each grid extent.
const BRAIN_FRACTION: f64 = 0.45;

#[derive(Clone, Debug, PartialEq)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    pub spacing: [f32; 3],
    pub n_lesions: usize,
    /// Lesion radius range in voxels.
    pub radius_min: f64,
    pub radius_max: f64,
    /// Healthy-tissue intensity per contrast (MPRAGE, T2, FLAIR).
    pub tissue: [f32; 3],
    /// Added to the tissue intensity inside lesions.
    pub lesion_offset: [f32; 3],
    pub noise_sigma: f32,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            dims: [48, 48, 24],
            spacing: [1.0, 1.0, 1.0],
            n_lesions: 1,
            radius_min: 3.0,
            radius_max: 6.0,
            tissue: [100.0, 80.0, 60.0],
            lesion_offset: [-30.0, 40.0, 50.0],
            noise_sigma: 5.0,
            seed: 0,
        }
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.dims.contains(&0) {
            return fail("phantom dims must be >= 1");
        }
        if self.n_lesions == 0 {
            return fail("n_lesions must be >= 1");
        }
        if !(self.radius_min > 0.0 && self.radius_min <= self.radius_max) {
            return fail("need 0 < radius_min <= radius_max");
        }
        if !(self.noise_sigma >= 0.0) {
            return fail("noise_sigma must be >= 0");
        }
        if self.tissue.iter().zip(&self.lesion_offset).any(|(t, o)| *t == 0.0 || t + o == 0.0) {
            return fail("tissue and lesion intensities must be non-zero");
        }
        Grid::new(self.dims, self.spacing, Orientation::Axial).map(|_| ())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.dims, self.spacing, Orientation::Axial)
    }
}

/// Voxel-centre membership test for the brain ellipsoid.
pub fn in_brain(dims: [usize; 3], p: [usize; 3]) -> bool {
    (0..3)
        .map(|i| {
            let c = (dims[i] as f64 - 1.0) / 2.0;
            let r = BRAIN_FRACTION * dims[i] as f64;
            ((p[i] as f64 - c) / r).powi(2)
        })
        .sum::<f64>()
        <= 1.0
}

#[derive(Clone, Copy, Debug)]
struct Sphere {
    center: [f64; 3],
    radius: f64,
}

impl Sphere {
    fn contains(&self, p: [usize; 3]) -> bool {
        (0..3).map(|i| (p[i] as f64 - self.center[i]).powi(2)).sum::<f64>() <= self.radius.powi(2)
    }

    /// Grid voxels inside the sphere, or `None` if any part would fall
    /// outside the brain or off the grid.
    fn voxels(&self, dims: [usize; 3]) -> Option<Vec<[usize; 3]>> {
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        for i in 0..3 {
            let a = (self.center[i] - self.radius).floor();
            let b = (self.center[i] + self.radius).ceil();
            if a < 0.0 || b > dims[i] as f64 - 1.0 {
                return None;
            }
            lo[i] = a as usize;
            hi[i] = b as usize;
        }
        let mut out = Vec::new();
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    let p = [x, y, z];
                    if self.contains(p) {
                        if !in_brain(dims, p) {
                            return None;
                        }
                        out.push(p);
                    }
                }
            }
        }
        Some(out)
    }
}

/// Builds the three contrasts and the truth mask. Deterministic in `spec`.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<(MultiContrast, LabelMask)> {
    spec.validate()?;
    let grid = spec.grid()?;
    let dims = spec.dims;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut placed: Vec<Sphere> = Vec::with_capacity(spec.n_lesions);
    let mut mask = LabelMask::empty(grid);
    let mut attempts = 0;
    while placed.len() < spec.n_lesions {
        attempts += 1;
        if attempts > PLACEMENT_ATTEMPTS {
            return Err(Error::Placement { requested: spec.n_lesions, attempts: PLACEMENT_ATTEMPTS });
        }
        let radius = if spec.radius_max > spec.radius_min {
            rng.random_range(spec.radius_min..=spec.radius_max)
        } else {
            spec.radius_min
        };
        let center = [0, 1, 2].map(|i| rng.random_range(0.0..dims[i] as f64 - 1.0));
        let s = Sphere { center, radius };
        // A one-voxel gap keeps lesions disjoint and not touching.
        let clear = placed.iter().all(|o| {
            let d2: f64 = (0..3).map(|i| (o.center[i] - center[i]).powi(2)).sum();
            d2.sqrt() > o.radius + radius + 2.0
        });
        if !clear {
            continue;
        }
        let Some(voxels) = s.voxels(dims) else { continue };
        if voxels.is_empty() {
            continue;
        }
        for p in voxels {
            mask.set(grid.index(p[0], p[1], p[2]), true);
        }
        placed.push(s);
    }

    let noise = Normal::new(0.0f32, spec.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;
    let mut channels = Vec::with_capacity(3);
    for c in 0..3 {
        let mut data = vec![0.0f32; grid.len()];
        for (i, v) in data.iter_mut().enumerate() {
            if !in_brain(dims, grid.coords(i)) {
                continue;
            }
            let base = spec.tissue[c] + if mask.is_set(i) { spec.lesion_offset[c] } else { 0.0 };
            *v = if spec.noise_sigma > 0.0 { base + noise.sample(&mut rng) } else { base };
        }
        channels.push(Volume::new(grid, data)?);
    }
    let flair = channels.pop().unwrap();
    let t2 = channels.pop().unwrap();
    let mprage = channels.pop().unwrap();
    Ok((MultiContrast::new(mprage, t2, flair)?, mask))
}
