//! Volumetric grids: scalar volumes, binary masks, and axis-permutation
//! reorientation between axial, coronal and sagittal storage.

use crate::error::{Error, Result};

/// Which anatomical axes a volume stores as its in-plane (first two) axes.
///
/// Storage axis `i` holds anatomical axis `axes()[i]`, where anatomical
/// axes are numbered as in the axial (native) layout:
///
/// | orientation | storage axes (0, 1, 2) | slices along |
/// |---|---|---|
/// | axial    | (x, y, z) | z |
/// | coronal  | (x, z, y) | y |
/// | sagittal | (y, z, x) | x |
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Orientation {
    Axial,
    Coronal,
    Sagittal,
}

impl Orientation {
    pub const ALL: [Orientation; 3] = [Orientation::Axial, Orientation::Coronal, Orientation::Sagittal];

    pub fn axes(self) -> [usize; 3] {
        match self {
            Orientation::Axial => [0, 1, 2],
            Orientation::Coronal => [0, 2, 1],
            Orientation::Sagittal => [1, 2, 0],
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Orientation::Axial => 0,
            Orientation::Coronal => 1,
            Orientation::Sagittal => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Orientation::Axial => "axial",
            Orientation::Coronal => "coronal",
            Orientation::Sagittal => "sagittal",
        }
    }
}

impl std::fmt::Display for Orientation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Shape, voxel size and storage orientation shared by volumes and masks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub dims: [usize; 3],
    /// Millimetres per voxel along each storage axis.
    pub spacing: [f32; 3],
    pub orientation: Orientation,
}

impl Grid {
    pub fn new(dims: [usize; 3], spacing: [f32; 3], orientation: Orientation) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::contract(format!("grid dims must be >= 1, got {dims:?}")));
        }
        if spacing.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::contract(format!("grid spacing must be > 0, got {spacing:?}")));
        }
        Ok(Self { dims, spacing, orientation })
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.dims[1] + y) * self.dims[0] + x
    }

    #[inline]
    pub fn coords(&self, i: usize) -> [usize; 3] {
        let x = i % self.dims[0];
        let y = (i / self.dims[0]) % self.dims[1];
        let z = i / (self.dims[0] * self.dims[1]);
        [x, y, z]
    }

    pub fn check_same(&self, other: &Grid, what: &str) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!("{what}: {self:?} vs {other:?}")));
        }
        Ok(())
    }

    /// The same anatomical grid stored in `target` orientation, plus the
    /// source stride to step along each target storage axis.
    fn permuted(&self, target: Orientation) -> (Grid, [usize; 3]) {
        let src = self.orientation.axes();
        let tgt = target.axes();
        let src_strides = [1, self.dims[0], self.dims[0] * self.dims[1]];
        let mut dims = [0; 3];
        let mut spacing = [0.0; 3];
        let mut strides = [0; 3];
        for i in 0..3 {
            let j = src.iter().position(|&a| a == tgt[i]).expect("axes are permutations");
            dims[i] = self.dims[j];
            spacing[i] = self.spacing[j];
            strides[i] = src_strides[j];
        }
        (Grid { dims, spacing, orientation: target }, strides)
    }
}

fn permute<T: Copy>(grid: &Grid, data: &[T], target: Orientation) -> (Grid, Vec<T>) {
    let (out, strides) = grid.permuted(target);
    let mut buf = Vec::with_capacity(data.len());
    for k in 0..out.dims[2] {
        for j in 0..out.dims[1] {
            let base = k * strides[2] + j * strides[1];
            buf.extend((0..out.dims[0]).map(|i| data[base + i * strides[0]]));
        }
    }
    (out, buf)
}

/// Scalar 3-D grid, x-fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume {
    pub grid: Grid,
    pub data: Vec<f32>,
}

impl Volume {
    pub fn new(grid: Grid, data: Vec<f32>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::contract(format!(
                "volume data length {} does not match dims {:?}",
                data.len(),
                grid.dims
            )));
        }
        Ok(Self { grid, data })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, data: vec![0.0; grid.len()] }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims
    }

    pub fn orientation(&self) -> Orientation {
        self.grid.orientation
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f32 {
        self.data[self.grid.index(x, y, z)]
    }

    pub fn reorient(&self, target: Orientation) -> Volume {
        reorient(self, target)
    }
}

/// Pure axis permutation into `target` storage; no resampling. Spacing
/// follows its axis. Reorienting to the current orientation is the identity.
pub fn reorient(v: &Volume, target: Orientation) -> Volume {
    let (grid, data) = permute(&v.grid, &v.data, target);
    Volume { grid, data }
}

/// Binary mask on a grid; every value is exactly 0 or 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMask {
    pub grid: Grid,
    data: Vec<u8>,
}

impl Eq for Grid {}

impl LabelMask {
    pub fn new(grid: Grid, data: Vec<u8>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::contract(format!(
                "mask data length {} does not match dims {:?}",
                data.len(),
                grid.dims
            )));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::contract("mask values must be 0 or 1"));
        }
        Ok(Self { grid, data })
    }

    pub fn empty(grid: Grid) -> Self {
        Self { grid, data: vec![0; grid.len()] }
    }

    /// Accepts a volume whose every value is exactly 0.0 or 1.0.
    pub fn from_volume(v: &Volume) -> Result<Self> {
        let mut data = Vec::with_capacity(v.data.len());
        for &x in &v.data {
            data.push(match x {
                0.0 => 0,
                1.0 => 1,
                _ => return Err(Error::contract(format!("mask value {x} is not binary"))),
            });
        }
        Ok(Self { grid: v.grid, data })
    }

    pub fn to_volume(&self) -> Volume {
        Volume { grid: self.grid, data: self.data.iter().map(|&b| b as f32).collect() }
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn is_set(&self, i: usize) -> bool {
        self.data[i] != 0
    }

    #[inline]
    pub fn set(&mut self, i: usize, on: bool) {
        self.data[i] = on as u8;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims
    }

    pub fn reorient(&self, target: Orientation) -> LabelMask {
        let (grid, data) = permute(&self.grid, &self.data, target);
        LabelMask { grid, data }
    }
}

/// Co-registered MPRAGE, T2 and FLAIR volumes.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiContrast {
    pub mprage: Volume,
    pub t2: Volume,
    pub flair: Volume,
}

impl MultiContrast {
    pub fn new(mprage: Volume, t2: Volume, flair: Volume) -> Result<Self> {
        mprage.grid.check_same(&t2.grid, "T2 vs MPRAGE")?;
        mprage.grid.check_same(&flair.grid, "FLAIR vs MPRAGE")?;
        Ok(Self { mprage, t2, flair })
    }

    pub fn grid(&self) -> Grid {
        self.mprage.grid
    }

    /// Channel order used as network input.
    pub fn channels(&self) -> [&Volume; 3] {
        [&self.mprage, &self.t2, &self.flair]
    }

    pub fn map(&self, f: impl Fn(&Volume) -> Volume) -> MultiContrast {
        MultiContrast { mprage: f(&self.mprage), t2: f(&self.t2), flair: f(&self.flair) }
    }

    pub fn reorient(&self, target: Orientation) -> MultiContrast {
        self.map(|v| reorient(v, target))
    }
}
