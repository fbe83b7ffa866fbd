use crate::volume::Volume;

/// Z-scores the non-zero (brain) voxels of a volume; zero voxels stay zero.
/// Statistics are accumulated in 64 bits in storage order.
pub fn normalize_intensities(v: &Volume) -> Volume {
    let (mut n, mut sum) = (0usize, 0.0f64);
    for &x in &v.data {
        if x != 0.0 {
            n += 1;
            sum += x as f64;
        }
    }
    if n == 0 {
        return v.clone();
    }
    let mean = sum / n as f64;
    let var = v
        .data
        .iter()
        .filter(|&&x| x != 0.0)
        .map(|&x| (x as f64 - mean).powi(2))
        .sum::<f64>()
        / n as f64;
    let std = if var > 0.0 { var.sqrt() } else { 1.0 };
    let data = v
        .data
        .iter()
        .map(|&x| if x != 0.0 { ((x as f64 - mean) / std) as f32 } else { 0.0 })
        .collect();
    Volume { grid: v.grid, data }
}
