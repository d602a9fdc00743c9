use crate::data::cube::HyperCube;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Default spatial extent of a patch.
pub const DEFAULT_PATCH_SIZE: usize = 9;

/// Square spatial-spectral neighborhood centered on one pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    pub center: (usize, usize),
    pub size: usize,
    /// Shape `(size, size, bands)`.
    pub data: Tensor,
}

/// Reflect an index into `0..n` without repeating the edge sample
/// (`-1 -> 1`, `n -> n - 2`).
pub fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Copy the patch values into `out`, which must hold `size·size·bands` values.
pub fn fill_patch(cube: &HyperCube, center: (usize, usize), size: usize, out: &mut [f64]) {
    let half = (size / 2) as isize;
    let b = cube.bands();
    let mut k = 0;
    for dr in -half..=half {
        let r = reflect(center.0 as isize + dr, cube.height());
        for dc in -half..=half {
            let c = reflect(center.1 as isize + dc, cube.width());
            out[k..k + b].copy_from_slice(cube.spectrum(r, c));
            k += b;
        }
    }
}

pub fn extract_patch(cube: &HyperCube, center: (usize, usize), size: usize) -> Result<Patch> {
    if size.is_multiple_of(2) {
        return Err(Error::Parameter(format!("patch size must be odd, got {size}")));
    }
    if center.0 >= cube.height() || center.1 >= cube.width() {
        return Err(Error::Parameter(format!(
            "center {center:?} outside {}x{} cube",
            cube.height(),
            cube.width()
        )));
    }
    let mut data = vec![0.0; size * size * cube.bands()];
    fill_patch(cube, center, size, &mut data);
    Ok(Patch {
        center,
        size,
        data: Tensor::new(&[size, size, cube.bands()], data)?,
    })
}

/// Patches for a list of flat pixel indices, stacked as `(n, s, s, B)`.
pub fn patch_batch(cube: &HyperCube, pixels: &[usize], size: usize) -> Tensor {
    let per = size * size * cube.bands();
    let mut data = vec![0.0; pixels.len() * per];
    for (chunk, &p) in data.chunks_exact_mut(per).zip(pixels) {
        fill_patch(cube, (p / cube.width(), p % cube.width()), size, chunk);
    }
    Tensor::new(&[pixels.len(), size, size, cube.bands()], data).expect("consistent size")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize, b: usize) -> HyperCube {
        HyperCube::new(h, w, b, (0..h * w * b).map(|v| v as f64).collect()).unwrap()
    }

    #[test]
    fn size_one_is_the_spectrum() {
        let cube = ramp(3, 4, 2);
        let p = extract_patch(&cube, (1, 2), 1).unwrap();
        assert_eq!(p.data.data(), cube.spectrum(1, 2));
    }

    #[test]
    fn corner_patch_of_two_by_two_mirrors() {
        // Pixel values a=0 (0,0), b=1 (0,1), c=2 (1,0), d=3 (1,1).
        // Rows -1,0,1 reflect to 1,0,1; same for columns.
        let cube = ramp(2, 2, 1);
        let p = extract_patch(&cube, (0, 0), 3).unwrap();
        assert_eq!(p.data.data(), &[3.0, 2.0, 3.0, 1.0, 0.0, 1.0, 3.0, 2.0, 3.0]);
    }

    #[test]
    fn interior_patch_is_subarray() {
        let cube = ramp(5, 5, 2);
        let p = extract_patch(&cube, (2, 2), 3).unwrap();
        let mut expected = Vec::new();
        for r in 1..4 {
            for c in 1..4 {
                expected.extend_from_slice(cube.spectrum(r, c));
            }
        }
        assert_eq!(p.data.data(), &expected[..]);
    }

    #[test]
    fn even_size_rejected() {
        assert!(matches!(
            extract_patch(&ramp(3, 3, 1), (1, 1), 4),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn every_center_gives_full_finite_patch() {
        let cube = ramp(3, 2, 2);
        for r in 0..3 {
            for c in 0..2 {
                let p = extract_patch(&cube, (r, c), 9).unwrap();
                assert_eq!(p.data.shape(), &[9, 9, 2]);
                assert!(p.data.is_finite());
            }
        }
    }

    #[test]
    fn reflect_wraps_repeatedly() {
        assert_eq!(reflect(-1, 3), 1);
        assert_eq!(reflect(3, 3), 1);
        assert_eq!(reflect(-4, 3), 0);
        assert_eq!(reflect(5, 1), 0);
    }
}
