//! Centered 2D Fourier transforms, radial binary masks and band splitting.
//!
//! Frequencies are integer offsets from the DC bin, which sits at row
//! `H / 2`, column `W / 2` (integer division). Row offsets span
//! `-(H / 2) ..= ceil(H / 2) - 1`, column offsets likewise over `W`. The
//! forward transform is unnormalized; the inverse carries the `1 / (H W)`.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::tensor::{LatentTensor, Shape};

/// Relative bound on the imaginary part left after an inverse transform.
pub const IMAGINARY_RESIDUE_RTOL: f64 = 1e-6;
/// Absolute floor on the residue threshold, so bands that cancel to
/// roundoff are not rejected.
pub const IMAGINARY_RESIDUE_FLOOR: f64 = 1e-12;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Complex spectrum of a [`LatentTensor`], DC at the grid center of each plane.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    shape: Shape,
    data: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(shape: Shape, data: Vec<Complex64>) -> Result<Self> {
        shape.validate()?;
        if data.len() != shape.len() {
            return Err(Error::DataLength {
                shape,
                expected: shape.len(),
                found: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        Self {
            shape,
            data: vec![Complex64::new(0.0, 0.0); shape.len()],
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn plane(&self, channel: usize) -> &[Complex64] {
        let n = self.shape.plane_len();
        &self.data[channel * n..(channel + 1) * n]
    }

    /// Value at frequency offsets `(ky, kx)` from DC in `channel`.
    pub fn at(&self, channel: usize, ky: i64, kx: i64) -> Complex64 {
        let (row, col) = offset_to_index(self.shape.height, self.shape.width, ky, kx);
        self.data[channel * self.shape.plane_len() + row * self.shape.width + col]
    }

    pub fn set(&mut self, channel: usize, ky: i64, kx: i64, value: Complex64) {
        let (row, col) = offset_to_index(self.shape.height, self.shape.width, ky, kx);
        let idx = channel * self.shape.plane_len() + row * self.shape.width + col;
        self.data[idx] = value;
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self {
            shape: self.shape,
            data: self.data.iter().map(|z| z * alpha).collect(),
        }
    }

    /// Sum of `|U|` over every bin of every channel.
    pub fn total_magnitude(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).sum()
    }
}

/// Row/column of the DC bin.
pub fn dc_index(height: usize, width: usize) -> (usize, usize) {
    (height / 2, width / 2)
}

fn offset_to_index(height: usize, width: usize, ky: i64, kx: i64) -> (usize, usize) {
    let (r0, c0) = dc_index(height, width);
    let row = r0 as i64 + ky;
    let col = c0 as i64 + kx;
    assert!(
        (0..height as i64).contains(&row) && (0..width as i64).contains(&col),
        "frequency offset ({ky}, {kx}) outside a {height}x{width} grid"
    );
    (row as usize, col as usize)
}

/// Squared distance from DC of the bin at centered position `(row, col)`.
pub fn squared_radius(height: usize, width: usize, row: usize, col: usize) -> u64 {
    let (r0, c0) = dc_index(height, width);
    let ky = row as i64 - r0 as i64;
    let kx = col as i64 - c0 as i64;
    (ky * ky + kx * kx) as u64
}

/// Largest squared radius on an `height x width` grid.
pub fn max_squared_radius(height: usize, width: usize) -> u64 {
    let ky = (height / 2) as u64;
    let kx = (width / 2) as u64;
    ky * ky + kx * kx
}

/// Squared radius of every bin of one plane, in centered row-major order.
pub fn squared_radii(height: usize, width: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(height * width);
    for row in 0..height {
        for col in 0..width {
            out.push(squared_radius(height, width, row, col));
        }
    }
    out
}

/// Smallest integer `r` with `r * r >= n`.
pub fn ceil_sqrt(n: u64) -> u64 {
    let r = floor_sqrt(n);
    if r * r == n {
        r
    } else {
        r + 1
    }
}

/// Largest integer `r` with `r * r <= n`.
pub fn floor_sqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

fn transform_plane(buf: &mut [Complex64], height: usize, width: usize, direction: FftDirection) {
    PLANNER.with(|planner| {
        let mut planner = planner.borrow_mut();
        let row_fft = planner.plan_fft(width, direction);
        let col_fft = planner.plan_fft(height, direction);
        drop(planner);

        for row in buf.chunks_exact_mut(width) {
            row_fft.process(row);
        }
        let mut column = vec![Complex64::new(0.0, 0.0); height];
        for col in 0..width {
            for (row, slot) in column.iter_mut().enumerate() {
                *slot = buf[row * width + col];
            }
            col_fft.process(&mut column);
            for (row, value) in column.iter().enumerate() {
                buf[row * width + col] = *value;
            }
        }
    });
}

/// Moves DC from index (0, 0) to the grid center.
fn shift_to_center(raw: &[Complex64], out: &mut [Complex64], height: usize, width: usize) {
    let (r0, c0) = dc_index(height, width);
    for row in 0..height {
        let src_row = (row + height - r0) % height;
        for col in 0..width {
            let src_col = (col + width - c0) % width;
            out[row * width + col] = raw[src_row * width + src_col];
        }
    }
}

/// Inverse of [`shift_to_center`].
fn shift_to_origin(centered: &[Complex64], out: &mut [Complex64], height: usize, width: usize) {
    let (r0, c0) = dc_index(height, width);
    for row in 0..height {
        let src_row = (row + r0) % height;
        for col in 0..width {
            let src_col = (col + c0) % width;
            out[row * width + col] = centered[src_row * width + src_col];
        }
    }
}

/// Per-channel unnormalized 2D DFT, DC moved to the grid center.
pub fn fft2_centered(u: &LatentTensor) -> SpectralField {
    let shape = u.shape();
    let (h, w) = (shape.height, shape.width);
    let mut data = vec![Complex64::new(0.0, 0.0); shape.len()];
    let mut buf = vec![Complex64::new(0.0, 0.0); shape.plane_len()];
    for (plane, out) in u.planes().zip(data.chunks_exact_mut(shape.plane_len())) {
        for (b, &v) in buf.iter_mut().zip(plane) {
            *b = Complex64::new(v, 0.0);
        }
        transform_plane(&mut buf, h, w, FftDirection::Forward);
        shift_to_center(&buf, out, h, w);
    }
    SpectralField { shape, data }
}

/// Inverse transform returning the real part and the largest absolute
/// imaginary part that was dropped.
pub fn ifft2_centered_with_residue(spectrum: &SpectralField) -> (LatentTensor, f64) {
    let shape = spectrum.shape;
    let (h, w) = (shape.height, shape.width);
    let norm = 1.0 / (h * w) as f64;
    let mut real = Vec::with_capacity(shape.len());
    let mut residue: f64 = 0.0;
    let mut buf = vec![Complex64::new(0.0, 0.0); shape.plane_len()];
    for plane in spectrum.data.chunks_exact(shape.plane_len()) {
        shift_to_origin(plane, &mut buf, h, w);
        transform_plane(&mut buf, h, w, FftDirection::Inverse);
        for z in &buf {
            real.push(z.re * norm);
            residue = residue.max((z.im * norm).abs());
        }
    }
    (LatentTensor::from_parts(shape, real), residue)
}

/// Inverse of [`fft2_centered`]. Fails if the dropped imaginary part is not
/// negligible, which means the spectrum was not Hermitian-symmetric.
pub fn ifft2_centered(spectrum: &SpectralField) -> Result<LatentTensor> {
    let (tensor, residue) = ifft2_centered_with_residue(spectrum);
    let threshold = (IMAGINARY_RESIDUE_RTOL * tensor.max_abs()).max(IMAGINARY_RESIDUE_FLOOR);
    if residue > threshold {
        return Err(Error::ImaginaryResidue { residue, threshold });
    }
    Ok(tensor)
}

/// Complementary low/high binary masks over centered frequency offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyMask {
    height: usize,
    width: usize,
    radius: f64,
    low: Vec<bool>,
}

impl FrequencyMask {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Whether the bin at centered `(row, col)` is in the low band.
    pub fn is_low(&self, row: usize, col: usize) -> bool {
        self.low[row * self.width + col]
    }

    pub fn low_plane(&self) -> Vec<u8> {
        self.low.iter().map(|&b| b as u8).collect()
    }

    pub fn high_plane(&self) -> Vec<u8> {
        self.low.iter().map(|&b| (!b) as u8).collect()
    }

    pub fn low_count(&self) -> usize {
        self.low.iter().filter(|&&b| b).count()
    }

    pub fn high_count(&self) -> usize {
        self.low.len() - self.low_count()
    }

    /// The low mask as a single-channel 0/1 tensor.
    pub fn low_tensor(&self) -> LatentTensor {
        LatentTensor::from_parts(
            Shape::new(self.height, self.width, 1),
            self.low.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        )
    }

    fn ensure_matches(&self, shape: Shape) -> Result<()> {
        if shape.height != self.height || shape.width != self.width {
            return Err(Error::MaskMismatch {
                mask_h: self.height,
                mask_w: self.width,
                field_h: shape.height,
                field_w: shape.width,
            });
        }
        Ok(())
    }
}

/// Low band = bins with `kx^2 + ky^2 <= radius^2`; high band is the rest.
pub fn build_radial_mask(height: usize, width: usize, radius: f64) -> Result<FrequencyMask> {
    if !(radius.is_finite() && radius >= 0.0) {
        return Err(Error::InvalidRadius(radius));
    }
    Shape::new(height, width, 1).validate()?;
    let limit = radius * radius;
    let low = squared_radii(height, width)
        .into_iter()
        .map(|d2| (d2 as f64) <= limit)
        .collect();
    Ok(FrequencyMask {
        height,
        width,
        radius,
        low,
    })
}

/// `low_scale * M_l ⊙ U + high_scale * M_h ⊙ U`.
pub fn scale_bands(
    spectrum: &SpectralField,
    mask: &FrequencyMask,
    low_scale: f64,
    high_scale: f64,
) -> Result<SpectralField> {
    mask.ensure_matches(spectrum.shape)?;
    let n = spectrum.shape.plane_len();
    let data = spectrum
        .data
        .iter()
        .enumerate()
        .map(|(i, z)| if mask.low[i % n] { z * low_scale } else { z * high_scale })
        .collect();
    Ok(SpectralField {
        shape: spectrum.shape,
        data,
    })
}

/// Splits `u` into its low- and high-frequency components under `mask`.
pub fn decompose(u: &LatentTensor, mask: &FrequencyMask) -> Result<(LatentTensor, LatentTensor)> {
    mask.ensure_matches(u.shape())?;
    let spectrum = fft2_centered(u);
    decompose_spectrum(&spectrum, mask)
}

pub fn decompose_spectrum(spectrum: &SpectralField, mask: &FrequencyMask) -> Result<(LatentTensor, LatentTensor)> {
    let low = ifft2_centered(&scale_bands(spectrum, mask, 1.0, 0.0)?)?;
    let high = ifft2_centered(&scale_bands(spectrum, mask, 0.0, 1.0)?)?;
    Ok((low, high))
}
