use crate::error::{Error, Result};

/// Row-major single-channel raster. Grid node `(x, y)` sits at pixel
/// coordinate `(u, v) = (x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Copy> Raster<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Raster {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Structure(format!(
                "raster of {width}x{height} needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Raster {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        self.data[y * self.width + x] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn rows_mut(&mut self) -> std::slice::ChunksExactMut<'_, T> {
        self.data.chunks_exact_mut(self.width.max(1))
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Raster<U> {
        Raster {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u <= (self.width as f64 - 1.0) && v <= (self.height as f64 - 1.0)
    }
}

/// Interpolation cell for `(u, v)`: top-left node and fractional offsets.
/// Callers guarantee the coordinate is inside the node grid.
#[inline]
pub(crate) fn bilinear_cell(
    width: usize,
    height: usize,
    u: f64,
    v: f64,
) -> (usize, usize, f64, f64) {
    let x0 = (u.floor().max(0.0) as usize).min(width.saturating_sub(2));
    let y0 = (v.floor().max(0.0) as usize).min(height.saturating_sub(2));
    (x0, y0, u - x0 as f64, v - y0 as f64)
}

impl Raster<f64> {
    /// Bilinear interpolation between the four surrounding grid nodes.
    pub fn sample(&self, u: f64, v: f64) -> Result<f64> {
        if !self.contains(u, v) {
            return Err(Error::OutOfBounds {
                u,
                v,
                width: self.width,
                height: self.height,
            });
        }
        Ok(self.sample_clamped(u, v))
    }

    /// Bilinear interpolation with coordinates clamped to the grid.
    pub fn sample_clamped(&self, u: f64, v: f64) -> f64 {
        let u = u.clamp(0.0, self.width as f64 - 1.0);
        let v = v.clamp(0.0, self.height as f64 - 1.0);
        let (x0, y0, fx, fy) = bilinear_cell(self.width, self.height, u, v);
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        // Nested lerps: constant fields and exact node hits return stored
        // values bit for bit.
        let lerp = |a: f64, b: f64, t: f64| if t == 0.0 { a } else { a + t * (b - a) };
        let top = lerp(self.get(x0, y0), self.get(x1, y0), fx);
        let bottom = lerp(self.get(x0, y1), self.get(x1, y1), fx);
        lerp(top, bottom, fy)
    }
}
