//! FFT plans and diagonal Fourier multipliers on a [`GridSpec`].

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::{Arc, Mutex, OnceLock};

use super::grid::GridSpec;

/// Cached FFT plans and wavenumber tables for one grid.
pub struct Spectral {
    grid: GridSpec,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// `|k|^2` per flat index.
    k2: Vec<f64>,
    /// Wavenumber per axis index with the Nyquist entry zeroed (odd derivatives).
    k_odd: Vec<f64>,
    /// Wavenumber per axis index, Nyquist kept.
    k_full: Vec<f64>,
    /// Flat index of `-k` for each flat index `k`.
    neg: Vec<u32>,
    /// Original axis stored at each position of the spectral layout.
    layout: [usize; 3],
}

static CACHE: OnceLock<Mutex<Vec<Arc<Spectral>>>> = OnceLock::new();

/// Shared spectral context for `grid`, built on first use.
pub fn spectral(grid: &GridSpec) -> Arc<Spectral> {
    let cache = CACHE.get_or_init(|| Mutex::new(Vec::new()));
    let mut guard = cache.lock().expect("spectral cache poisoned");
    if let Some(s) = guard.iter().find(|s| s.grid == *grid) {
        return s.clone();
    }
    let s = Arc::new(Spectral::build(*grid));
    guard.push(s.clone());
    s
}

impl Spectral {
    fn build(grid: GridSpec) -> Self {
        let m = grid.points;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        let k_full: Vec<f64> = (0..m).map(|i| grid.wavenumber(i)).collect();
        let k_odd: Vec<f64> = (0..m)
            .map(|i| if i == m / 2 { 0.0 } else { k_full[i] })
            .collect();
        // Each forward rotation moves the innermost axis to the front.
        let d = grid.dim;
        let mut order: Vec<usize> = (0..d).collect();
        for _ in 1..d {
            let last = order.pop().unwrap();
            order.insert(0, last);
        }
        let mut layout = [0usize; 3];
        layout[..d].copy_from_slice(&order);
        let n = grid.len();
        let mut k2 = vec![0.0; n];
        let mut neg = vec![0u32; n];
        for (flat, (k2v, negv)) in k2.iter_mut().zip(neg.iter_mut()).enumerate() {
            // Index arithmetic in stored positions; |k|^2 and -k are layout independent.
            let idx = grid.unravel(flat);
            let mut s = 0.0;
            let mut nidx = [0usize; 3];
            for a in 0..d {
                s += k_full[idx[a]] * k_full[idx[a]];
                nidx[a] = (m - idx[a]) % m;
            }
            *k2v = s;
            *negv = grid.ravel(&nidx) as u32;
        }
        Spectral {
            grid,
            fwd,
            inv,
            k2,
            k_odd,
            k_full,
            neg,
            layout,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn k2(&self) -> &[f64] {
        &self.k2
    }

    /// Forward transform; the result is left in spectral layout, the lattice axes rotated so
    /// that the original first axis is innermost.
    fn transform_forward(&self, buf: &mut [Complex64]) {
        let m = self.grid.points;
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fwd.get_inplace_scratch_len()];
        self.fwd.process_with_scratch(buf, &mut scratch);
        if self.grid.dim == 1 {
            return;
        }
        let mut tmp = vec![Complex64::new(0.0, 0.0); buf.len()];
        for _ in 1..self.grid.dim {
            // Move the innermost axis to the front.
            transpose(buf, &mut tmp, buf.len() / m, m);
            buf.copy_from_slice(&tmp);
            self.fwd.process_with_scratch(buf, &mut scratch);
        }
    }

    fn transform_inverse(&self, buf: &mut [Complex64]) {
        let m = self.grid.points;
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.inv.get_inplace_scratch_len()];
        self.inv.process_with_scratch(buf, &mut scratch);
        if self.grid.dim == 1 {
            return;
        }
        let mut tmp = vec![Complex64::new(0.0, 0.0); buf.len()];
        for _ in 1..self.grid.dim {
            // Move the outermost axis to the back.
            transpose(buf, &mut tmp, m, buf.len() / m);
            buf.copy_from_slice(&tmp);
            self.inv.process_with_scratch(buf, &mut scratch);
        }
    }

    /// Lattice multi-index (in original axis order) of a spectral-layout flat index.
    fn spectral_index(&self, flat: usize) -> [usize; 3] {
        let d = self.grid.dim;
        let stored = self.grid.unravel(flat);
        let mut out = [0usize; 3];
        for (pos, &axis) in self.layout[..d].iter().enumerate() {
            out[axis] = stored[pos];
        }
        out
    }

    /// Unnormalized forward transform of a real array.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform_forward(&mut buf);
        buf
    }

    /// Forward transform of the packed pair `a + i b`.
    pub fn forward_pair(&self, a: &[f64], b: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = a
            .iter()
            .zip(b)
            .map(|(&x, &y)| Complex64::new(x, y))
            .collect();
        self.transform_forward(&mut buf);
        buf
    }

    /// Normalized inverse transform in place.
    pub fn inverse_in_place(&self, buf: &mut [Complex64]) {
        self.transform_inverse(buf);
        let scale = 1.0 / buf.len() as f64;
        for z in buf.iter_mut() {
            *z *= scale;
        }
    }

    /// Apply a real multiplier that is even in `k`, so real input stays real.
    pub fn apply_even(&self, values: &[f64], mult: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut buf = self.forward(values);
        for (z, &k2) in buf.iter_mut().zip(&self.k2) {
            *z *= mult(k2);
        }
        self.inverse_in_place(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }

    /// Same as [`apply_even`](Self::apply_even) for two arrays at the cost of one transform pair.
    pub fn apply_even_pair(
        &self,
        a: &[f64],
        b: &[f64],
        mult: impl Fn(f64) -> f64,
    ) -> (Vec<f64>, Vec<f64>) {
        let mut buf = self.forward_pair(a, b);
        for (z, &k2) in buf.iter_mut().zip(&self.k2) {
            *z *= mult(k2);
        }
        self.inverse_in_place(&mut buf);
        buf.into_iter().map(|z| (z.re, z.im)).unzip()
    }

    /// `sum_k w(|k|^2) Re(a_k conj(b_k))` from one packed transform.
    pub fn weighted_cross(&self, a: &[f64], b: &[f64], weight: impl Fn(f64) -> f64) -> f64 {
        let z = self.forward_pair(a, b);
        let mut s = 0.0;
        for (k, zk) in z.iter().enumerate() {
            let zn = z[self.neg[k] as usize];
            s += weight(self.k2[k]) * (zk * zn).im;
        }
        0.5 * s
    }

    /// Spectral partial derivative along `axis`.
    pub fn derivative(&self, values: &[f64], axis: usize) -> Vec<f64> {
        let mut buf = self.forward(values);
        for (flat, z) in buf.iter_mut().enumerate() {
            let idx = self.spectral_index(flat);
            let k = self.k_odd[idx[axis]];
            *z *= Complex64::new(0.0, k);
        }
        self.inverse_in_place(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }

    /// All first partials from a single forward transform.
    pub fn gradient(&self, values: &[f64]) -> Vec<Vec<f64>> {
        let spec = self.forward(values);
        (0..self.grid.dim)
            .map(|axis| {
                let mut buf = spec.clone();
                for (flat, z) in buf.iter_mut().enumerate() {
                    let idx = self.spectral_index(flat);
                    *z *= Complex64::new(0.0, self.k_odd[idx[axis]]);
                }
                self.inverse_in_place(&mut buf);
                buf.into_iter().map(|z| z.re).collect()
            })
            .collect()
    }

    /// Exact phase-shift translation `u(x - y)`; the Nyquist mode keeps only its real part.
    pub fn translate(&self, values: &[f64], y: &[f64]) -> Vec<f64> {
        let mut buf = self.forward(values);
        let m = self.grid.points;
        let dim = self.grid.dim;
        let phases: Vec<Vec<Complex64>> = (0..dim)
            .map(|a| {
                (0..m)
                    .map(|i| {
                        let k = self.k_full[i];
                        if i == m / 2 {
                            Complex64::new((k * y[a]).cos(), 0.0)
                        } else {
                            Complex64::from_polar(1.0, -k * y[a])
                        }
                    })
                    .collect()
            })
            .collect();
        for (flat, z) in buf.iter_mut().enumerate() {
            let idx = self.spectral_index(flat);
            let mut p = Complex64::new(1.0, 0.0);
            for a in 0..dim {
                p *= phases[a][idx[a]];
            }
            *z *= p;
        }
        self.inverse_in_place(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }
}

/// Blocked transpose of a `rows x cols` row-major matrix into `out` (`cols x rows`).
fn transpose(src: &[Complex64], out: &mut [Complex64], rows: usize, cols: usize) {
    const B: usize = 16;
    for rb in (0..rows).step_by(B) {
        for cb in (0..cols).step_by(B) {
            for r in rb..(rb + B).min(rows) {
                for c in cb..(cb + B).min(cols) {
                    out[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}
