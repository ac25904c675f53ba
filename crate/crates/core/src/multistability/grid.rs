use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lindblad::DensityState;
use crate::operator::{coherent_amplitudes, C64};

/// Rectangular sampling window in the `α = x + iy` plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub spacing: f64,
}

impl GridSpec {
    /// Bounding box of `points` widened by `margin` on every side.
    pub fn around(points: &[C64], margin: f64, spacing: f64) -> Self {
        let fold = |f: fn(f64, f64) -> f64, init: f64, part: fn(&C64) -> f64| points.iter().map(part).fold(init, f);
        let (x_lo, x_hi) = (fold(f64::min, 0.0, |z| z.re), fold(f64::max, 0.0, |z| z.re));
        let (y_lo, y_hi) = (fold(f64::min, 0.0, |z| z.im), fold(f64::max, 0.0, |z| z.im));
        Self { x_min: x_lo - margin, x_max: x_hi + margin, y_min: y_lo - margin, y_max: y_hi + margin, spacing }
    }

    fn axis(lo: f64, hi: f64, h: f64) -> Vec<f64> {
        let n = ((hi - lo) / h).round() as usize + 1;
        (0..n).map(|k| lo + k as f64 * h).collect()
    }

    fn validate(&self) -> Result<()> {
        if !(self.spacing > 0.0) || !(self.x_max > self.x_min) || !(self.y_max > self.y_min) {
            return Err(Error::InvalidParameter(format!("degenerate grid {self:?}")));
        }
        let cells = ((self.x_max - self.x_min) / self.spacing) * ((self.y_max - self.y_min) / self.spacing);
        if cells > 4e7 {
            return Err(Error::Resource(format!("grid of {cells:.0} points is too large")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QPeak {
    pub x: f64,
    pub y: f64,
    pub value: f64,
}

impl QPeak {
    pub fn position(&self) -> C64 {
        C64::new(self.x, self.y)
    }
}

/// Q-function samples; `values[iy * xs.len() + ix] = Q(xs[ix] + i ys[iy])`.
#[derive(Clone, Debug, Serialize)]
pub struct PhaseSpaceGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub spacing: f64,
    pub values: Vec<f64>,
    pub peaks: Vec<QPeak>,
}

impl PhaseSpaceGrid {
    /// Samples `f` on `spec` (in parallel) without detecting peaks.
    pub fn sample<F>(spec: &GridSpec, f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> Result<f64> + Sync,
    {
        spec.validate()?;
        let xs = GridSpec::axis(spec.x_min, spec.x_max, spec.spacing);
        let ys = GridSpec::axis(spec.y_min, spec.y_max, spec.spacing);
        let nx = xs.len();
        let values = (0..xs.len() * ys.len())
            .into_par_iter()
            .map(|k| f(xs[k % nx], ys[k / nx]))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self { xs, ys, spacing: spec.spacing, values, peaks: vec![] })
    }

    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.xs.len() + ix]
    }

    /// `Σ Q · h²`
    pub fn riemann_sum(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spacing * self.spacing
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QOptions {
    /// Largest tolerated population of the highest Fock level.
    pub top_fock_tolerance: f64,
    /// Peaks below this fraction of the global maximum are dropped.
    pub min_prominence: f64,
}

impl Default for QOptions {
    fn default() -> Self {
        Self { top_fock_tolerance: 1e-6, min_prominence: 0.05 }
    }
}

/// `Q(α) = ⟨α|ρ|α⟩/π` for a single-mode state, using untruncated coherent
/// amplitudes restricted to the retained Fock levels.
pub fn q_function(rho_field: &DensityState, grid: &GridSpec, opts: &QOptions) -> Result<PhaseSpaceGrid> {
    if rho_field.dims().len() != 1 {
        return Err(Error::Dimension(format!("expected a field-only state, got dims {:?}", rho_field.dims())));
    }
    let d = rho_field.dim();
    let top = rho_field.population(d - 1);
    if top > opts.top_fock_tolerance {
        return Err(Error::Truncation(format!(
            "top Fock level population {top:.2e} exceeds {:.1e}; the truncation {d} is too small",
            opts.top_fock_tolerance
        )));
    }
    let m = rho_field.matrix();
    // row-major copy for cache-friendly inner products
    let dense: Vec<C64> = (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| m[(i, j)]).collect();
    let mut out = PhaseSpaceGrid::sample(grid, |x, y| {
        let c = coherent_amplitudes(C64::new(x, y), d);
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..d {
            let row = &dense[i * d..(i + 1) * d];
            let s: C64 = row.iter().zip(&c).map(|(r, cj)| r * cj).sum();
            acc += c[i].conj() * s;
        }
        Ok(acc.re.max(0.0) / PI)
    })?;
    out.peaks = find_q_peaks(&out, opts.min_prominence);
    Ok(out)
}

/// Strict interior local maxima (8-neighbourhood) above `min_prominence`
/// times the global maximum, refined by a quadratic least-squares fit over
/// the surrounding 3×3 block, sorted by decreasing value.
pub fn find_q_peaks(grid: &PhaseSpaceGrid, min_prominence: f64) -> Vec<QPeak> {
    let (nx, ny) = (grid.xs.len(), grid.ys.len());
    if nx < 3 || ny < 3 {
        return vec![];
    }
    let threshold = min_prominence * grid.max_value();
    let mut peaks = vec![];
    for iy in 1..ny - 1 {
        for ix in 1..nx - 1 {
            let v = grid.value(ix, iy);
            if v < threshold || v <= 0.0 {
                continue;
            }
            let mut block = [[0.0; 3]; 3];
            let mut is_max = true;
            for (dv, row) in block.iter_mut().enumerate() {
                for (du, cell) in row.iter_mut().enumerate() {
                    *cell = grid.value(ix + du - 1, iy + dv - 1);
                    if (du, dv) != (1, 1) && *cell >= v {
                        is_max = false;
                    }
                }
            }
            if is_max {
                let (u, w, value) = refine(&block);
                peaks.push(QPeak { x: grid.xs[ix] + u * grid.spacing, y: grid.ys[iy] + w * grid.spacing, value });
            }
        }
    }
    peaks.sort_by(|a, b| b.value.total_cmp(&a.value));
    peaks
}

/// Vertex of `f ≈ a + bu + cv + du² + euv + fv²` fitted to `block[v+1][u+1]`.
fn refine(block: &[[f64; 3]; 3]) -> (f64, f64, f64) {
    let (mut s0, mut su, mut sv, mut su2, mut sv2, mut suv) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (iv, row) in block.iter().enumerate() {
        for (iu, &f) in row.iter().enumerate() {
            let (u, v) = (iu as f64 - 1.0, iv as f64 - 1.0);
            s0 += f;
            su += u * f;
            sv += v * f;
            su2 += u * u * f;
            sv2 += v * v * f;
            suv += u * v * f;
        }
    }
    let b = su / 6.0;
    let c = sv / 6.0;
    let e = suv / 4.0;
    let sum_dd = (su2 + sv2 - 4.0 * s0 / 3.0) / 2.0;
    let d = (sum_dd + (su2 - sv2) / 2.0) / 2.0;
    let f = sum_dd - d;
    let a = (s0 - 6.0 * sum_dd) / 9.0;
    let det = 4.0 * d * f - e * e;
    let centre = block[1][1];
    if !(d < 0.0 && det > 0.0) {
        return (0.0, 0.0, centre);
    }
    let u = (-2.0 * f * b + e * c) / det;
    let v = (-2.0 * d * c + e * b) / det;
    if u.abs() > 1.0 || v.abs() > 1.0 {
        return (0.0, 0.0, centre);
    }
    (u, v, a + b * u + c * v + d * u * u + e * u * v + f * v * v)
}

/// Nearest detected peak for one predicted position.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PeakMatch {
    pub peak: Option<usize>,
    pub distance: f64,
}

/// Pairs each prediction with its nearest peak, each peak used at most once,
/// closest pairs first.
pub fn match_peaks(predicted: &[C64], peaks: &[QPeak]) -> Vec<PeakMatch> {
    let mut pairs: Vec<(f64, usize, usize)> = vec![];
    for (i, p) in predicted.iter().enumerate() {
        for (j, q) in peaks.iter().enumerate() {
            pairs.push(((p - q.position()).norm(), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = vec![PeakMatch { peak: None, distance: f64::INFINITY }; predicted.len()];
    let mut used = vec![false; peaks.len()];
    for (dist, i, j) in pairs {
        if out[i].peak.is_none() && !used[j] {
            out[i] = PeakMatch { peak: Some(j), distance: dist };
            used[j] = true;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{coherent_state, StateVector};
    use approx::assert_abs_diff_eq;
    use faer::Mat;

    fn options() -> QOptions {
        QOptions { top_fock_tolerance: 1e-6, min_prominence: 0.05 }
    }

    #[test]
    fn vacuum_q_function() {
        let vac = DensityState::pure(&StateVector::fock(30, 0).unwrap()).unwrap();
        let spec = GridSpec { x_min: -6.0, x_max: 6.0, y_min: -6.0, y_max: 6.0, spacing: 0.1 };
        let grid = q_function(&vac, &spec, &options()).unwrap();
        for (k, v) in grid.values.iter().enumerate().step_by(97) {
            let (x, y) = (grid.xs[k % grid.xs.len()], grid.ys[k / grid.xs.len()]);
            assert_abs_diff_eq!(*v, (-(x * x + y * y)).exp() / PI, epsilon = 1e-14);
        }
        assert_eq!(grid.peaks.len(), 1);
        assert_abs_diff_eq!(grid.peaks[0].x, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(grid.peaks[0].y, 0.0, epsilon = 1e-9);
        // Riemann sum of a Gaussian on a 0.1 grid is exact to many digits
        assert_abs_diff_eq!(grid.riemann_sum(), 1.0, epsilon = 1e-3);
    }

    #[test]
    fn coherent_peak_located() {
        let alpha = C64::new(1.23, -0.77);
        let rho = DensityState::pure(&coherent_state(alpha, 40).unwrap()).unwrap();
        let spec = GridSpec::around(&[alpha], 3.0, 0.1);
        let grid = q_function(&rho, &spec, &options()).unwrap();
        assert_eq!(grid.peaks.len(), 1);
        assert!((grid.peaks[0].position() - alpha).norm() < 0.1);
        assert!(grid.values.iter().all(|&v| v >= 0.0));
        assert!(grid.riemann_sum() <= 1.0 + 1e-6);
    }

    #[test]
    fn cat_mixture_gives_two_peaks() {
        let d = 40;
        let plus = DensityState::pure(&coherent_state(C64::new(0.0, 2.0), d).unwrap()).unwrap();
        let minus = DensityState::pure(&coherent_state(C64::new(0.0, -2.0), d).unwrap()).unwrap();
        let mix = Mat::from_fn(d, d, |i, j| (plus.matrix()[(i, j)] + minus.matrix()[(i, j)]) * 0.5);
        let rho = DensityState::from_matrix(mix, vec![d]).unwrap();
        let spec = GridSpec { x_min: -4.0, x_max: 4.0, y_min: -5.0, y_max: 5.0, spacing: 0.1 };
        let grid = q_function(&rho, &spec, &options()).unwrap();
        assert_eq!(grid.peaks.len(), 2);
        let predicted = [C64::new(0.0, 2.0), C64::new(0.0, -2.0)];
        for m in match_peaks(&predicted, &grid.peaks) {
            assert!(m.distance < 0.1);
        }
    }

    #[test]
    fn truncation_guard() {
        let rho = DensityState::pure(&StateVector::fock(6, 5).unwrap()).unwrap();
        let spec = GridSpec { x_min: -1.0, x_max: 1.0, y_min: -1.0, y_max: 1.0, spacing: 0.5 };
        assert!(matches!(q_function(&rho, &spec, &options()), Err(Error::Truncation(_))));
    }

    #[test]
    fn quadratic_fit_recovers_vertex() {
        // f = 5 - (u - 0.3)² - 2(v + 0.2)² + 0.5(u - 0.3)(v + 0.2)
        let f = |u: f64, v: f64| 5.0 - (u - 0.3).powi(2) - 2.0 * (v + 0.2).powi(2) + 0.5 * (u - 0.3) * (v + 0.2);
        let mut block = [[0.0; 3]; 3];
        for (iv, row) in block.iter_mut().enumerate() {
            for (iu, cell) in row.iter_mut().enumerate() {
                *cell = f(iu as f64 - 1.0, iv as f64 - 1.0);
            }
        }
        let (u, v, value) = refine(&block);
        assert_abs_diff_eq!(u, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(v, -0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(value, 5.0, epsilon = 1e-12);
    }
}
